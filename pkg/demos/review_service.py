"""Prepare a project and serve the review API (and UI, if built).

Creates a synthetic project, runs it up to clustering, and starts the HTTP
service so you can walk the expert loop by hand:

    GET  /api/clusters                   list clusters and labels
    GET  /api/clusters/0/samples         3x3 review grid for cluster 0
    POST /api/clusters/0/label           {"label": "call"}
    POST /api/propagate                  {"radius": null}
    GET  /api/recordings                 per-recording verdicts
    GET  /api/metrics                    requires `callsift evaluate` first

Run:  python3 demos/review_service.py [--port 8000]
"""
import argparse
import tempfile
from pathlib import Path

import uvicorn

from callsift import pipeline
from callsift.service import create_app
from callsift.store import ProjectConfig, init_project
from callsift.synthlab import SynthSpec, gen_corpus


def prepare(workdir: Path):
    project = init_project(workdir / "project", ProjectConfig(k=12))
    print("generating corpus and clustering (about a minute)...")
    gen_corpus(SynthSpec(seed=0, n_positive=10, n_negative=10), project.root)
    pipeline.run_ingest(project)
    pipeline.run_spectrogram(project)
    pipeline.run_embed(project)
    pipeline.run_cluster(project)
    return project


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--workdir", default=None)
    args = parser.parse_args()

    if args.workdir:
        project = prepare(Path(args.workdir))
        uvicorn.run(create_app(project), host="127.0.0.1", port=args.port)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            project = prepare(Path(tmp))
            uvicorn.run(create_app(project), host="127.0.0.1", port=args.port)


if __name__ == "__main__":
    main()
