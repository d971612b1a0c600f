"""Command-line driver for every pipeline stage.

Exit codes: 0 success, 1 user error (bad input, missing files), 2 internal error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline, synthlab
from .autoenc import ConvAutoencoder, TrainConfig, save_checkpoint, train
from .embed import BackendSpec
from .errors import CallsiftError
from .store import ProjectConfig, init_project, open_project


def _add_project_arg(p):
    p.add_argument("--project", default=".", help="project directory (default: cwd)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="callsift",
        description="Semi-supervised triage of acoustic detections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a new project directory")
    _add_project_arg(p)
    p.add_argument("--k", type=int, default=None, help="cluster count override")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic corpus into the project")
    _add_project_arg(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--positive", type=int, default=30)
    p.add_argument("--negative", type=int, default=30)
    p.add_argument("--reference", type=int, default=12)
    p.add_argument("--snr-db", type=float, default=10.0)

    p = sub.add_parser("ingest", help="decode and window corpus WAVs")
    _add_project_arg(p)

    p = sub.add_parser("spectrogram", help="compute and filter log-mel spectrograms")
    _add_project_arg(p)

    p = sub.add_parser("embed", help="embed detector-passing windows")
    _add_project_arg(p)
    p.add_argument(
        "--backend",
        choices=("baseline-flatten", "autoencoder", "external"),
        default=None,
    )
    p.add_argument("--file", default=None, help="external AEMB1 embeddings file")
    p.add_argument("--checkpoint", default=None, help="autoencoder checkpoint file")

    p = sub.add_parser("train-ae", help="train the autoencoder on reference spectrograms")
    _add_project_arg(p)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="checkpoint path (default: project/autoencoder.aeck)")

    p = sub.add_parser("cluster", help="k-means over reference embeddings")
    _add_project_arg(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("project2d", help="2-D projection of all embeddings")
    _add_project_arg(p)
    p.add_argument("--method", choices=("pca", "umap"), default="pca")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("propagate", help="propagate cluster labels to field windows")
    _add_project_arg(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--radius", type=float, default=None)
    g.add_argument("--auto", action="store_true", help="auto-calibrate the radius")

    p = sub.add_parser("verdict", help="aggregate window verdicts per recording")
    _add_project_arg(p)

    p = sub.add_parser("evaluate", help="compare verdicts against ground truth")
    _add_project_arg(p)
    p.add_argument("--truth", required=True, help="CSV recording_id,true_positive")

    p = sub.add_parser("report", help="print project status and metrics")
    _add_project_arg(p)

    p = sub.add_parser("serve", help="run the review web service")
    _add_project_arg(p)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    return parser


def _run(args) -> int:
    if args.command == "init":
        cfg = ProjectConfig(seed=args.seed)
        if args.k is not None:
            cfg.k = args.k
        init_project(args.project, cfg)
        print(f"initialized project at {args.project}")
        return 0

    project = open_project(args.project)

    if args.command == "synth":
        spec = synthlab.SynthSpec(
            seed=args.seed,
            n_reference=args.reference,
            n_positive=args.positive,
            n_negative=args.negative,
            snr_db=args.snr_db,
        )
        refs, fields, truth = synthlab.gen_corpus(spec, project.root)
        print(f"wrote {len(refs)} reference and {len(fields)} field recordings; "
              f"truth at {truth}")
    elif args.command == "ingest":
        manifest = pipeline.run_ingest(project)
        print(f"windowed {len(manifest)} windows")
    elif args.command == "spectrogram":
        payload = pipeline.run_spectrogram(project)
        print(f"kept {len(payload['window_ids'])} of {len(payload['manifest'])} windows")
    elif args.command == "embed":
        backend = None
        if args.backend is not None:
            backend = BackendSpec(
                args.backend, checkpoint=args.checkpoint, external_path=args.file
            )
        payload = pipeline.run_embed(project, backend)
        for role, m in payload.items():
            print(f"{role}: {len(m)} x {m.dim} ({m.backend_tag})")
    elif args.command == "train-ae":
        data = project.load_stage("spectrogrammed")
        role_of = {m["window_id"]: m["corpus_role"] for m in data["manifest"]}
        ref = np.array(
            [v for v, wid in zip(data["values"], data["window_ids"])
             if role_of[wid] == "reference"]
        )
        if len(ref) == 0:
            raise CallsiftError("no reference spectrograms to train on")
        model = ConvAutoencoder(seed=args.seed)
        cfg = TrainConfig(
            learning_rate=args.learning_rate,
            batch_size=args.batch_size,
            epochs=args.epochs,
            seed=args.seed,
        )
        curve = train(model, ref, cfg)
        out = args.out or str(project.root / "autoencoder.aeck")
        save_checkpoint(model, out)
        print(f"trained {args.epochs} epochs, loss {curve[0]:.5f} -> {curve[-1]:.5f}; "
              f"checkpoint at {out}")
    elif args.command == "cluster":
        payload = pipeline.run_cluster(project, k=args.k, seed=args.seed)
        print(f"k={payload['model'].k}, inertia {payload['model'].inertia:.4f}")
    elif args.command == "project2d":
        rows = pipeline.run_project2d(project, method=args.method, seed=args.seed)
        print(f"projected {len(rows)} windows with {args.method}")
    elif args.command == "propagate":
        radius = None if args.auto else args.radius
        summary = pipeline.run_propagate(project, radius=radius)
        print(f"assigned {summary['assigned']}, unassigned {summary['unassigned']}")
    elif args.command == "verdict":
        verdicts = pipeline.run_verdict(project)
        pos = sum(1 for v in verdicts if v.verdict == "positive")
        print(f"{pos} positive of {len(verdicts)} recordings")
    elif args.command == "evaluate":
        if not Path(args.truth).exists():
            raise CallsiftError(f"truth file not found: {args.truth}")
        metrics = pipeline.run_evaluate(project, args.truth)
        print(json.dumps(metrics.to_json(), indent=2))
    elif args.command == "report":
        status = project.status()
        report = {"root": str(project.root), "stages": status}
        if project.metrics_path.exists():
            report["metrics"] = json.loads(project.metrics_path.read_text())
        print(json.dumps(report, indent=2))
    elif args.command == "serve":
        import uvicorn

        from .service import create_app

        port = args.port or int(os.environ.get("PORT", 8000))
        uvicorn.run(create_app(project), host=args.host, port=port)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return _run(args)
    except (CallsiftError, FileNotFoundError, FileExistsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - internal failure path
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
