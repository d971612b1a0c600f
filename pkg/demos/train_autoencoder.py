"""Train the convolutional autoencoder on synthetic spectrograms.

Builds a small corpus of clean calls, trains the 128-d bottleneck autoencoder
for a few epochs, saves a checkpoint, and compares reconstruction error before
and after. Expect a couple of minutes on a laptop CPU; pass --epochs to trade
time for quality.

Run:  python3 demos/train_autoencoder.py [--epochs N]
"""
import argparse
import tempfile
from pathlib import Path

import numpy as np

from callsift import dsp
from callsift.autoenc import ConvAutoencoder, TrainConfig, save_checkpoint, train
from callsift.ingest import WindowConfig, decode_wav, resample, window
from callsift.synthlab import SynthSpec, gen_corpus


def build_dataset(workdir: Path, n_recordings: int = 20) -> np.ndarray:
    gen_corpus(
        SynthSpec(seed=5, n_reference=n_recordings, n_positive=0, n_negative=0),
        workdir,
    )
    fb = dsp.mel_filterbank(dsp.MelConfig(), 1024, 32000)
    specs = []
    for p in sorted((workdir / "corpus" / "reference").glob("*.wav")):
        clip = resample(decode_wav(p.read_bytes(), p.stem), 32000)
        for w in window(clip, WindowConfig()):
            specs.append(dsp.log_mel(w, 32000, filterbank=fb).values)
    return np.array(specs, dtype=np.float32)


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--out", default="autoencoder.aeck")
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        data = build_dataset(Path(tmp))
    print(f"dataset: {data.shape[0]} spectrograms of {data.shape[1]}x{data.shape[2]}")

    model = ConvAutoencoder(seed=1)
    cfg = TrainConfig(epochs=args.epochs, seed=0)
    curve = train(model, data, cfg)
    print("loss curve:", " ".join(f"{v:.4f}" for v in curve))
    print(f"final/initial loss ratio: {curve[-1] / curve[0]:.3f}")

    save_checkpoint(model, args.out)
    print(f"checkpoint written to {args.out}")
    print("use it with:  callsift embed --backend autoencoder --checkpoint", args.out)


if __name__ == "__main__":
    main()
