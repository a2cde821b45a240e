"""What the fusion gate learns: per-segment gate means for real vs generated
tracks, printed as curves over segment position.  Also writes the gates CSV
that the plotting frontend consumes."""

import tempfile
from pathlib import Path

import numpy as np

from segfuse.checkpoint import save_checkpoint
from segfuse.cli import main
from segfuse.formats import load_split
from segfuse.model import FstConfig, forward
from segfuse.segmentation import pad_or_crop
from segfuse.synthgen import SynthSpec, gen_dataset
from segfuse.training import TrainConfig, train

workdir = Path(tempfile.mkdtemp(prefix="segfuse_gates_"))
manifest = gen_dataset(SynthSpec(n_tracks=60, seed=0), workdir)

config = FstConfig(d_in=32, d_model=16, n_heads=2, n_layers_embed=1,
                   n_layers_ssm=1, d_ffn=32)
params, _ = train(manifest, config, TrainConfig(epochs=10, lr=1e-3, seed=0))

# gate mean per segment position, split by class
sums = {0: np.zeros(48), 1: np.zeros(48)}
counts = {0: np.zeros(48), 1: np.zeros(48)}
for seq in load_split(manifest, "test"):
    fixed, _ = pad_or_crop(seq, target=48, mode="eval")
    _, trace = forward(fixed, params)
    sums[seq.label][:fixed.n_valid] += trace.mean_gate[:fixed.n_valid]
    counts[seq.label][:fixed.n_valid] += 1

print("position   gate(real)  gate(fake)")
for k in range(0, 48, 4):
    r = sums[0][k] / counts[0][k] if counts[0][k] else float("nan")
    f = sums[1][k] / counts[1][k] if counts[1][k] else float("nan")
    print(f"{k:>8}   {r:>10.4f}  {f:>10.4f}")

real_mean = (sums[0].sum() / counts[0].sum())
fake_mean = (sums[1].sum() / counts[1].sum())
side = "contents" if fake_mean > real_mean else "structure"
print(f"\noverall: real {real_mean:.4f}, fake {fake_mean:.4f}")
print(f"on generated tracks the gate leans toward the {side} stream")

# same export via the CLI, for the plots package
ckpt = workdir / "model.ckpt"
save_checkpoint(ckpt, params)
main(["export-gates", "--ckpt", str(ckpt), "--data", str(manifest),
      "--split", "test", "--out", str(workdir / "gates.csv")])
print(f"\ngates CSV written to {workdir / 'gates.csv'}")
