"""Train the tiny preset on a small synthetic dataset, end to end, and print
the learning curve plus held-out metrics.  Takes a few seconds on a laptop."""

import tempfile
from pathlib import Path

from segfuse.model import FstConfig
from segfuse.synthgen import SynthSpec, gen_dataset
from segfuse.training import TrainConfig, evaluate, load_split, train

workdir = Path(tempfile.mkdtemp(prefix="segfuse_demo_"))
spec = SynthSpec(n_tracks=60, seed=0)
manifest = gen_dataset(spec, workdir)
print(f"dataset: {2 * spec.n_tracks} tracks, d={spec.d}, at {workdir}")

config = FstConfig(d_in=spec.d, d_model=16, n_heads=2, n_layers_embed=1,
                   n_layers_ssm=1, d_ffn=32)
tc = TrainConfig(epochs=12, lr=1e-3, patience=6, seed=0)
params, history = train(manifest, config, tc)

print("\nepoch  train_loss  val_loss  val_acc")
for i in range(history.n_epochs):
    marker = "  <- best" if i == history.best_epoch else ""
    print(f"{i + 1:>5}  {history.train_loss[i]:>10.4f}  "
          f"{history.val_loss[i]:>8.4f}  {history.val_acc[i]:>7.3f}{marker}")
print(f"stopped: {history.stop_reason}")

report = evaluate(params, load_split(manifest, "test"))
print(f"\ntest accuracy  = {report.accuracy:.3f}")
print(f"test AUC       = {report.auc:.3f}" if report.auc is not None else "AUC undefined")
print(f"confusion      = tp {report.tp}, fp {report.fp}, tn {report.tn}, fn {report.fn}")
