"""Training loop (BCE + Adam + early stopping) and evaluation.

Everything is deterministic given the seed: parameter init, epoch shuffles,
and train-mode crop offsets all derive from one SeedSequence, and tracks are
sorted by id before any of that, so the manifest's on-disk ordering never
matters.  Early stopping watches validation loss and the best-validation
parameters are restored before returning.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .formats import ManifestEntry, load_split
from .metrics import MetricsReport, compute_metrics
from .model import FUSION_MODES, FstConfig, FstParams, forward, init_params
from .optim import AdamState, adam_step, zero_grads
from .segmentation import pad_or_crop
from .ssm import SegmentEmbeddingSequence
from .tensor import GradTape, bce_with_logits


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr: float = 1e-4
    wd: float = 1e-2
    batch_size: int = 8
    patience: int = 20
    seed: int = 0
    fusion_mode: str | None = None  # overrides FstConfig when set

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        # lr 0 is allowed: a no-op optimizer is useful as a control
        if self.lr < 0 or self.wd < 0:
            raise ValueError("lr and wd must be >= 0")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.fusion_mode is not None and self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"fusion_mode must be one of {FUSION_MODES}, "
                             f"got {self.fusion_mode!r}")


@dataclass
class TrainHistory:
    train_loss: list
    val_loss: list
    val_acc: list
    best_epoch: int  # 0-based index into the lists
    stop_reason: str  # "patience" or "max_epochs"

    def __post_init__(self):
        n = len(self.train_loss)
        if not (len(self.val_loss) == len(self.val_acc) == n) or n == 0:
            raise ValueError("history columns must be nonempty and equal-length")
        if not 0 <= self.best_epoch < n:
            raise ValueError(f"best_epoch {self.best_epoch} outside [0, {n})")
        if self.val_loss[self.best_epoch] != min(self.val_loss):
            raise ValueError("best_epoch is not the val-loss minimum")

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return {"train_loss": self.train_loss, "val_loss": self.val_loss,
                "val_acc": self.val_acc, "best_epoch": self.best_epoch,
                "stop_reason": self.stop_reason}

    def write_csv(self, path) -> None:
        lines = ["epoch,train_loss,val_loss,val_acc"]
        for i in range(self.n_epochs):
            lines.append(f"{i + 1},{self.train_loss[i]!r},"
                         f"{self.val_loss[i]!r},{self.val_acc[i]!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def split_manifest(entries: list[ManifestEntry], seed: int,
                   ratios: tuple = (8, 1, 1)) -> list[ManifestEntry]:
    """Assign train/val/test tags, 8:1:1 stratified by class.

    Entry order is preserved; only the tags change.  Assignment shuffles each
    class's sorted track ids with a seeded generator, so it depends on seed
    and content, never on manifest order.
    """
    if ratios != (8, 1, 1):
        raise ValueError("only the 8:1:1 split is supported")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    assignment = {}
    for label in (0, 1):
        ids = sorted(e.track_id for e in entries if e.label == label)
        if not ids:
            continue
        n = len(ids)
        if n < 3:
            warnings.warn(f"class {label} has only {n} track(s); split is best-effort")
            n_val = 1 if n >= 2 else 0
            n_test = 0
        else:
            n_val = max(1, round(n / 10))
            n_test = max(1, round(n / 10))
        order = rng.permutation(n)
        for rank, idx in enumerate(order):
            if rank < n_val:
                split = "val"
            elif rank < n_val + n_test:
                split = "test"
            else:
                split = "train"
            assignment[ids[idx]] = split
    return [dataclasses.replace(e, split=assignment[e.track_id]) for e in entries]


# ---------------------------------------------------------------------------
# forward helpers (no tape)

def predict_prob(params: FstParams, seq: SegmentEmbeddingSequence) -> float:
    """P(AI-generated) for one track; pads/crops to the model length first."""
    fixed, _ = pad_or_crop(seq, target=params.config.max_segments, mode="eval")
    logit, _ = forward(fixed, params)
    return float(expit(logit.data))


def _val_stats(params: FstParams, seqs: list) -> tuple:
    """(mean BCE loss, accuracy) over a frozen-parameter pass."""
    losses, correct = [], 0
    for seq in seqs:
        fixed, _ = pad_or_crop(seq, target=params.config.max_segments, mode="eval")
        logit, _ = forward(fixed, params)
        losses.append(bce_with_logits(logit, seq.label).item())
        correct += int((logit.data >= 0.0) == (seq.label == 1))
    return float(np.mean(losses)), correct / len(seqs)


def evaluate(params: FstParams, seqs: list) -> MetricsReport:
    """Score a split: threshold 0.5 on sigmoid(logit), AUC from raw scores."""
    if not seqs:
        raise ValueError("cannot evaluate an empty split")
    labels = []
    for seq in seqs:
        if seq.label is None:
            raise ValueError(f"track {seq.track_id} has no label")
        labels.append(seq.label)
    probs = [predict_prob(params, seq) for seq in seqs]
    return compute_metrics(np.asarray(probs), np.asarray(labels))


# ---------------------------------------------------------------------------
# training

def _snapshot(params: FstParams) -> list:
    return [p.data.copy() for _, p in params.named_parameters()]


def _restore(params: FstParams, snap: list) -> None:
    for (_, p), saved in zip(params.named_parameters(), snap):
        p.data[...] = saved


def train(manifest_path, fst_config: FstConfig, tc: TrainConfig):
    """Mini-batch BCE training; returns (params, TrainHistory).

    Raises NonFiniteError if the loss diverges, ValueError on an empty
    train or val split.
    """
    if tc.fusion_mode is not None:
        fst_config = dataclasses.replace(fst_config, fusion_mode=tc.fusion_mode)

    train_seqs = load_split(manifest_path, "train")
    val_seqs = load_split(manifest_path, "val")
    if not train_seqs or not val_seqs:
        raise ValueError("manifest needs nonempty train and val splits")
    train_seqs.sort(key=lambda s: s.track_id)
    val_seqs.sort(key=lambda s: s.track_id)

    init_ss, loop_ss = np.random.SeedSequence(tc.seed).spawn(2)
    params = init_params(fst_config, np.random.default_rng(init_ss))
    loop_rng = np.random.default_rng(loop_ss)
    named = list(params.named_parameters())
    state = AdamState(named)

    target = fst_config.max_segments
    history_train, history_val, history_acc = [], [], []
    best_val = np.inf
    best_epoch = -1
    best_snap = None
    epochs_since_best = 0
    stop_reason = "max_epochs"

    for epoch in range(tc.epochs):
        order = loop_rng.permutation(len(train_seqs))
        epoch_losses = []
        for start in range(0, len(order), tc.batch_size):
            batch = [train_seqs[i] for i in order[start : start + tc.batch_size]]
            zero_grads(named)
            for seq in batch:
                fixed, _ = pad_or_crop(seq, target=target, mode="train", rng=loop_rng)
                with GradTape() as tape:
                    logit, _ = forward(fixed, params)
                    loss = bce_with_logits(logit, seq.label)
                    loss.check_finite(f"training loss (track {seq.track_id})")
                    tape.backward(loss)
                epoch_losses.append(loss.item())
            # grads accumulated over the batch; average to match mean loss
            for _, p in named:
                if p.grad is not None:
                    p.grad /= len(batch)
            adam_step(named, state, lr=tc.lr, wd=tc.wd)
        val_loss, val_acc = _val_stats(params, val_seqs)
        history_train.append(float(np.mean(epoch_losses)))
        history_val.append(val_loss)
        history_acc.append(val_acc)

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_snap = _snapshot(params)
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= tc.patience:
                stop_reason = "patience"
                break

    _restore(params, best_snap)
    params.check_finite()
    history = TrainHistory(train_loss=history_train, val_loss=history_val,
                           val_acc=history_acc, best_epoch=best_epoch,
                           stop_reason=stop_reason)
    return params, history
