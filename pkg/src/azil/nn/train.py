"""Mini-batch Adam training with best-validation checkpoint selection."""

from __future__ import annotations

import contextlib
import copy
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
import torch

from .losses import loss_clf, loss_loc
from .models import DTYPE


@dataclass
class Batch:
    x: torch.Tensor  # (N, 4, T)
    y: torch.Tensor  # (N, n_bins) zone labels or (N,) class indices
    static: Optional[torch.Tensor] = None  # (N, S)

    def __post_init__(self):
        self.x = torch.as_tensor(np.asarray(self.x), dtype=DTYPE)
        y = np.asarray(self.y)
        self.y = torch.as_tensor(y, dtype=torch.long if y.ndim == 1 else DTYPE)
        if self.static is not None:
            self.static = torch.as_tensor(np.asarray(self.static), dtype=DTYPE).reshape(len(self.x), -1)
        if len(self.y) != len(self.x):
            raise ValueError("inputs and targets differ in length")

    def __len__(self):
        return self.x.shape[0]

    def take(self, idx) -> "Batch":
        out = copy.copy(self)
        out.x, out.y = self.x[idx], self.y[idx]
        out.static = None if self.static is None else self.static[idx]
        return out


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 60
    batch_size: int = 64
    weighted_loss: bool = True
    static_noise_fraction: float = 0.0

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("lr, epochs and batch_size must be positive")
        if not 0.0 <= self.static_noise_fraction <= 1.0:
            raise ValueError("static_noise_fraction must lie in [0, 1]")


@dataclass
class History:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    best_epoch: int = -1

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch]

    def to_dict(self):
        return asdict(self)


@contextlib.contextmanager
def deterministic_mode(enabled: bool = True):
    """Single-threaded, deterministic kernels for the duration of the block."""
    if not enabled:
        yield
        return
    threads = torch.get_num_threads()
    was = torch.are_deterministic_algorithms_enabled()
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)
    try:
        yield
    finally:
        torch.set_num_threads(threads)
        torch.use_deterministic_algorithms(was)


def perturb_static(static: torch.Tensor, fraction: float, generator: torch.Generator) -> torch.Tensor:
    """Add U(-1, 1) noise to ``floor(fraction * B + 0.5)`` randomly chosen rows."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    n_rows = static.shape[0]
    n = int(math.floor(fraction * n_rows + 0.5))
    if n == 0:
        return static
    rows = torch.randperm(n_rows, generator=generator)[:n]
    noise = torch.rand((n,) + tuple(static.shape[1:]), generator=generator, dtype=static.dtype) * 2.0 - 1.0
    out = static.clone()
    out[rows] = out[rows] + noise
    return out


def batch_loss(model, batch: Batch, weights=None) -> torch.Tensor:
    out = model(batch.x, batch.static)
    if model.task == "loc":
        return loss_loc(out, batch.y, weights)
    return loss_clf(out, batch.y)


def fit_normalization(model, x: torch.Tensor):
    """Set dataset-level input statistics of every trainable input stage."""
    inner = getattr(model, "halo", model)
    inner.norm.fit(inner.select(x))


def evaluate_loss(model, batch: Batch, weights=None, batch_size: int = 256) -> float:
    model.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(batch), batch_size):
            part = batch.take(slice(start, start + batch_size))
            total += batch_loss(model, part, weights).item() * len(part)
    return total / len(batch)


def train(model, train_set: Batch, val_set: Batch, config: TrainConfig = TrainConfig(), seed: int = 2711,
          class_weights=None, deterministic: bool = True):
    """Train in place and return ``(model, history)`` with the best-validation weights loaded."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation splits must be non-empty")
    weights = None
    if model.task == "loc" and config.weighted_loss and class_weights is not None:
        weights = torch.as_tensor(np.asarray(class_weights), dtype=DTYPE)
    history = History()
    with deterministic_mode(deterministic):
        fit_normalization(model, train_set.x)
        gen = torch.Generator().manual_seed(int(seed))
        params = [p for p in model.parameters() if p.requires_grad]
        opt = torch.optim.Adam(params, lr=config.lr)
        best_state, best = None, math.inf
        for epoch in range(config.epochs):
            model.train()
            order = torch.randperm(len(train_set), generator=gen)
            running = 0.0
            for start in range(0, len(train_set), config.batch_size):
                part = train_set.take(order[start : start + config.batch_size])
                if config.static_noise_fraction and part.static is not None:
                    part.static = perturb_static(part.static, config.static_noise_fraction, gen)
                opt.zero_grad()
                loss = batch_loss(model, part, weights)
                loss.backward()
                opt.step()
                running += loss.item() * len(part)
            history.train_loss.append(running / len(train_set))
            val = evaluate_loss(model, val_set, weights)
            history.val_loss.append(val)
            if val < best:
                best, history.best_epoch = val, epoch
                best_state = copy.deepcopy(model.state_dict())
        model.load_state_dict(best_state)
    model.eval()
    return model, history


def predict(model, x, static=None, batch_size: int = 256) -> np.ndarray:
    """Model outputs (probabilities or logits) as a numpy array."""
    x = torch.as_tensor(np.asarray(x), dtype=DTYPE)
    if static is not None:
        static = torch.as_tensor(np.asarray(static), dtype=DTYPE).reshape(len(x), -1)
    model.eval()
    outs = []
    with torch.no_grad():
        for start in range(0, len(x), batch_size):
            s = None if static is None else static[start : start + batch_size]
            outs.append(model(x[start : start + batch_size], s).numpy())
    return np.concatenate(outs) if outs else np.zeros((0, 0))
