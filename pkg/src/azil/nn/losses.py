"""Weighted multi-head binary cross-entropy and multiclass cross-entropy."""

from __future__ import annotations

import torch
from torch.nn import functional as F

PROB_EPS = 1e-7


def loss_loc(probs: torch.Tensor, target: torch.Tensor, weights=None, eps: float = PROB_EPS) -> torch.Tensor:
    """Per-zone weighted BCE summed over zones and averaged over the batch.

    ``probs`` and ``target`` are ``(B, n_bins)``; ``weights`` is ``(n_bins,)``
    or None for uniform weights of one. Probabilities are clamped to
    ``[eps, 1 - eps]`` before the logs.
    """
    probs = torch.atleast_2d(probs)
    target = torch.atleast_2d(target).to(probs.dtype)
    if probs.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(probs.shape)} vs {tuple(target.shape)}")
    p = probs.clamp(eps, 1.0 - eps)
    per_bin = target * torch.log(p) + (1.0 - target) * torch.log1p(-p)
    if weights is not None:
        per_bin = per_bin * torch.as_tensor(weights, dtype=probs.dtype)
    return -per_bin.sum(dim=-1).mean()


def loss_clf(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean negative log-softmax of the target class."""
    logits = torch.atleast_2d(logits)
    target = torch.as_tensor(target, dtype=torch.long).reshape(-1)
    n_classes = logits.shape[-1]
    if target.numel() and (target.min() < 0 or target.max() >= n_classes):
        raise ValueError(f"class index outside [0, {n_classes})")
    return F.cross_entropy(logits, target)
