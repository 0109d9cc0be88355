"""Central finite-difference check of autograd gradients."""

from __future__ import annotations

from typing import Callable, Dict, Tuple

import torch

REL_FLOOR = 1e-6


def relative_error(analytic: float, numeric: float, floor: float = REL_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(model: torch.nn.Module, loss_fn: Callable[[], torch.Tensor], h: float = 1e-5,
               floor: float = REL_FLOOR) -> Tuple[float, Dict[str, float]]:
    """Compare autograd gradients with central differences on every trainable scalar.

    ``loss_fn`` evaluates the scalar loss using the model's current
    parameters. Returns the maximum relative error and the per-parameter
    maxima.
    """
    params = [(n, p) for n, p in model.named_parameters() if p.requires_grad]
    if any(p.dtype != torch.float64 for _, p in params):
        raise ValueError("gradient checking needs float64 parameters")
    model.zero_grad()
    loss_fn().backward()
    analytic = {n: p.grad.detach().clone() for n, p in params}
    per_param = {}
    with torch.no_grad():
        for name, p in params:
            flat = p.view(-1)
            g = analytic[name].view(-1)
            worst = 0.0
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                up = loss_fn().item()
                flat[i] = orig - h
                down = loss_fn().item()
                flat[i] = orig
                worst = max(worst, relative_error(g[i].item(), (up - down) / (2 * h), floor))
            per_param[name] = worst
    model.zero_grad()
    return max(per_param.values(), default=0.0), per_param
