"""JSON checkpoints: ``{kind, config, seed, params: {name: {shape, data}}, ...}``."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .models import CocoNet, DTYPE, HaloCocoNet, HaloNet, MlpBaseline, ModelConfig

KINDS = ("halo", "coco", "mlp-loc", "mlp-count", "halo-coco")


def model_kind(model) -> str:
    if isinstance(model, HaloCocoNet):
        return "halo-coco"
    if isinstance(model, HaloNet):
        return "halo"
    if isinstance(model, CocoNet):
        return "coco"
    if isinstance(model, MlpBaseline):
        return f"mlp-{model.task}"
    raise TypeError(f"unsupported model type {type(model).__name__}")


def build_model(kind: str, config, seed: int):
    if kind == "halo":
        return HaloNet(ModelConfig(**config), seed)
    if kind == "coco":
        return CocoNet(ModelConfig(**config), seed)
    if kind in ("mlp-loc", "mlp-count"):
        return MlpBaseline(ModelConfig(**config), task=kind[4:], seed=seed)
    if kind == "halo-coco":
        return HaloCocoNet(HaloNet(ModelConfig(**config["halo"]), seed), CocoNet(ModelConfig(**config["coco"]), seed))
    raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")


def model_config(model):
    if isinstance(model, HaloCocoNet):
        return {"halo": model.halo.config.to_dict(), "coco": model.coco.config.to_dict()}
    return model.config.to_dict()


def to_dict(model, extra=None) -> dict:
    params = {
        name: {"shape": list(t.shape), "data": t.detach().reshape(-1).tolist()}
        for name, t in model.state_dict().items()
    }
    doc = {"kind": model_kind(model), "config": model_config(model), "seed": int(model.seed), "params": params}
    if extra:
        doc.update(extra)
    return doc


def from_dict(doc: dict):
    model = build_model(doc["kind"], doc["config"], doc["seed"])
    state = model.state_dict()
    params = doc["params"]
    if set(params) != set(state):
        missing = sorted(set(state) - set(params))
        unknown = sorted(set(params) - set(state))
        raise ValueError(f"checkpoint parameters do not match the model (missing {missing}, unknown {unknown})")
    loaded = {}
    for name, ref in state.items():
        shape = tuple(params[name]["shape"])
        if shape != tuple(ref.shape):
            raise ValueError(f"parameter {name}: shape {shape} != expected {tuple(ref.shape)}")
        loaded[name] = torch.as_tensor(np.asarray(params[name]["data"], dtype=np.float64), dtype=DTYPE).reshape(shape)
    model.load_state_dict(loaded)
    model.eval()
    return model


def save_checkpoint(path, model, extra=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_dict(model, extra), sort_keys=True))
    return path


def load_checkpoint(path):
    """Return ``(model, document)``."""
    doc = json.loads(Path(path).read_text())
    return from_dict(doc), doc
