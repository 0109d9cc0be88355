"""Run configuration: dataclasses plus JSON loading with line-numbered errors."""

from __future__ import annotations

import dataclasses
import json
import re
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Tuple

from .baselines import DbscanParams
from .errors import ConfigError, DataError
from .nn.models import ModelConfig
from .nn.train import TrainConfig
from .scene import BehaviorParams, SceneConfig, TurnTakingParams
from .targets import PRESETS, BinConfig

STATIC_MODES = ("none", "true_count", "noisy", "coco")
BEHAVIOR_PRESETS = ("default", "strong_coupling")


@dataclass
class SplitConfig:
    train_fraction: float = 0.7  # of sessions; the rest is test
    val_fraction: float = 0.2  # of the training sessions

    def __post_init__(self):
        if not 0 < self.train_fraction < 1 or not 0 < self.val_fraction < 1:
            raise ValueError("split fractions must lie strictly between 0 and 1")


@dataclass
class FeatureFlags:
    use_self_vad: bool = False
    use_speaker_vad: bool = False
    target_shaping: bool = False
    static_mode: str = "true_count"
    static_noise_fraction: float = 0.3  # used when static_mode == "noisy"

    def __post_init__(self):
        if self.static_mode not in STATIC_MODES:
            raise ValueError(f"static_mode must be one of {STATIC_MODES}")

    def halo_channels(self) -> Tuple[str, ...]:
        ch = ["az", "el"]
        if self.use_self_vad:
            ch.append("self_vad")
        if self.use_speaker_vad:
            ch.append("speaker_vad")
        return tuple(ch)


@dataclass
class ModelSizes:
    """Layer widths shared by the HALo and CoCo configs."""

    conv_channels: int = 32
    conv_layers: int = 2
    conv_kernel: int = 5
    pool: int = 2
    hidden: int = 64
    reduced: int = 8
    fusion_dim: int = 32
    head_hidden: int = 16
    central_depth: int = 1
    peripheral_depth: int = 2
    embed_dim: int = 16
    attention: bool = True
    input_norm: str = "dataset"
    mlp_hidden: Tuple[int, ...] = (512, 256)

    def __post_init__(self):
        # full validation happens in ModelConfig
        ModelConfig(**self._common())

    def _common(self) -> dict:
        d = dataclasses.asdict(self)
        return d


@dataclass
class RunConfig:
    seeds: List[int] = field(default_factory=lambda: [2711, 2712, 2713])
    data_seed: int = 2711
    sessions: int = 400
    behavior_preset: str = "strong_coupling"
    scene: SceneConfig = field(default_factory=SceneConfig)
    bins: BinConfig = field(default_factory=BinConfig)
    model: ModelSizes = field(default_factory=ModelSizes)
    train_loc: TrainConfig = field(default_factory=lambda: TrainConfig(lr=3e-3, epochs=30))
    train_count: TrainConfig = field(default_factory=lambda: TrainConfig(lr=3e-3, epochs=30))
    split: SplitConfig = field(default_factory=SplitConfig)
    features: FeatureFlags = field(default_factory=FeatureFlags)
    baseline: DbscanParams = field(default_factory=DbscanParams)
    vad_threshold: float = 8.0
    anchor: str = "start"

    def __post_init__(self):
        if self.behavior_preset not in BEHAVIOR_PRESETS:
            raise ValueError(f"behavior_preset must be one of {BEHAVIOR_PRESETS}")
        if self.sessions < 1 or not self.seeds:
            raise ValueError("need at least one session and one seed")
        if self.anchor not in ("start", "identity"):
            raise ValueError("anchor must be 'start' or 'identity'")

    def scene_config(self) -> SceneConfig:
        if self.behavior_preset == "strong_coupling":
            return dataclasses.replace(self.scene, behavior=BehaviorParams.strong_coupling())
        return self.scene

    def n_classes(self) -> int:
        return 5 if self.features.target_shaping else 4

    def halo_config(self, static_dim: Optional[int] = None) -> ModelConfig:
        if static_dim is None:
            static_dim = {"none": 0, "true_count": 1, "noisy": 1, "coco": self.model.embed_dim}[
                self.features.static_mode
            ]
        return ModelConfig(channels=self.features.halo_channels(), static_dim=static_dim,
                           n_bins=self.bins.n_bins, n_classes=self.n_classes(), **self.model._common())

    def coco_config(self) -> ModelConfig:
        return ModelConfig(channels=("az", "el", "self_vad", "speaker_vad"), static_dim=0,
                           n_bins=self.bins.n_bins, n_classes=self.n_classes(), **self.model._common())

    def mlp_config(self) -> ModelConfig:
        return ModelConfig(channels=("az",), static_dim=0, n_bins=self.bins.n_bins,
                           n_classes=self.n_classes(), **self.model._common())

    def to_dict(self) -> dict:
        return to_jsonable(self)


# --- (de)serialization -------------------------------------------------------


def to_jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    return obj


def _locate(text: str, path: List[str]) -> Optional[int]:
    """Best-effort line number of the key at ``path`` in the JSON source."""
    pos, line = 0, None
    for key in path:
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            return line
        pos = m.start()
        line = text.count("\n", 0, pos) + 1
    return line


def _is_instance(value, tp) -> bool:
    origin = typing.get_origin(tp)
    if tp is Any:
        return True
    if origin is typing.Union:
        return any(_is_instance(value, a) for a in typing.get_args(tp))
    if tp is type(None):
        return value is None
    if tp is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if tp is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if tp is bool:
        return isinstance(value, bool)
    if tp is str:
        return isinstance(value, str)
    if origin in (list, tuple, List, Tuple) or tp in (list, tuple):
        if not isinstance(value, list):
            return False
        args = [a for a in typing.get_args(tp) if a is not Ellipsis]
        return all(_is_instance(v, args[0]) for v in value) if args else True
    if tp is tuple:
        return isinstance(value, list)
    return True


def _build(cls, data, path: List[str], text: str, source: Optional[str]):
    if cls is BinConfig:
        return _build_bins(data, path, text, source)
    if not isinstance(data, dict):
        raise ConfigError(f"'{'.'.join(path) or 'config'}' must be an object", _locate(text, path), source)
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        here = path + [key]
        if key not in names:
            raise ConfigError(f"unknown key '{'.'.join(here)}'", _locate(text, here), source)
        tp = hints[key]
        if dataclasses.is_dataclass(tp):
            kwargs[key] = _build(tp, value, here, text, source)
            continue
        if not _is_instance(value, tp):
            raise ConfigError(f"'{'.'.join(here)}' has the wrong type ({type(value).__name__})",
                              _locate(text, here), source)
        if typing.get_origin(tp) is tuple or (
            typing.get_origin(tp) is typing.Union and any(typing.get_origin(a) is tuple for a in typing.get_args(tp))
        ):
            value = tuple(value) if value is not None else None
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        # point at the first key the message names, else at the enclosing object
        named = [k for k in data if re.search(r"\b%s\b" % re.escape(k), str(exc))]
        line = _locate(text, path + named[:1]) if named else None
        raise ConfigError(f"invalid '{'.'.join(path) or 'config'}': {exc}", line or _locate(text, path) or 1,
                          source) from None


def _build_bins(data, path, text, source) -> BinConfig:
    line = _locate(text, path)
    if not isinstance(data, dict) or set(data) - {"edges", "preset"} or len(data) != 1:
        raise ConfigError("'bins' must be {\"edges\": [...]} or {\"preset\": \"3\"|\"6\"|\"8\"}", line, source)
    try:
        if "preset" in data:
            if str(data["preset"]) not in PRESETS:
                raise ValueError(f"unknown preset {data['preset']!r}")
            return BinConfig.preset(data["preset"])
        edges = data["edges"]
        if not isinstance(edges, list) or not all(_is_instance(e, float) for e in edges):
            raise ValueError("edges must be a list of numbers")
        return BinConfig(tuple(edges))
    except ValueError as exc:
        raise ConfigError(f"invalid 'bins': {exc}", line, source) from None


def parse_config(text: str, source: Optional[str] = None) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
    return _build(RunConfig, data, [], text, source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def save_config(config: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
