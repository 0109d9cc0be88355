"""HALo, CoCo, the segment MLP baseline and the stage-wise HALo-CoCo composition.

All models take the full segment tensor ``x`` of shape ``(B, 4, T)`` with
channels ``CHANNELS`` and pick the channels named in their config.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Tuple

import torch
from torch import nn
from torch.nn import functional as F

CHANNELS = ("az", "el", "self_vad", "speaker_vad")
DTYPE = torch.float64


@dataclass
class ModelConfig:
    channels: Tuple[str, ...] = ("az", "el")
    conv_channels: int = 32  # F
    conv_layers: int = 2
    conv_kernel: int = 5
    pool: int = 2
    hidden: int = 64  # H
    reduced: int = 8  # K, must satisfy K < H // 4
    static_dim: int = 1  # 0 disables static fusion
    fusion_dim: int = 32
    head_hidden: int = 16
    central_depth: int = 1
    peripheral_depth: int = 2
    n_bins: int = 6
    n_classes: int = 4
    embed_dim: int = 16  # D, CoCo penultimate width
    attention: bool = True
    input_norm: str = "dataset"  # or "segment"
    mlp_hidden: Tuple[int, ...] = (512, 256)
    seq_len: int = 150

    def __post_init__(self):
        self.channels = tuple(self.channels)
        self.mlp_hidden = tuple(self.mlp_hidden)
        unknown = set(self.channels) - set(CHANNELS)
        if unknown:
            raise ValueError(f"unknown input channels {sorted(unknown)}")
        if not self.reduced < self.hidden // 4:
            raise ValueError("reduced dim K must satisfy K < H // 4")
        if self.peripheral_depth <= self.central_depth:
            raise ValueError("peripheral heads must be deeper than central heads")
        if self.input_norm not in ("dataset", "segment"):
            raise ValueError("input_norm must be 'dataset' or 'segment'")

    @property
    def channel_index(self):
        return [CHANNELS.index(c) for c in self.channels]

    def to_dict(self):
        return asdict(self)


def normalize_input(x: torch.Tensor, mean: Optional[torch.Tensor] = None,
                    std: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Per-channel standardization of ``(..., C, T)`` input.

    Without ``mean``/``std`` the statistics come from each segment itself
    (zero-variance channels map to zeros); otherwise the given per-channel
    statistics are used.
    """
    if mean is None:
        mean = x.mean(dim=-1, keepdim=True)
        std = x.std(dim=-1, unbiased=False, keepdim=True)
        return torch.where(std > 0, (x - mean) / torch.where(std > 0, std, torch.ones_like(std)),
                           torch.zeros_like(x))
    return (x - mean[:, None]) / std[:, None]


class InputNorm(nn.Module):
    def __init__(self, n_channels: int, mode: str = "dataset"):
        super().__init__()
        self.mode = mode
        self.register_buffer("mean", torch.zeros(n_channels, dtype=DTYPE))
        self.register_buffer("std", torch.ones(n_channels, dtype=DTYPE))

    def fit(self, x: torch.Tensor):
        """Set dataset statistics from ``(N, C, T)`` training inputs."""
        self.mean.copy_(x.mean(dim=(0, 2)))
        std = x.std(dim=(0, 2), unbiased=False)
        self.std.copy_(torch.where(std > 0, std, torch.ones_like(std)))

    def forward(self, x):
        if self.mode == "segment":
            return normalize_input(x)
        return normalize_input(x, self.mean, self.std)


class FeatureSummarizer(nn.Module):
    """Stacked conv1d + ReLU + max-pool blocks; 'same' padding, floor pooling."""

    def __init__(self, in_channels: int, channels: int, layers: int, kernel: int, pool: int):
        super().__init__()
        self.kernel = kernel
        self.pool = pool
        self.convs = nn.ModuleList(
            nn.Conv1d(in_channels if i == 0 else channels, channels, kernel, padding=kernel // 2, dtype=DTYPE)
            for i in range(layers)
        )

    def output_length(self, t: int) -> int:
        for _ in self.convs:
            t = t // self.pool
        return t

    def forward(self, x):
        if x.shape[-1] < self.kernel:
            raise ValueError("convolution kernel is longer than the sequence")
        for conv in self.convs:
            x = F.max_pool1d(F.relu(conv(x)), self.pool)
        return x


class BiLSTM(nn.Module):
    """Bidirectional LSTM whose output averages the two directions."""

    def __init__(self, in_features: int, hidden: int):
        super().__init__()
        self.lstm = nn.LSTM(in_features, hidden, batch_first=True, bidirectional=True, dtype=DTYPE)
        self.hidden = hidden

    def forward(self, E):
        """``E``: ``(B, F, T)`` -> ``h_s``: ``(B, T, H)``."""
        out, _ = self.lstm(E.transpose(1, 2))
        return 0.5 * (out[..., : self.hidden] + out[..., self.hidden :])


class TemporalAttention(nn.Module):
    """One weight per time step from scaled query/key products.

    ``a_t = softmax_t(mean_i (Q K^T)_{it} / sqrt(H))`` and ``m = sum_t a_t h_t``.
    The row mean of ``Q K^T`` equals the mean query dotted with every key, which
    is how it is evaluated here.
    """

    def __init__(self, hidden: int):
        super().__init__()
        self.query = nn.Linear(hidden, hidden, dtype=DTYPE)
        self.key = nn.Linear(hidden, hidden, dtype=DTYPE)
        self.scale = 1.0 / math.sqrt(hidden)

    def forward(self, h):
        q_bar = self.query(h).mean(dim=1, keepdim=True)  # (B, 1, H)
        scores = (self.key(h) * q_bar).sum(-1) * self.scale  # (B, T)
        a = torch.softmax(scores, dim=-1)
        return a, torch.einsum("bt,bth->bh", a, h)


class FeatureNorm(nn.BatchNorm1d):
    """Per-feature batch normalization that falls back to running statistics for single-row batches."""

    def forward(self, x):
        if self.training and x.shape[0] == 1:
            return F.batch_norm(x, self.running_mean, self.running_var, self.weight, self.bias, False, 0.0, self.eps)
        return super().forward(x)


class StaticFusion(nn.Module):
    def __init__(self, hidden: int, reduced: int, static_dim: int, out_dim: int):
        super().__init__()
        self.static_dim = static_dim
        self.reduce = nn.Linear(hidden, reduced, dtype=DTYPE)
        # per-feature scaling keeps a wide static block from swamping p
        self.norm = FeatureNorm(reduced + static_dim, dtype=DTYPE)
        self.mix = nn.Linear(reduced + static_dim, out_dim, dtype=DTYPE)

    def fuse(self, m, static=None):
        """``r`` before the mixing layer: normalized ``concat(p, static)``."""
        p = F.relu(self.reduce(m))
        if self.static_dim:
            if static is None or static.shape[-1] != self.static_dim:
                got = None if static is None else static.shape[-1]
                raise ValueError(f"expected {self.static_dim} static features, got {got}")
            p = torch.cat([p, static], dim=-1)
        elif static is not None and static.shape[-1] != 0:
            raise ValueError("this model takes no static features")
        return self.norm(p)

    def forward(self, m, static=None):
        return F.relu(self.mix(self.fuse(m, static)))


def _mlp(in_dim: int, hidden: int, depth: int, out_dim: int = 1) -> nn.Sequential:
    layers, d = [], in_dim
    for _ in range(depth):
        layers += [nn.Linear(d, hidden, dtype=DTYPE), nn.ReLU()]
        d = hidden
    layers.append(nn.Linear(d, out_dim, dtype=DTYPE))
    return nn.Sequential(*layers)


def peripheral_bins(n_bins: int):
    side = min(2, (n_bins - 1) // 2)
    return [i for i in range(n_bins) if i < side or i >= n_bins - side]


class ZoneHeads(nn.Module):
    """Independent per-zone binary heads, deeper on the periphery."""

    def __init__(self, in_dim: int, n_bins: int, hidden: int, central_depth: int, peripheral_depth: int):
        super().__init__()
        outer = set(peripheral_bins(n_bins))
        self.heads = nn.ModuleList(
            _mlp(in_dim, hidden, peripheral_depth if i in outer else central_depth) for i in range(n_bins)
        )

    def forward(self, r):
        return torch.cat([head(r) for head in self.heads], dim=-1)


def _seeded(seed: int):
    rng_state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    return rng_state


class _Base(nn.Module):
    task = "loc"

    def __init__(self, config: ModelConfig, seed: int):
        super().__init__()
        self.config = config
        self.seed = seed

    def select(self, x):
        return x[:, self.config.channel_index]

    def n_parameters(self, trainable_only: bool = True) -> int:
        return sum(p.numel() for p in self.parameters() if p.requires_grad or not trainable_only)


class HaloNet(_Base):
    """Zone localization network; returns per-zone probabilities."""

    task = "loc"

    def __init__(self, config: ModelConfig = ModelConfig(), seed: int = 2711):
        super().__init__(config, seed)
        state = _seeded(seed)
        c = config
        self.norm = InputNorm(len(c.channels), c.input_norm)
        self.summarize = FeatureSummarizer(len(c.channels), c.conv_channels, c.conv_layers, c.conv_kernel, c.pool)
        self.bilstm = BiLSTM(c.conv_channels, c.hidden)
        self.attention = TemporalAttention(c.hidden) if c.attention else None
        self.fusion = StaticFusion(c.hidden, c.reduced, c.static_dim, c.fusion_dim)
        self.heads = ZoneHeads(c.fusion_dim, c.n_bins, c.head_hidden, c.central_depth, c.peripheral_depth)
        torch.random.set_rng_state(state)

    def temporal(self, x):
        h = self.bilstm(self.summarize(self.norm(self.select(x))))
        if self.attention is None:
            return torch.full(h.shape[:2], 1.0 / h.shape[1], dtype=h.dtype), h.mean(dim=1)
        return self.attention(h)

    def logits(self, x, static=None):
        _, m = self.temporal(x)
        return self.heads(self.fusion(m, static))

    def forward(self, x, static=None):
        return torch.sigmoid(self.logits(x, static))


class CocoNet(_Base):
    """Conversation-partner counter; returns class logits."""

    task = "count"

    def __init__(self, config: ModelConfig = ModelConfig(channels=CHANNELS, static_dim=0), seed: int = 2711):
        super().__init__(config, seed)
        state = _seeded(seed)
        c = config
        self.norm = InputNorm(len(c.channels), c.input_norm)
        self.summarize = FeatureSummarizer(len(c.channels), c.conv_channels, c.conv_layers, c.conv_kernel, c.pool)
        self.bilstm = BiLSTM(c.conv_channels, c.hidden)
        self.embed_layer = nn.Linear(c.hidden, c.embed_dim, dtype=DTYPE)
        self.classify = nn.Linear(c.embed_dim, c.n_classes, dtype=DTYPE)
        torch.random.set_rng_state(state)

    def embed(self, x):
        """Penultimate activation ``d`` of the classifier head."""
        m = self.bilstm(self.summarize(self.norm(self.select(x)))).mean(dim=1)
        return F.relu(self.embed_layer(m))

    def forward(self, x, static=None):
        return self.classify(self.embed(x))


class MlpBaseline(_Base):
    """Non-temporal baseline on the raw azimuth vector."""

    def __init__(self, config: ModelConfig = ModelConfig(channels=("az",), static_dim=0), task: str = "loc",
                 seed: int = 2711):
        super().__init__(config, seed)
        if task not in ("loc", "count"):
            raise ValueError("task must be 'loc' or 'count'")
        self.task = task
        state = _seeded(seed)
        c = config
        self.norm = InputNorm(1, "dataset")
        layers, d = [], c.seq_len
        for width in c.mlp_hidden:
            layers += [nn.Linear(d, width, dtype=DTYPE), nn.ReLU()]
            d = width
        self.trunk = nn.Sequential(*layers)
        if task == "loc":
            self.heads = nn.ModuleList(nn.Linear(d, 1, dtype=DTYPE) for _ in range(c.n_bins))
        else:
            self.heads = nn.ModuleList([nn.Linear(d, c.n_classes, dtype=DTYPE)])
        torch.random.set_rng_state(state)

    def select(self, x):
        return x[:, [CHANNELS.index("az")]]

    def forward(self, x, static=None):
        az = self.select(x)
        if az.shape[-1] != self.config.seq_len:
            raise ValueError(f"expected {self.config.seq_len} azimuth frames, got {az.shape[-1]}")
        h = self.trunk(self.norm(az)[:, 0])
        out = torch.cat([head(h) for head in self.heads], dim=-1)
        return torch.sigmoid(out) if self.task == "loc" else out


class HaloCocoNet(_Base):
    """HALo fed with the frozen CoCo embedding as its static features."""

    task = "loc"

    def __init__(self, halo: HaloNet, coco: CocoNet):
        super().__init__(halo.config, halo.seed)
        if halo.config.static_dim != coco.config.embed_dim:
            raise ValueError(
                f"HALo static_dim ({halo.config.static_dim}) must equal CoCo embed_dim ({coco.config.embed_dim})"
            )
        self.halo = halo
        self.coco = coco
        for p in self.coco.parameters():
            p.requires_grad_(False)

    def train(self, mode: bool = True):
        super().train(mode)
        self.coco.eval()
        return self

    def static_features(self, x):
        with torch.no_grad():
            return self.coco.embed(x)

    def fused(self, x):
        """``r'`` of length K + D."""
        _, m = self.halo.temporal(x)
        return self.halo.fusion.fuse(m, self.static_features(x))

    def forward(self, x, static=None):
        return self.halo(x, self.static_features(x))
