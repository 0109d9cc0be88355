"""Seeded simulator for seated group conversations.

A session yields a raw 100 Hz gyro stream of the focal user's head, 5 Hz voice
activity for everyone at the table and the partners' true (azimuth, elevation)
in the focal user's average-facing frame. Frame ``k`` at 5 Hz covers the time
interval ``(k / 5, (k + 1) / 5]`` and every 5 Hz series is sampled at its end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import lfilter

from .geom import (
    GyroStream,
    downsample,
    integrate_gyro,
    quat_conjugate,
    quat_from_az_el,
    quat_multiply,
    quats_to_az_el,
)

FIELD_LIMIT = 100.0  # degrees, half-width of the discretized field
MIN_SEPARATION = 15.0  # degrees
SEAT_JITTER = 8.0  # degrees, per-seat offset of the "table" layout
TABLE_ROTATION = 20.0  # degrees, common offset of all seats (wearer not facing the table centre)
SEGMENT_SECONDS = 30.0

# background-noise level (dBA, 0 = quiet) -> multiplier on latency and noise
NOISE_MULTIPLIER = {0: 1.0, 55: 1.15, 65: 1.3, 75: 1.5}


@dataclass
class Layout:
    partner_azimuths: List[float]
    partner_elevations: List[float] = None

    def __post_init__(self):
        self.partner_azimuths = [float(a) for a in self.partner_azimuths]
        if self.partner_elevations is None:
            self.partner_elevations = [0.0] * len(self.partner_azimuths)
        if not 1 <= len(self.partner_azimuths) <= 4:
            raise ValueError("a layout holds between 1 and 4 partners")
        if len(self.partner_elevations) != len(self.partner_azimuths):
            raise ValueError("azimuths and elevations must pair up")
        if any(abs(a) > FIELD_LIMIT for a in self.partner_azimuths):
            raise ValueError("partner azimuths must lie in [-100, 100]")

    @property
    def group_size(self) -> int:
        return len(self.partner_azimuths) + 1


@dataclass
class BehaviorParams:
    """How the focal user orients towards talkers.

    ``central_bias_gain`` is the rate (1/s) at which the gaze target relaxes
    to the front while nobody talks. ``idle_event_rate`` is in events per
    minute.
    """

    reaction_latency: float = 0.8
    undershoot_factor: float = 0.8
    idle_event_rate: float = 1.5
    idle_duration: float = 3.0
    orientation_noise_std: float = 4.0
    central_bias_gain: float = 0.3
    smoothing_time_constant: float = 0.5
    noise_time_constant: float = 0.5
    addressee_switch_rate: float = 0.0  # 1/s; gaze shifts among listeners while the user talks
    glance_rate: float = 0.0  # 1/s; brief looks at another partner while listening
    glance_duration: float = 1.0  # seconds

    def __post_init__(self):
        for name in ("reaction_latency", "idle_event_rate", "idle_duration", "orientation_noise_std",
                     "central_bias_gain", "smoothing_time_constant", "noise_time_constant",
                     "addressee_switch_rate", "glance_rate", "glance_duration"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 < self.undershoot_factor <= 1:
            raise ValueError("undershoot_factor must be in (0, 1]")

    @classmethod
    def strong_coupling(cls) -> "BehaviorParams":
        """Tight talker tracking: short latency, little noise, gaze spread over listeners.

        Undershoot and idle glances stay at realistic levels.
        """
        return cls(reaction_latency=0.3, undershoot_factor=0.75, idle_event_rate=1.5, idle_duration=3.0,
                   orientation_noise_std=1.5, central_bias_gain=0.2, smoothing_time_constant=0.3,
                   addressee_switch_rate=0.7, glance_rate=0.3, glance_duration=1.5)


@dataclass
class TurnTakingParams:
    mean_turn_length: float = 3.0
    turn_gap: float = 0.5
    overlap_probability: float = 0.1
    talkativeness_weights: Optional[List[float]] = None  # per partner; None = uniform
    self_weight: float = 0.2  # share of turns taken by the focal user

    def __post_init__(self):
        if self.mean_turn_length <= 0 or self.turn_gap <= 0:
            raise ValueError("turn durations must be positive")
        if not 0 <= self.overlap_probability <= 1 or not 0 <= self.self_weight < 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if self.talkativeness_weights is not None:
            w = np.asarray(self.talkativeness_weights, dtype=float)
            if np.any(w < 0) or w.sum() <= 0:
                raise ValueError("talkativeness weights must be non-negative with a positive sum")
            self.talkativeness_weights = list(w / w.sum())

    def weights(self, n_partners: int) -> np.ndarray:
        if self.talkativeness_weights is None:
            return np.full(n_partners, 1.0 / n_partners)
        if len(self.talkativeness_weights) != n_partners:
            raise ValueError("one talkativeness weight per partner is required")
        return np.asarray(self.talkativeness_weights)


@dataclass
class SceneConfig:
    duration: float = 180.0
    group_size: Optional[int] = None  # None draws uniformly from group_sizes
    group_sizes: Tuple[int, ...] = (2, 3, 4, 5)
    frame_rate: float = 5.0
    gyro_rate: float = 100.0
    layout_distribution: str = "table"  # "table", "uniform" or "central"
    seat_jitter: float = SEAT_JITTER  # degrees, "table" layout only
    table_rotation: float = TABLE_ROTATION  # degrees, "table" layout only
    partner_sway_max: float = 8.0  # degrees
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    turn_taking: TurnTakingParams = field(default_factory=TurnTakingParams)
    talkativeness_concentration: Optional[float] = 2.0  # Dirichlet alpha; None keeps turn_taking weights
    gyro_bias: Optional[Tuple[float, float, float]] = None  # rad/s; None draws per session
    gyro_bias_std: float = 2e-4  # rad/s
    gyro_noise_std: float = 2e-3  # rad/s per sample
    noise_levels: Tuple[int, ...] = (0, 55, 65, 75)


@dataclass
class SessionTrace:
    session_id: str
    seed: int
    layout: Layout
    frame_rate: float
    gyro_rate: float
    duration: float
    gyro: GyroStream
    true_az: np.ndarray  # (F,) degrees at 5 Hz
    true_el: np.ndarray
    initial_orientation: Tuple[float, float]  # (az, el) at t = 0
    partner_az: np.ndarray  # (P, F)
    partner_el: np.ndarray
    self_vad: np.ndarray  # (F,) bool
    vad: np.ndarray  # (P, F) bool
    gyro_bias: np.ndarray
    noise_level: int = 0

    @property
    def n_frames(self) -> int:
        return self.true_az.shape[0]

    @property
    def n_partners(self) -> int:
        return self.vad.shape[0]


@dataclass
class Segment:
    session_id: str
    index: int
    az: np.ndarray  # (150,) IMU-derived
    el: np.ndarray
    self_vad: np.ndarray
    vad: np.ndarray  # (P, 150)
    partner_az: np.ndarray  # (P, 150) truth
    partner_el: np.ndarray
    true_az: np.ndarray
    true_el: np.ndarray

    @property
    def n_partners(self) -> int:
        return self.vad.shape[0]

    @property
    def speaker_vad(self) -> np.ndarray:
        return np.any(self.vad, axis=0)


# --- layout and turn taking --------------------------------------------------


def sample_layout(group_size: int, rng: np.random.Generator, distribution: str = "uniform",
                  min_separation: float = MIN_SEPARATION, max_tries: int = 10_000,
                  seat_jitter: float = SEAT_JITTER, table_rotation: float = TABLE_ROTATION) -> Layout:
    if not 2 <= group_size <= 5:
        raise ValueError("group_size must be in [2, 5]")
    n = group_size - 1
    if (n - 1) * min_separation > 2 * FIELD_LIMIT:
        raise ValueError("minimum separation cannot be satisfied inside the field")
    for _ in range(max_tries):
        if distribution == "uniform":
            az = rng.uniform(-FIELD_LIMIT, FIELD_LIMIT, size=n)
        elif distribution == "central":
            az = np.clip(rng.normal(0.0, 50.0, size=n), -FIELD_LIMIT, FIELD_LIMIT)
        elif distribution == "table":
            # equally spaced seats round a table: neighbours appear 180/G degrees apart
            seats = 90.0 - 180.0 / group_size * np.arange(1, group_size)
            seats = seats + rng.uniform(-table_rotation, table_rotation)
            az = np.clip(seats + rng.uniform(-seat_jitter, seat_jitter, size=n), -FIELD_LIMIT, FIELD_LIMIT)
        else:
            raise ValueError(f"unknown layout distribution {distribution!r}")
        s = np.sort(az)
        if n == 1 or np.min(np.diff(s)) >= min_separation:
            return Layout(list(s))
    raise ValueError("could not place partners with the requested separation")


def _frames(t0: float, t1: float, frame_rate: float) -> Tuple[int, int]:
    k0 = int(round(t0 * frame_rate))
    return k0, max(k0 + 1, int(round(t1 * frame_rate)))


def simulate_turn_taking(params: TurnTakingParams, n_partners: int, duration: float,
                         rng: np.random.Generator, frame_rate: float = 5.0):
    """Semi-Markov turn taking at frame resolution.

    Returns ``(self_vad, partner_vad)`` boolean arrays of shape ``(F,)`` and
    ``(n_partners, F)``.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    n_frames = int(round(duration * frame_rate))
    self_vad = np.zeros(n_frames, dtype=bool)
    vad = np.zeros((n_partners, n_frames), dtype=bool)
    weights = params.weights(n_partners)
    t = rng.exponential(params.turn_gap)
    while t < duration:
        length = rng.exponential(params.mean_turn_length)
        k0, k1 = _frames(t, t + length, frame_rate)
        if rng.random() < params.self_weight:
            speaker = -1
            self_vad[k0:k1] = True
        else:
            speaker = int(rng.choice(n_partners, p=weights))
            vad[speaker, k0:k1] = True
        others = weights.copy()
        if speaker >= 0:
            others[speaker] = 0.0
        if rng.random() < params.overlap_probability and others.sum() > 0:
            other = int(rng.choice(n_partners, p=others / others.sum()))
            start = t + rng.uniform(0.0, length)
            o0, o1 = _frames(start, min(t + length, start + rng.exponential(params.mean_turn_length / 2)),
                             frame_rate)
            vad[other, o0:o1] = True
        t += length + rng.exponential(params.turn_gap)
    return self_vad, vad


# --- head behaviour ----------------------------------------------------------


def _gaze_targets(layout_az, layout_el, self_vad, vad, behavior: BehaviorParams,
                  rng: np.random.Generator, frame_rate: float):
    """Frame-level gaze targets (az, el) before latency and smoothing."""
    n_frames = self_vad.shape[0]
    n_partners = vad.shape[0]
    target = np.zeros((n_frames, 2))
    dt = 1.0 / frame_rate
    decay = np.exp(-behavior.central_bias_gain * dt)
    p_idle = behavior.idle_event_rate / 60.0 * dt
    p_switch = behavior.addressee_switch_rate * dt
    p_glance = behavior.glance_rate * dt
    idle_left = 0
    glance_left, glance_at = 0, 0
    idle_target = (0.0, 0.0)
    attended = None
    addressee = None
    current = np.array([0.0, 0.0])
    for k in range(n_frames):
        if idle_left == 0 and rng.random() < p_idle:
            idle_left = max(1, int(round(behavior.idle_duration * frame_rate)))
            if rng.random() < 0.5:  # looking down, e.g. at the table or shoes
                idle_target = (rng.uniform(-20, 20), -70.0 + rng.normal(0, 5))
            else:  # off-conversation distraction
                idle_target = (rng.choice([-1.0, 1.0]) * rng.uniform(110, 150), rng.normal(0, 5))
        if not self_vad[k]:
            addressee = None
        active = np.flatnonzero(vad[:, k])
        if attended is not None and attended not in active:
            attended = None
        if idle_left > 0:
            idle_left -= 1
            target[k] = idle_target
            continue
        if self_vad[k]:
            if addressee is None:
                addressee = int(rng.integers(n_partners))
            elif p_switch > 0 and n_partners > 1 and rng.random() < p_switch:
                addressee = (addressee + int(rng.integers(1, n_partners))) % n_partners
            p = addressee
        elif active.size:
            if attended is None:
                attended = int(rng.choice(active))
            p = attended
            if glance_left == 0 and p_glance > 0 and n_partners > 1 and rng.random() < p_glance:
                glance_left = max(1, int(round(behavior.glance_duration * frame_rate)))
                glance_at = (attended + int(rng.integers(1, n_partners))) % n_partners
            if glance_left > 0:
                glance_left -= 1
                p = glance_at
        else:
            p = None
        if p is None:
            current = current * decay
        else:
            current = np.array([behavior.undershoot_factor * layout_az[p, k], layout_el[p, k]])
        target[k] = current
    return target


def _ou_noise(n: int, std: float, tau: float, dt: float, rng: np.random.Generator) -> np.ndarray:
    if std == 0:
        return np.zeros(n)
    beta = np.exp(-dt / tau) if tau > 0 else 0.0
    white = rng.normal(0.0, std * np.sqrt(1 - beta**2), size=n)
    x0 = rng.normal(0.0, std)
    out, _ = lfilter([1.0], [1.0, -beta], white, zi=[beta * x0])
    return out


def simulate_head_orientation(layout_az, layout_el, self_vad, vad, behavior: BehaviorParams,
                              rng: np.random.Generator, frame_rate: float = 5.0,
                              rate: float = 100.0, noise_multiplier: float = 1.0):
    """True head (azimuth, elevation) in degrees at ``rate``.

    ``layout_az`` / ``layout_el`` are per-frame partner positions of shape
    ``(P, F)``. Returns two arrays with ``F * rate / frame_rate + 1`` samples,
    the first being the state at ``t = 0``.
    """
    layout_az = np.atleast_2d(np.asarray(layout_az, dtype=float))
    layout_el = np.atleast_2d(np.asarray(layout_el, dtype=float))
    target = _gaze_targets(layout_az, layout_el, np.asarray(self_vad, bool), np.atleast_2d(vad),
                           behavior, rng, frame_rate)
    up = int(round(rate / frame_rate))
    # frame k holds over (k / fr, (k + 1) / fr]
    fine = np.repeat(target, up, axis=0)
    fine = np.vstack([fine[:1], fine])
    lag = int(round(behavior.reaction_latency * noise_multiplier * rate))
    if lag:
        fine = np.vstack([np.repeat(fine[:1], lag, axis=0), fine[:-lag]])
    dt = 1.0 / rate
    tau = behavior.smoothing_time_constant
    alpha = np.exp(-dt / tau) if tau > 0 else 0.0
    out = np.empty_like(fine)
    for j in range(2):
        out[:, j], _ = lfilter([1 - alpha], [1.0, -alpha], fine[:, j], zi=[alpha * fine[0, j]])
    std = behavior.orientation_noise_std * noise_multiplier
    out[:, 0] += _ou_noise(out.shape[0], std, behavior.noise_time_constant, dt, rng)
    out[:, 1] += _ou_noise(out.shape[0], std, behavior.noise_time_constant, dt, rng)
    out[:, 1] = np.clip(out[:, 1], -85.0, 85.0)
    return out[:, 0], out[:, 1]


# --- gyro synthesis ----------------------------------------------------------


def orientation_to_gyro(az, el, rate: float, bias=(0.0, 0.0, 0.0), noise_std: float = 0.0,
                        rng: Optional[np.random.Generator] = None) -> GyroStream:
    """Angular-velocity samples that reproduce a trajectory under ``integrate_gyro``.

    ``az`` / ``el`` hold ``N + 1`` states starting at ``t = 0``; the stream
    has ``N`` samples stamped ``1 / rate ... N / rate``. The increment
    ``dq = q[n] * conj(q[n-1])`` is the rotation that the integrator applies
    on the left, and ``omega = 2 * log(dq) / dt``.
    """
    q = quat_from_az_el(az, el)
    dq = quat_multiply(q[1:], quat_conjugate(q[:-1]))
    dq = np.where(dq[:, :1] < 0, -dq, dq)
    v = dq[:, 1:]
    vn = np.linalg.norm(v, axis=1)
    angle = 2.0 * np.arctan2(vn, dq[:, 0])
    dt = 1.0 / rate
    scale = np.where(vn > 1e-15, angle / np.where(vn > 1e-15, vn, 1.0), 2.0) / dt
    omega = v * scale[:, None] + np.asarray(bias, dtype=float)
    if noise_std > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_std > 0")
        omega = omega + rng.normal(0.0, noise_std, size=omega.shape)
    t = np.arange(1, q.shape[0]) * dt
    return GyroStream(t, omega)


# --- sessions ----------------------------------------------------------------


def _partner_tracks(layout: Layout, n_frames: int, frame_rate: float, sway_max: float,
                    rng: np.random.Generator):
    t = np.arange(1, n_frames + 1) / frame_rate
    az, el = [], []
    for base, elev in zip(layout.partner_azimuths, layout.partner_elevations):
        amp = rng.uniform(0.0, sway_max)
        freq = rng.uniform(0.01, 0.05)
        phase = rng.uniform(0, 2 * np.pi)
        az.append(base + amp * np.sin(2 * np.pi * freq * t + phase))
        el.append(np.full(n_frames, elev))
    return np.array(az), np.array(el)


def simulate_session(config: SceneConfig, seed, session_id: str = "s0000") -> SessionTrace:
    """Simulate one session; identical (config, seed) give identical traces."""
    rng = np.random.default_rng(seed)
    group_size = config.group_size or int(rng.choice(config.group_sizes))
    layout = sample_layout(group_size, rng, config.layout_distribution, seat_jitter=config.seat_jitter,
                           table_rotation=config.table_rotation)
    n_partners = group_size - 1
    tt = config.turn_taking
    if config.talkativeness_concentration is not None:
        w = rng.dirichlet(np.full(n_partners, config.talkativeness_concentration))
        tt = TurnTakingParams(tt.mean_turn_length, tt.turn_gap, tt.overlap_probability, list(w), tt.self_weight)
    self_vad, vad = simulate_turn_taking(tt, n_partners, config.duration, rng, config.frame_rate)
    n_frames = self_vad.shape[0]
    p_az, p_el = _partner_tracks(layout, n_frames, config.frame_rate, config.partner_sway_max, rng)
    noise_level = int(rng.choice(config.noise_levels))
    az, el = simulate_head_orientation(p_az, p_el, self_vad, vad, config.behavior, rng, config.frame_rate,
                                       config.gyro_rate, NOISE_MULTIPLIER.get(noise_level, 1.0))
    if config.gyro_bias is None:
        bias = rng.normal(0.0, config.gyro_bias_std, size=3)
    else:
        bias = np.asarray(config.gyro_bias, dtype=float)
    gyro = orientation_to_gyro(az, el, config.gyro_rate, bias, config.gyro_noise_std, rng)
    stride = int(round(config.gyro_rate / config.frame_rate))
    return SessionTrace(
        session_id=session_id,
        seed=int(seed),
        layout=layout,
        frame_rate=config.frame_rate,
        gyro_rate=config.gyro_rate,
        duration=n_frames / config.frame_rate,
        gyro=gyro,
        true_az=az[stride::stride].copy(),
        true_el=el[stride::stride].copy(),
        initial_orientation=(float(az[0]), float(el[0])),
        partner_az=p_az,
        partner_el=p_el,
        self_vad=self_vad,
        vad=vad,
        gyro_bias=bias,
        noise_level=noise_level,
    )


def segment_session(trace: SessionTrace, anchor: str = "start", r_ref=None,
                    segment_seconds: float = SEGMENT_SECONDS) -> List[Segment]:
    """Cut a session into ordered, non-overlapping 30 s segments.

    Each segment re-runs the gyro integration from scratch. With
    ``anchor="start"`` the integrator starts at the head attitude held at the
    segment start (as in data already aligned to the average facing frame);
    ``anchor="identity"`` starts from the identity quaternion so the first
    frame reads roughly 0 degrees. Trailing remainders are dropped.
    """
    fps = int(round(segment_seconds * trace.frame_rate))
    per_frame = int(round(trace.gyro_rate / trace.frame_rate))
    n_seg = trace.n_frames // fps
    segments = []
    for s in range(n_seg):
        f0, f1 = s * fps, (s + 1) * fps
        stream = trace.gyro.slice(f0 * per_frame, f1 * per_frame)
        if anchor == "identity":
            q0 = None
        elif anchor == "start":
            a0, e0 = trace.initial_orientation if s == 0 else (trace.true_az[f0 - 1], trace.true_el[f0 - 1])
            q0 = quat_from_az_el(a0, e0)
        else:
            raise ValueError(f"unknown anchor {anchor!r}")
        Q = integrate_gyro(stream, q0, dt0=1.0 / trace.gyro_rate)
        az, el = quats_to_az_el(downsample(Q, trace.gyro_rate, trace.frame_rate), r_ref)
        segments.append(
            Segment(
                session_id=trace.session_id,
                index=s,
                az=az,
                el=el,
                self_vad=trace.self_vad[f0:f1].copy(),
                vad=trace.vad[:, f0:f1].copy(),
                partner_az=trace.partner_az[:, f0:f1].copy(),
                partner_el=trace.partner_el[:, f0:f1].copy(),
                true_az=trace.true_az[f0:f1].copy(),
                true_el=trace.true_el[f0:f1].copy(),
            )
        )
    return segments
