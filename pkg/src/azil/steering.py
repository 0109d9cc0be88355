"""Free-field microphone-array scenes, delay-and-sum steering and audio DoA baselines."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal as sps

from .targets import BinConfig, bin_vector

SPEED_OF_SOUND = 343.0
SNR_CAP_DB = 60.0
GLASSES_RADIUS = 0.08
GLASSES_MIC_AZIMUTHS = (-100.0, -60.0, -20.0, 20.0, 60.0, 100.0)
LOW_CONFIDENCE_RATIO = 1.5
METHODS = ("reference", "frontal", "zones", "music", "gccphat", "srp")


def unit_vector(azimuth_deg) -> np.ndarray:
    a = np.deg2rad(np.asarray(azimuth_deg, dtype=np.float64))
    return np.stack([np.cos(a), np.sin(a), np.zeros_like(a)], axis=-1)


def wrap_az(a):
    """Wrap to (-180, 180]."""
    w = np.mod(np.asarray(a, dtype=np.float64) + 180.0, 360.0) - 180.0
    w = np.where(w == -180.0, 180.0, w)
    return float(w) if np.ndim(w) == 0 else w


def angular_error(a, b):
    return np.abs(wrap_az(np.asarray(a) - np.asarray(b)))


@dataclass
class ArrayGeometry:
    positions: np.ndarray  # (M, 3) meters, head frame
    sample_rate: float = 16000.0
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        if self.positions.ndim != 2 or self.positions.shape[1] != 3 or len(self.positions) < 1:
            raise ValueError("positions must be an (M, 3) array")
        if len(np.unique(self.positions.round(12), axis=0)) != len(self.positions):
            raise ValueError("microphone positions must be distinct")
        if self.sample_rate <= 0 or self.speed_of_sound <= 0:
            raise ValueError("sample_rate and speed_of_sound must be positive")

    @classmethod
    def glasses(cls, radius: float = GLASSES_RADIUS, azimuths: Sequence[float] = GLASSES_MIC_AZIMUTHS,
                sample_rate: float = 16000.0) -> "ArrayGeometry":
        """Six microphones on a horizontal arc around the frame."""
        return cls(radius * unit_vector(azimuths), sample_rate)

    @classmethod
    def preset(cls, name: str, **kw) -> "ArrayGeometry":
        if name != "glasses":
            raise ValueError(f"unknown geometry preset {name!r}")
        return cls.glasses(**kw)

    @property
    def n_mics(self) -> int:
        return len(self.positions)

    def delays(self, azimuth_deg) -> np.ndarray:
        """Plane-wave arrival times (s) relative to the origin; ``(..., M)``."""
        return -(unit_vector(azimuth_deg) @ self.positions.T) / self.speed_of_sound

    def max_delay(self) -> float:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return float(np.max(np.linalg.norm(diff, axis=-1))) / self.speed_of_sound

    def pairs(self):
        return list(combinations(range(self.n_mics), 2))


@dataclass
class MultichannelFrame:
    samples: np.ndarray  # (M, N)
    fs: float

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 2:
            raise ValueError("samples must be mics x time")

    @property
    def n_mics(self) -> int:
        return self.samples.shape[0]


@dataclass
class Scene:
    frame: MultichannelFrame
    clean: List[np.ndarray]  # per-source clean signal as received at mic 0
    noise: np.ndarray  # (M, N) additive noise
    azimuths: List[float]

    @property
    def clean_sum(self) -> np.ndarray:
        return np.sum(self.clean, axis=0)


@dataclass
class SteeringResult:
    method: str
    azimuths: List[float]
    signal: np.ndarray = field(repr=False)
    snr_db: float = float("nan")


def fractional_delay(x, tau, fs: float) -> np.ndarray:
    """Delay ``x`` (last axis) by ``tau`` seconds with a circular frequency-domain shift."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    f = np.fft.rfftfreq(n, 1.0 / fs)
    tau = np.asarray(tau, dtype=np.float64)[..., None]
    phase = np.exp(-2j * np.pi * f * tau)
    if n % 2 == 0:
        # a real signal cannot carry a fractional shift at Nyquist; drop that bin unless the shift is whole
        shift = tau[..., 0] * fs
        whole = np.abs(shift - np.round(shift)) < 1e-9
        phase = np.broadcast_to(phase, np.broadcast_shapes(phase.shape, x.shape[:-1] + (f.size,))).copy()
        phase[..., -1] = np.where(whole, np.cos(np.pi * np.round(shift)), 0.0)
    return np.fft.irfft(np.fft.rfft(x, axis=-1) * phase, n=n, axis=-1)


def speech_like(n: int, fs: float, rng: np.random.Generator, band=(200.0, 4000.0),
                syllable_rate: float = 4.0) -> np.ndarray:
    """Band-limited noise with a slow syllabic envelope, unit RMS."""
    sos = sps.butter(4, band, btype="bandpass", fs=fs, output="sos")
    carrier = sps.sosfilt(sos, rng.standard_normal(n))
    t = np.arange(n) / fs
    envelope = 0.5 * (1.0 + np.sin(2 * np.pi * syllable_rate * t + rng.uniform(0, 2 * np.pi)))
    x = carrier * (0.2 + envelope)
    return x / np.sqrt(np.mean(x * x))


def synthesize_scene(sources: Sequence[Tuple[float, np.ndarray]], geometry: ArrayGeometry,
                     noise_level: float, rng: Optional[np.random.Generator] = None) -> Scene:
    """Plane-wave mixture of ``(azimuth, signal)`` sources plus independent Gaussian noise.

    ``noise_level`` is the per-mic noise standard deviation.
    """
    if not sources:
        raise ValueError("need at least one source")
    lengths = {len(s) for _, s in sources}
    if len(lengths) != 1:
        raise ValueError("source signals must share one length")
    n = lengths.pop()
    mix = np.zeros((geometry.n_mics, n))
    clean = []
    for az, s in sources:
        delayed = fractional_delay(np.broadcast_to(s, (geometry.n_mics, n)), geometry.delays(az), geometry.sample_rate)
        mix += delayed
        clean.append(delayed[0].copy())
    if noise_level > 0:
        if rng is None:
            raise ValueError("an rng is required for non-zero noise")
        noise = noise_level * rng.standard_normal((geometry.n_mics, n))
    else:
        noise = np.zeros_like(mix)
    return Scene(MultichannelFrame(mix + noise, geometry.sample_rate), clean, noise,
                 [float(az) for az, _ in sources])


def noise_level_for_snr(clean: np.ndarray, snr_db: float) -> float:
    """Noise standard deviation giving ``snr_db`` against ``clean`` at one mic."""
    power = float(np.mean(np.asarray(clean) ** 2))
    return float(np.sqrt(power / 10 ** (snr_db / 10.0)))


def delay_and_sum(frame: MultichannelFrame, geometry: ArrayGeometry, steer_azimuth: float) -> np.ndarray:
    """Align every channel to mic 0 for a plane wave from ``steer_azimuth`` and average."""
    if frame.n_mics != geometry.n_mics:
        raise ValueError("frame and geometry disagree on the number of mics")
    if frame.n_mics == 1:
        return frame.samples[0].copy()
    tau = geometry.delays(steer_azimuth)
    aligned = fractional_delay(frame.samples, tau[0] - tau, frame.fs)
    return aligned.mean(axis=0)


def multi_beam(frame: MultichannelFrame, geometry: ArrayGeometry, azimuths: Sequence[float]) -> np.ndarray:
    """Average of delay-and-sum beams toward each azimuth."""
    return np.mean([delay_and_sum(frame, geometry, a) for a in azimuths], axis=0)


def snr_db(enhanced, clean_ref, noise_ref, cap: float = SNR_CAP_DB) -> float:
    """SNR of ``enhanced`` after a joint least-squares fit onto clean and noise references.

    The clean component is ``alpha * clean_ref``; everything else counts as
    noise. Results are clipped to ``[-cap, cap]``.
    """
    e = np.asarray(enhanced, dtype=np.float64)
    c = np.asarray(clean_ref, dtype=np.float64)
    n = np.asarray(noise_ref, dtype=np.float64)
    basis = np.column_stack([c, n]) if np.any(n) else c[:, None]
    coef, *_ = np.linalg.lstsq(basis, e, rcond=None)
    target = coef[0] * c
    p_sig = float(np.sum(target**2))
    p_res = float(np.sum((e - target) ** 2))
    if p_sig == 0:
        return -cap
    if p_res <= p_sig * 10 ** (-cap / 10.0):
        return cap
    return float(np.clip(10 * np.log10(p_sig / p_res), -cap, cap))


# --- DoA estimators ------------------------------------------------------------


def gcc_phat(ch_a, ch_b, fs: float, max_tau: Optional[float] = None) -> float:
    """Delay of ``ch_b`` relative to ``ch_a`` in seconds (positive when b lags a)."""
    a = np.asarray(ch_a, dtype=np.float64)
    b = np.asarray(ch_b, dtype=np.float64)
    n = a.size + b.size
    cross = np.fft.rfft(b, n) * np.conj(np.fft.rfft(a, n))
    mag = np.abs(cross)
    cross = np.where(mag > 0, cross / np.where(mag > 0, mag, 1.0), 0.0)
    cc = np.fft.irfft(cross, n)
    max_shift = n // 2
    if max_tau is not None:
        max_shift = min(max_shift, int(np.ceil(max_tau * fs)) + 1)
    cc = np.concatenate([cc[-max_shift:], cc[: max_shift + 1]])
    k = int(np.argmax(cc))
    shift = float(k)
    if 0 < k < cc.size - 1:
        y0, y1, y2 = cc[k - 1], cc[k], cc[k + 1]
        denom = y0 - 2 * y1 + y2
        if denom != 0:
            shift += 0.5 * (y0 - y2) / denom
    return (shift - max_shift) / fs


def doa_from_tdoa(tdoa: float, pos_a, pos_b, speed_of_sound: float = SPEED_OF_SOUND) -> float:
    """Azimuth from one pair's delay ``t_b - t_a``; the front half-plane solution is returned."""
    d = np.asarray(pos_b, dtype=np.float64)[:2] - np.asarray(pos_a, dtype=np.float64)[:2]
    length = float(np.linalg.norm(d))
    if length == 0:
        raise ValueError("microphones coincide")
    phi = np.degrees(np.arctan2(d[1], d[0]))
    cos_arg = np.clip(-speed_of_sound * tdoa / length, -1.0, 1.0)
    off = np.degrees(np.arccos(cos_arg))
    candidates = [wrap_az(phi + off), wrap_az(phi - off)]
    return max(candidates, key=lambda az: (np.cos(np.radians(az)), -abs(az)))


def gcc_phat_doa(frame: MultichannelFrame, geometry: ArrayGeometry) -> float:
    """Least-squares far-field direction from GCC-PHAT delays of every mic pair."""
    if geometry.n_mics < 2:
        raise ValueError("DoA estimation needs at least two microphones")
    rows, rhs = [], []
    max_tau = geometry.max_delay()
    for i, j in geometry.pairs():
        tdoa = gcc_phat(frame.samples[i], frame.samples[j], frame.fs, max_tau)
        rows.append(geometry.positions[j, :2] - geometry.positions[i, :2])
        rhs.append(-geometry.speed_of_sound * tdoa)
    u, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    if not np.any(u):
        return 0.0
    return wrap_az(np.degrees(np.arctan2(u[1], u[0])))


def azimuth_grid(step: float = 1.0) -> np.ndarray:
    return np.arange(-180.0 + step, 180.0 + step / 2, step)


def _top_peaks(curve: np.ndarray, grid: np.ndarray, n: int) -> List[float]:
    """Largest ``n`` local maxima of a circular curve."""
    left, right = np.roll(curve, 1), np.roll(curve, -1)
    peaks = np.flatnonzero((curve > left) & (curve >= right))
    peaks = peaks[np.argsort(-curve[peaks], kind="stable")][:n]
    return [float(grid[i]) for i in peaks]


@dataclass
class SrpResult:
    azimuths: List[float]
    power: np.ndarray = field(repr=False)
    confidence: float = 0.0  # peak-to-mean ratio
    low_confidence: bool = False


def srp_phat(frame: MultichannelFrame, geometry: ArrayGeometry, grid: Optional[np.ndarray] = None,
             n_peaks: int = 1, band=(100.0, 7000.0), nperseg: int = 512,
             threshold: float = LOW_CONFIDENCE_RATIO) -> SrpResult:
    """Steered response power with phase-transform weighting over an azimuth grid.

    The STFT bins are whitened per channel; the steered power summed over
    frames is the diagonal energy plus twice the real part of every pair's
    frame-averaged cross-spectrum steered to the pair's delay difference.
    """
    if geometry.n_mics < 2:
        raise ValueError("DoA estimation needs at least two microphones")
    grid = azimuth_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    f, _, Z = sps.stft(frame.samples, fs=frame.fs, nperseg=nperseg)
    keep = (f >= band[0]) & (f <= band[1])
    Z, f = Z[:, keep, :], f[keep]
    mag = np.abs(Z)
    Zw = np.where(mag > 0, Z / np.where(mag > 0, mag, 1.0), 0.0)
    tau = geometry.delays(grid)  # (G, M)
    power = np.full(grid.size, float(np.sum(np.abs(Zw) ** 2)))
    for i, j in geometry.pairs():
        cross = np.sum(Zw[i] * np.conj(Zw[j]), axis=-1)  # (F,)
        phase = np.exp(2j * np.pi * np.outer(tau[:, i] - tau[:, j], f))  # (G, F)
        power += 2.0 * np.real(phase @ cross)
    mean = float(np.mean(power))
    confidence = float(np.max(power) / mean) if mean > 0 else 1.0
    return SrpResult(_top_peaks(power, grid, n_peaks), power, confidence, confidence < threshold)


def music(frame: MultichannelFrame, geometry: ArrayGeometry, n_sources: int = 1, band=(300.0, 3000.0),
          n_freqs: int = 24, nperseg: int = 512, grid: Optional[np.ndarray] = None) -> List[float]:
    """Broadband MUSIC: normalized noise-subspace pseudospectra summed over dominant bins."""
    if n_sources <= 0:
        return []
    if n_sources >= geometry.n_mics:
        raise ValueError("MUSIC needs fewer sources than microphones")
    grid = azimuth_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    f, _, Z = sps.stft(frame.samples, fs=frame.fs, nperseg=nperseg)
    in_band = np.flatnonzero((f >= band[0]) & (f <= band[1]))
    if in_band.size == 0:
        raise ValueError("no STFT bins inside the MUSIC band")
    energy = np.sum(np.abs(Z[:, in_band, :]) ** 2, axis=(0, 2))
    chosen = in_band[np.argsort(-energy, kind="stable")[:n_freqs]]
    tau = geometry.delays(grid)  # (G, M)
    spectrum = np.zeros(grid.size)
    for k in chosen:
        snap = Z[:, k, :]
        R = snap @ snap.conj().T / snap.shape[1]
        _, vecs = np.linalg.eigh(R)
        En = vecs[:, : geometry.n_mics - n_sources]
        A = np.exp(-2j * np.pi * f[k] * tau)  # (G, M) steering vectors
        denom = np.sum(np.abs(A.conj() @ En) ** 2, axis=1)
        p = 1.0 / np.maximum(denom, 1e-12)
        spectrum += p / p.max()
    return _top_peaks(spectrum, grid, n_sources)


def steer_from_zones(zone_label, config: BinConfig = BinConfig()) -> List[float]:
    """Bin centers of the active zones; frontal (0 deg) when no zone is active."""
    bits = np.asarray(zone_label, dtype=bool)
    if bits.shape != (config.n_bins,):
        raise ValueError(f"expected {config.n_bins} zone bits")
    centers = config.centers[bits]
    return [float(c) for c in centers] if centers.size else [0.0]


def estimate_doa(method: str, frame: MultichannelFrame, geometry: ArrayGeometry, n_sources: int = 1) -> List[float]:
    if method == "music":
        return music(frame, geometry, n_sources)
    if method == "gccphat":
        return [gcc_phat_doa(frame, geometry)]
    if method == "srp":
        return srp_phat(frame, geometry, n_peaks=n_sources).azimuths
    raise ValueError(f"unknown DoA method {method!r}")


def compare_methods(scene: Scene, geometry: ArrayGeometry, methods: Sequence[str] = METHODS,
                    config: BinConfig = BinConfig(), zone_label=None) -> List[SteeringResult]:
    """Steer toward each method's directions and score the output against source 0.

    ``zones`` uses ``zone_label`` or, when omitted, the ground-truth zones of
    the scene's sources.
    """
    if zone_label is None:
        zone_label = np.logical_or.reduce([bin_vector(wrap_az(a), config) for a in scene.azimuths])
    clean = scene.clean[0]
    noise_ref = scene.noise[0] + sum(scene.clean[1:], np.zeros_like(clean))
    results = []
    for method in methods:
        if method == "reference":
            azimuths, out = [], scene.frame.samples[0].copy()
        else:
            if method == "frontal":
                azimuths = [0.0]
            elif method == "zones":
                azimuths = steer_from_zones(zone_label, config)
            else:
                azimuths = estimate_doa(method, scene.frame, geometry, len(scene.azimuths)) or [0.0]
            out = multi_beam(scene.frame, geometry, azimuths)
        results.append(SteeringResult(method, azimuths, out, snr_db(out, clean, noise_ref)))
    return results
