"""Gyroscope attitude integration and head-locked spherical coordinates.

Conventions
-----------
* Quaternions are ``[w, x, y, z]`` numpy arrays (scalar first).
* Cartesian frame: x forward, y left, z up.
* Azimuth is ``atan2(y, x)`` in degrees (frontal 0, left positive, right
  negative), elevation is ``asin(z / |v|)`` in degrees, radius is always 1.

The update rule is ``q_{t+1} = [cos(|w| dt / 2) I + sin(|w| dt / 2) / |w| * Omega(w)] q_t``
with ``Omega`` the 4x4 matrix below, i.e. left multiplication of ``q`` by the
pure quaternion ``(0, w)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from numba import njit

from .errors import DataError

SMALL_ANGLE_EPS = 1e-12  # rad/s
IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class SphericalDirection:
    azimuth: float  # degrees, (-180, 180]
    elevation: float  # degrees, [-90, 90]
    radius: float = 1.0


@dataclass
class GyroStream:
    """A sampled angular-velocity stream.

    ``t`` holds strictly increasing timestamps in seconds and ``omega`` the
    matching ``(N, 3)`` rates in rad/s. Sample ``n`` covers the interval
    ``(t[n-1], t[n]]``.
    """

    t: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.omega = np.asarray(self.omega, dtype=np.float64).reshape(-1, 3)
        if self.t.shape[0] != self.omega.shape[0]:
            raise ValueError("timestamps and omega must have equal length")
        if not np.all(np.isfinite(self.omega)):
            raise ValueError("angular velocity must be finite")
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return self.t.shape[0]

    def dts(self, dt0: Optional[float] = None) -> np.ndarray:
        """Per-sample integration steps; the first one reuses the next gap."""
        n = len(self)
        if n == 0:
            return np.zeros(0)
        if n == 1:
            if dt0 is None:
                raise ValueError("a single-sample stream needs an explicit dt")
            return np.array([dt0])
        d = np.diff(self.t)
        return np.concatenate([[d[0] if dt0 is None else dt0], d])

    def slice(self, start: int, stop: int) -> "GyroStream":
        return GyroStream(self.t[start:stop], self.omega[start:stop])


# --- quaternion helpers -----------------------------------------------------


def quat_multiply(p, q):
    """Hamilton product ``p * q``; broadcasts over leading axes."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def quat_conjugate(q):
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def rotation_from_quat(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion (broadcasts over leading axes)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = np.moveaxis(q, -1, 0)
    R = np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )
    return R


def quat_from_az_el(azimuth_deg, elevation_deg) -> np.ndarray:
    """Head quaternion that points the frontal axis at (azimuth, elevation).

    Yaw about +z followed by pitch about the rotated y axis; no roll.
    """
    az = np.radians(np.asarray(azimuth_deg, dtype=np.float64))
    el = np.radians(np.asarray(elevation_deg, dtype=np.float64))
    zeros = np.zeros_like(az)
    yaw = np.stack([np.cos(az / 2), zeros, zeros, np.sin(az / 2)], -1)
    # pitching the x axis up towards +z is a negative rotation about y
    pitch = np.stack([np.cos(-el / 2), zeros, np.sin(-el / 2), zeros], -1)
    return quat_multiply(yaw, pitch)


# --- integration -------------------------------------------------------------


def omega_matrix(omega) -> np.ndarray:
    wx, wy, wz = (float(v) for v in np.asarray(omega, dtype=np.float64).reshape(3))
    return np.array(
        [
            [0.0, -wx, -wy, -wz],
            [wx, 0.0, -wz, wy],
            [wy, wz, 0.0, -wx],
            [wz, -wy, wx, 0.0],
        ]
    )


def quaternion_update(q_prev, omega, dt: float) -> np.ndarray:
    """One closed-form attitude step followed by renormalization."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    q_prev = np.asarray(q_prev, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    w = float(np.linalg.norm(omega))
    half = 0.5 * w * dt
    # sin(w dt / 2) / w -> dt / 2 as w -> 0
    s = np.sin(half) / w if w >= SMALL_ANGLE_EPS else 0.5 * dt
    A = np.cos(half) * np.eye(4) + s * omega_matrix(omega)
    q = A @ q_prev
    return q / np.linalg.norm(q)


@njit(cache=True)
def _integrate_kernel(omega, dts, q0):
    n = omega.shape[0]
    out = np.empty((n, 4))
    qw, qx, qy, qz = q0[0], q0[1], q0[2], q0[3]
    for i in range(n):
        wx, wy, wz = omega[i, 0], omega[i, 1], omega[i, 2]
        w = np.sqrt(wx * wx + wy * wy + wz * wz)
        half = 0.5 * w * dts[i]
        c = np.cos(half)
        if w >= 1e-12:
            s = np.sin(half) / w
        else:
            s = 0.5 * dts[i]
        nw = c * qw + s * (-wx * qx - wy * qy - wz * qz)
        nx = c * qx + s * (wx * qw - wz * qy + wy * qz)
        ny = c * qy + s * (wy * qw + wz * qx - wx * qz)
        nz = c * qz + s * (wz * qw - wy * qx + wx * qy)
        norm = np.sqrt(nw * nw + nx * nx + ny * ny + nz * nz)
        qw, qx, qy, qz = nw / norm, nx / norm, ny / norm, nz / norm
        out[i, 0] = qw
        out[i, 1] = qx
        out[i, 2] = qy
        out[i, 3] = qz
    return out


def integrate_gyro(stream: GyroStream, q0=None, dt0: Optional[float] = None) -> np.ndarray:
    """Integrate a gyro stream into an ``(N, 4)`` quaternion array.

    ``Q[n]`` is the attitude after applying sample ``n`` to ``Q[n-1]``
    (``q0`` for ``n = 0``). ``q0`` defaults to the identity quaternion.
    """
    if len(stream) == 0:
        return np.zeros((0, 4))
    q0 = IDENTITY_QUAT if q0 is None else np.asarray(q0, dtype=np.float64)
    q0 = q0 / np.linalg.norm(q0)
    return _integrate_kernel(
        np.ascontiguousarray(stream.omega), np.ascontiguousarray(stream.dts(dt0)), q0
    )


def apply_reference_calibration(q, r_ref=None) -> np.ndarray:
    """``R_ref @ R(q) @ R_ref^-1``; broadcasts over a stack of quaternions."""
    R = rotation_from_quat(q)
    if r_ref is None:
        return R
    r_ref = np.asarray(r_ref, dtype=np.float64)
    if r_ref.shape != (3, 3) or np.max(np.abs(r_ref.T @ r_ref - np.eye(3))) > 1e-6:
        raise ValueError("reference calibration matrix must be orthonormal")
    return r_ref @ R @ r_ref.T


# --- spherical coordinates ---------------------------------------------------


def sph_to_cart(direction: SphericalDirection) -> np.ndarray:
    az = np.radians(direction.azimuth)
    el = np.radians(direction.elevation)
    return direction.radius * np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def cart_to_sph(v) -> SphericalDirection:
    az, el = cart_to_az_el(np.asarray(v, dtype=np.float64))
    return SphericalDirection(float(az), float(el))


def cart_to_az_el(v: np.ndarray):
    """Vectorized (azimuth, elevation) in degrees of ``(..., 3)`` vectors."""
    norm = np.linalg.norm(v, axis=-1)
    if np.any(norm == 0):
        raise ValueError("cannot convert a zero vector to spherical coordinates")
    az = np.degrees(np.arctan2(v[..., 1], v[..., 0]))
    # atan2 yields -180 for (-x, -0.0); fold it into (-180, 180]
    az = np.where(az <= -180.0, az + 360.0, az)
    el = np.degrees(np.arcsin(np.clip(v[..., 2] / norm, -1.0, 1.0)))
    return az, el


FRONTAL = np.array([1.0, 0.0, 0.0])


def head_orientation(r_final) -> SphericalDirection:
    r_final = np.asarray(r_final, dtype=np.float64)
    if r_final.shape != (3, 3):
        raise ValueError("expected a 3x3 rotation matrix")
    return cart_to_sph(r_final @ FRONTAL)


def quats_to_az_el(Q: np.ndarray, r_ref=None):
    """Head (azimuth, elevation) arrays for a stack of attitudes."""
    R = apply_reference_calibration(Q, r_ref)
    return cart_to_az_el(R @ FRONTAL)


def downsample(series, rate_in: float, rate_out: float):
    """Stride decimation keeping the last sample of every stride."""
    ratio = rate_in / rate_out
    stride = int(round(ratio))
    if rate_out <= 0 or stride < 1 or abs(ratio - stride) > 1e-9:
        raise ValueError(f"rate_in={rate_in} is not an integer multiple of rate_out={rate_out}")
    series = np.asarray(series)
    return series[stride - 1 :: stride]


def wrap_degrees(a):
    """Wrap angles to (-180, 180]."""
    a = np.mod(np.asarray(a, dtype=np.float64) + 180.0, 360.0) - 180.0
    return np.where(a == -180.0, 180.0, a)


# --- gyro JSON Lines ---------------------------------------------------------


def write_gyro_jsonl(path, stream: GyroStream) -> None:
    with open(path, "w") as fh:
        for t, (wx, wy, wz) in zip(stream.t, stream.omega):
            fh.write(json.dumps({"t": float(t), "wx": float(wx), "wy": float(wy), "wz": float(wz)}) + "\n")


def read_gyro_jsonl(path) -> GyroStream:
    ts, om = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            ts.append(float(rec["t"]))
            om.append([float(rec["wx"]), float(rec["wy"]), float(rec["wz"])])
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: bad gyro record ({exc})") from exc
    try:
        return GyroStream(np.array(ts), np.array(om).reshape(-1, 3))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
