"""Session files (JSON) and CSV/JSON report writers."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from .errors import DataError
from .geom import GyroStream
from .scene import Layout, SessionTrace

SESSION_GLOB = "session_*.json"


def session_to_dict(trace: SessionTrace) -> dict:
    g = trace.gyro
    return {
        "meta": {
            "session_id": trace.session_id,
            "seed": int(trace.seed),
            "layout": {
                "partner_azimuths": list(trace.layout.partner_azimuths),
                "partner_elevations": list(trace.layout.partner_elevations),
            },
            "rates": {"frame": trace.frame_rate, "gyro": trace.gyro_rate},
            "duration": trace.duration,
            "bias": [float(b) for b in trace.gyro_bias],
            "noise_level": int(trace.noise_level),
        },
        "gyro": np.column_stack([g.t, g.omega]).tolist(),
        "vad": {
            "self": trace.self_vad.astype(int).tolist(),
            "partners": trace.vad.astype(int).tolist(),
        },
        "truth": {
            "orientation": np.column_stack([trace.true_az, trace.true_el]).tolist(),
            "partner_positions": np.stack([trace.partner_az, trace.partner_el], axis=-1).tolist(),
            "initial_orientation": [float(v) for v in trace.initial_orientation],
        },
    }


def session_from_dict(doc: dict, source: str = "<session>") -> SessionTrace:
    try:
        meta, truth, vad = doc["meta"], doc["truth"], doc["vad"]
        gyro = np.asarray(doc["gyro"], dtype=np.float64).reshape(-1, 4)
        orient = np.asarray(truth["orientation"], dtype=np.float64).reshape(-1, 2)
        partners = np.asarray(truth["partner_positions"], dtype=np.float64)
        self_vad = np.asarray(vad["self"], dtype=bool)
        partner_vad = np.atleast_2d(np.asarray(vad["partners"], dtype=bool))
        layout = Layout(meta["layout"]["partner_azimuths"], meta["layout"].get("partner_elevations"))
        trace = SessionTrace(
            session_id=str(meta["session_id"]),
            seed=int(meta["seed"]),
            layout=layout,
            frame_rate=float(meta["rates"]["frame"]),
            gyro_rate=float(meta["rates"]["gyro"]),
            duration=float(meta["duration"]),
            gyro=GyroStream(gyro[:, 0], gyro[:, 1:]),
            true_az=orient[:, 0],
            true_el=orient[:, 1],
            initial_orientation=tuple(float(v) for v in truth["initial_orientation"]),
            partner_az=partners[..., 0].reshape(len(partners), -1),
            partner_el=partners[..., 1].reshape(len(partners), -1),
            self_vad=self_vad,
            vad=partner_vad,
            gyro_bias=np.asarray(meta.get("bias", [0.0, 0.0, 0.0]), dtype=np.float64),
            noise_level=int(meta.get("noise_level", 0)),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DataError(f"{source}: malformed session file ({type(exc).__name__}: {exc})") from None
    n = trace.n_frames
    if self_vad.shape != (n,) or partner_vad.shape != (layout.group_size - 1, n) or trace.partner_az.shape[1] != n:
        raise DataError(f"{source}: frame counts of truth and voice activity disagree")
    return trace


def write_session(path, trace: SessionTrace) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(session_to_dict(trace)))
    return path


def read_session(path) -> SessionTrace:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return session_from_dict(doc, str(path))


def session_paths(directory) -> List[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    paths = sorted(directory.glob(SESSION_GLOB))
    if not paths:
        raise DataError(f"{directory}: no {SESSION_GLOB} files")
    return paths


def read_sessions(directory) -> List[SessionTrace]:
    return [read_session(p) for p in session_paths(directory)]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path, rows: Sequence[dict], columns: Iterable[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = list(rows)
    columns = list(columns) if columns is not None else (list(rows[0]) if rows else [])
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in columns})
    return path
