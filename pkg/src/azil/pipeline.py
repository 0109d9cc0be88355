"""Datasets, splits and the experiment drivers behind the CLI and scripts."""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import steering as st
from .baselines import DbscanParams, rule_count, rule_localize, sweep_vad_threshold
from .config import RunConfig, SplitConfig
from .geom import wrap_degrees
from .metrics import bland_altman, evaluate_multiclass, evaluate_multilabel, session_agreement
from .nn import Batch, CocoNet, HaloCocoNet, HaloNet, MlpBaseline, predict, train
from .scene import SceneConfig, Segment, SessionTrace, segment_session, simulate_session
from .targets import BinConfig, class_weights, segment_zone_label, shape_target_count

log = logging.getLogger(__name__)

SUBSTREAMS = {"simulation": 0, "init": 1, "shuffle": 2, "steering": 3}
LOC_MODELS = ("halo", "halo_no_static", "halo_noisy", "halo_coco", "mlp_loc")
COUNT_MODELS = ("coco", "mlp_count")
# CoCo first so HALo-CoCo reuses the trained counter
ALL_MODELS = ("coco", "halo", "halo_no_static", "halo_noisy", "halo_coco", "mlp_loc", "mlp_count")
THRESHOLD = 0.5


def substream_seed(root: int, name: str, *extra: int) -> int:
    """Independent child seed of ``root`` for a named purpose."""
    ss = np.random.SeedSequence([int(root), SUBSTREAMS[name], *[int(e) for e in extra]])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def simulate_sessions(config: SceneConfig, n_sessions: int, root_seed: int) -> List[SessionTrace]:
    return [
        simulate_session(config, substream_seed(root_seed, "simulation", i), f"s{i:04d}")
        for i in range(n_sessions)
    ]


# --- segment table ---------------------------------------------------------------


@dataclass
class SegmentTable:
    x: np.ndarray  # (N, 4, T) channels az, el, self_vad, speaker_vad
    zones: np.ndarray  # (N, n_bins) bool
    n_partners: np.ndarray  # (N,)
    shaped: np.ndarray  # (N,) partners above the voice-activity threshold
    rule_zones: np.ndarray  # (N, n_bins) DBSCAN baseline
    rule_counts: np.ndarray  # (N,)
    session_ids: np.ndarray  # (N,) str
    indices: np.ndarray  # (N,) segment index within its session
    true_az: np.ndarray  # (N, T)

    def __len__(self):
        return len(self.x)

    def take(self, mask) -> "SegmentTable":
        return SegmentTable(**{f.name: getattr(self, f.name)[mask] for f in dataclasses.fields(self)})

    @property
    def group_sizes(self) -> np.ndarray:
        return self.n_partners + 1

    def count_targets(self, shaping: bool) -> np.ndarray:
        """Class indices: partners - 1, or the shaped count itself (class 0 = nobody)."""
        return self.shaped.copy() if shaping else self.n_partners - 1

    def rule_count_targets(self, shaping: bool) -> np.ndarray:
        return self.rule_counts.copy() if shaping else self.rule_counts - 1


def build_table(segments: Sequence[Segment], bins: BinConfig = BinConfig(), vad_threshold: float = 8.0,
                baseline: DbscanParams = DbscanParams(), frame_rate: float = 5.0) -> SegmentTable:
    if not segments:
        raise ValueError("no segments")
    x = np.stack([np.stack([s.az, s.el, s.self_vad, s.speaker_vad]).astype(np.float64) for s in segments])
    return SegmentTable(
        x=x,
        zones=np.stack([segment_zone_label(s.partner_az, bins) for s in segments]),
        n_partners=np.array([s.n_partners for s in segments]),
        shaped=np.array([shape_target_count(s.vad, vad_threshold, frame_rate) for s in segments]),
        rule_zones=np.stack([rule_localize(s.az, s.el, s.self_vad, bins, baseline) for s in segments]),
        rule_counts=np.array([rule_count(s.az, s.el, s.self_vad, baseline) for s in segments]),
        session_ids=np.array([s.session_id for s in segments]),
        indices=np.array([s.index for s in segments]),
        true_az=np.stack([s.true_az for s in segments]),
    )


def segments_of(traces: Sequence[SessionTrace], anchor: str = "start") -> List[Segment]:
    return [seg for tr in traces for seg in segment_session(tr, anchor=anchor)]


def table_from_config(traces: Sequence[SessionTrace], config: RunConfig) -> SegmentTable:
    return build_table(segments_of(traces, config.anchor), config.bins, config.vad_threshold, config.baseline)


# --- splits ----------------------------------------------------------------------------


def _unit_hash(seed: int, key: str) -> float:
    digest = hashlib.sha256(f"{int(seed)}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def split_of(key: str, seed: int, split: SplitConfig = SplitConfig()) -> str:
    """Deterministic train/val/test assignment of a session (or segment) key."""
    u = _unit_hash(seed, key)
    if u >= split.train_fraction:
        return "test"
    return "val" if u < split.train_fraction * split.val_fraction else "train"


def assign_splits(table: SegmentTable, seed: int, split: SplitConfig = SplitConfig()) -> np.ndarray:
    """Session-level split; falls back to segment keys when sessions are too few.

    The fallback only triggers when a session-level split would leave the
    training or validation part empty (e.g. a single simulated session).
    """
    labels = np.array([split_of(s, seed, split) for s in table.session_ids])
    if np.any(labels == "train") and np.any(labels == "val"):
        return labels
    labels = np.array([split_of(f"{s}/{i}", seed, split) for s, i in zip(table.session_ids, table.indices)])
    for needed in ("train", "val"):
        if not np.any(labels == needed):
            donors = [k for k in range(len(labels)) if np.sum(labels == labels[k]) > 1]
            if donors:
                labels[donors[0]] = needed
    return labels


# --- model training ------------------------------------------------------------------


def _static(table: SegmentTable, mode: str) -> Optional[np.ndarray]:
    if mode in ("true_count", "noisy"):
        return table.n_partners.astype(np.float64)[:, None]
    return None


def loc_batch(table: SegmentTable, mode: str = "true_count") -> Batch:
    return Batch(table.x, table.zones.astype(np.float64), _static(table, mode))


def count_batch(table: SegmentTable, shaping: bool = False) -> Batch:
    return Batch(table.x, table.count_targets(shaping))


def train_halo(config: RunConfig, train_t: SegmentTable, val_t: SegmentTable, seed: int, mode: str,
               coco: Optional[CocoNet] = None, deterministic: bool = True):
    init = substream_seed(seed, "init")
    shuffle = substream_seed(seed, "shuffle")
    tcfg = config.train_loc
    if mode == "coco":
        if coco is None:
            raise ValueError("static_mode 'coco' needs a trained CoCo model")
        model = HaloCocoNet(HaloNet(config.halo_config(coco.config.embed_dim), init), coco)
    else:
        model = HaloNet(config.halo_config({"none": 0}.get(mode, 1)), init)
        if mode == "noisy":
            tcfg = dataclasses.replace(tcfg, static_noise_fraction=config.features.static_noise_fraction)
    mode_data = "none" if mode == "coco" else mode
    weights = class_weights(train_t.zones)
    return train(model, loc_batch(train_t, mode_data), loc_batch(val_t, mode_data), tcfg, shuffle,
                 class_weights=weights, deterministic=deterministic)


def train_coco(config: RunConfig, train_t, val_t, seed: int, deterministic: bool = True):
    model = CocoNet(config.coco_config(), substream_seed(seed, "init"))
    shaping = config.features.target_shaping
    return train(model, count_batch(train_t, shaping), count_batch(val_t, shaping), config.train_count,
                 substream_seed(seed, "shuffle"), deterministic=deterministic)


def train_mlp(config: RunConfig, train_t, val_t, seed: int, task: str, deterministic: bool = True):
    model = MlpBaseline(config.mlp_config(), task=task, seed=substream_seed(seed, "init"))
    if task == "loc":
        return train(model, loc_batch(train_t, "none"), loc_batch(val_t, "none"), config.train_loc,
                     substream_seed(seed, "shuffle"), class_weights=class_weights(train_t.zones),
                     deterministic=deterministic)
    shaping = config.features.target_shaping
    return train(model, count_batch(train_t, shaping), count_batch(val_t, shaping), config.train_count,
                 substream_seed(seed, "shuffle"), deterministic=deterministic)


def predict_zones(model, table: SegmentTable, mode: str = "true_count") -> np.ndarray:
    static = None if isinstance(model, HaloCocoNet) else _static(table, mode)
    return predict(model, table.x, static) >= THRESHOLD


def predict_counts(model, table: SegmentTable) -> np.ndarray:
    return np.argmax(predict(model, table.x), axis=1)


def count_classes(config: RunConfig) -> List[int]:
    return list(range(config.n_classes()))


def session_level(table: SegmentTable, predicted: np.ndarray) -> dict:
    """Per-session zone counts of predictions against the truth, pooled over bins."""
    gt, pr = [], []
    for sid in np.unique(table.session_ids):
        mask = table.session_ids == sid
        gt.append(table.zones[mask].sum(axis=0))
        pr.append(predicted[mask].sum(axis=0))
    gt, pr = np.concatenate(gt), np.concatenate(pr)
    try:
        r, mae = session_agreement(gt, pr)
    except ValueError:
        r, mae = float("nan"), float(np.mean(np.abs(gt - pr)))
    return {"pearson": r, "mae": mae}


def by_group_size(table: SegmentTable, predicted: np.ndarray) -> Dict[str, dict]:
    out = {}
    for g in np.unique(table.group_sizes):
        mask = table.group_sizes == g
        out[str(int(g))] = evaluate_multilabel(table.zones[mask], predicted[mask]).to_dict()
    return out


def run_seed(config: RunConfig, table: SegmentTable, seed: int, models: Sequence[str] = ALL_MODELS,
             deterministic: bool = True, progress: Callable[[str], None] = None) -> dict:
    """Train every requested model on one split and evaluate on its test sessions."""
    labels = assign_splits(table, seed, config.split)
    tr, va, te = (table.take(labels == k) for k in ("train", "val", "test"))
    if len(te) == 0:
        raise ValueError("empty test split")
    shaping = config.features.target_shaping
    classes = count_classes(config)
    out = {"seed": int(seed), "n_train": len(tr), "n_val": len(va), "n_test": len(te), "models": {}}

    def note(name, hist, t0):
        if progress:
            progress(f"seed {seed} {name}: best epoch {hist.best_epoch} ({time.time() - t0:.1f}s)")

    def loc_report(name, pred, hist=None):
        rep = evaluate_multilabel(te.zones, pred).to_dict()
        rep["session"] = session_level(te, pred)
        rep["by_group_size"] = by_group_size(te, pred)
        if hist is not None:
            rep["best_epoch"] = hist.best_epoch
            rep["best_val_loss"] = hist.best_val_loss
        out["models"][name] = rep

    coco = None
    for name in models:
        t0 = time.time()
        if name in ("halo", "halo_no_static", "halo_noisy"):
            mode = {"halo": "true_count", "halo_no_static": "none", "halo_noisy": "noisy"}[name]
            model, hist = train_halo(config, tr, va, seed, mode, deterministic=deterministic)
            # the noisy variant is evaluated with clean counts
            loc_report(name, predict_zones(model, te, "none" if mode == "none" else "true_count"), hist)
        elif name == "coco":
            coco, hist = train_coco(config, tr, va, seed, deterministic)
            rep = evaluate_multiclass(te.count_targets(shaping), predict_counts(coco, te), classes).to_dict()
            rep["best_epoch"] = hist.best_epoch
            out["models"]["coco"] = rep
        elif name == "halo_coco":
            if coco is None:
                coco, _ = train_coco(config, tr, va, seed, deterministic)
            model, hist = train_halo(config, tr, va, seed, "coco", coco, deterministic)
            loc_report(name, predict_zones(model, te), hist)
        elif name == "mlp_loc":
            model, hist = train_mlp(config, tr, va, seed, "loc", deterministic)
            loc_report(name, predict_zones(model, te, "none"), hist)
        elif name == "mlp_count":
            model, hist = train_mlp(config, tr, va, seed, "count", deterministic)
            rep = evaluate_multiclass(te.count_targets(shaping), predict_counts(model, te), classes).to_dict()
            rep["best_epoch"] = hist.best_epoch
            out["models"][name] = rep
        else:
            raise ValueError(f"unknown model {name!r}")
        note(name, hist, t0)
    loc_report("rule_loc", te.rule_zones)
    rule_pred = np.clip(te.rule_count_targets(shaping), -1, max(classes))
    out["models"]["rule_count"] = evaluate_multiclass(te.count_targets(shaping), rule_pred, classes).to_dict()
    return out


def _summary(per_seed: List[dict]) -> dict:
    """Mean and sample standard deviation of scalar metrics across seeds."""
    summary = {}
    names = per_seed[0]["models"].keys()
    for name in names:
        stats = {}
        for metric in ("hamming", "macro_f1", "accuracy"):
            vals = [r["models"][name][metric] for r in per_seed if metric in r["models"][name]]
            if vals:
                stats[metric] = {
                    "mean": float(np.mean(vals)),
                    "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                    "values": [float(v) for v in vals],
                }
        summary[name] = stats
    return summary


def learning_study(config: RunConfig, models: Sequence[str] = ALL_MODELS, deterministic: bool = True,
                   progress: Callable[[str], None] = None, traces: Optional[List[SessionTrace]] = None) -> dict:
    """Simulate once, then train and evaluate every model for each seed."""
    if traces is None:
        traces = simulate_sessions(config.scene_config(), config.sessions, config.data_seed)
    table = table_from_config(traces, config)
    per_seed = [run_seed(config, table, s, models, deterministic, progress) for s in config.seeds]
    return {
        "experiment": "learning",
        "config": config.to_dict(),
        "n_segments": len(table),
        "per_seed": per_seed,
        "summary": _summary(per_seed),
    }


def drift_study(config: RunConfig, biases: Sequence[float] = (0.0, 0.5e-3, 1e-3, 2e-3), n_sessions: int = 150,
                seed: int = 2711) -> dict:
    """Bland-Altman agreement of IMU-derived azimuth with the truth under injected z-axis gyro bias."""
    rows = []
    for b in biases:
        scene = dataclasses.replace(config.scene_config(), gyro_bias=(0.0, 0.0, float(b)))
        diffs, refs = [], []
        for tr in simulate_sessions(scene, n_sessions, seed):
            for seg in segment_session(tr, anchor=config.anchor):
                refs.append(seg.true_az)
                diffs.append(wrap_degrees(seg.az - seg.true_az))
        ref = np.concatenate(refs)
        rep = bland_altman(ref, ref + np.concatenate(diffs)).to_dict()
        rep["bias_mrad_s"] = float(b) * 1e3
        rows.append(rep)
    return {"experiment": "drift", "rows": rows}


def steering_study(seed: int = 2711, snrs: Sequence[float] = (20, 0, -10, -15, -20, -25, -30), trials: int = 30,
                   bins: BinConfig = BinConfig(), geometry: Optional[st.ArrayGeometry] = None,
                   duration: float = 1.0, methods: Sequence[str] = st.METHODS) -> dict:
    """SNR and DoA error per steering method over random single-source scenes."""
    geometry = geometry or st.ArrayGeometry.glasses()
    rng = np.random.default_rng(substream_seed(seed, "steering"))
    n = int(round(duration * geometry.sample_rate))
    rows = []
    for snr in snrs:
        snr_out = {m: [] for m in methods}
        err = {m: [] for m in methods if m not in ("reference",)}
        for _ in range(trials):
            az = float(rng.uniform(-90.0, 90.0))
            src = st.speech_like(n, geometry.sample_rate, rng)
            scene = st.synthesize_scene([(az, src)], geometry, st.noise_level_for_snr(src, snr), rng)
            for res in st.compare_methods(scene, geometry, methods, bins):
                snr_out[res.method].append(res.snr_db)
                if res.method in err:
                    err[res.method].append(float(st.angular_error(res.azimuths[0], az)))
        for m in methods:
            rows.append({
                "input_snr_db": float(snr),
                "method": m,
                "snr_db": float(np.mean(snr_out[m])),
                "snr_gain_db": float(np.mean(np.array(snr_out[m]) - np.array(snr_out["reference"])))
                if "reference" in snr_out else float("nan"),
                "doa_error_mean": float(np.mean(err[m])) if m in err else float("nan"),
                "doa_error_max": float(np.max(err[m])) if m in err else float("nan"),
                "trials": trials,
            })
    return {"experiment": "steering", "rows": rows}


def threshold_sweep(config: RunConfig, thresholds: Sequence[float] = tuple(range(2, 15, 2)),
                    traces: Optional[List[SessionTrace]] = None) -> dict:
    if traces is None:
        traces = simulate_sessions(config.scene_config(), config.sessions, config.data_seed)
    rows = sweep_vad_threshold(segments_of(traces, config.anchor), thresholds, eps=config.baseline.eps)
    return {"experiment": "threshold", "rows": rows}


def zones_ablation(config: RunConfig, presets: Sequence[str] = ("3", "6", "8"), deterministic: bool = True,
                   traces: Optional[List[SessionTrace]] = None, progress=None) -> dict:
    """HALo with true-count static features under coarser and finer discretizations."""
    if traces is None:
        traces = simulate_sessions(config.scene_config(), config.sessions, config.data_seed)
    rows = []
    for name in presets:
        cfg = dataclasses.replace(config, bins=BinConfig.preset(name))
        table = table_from_config(traces, cfg)
        for seed in cfg.seeds:
            res = run_seed(cfg, table, seed, ("halo",), deterministic, progress)
            rep = res["models"]["halo"]
            rows.append({"n_zones": int(name), "seed": int(seed), "macro_f1": rep["macro_f1"],
                         "hamming": rep["hamming"], "accuracy": rep["accuracy"],
                         "rule_macro_f1": res["models"]["rule_loc"]["macro_f1"]})
    return {"experiment": "zones", "rows": rows}


# --- export -------------------------------------------------------------------------------


def export_tables(results: dict) -> Dict[str, List[dict]]:
    """Flatten experiment results into plot-ready row lists keyed by file stem."""
    tables: Dict[str, List[dict]] = {}
    kind = results.get("experiment")
    if kind == "learning":
        summary = results["summary"]
        tables["localization"] = [
            {"model": m, **{f"{k}_{s}": summary[m][k][s] for k in ("hamming", "macro_f1", "accuracy")
                            for s in ("mean", "std") if k in summary[m]}}
            for m in ("halo", "mlp_loc", "rule_loc") if m in summary
        ]
        tables["counting"] = [
            {"model": m, **{f"{k}_{s}": summary[m][k][s] for k in ("accuracy", "macro_f1") for s in ("mean", "std")}}
            for m in ("coco", "mlp_count", "rule_count") if m in summary
        ]
        labels = {"halo_no_static": "none", "halo": "true_count", "halo_noisy": "noisy", "halo_coco": "coco"}
        tables["static_features"] = [
            {"static_mode": labels[m], "model": m, "macro_f1_mean": summary[m]["macro_f1"]["mean"],
             "macro_f1_std": summary[m]["macro_f1"]["std"], "hamming_mean": summary[m]["hamming"]["mean"]}
            for m in labels if m in summary
        ]
        rows = []
        for r in results["per_seed"]:
            for g, rep in r["models"].get("halo", {}).get("by_group_size", {}).items():
                rows.append({"seed": r["seed"], "group_size": int(g), "macro_f1": rep["macro_f1"],
                             "hamming": rep["hamming"], "support": int(sum(rep["support"]))})
        tables["group_size"] = rows
        per_bin = []
        for r in results["per_seed"]:
            for m in ("halo", "mlp_loc", "rule_loc"):
                rep = r["models"].get(m)
                if rep is None:
                    continue
                for i, (acc, f1) in enumerate(zip(rep["logitwise_accuracy"], rep["logitwise_f1"])):
                    per_bin.append({"seed": r["seed"], "model": m, "bin": i, "accuracy": acc, "f1": f1,
                                    "support": rep["support"][i]})
        tables["per_bin"] = per_bin
    elif kind == "drift":
        tables["bland_altman"] = results["rows"]
    elif kind == "steering":
        tables["steering"] = results["rows"]
    elif kind == "threshold":
        tables["vad_threshold"] = results["rows"]
    elif kind == "zones":
        tables["zone_count"] = results["rows"]
    else:
        raise ValueError(f"unknown experiment kind {kind!r}")
    return tables
