"""Command-line entry point: ``azil <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, DataError

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3
DATA_ENV = "AZIL_DATA_DIR"
TASKS = ("halo", "coco", "halo-coco", "mlp")

log = logging.getLogger("azil")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def data_root() -> Path:
    return Path(os.environ.get(DATA_ENV, "data"))


def _config(args) -> RunConfig:
    return load_config(args.config) if getattr(args, "config", None) else RunConfig()


def _data_dir(value) -> Path:
    return Path(value) if value else data_root()


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


# --- subcommands -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .io import write_session
    from .pipeline import simulate_sessions

    cfg = _config(args)
    scene = cfg.scene_config()
    if args.group_size is not None:
        if not 2 <= args.group_size <= 5:
            raise ConfigError("--group-size must be between 2 and 5")
        scene = dataclasses.replace(scene, group_size=args.group_size)
    if args.duration is not None:
        scene = dataclasses.replace(scene, duration=args.duration)
    seed = cfg.data_seed if args.seed is None else args.seed
    n = cfg.sessions if args.sessions is None else args.sessions
    if n < 1:
        raise ConfigError("--sessions must be positive")
    out = _data_dir(args.out)
    for trace in simulate_sessions(scene, n, seed):
        write_session(out / f"session_{trace.session_id}.json", trace)
    log.info("wrote %d sessions to %s", n, out)
    return EXIT_OK


def _load_table(cfg: RunConfig, directory):
    from .io import read_sessions
    from .pipeline import table_from_config

    traces = read_sessions(_data_dir(directory))
    try:
        return table_from_config(traces, cfg)
    except ValueError as exc:
        raise DataError(f"cannot build segments: {exc}") from None


def cmd_train(args) -> int:
    from .nn import checkpoint
    from .nn.checkpoint import load_checkpoint
    from .pipeline import assign_splits, train_coco, train_halo, train_mlp

    cfg = _config(args)
    table = _load_table(cfg, args.data)
    seed = cfg.seeds[0] if args.seed is None else args.seed
    labels = assign_splits(table, seed, cfg.split)
    tr, va = table.take(labels == "train"), table.take(labels == "val")
    if len(tr) == 0 or len(va) == 0:
        raise DataError("not enough segments for a train/validation split")
    det = args.deterministic
    if args.task == "halo":
        model, hist = train_halo(cfg, tr, va, seed, cfg.features.static_mode if cfg.features.static_mode != "coco"
                                 else "true_count", deterministic=det)
    elif args.task == "coco":
        model, hist = train_coco(cfg, tr, va, seed, det)
    elif args.task == "mlp":
        model, hist = train_mlp(cfg, tr, va, seed, args.mlp_task, det)
    else:
        if not args.coco:
            raise ConfigError("--coco CHECKPOINT is required for --task halo-coco")
        try:
            coco, _ = load_checkpoint(args.coco)
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"{args.coco}: cannot load CoCo checkpoint ({exc})") from None
        model, hist = train_halo(cfg, tr, va, seed, "coco", coco, det)
    extra = {
        "history": hist.to_dict(),
        "split_seed": int(seed),
        "run_config": cfg.to_dict(),
        "static_mode": cfg.features.static_mode,
    }
    checkpoint.save_checkpoint(args.out, model, extra)
    log.info("saved %s (best epoch %d)", args.out, hist.best_epoch)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .io import write_csv, write_json
    from .metrics import evaluate_multiclass, evaluate_multilabel
    from .nn.checkpoint import load_checkpoint
    from .pipeline import assign_splits, count_classes, predict_counts, predict_zones

    try:
        model, doc = load_checkpoint(args.checkpoint)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"{args.checkpoint}: cannot load checkpoint ({exc})") from None
    cfg = _config(args) if args.config else RunConfig()
    if not args.config and "run_config" in doc:
        from .config import parse_config

        cfg = parse_config(json.dumps(doc["run_config"]), str(args.checkpoint))
    table = _load_table(cfg, args.data)
    if args.split != "all":
        labels = assign_splits(table, doc.get("split_seed", cfg.seeds[0]), cfg.split)
        table = table.take(labels == args.split)
    if len(table) == 0:
        raise DataError(f"the {args.split} split is empty")
    if model.task == "loc":
        config = getattr(model, "config", None)
        mode = "none" if config is None or config.static_dim == 0 else "true_count"
        report = evaluate_multilabel(table.zones, predict_zones(model, table, mode)).to_dict()
        if args.csv:
            rows = [
                {"bin": i, "zone": label, "accuracy": a, "f1": f, "support": s}
                for i, (label, a, f, s) in enumerate(zip(cfg.bins.labels(), report["logitwise_accuracy"],
                                                         report["logitwise_f1"], report["support"]))
            ]
            rows.append({"bin": "all", "zone": "macro", "accuracy": report["accuracy"], "f1": report["macro_f1"],
                         "support": len(table)})
            write_csv(args.csv, rows)
    else:
        shaping = cfg.features.target_shaping
        report = evaluate_multiclass(table.count_targets(shaping), predict_counts(model, table),
                                     count_classes(cfg)).to_dict()
    report["kind"] = doc["kind"]
    report["split"] = args.split
    report["n_segments"] = len(table)
    write_json(args.out, report)
    return EXIT_OK


def cmd_baseline(args) -> int:
    from .baselines import DbscanParams
    from .io import write_json
    from .metrics import evaluate_multiclass, evaluate_multilabel

    cfg = _config(args)
    try:
        params = DbscanParams(eps=args.eps, min_pts=args.min_pts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = dataclasses.replace(cfg, baseline=params)
    table = _load_table(cfg, args.data)
    if args.task == "localize":
        report = evaluate_multilabel(table.zones, table.rule_zones).to_dict()
    else:
        shaping = cfg.features.target_shaping
        classes = list(range(cfg.n_classes()))
        pred = np.clip(table.rule_count_targets(shaping), -1, max(classes))
        report = evaluate_multiclass(table.count_targets(shaping), pred, classes).to_dict()
    report.update({"task": args.task, "eps": params.eps, "min_pts": params.min_pts, "n_segments": len(table)})
    write_json(args.out, report)
    return EXIT_OK


def _scene_from_file(path):
    from . import steering as st

    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, str(path)) from None
    try:
        geometry = st.ArrayGeometry.preset(doc.get("geometry", "glasses"))
        rng = np.random.default_rng(int(doc.get("seed", 0)))
        duration = float(doc.get("duration", 1.0))
        n = int(round(duration * geometry.sample_rate))
        sources = []
        for src in doc["sources"]:
            if "file" in src:
                signal = np.loadtxt(Path(path).parent / src["file"], dtype=np.float64).ravel()
            elif src.get("generator", "speech") == "speech":
                signal = st.speech_like(n, geometry.sample_rate, rng)
            elif src["generator"] == "noise":
                signal = rng.standard_normal(n)
            else:
                raise ValueError(f"unknown generator {src['generator']!r}")
            sources.append((float(src["azimuth"]), signal))
        if "snr_db" in doc:
            level = st.noise_level_for_snr(sources[0][1], float(doc["snr_db"]))
        else:
            level = float(doc.get("noise_level", 0.0))
        return st.synthesize_scene(sources, geometry, level, rng), geometry
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid scene ({exc})") from None


def cmd_steer(args) -> int:
    from . import steering as st
    from .io import write_csv

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = sorted(set(methods) - set(st.METHODS))
    if unknown:
        raise ConfigError(f"unknown steering methods {unknown}; choose from {list(st.METHODS)}")
    scene, geometry = _scene_from_file(args.scene)
    cfg = _config(args)
    results = st.compare_methods(scene, geometry, methods, cfg.bins)
    rows = [{"method": r.method, "snr_db": r.snr_db, "azimuths": " ".join(f"{a:g}" for a in r.azimuths)}
            for r in results]
    write_csv(args.out, rows, ["method", "snr_db", "azimuths"])
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    import torch

    from .nn import Batch, CocoNet, HaloNet, MlpBaseline, ModelConfig, batch_loss, grad_check

    tiny = dict(conv_channels=3, conv_layers=1, hidden=8, reduced=1, fusion_dim=4, head_hidden=3, embed_dim=3,
                n_classes=4, mlp_hidden=(6,), seq_len=20)
    gen = np.random.default_rng(args.seed)
    x = gen.normal(size=(4, 4, 20))
    x[:, 2:] = gen.random((4, 2, 20)) < 0.5
    if args.task == "halo":
        model = HaloNet(ModelConfig(static_dim=1, **tiny), args.seed)
        batch = Batch(x, gen.random((4, 6)) < 0.5, gen.integers(1, 5, size=(4, 1)).astype(float))
    elif args.task == "coco":
        model = CocoNet(ModelConfig(channels=("az", "el", "self_vad", "speaker_vad"), static_dim=0, **tiny), args.seed)
        batch = Batch(x, gen.integers(0, 4, size=4))
    else:
        model = MlpBaseline(ModelConfig(channels=("az",), static_dim=0, **tiny), "loc", args.seed)
        batch = Batch(x, gen.random((4, 6)) < 0.5)
    with torch.no_grad():
        model.norm.mean.copy_(torch.zeros_like(model.norm.mean))
    worst, per_param = grad_check(model, lambda: batch_loss(model, batch), h=args.step)
    print(json.dumps({"task": args.task, "max_rel_err": worst, "tolerance": args.tol,
                      "passed": worst < args.tol, "per_parameter": per_param}, indent=2, sort_keys=True))
    return EXIT_OK if worst < args.tol else 1


def cmd_sweep(args) -> int:
    from .io import read_sessions, write_csv
    from .pipeline import segments_of
    from .baselines import sweep_vad_threshold

    cfg = _config(args)
    traces = read_sessions(_data_dir(args.data))
    rows = sweep_vad_threshold(segments_of(traces, cfg.anchor), _floats(args.thresholds), eps=args.eps)
    write_csv(args.out, rows)
    return EXIT_OK


def cmd_experiment(args) -> int:
    from . import pipeline as pl
    from .io import write_json

    cfg = _config(args)
    progress = (lambda msg: log.info(msg))
    if args.name == "learning":
        res = pl.learning_study(cfg, deterministic=args.deterministic, progress=progress)
    elif args.name == "drift":
        res = pl.drift_study(cfg, n_sessions=args.sessions or 150, seed=cfg.data_seed)
    elif args.name == "steering":
        res = pl.steering_study(seed=cfg.data_seed, bins=cfg.bins)
    elif args.name == "threshold":
        res = pl.threshold_sweep(cfg)
    else:
        res = pl.zones_ablation(cfg, deterministic=args.deterministic, progress=progress)
    write_json(args.out, res)
    return EXIT_OK


def cmd_export(args) -> int:
    from .io import write_csv
    from .pipeline import export_tables

    try:
        results = json.loads(Path(args.results).read_text())
        tables = export_tables(results)
    except OSError as exc:
        raise DataError(f"{args.results}: {exc.strerror}") from None
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"{args.results}: not an experiment result ({exc})") from None
    out = Path(args.out)
    for stem, rows in tables.items():
        write_csv(out / f"{stem}.csv", rows)
    return EXIT_OK


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="azil", description="Acoustic zones of interest from head orientation.")
    p.add_argument("--deterministic", action="store_true", help="single-threaded, deterministic kernels")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate sessions to JSON files")
    s.add_argument("--sessions", type=int)
    s.add_argument("--group-size", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--duration", type=float)
    s.add_argument("--config")
    s.add_argument("--out", help=f"output directory (default ${DATA_ENV})")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("train", help="train a model and write a JSON checkpoint")
    s.add_argument("--task", choices=TASKS, required=True)
    s.add_argument("--mlp-task", choices=("loc", "count"), default="loc")
    s.add_argument("--config")
    s.add_argument("--data")
    s.add_argument("--seed", type=int)
    s.add_argument("--coco", help="trained CoCo checkpoint for --task halo-coco")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--config")
    s.add_argument("--data")
    s.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    s.add_argument("--out", required=True)
    s.add_argument("--csv", help="per-zone scores as CSV")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("baseline", help="rule-based clustering baseline")
    s.add_argument("--task", choices=("localize", "count"), required=True)
    s.add_argument("--in", dest="data")
    s.add_argument("--eps", type=float, default=8.0)
    s.add_argument("--min-pts", type=int, default=10)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("steer", help="beamformer steering comparison on a synthetic scene")
    s.add_argument("--scene", required=True)
    s.add_argument("--methods", default="frontal,zones,music,gccphat,srp")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_steer)

    s = sub.add_parser("gradcheck", help="finite-difference gradient check on a tiny model")
    s.add_argument("--task", choices=("halo", "coco", "mlp"), default="halo")
    s.add_argument("--seed", type=int, default=2711)
    s.add_argument("--step", type=float, default=1e-5)
    s.add_argument("--tol", type=float, default=1e-4)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("sweep-threshold", help="voice-activity threshold sweep of the clustering counter")
    s.add_argument("--in", dest="data")
    s.add_argument("--thresholds", default="2,4,6,8,10,12,14")
    s.add_argument("--eps", type=float, default=8.0)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("experiment", help="run a full study and write its results JSON")
    s.add_argument("name", choices=("learning", "drift", "steering", "threshold", "zones"))
    s.add_argument("--config")
    s.add_argument("--sessions", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("export", help="flatten experiment results into plot-ready CSVs")
    s.add_argument("--results", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verbose:
            log.setLevel(logging.DEBUG)
        if args.deterministic:
            import torch

            torch.set_num_threads(1)
            torch.use_deterministic_algorithms(True)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
