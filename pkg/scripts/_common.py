"""Shared argument handling for the experiment scripts."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

import torch

from azil.config import RunConfig, load_config
from azil.io import write_csv, write_json
from azil.pipeline import export_tables


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", help="run-config JSON (defaults otherwise)")
    p.add_argument("--out", default="results", help="output directory")
    return p


def setup(args) -> RunConfig:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    torch.set_num_threads(1)
    return load_config(args.config) if args.config else RunConfig()


def save(results: dict, out, name: str) -> None:
    out = Path(out)
    write_json(out / f"{name}.json", results)
    for stem, rows in export_tables(results).items():
        write_csv(out / f"{stem}.csv", rows)
    logging.info("wrote %s", out / f"{name}.json")
