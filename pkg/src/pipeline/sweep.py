"""
Reveal-ratio sweep. Rebuilds training pairs at every gamma in
cfg.sweep_gammas, trains the regressor and scores it on the dev split.

    run_gamma_sweep(cfg)            -> list[dict]   one row per gamma: gamma, pearson_r, mse, ...
    write_sweep_csv(rows, path)     -> Path

The train/dev split and the per-cluster mask seeds are the same for every
gamma, so rows differ only in how much of each summary the query reveals.
"""
import logging
import os
from pathlib import Path

import pandas as pd

from config import PipelineConfig
from data.corpus import split_records
from pipeline.stages import dev_metrics, finish_stage, load_records, pairs_for, train_config
from ranker import train

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["gamma", "pearson_r", "mse", "train_pairs", "dev_pairs"]


def run_gamma_sweep(cfg: PipelineConfig) -> list[dict]:
    records = load_records(cfg)
    train_records, dev_records = split_records(records, cfg.dev_fraction)
    if not dev_records:
        raise ValueError("gamma-sweep needs a non-empty dev split (at least two clusters and dev_fraction > 0)")

    print(f"\nSweep: {len(cfg.sweep_gammas)} gamma values, "
          f"{len(train_records)} train / {len(dev_records)} dev clusters\n")
    rows = []
    for i, gamma in enumerate(cfg.sweep_gammas, 1):
        print(f"  [{i}/{len(cfg.sweep_gammas)}] gamma={gamma} ...", end=" ", flush=True)
        train_pairs = pairs_for(train_records, cfg, gamma)
        dev_pairs = pairs_for(dev_records, cfg, gamma)
        params = train(train_pairs, train_config(cfg))
        dev = dev_metrics(params, dev_pairs)
        rows.append({
            "gamma": float(gamma),
            "pearson_r": dev["pearson_r"],
            "mse": dev["mse"],
            "train_pairs": len(train_pairs),
            "dev_pairs": len(dev_pairs),
        })
        print(f"r={dev['pearson_r']:.4f} mse={dev['mse']:.6f}")
    return rows


def _print_sweep_table(rows: list[dict]) -> None:
    print(f"\n{'GAMMA SWEEP':=<48}")
    print(f"{'gamma':>7} {'pearson_r':>10} {'mse':>10} {'train':>8} {'dev':>6}")
    print("-" * 48)
    for r in rows:
        print(f"{r['gamma']:>7.2f} {r['pearson_r']:>10.4f} {r['mse']:>10.6f} {r['train_pairs']:>8} {r['dev_pairs']:>6}")
    print()


def write_sweep_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    pd.DataFrame(rows, columns=SWEEP_COLUMNS).to_csv(tmp_path, index=False, float_format="%.6f")
    os.replace(tmp_path, path)
    return path


def run_sweep_stage(cfg: PipelineConfig, print_output: bool = True) -> dict:
    rows = run_gamma_sweep(cfg)
    if print_output:
        _print_sweep_table(rows)
    path = write_sweep_csv(rows, cfg.out / "gamma_sweep.csv")
    return finish_stage(cfg, "gamma-sweep", len(cfg.sweep_gammas), len(rows), path, rows=rows)
