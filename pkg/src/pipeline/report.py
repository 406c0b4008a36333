"""
Evaluation report over per-query scores.

    generate_report(per_query, print_output=True)  -> dict   macro averages per method
    write_table(macro, path)                       -> Path   CSV: method x (R1, R2, SU4, R@10, R@50)

per_query rows look like {"cluster_id", "method", "R1", "R2", "SU4", "R@10", "R@50"};
rows may omit metrics that do not apply (the gold row has no R@k).
"""
import math
import os
from pathlib import Path

import pandas as pd

METRIC_COLUMNS = ["R1", "R2", "SU4", "R@10", "R@50"]
METHOD_ORDER = ["ranker", "termfreq", "lead", "lexrank", "random", "generated", "gold"]


def _method_key(method: str) -> tuple[int, str]:
    return (METHOD_ORDER.index(method) if method in METHOD_ORDER else len(METHOD_ORDER), method)


def generate_report(per_query: list[dict], print_output: bool = True) -> dict:
    """Macro-average every metric per method.

    Returns {method: {"queries": n, metric: mean, ...}}. Also prints a table if
    print_output=True.
    """
    if not per_query:
        if print_output:
            print("No evaluation rows to report.")
        return {}

    df = pd.DataFrame(per_query)
    metrics = [c for c in METRIC_COLUMNS if c in df.columns]
    grouped = df.groupby("method", sort=False)
    means = grouped[metrics].mean()
    counts = grouped["cluster_id"].nunique()

    result: dict[str, dict] = {}
    for method in sorted(means.index, key=_method_key):
        row = {"queries": int(counts[method])}
        for m in metrics:
            value = float(means.loc[method, m])
            if not math.isnan(value):
                row[m] = round(value, 6)
        result[method] = row

    if print_output:
        _print_report(result)
    return result


def _print_report(r: dict) -> None:
    print("\n" + "=" * 64)
    print("EVALUATION (macro-averaged F1 / recall)")
    print("=" * 64)
    print(f"{'Method':<10} {'Queries':>7} " + " ".join(f"{c:>7}" for c in METRIC_COLUMNS))
    print("-" * 64)
    for method, row in r.items():
        cells = " ".join(f"{row[c]*100:>7.2f}" if c in row else f"{'-':>7}" for c in METRIC_COLUMNS)
        print(f"{method:<10} {row['queries']:>7} {cells}")
    print()


def write_table(macro: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(
        [{"method": method, **{c: row.get(c) for c in METRIC_COLUMNS}} for method, row in macro.items()],
        columns=["method"] + METRIC_COLUMNS,
    )
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    df.to_csv(tmp_path, index=False, float_format="%.6f")
    os.replace(tmp_path, path)
    return path
