"""Retrieval and diversity metrics plus cross-method comparison tables."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from statistics import median
from typing import Iterable, Sequence

import numpy as np

from .landscape import LandscapeTable
from .space import StateKey, hamming


@dataclass
class RetrievalReport:
    method: str
    seed: int
    best_loss: float
    median_top20_loss: float
    mean_hamming_top20: float
    sample_deficient: bool
    wall_clock: float
    best_so_far: list[tuple[int, float, float]] = field(default_factory=list)
    topk_recovery: list[tuple[int, int]] = field(default_factory=list)


def best_so_far(
    losses: Sequence[float], l_star: float, beta: float
) -> list[tuple[int, float, float]]:
    """(n, optimality gap, reward of the best state so far) series."""
    if len(losses) == 0:
        raise ValueError("empty trace")
    out = []
    best = float("inf")
    for n, loss in enumerate(losses, start=1):
        best = min(best, loss)
        out.append((n, best - l_star, float(np.exp(-beta * best))))
    return out


def topk_recovery(
    found: set[StateKey], landscape: LandscapeTable, ks: Iterable[int]
) -> list[tuple[int, int]]:
    """How many of the target's top-k states (by probability, ties broken by
    canonical key order) appear in the found set."""
    n = len(landscape.keys)
    order = sorted(range(n), key=lambda i: (-landscape.target_prob[i], landscape.keys[i]))
    out = []
    for k in ks:
        if k > n:
            raise ValueError(f"k={k} exceeds terminal count {n}")
        top = {landscape.keys[i] for i in order[:k]}
        out.append((k, len(found & top)))
    return out


def top20_stats(
    evaluated: Sequence[tuple[StateKey, float]], top_n: int = 20
) -> tuple[float, float, bool]:
    """Median loss and mean pairwise Hamming distance over the `top_n`
    distinct lowest-loss keys; flags a sample-deficient input."""
    if not evaluated:
        raise ValueError("empty input")
    by_key: dict[StateKey, float] = {}
    for key, loss in evaluated:
        if key not in by_key or loss < by_key[key]:
            by_key[key] = loss
    ranked = sorted(by_key.items(), key=lambda kv: (kv[1], kv[0]))[:top_n]
    deficient = len(ranked) < top_n
    losses = [loss for _, loss in ranked]
    keys = [key for key, _ in ranked]
    if len(keys) < 2:
        mean_ham = 0.0
    else:
        dists = [
            hamming(keys[i], keys[j])
            for i in range(len(keys))
            for j in range(i + 1, len(keys))
        ]
        mean_ham = float(np.mean(dists))
    return float(median(losses)), mean_ham, deficient


REPORT_COLUMNS = (
    "method",
    "best_loss",
    "median_top20",
    "mean_hamming_top20",
    "wall_clock",
)


def compare_methods(reports: Sequence[RetrievalReport]) -> list[dict]:
    """Per-method mean +/- sample std across seeds, in fixed column order."""
    methods: dict[str, list[RetrievalReport]] = {}
    for r in reports:
        methods.setdefault(r.method, []).append(r)

    def agg(values):
        values = np.asarray(values, dtype=float)
        std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        return float(values.mean()), std

    rows = []
    for method in sorted(methods):
        group = methods[method]
        row = {"method": method}
        for col, attr in [
            ("best_loss", "best_loss"),
            ("median_top20", "median_top20_loss"),
            ("mean_hamming_top20", "mean_hamming_top20"),
            ("wall_clock", "wall_clock"),
        ]:
            mean, std = agg([getattr(r, attr) for r in group])
            row[col] = mean
            row[col + "_std"] = std
        rows.append(row)
    return rows


def export_comparison_csv(path, rows: list[dict], config_hash: str = "") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"# config_hash={config_hash}"])
        header = []
        for col in REPORT_COLUMNS:
            header.append(col)
            if col != "method":
                header.append(col + "_std")
        writer.writerow(header)
        for row in rows:
            out = []
            for col in REPORT_COLUMNS:
                if col == "method":
                    out.append(row[col])
                else:
                    out.append(repr(row[col]))
                    out.append(repr(row[col + "_std"]))
            writer.writerow(out)


def export_report_json(path, reports: Sequence[RetrievalReport], manifest: dict) -> None:
    doc = dict(manifest)
    doc["reports"] = [
        {
            "method": r.method,
            "seed": r.seed,
            "best_loss": r.best_loss,
            "median_top20_loss": r.median_top20_loss,
            "mean_hamming_top20": r.mean_hamming_top20,
            "sample_deficient": r.sample_deficient,
            "wall_clock": r.wall_clock,
            "best_so_far": r.best_so_far,
            "topk_recovery": r.topk_recovery,
        }
        for r in reports
    ]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
