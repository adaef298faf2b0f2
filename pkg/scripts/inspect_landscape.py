#!/usr/bin/env python3
"""Summarize a completed enumeration: top states, basin structure, grid shape.

    python3 scripts/inspect_landscape.py runs/<run-hash>/enumerate/landscape.csv [--top 15]
"""

import argparse
import csv
from collections import Counter


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("landscape_csv")
    parser.add_argument("--top", type=int, default=15)
    args = parser.parse_args()

    with open(args.landscape_csv) as fh:
        config_line = fh.readline().strip()
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["loss"] = float(row["loss"])
        row["target_prob"] = float(row["target_prob"])

    print(config_line)
    print(f"{len(rows)} terminal states")
    print(f"\ntop {args.top} states by target probability:")
    print(f"{'key':>12}  {'loss':>10}  {'prob':>10}  {'mode':>12}")
    ranked = sorted(rows, key=lambda r: (-r["target_prob"], r["key"]))
    for row in ranked[: args.top]:
        print(
            f"{row['key']:>12}  {row['loss']:>10.4f}  "
            f"{row['target_prob']:>10.2e}  {row['mode_key']:>12}"
        )

    modes = Counter(row["mode_key"] for row in rows)
    mass = Counter()
    for row in rows:
        mass[row["mode_key"]] += row["target_prob"]
    print(f"\n{len(modes)} basins; largest by probability mass:")
    for mode, m in mass.most_common(10):
        print(f"  mode {mode:>12}: {modes[mode]:>5} states, mass {m:.3f}")


if __name__ == "__main__":
    main()
