import csv
import json

import numpy as np
import pytest

from gfnadapt.landscape import LandscapeTable
from gfnadapt.metrics import (
    REPORT_COLUMNS,
    RetrievalReport,
    best_so_far,
    compare_methods,
    export_comparison_csv,
    export_report_json,
    top20_stats,
    topk_recovery,
)


def small_table():
    keys = [(0, 0), (0, 1), (1, 0), (1, 1)]
    rewards = np.array([4.0, 2.0, 1.0, 1.0])
    z = float(rewards.sum())
    return LandscapeTable(
        keys=keys,
        aggregates=-np.log(rewards),
        rewards=rewards,
        z=z,
        target_prob=rewards / z,
    )


def report(method, seed, best, med=0.2, ham=2.0, wall=1.0):
    return RetrievalReport(
        method=method,
        seed=seed,
        best_loss=best,
        median_top20_loss=med,
        mean_hamming_top20=ham,
        sample_deficient=False,
        wall_clock=wall,
    )


class TestBestSoFar:
    def test_hand_example(self):
        rows = best_so_far([0.5, 0.4, 0.6], l_star=0.3, beta=4.0)
        assert [n for n, _, _ in rows] == [1, 2, 3]
        assert [g for _, g, _ in rows] == pytest.approx([0.2, 0.1, 0.1], abs=1e-12)
        assert rows[0][2] == pytest.approx(np.exp(-2.0), rel=1e-12)
        assert rows[2][2] == pytest.approx(np.exp(-1.6), rel=1e-12)

    def test_gap_non_increasing(self):
        rows = best_so_far([0.9, 0.2, 0.5, 0.1, 0.4], 0.0, 4.0)
        gaps = [g for _, g, _ in rows]
        assert gaps == sorted(gaps, reverse=True)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            best_so_far([], 0.0, 4.0)


class TestTopkRecovery:
    def test_full_and_empty(self):
        table = small_table()
        all_keys = set(table.keys)
        assert topk_recovery(all_keys, table, [1, 2, 4]) == [(1, 1), (2, 2), (4, 4)]
        assert topk_recovery(set(), table, [1, 4]) == [(1, 0), (4, 0)]

    def test_partial(self):
        table = small_table()
        # top-2 by probability are (0,0) then (0,1)
        assert topk_recovery({(0, 0), (1, 1)}, table, [1, 2]) == [(1, 1), (2, 1)]

    def test_tie_break_canonical(self):
        table = small_table()
        # (1,0) and (1,1) have equal probability; rank 3 goes to (1,0)
        assert topk_recovery({(1, 0)}, table, [3]) == [(3, 1)]
        assert topk_recovery({(1, 1)}, table, [3]) == [(3, 0)]

    def test_monotone_in_k(self):
        table = small_table()
        found = {(0, 1), (1, 0)}
        counts = [c for _, c in topk_recovery(found, table, [1, 2, 3, 4])]
        assert counts == sorted(counts)

    def test_k_exceeds_support(self):
        with pytest.raises(ValueError, match="exceeds"):
            topk_recovery(set(), small_table(), [5])


class TestTop20Stats:
    def test_duplicates_keep_minimum(self):
        evaluated = [((0, 0), 0.8), ((0, 0), 0.3), ((1, 1), 0.5)]
        med, ham, deficient = top20_stats(evaluated, top_n=2)
        assert med == pytest.approx(0.4)  # median of {0.3, 0.5}
        assert ham == 2.0
        assert not deficient

    def test_deficiency_flag(self):
        evaluated = [((0, 0), 0.1), ((0, 1), 0.2)]
        _, _, deficient = top20_stats(evaluated, top_n=20)
        assert deficient

    def test_single_key(self):
        med, ham, deficient = top20_stats([((1, 2), 0.7)], top_n=20)
        assert med == 0.7
        assert ham == 0.0
        assert deficient

    def test_selects_lowest_losses(self):
        evaluated = [((i, 0), float(i)) for i in range(30)]
        med, _, deficient = top20_stats(evaluated, top_n=20)
        assert med == pytest.approx(9.5)  # median of 0..19
        assert not deficient

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            top20_stats([])


class TestCompareMethods:
    def test_mean_and_sample_std(self):
        rows = compare_methods(
            [report("random", 1, 0.5), report("random", 2, 0.6)]
        )
        assert len(rows) == 1
        assert rows[0]["best_loss"] == pytest.approx(0.55)
        assert rows[0]["best_loss_std"] == pytest.approx(0.0707106781, abs=1e-9)

    def test_single_seed_std_zero(self):
        rows = compare_methods([report("tpe", 1, 0.4)])
        assert rows[0]["best_loss_std"] == 0.0

    def test_methods_sorted(self):
        rows = compare_methods(
            [report("tpe", 1, 0.4), report("gflownet", 1, 0.3), report("random", 1, 0.5)]
        )
        assert [r["method"] for r in rows] == ["gflownet", "random", "tpe"]

    def test_column_order_snapshot(self):
        assert REPORT_COLUMNS == (
            "method",
            "best_loss",
            "median_top20",
            "mean_hamming_top20",
            "wall_clock",
        )


class TestExports:
    def test_comparison_csv(self, tmp_path):
        rows = compare_methods(
            [report("random", 1, 0.5, wall=2.0), report("random", 2, 0.7, wall=4.0)]
        )
        path = tmp_path / "comparison.csv"
        export_comparison_csv(path, rows, config_hash="beef")
        with open(path) as fh:
            assert fh.readline().strip() == "# config_hash=beef"
            table = list(csv.DictReader(fh))
        assert table[0]["method"] == "random"
        assert float(table[0]["best_loss"]) == pytest.approx(0.6)
        assert float(table[0]["wall_clock"]) == pytest.approx(3.0)
        assert "best_loss_std" in table[0]

    def test_report_json(self, tmp_path):
        r = report("gflownet", 3, 0.25)
        r.best_so_far.append((1, 0.1, 0.9))
        r.topk_recovery.append((10, 7))
        path = tmp_path / "report.json"
        export_report_json(path, [r], {"config_hash": "abcd", "l_star": 0.15})
        doc = json.loads(path.read_text())
        assert doc["config_hash"] == "abcd"
        assert doc["l_star"] == 0.15
        assert doc["reports"][0]["method"] == "gflownet"
        assert doc["reports"][0]["seed"] == 3
        assert doc["reports"][0]["topk_recovery"] == [[10, 7]]
