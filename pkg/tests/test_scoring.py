import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np

from okmeans.knn import knn_table
from okmeans.scoring import (
    ScoreRule,
    ScoreVector,
    constant_k_rank,
    export_scores_csv,
    midrange_ranks,
    score_constant_k,
    score_interval_sum,
    score_midrange_sum,
    score_vanilla,
    select_outliers,
    vanilla_rank,
)
from okmeans.types import ContractViolation, Dataset

LINE = Dataset(points=np.array([[0.0], [1.0], [3.0], [7.0]]))


class TestRanks(unittest.TestCase):
    def test_vanilla_rank(self) -> None:
        self.assertEqual(vanilla_rank(1, 3), 2)
        self.assertEqual(vanilla_rank(2, 3), 4)
        self.assertEqual(vanilla_rank(3, 2), 4)

    def test_midrange_ranks_guard_floor(self) -> None:
        self.assertEqual(midrange_ranks(1, 3), (2, 3))
        self.assertEqual(midrange_ranks(10, 1.1), (11, 11))

    def test_constant_k_rank(self) -> None:
        self.assertEqual(constant_k_rank(2), 3)


class TestScores(unittest.TestCase):
    def setUp(self) -> None:
        self.table = knn_table(LINE, 3)

    def test_vanilla_line(self) -> None:
        s = score_vanilla(self.table, 1, 3)
        self.assertIs(s.rule, ScoreRule.VANILLA_RADIUS)
        np.testing.assert_allclose(s.scores, [1, 1, 2, 4])
        self.assertEqual(s.params["rank"], 2)

    def test_midrange_line(self) -> None:
        s = score_midrange_sum(self.table, 1, 3)
        np.testing.assert_allclose(s.scores, [4, 3, 5, 10])
        self.assertEqual((s.params["rank_lo"], s.params["rank_hi"]), (2, 3))

    def test_midrange_single_term(self) -> None:
        s = score_midrange_sum(self.table, 1, 2)
        np.testing.assert_array_equal(s.scores, self.table.column(2))

    def test_constant_k_line(self) -> None:
        np.testing.assert_allclose(score_constant_k(self.table, 2).scores, [3, 2, 3, 6])
        np.testing.assert_allclose(score_constant_k(self.table, 1).scores, [1, 1, 2, 4])

    def test_constant_k_saturated_is_farthest_point(self) -> None:
        rng = np.random.default_rng(4)
        X = rng.standard_normal((12, 2))
        data = Dataset(points=X)
        s = score_constant_k(knn_table(data, 12), 11)
        diff = X[:, None, :] - X[None, :, :]
        farthest = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).max(axis=1)
        np.testing.assert_allclose(s.scores, farthest, rtol=1e-12)

    def test_duplicated_pair(self) -> None:
        data = Dataset(points=np.array([[2.0, 2.0], [2.0, 2.0], [5.0, 6.0]]))
        s = score_constant_k(knn_table(data, 2), 1)
        self.assertEqual(s.scores[:2].tolist(), [0.0, 0.0])

    def test_identical_points_score_zero(self) -> None:
        table = knn_table(Dataset(points=np.ones((6, 2))), 4)
        self.assertEqual(score_vanilla(table, 1, 3).scores.tolist(), [0.0] * 6)
        self.assertEqual(score_midrange_sum(table, 1, 3).scores.tolist(), [0.0] * 6)

    def test_interval_sum(self) -> None:
        s = score_interval_sum(self.table, 1, 3)
        self.assertIs(s.rule, ScoreRule.INTERVAL_SUM)
        np.testing.assert_allclose(s.scores, [4, 3, 5, 10])

    def test_table_too_narrow(self) -> None:
        narrow = knn_table(LINE, 2)
        with self.assertRaises(ContractViolation):
            score_midrange_sum(narrow, 1, 3)
        with self.assertRaises(ContractViolation):
            score_constant_k(narrow, 2)

    def test_bad_parameters(self) -> None:
        with self.assertRaises(ContractViolation):
            score_vanilla(self.table, 1, 1.0)
        with self.assertRaises(ContractViolation):
            score_vanilla(self.table, 0, 3)
        with self.assertRaises(ContractViolation):
            score_midrange_sum(self.table, 1, 1.5)
        with self.assertRaises(ContractViolation):
            score_interval_sum(self.table, 3, 2)

    def test_isometry_invariance(self) -> None:
        rng = np.random.default_rng(8)
        X = rng.standard_normal((80, 3)) * 3.0
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        Y = X @ Q.T + np.array([50.0, -20.0, 7.0])
        ta = knn_table(Dataset(points=X), 10)
        tb = knn_table(Dataset(points=Y), 10)
        for score in (
            lambda t: score_vanilla(t, 3, 3),
            lambda t: score_midrange_sum(t, 3, 3),
            lambda t: score_constant_k(t, 4),
        ):
            np.testing.assert_allclose(score(ta).scores, score(tb).scores, rtol=1e-7, atol=1e-9)


class TestSelection(unittest.TestCase):
    def _vec(self, *xs: float) -> ScoreVector:
        return ScoreVector(scores=np.array(xs, dtype=float), rule=ScoreRule.MIDRANGE_SUM)

    def test_largest_score(self) -> None:
        self.assertEqual(select_outliers(self._vec(4, 3, 5, 10), 1).tolist(), [3])

    def test_zero_budget(self) -> None:
        self.assertEqual(select_outliers(self._vec(4, 3, 5, 10), 0).tolist(), [])

    def test_ties_go_to_lower_index(self) -> None:
        self.assertEqual(select_outliers(self._vec(1, 1, 1, 1), 2).tolist(), [0, 1])

    def test_budget_too_large(self) -> None:
        with self.assertRaises(ContractViolation):
            select_outliers(self._vec(1, 2), 3)

    def test_export(self) -> None:
        s = self._vec(4, 3, 5, 10)
        with TemporaryDirectory() as d:
            p = export_scores_csv(s, select_outliers(s, 1), Path(d) / "scores.csv")
            lines = p.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "index,score,selected")
        self.assertEqual(lines[1], "0,4.0,0")
        self.assertEqual(lines[4], "3,10.0,1")


class TestScaling(unittest.TestCase):
    def setUp(self) -> None:
        rng = np.random.default_rng(17)
        self.X = np.vstack([rng.standard_normal((60, 2)), rng.uniform(-30.0, 30.0, size=(5, 2))])
        self.rules = (
            lambda t: score_vanilla(t, 5, 3),
            lambda t: score_midrange_sum(t, 5, 3),
            lambda t: score_constant_k(t, 4),
        )

    def test_scores_scale_with_data(self) -> None:
        base = knn_table(Dataset(points=self.X), 15)
        for s in (0.001, 2.5, 1e4):
            scaled = knn_table(Dataset(points=self.X * s), 15)
            for score in self.rules:
                np.testing.assert_allclose(score(scaled).scores, s * score(base).scores, rtol=1e-9, atol=0.0)

    def test_selection_ignores_scale_and_shift(self) -> None:
        base = knn_table(Dataset(points=self.X), 15)
        for s, shift in ((0.01, 0.0), (7.0, 0.0), (1.0, 250.0), (3.0, -40.0)):
            moved = knn_table(Dataset(points=self.X * s + shift), 15)
            for score in self.rules:
                self.assertEqual(
                    select_outliers(score(moved), 5).tolist(), select_outliers(score(base), 5).tolist()
                )
