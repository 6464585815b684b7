import unittest

import numpy as np

from okmeans.datasets import generate_planted
from okmeans.kmeans import SolverConfig, solve_kmeans
from okmeans.oracle import (
    OracleSizeError,
    SweepFamily,
    brute_force_robust,
    enumeration_bound,
    exact_kmeans,
    exact_kmeans_solver,
    kcenter_reduction_ratio,
    ratio_sweep,
)
from okmeans.robust import run_okmeans, run_okmeans2
from okmeans.theory import KCENTER_RATIO, solve_phi, solve_psi
from okmeans.types import Dataset, Objective, RobustInstance


def _line(*xs: float) -> Dataset:
    return Dataset(points=np.array(xs, dtype=float).reshape(-1, 1))


class TestBruteForce(unittest.TestCase):
    def test_two_pairs_and_a_far_point(self) -> None:
        inst = RobustInstance(data=_line(0, 0.1, 10, 10.1, 100), k=2, z=1)
        opt = brute_force_robust(inst)
        self.assertAlmostEqual(opt.opt_cost, 0.01, places=9)
        self.assertEqual(opt.opt_outliers.tolist(), [4])
        self.assertEqual(opt.opt_partition.tolist(), [0, 0, 1, 1])
        self.assertEqual(opt.cluster_sizes().tolist(), [2, 2])
        np.testing.assert_allclose(np.sort(opt.opt_centers.centers.ravel()), [0.05, 10.05])

    def test_saturated_budget_costs_nothing(self) -> None:
        inst = RobustInstance(data=_line(0, 4, 9, 20, 33), k=2, z=3)
        for objective in Objective:
            self.assertEqual(brute_force_robust(inst, objective).opt_cost, 0.0)

    def test_restricted_centers(self) -> None:
        inst = RobustInstance(data=_line(0, 1, 2, 9), k=1, z=1)
        med = brute_force_robust(inst, Objective.KMEDIAN)
        self.assertEqual(med.opt_cost, 2.0)
        self.assertEqual(med.opt_outliers.tolist(), [3])
        self.assertEqual(med.opt_centers.centers.ravel().tolist(), [1.0])
        self.assertEqual(brute_force_robust(inst, Objective.KCENTER).opt_cost, 1.0)

    def test_lower_bounds_heuristics(self) -> None:
        rng = np.random.default_rng(21)
        for _ in range(10):
            inst = RobustInstance(data=Dataset(points=rng.standard_normal((9, 2)) * 3), k=2, z=2)
            opt = brute_force_robust(inst).opt_cost
            for run in (run_okmeans, run_okmeans2):
                self.assertLessEqual(opt, run(inst, 3, SolverConfig(k=2)).robust_cost * (1 + 1e-9))

    def test_workers_agree(self) -> None:
        inst = generate_planted(2, 4, 1, 6.0, 1.0, 2, seed=2)
        a = brute_force_robust(inst)
        b = brute_force_robust(inst, workers=3)
        self.assertEqual(a.opt_cost, b.opt_cost)
        np.testing.assert_array_equal(a.opt_outliers, b.opt_outliers)

    def test_size_guard(self) -> None:
        self.assertEqual(enumeration_bound(5, 1, 2), 80)
        inst = RobustInstance(data=Dataset(points=np.arange(40.0)), k=3, z=5)
        with self.assertRaises(OracleSizeError) as ctx:
            brute_force_robust(inst)
        self.assertIn(str(enumeration_bound(40, 5, 3)), str(ctx.exception))

    def test_to_dict(self) -> None:
        opt = brute_force_robust(RobustInstance(data=_line(0, 1, 50), k=1, z=1))
        d = opt.to_dict()
        self.assertEqual(d["opt_outliers"], [2])
        self.assertEqual(d["objective"], "kmeans")
        self.assertEqual(d["metadata"]["centers"], "centroids")


class TestExactKMeans(unittest.TestCase):
    def test_two_pairs(self) -> None:
        opt = exact_kmeans(_line(0, 1, 9, 10), 2)
        self.assertEqual(opt.opt_cost, 1.0)
        centers = exact_kmeans_solver(_line(0, 1, 9, 10), SolverConfig(k=2))
        self.assertEqual(sorted(centers.centers.ravel().tolist()), [0.5, 9.5])

    def test_lloyd_matches_oracle_on_separated_blobs(self) -> None:
        rng = np.random.default_rng(2024)
        for _ in range(50):
            k = int(rng.integers(1, 4))
            n = int(rng.integers(max(2 * k, 4), 11))
            sizes = np.full(k, 2)
            for extra in rng.integers(0, k, size=n - 2 * k):
                sizes[extra] += 1
            centers = rng.uniform(-1.0, 1.0, size=(k, 2)) * 1000.0 + np.arange(k)[:, None] * 3000.0
            X = np.vstack([c + rng.standard_normal((s, 2)) for c, s in zip(centers, sizes)])
            data = Dataset(points=X)
            opt = exact_kmeans(data, k).opt_cost
            got = solve_kmeans(data, None, SolverConfig(k=k, restarts=5, seed=int(rng.integers(1000)))).cost
            self.assertLessEqual(abs(got - opt), 1e-6 * max(opt, 1e-12))


class TestRatioSweep(unittest.TestCase):
    def test_bounds_hold_with_exact_subsolver(self) -> None:
        result = ratio_sweep(SweepFamily(), 200, 3.0, seed=0)
        self.assertEqual(result.trials, 200)
        self.assertEqual(len(result.ratios_okmeans), 200)
        self.assertLessEqual(result.max_ratio_okmeans, solve_phi(3.0)[0] + 1e-9)
        self.assertLessEqual(result.max_ratio_okmeans2, solve_psi(3.0)[0] + 1e-9)
        self.assertGreaterEqual(min(result.ratios_okmeans), 1.0 - 1e-9)
        self.assertGreaterEqual(min(result.ratios_okmeans2), 1.0 - 1e-9)

    def test_separable_family_is_exact(self) -> None:
        family = SweepFamily(separation=(50.0, 60.0), outlier_distance=(500.0, 800.0))
        result = ratio_sweep(family, 20, 3.0, seed=1)
        self.assertAlmostEqual(result.max_ratio_okmeans, 1.0, delta=1e-9)
        self.assertAlmostEqual(result.max_ratio_okmeans2, 1.0, delta=1e-9)
        self.assertEqual(result.resamples, 0)

    def test_kcenter_reduction(self) -> None:
        inst = generate_planted(2, 3, 1, 20.0, 1.0, 2, seed=5)
        removed = run_okmeans(inst, 3, SolverConfig(k=2)).removed
        self.assertLessEqual(kcenter_reduction_ratio(inst, removed), KCENTER_RATIO)


class TestOracleInvariants(unittest.TestCase):
    def test_permutation_invariant(self) -> None:
        rng = np.random.default_rng(31)
        X = rng.standard_normal((9, 2)) * 2.0
        X[-1] = [15.0, -12.0]
        perm = rng.permutation(9)
        a = brute_force_robust(RobustInstance(data=Dataset(points=X), k=2, z=1))
        b = brute_force_robust(RobustInstance(data=Dataset(points=X[perm]), k=2, z=1))
        self.assertAlmostEqual(a.opt_cost, b.opt_cost, delta=1e-12 * max(1.0, a.opt_cost))
        np.testing.assert_array_equal(X[a.opt_outliers], X[perm][b.opt_outliers])

    def test_one_cluster_no_outliers_is_total_variance(self) -> None:
        rng = np.random.default_rng(32)
        for n, d in ((2, 1), (7, 3), (12, 2)):
            X = rng.standard_normal((n, d)) * 5.0 + 3.0
            opt = brute_force_robust(RobustInstance(data=Dataset(points=X), k=1, z=0))
            self.assertAlmostEqual(opt.opt_cost, n * float(X.var(axis=0).sum()), delta=1e-9)
            self.assertEqual(opt.opt_outliers.tolist(), [])
