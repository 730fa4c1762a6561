from __future__ import annotations

import numpy as np
import pytest

from sqltailor.allocation import (
    AllocationObjective,
    ContextAllocation,
    OutOfBoundsError,
    P_MIN,
    ReparamPoint,
    bayes_optimize,
    expected_improvement,
    latin_hypercube,
    reparam_to_tokens,
)


def random_point(rng) -> ReparamPoint:
    return ReparamPoint(
        p=float(rng.uniform(P_MIN, 1.0)),
        p_tbl=float(rng.uniform(0.0, 1.0)),
        p_col=float(rng.uniform(0.0, 1.0)),
    )


class TestReparam:
    def test_all_to_tables(self):
        alloc = reparam_to_tokens(ReparamPoint(1.0, 1.0, 0.0), 1000)
        assert (alloc.t_tbl, alloc.t_col, alloc.t_hint) == (1000, 0, 0)

    def test_direct_substitution(self):
        alloc = reparam_to_tokens(ReparamPoint(0.8, 0.5, 0.5), 1000)
        assert (alloc.t_tbl, alloc.t_col, alloc.t_hint) == (400, 200, 200)

    def test_p_zero_out_of_bounds(self):
        with pytest.raises(OutOfBoundsError):
            ReparamPoint(0.0, 0.5, 0.5)

    def test_p_above_one_out_of_bounds(self):
        with pytest.raises(OutOfBoundsError):
            ReparamPoint(1.2, 0.5, 0.5)

    def test_fraction_bounds(self):
        with pytest.raises(OutOfBoundsError):
            ReparamPoint(0.5, -0.1, 0.5)
        with pytest.raises(OutOfBoundsError):
            ReparamPoint(0.5, 0.5, 1.1)

    def test_constraint_never_violated(self):
        rng = np.random.default_rng(0)
        for T in (100, 1000, 8000):
            for _ in range(2000):
                alloc = reparam_to_tokens(random_point(rng), T)
                assert alloc.total() <= T
                assert min(alloc.t_tbl, alloc.t_col, alloc.t_hint) >= 0

    def test_surjectivity_within_one_token(self):
        # Any positive allocation with sum <= T is reachable within 1 token/class.
        rng = np.random.default_rng(1)
        T = 5000
        for _ in range(500):
            raw = rng.uniform(1, T // 3, size=3)
            target = np.floor(raw).astype(int)
            total = int(target.sum())
            p = total / T
            p_tbl = target[0] / total
            rest = total - target[0]
            p_col = target[1] / rest if rest else 0.0
            alloc = reparam_to_tokens(ReparamPoint(p, p_tbl, p_col), T)
            got = np.array([alloc.t_tbl, alloc.t_col, alloc.t_hint])
            assert np.max(np.abs(got - target)) <= 1

    def test_down_scaling_cap(self):
        alloc = reparam_to_tokens(ReparamPoint(1.0, 0.5, 0.5), 4000, max_total=1000)
        assert alloc.total() <= 1000
        # Proportions survive the down-scale.
        assert abs(alloc.t_tbl - 500) <= 1
        assert abs(alloc.t_col - 250) <= 1

    def test_allocation_validation(self):
        with pytest.raises(ValueError):
            ContextAllocation(t_tbl=600, t_col=300, t_hint=200, T=1000)
        with pytest.raises(ValueError):
            ContextAllocation(t_tbl=-1, t_col=0, t_hint=0, T=10)


def quadratic_objective():
    target = np.array([0.8, 0.5, 0.5])

    def fn(alloc: ContextAllocation) -> float:
        total = alloc.total()
        if total == 0:
            return 0.0
        p = total / alloc.T
        p_tbl = alloc.t_tbl / total
        rest = total - alloc.t_tbl
        p_col = alloc.t_col / rest if rest else 0.0
        x = np.array([p, p_tbl, p_col])
        return 1.0 - float(((x - target) ** 2).sum())

    return AllocationObjective(fn=fn, kind="custom"), target


class TestBayesOptimize:
    def test_finds_known_optimum(self):
        objective, target = quadratic_objective()
        result = bayes_optimize(objective, T=100_000, budget=30, seed=0)
        assert np.linalg.norm(result.point.as_array() - target) <= 0.05

    def test_constant_objective_still_feasible(self):
        objective = AllocationObjective(fn=lambda alloc: 0.5, kind="custom")
        result = bayes_optimize(objective, T=500, budget=8, seed=3)
        assert result.allocation.total() <= 500
        assert result.score == 0.5

    def test_budget_accounting_exact(self):
        calls = []
        objective = AllocationObjective(
            fn=lambda alloc: calls.append(1) or 0.0, kind="custom"
        )
        result = bayes_optimize(objective, T=100, budget=5, seed=0)
        assert len(calls) == 5
        assert result.evaluations() == 5

    def test_minimum_budget_enforced(self):
        with pytest.raises(ValueError):
            bayes_optimize(AllocationObjective(fn=lambda a: 0.0), T=100, budget=4)

    def test_seeded_determinism(self):
        objective, _target = quadratic_objective()
        a = bayes_optimize(objective, T=1000, budget=12, seed=42)
        b = bayes_optimize(objective, T=1000, budget=12, seed=42)
        assert a.trace == b.trace
        assert a.point == b.point

    def test_objective_failure_scores_zero(self):
        def flaky(alloc: ContextAllocation) -> float:
            if alloc.t_tbl % 2 == 0:
                raise RuntimeError("boom")
            return 0.7

        result = bayes_optimize(AllocationObjective(fn=flaky), T=997, budget=8, seed=1)
        scores = {t["score"] for t in result.trace}
        assert scores <= {0.0, 0.7}

    def test_monotone_best_so_far(self):
        objective, _target = quadratic_objective()
        result = bayes_optimize(objective, T=10_000, budget=20, seed=7)
        best = -np.inf
        for entry in result.trace:
            best = max(best, entry["score"])
            assert best >= entry["score"]
        assert result.score == best


class TestGpPieces:
    def test_latin_hypercube_stratified(self):
        rng = np.random.default_rng(0)
        bounds = np.array([[0.0, 1.0], [10.0, 20.0]])
        pts = latin_hypercube(10, bounds, rng)
        assert pts.shape == (10, 2)
        assert np.all(pts[:, 0] >= 0) and np.all(pts[:, 0] <= 1)
        assert np.all(pts[:, 1] >= 10) and np.all(pts[:, 1] <= 20)
        # One sample per stratum along each dimension.
        strata = np.floor((np.sort(pts[:, 0])) * 10).astype(int)
        assert len(set(strata.tolist())) == 10

    def test_expected_improvement_zero_std(self):
        ei = expected_improvement(np.array([1.0, 0.2]), np.array([0.0, 0.0]), best=0.5)
        assert ei[0] == pytest.approx(0.5)
        assert ei[1] == 0.0

    def test_expected_improvement_positive_with_uncertainty(self):
        ei = expected_improvement(np.array([0.0]), np.array([1.0]), best=0.5)
        assert ei[0] > 0.0
