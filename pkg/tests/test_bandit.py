from __future__ import annotations

import random

import pytest

from sqltailor.bandit import (
    ARM_GENERIC,
    ARM_SPECIALIZED,
    BanditState,
    EMPTY_ARM_AVERAGE,
    select_pipeline,
)


def preload(state: BanditState, arm: str, rewards):
    for r in rewards:
        state.record(arm, r)


class TestBanditState:
    def test_empty_buffer_average_is_half(self):
        state = BanditState()
        assert state.average(ARM_SPECIALIZED) == EMPTY_ARM_AVERAGE

    def test_fifo_eviction_at_capacity(self):
        state = BanditState(window=3)
        preload(state, ARM_SPECIALIZED, [1, 0, 1])
        state.record(ARM_SPECIALIZED, 0)
        assert list(state.buffers[ARM_SPECIALIZED]) == [0, 1, 0]

    def test_average_uses_window_only(self):
        state = BanditState(window=2)
        preload(state, ARM_GENERIC, [1, 1, 0, 0])
        assert state.average(ARM_GENERIC) == 0.0

    def test_reset_clears_both_arms(self):
        state = BanditState()
        preload(state, ARM_SPECIALIZED, [1])
        preload(state, ARM_GENERIC, [0])
        state.reset()
        assert state.average(ARM_SPECIALIZED) == EMPTY_ARM_AVERAGE
        assert len(state.buffers[ARM_GENERIC]) == 0

    def test_reward_validation(self):
        state = BanditState()
        with pytest.raises(ValueError):
            state.record(ARM_SPECIALIZED, 2)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            BanditState(epsilon=1.5)
        with pytest.raises(ValueError):
            BanditState(window=0)

    def test_stats_shape(self):
        state = BanditState(epsilon=0.2, window=10)
        preload(state, ARM_SPECIALIZED, [1, 0])
        stats = state.stats()
        assert stats["epsilon"] == 0.2
        assert stats["window"] == 10
        assert stats["arms"][ARM_SPECIALIZED] == {"count": 2, "avg": 0.5}


class TestSelectPipeline:
    def test_selection_probability(self):
        # With averages 0.8 vs 0.5 and epsilon 0.1, P(better) = 1 - eps + eps/2.
        state = BanditState(epsilon=0.1, window=100, seed=123)
        preload(state, ARM_SPECIALIZED, [1, 1, 1, 1, 0])
        preload(state, ARM_GENERIC, [1, 0])
        n = 100_000
        hits = sum(select_pipeline(state) == ARM_SPECIALIZED for _ in range(n))
        assert 0.945 <= hits / n <= 0.955

    def test_cold_start_uniform(self):
        state = BanditState(epsilon=0.1, seed=99)
        n = 50_000
        hits = sum(select_pipeline(state) == ARM_SPECIALIZED for _ in range(n))
        assert 0.48 <= hits / n <= 0.52

    def test_drift_switches_arms(self):
        # Seeded simulation: arm payoffs swap halfway; the bandit follows.
        state = BanditState(epsilon=0.1, window=100, seed=5)
        reward_rng = random.Random(6)
        pay = {ARM_SPECIALIZED: 0.7, ARM_GENERIC: 0.4}
        first_half, second_half = [], []
        for step in range(1000):
            if step == 500:
                pay = {ARM_SPECIALIZED: 0.4, ARM_GENERIC: 0.7}
            arm = select_pipeline(state)
            state.record(arm, 1 if reward_rng.random() < pay[arm] else 0)
            (first_half if step < 500 else second_half).append(arm)
        assert first_half[300:].count(ARM_SPECIALIZED) / 200 > 0.8
        assert second_half[300:].count(ARM_GENERIC) / 200 > 0.8

    def test_selection_does_not_mutate_buffers(self):
        state = BanditState(seed=1)
        preload(state, ARM_SPECIALIZED, [1])
        before = list(state.buffers[ARM_SPECIALIZED])
        for _ in range(100):
            select_pipeline(state)
        assert list(state.buffers[ARM_SPECIALIZED]) == before
