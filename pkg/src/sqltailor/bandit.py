"""ε-greedy routing between the specialized and generic pipelines.

Rewards are binary user feedback kept in per-pipeline sliding windows; an arm
with no feedback yet averages 0.5 (neutral cold start), exact ties break
uniformly at random, and all feedback is dropped whenever the offline store is
rebuilt.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

ARM_SPECIALIZED = "specialized"
ARM_GENERIC = "generic"
ARMS = (ARM_SPECIALIZED, ARM_GENERIC)

EMPTY_ARM_AVERAGE = 0.5


@dataclass
class BanditState:
    epsilon: float = 0.1
    window: int = 100
    seed: int = 0
    rng: random.Random = field(init=False)
    buffers: dict[str, deque] = field(init=False)

    def __post_init__(self):
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValueError("epsilon must be in [0, 1]")
        if self.window < 1:
            raise ValueError("window must be positive")
        self.rng = random.Random(self.seed)
        self.buffers = {arm: deque(maxlen=self.window) for arm in ARMS}

    def average(self, arm: str) -> float:
        buf = self.buffers[arm]
        if not buf:
            return EMPTY_ARM_AVERAGE
        return sum(buf) / len(buf)

    def record(self, arm: str, reward: int) -> None:
        if reward not in (0, 1):
            raise ValueError("reward must be 0 or 1")
        self.buffers[arm].append(reward)

    def reset(self) -> None:
        for arm in ARMS:
            self.buffers[arm].clear()

    def stats(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "window": self.window,
            "arms": {
                arm: {"count": len(self.buffers[arm]), "avg": self.average(arm)}
                for arm in ARMS
            },
        }


def select_pipeline(state: BanditState) -> str:
    """Explore with probability ε, otherwise take the higher windowed average."""
    if state.rng.random() < state.epsilon:
        return state.rng.choice(ARMS)
    averages = {arm: state.average(arm) for arm in ARMS}
    best = max(averages.values())
    leaders = [arm for arm in ARMS if averages[arm] == best]
    if len(leaders) == 1:
        return leaders[0]
    return state.rng.choice(leaders)
