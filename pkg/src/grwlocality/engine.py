"""EPR-Bell scenario runner: exact branch enumeration and seeded sampling.

The left wing always measures. The right wing either measures along the
same axis or does nothing, in which case no right coin is ever flipped and
branches are keyed by the left coin alone.
"""
from __future__ import annotations

import enum
import itertools
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .dynamics import (
    STEP_RULES,
    CoinFlip,
    Formulation,
    Outcome,
    Setting,
    cooked_weight,
)
from .errors import AllBranchesDead
from .hilbert import MIN_NORM_SQ, StateVector, Wing, singlet

PROB_TOL = 1e-12
SAMPLE_CHUNK = 8192

OutcomePair = tuple[Outcome, Outcome]


class FrameOrder(enum.Enum):
    RIGHT_FIRST = "right-first"
    LEFT_FIRST = "left-first"

    @property
    def wings(self) -> tuple[Wing, Wing]:
        if self is FrameOrder.RIGHT_FIRST:
            return (Wing.RIGHT, Wing.LEFT)
        return (Wing.LEFT, Wing.RIGHT)


@dataclass(frozen=True)
class Scenario:
    right_setting: Setting
    frame_order: FrameOrder = FrameOrder.RIGHT_FIRST
    formulation: Formulation = Formulation.NONLINEAR

    def setting(self, wing: Wing) -> Setting:
        return Setting.MEASURE if wing is Wing.LEFT else self.right_setting

    @property
    def coin_wings(self) -> tuple[Wing, ...]:
        """Wings whose device interacts and therefore flips a coin."""
        if self.right_setting is Setting.MEASURE:
            return (Wing.LEFT, Wing.RIGHT)
        return (Wing.LEFT,)


@dataclass(frozen=True)
class BranchRecord:
    coins: Mapping[Wing, CoinFlip]
    outcomes: Mapping[Wing, Outcome]
    final_state: StateVector
    raw_prob: float
    cooked_prob: float

    @property
    def coin_key(self) -> tuple[tuple[Wing, CoinFlip], ...]:
        return tuple((w, self.coins[w]) for w in (Wing.LEFT, Wing.RIGHT) if w in self.coins)

    @property
    def outcome_pair(self) -> OutcomePair:
        return (self.outcomes[Wing.LEFT], self.outcomes[Wing.RIGHT])


@dataclass(frozen=True)
class JointDistribution:
    """Probabilities over (left outcome, right outcome) pairs."""

    probs: Mapping[OutcomePair, float] = field(default_factory=dict)

    def __post_init__(self):
        if any(p < -PROB_TOL for p in self.probs.values()):
            raise ValueError(f"negative probability in {self.probs}")
        total = sum(self.probs.values())
        if self.probs and abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @classmethod
    def from_weights(cls, weights: Iterable[tuple[OutcomePair, float]]) -> "JointDistribution":
        acc: dict[OutcomePair, float] = {}
        for pair, w in weights:
            acc[pair] = acc.get(pair, 0.0) + w
        total = sum(acc.values())
        return cls({k: v / total for k, v in acc.items()})

    def __getitem__(self, pair: OutcomePair) -> float:
        return self.probs.get(pair, 0.0)

    def keys(self) -> list[OutcomePair]:
        return sorted(self.probs, key=_pair_sort_key)

    def left_marginal(self) -> dict[Outcome, float]:
        out: dict[Outcome, float] = {}
        for (ol, _), p in self.probs.items():
            out[ol] = out.get(ol, 0.0) + p
        return out

    def right_marginal(self) -> dict[Outcome, float]:
        out: dict[Outcome, float] = {}
        for (_, orr), p in self.probs.items():
            out[orr] = out.get(orr, 0.0) + p
        return out

    def is_point_mass(self, atol: float = PROB_TOL) -> bool:
        return any(abs(p - 1.0) <= atol for p in self.probs.values())

    def max_abs_diff(self, other: "JointDistribution") -> float:
        keys = set(self.probs) | set(other.probs)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)


_OUTCOME_ORDER = {Outcome.UP: 0, Outcome.DOWN: 1, Outcome.NONE: 2}


def _pair_sort_key(pair: OutcomePair) -> tuple[int, int]:
    return (_OUTCOME_ORDER[pair[0]], _OUTCOME_ORDER[pair[1]])


def enumerate_branches(s: Scenario) -> list[BranchRecord]:
    """Every coin assignment of ``s`` with its raw and cooked probability.

    Cooked probabilities are normalized over the returned branches. For the
    non-linear formulation no reweighting happens and cooked equals raw.
    """
    step = STEP_RULES[s.formulation]
    coin_wings = s.coin_wings
    raw = 0.5 ** len(coin_wings)

    histories = []
    for flips in itertools.product(CoinFlip, repeat=len(coin_wings)):
        coins = dict(zip(coin_wings, flips))
        psi = singlet()
        outcomes: dict[Wing, Outcome] = {}
        for wing in s.frame_order.wings:
            result = step(psi, wing, s.setting(wing), coins.get(wing))
            outcomes[wing] = result.outcome
            psi = result.post_state
        if s.formulation is Formulation.LINEAR_COOKING:
            weight = cooked_weight(raw, psi)
        else:
            weight = raw
        histories.append((coins, outcomes, psi, weight))

    total = sum(h[3] for h in histories)
    if total <= MIN_NORM_SQ:
        raise AllBranchesDead(f"no branch of {s} carries any weight")
    return [
        BranchRecord(coins=coins, outcomes=outcomes, final_state=psi,
                     raw_prob=raw, cooked_prob=weight / total)
        for coins, outcomes, psi, weight in histories
    ]


def joint_distribution(records: Iterable[BranchRecord]) -> JointDistribution:
    """Marginalize cooked probabilities over the coins."""
    return JointDistribution.from_weights((r.outcome_pair, r.cooked_prob) for r in records)


def _sample_chunk(branches: list[BranchRecord], probs: np.ndarray, seed: int,
                  chunk: int, n: int, formulation: Formulation) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, chunk]))
    if formulation is Formulation.NONLINEAR:
        # fair coins drawn per wing; branches are ordered like the coin product
        n_coins = len(branches[0].coins)
        bits = rng.integers(0, 2, size=(n, n_coins))
        idx = bits @ (1 << np.arange(n_coins - 1, -1, -1))
    else:
        # cooking is a post-hoc reweighting, so draw completed histories
        idx = rng.choice(len(branches), size=n, p=probs)
    return np.bincount(idx, minlength=len(branches))


def sample_counts(s: Scenario, seed: int, trials: int, workers: int = 1) -> Counter:
    """Seeded Monte Carlo run of ``s``; returns counts per outcome pair.

    Trials are cut into fixed-size chunks, each with its own stream derived
    from ``(seed, chunk index)``, so counts do not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    branches = enumerate_branches(s)
    probs = np.array([b.cooked_prob for b in branches])
    probs = probs / probs.sum()
    sizes = [min(SAMPLE_CHUNK, trials - start) for start in range(0, trials, SAMPLE_CHUNK)]

    def run(i: int) -> np.ndarray:
        return _sample_chunk(branches, probs, seed, i, sizes[i], s.formulation)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_chunk = list(pool.map(run, range(len(sizes))))
    else:
        per_chunk = [run(i) for i in range(len(sizes))]
    per_branch = np.sum(per_chunk, axis=0)

    counts: Counter = Counter({b.outcome_pair: 0 for b in branches})
    for b, c in zip(branches, per_branch):
        counts[b.outcome_pair] += int(c)
    return counts


def sample(s: Scenario, seed: int, trials: int, workers: int = 1) -> JointDistribution:
    """Empirical joint distribution from :func:`sample_counts`."""
    counts = sample_counts(s, seed, trials, workers)
    return JointDistribution({k: c / trials for k, c in counts.items()})
