"""Toy GRW measurement-step rules.

Both rules take the incoming state, the wing being probed, the setting on
that wing and a coin flip. The coin is supplied to every measuring step;
``coin_used`` on the returned step says whether it influenced anything. A
wing that does not measure may be passed ``None`` since no coin is flipped.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import DegenerateState
from .hilbert import (
    MIN_NORM_SQ,
    Direction,
    Projector,
    StateVector,
    Wing,
    apply_projector,
    normalize,
    squared_norm,
)

# relative tolerance separating "tie" from "dominant" projected weights
TIE_RTOL = 1e-9


class CoinFlip(enum.Enum):
    HEADS = "H"
    TAILS = "T"


class Setting(enum.Enum):
    MEASURE = "measure"
    NO_MEASURE = "none"


class Outcome(enum.Enum):
    UP = "up"
    DOWN = "down"
    NONE = "none"

    @property
    def direction(self) -> Direction:
        if self is Outcome.NONE:
            raise ValueError("no direction for a non-measurement")
        return Direction.UP if self is Outcome.UP else Direction.DOWN


class Formulation(enum.Enum):
    NONLINEAR = "nonlinear"
    LINEAR_COOKING = "cooking"


@dataclass(frozen=True)
class MeasurementStep:
    outcome: Outcome
    post_state: StateVector
    coin_used: bool


def _coin_outcome(coin: CoinFlip | None) -> Outcome:
    if coin is None:
        raise ValueError("a measurement needs a coin flip")
    return Outcome.UP if coin is CoinFlip.HEADS else Outcome.DOWN


def nonlinear_step(psi_in: StateVector, wing: Wing, setting: Setting,
                   coin: CoinFlip | None) -> MeasurementStep:
    """State-dependent collapse; the coin only breaks ties."""
    if setting is Setting.NO_MEASURE:
        return MeasurementStep(Outcome.NONE, psi_in, coin_used=False)
    if squared_norm(psi_in) <= MIN_NORM_SQ:
        raise DegenerateState("non-linear step needs a state with nonzero norm")

    up = apply_projector(Projector(wing, Direction.UP), psi_in)
    down = apply_projector(Projector(wing, Direction.DOWN), psi_in)
    a, b = squared_norm(up), squared_norm(down)
    if abs(a - b) <= TIE_RTOL * (a + b):
        outcome = _coin_outcome(coin)
        used = True
    else:
        outcome = Outcome.UP if a > b else Outcome.DOWN
        used = False
    projected = up if outcome is Outcome.UP else down
    return MeasurementStep(outcome, normalize(projected), coin_used=used)


def cooking_step(psi_in: StateVector, wing: Wing, setting: Setting,
                 coin: CoinFlip | None) -> MeasurementStep:
    """Linear collapse: the coin picks the outcome, the state is projected
    but left unnormalized (possibly to the zero vector)."""
    if setting is Setting.NO_MEASURE:
        return MeasurementStep(Outcome.NONE, psi_in, coin_used=False)
    outcome = _coin_outcome(coin)
    post = apply_projector(Projector(wing, outcome.direction), psi_in)
    return MeasurementStep(outcome, post, coin_used=True)


def cooked_weight(raw_prob: float, psi_final: StateVector) -> float:
    """Unnormalized cooked weight of one completed history."""
    if not 0.0 <= raw_prob <= 1.0:
        raise ValueError(f"raw probability out of range: {raw_prob}")
    return raw_prob * squared_norm(psi_final)


STEP_RULES = {
    Formulation.NONLINEAR: nonlinear_step,
    Formulation.LINEAR_COOKING: cooking_step,
}
