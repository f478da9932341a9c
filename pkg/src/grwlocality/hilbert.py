"""Two spin-1/2 particles along one fixed axis.

Basis ordering is ``|uL uR>, |uL dR>, |dL uR>, |dL dR>``, i.e. the flat
index is ``2 * left + right`` with up = 0 and down = 1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ZeroVector

NORM_TOL = 1e-12
MIN_NORM_SQ = 1e-24


class Wing(enum.Enum):
    LEFT = "L"
    RIGHT = "R"


class Direction(enum.Enum):
    UP = 0
    DOWN = 1


BASIS_LABELS = ("uL,uR", "uL,dR", "dL,uR", "dL,dR")


def _basis_index(left: Direction, right: Direction) -> int:
    return 2 * left.value + right.value


class StateVector:
    """Immutable complex amplitude vector on the 4-dim two-spin space.

    May be unnormalized or zero; ``normalized`` reports whether the squared
    norm is within ``NORM_TOL`` of one.
    """

    __slots__ = ("_amps",)

    def __init__(self, amplitudes: Iterable[complex]):
        if not isinstance(amplitudes, np.ndarray):
            amplitudes = list(amplitudes)
        amps = np.array(amplitudes, dtype=complex)
        if amps.shape != (4,):
            raise ValueError(f"expected 4 amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        amps.setflags(write=False)
        self._amps = amps

    @classmethod
    def basis(cls, left: Direction, right: Direction) -> "StateVector":
        amps = np.zeros(4, dtype=complex)
        amps[_basis_index(left, right)] = 1.0
        return cls(amps)

    @classmethod
    def zero(cls) -> "StateVector":
        return cls(np.zeros(4, dtype=complex))

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amps

    @property
    def normalized(self) -> bool:
        return abs(squared_norm(self) - 1.0) <= NORM_TOL

    def is_zero(self, atol: float = NORM_TOL) -> bool:
        return squared_norm(self) <= atol

    def __add__(self, other: "StateVector") -> "StateVector":
        return StateVector(self._amps + other._amps)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return StateVector(self._amps - other._amps)

    def __rmul__(self, scalar: complex) -> "StateVector":
        return StateVector(complex(scalar) * self._amps)

    def __neg__(self) -> "StateVector":
        return StateVector(-self._amps)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StateVector):
            return NotImplemented
        return bool(np.array_equal(self._amps, other._amps))

    def __hash__(self) -> int:
        return hash(self._amps.tobytes())

    def allclose(self, other: "StateVector", atol: float = NORM_TOL) -> bool:
        return bool(np.allclose(self._amps, other._amps, rtol=0.0, atol=atol))

    def equal_up_to_phase(self, other: "StateVector", atol: float = NORM_TOL) -> bool:
        """Compare two states ignoring a global phase factor."""
        a, b = self._amps, other._amps
        if squared_norm(self) <= atol or squared_norm(other) <= atol:
            return self.allclose(other, atol)
        k = int(np.argmax(np.abs(b)))
        if abs(a[k]) <= atol:
            return False
        phase = a[k] / b[k]
        if abs(abs(phase) - 1.0) > math.sqrt(atol):
            return False
        return bool(np.allclose(a, phase * b, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        terms = [f"({c.real:+.6g}{c.imag:+.6g}j)|{lab}>"
                 for c, lab in zip(self._amps, BASIS_LABELS) if c != 0]
        return "StateVector(" + (" + ".join(terms) if terms else "0") + ")"


@dataclass(frozen=True)
class Projector:
    """Spin projector acting on one wing's particle."""

    wing: Wing
    direction: Direction

    @property
    def mask(self) -> np.ndarray:
        idx = np.arange(4)
        bits = idx // 2 if self.wing is Wing.LEFT else idx % 2
        return bits == self.direction.value

    def __call__(self, psi: StateVector) -> StateVector:
        return apply_projector(self, psi)


P_UP_L = Projector(Wing.LEFT, Direction.UP)
P_DOWN_L = Projector(Wing.LEFT, Direction.DOWN)
P_UP_R = Projector(Wing.RIGHT, Direction.UP)
P_DOWN_R = Projector(Wing.RIGHT, Direction.DOWN)


def singlet() -> StateVector:
    """(|uL dR> - |dL uR>) / sqrt(2)."""
    s = 1.0 / math.sqrt(2.0)
    return StateVector([0.0, s, -s, 0.0])


def apply_projector(p: Projector, psi: StateVector) -> StateVector:
    """Zero the amplitudes inconsistent with ``p``; no renormalization."""
    return StateVector(np.where(p.mask, psi.amplitudes, 0.0))


def squared_norm(psi: StateVector) -> float:
    amps = psi.amplitudes
    return float(np.sum(amps.real ** 2 + amps.imag ** 2))


def normalize(psi: StateVector) -> StateVector:
    """Scale ``psi`` to unit norm, keeping its overall phase."""
    n2 = squared_norm(psi)
    if n2 <= MIN_NORM_SQ:
        raise ZeroVector(f"cannot normalize a state with squared norm {n2:g}")
    return StateVector(psi.amplitudes / math.sqrt(n2))
