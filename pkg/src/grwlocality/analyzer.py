"""Parameter/Outcome Independence analysis under a choice of beables.

A view groups the enumerated branches of each right setting by the value
``lam`` of whatever is granted beable status (the initial state, plus
possibly some coin flips) and records ``P(lam | setting)`` and the
conditional joint outcome distribution ``P_lam(O_L, O_R | setting)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .dynamics import CoinFlip, Formulation, Outcome, Setting
from .engine import (
    BranchRecord,
    FrameOrder,
    JointDistribution,
    Scenario,
    enumerate_branches,
)
from .errors import EmptyCommonSupport, Unclassifiable
from .hilbert import Wing

DEV_TOL = 1e-12
LEFT_OUTCOMES = (Outcome.UP, Outcome.DOWN)
SETTINGS = (Setting.MEASURE, Setting.NO_MEASURE)


@dataclass(frozen=True)
class LambdaValue:
    """Complete beable specification for one branch group."""

    coins: tuple[tuple[Wing, CoinFlip], ...] = ()
    state_label: str = "psi0"

    @property
    def wings(self) -> frozenset[Wing]:
        return frozenset(w for w, _ in self.coins)

    def coin(self, wing: Wing) -> CoinFlip | None:
        return dict(self.coins).get(wing)

    def restrict(self, wings: Iterable[Wing]) -> "LambdaValue":
        keep = set(wings)
        return LambdaValue(tuple((w, c) for w, c in self.coins if w in keep), self.state_label)

    def compatible(self, other: "LambdaValue") -> bool:
        """True when both agree on every coin they both carry."""
        mine = dict(self.coins)
        return self.state_label == other.state_label and all(
            mine[w] == c for w, c in other.coins if w in mine)

    def sort_key(self) -> tuple:
        return (self.state_label, tuple((w.value, c.value) for w, c in self.coins))

    def label(self) -> str:
        parts = ["psi0" if self.state_label == "psi0" else self.state_label]
        parts += [f"{c.value}_{w.value}" for w, c in self.coins]
        return "(" + ",".join(parts) + ")"

    def __str__(self) -> str:
        return self.label()


class BeableAssignment(enum.Enum):
    STATE_ONLY = "state"
    STATE_PLUS_LEFT_COIN = "left-coin"
    STATE_PLUS_ALL_COINS = "all-coins"

    @property
    def coin_wings(self) -> tuple[Wing, ...]:
        return {
            BeableAssignment.STATE_ONLY: (),
            BeableAssignment.STATE_PLUS_LEFT_COIN: (Wing.LEFT,),
            BeableAssignment.STATE_PLUS_ALL_COINS: (Wing.LEFT, Wing.RIGHT),
        }[self]

    def extract(self, record: BranchRecord) -> LambdaValue:
        """Only coins the dynamics actually flipped can enter lambda."""
        return LambdaValue(tuple((w, c) for w, c in record.coin_key if w in self.coin_wings))


@dataclass(frozen=True)
class SettingView:
    lambda_dist: Mapping[LambdaValue, float]
    kernels: Mapping[LambdaValue, JointDistribution]
    raw_lambda_dist: Mapping[LambdaValue, float] = field(default_factory=dict)

    def support(self) -> list[LambdaValue]:
        return sorted(self.lambda_dist, key=LambdaValue.sort_key)

    def left_prob(self, lam: LambdaValue, outcome: Outcome) -> float:
        return self.kernels[lam].left_marginal().get(outcome, 0.0)

    def mixture(self) -> JointDistribution:
        """Average the kernels over lambda."""
        return JointDistribution.from_weights(
            (pair, self.lambda_dist[lam] * p)
            for lam in self.support()
            for pair, p in self.kernels[lam].probs.items())


@dataclass(frozen=True)
class TheoryView:
    settings: Mapping[Setting, SettingView]
    formulation: Formulation | None = None
    beables: BeableAssignment | None = None

    def __getitem__(self, setting: Setting) -> SettingView:
        return self.settings[setting]

    def is_deterministic(self, atol: float = DEV_TOL) -> bool:
        return all(k.is_point_mass(atol) for sv in self.settings.values() for k in sv.kernels.values())


def group_branches(records: Iterable[BranchRecord], beables: BeableAssignment,
                   atol: float = DEV_TOL) -> SettingView:
    weights: dict[LambdaValue, float] = {}
    raw: dict[LambdaValue, float] = {}
    members: dict[LambdaValue, list[BranchRecord]] = {}
    for r in records:
        lam = beables.extract(r)
        weights[lam] = weights.get(lam, 0.0) + r.cooked_prob
        raw[lam] = raw.get(lam, 0.0) + r.raw_prob
        members.setdefault(lam, []).append(r)

    # conditionals on zero-probability lambda are undefined; drop them
    support = {lam: w for lam, w in weights.items() if w > atol}
    kernels = {
        lam: JointDistribution.from_weights(
            (r.outcome_pair, r.cooked_prob) for r in members[lam] if r.cooked_prob > 0.0)
        for lam in support
    }
    return SettingView(support, kernels, raw)


def build_view(formulation: Formulation, beables: BeableAssignment,
               frame: FrameOrder = FrameOrder.RIGHT_FIRST) -> TheoryView:
    settings = {}
    for setting in SETTINGS:
        records = enumerate_branches(Scenario(setting, frame, formulation))
        settings[setting] = group_branches(records, beables)
    return TheoryView(settings, formulation, beables)


@dataclass(frozen=True)
class Witness:
    """Worst-case event behind a deviation; ``values`` are the two compared
    probabilities."""

    lambdas: tuple[LambdaValue, ...]
    settings: tuple[Setting, ...]
    outcomes: tuple[tuple[str, str], ...]
    values: tuple[float, float]
    quantity: str = ""

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "lambdas": [lam.label() for lam in self.lambdas],
            "settings": [s.value for s in self.settings],
            "outcomes": [list(o) for o in self.outcomes],
            "values": list(self.values),
        }


@dataclass(frozen=True)
class Deviation:
    value: float
    witness: Witness | None = None

    @property
    def violated(self) -> bool:
        return self.value > DEV_TOL


class _Max:
    """Running maximum that keeps the first witness reaching it."""

    def __init__(self):
        self.value = 0.0
        self.witness: Witness | None = None

    def offer(self, value: float, make_witness) -> None:
        if value > self.value + 1e-15 or (self.witness is None and value > DEV_TOL):
            self.value = value
            self.witness = make_witness()

    def result(self) -> Deviation:
        return Deviation(self.value if self.value > DEV_TOL else 0.0,
                         self.witness if self.value > DEV_TOL else None)


def _common_pairs(view: TheoryView) -> list[tuple[LambdaValue, LambdaValue]]:
    measured, idle = view[Setting.MEASURE], view[Setting.NO_MEASURE]
    return [(la, ls) for la in measured.support() for ls in idle.support() if la.compatible(ls)]


def _marginal_setting_dependence(view: TheoryView, best: _Max) -> None:
    pairs = _common_pairs(view)
    if not pairs:
        raise EmptyCommonSupport("no lambda value occurs under both right settings")
    measured, idle = view[Setting.MEASURE], view[Setting.NO_MEASURE]
    for la, ls in pairs:
        for ol in LEFT_OUTCOMES:
            pa, ps = measured.left_prob(la, ol), idle.left_prob(ls, ol)
            best.offer(abs(pa - ps), lambda: Witness(
                (la, ls), SETTINGS, ((ol.value, "*"),), (pa, ps), "P_lam(O_L|s_R)"))


def check_pi(view: TheoryView) -> Deviation:
    """Largest change of a left marginal between the two right settings.

    Lambda values are matched across settings when they agree on every coin
    defined under both; a right coin exists only when the right wing measures.
    """
    best = _Max()
    _marginal_setting_dependence(view, best)
    return best.result()


def _outcome_dependence(view: TheoryView, best: _Max) -> None:
    for setting, sv in view.settings.items():
        for lam in sv.support():
            kernel = sv.kernels[lam]
            left, right = kernel.left_marginal(), kernel.right_marginal()
            for orr, pr in sorted(right.items(), key=lambda kv: kv[0].value):
                if pr <= DEV_TOL:
                    continue
                for ol in LEFT_OUTCOMES:
                    cond, marg = kernel[(ol, orr)] / pr, left.get(ol, 0.0)
                    best.offer(abs(cond - marg), lambda: Witness(
                        (lam,), (setting,), ((ol.value, orr.value),), (cond, marg),
                        "P_lam(O_L|s_R,O_R) vs P_lam(O_L|s_R)"))


def check_oi(view: TheoryView) -> Deviation:
    """Largest change of a left conditional on learning the right outcome."""
    best = _Max()
    _outcome_dependence(view, best)
    return best.result()


def check_factorizability(view: TheoryView) -> Deviation:
    """Bell factorization: joint = product of marginals for each lambda and
    setting, with left marginals that ignore the right setting."""
    best = _Max()
    for setting, sv in view.settings.items():
        for lam in sv.support():
            kernel = sv.kernels[lam]
            left, right = kernel.left_marginal(), kernel.right_marginal()
            for ol in LEFT_OUTCOMES:
                for orr in sorted(right, key=lambda o: o.value):
                    joint, prod = kernel[(ol, orr)], left.get(ol, 0.0) * right[orr]
                    best.offer(abs(joint - prod), lambda: Witness(
                        (lam,), (setting,), ((ol.value, orr.value),), (joint, prod),
                        "P_lam(O_L,O_R|s) vs P_lam(O_L|s)P_lam(O_R|s)"))
    _marginal_setting_dependence(view, best)
    return best.result()


def _tv(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def _marginalize(dist: Mapping[LambdaValue, float], wings: Iterable[Wing]) -> dict[LambdaValue, float]:
    out: dict[LambdaValue, float] = {}
    for lam, p in dist.items():
        key = lam.restrict(wings)
        out[key] = out.get(key, 0.0) + p
    return out


@dataclass(frozen=True)
class NoConspiracy:
    """How far the lambda distribution fails to be independent of the setting.

    ``common_tv`` compares the two settings' lambda distributions on the coins
    defined under both. ``reweighting`` is, per setting, the distance between
    the realized lambda distribution and the one fair independent coins would
    give; a setting-dependent reweighting means lambda is shaped by what the
    right experimenter chose. ``support_restricted`` is set when some common
    lambda cannot be extended by every value of the extra coins.
    """

    deviation: float
    common_tv: float
    reweighting: Mapping[Setting, float]
    support_restricted: bool

    @property
    def flagged(self) -> bool:
        return self.deviation > DEV_TOL or self.support_restricted


def _lambda_wings(sv: SettingView) -> frozenset[Wing]:
    return next(iter(sv.lambda_dist)).wings if sv.lambda_dist else frozenset()


def check_no_conspiracy(view: TheoryView) -> NoConspiracy:
    measured, idle = view[Setting.MEASURE], view[Setting.NO_MEASURE]
    common = _lambda_wings(measured) & _lambda_wings(idle)
    common_tv = _tv(_marginalize(measured.lambda_dist, common),
                    _marginalize(idle.lambda_dist, common))

    reweighting = {}
    for setting, sv in view.settings.items():
        raw_total = sum(sv.raw_lambda_dist.values()) or 1.0
        raw = {lam: p / raw_total for lam, p in sv.raw_lambda_dist.items()}
        reweighting[setting] = _tv(sv.lambda_dist, raw)
    spread = max(reweighting.values()) - min(reweighting.values())

    extra = _lambda_wings(measured) - common
    n_extensions = 2 ** len(extra)
    restricted = any(
        sum(1 for la in measured.support() if la.compatible(ls)) < n_extensions
        for ls in idle.support()) if extra else False

    deviation = max(common_tv, spread)
    return NoConspiracy(deviation if deviation > DEV_TOL else 0.0, common_tv, reweighting, restricted)


class Classification(enum.Enum):
    STOCHASTIC_NONLOCAL = "StochasticNonlocal"
    DETERMINISTIC_NONLOCAL = "DeterministicNonlocal"
    LOCAL_CONSPIRACY = "LocalConspiracy"


def classify(pi: float, oi: float, fact: float, deterministic: bool,
             conspiracy: bool = False, tol: float = DEV_TOL) -> Classification:
    pi_bad, oi_bad, fact_bad = pi > tol, oi > tol, fact > tol
    if fact_bad != (pi_bad or oi_bad):
        raise Unclassifiable(f"factorizability {fact} disagrees with PI {pi} / OI {oi}")
    if oi_bad and not pi_bad:
        return Classification.STOCHASTIC_NONLOCAL
    if pi_bad and not oi_bad and deterministic:
        return Classification.DETERMINISTIC_NONLOCAL
    if not pi_bad and not oi_bad and conspiracy:
        return Classification.LOCAL_CONSPIRACY
    raise Unclassifiable(
        f"PI={pi:g}, OI={oi:g}, deterministic={deterministic}, conspiracy={conspiracy}")


def _verdict(pi: Deviation, oi: Deviation) -> str:
    parts = [("violates " if d.violated else "respects ") + name for name, d in (("PI", pi), ("OI", oi))]
    return ", ".join(parts)


@dataclass(frozen=True)
class AnalysisReport:
    formulation: Formulation | None
    beables: BeableAssignment | None
    pi: Deviation
    oi: Deviation
    factorizability: Deviation
    no_conspiracy: NoConspiracy
    deterministic: bool
    classification: Classification | None
    verdict: str
    note: str = ""

    @property
    def pi_deviation(self) -> float:
        return self.pi.value

    @property
    def oi_deviation(self) -> float:
        return self.oi.value

    @property
    def factorizability_deviation(self) -> float:
        return self.factorizability.value

    @property
    def no_conspiracy_deviation(self) -> float:
        return self.no_conspiracy.deviation


def analyze_view(view: TheoryView) -> AnalysisReport:
    pi, oi, fact = check_pi(view), check_oi(view), check_factorizability(view)
    nc = check_no_conspiracy(view)
    det = view.is_deterministic()
    try:
        cls, note = classify(pi.value, oi.value, fact.value, det, nc.flagged), ""
    except Unclassifiable as exc:
        cls, note = None, f"unclassifiable: {exc}"
    return AnalysisReport(view.formulation, view.beables, pi, oi, fact, nc, det, cls,
                          _verdict(pi, oi), note)


def analyze(formulation: Formulation, beables: BeableAssignment,
            frame: FrameOrder = FrameOrder.RIGHT_FIRST) -> AnalysisReport:
    return analyze_view(build_view(formulation, beables, frame))


def analysis_matrix(frame: FrameOrder = FrameOrder.RIGHT_FIRST) -> dict[tuple[Formulation, BeableAssignment], AnalysisReport]:
    return {(f, b): analyze(f, b, frame) for b in BeableAssignment for f in Formulation}
