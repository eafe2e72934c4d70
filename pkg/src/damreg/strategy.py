"""Grid search over the firm's offer distortions under three settlement regimes."""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np

from .clearing import ClearingResult, InfeasibleError, clear
from .grid import FirmOffer, RegulatorEstimate, Scenario, TechParams, UnitOffer, is_within_true_envelope
from .regulation import reference_run, settle_regulated, standard_profit

REGIMES = ("none", "standard", "proposed")
TIE_TOL = 1e-6


@dataclass(frozen=True)
class DistortionSpec:
    """Price scale ``alpha``, price shift ``beta``, capacity withholding ``withhold``, ramp scale."""
    alpha: float = 1.0
    beta: float = 0.0
    withhold: float = 0.0
    ramp_scale: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0 (got {self.alpha})")
        if not 0.0 <= self.withhold <= 1.0:
            raise ValueError(f"withhold must lie in [0, 1] (got {self.withhold})")
        if not 0.0 < self.ramp_scale <= 1.0:
            raise ValueError(f"ramp_scale must lie in (0, 1] (got {self.ramp_scale})")

    @property
    def truthful(self) -> bool:
        return self == DistortionSpec()


@dataclass(frozen=True)
class GridSpec:
    alpha: tuple = tuple(float(a) for a in np.round(np.linspace(0.25, 3.25, 13), 10))
    beta: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0)
    withhold: tuple = (0.0, 0.125, 0.25, 0.375, 0.5)
    ramp_scale: tuple = (0.5, 0.75, 1.0)

    def points(self) -> list:
        return [DistortionSpec(a, b, w, r) for a, b, w, r in
                itertools.product(self.alpha, self.beta, self.withhold, self.ramp_scale)]

    def check(self):
        ident = DistortionSpec()
        for name in ("alpha", "beta", "withhold", "ramp_scale"):
            if getattr(ident, name) not in getattr(self, name):
                raise ValueError(f"grid axis {name!r} must contain the truthful value {getattr(ident, name)}")


def apply_distortion(truth: FirmOffer, spec: DistortionSpec) -> dict:
    """Distort every unit of the firm's true offer by ``spec``."""
    out = {}
    for uid, o in truth.items():
        p = o.params
        claimed = TechParams(p.p_min, p.p_max * (1.0 - spec.withhold),
                             p.ramp_up * spec.ramp_scale, p.ramp_down * spec.ramp_scale, p.p_initial)
        if claimed.p_max < claimed.p_min:
            raise ValueError(f"{uid}: withholding {spec.withhold} puts p_max {claimed.p_max} below p_min {claimed.p_min}")
        assert is_within_true_envelope(claimed, p)
        out[uid] = UnitOffer(claimed, o.curve.map_prices(spec.alpha, spec.beta))
    return out


def dispatch_fingerprint(result: ClearingResult) -> str:
    v = np.round(result.dispatch.vector(), 6) + 0.0
    return hashlib.sha1(v.tobytes()).hexdigest()[:16]


def deadweight_loss(s: Scenario, submitted: FirmOffer, truthful_run: ClearingResult | None = None) -> float:
    """True welfare of the truthful outcome minus that of the outcome under ``submitted``."""
    truthful_run = truthful_run or clear(s, s.truthful_offer())
    return truthful_run.U_true - clear(s, submitted).U_true


@dataclass(frozen=True)
class SweepPoint:
    spec: DistortionSpec
    feasible: bool
    profit_unregulated: float = float("nan")
    profit_standard: float = float("nan")
    profit_proposed: float = float("nan")
    deadweight_loss: float = float("nan")
    fingerprint: str = ""
    note: str = ""

    def profit(self, regime: str) -> float:
        return {"none": self.profit_unregulated, "standard": self.profit_standard,
                "proposed": self.profit_proposed}[regime]


@dataclass(frozen=True)
class SweepResult:
    points: tuple
    truthful_index: int
    ties: dict = field(default_factory=dict)     # regime -> indices within TIE_TOL of the max
    argmax: dict = field(default_factory=dict)   # regime -> representative index

    def best(self, regime: str) -> SweepPoint:
        return self.points[self.argmax[regime]]


def _argmax(points, regime, truthful_index):
    vals = np.array([p.profit(regime) if p.feasible else -np.inf for p in points])
    top = vals.max()
    ties = tuple(int(i) for i in np.flatnonzero(vals >= top - TIE_TOL))
    rep = truthful_index if truthful_index in ties else ties[0]
    return ties, rep


def best_response_sweep(s: Scenario, estimate: RegulatorEstimate, grid: GridSpec | None = None) -> SweepResult:
    """Evaluate every grid point under all three regimes with one fixed estimate.

    The reference run (and hence the constant ``c``) is computed once, so no
    grid point can influence it.
    """
    grid = grid or GridSpec()
    grid.check()
    truth = s.truthful_offer()
    truthful_run = clear(s, truth)
    ref = reference_run(s, estimate)
    pi_st = standard_profit(ref)

    points = []
    for spec in grid.points():
        try:
            offer = apply_distortion(truth, spec)
            base = clear(s, offer)
        except (ValueError, InfeasibleError) as e:
            points.append(SweepPoint(spec, False, note=str(e)))
            continue
        true_cost = base.firm_true_cost
        points.append(SweepPoint(
            spec, True,
            profit_unregulated=base.firm_lmp_revenue() - true_cost,
            profit_standard=pi_st,
            profit_proposed=settle_regulated(s, base, ref).firm_profit,
            deadweight_loss=truthful_run.U_true - base.U_true,
            fingerprint=dispatch_fingerprint(base),
        ))
    truthful_index = next(i for i, p in enumerate(points) if p.spec.truthful)
    ties, argmax = {}, {}
    for regime in REGIMES:
        ties[regime], argmax[regime] = _argmax(points, regime, truthful_index)
    return SweepResult(tuple(points), truthful_index, ties, argmax)
