"""Regulated settlement for a firm with market power.

The regulator clears the market twice: once with the firm's submitted offer
(the binding outcome) and once with its own estimate of the firm's true offer
(the reference). The firm is then paid

    R + U_other(base) - U_other(reference)

where ``R`` is the reference-run LMP revenue of the reference-run firm
schedule. Because the last two terms do not depend on how the base run was
reached except through ``U_other(base)``, the firm's profit equals total true
welfare minus a constant, so truthful offers maximize it. The gap between that
payment and the firm's LMP revenue in the base run is an uplift (or downlift)
recovered from loads as a lump sum.
"""
from __future__ import annotations

from dataclasses import dataclass

from .clearing import ClearingResult, InfeasibleError, clear
from .grid import FirmOffer, RegulatorEstimate, Scenario, is_within_true_envelope

PRO_RATA = "pro_rata_consumption"


class EnvelopeError(ValueError):
    """A submitted claim is not deliverable under the firm's true parameters."""


@dataclass(frozen=True, eq=False)
class RegulationOutcome:
    base_run: ClearingResult
    reference_run: ClearingResult
    R: float
    c: float
    regulated_revenue: float
    lmp_revenue_at_base: float
    uplift: float
    allocations: dict
    applied: bool = True

    @property
    def firm_revenue(self) -> float:
        """What the firm is actually paid: the regulated amount if regulation applies."""
        return self.regulated_revenue if self.applied else self.lmp_revenue_at_base

    @property
    def firm_profit(self) -> float:
        return self.firm_revenue - self.base_run.firm_true_cost


@dataclass(frozen=True)
class ProfitReport:
    pi: float
    pi_standard: float
    delta_U: float
    identity_residual: float


def check_submitted(s: Scenario, submitted: FirmOffer):
    for uid in s.firm_unit_ids:
        if uid not in submitted:
            raise EnvelopeError(f"offer is missing firm unit {uid!r}")
        if not is_within_true_envelope(submitted[uid].params, s.unit(uid).params):
            raise EnvelopeError(f"claimed parameters of {uid!r} are not deliverable under its true parameters")


def reference_run(s: Scenario, estimate: RegulatorEstimate) -> ClearingResult:
    """Clearing with the firm's offer replaced by the regulator's estimate."""
    return clear(s, estimate, run="reference")


def allocate_uplift(uplift: float, base_run: ClearingResult, rule: str = PRO_RATA) -> dict:
    """Split ``uplift`` across loads in proportion to their cleared MWh (lump sums)."""
    if rule != PRO_RATA:
        raise ValueError(f"unknown allocation rule {rule!r}")
    energy = {k: float(v.sum()) for k, v in base_run.dispatch.consumption.items()}
    total = sum(energy.values())
    if total <= 0.0:
        raise ValueError("cannot allocate uplift: no cleared consumption")
    return {k: uplift * e / total for k, e in energy.items()}


def settle_regulated(s: Scenario, base: ClearingResult, ref: ClearingResult,
                     apply: bool = True) -> RegulationOutcome:
    R = ref.firm_lmp_revenue()
    c = R - ref.U_other
    regulated = R + base.U_other - ref.U_other
    lmp_rev = base.firm_lmp_revenue()
    uplift = regulated - lmp_rev if apply else 0.0
    return RegulationOutcome(base, ref, R, c, regulated, lmp_rev, uplift,
                             allocate_uplift(uplift, base), apply)


def run_regulation(s: Scenario, submitted: FirmOffer, estimate: RegulatorEstimate,
                   apply: bool = True) -> RegulationOutcome:
    """Base clearing, reference clearing and the regulated payment.

    ``apply=False`` models the regulator deciding not to regulate that day: the
    firm keeps its LMP revenue and no uplift arises.
    """
    check_submitted(s, submitted)
    base = clear(s, submitted, run="base")
    ref = reference_run(s, estimate)
    return settle_regulated(s, base, ref, apply)


def regulated_profit(s: Scenario, submitted: FirmOffer, estimate: RegulatorEstimate) -> float:
    out = run_regulation(s, submitted, estimate)
    return out.regulated_revenue - out.base_run.firm_true_cost


def standard_profit(ref: ClearingResult) -> float:
    return ref.firm_lmp_revenue() - ref.firm_true_cost


def standard_method(s: Scenario, estimate: RegulatorEstimate) -> float:
    """Firm profit when its offer is simply replaced by the regulator's estimate."""
    return standard_profit(reference_run(s, estimate))


def compare_methods(s: Scenario, estimate: RegulatorEstimate) -> ProfitReport:
    """Profit under both methods for a truthful firm, and the welfare deviation."""
    out = run_regulation(s, s.truthful_offer(), estimate)
    base, ref = out.base_run, out.reference_run
    pi = out.regulated_revenue - base.firm_true_cost
    pi_st = standard_profit(ref)
    delta_U = ref.U_true - base.U_true
    return ProfitReport(pi, pi_st, delta_U, pi - (-delta_U + pi_st))


__all__ = [
    "EnvelopeError", "InfeasibleError", "ProfitReport", "RegulationOutcome", "allocate_uplift",
    "compare_methods", "reference_run", "regulated_profit", "run_regulation", "settle_regulated",
    "standard_method", "standard_profit",
]
