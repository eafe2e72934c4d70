"""Executable checks of the mechanism's structural claims.

* :func:`envelope_check` integrates finite-difference nodal prices of the
  restricted objective along an axis-parallel path and compares the result
  with the objective's endpoint difference.
* :func:`projection_check` samples firm schedules allowed by tightened claims
  and confirms each is deliverable under the true parameters, and that the
  claims together cover the truly feasible schedules.
* :func:`money_conservation_check` balances loads' payments plus uplift
  against every generator's receipts plus congestion rent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .clearing import ClearingResult, InfeasibleError, Settlement, assemble_lp, clear, restricted_clear, settle
from .grid import (
    FirmOffer, Scenario, TechParams, UnitOffer, is_within_true_envelope, schedule_satisfies,
)
from .lp import is_feasible, verify_kkt
from .regulation import RegulationOutcome, compare_methods, run_regulation

FD_STEP = 0.01
CONSERVATION_TOL = 1e-6


def envelope_tolerance(length: float) -> float:
    """1e-3 money units per 100 MW of path."""
    return 1e-3 * length / 100.0


@dataclass(frozen=True)
class EnvelopeReport:
    path: tuple
    integral_estimate: float = float("nan")
    objective_delta: float = float("nan")
    residual: float = float("nan")
    length: float = 0.0
    evaluations: int = 0
    applicable: bool = True
    failing_point: dict | None = None
    reason: str = ""

    @property
    def tolerance(self) -> float:
        return max(envelope_tolerance(self.length), 1e-9)

    @property
    def passed(self) -> bool:
        return self.applicable and abs(self.residual) <= self.tolerance


class _NotApplicable(Exception):
    def __init__(self, point, reason):
        super().__init__(reason)
        self.point = point
        self.reason = reason


class _RestrictedObjective:
    """``x -> max_Y U_other`` with the firm pinned at ``x``; memoized."""

    def __init__(self, s: Scenario, offer: FirmOffer, coords):
        self.s, self.offer, self.coords = s, offer, coords
        self.cache = {}

    def schedule(self, x) -> dict:
        sched = {uid: np.zeros(self.s.hours) for uid in self.s.firm_unit_ids}
        for (uid, h), v in zip(self.coords, x):
            sched[uid][h] = v
        return sched

    def __call__(self, x) -> float:
        key = tuple(float(v) for v in x)
        if key not in self.cache:
            sched = self.schedule(x)
            try:
                r = restricted_clear(self.s, self.offer, sched, run="envelope")
            except (InfeasibleError, ValueError) as e:
                raise _NotApplicable({k: v.tolist() for k, v in sched.items()}, str(e)) from None
            self.cache[key] = r.U_other
        return self.cache[key]


def _schedule_coords(s: Scenario):
    return [(uid, h) for uid in s.firm_unit_ids for h in range(s.hours)]


def _flatten(s: Scenario, sched: Mapping) -> np.ndarray:
    return np.array([float(np.asarray(sched[uid])[h]) for uid, h in _schedule_coords(s)])


def _integrate_segment(F, base, k, a, b, steps, h, min_width=1e-6, rel_tol=1e-7):
    """Adaptive trapezoid of the central-difference derivative of F along axis k."""

    def g(t):
        lo, hi = base.copy(), base.copy()
        lo[k], hi[k] = t - h, t + h
        return (F(hi) - F(lo)) / (2 * h)

    def recurse(t0, t1, g0, g1, depth):
        tm = 0.5 * (t0 + t1)
        gm = g(tm)
        if abs(gm - 0.5 * (g0 + g1)) <= rel_tol * (1 + abs(g0) + abs(g1)) or (t1 - t0) <= min_width or depth > 60:
            return 0.25 * (t1 - t0) * (g0 + 2 * gm + g1)
        return recurse(t0, tm, g0, gm, depth + 1) + recurse(tm, t1, gm, g1, depth + 1)

    knots = np.linspace(a, b, max(int(steps), 1) + 1)
    vals = [g(t) for t in knots]
    return sum(recurse(knots[i], knots[i + 1], vals[i], vals[i + 1], 0) for i in range(len(knots) - 1))


def envelope_check(s: Scenario, x_start: Mapping, x_end: Mapping, steps: int = 20,
                   offer: FirmOffer | None = None, order: Sequence | None = None,
                   h: float = FD_STEP) -> EnvelopeReport:
    """Integrate finite-difference LMPs along an L-shaped path from ``x_start`` to ``x_end``.

    Args:
        s: scenario.
        x_start, x_end: firm schedules ``{unit_id: hourly MW}``.
        steps: initial trapezoid intervals per path segment (refined adaptively).
        offer: firm offer whose parameters bound the schedules (default truthful).
        order: coordinate order ``[(unit_id, hour), ...]`` in which the path moves.
        h: central-difference step in MW.

    Every evaluated point must be strictly interior (the restricted problem is
    feasible at ``x +/- h`` along each moved axis); otherwise the report is
    marked not applicable and names the failing point.
    """
    offer = offer or s.truthful_offer()
    coords = _schedule_coords(s)
    start, end = _flatten(s, x_start), _flatten(s, x_end)
    order = [coords.index(tuple(c)) for c in order] if order is not None else list(range(len(coords)))
    corners = [start.copy()]
    for k in order:
        if start[k] != end[k]:
            nxt = corners[-1].copy()
            nxt[k] = end[k]
            corners.append(nxt)
    F = _RestrictedObjective(s, offer, coords)
    path = tuple({uid: F.schedule(c)[uid].tolist() for uid in s.firm_unit_ids} for c in corners)
    length = float(np.abs(end - start).sum())
    try:
        total = 0.0
        for c0, c1 in zip(corners[:-1], corners[1:]):
            k = int(np.flatnonzero(c0 != c1)[0])
            total += _integrate_segment(F, c0, k, c0[k], c1[k], steps, h)
        delta = F(end) - F(start)
    except _NotApplicable as e:
        return EnvelopeReport(path, length=length, evaluations=len(F.cache), applicable=False,
                              failing_point=e.point, reason=e.reason)
    return EnvelopeReport(path, float(total), float(delta), float(total - delta), length, len(F.cache))


def interior_segments(s: Scenario, x_ref: Mapping, offer: FirmOffer | None = None,
                      span: float = 20.0, margin: float = 0.015, h: float = FD_STEP):
    """Axis-parallel segments next to ``x_ref`` whose points are all interior.

    For each firm coordinate, tries moving away from ``x_ref`` in either
    direction by ``span`` MW, halving down to 1 MW until both endpoints are
    interior. Feasible sets of the restricted problem are convex, so interior
    endpoints imply an interior segment. Returns ``[(start, end), ...]``.
    """
    offer = offer or s.truthful_offer()
    coords = _schedule_coords(s)
    base = _flatten(s, x_ref)
    F = _RestrictedObjective(s, offer, coords)

    def interior(x, k):
        try:
            for d in (-h, 0.0, h):
                y = x.copy()
                y[k] += d
                F(y)
        except _NotApplicable:
            return False
        return True

    out = []
    for k in range(len(coords)):
        found = None
        for direction in (-1.0, 1.0):
            a = span
            while a >= 1.0 and found is None:
                p0, p1 = base.copy(), base.copy()
                p0[k] += direction * margin
                p1[k] += direction * (margin + a)
                if interior(p0, k) and interior(p1, k):
                    found = (F.schedule(p0), F.schedule(p1))
                a /= 2
            if found:
                break
        if found:
            out.append(found)
    return out


@dataclass(frozen=True)
class ProjectionReport:
    samples: int
    deliverable: int
    violations: tuple = ()
    union_coverage: float = float("nan")
    coverage_samples: int = 0
    per_claim: tuple = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return not self.violations


def _as_claim(s: Scenario, claim) -> dict:
    if isinstance(claim, TechParams):
        if len(s.firm_unit_ids) != 1:
            raise ValueError("a bare TechParams claim needs a single-unit firm")
        return {s.firm_unit_ids[0]: claim}
    return dict(claim)


def _sample_schedules(rng, params: Mapping[str, TechParams], hours: int, n: int, max_draws: int):
    ids = sorted(params)
    out = []
    draws = 0
    while len(out) < n and draws < max_draws:
        draws += 1
        sched = {uid: rng.uniform(params[uid].p_min, params[uid].p_max, size=hours) for uid in ids}
        if all(schedule_satisfies(sched[uid], params[uid], 0.0) for uid in ids):
            out.append(sched)
    return out


def _split_into_blocks(q: float, blocks) -> list:
    vals, left = [], q
    for b in blocks:
        take = min(b.mw, max(left, 0.0))
        vals.append(take)
        left -= take
    if left > 1e-9:
        vals[-1] += left  # exceeds the curve: leaves the last block's bound, flagged by the oracle
    return vals


def _full_point(lp_full, restricted: ClearingResult, offer: FirmOffer, sched: Mapping) -> np.ndarray:
    """Lift a restricted solution plus a firm schedule into the full LP's variable space."""
    values = dict(zip(restricted.lp.var_labels, restricted.solution.primal))
    for uid, x in sched.items():
        for hh, q in enumerate(x):
            for k, v in enumerate(_split_into_blocks(float(q), offer[uid].curve.blocks)):
                values[f"gen[{uid},{hh},{k}]"] = v
    return np.array([values[lbl] for lbl in lp_full.var_labels])


def projection_check(s: Scenario, claimed_set: Sequence, samples: int = 1000, seed: int = 0,
                     max_draws_factor: int = 200) -> ProjectionReport:
    """Sampled check that claims inside the true envelope never admit undeliverable schedules.

    For every claimed parameter set, draws ``samples`` schedules uniformly within
    the claimed hourly bounds (rejecting ramp violations), keeps those the
    network can absorb, and confirms each is feasible under the true
    parameters: unit-level and as a full clearing-LP point via ``is_feasible``.
    Coverage: truly feasible deliverable schedules are drawn the same way and
    the fraction admitted by at least one claim is reported.
    """
    rng = np.random.default_rng(seed)
    truth = {u.id: u.params for u in s.firm_units}
    truth_offer = s.truthful_offer()
    lp_true, _ = assemble_lp(s, truth_offer)
    claims = [_as_claim(s, c) for c in claimed_set]
    for c in claims:
        for uid, p in c.items():
            if not is_within_true_envelope(p, truth[uid]):
                raise ValueError(f"claim for {uid!r} is outside the true envelope")

    violations, per_claim = [], []
    total_drawn = total_deliverable = 0
    for claim in claims:
        offer = {uid: UnitOffer(claim[uid], s.unit(uid).curve) for uid in s.firm_unit_ids}
        drawn = _sample_schedules(rng, claim, s.hours, samples, samples * max_draws_factor)
        deliverable = 0
        for sched in drawn:
            try:
                r = restricted_clear(s, offer, sched, run="projection")
            except InfeasibleError:
                continue
            deliverable += 1
            in_claim = (all(schedule_satisfies(sched[uid], claim[uid]) for uid in sched)
                        and is_feasible(r.lp, r.solution.primal).feasible)
            unit_ok = all(schedule_satisfies(sched[uid], truth[uid]) for uid in sched)
            in_truth = is_feasible(lp_true, _full_point(lp_true, r, truth_offer, sched))
            if in_claim and not (unit_ok and in_truth.feasible):
                violations.append((claim, {k: v.tolist() for k, v in sched.items()}, in_truth.violation))
        per_claim.append((len(drawn), deliverable))
        total_drawn += len(drawn)
        total_deliverable += deliverable

    covered = n_cov = 0
    for sched in _sample_schedules(rng, truth, s.hours, samples, samples * max_draws_factor):
        try:
            restricted_clear(s, truth_offer, sched, run="projection")
        except InfeasibleError:
            continue
        n_cov += 1
        if any(all(schedule_satisfies(sched[uid], c[uid]) for uid in sched) for c in claims):
            covered += 1
    coverage = covered / n_cov if n_cov else float("nan")
    return ProjectionReport(total_drawn, total_deliverable, tuple(violations), coverage, n_cov, tuple(per_claim))


def money_conservation_check(outcome: RegulationOutcome, settlement: Settlement) -> float:
    """Loads' payments plus uplift charges minus all generator revenue and congestion rent."""
    firm_ids = set(outcome.base_run.dispatch.firm_schedule)
    other = sum(v for k, v in settlement.generator_receipts.items() if k not in firm_ids)
    inflow = settlement.total_load_payments + sum(outcome.allocations.values())
    outflow = other + outcome.firm_revenue + settlement.congestion_rent
    return float(inflow - outflow)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


def run_property_suite(s: Scenario, estimate, grid=None, seed: int = 0,
                       samples: int = 250) -> list:
    """Run every structural check on one scenario; returns ``CheckResult`` rows."""
    from .strategy import GridSpec, apply_distortion, best_response_sweep

    grid = grid or GridSpec()
    truth = s.truthful_offer()
    rows = []

    base = clear(s, truth, run="base")
    kkt = verify_kkt(base.lp, base.solution)
    worst = max(kkt.primal_violation, kkt.dual_violation, kkt.complementarity_violation, abs(kkt.duality_gap))
    rows.append(CheckResult("kkt_base", kkt.passed, worst, kkt.tol))

    segs = interior_segments(s, base.dispatch.firm_schedule, truth)
    if not segs:
        rows.append(CheckResult("envelope", False, float("nan"), 0.0, "no interior segment near the truthful dispatch"))
    for i, (a, b) in enumerate(segs):
        rep = envelope_check(s, a, b, offer=truth)
        detail = rep.reason if not rep.applicable else f"length={rep.length:.6f}"
        rows.append(CheckResult(f"envelope[{i}]", rep.passed, rep.residual, rep.tolerance, detail))

    claims, seen = [], set()
    for spec in grid.points():
        try:
            offer = apply_distortion(truth, spec)
        except ValueError:
            continue
        key = tuple((uid, offer[uid].params) for uid in sorted(offer))
        if key not in seen:
            seen.add(key)
            claims.append({uid: o.params for uid, o in offer.items()})
    proj = projection_check(s, claims, samples=samples, seed=seed)
    rows.append(CheckResult("projection", proj.passed, float(len(proj.violations)), 0.0,
                            f"samples={proj.samples} deliverable={proj.deliverable} "
                            f"union_coverage={proj.union_coverage:.6f}"))

    outcome = run_regulation(s, truth, estimate)
    residual = money_conservation_check(outcome, settle(outcome.base_run))
    rows.append(CheckResult("money_conservation", abs(residual) <= CONSERVATION_TOL, residual, CONSERVATION_TOL))

    report = compare_methods(s, estimate)
    rows.append(CheckResult("profit_identity", abs(report.identity_residual) <= CONSERVATION_TOL,
                            report.identity_residual, CONSERVATION_TOL))

    sweep = best_response_sweep(s, estimate, grid)
    c = outcome.c
    consts = [p.profit_proposed + p.deadweight_loss for p in sweep.points if p.feasible]
    spread = max(consts) - min(consts)
    rows.append(CheckResult("alignment_constant", spread <= CONSERVATION_TOL, spread, CONSERVATION_TOL,
                            f"c={c:.6f}"))
    truthful_best = sweep.truthful_index in sweep.ties["proposed"]
    gap = sweep.best("proposed").profit_proposed - sweep.points[sweep.truthful_index].profit_proposed
    rows.append(CheckResult("truthful_best_response", truthful_best, gap, 1e-6))
    return rows
