"""Welfare-maximizing day-ahead clearing on a DC network.

Decision variables are the cleared quantities of every offer block and every
elastic demand block, per hour. Rows, per hour ``h``:

* balance (equality): ``sum(elastic) - sum(generation) = fixed_injection - fixed_demand``;
  its dual is the price at the reference node;
* two flow rows per line from the PTDF applied to net nodal injections;
* ``pmax``/``pmin`` rows per unit, and ramp rows linking ``h`` to ``h-1``
  (or to ``p_initial`` for the first hour).

A locational price is the welfare value of one more MW withdrawn at a node:
``lmp[n, h] = y_balance[h] - sum_l (y_up[l, h] - y_down[l, h]) * ptdf[l, n]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .grid import FIRM, FirmOffer, Scenario, TechParams, compute_ptdf, schedule_satisfies
from .lp import EQ, LE, LinearProgram, LpSolution, Status, solve

BALANCE_TOL = 1e-6


class InfeasibleError(RuntimeError):
    """The clearing problem has no feasible dispatch."""

    def __init__(self, message, run="clear"):
        super().__init__(message)
        self.run = run


@dataclass
class LpLayout:
    """Where each market quantity lives in the assembled LP."""
    hours: int
    gen_vars: dict = field(default_factory=dict)      # (unit_id, h) -> var indices
    load_vars: dict = field(default_factory=dict)     # (demand_id, h) -> var indices
    gen_prices: dict = field(default_factory=dict)    # (unit_id, h) -> block prices
    load_values: dict = field(default_factory=dict)   # (demand_id, h) -> block values
    balance_rows: list = field(default_factory=list)  # h -> row
    flow_rows: dict = field(default_factory=dict)     # (l, h) -> (up_row, down_row)
    rows_by_kind: dict = field(default_factory=dict)  # kind -> row indices

    def add_row(self, kind, index):
        self.rows_by_kind.setdefault(kind, []).append(index)


@dataclass(frozen=True, eq=False)
class Dispatch:
    firm_schedule: dict
    other_schedule: dict
    consumption: dict
    flows: np.ndarray  # lines x hours, MW

    def vector(self) -> np.ndarray:
        parts = [self.firm_schedule[k] for k in sorted(self.firm_schedule)]
        parts += [self.other_schedule[k] for k in sorted(self.other_schedule)]
        parts += [self.consumption[k] for k in sorted(self.consumption)]
        return np.concatenate(parts) if parts else np.zeros(0)


@dataclass(frozen=True, eq=False)
class ClearingResult:
    scenario: Scenario
    dispatch: Dispatch
    lmp: np.ndarray  # nodes x hours
    U: float
    U_other: float
    firm_offered_cost: float
    firm_true_cost: float
    binding_rows: tuple
    lp: LinearProgram
    solution: LpSolution
    layout: LpLayout
    restricted: bool = False

    @property
    def U_true(self) -> float:
        """Market utility with the firm's dispatch re-priced at true cost."""
        return self.U_other - self.firm_true_cost

    def node_lmp(self, node: str) -> np.ndarray:
        return self.lmp[self.scenario.network.index(node)]

    def firm_lmp_revenue(self) -> float:
        """Sum over firm units and hours of LMP at the unit's node times its output."""
        s = self.scenario
        return float(sum(self.node_lmp(s.unit(uid).node) @ x
                         for uid, x in sorted(self.dispatch.firm_schedule.items())))


@dataclass(frozen=True)
class Settlement:
    load_payments: dict
    generator_receipts: dict
    congestion_rent: float

    @property
    def total_load_payments(self) -> float:
        return float(sum(self.load_payments.values()))

    @property
    def total_generator_receipts(self) -> float:
        return float(sum(self.generator_receipts.values()))


def _unit_data(s: Scenario, offer: FirmOffer, uid: str):
    u = s.unit(uid)
    if u.owner == FIRM:
        o = offer[uid]
        return o.params, o.curve
    return u.params, u.curve


def assemble_lp(s: Scenario, offer: FirmOffer, fixed_X: Mapping | None = None):
    """Build the clearing LP; with ``fixed_X`` the firm's output is a constant injection.

    Returns ``(LinearProgram, LpLayout)``.
    """
    net = s.network
    ptdf = compute_ptdf(net)
    N, L, H = len(net.nodes), len(net.lines), s.hours
    node_ix = {n: k for k, n in enumerate(net.nodes)}
    lay = LpLayout(hours=H)

    c, lo, up, var_labels, var_node, var_sign = [], [], [], [], [], []

    def add_var(cost, cap, label, node, sign):
        c.append(cost)
        lo.append(0.0)
        up.append(cap)
        var_labels.append(label)
        var_node.append(node_ix[node])
        var_sign.append(sign)
        return len(c) - 1

    var_units = [u for u in s.units if not (fixed_X is not None and u.owner == FIRM)]
    for h in range(H):
        for u in var_units:
            _, curve = _unit_data(s, offer, u.id)
            lay.gen_vars[u.id, h] = [add_var(-b.price, b.mw, f"gen[{u.id},{h},{k}]", u.node, 1.0)
                                     for k, b in enumerate(curve.blocks)]
            lay.gen_prices[u.id, h] = np.array([b.price for b in curve.blocks])
        for d in s.demands:
            dh = d.hours[h]
            if dh.blocks:
                lay.load_vars[d.id, h] = [add_var(b.price, b.mw, f"load[{d.id},{h},{k}]", d.node, -1.0)
                                          for k, b in enumerate(dh.blocks)]
                lay.load_values[d.id, h] = np.array([b.price for b in dh.blocks])

    n = len(c)
    var_node = np.array(var_node, dtype=int)
    var_sign = np.array(var_sign)
    rows, senses, rhs, row_labels = [], [], [], []

    def add_row(coeffs, sense, b, label, kind):
        rows.append(coeffs)
        senses.append(sense)
        rhs.append(b)
        row_labels.append(label)
        lay.add_row(kind, len(rows) - 1)
        return len(rows) - 1

    hour_of = np.zeros(n, dtype=int)
    for (_, h), ix in list(lay.gen_vars.items()) + list(lay.load_vars.items()):
        hour_of[ix] = h

    for h in range(H):
        fixed_inj = np.zeros(N)
        for d in s.demands:
            if d.hours[h].fixed is not None:
                fixed_inj[node_ix[d.node]] -= d.hours[h].fixed
        if fixed_X is not None:
            for u in s.firm_units:
                fixed_inj[node_ix[u.node]] += float(fixed_X[u.id][h])
        in_h = hour_of == h

        coeffs = np.where(in_h, -var_sign, 0.0)
        lay.balance_rows.append(add_row(coeffs, EQ, fixed_inj.sum(), f"balance[{h}]", "balance"))
        for l, line in enumerate(net.lines):
            sens = np.where(in_h, ptdf[l, var_node] * var_sign, 0.0)
            shift = float(ptdf[l] @ fixed_inj)
            r_up = add_row(sens, LE, line.capacity - shift, f"flow_up[{l},{h}]", "flow")
            r_dn = add_row(-sens, LE, line.capacity + shift, f"flow_down[{l},{h}]", "flow")
            lay.flow_rows[l, h] = (r_up, r_dn)

    for u in var_units:
        params, _ = _unit_data(s, offer, u.id)
        for h in range(H):
            out = np.zeros(n)
            out[lay.gen_vars[u.id, h]] = 1.0
            add_row(out, LE, params.p_max, f"pmax[{u.id},{h}]", "pmax")
            if params.p_min > 0:
                add_row(-out, LE, -params.p_min, f"pmin[{u.id},{h}]", "pmin")
            if h == 0:
                add_row(out, LE, params.p_initial + params.ramp_up, f"ramp_up[{u.id},0]", "ramp")
                add_row(-out, LE, params.ramp_down - params.p_initial, f"ramp_down[{u.id},0]", "ramp")
            else:
                prev = np.zeros(n)
                prev[lay.gen_vars[u.id, h - 1]] = 1.0
                add_row(out - prev, LE, params.ramp_up, f"ramp_up[{u.id},{h}]", "ramp")
                add_row(prev - out, LE, params.ramp_down, f"ramp_down[{u.id},{h}]", "ramp")

    A = np.array(rows, dtype=float).reshape(len(rows), n)
    lp = LinearProgram(np.array(c, dtype=float), A, tuple(senses), np.array(rhs, dtype=float),
                       np.array(lo), np.array(up), tuple(row_labels), tuple(var_labels))
    return lp, lay


def lmp_from_duals(row_duals, layout: LpLayout, ptdf: np.ndarray) -> np.ndarray:
    """Nodal prices (nodes x hours) from balance and flow-row duals."""
    y = np.asarray(row_duals)
    L, N = ptdf.shape
    lmp = np.empty((N, layout.hours))
    for h in range(layout.hours):
        net_flow_dual = np.array([y[layout.flow_rows[l, h][0]] - y[layout.flow_rows[l, h][1]]
                                  for l in range(L)]).reshape(L)
        lmp[:, h] = y[layout.balance_rows[h]] - net_flow_dual @ ptdf
    return lmp


def _check_fixed_schedule(s: Scenario, offer: FirmOffer, fixed_X: Mapping):
    if set(fixed_X) != set(s.firm_unit_ids):
        raise ValueError(f"fixed schedule covers {sorted(fixed_X)}, firm units are {sorted(s.firm_unit_ids)}")
    for uid, x in fixed_X.items():
        x = np.asarray(x, dtype=float)
        if x.shape != (s.hours,):
            raise ValueError(f"fixed schedule for {uid!r} must have {s.hours} hourly values")
        params: TechParams = offer[uid].params
        if not schedule_satisfies(x, params):
            raise ValueError(f"fixed schedule for {uid!r} leaves its claimed operating envelope")


def _solve_market(s: Scenario, offer: FirmOffer, fixed_X, run: str) -> ClearingResult:
    lp, lay = assemble_lp(s, offer, fixed_X)
    sol = solve(lp)
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleError(f"{run}: no dispatch satisfies demand, network and unit limits "
                              f"({s.name or 'scenario'})", run)
    if sol.status is Status.UNBOUNDED:
        raise AssertionError(f"{run}: clearing LP unbounded; every block is bounded so this is a bug")

    x = sol.primal
    H = s.hours
    firm, other, cons = {}, {}, {}
    offered_firm = 0.0
    U_other = 0.0
    for u in s.units:
        if fixed_X is not None and u.owner == FIRM:
            firm[u.id] = np.asarray(fixed_X[u.id], dtype=float).copy()
            offered_firm += sum(offer[u.id].curve.cost(q) for q in firm[u.id])
            continue
        sched = np.array([x[lay.gen_vars[u.id, h]].sum() for h in range(H)])
        cost = sum(float(lay.gen_prices[u.id, h] @ x[lay.gen_vars[u.id, h]]) for h in range(H))
        if u.owner == FIRM:
            firm[u.id] = sched
            offered_firm += cost
        else:
            other[u.id] = sched
            U_other -= cost
    for d in s.demands:
        q = np.zeros(H)
        for h in range(H):
            dh = d.hours[h]
            if dh.fixed is not None:
                q[h] = dh.fixed
            else:
                v = x[lay.load_vars[d.id, h]]
                q[h] = v.sum()
                U_other += float(lay.load_values[d.id, h] @ v)
        cons[d.id] = q

    net = s.network
    ptdf = compute_ptdf(net)
    inj = np.zeros((len(net.nodes), H))
    for u in s.units:
        inj[net.index(u.node)] += firm.get(u.id, other.get(u.id))
    for d in s.demands:
        inj[net.index(d.node)] -= cons[d.id]
    flows = ptdf @ inj
    lmp = lmp_from_duals(sol.row_duals, lay, ptdf)

    true_cost = sum(s.unit(uid).curve.cost(q) for uid, sched in firm.items() for q in sched)
    U = float(sol.objective_value) if fixed_X is None else U_other - offered_firm
    slack = lp.rhs - lp.A @ x
    binding = tuple(lp.row_labels[i] for i in range(lp.n_rows)
                    if lp.senses[i] == LE and abs(slack[i]) <= 1e-7)
    return ClearingResult(s, Dispatch(firm, other, cons, flows), lmp, U, U_other,
                          offered_firm, float(true_cost), binding, lp, sol, lay,
                          restricted=fixed_X is not None)


def clear(s: Scenario, offer: FirmOffer, run: str = "clear") -> ClearingResult:
    """Clear the market with the firm's submitted ``offer``."""
    return _solve_market(s, offer, None, run)


def restricted_clear(s: Scenario, offer: FirmOffer, fixed_X: Mapping, run: str = "restricted") -> ClearingResult:
    """Clear with the firm's schedule pinned to ``fixed_X``; the LP objective is ``U_other``.

    ``fixed_X`` maps each firm unit id to its hourly output and must respect the
    unit's claimed bounds and ramps.
    """
    _check_fixed_schedule(s, offer, fixed_X)
    return _solve_market(s, offer, fixed_X, run)


def settle(result: ClearingResult) -> Settlement:
    """Pay every generator and charge every load its nodal price."""
    s = result.scenario
    d = result.dispatch
    loads = {k: float(result.node_lmp(dem.node) @ d.consumption[dem.id])
             for k, dem in ((dem.id, dem) for dem in s.demands)}
    gens = {}
    for u in s.units:
        q = d.firm_schedule.get(u.id, d.other_schedule.get(u.id))
        gens[u.id] = float(result.node_lmp(u.node) @ q)
    rent = float(sum(loads.values()) - sum(gens.values()))
    return Settlement(loads, gens, rent)
