from dataclasses import replace
import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from damreg.clearing import (
    InfeasibleError, assemble_lp, clear, lmp_from_duals, restricted_clear, settle,
)
from damreg.grid import FIRM, DemandBid, GeneratingUnit, Network, Scenario, compute_ptdf
from damreg.lp import EQ
from damreg.scenarios import (
    BUILTIN, fivenode, fixed, flat, params, single_node_elastic, twonode,
)
from damreg.strategy import GridSpec, apply_distortion

from oracles import vertex_enumeration


def _some_offers(s, n=12, seed=0):
    rng = np.random.default_rng(seed)
    pts = GridSpec().points()
    return [apply_distortion(s.truthful_offer(), pts[i]) for i in rng.choice(len(pts), n, replace=False)]


class TestStructure:
    def test_single_node_has_no_flow_rows(self):
        lp, lay = assemble_lp(single_node_elastic(), single_node_elastic().truthful_offer())
        assert len(lay.rows_by_kind["balance"]) == 1
        assert "flow" not in lay.rows_by_kind

    def test_two_node_rows(self):
        s = twonode()
        lp, lay = assemble_lp(s, s.truthful_offer())
        assert len(lay.rows_by_kind["balance"]) == 1
        assert len(lay.rows_by_kind["flow"]) == 2
        assert lp.senses[lay.balance_rows[0]] == EQ

    def test_ramp_rows(self):
        net = Network(("n1",), (), "n1")
        s = Scenario(net, (GeneratingUnit("g1", "n1", FIRM, params(100, ramp=30, p_initial=0), flat(100, 10)),
                           GeneratingUnit("o1", "n1", "other", params(100), flat(100, 50))),
                     (DemandBid("d1", "n1", fixed(10, 10)),), 2, "ramp")
        lp, lay = assemble_lp(s, s.truthful_offer())
        rows = {lbl: i for i, lbl in enumerate(lp.row_labels)}
        g0, g1 = lay.gen_vars["g1", 0][0], lay.gen_vars["g1", 1][0]
        r = rows["ramp_up[g1,0]"]
        assert lp.rhs[r] == 30.0 and lp.A[r, g0] == 1.0
        for name, sign in (("ramp_up[g1,1]", 1.0), ("ramp_down[g1,1]", -1.0)):
            r = rows[name]
            assert lp.rhs[r] == 30.0
            assert (lp.A[r, g1], lp.A[r, g0]) == (sign, -sign)

    def test_ramp_limits_dispatch(self):
        s = fivenode()
        r = clear(s, s.truthful_offer())
        x = r.dispatch.firm_schedule["gA"]
        assert x[0] <= 60 + 35 + 1e-9 and abs(x[1] - x[0]) <= 35 + 1e-9


class TestExamples:
    def test_twonode(self):
        r = clear(twonode(), twonode().truthful_offer())
        assert r.dispatch.firm_schedule["g1"][0] == pytest.approx(50.0)
        assert r.dispatch.other_schedule["o1"][0] == pytest.approx(70.0)
        np.testing.assert_allclose(r.lmp[:, 0], [10.0, 30.0])

    def test_twonode_against_vertex_oracle(self):
        s = twonode()
        r = clear(s, s.truthful_offer())
        best, _ = vertex_enumeration(r.lp)
        assert r.U == pytest.approx(best)

    def test_uncongested(self):
        s = twonode(line_capacity=200)
        r = clear(s, s.truthful_offer())
        assert r.dispatch.firm_schedule["g1"][0] == pytest.approx(100.0)
        assert r.dispatch.other_schedule["o1"][0] == pytest.approx(20.0)
        np.testing.assert_allclose(r.lmp[:, 0], [30.0, 30.0])

    def test_elastic_single_node(self):
        s = single_node_elastic()
        r = clear(s, s.truthful_offer())
        assert r.dispatch.consumption["d1"][0] == pytest.approx(60.0)
        # g1 is at its limit and the demand block is partially cleared: demand sets the price
        assert r.lmp[0, 0] == pytest.approx(50.0)


class TestRestricted:
    def test_at_line_limit(self):
        s = twonode()
        assert restricted_clear(s, s.truthful_offer(), {"g1": [50.0]}).U_other == pytest.approx(-2100.0)

    def test_interior(self):
        s = twonode()
        r = restricted_clear(s, s.truthful_offer(), {"g1": [40.0]})
        assert r.U_other == pytest.approx(-2400.0)
        assert r.U == pytest.approx(-2400.0 - 400.0)

    def test_short_of_demand(self):
        s = twonode()
        with pytest.raises(InfeasibleError):
            restricted_clear(s, s.truthful_offer(), {"g1": [0.0]})

    def test_outside_claimed_envelope(self):
        s = twonode()
        with pytest.raises(ValueError):
            restricted_clear(s, s.truthful_offer(), {"g1": [120.0]})

    @pytest.mark.parametrize("name", ["twonode", "exhibit", "fivenode"])
    def test_consistent_with_full_clearing(self, name):
        s = BUILTIN[name]()
        for offer in [s.truthful_offer()] + _some_offers(s, 6):
            r = clear(s, offer)
            rr = restricted_clear(s, offer, r.dispatch.firm_schedule)
            assert rr.U_other == pytest.approx(r.U_other, abs=1e-6)


class TestSettlement:
    def test_twonode(self):
        st = settle(clear(twonode(), twonode().truthful_offer()))
        assert st.load_payments["d1"] == pytest.approx(3600.0)
        assert st.generator_receipts == pytest.approx({"g1": 500.0, "o1": 2100.0})
        assert st.congestion_rent == pytest.approx(1000.0)

    def test_uncongested_rent_zero(self):
        s = twonode(line_capacity=200)
        assert settle(clear(s, s.truthful_offer())).congestion_rent == pytest.approx(0.0, abs=1e-9)

    def test_zero_demand_hour(self):
        s = replace(twonode(), demands=(DemandBid("d1", "n2", fixed(120, 0)),), hours=2)
        r = clear(s, s.truthful_offer())
        d = r.dispatch
        assert d.firm_schedule["g1"][1] == 0.0 and d.other_schedule["o1"][1] == 0.0
        st = settle(r)
        one = settle(clear(twonode(), twonode().truthful_offer()))
        assert st.load_payments == pytest.approx(one.load_payments)
        assert st.generator_receipts == pytest.approx(one.generator_receipts)


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_invariants_over_offers(name):
    s = BUILTIN[name]()
    ptdf = compute_ptdf(s.network)
    for offer in [s.truthful_offer()] + _some_offers(s):
        r = clear(s, offer)
        assert r.U == pytest.approx(r.U_other - r.firm_offered_cost, abs=1e-6)
        # prices recomputed from the stored duals match bit for bit
        assert np.array_equal(lmp_from_duals(r.solution.row_duals, r.layout, ptdf), r.lmp)
        st = settle(r)
        assert st.congestion_rent >= -1e-6
        assert st.total_load_payments - st.total_generator_receipts == pytest.approx(st.congestion_rent, abs=1e-6)
        d = r.dispatch
        gen = sum(d.firm_schedule.values()) + sum(d.other_schedule.values())
        np.testing.assert_allclose(gen, sum(d.consumption.values()), atol=1e-6)
        caps = np.array([l.capacity for l in s.network.lines])[:, None]
        assert np.all(np.abs(d.flows) <= caps + 1e-6)


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_objective_against_highs(name):
    s = BUILTIN[name]()
    for offer in [s.truthful_offer()] + _some_offers(s, 5, seed=4):
        r = clear(s, offer)
        lp = r.lp
        le = np.array([x == "<=" for x in lp.senses])
        ref = linprog(-lp.objective, A_ub=lp.A[le] if le.any() else None, b_ub=lp.rhs[le] if le.any() else None,
                      A_eq=lp.A[~le], b_eq=lp.rhs[~le], bounds=list(zip(lp.lower, lp.upper)), method="highs")
        assert ref.status == 0
        assert r.U == pytest.approx(-ref.fun, abs=1e-6)


def _enumerate_single_hour(s, step=1.0):
    """Brute-force welfare over a 1 MW grid of unit outputs (one hour, <= 4 units)."""
    ptdf = compute_ptdf(s.network)
    caps = np.array([l.capacity for l in s.network.lines])
    ranges = [np.arange(u.params.p_min, u.params.p_max + 1e-9, step) for u in s.units]
    best = -np.inf
    for out in itertools.product(*ranges):
        if any(not -u.params.ramp_down - 1e-9 <= q - u.params.p_initial <= u.params.ramp_up + 1e-9
               for u, q in zip(s.units, out)):
            continue
        inj = np.zeros(len(s.network.nodes))
        cost = 0.0
        for u, q in zip(s.units, out):
            inj[s.network.index(u.node)] += q
            cost += u.curve.cost(q)
        served = sum(out)
        value = 0.0
        # fixed loads first, then elastic blocks by value (one elastic node at most here)
        for d in s.demands:
            dh = d.hours[0]
            if dh.fixed is not None:
                served -= dh.fixed
                inj[s.network.index(d.node)] -= dh.fixed
        if served < -1e-9:
            continue
        for d in s.demands:
            blocks = sorted(d.hours[0].blocks, key=lambda b: -b.price)
            for b in blocks:
                take = min(b.mw, served)
                value += take * b.price
                served -= take
                inj[s.network.index(d.node)] -= take
        if served > 1e-9 or np.any(np.abs(ptdf @ inj) > caps + 1e-9):
            continue
        best = max(best, value - cost)
    return best


@pytest.mark.parametrize("name", ["twonode", "exhibit", "single-node", "triangle"])
def test_grid_enumeration_never_beats_lp(name):
    s = BUILTIN[name]()
    r = clear(s, s.truthful_offer())
    best = _enumerate_single_hour(s)
    prices = [b.price for u in s.units for b in u.curve.blocks]
    prices += [b.price for d in s.demands for b in d.hours[0].blocks]
    resolution = len(s.units) * 1.0 * max(prices)
    assert best <= r.U + 1e-6
    assert r.U - best <= resolution
