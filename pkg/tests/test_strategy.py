import pytest

from damreg.clearing import clear
from damreg.grid import UnitOffer
from damreg.scenarios import BUILTIN, exhibit, fivenode, flat, scaled_estimate, twonode
from damreg.strategy import (
    DistortionSpec, GridSpec, apply_distortion, best_response_sweep, deadweight_loss,
    dispatch_fingerprint,
)

SMALL = GridSpec(alpha=(0.5, 1.0, 1.5, 2.0), beta=(0.0,), withhold=(0.0, 0.25, 0.5), ramp_scale=(1.0,))


class TestDistortion:
    def test_identity(self):
        s = twonode()
        assert apply_distortion(s.truthful_offer(), DistortionSpec()) == s.truthful_offer()

    def test_price_scale(self):
        out = apply_distortion(twonode().truthful_offer(), DistortionSpec(alpha=2.0))
        assert out["g1"].curve.blocks[0].price == 20.0

    def test_withhold(self):
        out = apply_distortion(twonode().truthful_offer(), DistortionSpec(withhold=0.5))
        assert out["g1"].params.p_max == 50.0

    def test_shift_and_ramp(self):
        out = apply_distortion(fivenode().truthful_offer(), DistortionSpec(beta=-5.0, ramp_scale=0.5))
        assert [b.price for b in out["gA"].curve.blocks] == [7.0, 13.0]
        assert out["gB"].params.ramp_up == 12.5 and out["gB"].params.ramp_down == 15.0

    def test_withhold_below_minimum(self):
        with pytest.raises(ValueError, match="below p_min"):
            apply_distortion(fivenode().truthful_offer(), DistortionSpec(withhold=0.95))

    @pytest.mark.parametrize("bad", [dict(alpha=-1.0), dict(withhold=1.5), dict(ramp_scale=0.0)])
    def test_spec_validation(self, bad):
        with pytest.raises(ValueError):
            DistortionSpec(**bad)

    def test_grid_must_hold_truth(self):
        with pytest.raises(ValueError):
            best_response_sweep(twonode(), twonode().truthful_offer(), GridSpec(alpha=(2.0,)))

    def test_default_grid_shape(self):
        g = GridSpec()
        assert (len(g.alpha), len(g.beta), len(g.withhold), len(g.ramp_scale)) == (13, 5, 5, 3)
        assert len(g.points()) == 975


class TestSweep:
    def test_twonode_proposed_is_truthful(self):
        s = twonode()
        res = best_response_sweep(s, s.truthful_offer(), SMALL)
        assert res.best("proposed").spec.truthful
        assert res.truthful_index in res.ties["proposed"]

    def test_exhibit_unregulated_market_power(self):
        s = exhibit()
        res = best_response_sweep(s, s.truthful_offer(), SMALL)
        best, truthful = res.best("none"), res.points[res.truthful_index]
        assert not best.spec.truthful
        assert best.profit_unregulated > truthful.profit_unregulated + 1.0

    def test_single_point(self):
        s = twonode()
        grid = GridSpec(alpha=(1.0,), beta=(0.0,), withhold=(0.0,), ramp_scale=(1.0,))
        res = best_response_sweep(s, s.truthful_offer(), grid)
        assert res.argmax == {"none": 0, "standard": 0, "proposed": 0}

    def test_infeasible_point_recorded(self):
        s = fivenode()
        grid = GridSpec(alpha=(1.0,), beta=(0.0,), withhold=(0.0, 0.95), ramp_scale=(1.0,))
        res = best_response_sweep(s, s.truthful_offer(), grid)
        assert [p.feasible for p in res.points] == [True, False]
        assert "below p_min" in res.points[1].note

    @pytest.mark.parametrize("name", ["twonode", "exhibit", "fivenode"])
    def test_alignment_and_nonnegative_loss(self, name):
        s = BUILTIN[name]()
        res = best_response_sweep(s, scaled_estimate(s, price=1.2, p_max=0.6), GridSpec(
            alpha=(0.5, 1.0, 2.0, 3.0), beta=(-10.0, 0.0, 10.0), withhold=(0.0, 0.25, 0.5), ramp_scale=(0.5, 1.0)))
        pts = [p for p in res.points if p.feasible]
        consts = [p.profit_proposed + p.deadweight_loss for p in pts]
        assert max(consts) - min(consts) <= 1e-6
        assert min(p.deadweight_loss for p in pts) >= -1e-6

    @pytest.mark.parametrize("name", ["exhibit", "fivenode"])
    def test_argmax_set_independent_of_estimate(self, name):
        s = BUILTIN[name]()
        sets = [best_response_sweep(s, scaled_estimate(s, **e), SMALL).ties["proposed"]
                for e in (dict(), dict(price=1.2), dict(p_max=0.6, ramp=0.5))]
        assert sets[0] == sets[1] == sets[2]


class TestDeadweightLoss:
    def test_truthful(self):
        s = twonode()
        assert deadweight_loss(s, s.truthful_offer()) == 0.0

    def test_priced_at_forty(self):
        s = twonode()
        offer = {"g1": UnitOffer(s.unit("g1").params, flat(100, 40))}
        assert deadweight_loss(s, offer) == pytest.approx(600.0)

    def test_slack_withholding_keeps_dispatch(self):
        s = twonode()
        offer = apply_distortion(s.truthful_offer(), DistortionSpec(withhold=0.25))
        assert dispatch_fingerprint(clear(s, offer)) == dispatch_fingerprint(clear(s, s.truthful_offer()))
        assert deadweight_loss(s, offer) == pytest.approx(0.0, abs=1e-9)


def test_fingerprint_ignores_sub_micro_noise():
    s = twonode()
    r = clear(s, s.truthful_offer())
    d = r.dispatch
    d.firm_schedule["g1"] = d.firm_schedule["g1"] + 1e-9
    assert dispatch_fingerprint(r) == dispatch_fingerprint(clear(s, s.truthful_offer()))
