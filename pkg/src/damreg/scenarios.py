"""Built-in desk-scale scenarios used by the tests, the acceptance suite and the CLI."""
from .grid import (
    FIRM, OTHER, Block, DemandBid, DemandHour, GeneratingUnit, Line, Network, OfferCurve,
    Scenario, TechParams, UnitOffer,
)


def curve(*blocks):
    return OfferCurve(tuple(Block(float(q), float(p)) for q, p in blocks))


def flat(q, price):
    return curve((q, price))


def params(p_max, p_min=0.0, ramp=None, ramp_up=None, ramp_down=None, p_initial=0.0):
    ru = ramp_up if ramp_up is not None else (ramp if ramp is not None else p_max)
    rd = ramp_down if ramp_down is not None else (ramp if ramp is not None else p_max)
    return TechParams(float(p_min), float(p_max), float(ru), float(rd), float(p_initial))


def fixed(*mw):
    return tuple(DemandHour(fixed=float(q)) for q in mw)


def elastic(*blocks, hours=1):
    h = DemandHour(blocks=tuple(Block(float(q), float(v)) for q, v in blocks))
    return (h,) * hours


def twonode(line_capacity=50.0) -> Scenario:
    """n1 (reference) -- n2; cheap firm unit at n1, dearer rival and all load at n2."""
    net = Network(("n1", "n2"), (Line("n1", "n2", 1.0, float(line_capacity)),), "n1")
    units = (
        GeneratingUnit("g1", "n1", FIRM, params(100), flat(100, 10)),
        GeneratingUnit("o1", "n2", OTHER, params(100), flat(100, 30)),
    )
    return Scenario(net, units, (DemandBid("d1", "n2", fixed(120)),), 1, "twonode")


def single_node_elastic() -> Scenario:
    net = Network(("n1",), (), "n1")
    units = (
        GeneratingUnit("g1", "n1", FIRM, params(60), flat(60, 20)),
        GeneratingUnit("o1", "n1", OTHER, params(10), flat(10, 90)),
    )
    return Scenario(net, units, (DemandBid("d1", "n1", elastic((100, 50))),), 1, "single-node")


def triangle() -> Scenario:
    net = Network(("n1", "n2", "n3"),
                  (Line("n1", "n2", 1.0, 100.0), Line("n2", "n3", 1.0, 100.0),
                   Line("n1", "n3", 1.0, 100.0)), "n1")
    units = (
        GeneratingUnit("g1", "n2", FIRM, params(100), flat(100, 10)),
        GeneratingUnit("o1", "n1", OTHER, params(100), flat(100, 20)),
    )
    return Scenario(net, units, (DemandBid("d1", "n3", fixed(60)),), 1, "triangle")


def exhibit() -> Scenario:
    """Load pocket: the firm's cheap unit sits at n2 behind a 40 MW import line.

    Demand at n2 is elastic, so raising the offer price trims consumption and
    creates deadweight loss while raising the pocket's price.
    """
    net = Network(("n1", "n2"), (Line("n1", "n2", 1.0, 40.0),), "n1")
    units = (
        GeneratingUnit("o1", "n1", OTHER, params(200), flat(200, 20)),
        GeneratingUnit("g1", "n2", FIRM, params(140, ramp=140, p_initial=100), curve((100, 15), (40, 16))),
    )
    demand = DemandBid("d2", "n2", elastic((60, 100), (30, 45), (30, 35), (30, 25)))
    return Scenario(net, units, (demand,), 1, "exhibit")


def fivenode() -> Scenario:
    """Five buses, two hours, two ramp-limited firm units, meshed network with a chord."""
    net = Network(
        ("n1", "n2", "n3", "n4", "n5"),
        (Line("n1", "n2", 10.0, 60.0), Line("n2", "n3", 8.0, 80.0),
         Line("n3", "n4", 6.0, 60.0), Line("n4", "n5", 10.0, 90.0),
         Line("n5", "n1", 5.0, 50.0), Line("n2", "n4", 4.0, 50.0)),
        "n1",
    )
    units = (
        GeneratingUnit("gA", "n1", FIRM, params(120, ramp=35, p_initial=60),
                       curve((70, 12), (50, 18))),
        GeneratingUnit("gB", "n3", FIRM, params(100, p_min=10, ramp_up=25, ramp_down=30, p_initial=40),
                       curve((50, 21), (50, 27))),
        GeneratingUnit("o2", "n2", OTHER, params(120, ramp=80, p_initial=60),
                       curve((80, 25), (40, 36))),
        GeneratingUnit("o4", "n4", OTHER, params(150, ramp=100, p_initial=50),
                       curve((100, 31), (50, 46))),
        GeneratingUnit("o5", "n5", OTHER, params(120, ramp=60, p_initial=60),
                       curve((60, 23), (60, 41))),
    )
    demands = (
        DemandBid("d2", "n2", elastic((50, 60), (30, 33), hours=2)),
        DemandBid("d3", "n3", fixed(90, 130)),
        DemandBid("d4", "n4", elastic((60, 80), (40, 40), (30, 29), hours=2)),
        DemandBid("d5", "n5", fixed(70, 100)),
    )
    return Scenario(net, units, demands, 2, "fivenode")


BUILTIN = {
    "twonode": twonode,
    "exhibit": exhibit,
    "fivenode": fivenode,
    "single-node": single_node_elastic,
    "triangle": triangle,
}


def scaled_estimate(s: Scenario, price=1.0, p_max=1.0, ramp=1.0) -> dict:
    """Regulator estimate with the firm's true data distorted multiplicatively."""
    out = {}
    for u in s.firm_units:
        p = u.params
        est = TechParams(p.p_min, p.p_max * p_max, p.ramp_up * ramp, p.ramp_down * ramp, p.p_initial)
        out[u.id] = UnitOffer(est, u.curve.map_prices(scale=price))
    return out
