"""Scenario data model: network, generating units, demand bids, offers; DC PTDF."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

FIRM = "firm"
OTHER = "other"


@dataclass(frozen=True)
class Line:
    from_node: str
    to_node: str
    susceptance: float
    capacity: float


@dataclass(frozen=True)
class Network:
    nodes: tuple
    lines: tuple
    reference: str

    def index(self, node: str) -> int:
        return self.nodes.index(node)


@dataclass(frozen=True)
class TechParams:
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    p_initial: float


@dataclass(frozen=True)
class Block:
    """One step of a staircase: ``mw`` of quantity at ``price`` (money/MWh)."""
    mw: float
    price: float


@dataclass(frozen=True)
class OfferCurve:
    blocks: tuple

    @property
    def capacity(self) -> float:
        return float(sum(b.mw for b in self.blocks))

    def cost(self, q: float) -> float:
        """Integral of the staircase from 0 to ``q`` MW."""
        total, left = 0.0, float(q)
        for b in self.blocks:
            take = min(b.mw, left)
            if take <= 0.0:
                break
            total += take * b.price
            left -= take
        return total

    def map_prices(self, scale: float = 1.0, add: float = 0.0) -> "OfferCurve":
        return OfferCurve(tuple(Block(b.mw, scale * b.price + add) for b in self.blocks))


@dataclass(frozen=True)
class GeneratingUnit:
    id: str
    node: str
    owner: str
    params: TechParams
    curve: OfferCurve


@dataclass(frozen=True)
class DemandHour:
    """Either a fixed (inelastic) quantity or elastic blocks with nonincreasing values."""
    fixed: float | None = None
    blocks: tuple = ()

    @property
    def capability(self) -> float:
        return (self.fixed or 0.0) + sum(b.mw for b in self.blocks)


@dataclass(frozen=True)
class DemandBid:
    id: str
    node: str
    hours: tuple


@dataclass(frozen=True)
class UnitOffer:
    params: TechParams
    curve: OfferCurve


@dataclass(frozen=True)
class Scenario:
    network: Network
    units: tuple
    demands: tuple
    hours: int
    name: str = ""
    _by_id: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {u.id: u for u in self.units})

    @property
    def firm_unit_ids(self) -> tuple:
        return tuple(u.id for u in self.units if u.owner == FIRM)

    @property
    def firm_units(self) -> tuple:
        return tuple(u for u in self.units if u.owner == FIRM)

    def unit(self, uid: str) -> GeneratingUnit:
        return self._by_id[uid]

    def truthful_offer(self) -> dict:
        """The firm's offer carrying its true parameters and true cost curves."""
        return {u.id: UnitOffer(u.params, u.curve) for u in self.firm_units}


# A firm offer and a regulator estimate share one shape: unit id -> UnitOffer.
FirmOffer = Mapping[str, UnitOffer]
RegulatorEstimate = Mapping[str, UnitOffer]


class NetworkError(ValueError):
    pass


@lru_cache(maxsize=64)
def compute_ptdf(network: Network) -> np.ndarray:
    """DC power-transfer distribution factors, lines x nodes.

    ``ptdf[l, n]`` is the flow on line ``l`` (positive from ``from_node`` to
    ``to_node``) per MW injected at ``n`` and withdrawn at the reference node.
    The reference column is zero. The returned array is read-only.
    """
    nodes = network.nodes
    N, L = len(nodes), len(network.lines)
    idx = {n: k for k, n in enumerate(nodes)}
    f = np.array([idx[l.from_node] for l in network.lines], dtype=int)
    t = np.array([idx[l.to_node] for l in network.lines], dtype=int)
    b = np.array([l.susceptance for l in network.lines], dtype=float)

    adj = coo_matrix((np.ones(L), (f, t)), shape=(N, N))
    _, labels = connected_components(adj, directed=False)
    ref = idx[network.reference]
    cut = [nodes[k] for k in range(N) if labels[k] != labels[ref]]
    if cut:
        raise NetworkError(f"network is disconnected: nodes {cut} are not reachable from "
                           f"reference {network.reference!r}")

    if L == N - 1:
        ptdf = _radial_ptdf(N, f, t, ref)
        ptdf.setflags(write=False)
        return ptdf

    Bbus = np.zeros((N, N))
    np.add.at(Bbus, (f, f), b)
    np.add.at(Bbus, (t, t), b)
    np.add.at(Bbus, (f, t), -b)
    np.add.at(Bbus, (t, f), -b)
    keep = [k for k in range(N) if k != ref]
    X = np.zeros((N, N))
    if keep:
        X[np.ix_(keep, keep)] = np.linalg.inv(Bbus[np.ix_(keep, keep)])
    ptdf = b[:, None] * (X[f, :] - X[t, :])
    ptdf[:, ref] = 0.0
    ptdf.setflags(write=False)
    return ptdf


def _radial_ptdf(N, f, t, ref) -> np.ndarray:
    """Exact 0/+-1 factors of a tree: injection at n flows along its path to the reference."""
    ptdf = np.zeros((len(f), N))
    parent = {ref: None}  # node -> (line, +1 if the line points toward the reference)
    stack = [ref]
    while stack:
        u = stack.pop()
        for k in range(len(f)):
            for a, b, sign in ((f[k], t[k], 1.0), (t[k], f[k], -1.0)):
                if b == u and a not in parent:
                    parent[a] = (k, sign)
                    stack.append(a)
    for n in range(N):
        v = n
        while parent[v] is not None:
            k, sign = parent[v]
            ptdf[k, n] = sign
            v = t[k] if sign > 0 else f[k]
    return ptdf


def is_within_true_envelope(claimed: TechParams, truth: TechParams) -> bool:
    """Sufficient test that every schedule allowed by ``claimed`` is allowed by ``truth``."""
    return (claimed.p_min >= truth.p_min and claimed.p_max <= truth.p_max
            and claimed.ramp_up <= truth.ramp_up and claimed.ramp_down <= truth.ramp_down
            and claimed.p_initial == truth.p_initial)


def unit_schedule_violation(schedule, params: TechParams) -> float:
    """Largest violation of the hourly bounds and ramp limits by ``schedule`` (MW per hour)."""
    p = np.asarray(schedule, dtype=float)
    prev = np.concatenate(([params.p_initial], p[:-1]))
    step = p - prev
    return float(max(0.0,
                     np.max(params.p_min - p, initial=0.0),
                     np.max(p - params.p_max, initial=0.0),
                     np.max(step - params.ramp_up, initial=0.0),
                     np.max(-step - params.ramp_down, initial=0.0)))


def schedule_satisfies(schedule, params: TechParams, tol: float = 1e-9) -> bool:
    return unit_schedule_violation(schedule, params) <= tol


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


def _check_params(path, p: TechParams, out):
    if p.p_min < 0:
        out.append(Violation(f"{path}.p_min", f"must be >= 0 (got {p.p_min})"))
    if p.p_min > p.p_max:
        out.append(Violation(f"{path}.p_max", f"p_min {p.p_min} exceeds p_max {p.p_max}"))
    if p.ramp_up < 0:
        out.append(Violation(f"{path}.ramp_up", f"must be >= 0 (got {p.ramp_up})"))
    if p.ramp_down < 0:
        out.append(Violation(f"{path}.ramp_down", f"must be >= 0 (got {p.ramp_down})"))


def _check_curve(path, curve: OfferCurve, out, p_max=None):
    if not curve.blocks:
        out.append(Violation(path, "offer curve has no blocks"))
    for k, b in enumerate(curve.blocks):
        if b.mw <= 0:
            out.append(Violation(f"{path}[{k}].mw", f"must be > 0 (got {b.mw})"))
        if k and b.price < curve.blocks[k - 1].price:
            out.append(Violation(f"{path}[{k}].price", "block prices must be nondecreasing"))
    if p_max is not None and curve.blocks and curve.capacity + 1e-9 < p_max:
        out.append(Violation(path, f"curve covers {curve.capacity} MW, below p_max {p_max}"))


def check_offer(scenario: Scenario, offer: FirmOffer, label: str = "offer") -> list:
    out = []
    if set(offer) != set(scenario.firm_unit_ids):
        out.append(Violation(label, f"unit set {sorted(offer)} differs from firm units "
                                    f"{sorted(scenario.firm_unit_ids)}"))
    for uid, o in offer.items():
        _check_params(f"{label}.{uid}.params", o.params, out)
        _check_curve(f"{label}.{uid}.curve", o.curve, out)
    return out


def validate_scenario(s: Scenario, probe: bool = True) -> list:
    """Check every structural invariant; optionally probe feasibility with one clearing.

    Returns a list of :class:`Violation` (empty when the scenario is sound).
    """
    out = []
    net = s.network
    if len(set(net.nodes)) != len(net.nodes):
        out.append(Violation("network.nodes", "duplicate node identifiers"))
    if net.reference not in net.nodes:
        out.append(Violation("network.reference", f"{net.reference!r} is not a node"))
    for k, l in enumerate(net.lines):
        path = f"network.lines[{k}]"
        for end in (l.from_node, l.to_node):
            if end not in net.nodes:
                out.append(Violation(path, f"unknown node {end!r}"))
        if l.from_node == l.to_node:
            out.append(Violation(path, "self-loop line"))
        if not l.susceptance > 0:
            out.append(Violation(f"{path}.susceptance", f"must be > 0 (got {l.susceptance})"))
        if l.capacity < 0:
            out.append(Violation(f"{path}.capacity", f"must be >= 0 (got {l.capacity})"))
    if not out:
        try:
            compute_ptdf(net)
        except NetworkError as e:
            out.append(Violation("network.lines", str(e)))
    if s.hours < 1:
        out.append(Violation("hours", f"must be >= 1 (got {s.hours})"))

    ids = [u.id for u in s.units]
    if len(set(ids)) != len(ids):
        out.append(Violation("units", "duplicate unit ids"))
    for k, u in enumerate(s.units):
        path = f"units[{k}]"
        if u.node not in net.nodes:
            out.append(Violation(f"{path}.node", f"unknown node {u.node!r}"))
        if u.owner not in (FIRM, OTHER):
            out.append(Violation(f"{path}.owner", f"must be {FIRM!r} or {OTHER!r}"))
        _check_params(f"{path}.params", u.params, out)
        _check_curve(f"{path}.curve", u.curve, out, p_max=u.params.p_max)
    if not any(u.owner == FIRM for u in s.units):
        out.append(Violation("units", "no firm-owned unit"))
    if not any(u.owner == OTHER for u in s.units):
        out.append(Violation("units", "no unit owned by other players"))

    for k, d in enumerate(s.demands):
        path = f"demands[{k}]"
        if d.node not in net.nodes:
            out.append(Violation(f"{path}.node", f"unknown node {d.node!r}"))
        if len(d.hours) != s.hours:
            out.append(Violation(f"{path}.hours", f"expected {s.hours} entries, got {len(d.hours)}"))
        for h, dh in enumerate(d.hours):
            hp = f"{path}.hours[{h}]"
            if (dh.fixed is None) == (not dh.blocks):
                out.append(Violation(hp, "need exactly one of 'fixed' or 'blocks'"))
            if dh.fixed is not None and dh.fixed < 0:
                out.append(Violation(f"{hp}.fixed", f"must be >= 0 (got {dh.fixed})"))
            for j, b in enumerate(dh.blocks):
                if b.mw <= 0:
                    out.append(Violation(f"{hp}.blocks[{j}].mw", f"must be > 0 (got {b.mw})"))
                if j and b.price > dh.blocks[j - 1].price:
                    out.append(Violation(f"{hp}.blocks[{j}].value", "block values must be nonincreasing"))
    for h in range(max(s.hours, 0)):
        if sum(d.hours[h].capability for d in s.demands if h < len(d.hours)) <= 0:
            out.append(Violation(f"demands.hours[{h}]", "no positive demand in this hour"))

    if not out and probe:
        from .clearing import InfeasibleError, clear
        try:
            clear(s, s.truthful_offer())
        except InfeasibleError as e:
            out.append(Violation("scenario", f"clearing is infeasible: {e}"))
    return out


def with_firm_params(s: Scenario, params: Mapping[str, TechParams]) -> Scenario:
    """Copy of ``s`` with firm units' true parameters replaced."""
    units = tuple(replace(u, params=params[u.id]) if u.id in params else u for u in s.units)
    return replace(s, units=units)
