"""Scenario documents (strict JSON) and CSV report tables."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Mapping, NamedTuple

from .grid import (
    Block, DemandBid, DemandHour, GeneratingUnit, Line, Network, OfferCurve, Scenario, TechParams,
    UnitOffer, Violation, check_offer, validate_scenario,
)
from .strategy import GridSpec

PARAM_KEYS = ("p_min", "p_max", "ramp_up", "ramp_down", "p_initial")
GRID_AXES = ("alpha", "beta", "withhold", "ramp_scale")


class ScenarioError(Exception):
    """Base class for problems with a scenario document."""


class ParseError(ScenarioError):
    """The file is missing or is not well-formed JSON."""


class UnknownKeyError(ScenarioError):
    """The document carries a key the format does not define."""

    def __init__(self, path: str, key: str):
        super().__init__(f"{path}: unknown key {key!r}")
        self.path, self.key = path, key


class ValidationError(ScenarioError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class LoadedScenario(NamedTuple):
    scenario: Scenario
    estimate: dict
    grid: GridSpec
    submitted: dict


class _Reader:
    """Walks a decoded document, collecting violations with their document paths."""

    def __init__(self):
        self.errors = []

    def fail(self, path, msg):
        self.errors.append(Violation(path, msg))

    def obj(self, d, path, required=(), optional=()):
        if not isinstance(d, dict):
            self.fail(path, f"expected an object, got {type(d).__name__}")
            return None
        for k in d:
            if k not in required and k not in optional:
                raise UnknownKeyError(path or "<document>", k)
        ok = True
        for k in required:
            if k not in d:
                self.fail(f"{path}.{k}" if path else k, "missing required key")
                ok = False
        return d if ok else None

    def arr(self, v, path):
        if not isinstance(v, list):
            self.fail(path, f"expected a list, got {type(v).__name__}")
            return []
        return v

    def num(self, v, path):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(path, f"expected a finite number, got {v!r}")
            return math.nan
        return float(v)

    def string(self, v, path):
        if not isinstance(v, str):
            self.fail(path, f"expected a string, got {v!r}")
            return ""
        return v

    def integer(self, v, path):
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(path, f"expected an integer, got {v!r}")
            return 0
        return v

    def params(self, d, path):
        d = self.obj(d, path, PARAM_KEYS)
        if d is None:
            return None
        return TechParams(*(self.num(d[k], f"{path}.{k}") for k in PARAM_KEYS))

    def blocks(self, v, path, value_key):
        out = []
        for k, b in enumerate(self.arr(v, path)):
            b = self.obj(b, f"{path}[{k}]", ("mw", value_key))
            if b is not None:
                out.append(Block(self.num(b["mw"], f"{path}[{k}].mw"),
                                 self.num(b[value_key], f"{path}[{k}].{value_key}")))
        return tuple(out)

    def offers(self, d, path):
        if not isinstance(d, dict):
            self.fail(path, "expected an object keyed by unit id")
            return {}
        out = {}
        for uid, o in d.items():
            o = self.obj(o, f"{path}.{uid}", ("params", "curve"))
            if o is None:
                continue
            p = self.params(o["params"], f"{path}.{uid}.params")
            c = OfferCurve(self.blocks(o["curve"], f"{path}.{uid}.curve", "price"))
            if p is not None:
                out[uid] = UnitOffer(p, c)
        return out


def parse_document(doc) -> LoadedScenario:
    """Turn a decoded JSON document into validated objects.

    Raises :class:`UnknownKeyError` on the first undefined key and
    :class:`ValidationError` listing every other problem with its path.
    """
    r = _Reader()
    top = r.obj(doc, "", ("network", "units", "demands", "hours"),
                ("name", "firm_units", "regulator_estimate", "submitted_offer", "distortion_grid"))
    if top is None:
        raise ValidationError(r.errors)

    net = r.obj(top["network"], "network", ("nodes", "lines", "reference"))
    network = None
    if net is not None:
        nodes = tuple(r.string(n, f"network.nodes[{k}]") for k, n in enumerate(r.arr(net["nodes"], "network.nodes")))
        lines = []
        for k, l in enumerate(r.arr(net["lines"], "network.lines")):
            p = f"network.lines[{k}]"
            l = r.obj(l, p, ("from", "to", "susceptance", "capacity"))
            if l is not None:
                lines.append(Line(r.string(l["from"], f"{p}.from"), r.string(l["to"], f"{p}.to"),
                                  r.num(l["susceptance"], f"{p}.susceptance"),
                                  r.num(l["capacity"], f"{p}.capacity")))
        network = Network(nodes, tuple(lines), r.string(net["reference"], "network.reference"))

    units = []
    for k, u in enumerate(r.arr(top["units"], "units")):
        p = f"units[{k}]"
        u = r.obj(u, p, ("id", "node", "owner", "params", "curve"))
        if u is None:
            continue
        params = r.params(u["params"], f"{p}.params")
        if params is None:
            continue
        units.append(GeneratingUnit(r.string(u["id"], f"{p}.id"), r.string(u["node"], f"{p}.node"),
                                    r.string(u["owner"], f"{p}.owner"), params,
                                    OfferCurve(r.blocks(u["curve"], f"{p}.curve", "price"))))

    demands = []
    for k, d in enumerate(r.arr(top["demands"], "demands")):
        p = f"demands[{k}]"
        d = r.obj(d, p, ("node", "hours"), ("id",))
        if d is None:
            continue
        hours = []
        for h, dh in enumerate(r.arr(d["hours"], f"{p}.hours")):
            hp = f"{p}.hours[{h}]"
            dh = r.obj(dh, hp, (), ("fixed", "blocks"))
            if dh is None:
                continue
            fixed = r.num(dh["fixed"], f"{hp}.fixed") if "fixed" in dh else None
            blocks = r.blocks(dh["blocks"], f"{hp}.blocks", "value") if "blocks" in dh else ()
            hours.append(DemandHour(fixed, blocks))
        uid = r.string(d["id"], f"{p}.id") if "id" in d else f"demand{k}"
        demands.append(DemandBid(uid, r.string(d["node"], f"{p}.node"), tuple(hours)))

    n_hours = r.integer(top["hours"], "hours")
    if r.errors or network is None:
        raise ValidationError(r.errors)

    s = Scenario(network, tuple(units), tuple(demands), n_hours, top.get("name", ""))
    problems = validate_scenario(s, probe=False)
    if "firm_units" in top:
        listed = [r.string(x, f"firm_units[{k}]") for k, x in enumerate(r.arr(top["firm_units"], "firm_units"))]
        if sorted(listed) != sorted(s.firm_unit_ids):
            problems.append(Violation("firm_units", f"{sorted(listed)} disagrees with unit owners "
                                                    f"{sorted(s.firm_unit_ids)}"))
    if len({d.id for d in s.demands}) != len(s.demands):
        problems.append(Violation("demands", "duplicate demand ids"))

    estimate = s.truthful_offer()
    if "regulator_estimate" in top:
        estimate = r.offers(top["regulator_estimate"], "regulator_estimate")
        problems += check_offer(s, estimate, "regulator_estimate")
    submitted = s.truthful_offer()
    if "submitted_offer" in top:
        submitted = r.offers(top["submitted_offer"], "submitted_offer")
        problems += check_offer(s, submitted, "submitted_offer")

    grid = GridSpec()
    if "distortion_grid" in top:
        g = r.obj(top["distortion_grid"], "distortion_grid", (), GRID_AXES)
        if g is not None:
            axes = {k: tuple(r.num(x, f"distortion_grid.{k}[{i}]") for i, x in enumerate(r.arr(v, f"distortion_grid.{k}")))
                    for k, v in g.items()}
            grid = GridSpec(**{**grid.__dict__, **axes})
            try:
                grid.check()
            except ValueError as e:
                problems.append(Violation("distortion_grid", str(e)))
    problems += r.errors
    if problems:
        raise ValidationError(problems)
    return LoadedScenario(s, estimate, grid, submitted)


def load_scenario(path) -> LoadedScenario:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"{path}: {e.strerror or e}") from None
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except (json.JSONDecodeError, ValueError) as e:
        raise ParseError(f"{path}: {e}") from None
    return parse_document(doc)


def _reject_constant(name):
    raise ValueError(f"non-finite number {name} is not allowed")


def _offers_doc(offers: Mapping) -> dict:
    return {uid: {"params": {k: getattr(o.params, k) for k in PARAM_KEYS},
                  "curve": [{"mw": b.mw, "price": b.price} for b in o.curve.blocks]}
            for uid, o in offers.items()}


def _hour_doc(dh: DemandHour) -> dict:
    out = {}
    if dh.fixed is not None:
        out["fixed"] = dh.fixed
    if dh.blocks:
        out["blocks"] = [{"mw": b.mw, "value": b.price} for b in dh.blocks]
    return out


def scenario_document(s: Scenario, estimate: Mapping | None = None, grid: GridSpec | None = None,
                      submitted: Mapping | None = None) -> dict:
    """The JSON-ready document for ``s``; :func:`parse_document` inverts it."""
    doc = {
        "name": s.name,
        "network": {
            "nodes": list(s.network.nodes),
            "lines": [{"from": l.from_node, "to": l.to_node, "susceptance": l.susceptance,
                       "capacity": l.capacity} for l in s.network.lines],
            "reference": s.network.reference,
        },
        "units": [{"id": u.id, "node": u.node, "owner": u.owner,
                   "params": {k: getattr(u.params, k) for k in PARAM_KEYS},
                   "curve": [{"mw": b.mw, "price": b.price} for b in u.curve.blocks]} for u in s.units],
        "demands": [{"id": d.id, "node": d.node,
                     "hours": [_hour_doc(dh) for dh in d.hours]} for d in s.demands],
        "hours": s.hours,
        "firm_units": list(s.firm_unit_ids),
    }
    if estimate is not None:
        doc["regulator_estimate"] = _offers_doc(estimate)
    if submitted is not None:
        doc["submitted_offer"] = _offers_doc(submitted)
    if grid is not None:
        doc["distortion_grid"] = {k: list(getattr(grid, k)) for k in GRID_AXES}
    return doc


def emit(path, s: Scenario, estimate=None, grid=None, submitted=None):
    Path(path).write_text(json.dumps(scenario_document(s, estimate, grid, submitted), indent=2) + "\n")


def money(x) -> str:
    """Fixed six-decimal rendering; negative zero prints as zero."""
    return f"{round(float(x), 6) + 0.0:.6f}"


def write_table(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([money(v) if isinstance(v, float) else v for v in row])
