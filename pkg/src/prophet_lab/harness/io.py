"""JSON formats for instances, IRSGs and experiment configs.

Instance file::

    {"m": 2,
     "bidders": [{"support": [{"q": 0.5, "valuation": {"type": "additive", "weights": [1, 2]}},
                              {"q": 0.5, "valuation": {"type": "xos", "clauses": [[1, 0], [0, 1]]}}]}]}

Valuation types and their fields: ``additive``, ``unit_demand`` and
``sqrt_additive`` take ``weights``; ``xos`` takes ``clauses``; ``table`` takes
``values`` (one entry per item bitmask, length ``2**m``).

IRSG file::

    {"bidders": [{"rsg": [{"probs": [0.5, 0.5], "scores": [[0, 1], [1, 1]]}]}]}

with one ``rsg`` entry per support valuation of the matching bidder.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import MalformedSpecError, ValidationError
from ..rsg import IRSG, ScoreDistribution
from ..valuations import (
    Additive,
    BidderDistribution,
    Instance,
    SqrtAdditive,
    Table,
    UnitDemand,
    Valuation,
    Xos,
)


class ParseError(MalformedSpecError):
    """A file is not valid JSON or does not match its schema."""


def read_json(path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read file ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _field(obj: Any, key: str, where: str, kind: type | tuple[type, ...] | None = None) -> Any:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    if key not in obj:
        raise ParseError(f"{where}.{key}: missing field")
    value = obj[key]
    if kind is not None and (not isinstance(value, kind) or isinstance(value, bool)):
        raise ParseError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return value


def _numbers(value: Any, where: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        raise ParseError(f"{where}: expected a list of numbers")
    return tuple(float(x) for x in value)


_WEIGHTED = {"additive": Additive, "unit_demand": UnitDemand, "sqrt_additive": SqrtAdditive}


def valuation_from_dict(spec: Any, where: str = "valuation") -> Valuation:
    kind = _field(spec, "type", where, str)
    if kind in _WEIGHTED:
        return _WEIGHTED[kind](_numbers(_field(spec, "weights", where), f"{where}.weights"))
    if kind == "xos":
        clauses = _field(spec, "clauses", where, list)
        return Xos(tuple(_numbers(c, f"{where}.clauses[{k}]") for k, c in enumerate(clauses)))
    if kind == "table":
        return Table(_numbers(_field(spec, "values", where), f"{where}.values"))
    raise ParseError(f"{where}.type: unknown valuation type {kind!r}")


def valuation_to_dict(v: Valuation) -> dict:
    if isinstance(v, Xos):
        return {"type": "xos", "clauses": [list(c) for c in v.clauses]}
    if isinstance(v, Table):
        return {"type": "table", "values": list(v.values)}
    return {"type": v.kind, "weights": list(v.weights)}


def instance_from_dict(data: Any, check_class: str | None = None) -> Instance:
    """Build and validate an :class:`Instance`; errors name the offending bidder."""
    m = _field(data, "m", "instance", int)
    bidders = _field(data, "bidders", "instance", list)
    dists = []
    for i, b in enumerate(bidders):
        where = f"bidders[{i}]"
        support = _field(b, "support", where, list)
        pairs = []
        for k, entry in enumerate(support):
            w = f"{where}.support[{k}]"
            q = _field(entry, "q", w, (int, float))
            try:
                v = valuation_from_dict(_field(entry, "valuation", w), f"{w}.valuation")
            except ParseError:
                raise
            except ValidationError as exc:
                raise type(exc)(f"bidder {i}, support {k}: {exc}") from exc
            pairs.append((float(q), v))
        try:
            dists.append(BidderDistribution(tuple(pairs)))
        except ValidationError as exc:
            raise type(exc)(f"bidder {i}: {exc}") from exc
    inst = Instance(m, tuple(dists))
    if check_class is not None:
        inst.check_all(check_class)
    return inst


def instance_to_dict(inst: Instance) -> dict:
    return {
        "m": inst.m,
        "bidders": [
            {"support": [{"q": q, "valuation": valuation_to_dict(v)} for q, v in d.support]}
            for d in inst.bidders
        ],
    }


def load_instance(path, check_class: str | None = None) -> Instance:
    """Read an instance file.  ``check_class`` runs a class check on every valuation."""
    return instance_from_dict(read_json(path), check_class)


def irsg_from_dict(data: Any) -> IRSG:
    bidders = _field(data, "bidders", "irsg", list)
    gens = []
    for i, b in enumerate(bidders):
        rsg = []
        for k, sd in enumerate(_field(b, "rsg", f"bidders[{i}]", list)):
            w = f"bidders[{i}].rsg[{k}]"
            probs = _numbers(_field(sd, "probs", w), f"{w}.probs")
            scores = _field(sd, "scores", w, list)
            rows = [_numbers(r, f"{w}.scores[{j}]") for j, r in enumerate(scores)]
            try:
                rsg.append(ScoreDistribution(np.array(probs), np.array(rows, dtype=float).reshape(len(rows), -1)))
            except ValidationError as exc:
                raise type(exc)(f"bidder {i}, support {k}: {exc}") from exc
        gens.append(tuple(rsg))
    return IRSG(tuple(gens))


def irsg_to_dict(g: IRSG) -> dict:
    return {
        "bidders": [
            {"rsg": [{"probs": sd.probs.tolist(), "scores": sd.scores.tolist()} for sd in rsg]}
            for rsg in g.generators
        ]
    }


def load_irsg(path, inst: Instance | None = None) -> IRSG:
    g = irsg_from_dict(read_json(path))
    if inst is not None:
        g.check_aligned(inst)
    return g
