"""JSON conversion of domains, discs, chains and reports."""
import hashlib
import json

import numpy as np

from .core import Ball, HalfSpace, Polyhedral, Sublevel
from .discs import NullDisc
from .errors import InvalidDomain
from .expr import Expr, parse


def domain_from_dict(d):
    """Build a domain from ``{"kind": ..., ...}``; raises ``InvalidDomain``."""
    if not isinstance(d, dict) or "kind" not in d:
        raise InvalidDomain("domain spec must be an object with a 'kind'")
    kind = d["kind"]
    try:
        if kind == "ball":
            return Ball(np.asarray(d["center"], float), float(d["radius"]))
        if kind == "halfspace":
            return HalfSpace(np.asarray(d["normal"], float), float(d["offset"]))
        if kind == "polyhedral":
            return Polyhedral(tuple(domain_from_dict({"kind": "halfspace", **h})
                                    for h in d["halfspaces"]))
        if kind == "sublevel":
            box = np.asarray(d["box"], float)
            return Sublevel(parse(d["expr"], len(box)), box, bool(d.get("convex_hint", False)))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidDomain(f"bad {kind} spec: {e}") from e
    raise InvalidDomain(f"unknown domain kind {kind!r}")


def domain_to_dict(dom):
    if isinstance(dom, Ball):
        return {"kind": "ball", "center": dom.center.tolist(), "radius": float(dom.radius)}
    if isinstance(dom, HalfSpace):
        return {"kind": "halfspace", "normal": dom.normal.tolist(), "offset": float(dom.offset)}
    if isinstance(dom, Polyhedral):
        return {"kind": "polyhedral",
                "halfspaces": [{"normal": h.normal.tolist(), "offset": float(h.offset)}
                               for h in dom.halfspaces]}
    if isinstance(dom, Sublevel):
        return {"kind": "sublevel", "expr": dom.field.text, "box": dom.box.tolist(),
                "convex_hint": bool(dom.convex_hint)}
    raise InvalidDomain(f"unknown domain type {type(dom).__name__}")


def load_domain(path):
    with open(path, encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as e:
            raise InvalidDomain(f"malformed JSON in {path}: {e}") from e
    return domain_from_dict(spec)


def disc_to_dict(d: NullDisc):
    return {"center": d.center.tolist(),
            "coeffs_re": d.coeffs.real.tolist(), "coeffs_im": d.coeffs.imag.tolist()}


def disc_from_dict(obj):
    C = np.asarray(obj["coeffs_re"], float) + 1j * np.asarray(obj["coeffs_im"], float)
    return NullDisc(np.asarray(obj["center"], float), C)


def chain_to_dict(ch):
    return {"total": ch.total,
            "links": [{"a": a, "disc": disc_to_dict(d)} for d, a in ch.links]}


def to_plain(v):
    """Recursively convert numpy and library objects to JSON-ready values."""
    if hasattr(v, "to_dict"):
        return to_plain(v.to_dict())
    if isinstance(v, NullDisc):
        return disc_to_dict(v)
    if isinstance(v, Expr):
        return v.text
    if isinstance(v, np.ndarray):
        return to_plain(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(v)
        return x if np.isfinite(x) else repr(x)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, dict):
        return {str(k): to_plain(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_plain(w) for w in v]
    return v


def dumps(obj):
    """Canonical one-line JSON (sorted keys) for deterministic output."""
    return json.dumps(to_plain(obj), sort_keys=True, separators=(",", ":"))


def config_hash(obj):
    return hashlib.sha256(dumps(obj).encode()).hexdigest()[:16]
