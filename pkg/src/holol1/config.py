"""Run configuration: a strict TOML document describing a suite matrix.

Example::

    seed = 0
    workers = 2
    out = "reports"

    [domain]
    name = "disc"
    collar_inner = 0.05
    collar_outer = 0.15

    [matrix]
    k = [1, 2, 3]
    g = ["one", "conj_pow:1"]
    eta = ["const", "exp"]
    variant = ["corrected"]

    [tolerance]
    rel = 1e-8

    [quadrature]
    rel_tol = 1e-10

    [weights]
    dump = true
    points = 64
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Any, Optional

import tomli

from .geometry import DEFAULT_COLLAR, DOMAIN_IDS, make_domain
from .holo_catalog import UnknownId, get_eta, parse_g
from .quadrature import QuadratureConfig
from .verification import IdentityConfig, SuiteCell
from .weights import Variant

OUT_ENV = "HOLOL1_OUT"

DEFAULT_K = (1, 2, 3)
DEFAULT_G = ("one", "conj_pow:1", "conj_pow:2", "exp_x1")
DEFAULT_ETA = ("const", *(f"pow:{m}" for m in range(1, 7)), "exp", "rat2")
DEFAULT_VARIANTS = ("corrected",)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, "holol1-reports")


@dataclass(frozen=True)
class RunConfig:
    domain: str = "disc"
    collar_inner: float = DEFAULT_COLLAR[0]
    collar_outer: float = DEFAULT_COLLAR[1]
    k: tuple[int, ...] = DEFAULT_K
    g: tuple[str, ...] = DEFAULT_G
    eta: tuple[str, ...] = DEFAULT_ETA
    variants: tuple[str, ...] = DEFAULT_VARIANTS
    tol_rel: Optional[float] = None
    tol_abs: Optional[float] = None
    quadrature: Optional[QuadratureConfig] = None
    out: str = field(default_factory=default_out_dir)
    seed: int = 0
    workers: int = 1
    dump_weights: bool = False
    weight_points: int = 64

    def cells(self) -> list[SuiteCell]:
        return [SuiteCell(self.domain, k, g, e, v)
                for k in self.k for g in self.g for e in self.eta for v in self.variants]

    def identity_config(self) -> IdentityConfig:
        return IdentityConfig(self.tol_rel, self.tol_abs, self.quadrature)

    @property
    def collar(self) -> tuple[float, float]:
        return (self.collar_inner, self.collar_outer)


_SCHEMA: dict[str, Any] = {
    "seed": int, "workers": int, "out": str,
    "domain": {"name": str, "collar_inner": float, "collar_outer": float},
    "matrix": {"k": list, "g": list, "eta": list, "variant": list},
    "tolerance": {"rel": float, "abs": float},
    "quadrature": {"rel_tol": float, "abs_tol": float, "max_subdivisions": int,
                   "base_rule": int, "theta_panels": int, "corner_grading": int},
    "weights": {"dump": bool, "points": int},
}


def _line_of(text: str, path: str) -> int | None:
    """Best-effort line number of the key at ``path`` (``table.key``)."""
    *tables, key = path.split(".")
    lines = text.splitlines()
    start = 0
    if tables:
        hdr = re.compile(r"^\s*\[\s*" + re.escape(tables[0]) + r"\s*\]")
        for i, ln in enumerate(lines):
            if hdr.match(ln):
                start = i
                break
    pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for i in range(start, len(lines)):
        if pat.match(lines[i]):
            return i + 1
    return None


def _check_types(doc: dict, schema: dict, text: str, prefix: str = "") -> None:
    for key, val in doc.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown key {path!r}", _line_of(text, path))
        want = schema[key]
        if isinstance(want, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path!r} must be a table", _line_of(text, path))
            _check_types(val, want, text, path + ".")
            continue
        ok = isinstance(val, want) and not (want is int and isinstance(val, bool))
        if want is float and isinstance(val, int) and not isinstance(val, bool):
            ok = True
        if not ok:
            raise ConfigError(f"{path!r} must be of type {want.__name__}", _line_of(text, path))


def parse_config(text: str) -> RunConfig:
    """Strictly parse a configuration document, filling defaults."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    _check_types(doc, _SCHEMA, text)

    def fail(msg, path):
        raise ConfigError(msg, _line_of(text, path))

    dom = doc.get("domain", {})
    mat = doc.get("matrix", {})
    tol = doc.get("tolerance", {})
    kw: dict[str, Any] = {}
    name = dom.get("name", "disc")
    if name not in DOMAIN_IDS:
        fail(f"unknown domain {name!r}", "domain.name")
    kw["domain"] = name
    ci = float(dom.get("collar_inner", DEFAULT_COLLAR[0]))
    co = float(dom.get("collar_outer", DEFAULT_COLLAR[1]))
    try:
        domain = make_domain(name, ci, co)
    except ValueError as exc:
        fail(str(exc), "domain.collar_inner")
    kw["collar_inner"], kw["collar_outer"] = ci, co

    ks = mat.get("k", list(DEFAULT_K))
    if any(not isinstance(k, int) or isinstance(k, bool) or k < 1 for k in ks):
        fail("matrix.k entries must be integers >= 1", "matrix.k")
    kw["k"] = tuple(ks)
    for key, default in (("g", DEFAULT_G), ("eta", DEFAULT_ETA), ("variant", DEFAULT_VARIANTS)):
        vals = mat.get(key, list(default))
        if any(not isinstance(v, str) for v in vals):
            fail(f"matrix.{key} entries must be strings", f"matrix.{key}")
        for v in vals:
            try:
                if key == "g":
                    parse_g(v)
                elif key == "eta":
                    if not get_eta(v, domain).l1:
                        fail(f"test function {v!r} is not integrable", "matrix.eta")
                else:
                    Variant.parse(v)
            except (UnknownId, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                fail(f"matrix.{key}: {exc}", f"matrix.{key}")
        kw["variants" if key == "variant" else key] = tuple(
            Variant.parse(v).value for v in vals) if key == "variant" else tuple(vals)

    for src, dst in (("rel", "tol_rel"), ("abs", "tol_abs")):
        if src in tol:
            if tol[src] <= 0:
                fail(f"tolerance.{src} must be positive", f"tolerance.{src}")
            kw[dst] = float(tol[src])
    if "quadrature" in doc:
        try:
            kw["quadrature"] = QuadratureConfig(**doc["quadrature"])
        except ValueError as exc:
            fail(f"quadrature: {exc}", "quadrature." + next(iter(doc["quadrature"]), ""))
    if "out" in doc:
        kw["out"] = doc["out"]
    if "seed" in doc:
        kw["seed"] = doc["seed"]
    workers = doc.get("workers", 1)
    if workers < 1:
        fail("workers must be >= 1", "workers")
    kw["workers"] = workers
    w = doc.get("weights", {})
    kw["dump_weights"] = w.get("dump", False)
    pts = w.get("points", 64)
    if pts < 2:
        fail("weights.points must be >= 2", "weights.points")
    kw["weight_points"] = pts
    return RunConfig(**kw)
