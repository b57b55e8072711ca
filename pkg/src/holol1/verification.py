"""Harness checking ``int eta g dV = int delta^k omega_{k,g} eta dV`` and the
boundary-term behaviour used to prove it."""
from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

from . import field_algebra as fa
from .geometry import DEFAULT_COLLAR, DomainModel, make_cutoff, make_domain
from .holo_catalog import HoloTestFunction, g_expression, g_values, get_eta, reference_integral
from .quadrature import (IntegralResult, NonConvergenceWarning, QuadratureConfig, integrate,
                         integrate_epsilon_shell)
from .weights import Variant, WeightProgram, inductive_weight, loglog_slope

REL_FLOOR = 1e-14

SMOOTH_TOL = 1e-8
SINGULAR_TOL = 1e-4
BALL_TOL = 1e-3

SMOOTH_QUAD = QuadratureConfig(rel_tol=1e-10, abs_tol=1e-12)
SINGULAR_QUAD = QuadratureConfig(rel_tol=1e-7, abs_tol=1e-10)
BALL_QUAD = QuadratureConfig(rel_tol=1e-5, abs_tol=1e-6, base_rule=12)


@lru_cache(maxsize=None)
def get_domain(name: str = "disc", collar_inner: float = DEFAULT_COLLAR[0],
               collar_outer: float = DEFAULT_COLLAR[1]) -> DomainModel:
    return make_domain(name, collar_inner, collar_outer)


@lru_cache(maxsize=None)
def _weight(domain: DomainModel, k: int, g_id: str, variant: Variant) -> WeightProgram:
    return inductive_weight(k, g_expression(g_id, domain), domain, make_cutoff(domain),
                            variant, g_id)


def weight_program(domain: DomainModel, k: int, g_id: str,
                   variant: Variant | str = Variant.CORRECTED) -> WeightProgram:
    return _weight(domain, int(k), g_id, Variant.parse(variant))


@lru_cache(maxsize=None)
def _weighted_field(domain: DomainModel, k: int, g_id: str, variant: Variant) -> fa.Expr:
    return _weight(domain, k, g_id, variant).weighted()


@dataclass(frozen=True)
class IdentityConfig:
    """Pass thresholds and cubature settings for one identity check.

    ``None`` fields take the defaults of the test function's class (smooth,
    boundary-singular, or ball).
    """

    tol_rel: Optional[float] = None
    tol_abs: Optional[float] = None
    quadrature: Optional[QuadratureConfig] = None

    def resolve(self, eta: HoloTestFunction, domain: DomainModel):
        if domain.n == 2:
            tol, quad = BALL_TOL, BALL_QUAD
        elif eta.singular:
            tol, quad = SINGULAR_TOL, SINGULAR_QUAD
        else:
            tol, quad = SMOOTH_TOL, SMOOTH_QUAD
        tol_rel = self.tol_rel if self.tol_rel is not None else tol
        tol_abs = self.tol_abs if self.tol_abs is not None else tol * math.pi
        quad = self.quadrature if self.quadrature is not None else quad
        if tol_rel <= 0 or tol_abs <= 0:
            raise ValueError("tolerances must be positive")
        if eta.singularities:
            quad = quad.with_hints(eta.singularities)
        return tol_rel, tol_abs, quad


@dataclass(frozen=True)
class IdentityReport:
    domain: str
    k: int
    g: str
    eta: str
    variant: str
    lhs: complex
    lhs_source: str
    rhs: complex
    rhs_error_estimate: float
    abs_err: float
    rel_err: float
    passed: bool
    runtime: float
    converged: bool = True
    tol_rel: float = 0.0
    tol_abs: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        for key in ("lhs", "rhs"):
            z = d[key]
            d[key] = {"re": z.real, "im": z.imag}
        return d


class _Integrand:
    """``field(X) * eta(X)``, using accurate offsets near eta's singularity."""

    def __init__(self, field_: fa.Expr | None, eta: HoloTestFunction, g_id: str | None = None,
                 offsets: bool = True):
        self.field = field_
        self.eta = eta
        self.g_id = g_id
        self.wants_offsets = offsets and eta.eval_offset is not None

    def __call__(self, X, D=None):
        v = self.eta.eval_offset(X, D) if D is not None else self.eta.eval(X)
        if self.g_id is not None:
            v = v * g_values(self.g_id, X)
        if self.field is not None:
            v = v * fa.evaluate_array(self.field, X)
        return v


def _integrate(f, domain: DomainModel, cfg: QuadratureConfig) -> IntegralResult:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        return integrate(f, domain, cfg)


def lhs_by_quadrature(eta: HoloTestFunction, g_id: str, domain: DomainModel,
                      cfg: QuadratureConfig) -> IntegralResult:
    """``int eta g dV`` by cubature, with ``g`` evaluated directly (not via the IR)."""
    return _integrate(_Integrand(None, eta, g_id), domain, cfg)


def verify_identity(k: int, g_id: str, eta_id: str, variant: Variant | str = Variant.CORRECTED,
                    cfg: IdentityConfig = IdentityConfig(),
                    domain: DomainModel | None = None) -> IdentityReport:
    t0 = time.perf_counter()
    domain = domain or get_domain()
    variant = Variant.parse(variant)
    eta = get_eta(eta_id, domain)
    if not eta.l1:
        raise ValueError(f"{eta_id} is not integrable on the {domain.name}")
    tol_rel, tol_abs, quad = cfg.resolve(eta, domain)
    converged = True
    lhs = reference_integral(eta, g_id, domain)
    source = "closed_form"
    if lhs is None:
        res = lhs_by_quadrature(eta, g_id, domain, replace(quad, rel_tol=quad.rel_tol / 10))
        lhs, source, converged = res.value, "oracle_quadrature", res.converged
    F = _weighted_field(domain, int(k), g_id, variant)
    rhs_res = _integrate(_Integrand(F, eta), domain, quad)
    converged = converged and rhs_res.converged
    abs_err = abs(rhs_res.value - lhs)
    rel_err = abs_err / max(abs(lhs), REL_FLOOR)
    if abs(lhs) == 0.0:
        passed = abs_err <= tol_abs
    else:
        passed = rel_err <= tol_rel
    return IdentityReport(domain.name, int(k), g_id, eta.id, variant.value, complex(lhs), source,
                          rhs_res.value, rhs_res.error_estimate, abs_err, rel_err,
                          bool(passed and converged), time.perf_counter() - t0, converged,
                          tol_rel, tol_abs)


@dataclass(frozen=True)
class VariantComparison:
    corrected: IdentityReport
    paper_literal: IdentityReport
    gap: float
    combined_error: float
    significant: bool
    definitive: bool


def variant_discrimination(k: int, g_id: str, eta_id: str,
                           cfg: IdentityConfig = IdentityConfig(),
                           domain: DomainModel | None = None) -> VariantComparison:
    """Run both recursions; the gap is significant when it exceeds 10x the error bars."""
    if k < 2:
        raise ValueError("the variants coincide for k = 1")
    c = verify_identity(k, g_id, eta_id, Variant.CORRECTED, cfg, domain)
    p = verify_identity(k, g_id, eta_id, Variant.PAPER_LITERAL, cfg, domain)
    gap = abs(c.rhs - p.rhs)
    comb = c.rhs_error_estimate + p.rhs_error_estimate
    significant = gap > 10.0 * comb
    # a flag is definitive unless the gap sits between 1x and 10x the error bars
    definitive = significant or gap <= comb
    return VariantComparison(c, p, gap, comb, significant, definitive)


# ----------------------------------------------------------------------------
# boundary terms of the integration by parts


@dataclass(frozen=True)
class DecayRow:
    eps: float
    i2: complex
    eps_i2: complex
    # i3 = i int [zeta g T(eta) - T(zeta g) eta] = i3_eta_part + i3_cutoff_part
    i3: complex
    i3_eta_part: complex
    i3_cutoff_part: complex
    # i int T(zeta g eta), the divergence-free part that integrates to ~0
    i3_tangential_total: complex
    error_estimate: float


@dataclass(frozen=True)
class DecayTable:
    eta: str
    g: str
    rows: tuple[DecayRow, ...]
    eps_i2_slope: float
    eps_i2_strictly_decreasing: bool


class _FieldTimesFn:
    def __init__(self, field_: fa.Expr, fn):
        self.field, self.fn = field_, fn
        self.wants_offsets = False

    def __call__(self, X):
        return fa.evaluate_array(self.field, X) * self.fn(X)


def _tangential_eta(eta: HoloTestFunction, domain: DomainModel):
    """``T eta = delta_y eta_x - delta_x eta_y`` with ``eta_x = eta'``, ``eta_y = i eta'``."""
    gx, gy = domain.grad_delta

    def T(X):
        d = eta.deriv(X)
        return fa.evaluate_array(gy, X) * d - fa.evaluate_array(gx, X) * 1j * d
    return T


def boundary_term_decay(eta_id: str, g_id: str, eps_list: Sequence[float],
                        cfg: QuadratureConfig = QuadratureConfig(rel_tol=1e-8, abs_tol=1e-11),
                        domain: DomainModel | None = None) -> DecayTable:
    """Tabulate ``I2(eps) = int_{Omega_eps} N(zeta g) eta`` and the ``I3(eps)`` split.

    ``eps`` may range over ``[0, 1/2]``; values at or above the inner collar width
    cut through the support of ``N(zeta)``.
    """
    domain = domain or get_domain()
    if domain.n != 1:
        raise ValueError("boundary-term decay is implemented on the disc")
    eta = get_eta(eta_id, domain)
    if eta.deriv is None:
        raise ValueError(f"{eta_id} has no derivative")
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    zeta = make_cutoff(domain).zeta
    zg = fa.mul(zeta, g_expression(g_id, domain))
    Nzg = fa.apply_N(zg, domain)
    Tzg = fa.apply_T(zg, domain)
    Teta = _tangential_eta(eta, domain)
    cfg = cfg.with_hints(eta.singularities)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        for eps in eps_list:
            i2 = integrate_epsilon_shell(_FieldTimesFn(Nzg, eta.eval), eps, cfg, domain)
            i3 = integrate_epsilon_shell(_FieldTimesFn(zg, Teta), eps, cfg, domain)
            rem = integrate_epsilon_shell(_FieldTimesFn(Tzg, eta.eval), eps, cfg, domain)
            eta_part = 1j * i3.value
            cut_part = -1j * rem.value
            rows.append(DecayRow(eps, i2.value, eps * i2.value, eta_part + cut_part, eta_part,
                                 cut_part, eta_part - cut_part,
                                 i2.error_estimate + i3.error_estimate + rem.error_estimate))
    mags = [abs(r.eps_i2) for r in rows]
    slope = loglog_slope(eps_list, mags) if len(rows) > 1 and min(mags) > 0 else float("nan")
    dec = all(b < a for a, b in zip(mags, mags[1:]))
    return DecayTable(eta.id, g_id, tuple(rows), slope, dec)


# ----------------------------------------------------------------------------
# suites


@dataclass(frozen=True)
class SuiteCell:
    domain: str
    k: int
    g: str
    eta: str
    variant: str


@dataclass
class SuiteReport:
    reports: list[IdentityReport] = field(default_factory=list)
    errors: list[tuple[SuiteCell, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors and all(r.passed for r in self.reports)


def run_cells(cells: Sequence[SuiteCell], cfg: IdentityConfig = IdentityConfig(),
              workers: int = 1, collar=DEFAULT_COLLAR) -> SuiteReport:
    """Evaluate suite cells, possibly concurrently; results keep the input order.

    Weight programs are built serially first so expression construction never
    overlaps with parallel evaluation.
    """
    out = SuiteReport()
    for c in cells:
        dom = get_domain(c.domain, *collar)
        F = _weighted_field(dom, c.k, c.g, Variant.parse(c.variant))
        fa.node_count(F)

    def run(c: SuiteCell):
        dom = get_domain(c.domain, *collar)
        return verify_identity(c.k, c.g, c.eta, c.variant, cfg, dom)

    if workers <= 1:
        results = [run(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, cells))
    out.reports.extend(results)
    return out
