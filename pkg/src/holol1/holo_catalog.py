"""Holomorphic test functions, integrability metadata and reference integrals.

Ids understood on the disc: ``const`` (or ``const:c``), ``pow:m``, ``exp``,
``rat2`` (``1/(z-2)``) and ``sing:a`` (``(1-z)^{-a}``, principal branch, cut
along ``[1, inf)``).  On the ball: ``const`` and ``mono:m,p`` (``z1^m z2^p``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .geometry import DomainModel

ArrayFn = Callable[[np.ndarray], np.ndarray]

DISC_CATALOG_IDS = ("const", *(f"pow:{m}" for m in range(7)), "rat2", "exp",
                    "sing:0.5", "sing:1.5", "sing:1.9")
BALL_CATALOG_IDS = ("const", *(f"mono:{m},{p}" for m in range(4) for p in range(4)
                               if 0 < m + p <= 3))


class UnknownId(ValueError):
    pass


def _z(X: np.ndarray, j: int = 1) -> np.ndarray:
    return X[:, 2 * j - 2] + 1j * X[:, 2 * j - 1]


@dataclass(frozen=True, eq=False)
class HoloTestFunction:
    id: str
    eval: ArrayFn
    deriv: Optional[ArrayFn] = None
    singularities: tuple[complex, ...] = ()
    l1: bool = True
    l2: bool = True
    taylor_coeff: Optional[Callable[[int], complex]] = None
    # (X, D) -> values, with D = z - singularity computed without cancellation
    eval_offset: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    value_at_origin: complex = 0j
    n: int = 1

    @property
    def singular(self) -> bool:
        return bool(self.singularities)

    def __call__(self, X):
        return self.eval(np.atleast_2d(X))


def _const(c: complex, n: int) -> HoloTestFunction:
    return HoloTestFunction(
        "const" if c == 1 else f"const:{c.real:g}" if c.imag == 0 else f"const:{c}",
        eval=lambda X: np.full(len(X), c, dtype=complex),
        deriv=lambda X: np.zeros(len(X), dtype=complex),
        taylor_coeff=lambda m: c if m == 0 else 0j,
        value_at_origin=c, n=n)


def _power(m: int) -> HoloTestFunction:
    return HoloTestFunction(
        f"pow:{m}",
        eval=lambda X: _z(X) ** m + 0j,
        deriv=(lambda X: m * _z(X) ** (m - 1) + 0j) if m else (lambda X: np.zeros(len(X), complex)),
        taylor_coeff=lambda j: 1.0 + 0j if j == m else 0j,
        value_at_origin=1.0 + 0j if m == 0 else 0j)


def _rat2() -> HoloTestFunction:
    return HoloTestFunction(
        "rat2",
        eval=lambda X: 1.0 / (_z(X) - 2.0),
        deriv=lambda X: -1.0 / (_z(X) - 2.0) ** 2,
        taylor_coeff=lambda m: complex(-(0.5 ** (m + 1))),
        value_at_origin=-0.5 + 0j)


def _exp() -> HoloTestFunction:
    return HoloTestFunction(
        "exp",
        eval=lambda X: np.exp(_z(X)),
        deriv=lambda X: np.exp(_z(X)),
        taylor_coeff=lambda m: complex(1.0 / math.factorial(m)),
        value_at_origin=1.0 + 0j)


def binomial_series_coeff(a: float, m: int) -> float:
    """Taylor coefficient ``Gamma(a+m) / (Gamma(a) m!)`` of ``(1-z)^{-a}``."""
    return math.exp(gammaln(a + m) - gammaln(a) - gammaln(m + 1.0))


def _sing(a: float) -> HoloTestFunction:
    if a <= 0:
        raise UnknownId(f"sing:a needs a > 0, got {a}")

    def offset(X, D):
        return (-D) ** (-a)

    return HoloTestFunction(
        f"sing:{a:g}",
        eval=lambda X: (1.0 - _z(X)) ** (-a),
        deriv=lambda X: a * (1.0 - _z(X)) ** (-a - 1.0),
        singularities=(1.0 + 0j,),
        l1=a < 2.0,
        l2=a < 1.0,
        taylor_coeff=lambda m: complex(binomial_series_coeff(a, m)),
        eval_offset=offset,
        value_at_origin=1.0 + 0j)


def _mono(m: int, p: int) -> HoloTestFunction:
    return HoloTestFunction(
        f"mono:{m},{p}",
        eval=lambda X: _z(X, 1) ** m * _z(X, 2) ** p + 0j,
        value_at_origin=1.0 + 0j if m == p == 0 else 0j,
        n=2)


def get_eta(eta_id: str, domain: DomainModel) -> HoloTestFunction:
    """Parse an id into a test function for ``domain``; raises :class:`UnknownId`."""
    s = eta_id.strip()
    head, _, arg = s.partition(":")
    try:
        if head == "const":
            return _const(complex(arg) if arg else 1.0 + 0j, domain.n)
        if domain.n == 1:
            if head == "pow" and arg:
                m = int(arg)
                if m < 0:
                    raise UnknownId(eta_id)
                return _power(m)
            if s == "rat2":
                return _rat2()
            if s == "exp":
                return _exp()
            if head == "sing" and arg:
                return _sing(float(arg))
        else:
            if head == "mono" and arg:
                m, p = (int(v) for v in arg.split(","))
                if m < 0 or p < 0:
                    raise UnknownId(eta_id)
                return _mono(m, p)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, UnknownId):
            raise
        raise UnknownId(f"malformed test-function id {eta_id!r}") from exc
    raise UnknownId(f"unknown test-function id {eta_id!r} for domain {domain.name!r}")


def catalog(domain: DomainModel) -> list[HoloTestFunction]:
    ids = DISC_CATALOG_IDS if domain.n == 1 else BALL_CATALOG_IDS
    return [get_eta(i, domain) for i in ids]


# ----------------------------------------------------------------------------
# multipliers g


def parse_g(g_id: str) -> tuple[str, int]:
    s = g_id.strip()
    if s == "one":
        return "one", 0
    if s == "exp_x1":
        return "exp_x1", 0
    head, _, arg = s.partition(":")
    if head in ("conj_pow", "pow") and arg:
        try:
            p = int(arg)
        except ValueError:
            raise UnknownId(f"malformed multiplier id {g_id!r}") from None
        if p < 0:
            raise UnknownId(f"negative power in {g_id!r}")
        return head, p
    raise UnknownId(f"unknown multiplier id {g_id!r}")


def g_expression(g_id: str, domain: DomainModel):
    """The multiplier as a field expression (in the first complex coordinate)."""
    from . import field_algebra as fa

    kind, p = parse_g(g_id)
    x, y = fa.coord(1), fa.coord(2)
    if kind == "one":
        return fa.ONE
    if kind == "exp_x1":
        return fa.exp(x)
    if kind == "conj_pow":
        return fa.power(fa.sub(x, fa.scale(1j, y)), p)
    return fa.power(fa.add(x, fa.scale(1j, y)), p)


def g_values(g_id: str, X: np.ndarray) -> np.ndarray:
    """Direct numerical evaluation of the multiplier (independent of the IR)."""
    kind, p = parse_g(g_id)
    z = _z(X)
    if kind == "one":
        return np.ones(len(X), dtype=complex)
    if kind == "exp_x1":
        return np.exp(X[:, 0]) + 0j
    if kind == "conj_pow":
        return np.conj(z) ** p
    return z ** p


# ----------------------------------------------------------------------------
# reference integrals and checks


def reference_integral(eta: HoloTestFunction, g_id: str, domain: DomainModel) -> Optional[complex]:
    """Closed-form ``int eta g dV`` where one is known, else None."""
    kind, p = parse_g(g_id)
    if kind == "one":
        return complex(domain.volume * eta.value_at_origin)
    if kind == "conj_pow" and domain.n == 1 and eta.taylor_coeff is not None:
        return complex(math.pi / (p + 1) * eta.taylor_coeff(p))
    return None


def _fd_partials(f: ArrayFn, X: np.ndarray, h: float = 1e-3) -> list[np.ndarray]:
    """Fourth-order central differences in each real coordinate."""
    out = []
    for j in range(X.shape[1]):
        e = np.zeros(X.shape[1])
        e[j] = h
        out.append((-f(X + 2 * e) + 8 * f(X + e) - 8 * f(X - e) + f(X - 2 * e)) / (12 * h))
    return out


def cauchy_riemann_residual(eta: HoloTestFunction, domain: DomainModel,
                            samples: int = 200, seed: int = 0, max_radius: float = 0.6) -> float:
    """Max relative ``|d eta / d zbar|`` by finite differences at interior samples."""
    from .geometry import sample_domain

    X = sample_domain(domain, samples, seed) * max_radius
    d = _fd_partials(eta.eval, X)
    worst = 0.0
    for j in range(domain.n):
        dx, dy = d[2 * j], d[2 * j + 1]
        res = 0.5 * np.abs(dx + 1j * dy) / np.maximum(1.0, np.abs(dx))
        worst = max(worst, float(res.max()))
    return worst


def taylor_by_cauchy(eta: HoloTestFunction, m: int, radius: float = 0.5, nodes: int = 128) -> complex:
    """``a_m`` by the trapezoidal Cauchy integral on ``|z| = radius``."""
    th = 2 * np.pi * np.arange(nodes) / nodes
    X = np.stack([radius * np.cos(th), radius * np.sin(th)], axis=1)
    vals = eta.eval(X) * np.exp(-1j * m * th)
    return complex(vals.mean() / radius ** m)


@dataclass(frozen=True)
class HolomorphyReport:
    eta_id: str
    samples: int
    max_residual: float
    method: str


def holomorphy_relation_check(eta: HoloTestFunction, domain: DomainModel,
                              samples, method: str = "derivative") -> HolomorphyReport:
    """Max over ``samples`` of ``|N eta - i T eta|``.

    ``method="derivative"`` uses ``eta_x = eta'``, ``eta_y = i eta'``;
    ``method="finite_difference"`` differentiates ``eta.eval`` numerically and
    so does not presuppose the Cauchy-Riemann equations.
    """
    from . import field_algebra as fa

    if domain.n != 1:
        raise ValueError("the relation check is implemented for n = 1")
    X = np.atleast_2d(np.asarray(samples, float))
    gx, gy = (fa.evaluate_array(e, X).real for e in domain.grad_delta)
    if method == "derivative":
        if eta.deriv is None:
            raise ValueError(f"{eta.id} has no derivative")
        d = eta.deriv(X)
        ex, ey = d, 1j * d
    elif method == "finite_difference":
        ex, ey = _fd_partials(eta.eval, X)
    else:
        raise ValueError(f"unknown method {method!r}")
    N = gx * ex + gy * ey
    T = gy * ex - gx * ey
    return HolomorphyReport(eta.id, len(X), float(np.max(np.abs(N - 1j * T))), method)
