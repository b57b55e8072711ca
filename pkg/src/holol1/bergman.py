"""Bergman projection on the unit disc and the smoothing-ratio experiment.

The monomials ``z^m`` are orthogonal in ``L^2(disc)`` with ``|z^m|^2 = pi/(m+1)``,
so ``B f = sum_m a_m z^m`` with ``a_m = (f, z^m) / |z^m|^2``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy.special import betaln

from . import field_algebra as fa
from .geometry import DomainModel, make_disc_domain
from .holo_catalog import g_values, parse_g
from .quadrature import QuadratureConfig, integrate_disc

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BergmanConfig:
    """Fixed polar tensor rule: Gauss-Legendre in ``r``, trapezoid in ``theta``.

    Exact for polynomial integrands of total degree below both node budgets.
    """

    max_mode: int = 32
    radial_nodes: int = 64
    angular_nodes: int = 256

    def __post_init__(self):
        if self.max_mode < 0:
            raise ValueError("max_mode must be >= 0")
        if self.radial_nodes < 1 or self.angular_nodes <= 2 * self.max_mode:
            raise ValueError("node counts too small for the requested modes")


@dataclass(frozen=True)
class DiscBergmanBasis:
    max_mode: int = 32

    @property
    def norms_sq(self) -> np.ndarray:
        return math.pi / (np.arange(self.max_mode + 1) + 1.0)

    def evaluate(self, coeffs, X) -> np.ndarray:
        z = X[:, 0] + 1j * X[:, 1]
        out = np.zeros(len(X), dtype=complex)
        for a in reversed(np.asarray(coeffs, dtype=complex)):
            out = out * z + a
        return out


@dataclass(frozen=True)
class Monomial:
    """``c * conj(z)^j * z^q``; projected in closed form."""

    j: int
    q: int
    c: complex = 1.0

    def __call__(self, X):
        z = X[:, 0] + 1j * X[:, 1]
        return self.c * np.conj(z) ** self.j * z ** self.q


@lru_cache(maxsize=None)
def _polar_rule(nr: int, nt: int):
    x, w = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * w * r
    t = 2 * np.pi * np.arange(nt) / nt
    R, T = np.meshgrid(r, t, indexing="ij")
    W = np.outer(wr, np.full(nt, 2 * np.pi / nt))
    X = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=1)
    return X, W.ravel()


def inner(f: ArrayFn, h: ArrayFn, cfg: BergmanConfig = BergmanConfig()) -> complex:
    """``(f, h) = int f conj(h) dA`` over the disc with the fixed rule."""
    X, W = _polar_rule(cfg.radial_nodes, cfg.angular_nodes)
    return complex(np.sum(W * f(X) * np.conj(h(X))))


def project(f: Union[ArrayFn, Monomial], M: int | None = None,
            cfg: BergmanConfig = BergmanConfig()) -> np.ndarray:
    """Coefficients ``a_0..a_M`` of ``B f`` in the monomial basis."""
    M = cfg.max_mode if M is None else int(M)
    if M < 0:
        raise ValueError("M must be >= 0")
    out = np.zeros(M + 1, dtype=complex)
    if isinstance(f, Monomial):
        m = f.q - f.j
        if 0 <= m <= M:
            out[m] = f.c * (f.q - f.j + 1) / (f.q + 1)
        return out
    if cfg.angular_nodes <= 2 * M:
        raise ValueError("angular_nodes must exceed 2 M")
    X, W = _polar_rule(cfg.radial_nodes, cfg.angular_nodes)
    z = X[:, 0] + 1j * X[:, 1]
    fw = np.asarray(f(X), dtype=complex) * W
    zc = np.conj(z)
    p = np.ones_like(z)
    for m in range(M + 1):
        out[m] = np.sum(fw * p) * (m + 1) / math.pi
        p = p * zc
    return out


def tail_estimate(coeffs) -> float:
    """Crude truncation indicator: magnitude of the last two coefficients."""
    a = np.abs(np.asarray(coeffs))
    return float(a[-2:].sum()) if len(a) >= 2 else float(a.sum())


def sobolev_multiplicity(j: int) -> int:
    """Number of real multi-indices on R^2 of order ``j``."""
    return j + 1


def sobolev_norm(coeffs, k2: int) -> float:
    """``|sum a_m z^m|_{k2}``, using ``D^alpha z^m = i^{alpha_2} m!/(m-|alpha|)! z^{m-|alpha|}``."""
    if k2 not in (0, 1, 2):
        raise ValueError("k2 must be 0, 1 or 2")
    a2 = np.abs(np.asarray(coeffs, dtype=complex)) ** 2
    total = 0.0
    for j in range(k2 + 1):
        for m in range(j, len(a2)):
            fall = math.perm(m, j)
            total += sobolev_multiplicity(j) * a2[m] * fall ** 2 * math.pi / (m - j + 1)
    return math.sqrt(total)


def weighted_negative_norm(mu: ArrayFn, k: int,
                           cfg: QuadratureConfig = QuadratureConfig(rel_tol=1e-10),
                           domain: DomainModel | None = None) -> float:
    """``|delta^k mu|_{L^2}``, the stand-in for the dual norm ``|mu|_{-k}``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    domain = domain or make_disc_domain()
    if domain.n != 1:
        raise ValueError("the Bergman experiment is implemented on the disc")

    class _Sq:
        wants_offsets = False

        def __call__(self, X):
            d = fa.evaluate_array(domain.delta, X).real if k else 1.0
            return np.abs(d ** k * mu(X)) ** 2 + 0j

    return math.sqrt(max(integrate_disc(_Sq(), cfg, domain).value.real, 0.0))


def collar_beta_oracle(j: int, k: int) -> float:
    """``|delta^k conj(z)^j|`` when ``delta = 1 - r`` throughout: ``2 pi B(2j+2, 2k+1)``."""
    return math.sqrt(2 * math.pi * math.exp(betaln(2 * j + 2, 2 * k + 1)))


@dataclass(frozen=True)
class SmoothingRow:
    j: int
    projected_norm: float
    weighted_norm: float
    ratio: float


@dataclass(frozen=True)
class SmoothingReport:
    g: str
    k: int
    k1: int
    k2: int
    rows: tuple[SmoothingRow, ...]
    head_max: float
    tail_max: float
    bounded: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _product(g_id: str, j: int):
    kind, p = parse_g(g_id)
    if kind == "pow":
        return Monomial(j, p)
    if kind == "one":
        return Monomial(j, 0)
    if kind == "exp_x1":
        return lambda X: np.conj(X[:, 0] + 1j * X[:, 1]) ** j * g_values(g_id, X)
    raise ValueError(f"multiplier {g_id!r} is not used in the smoothing experiment")


def smoothing_check(g_id: str, k: int, k2: int, j_max: int = 40,
                    cfg: BergmanConfig = BergmanConfig(),
                    quad: QuadratureConfig = QuadratureConfig(rel_tol=1e-10),
                    split: int = 10) -> SmoothingReport:
    """Ratios ``|B(mu_j g)|_{k2} / |delta^k mu_j|`` for ``mu_j = conj(z)^j``.

    Bounded means the maximum over ``j >= split`` is at most twice the maximum
    over ``j <= split``.  On the disc ``B`` preserves each ``H^k``, so the
    regularity order ``k1`` equals ``k2``.
    """
    if j_max < split:
        raise ValueError("j_max must be at least the split index")
    domain = make_disc_domain()
    rows = []
    for j in range(j_max + 1):
        bn = sobolev_norm(project(_product(g_id, j), cfg.max_mode, cfg), k2)
        wn = weighted_negative_norm(lambda X, j=j: np.conj(X[:, 0] + 1j * X[:, 1]) ** j,
                                    k, quad, domain)
        rows.append(SmoothingRow(j, bn, wn, bn / wn))
    head = max(r.ratio for r in rows if r.j <= split)
    tail = max(r.ratio for r in rows if r.j >= split)
    return SmoothingReport(g_id, k, k2, k2, tuple(rows), head, tail, tail <= 2 * head)
