"""Construction of the boundary-vanishing weight ``omega_{k,g}``.

The weight satisfies ``int g eta dV = int delta^k omega_{k,g} eta dV`` for every
holomorphic integrable ``eta``.  The first order weight is

    omega_1[gamma] = (1 - zeta)/delta * gamma
                     - ( N(zeta gamma) + (Lap delta) zeta gamma - i T(zeta gamma) )

and higher orders recurse with ``omega_m / (m + 1)`` in place of ``gamma``.
Two recursions are offered.  ``CORRECTED`` keeps the cutoff on the Laplacian
term as the base step does; ``PAPER_LITERAL`` uses ``(Lap delta) omega_m``
without it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import field_algebra as fa
from .field_algebra import Expr
from .geometry import CutoffProfile, DomainModel, make_cutoff


class Variant(str, enum.Enum):
    CORRECTED = "corrected"
    PAPER_LITERAL = "paper_literal"

    @classmethod
    def parse(cls, s: "str | Variant") -> "Variant":
        if isinstance(s, Variant):
            return s
        key = s.strip().lower().replace("-", "_")
        aliases = {"corrected": cls.CORRECTED, "paper_literal": cls.PAPER_LITERAL,
                   "paperliteral": cls.PAPER_LITERAL, "literal": cls.PAPER_LITERAL}
        if key not in aliases:
            raise ValueError(f"unknown variant {s!r}")
        return aliases[key]


@dataclass(frozen=True, eq=False)
class WeightProgram:
    k: int
    g: Expr
    variant: Variant
    omega: Expr
    domain: DomainModel
    g_id: str = "?"
    # shared/unshared node counts after each order, for swell reporting
    sizes: tuple[tuple[int, int], ...] = ()

    def weighted(self) -> Expr:
        """``delta^k * omega``, the factor multiplying ``eta`` on the right-hand side."""
        return fa.mul(fa.power(self.domain.delta, self.k), self.omega)

    def evaluate(self, X) -> np.ndarray:
        return fa.evaluate_array(self.omega, X)


def _one_minus_zeta_over_delta(domain: DomainModel, cutoff: CutoffProfile) -> Expr:
    return fa.collar_quotient(fa.sub(fa.ONE, cutoff.zeta), domain.delta, cutoff.inner)


def _step(gamma: Expr, domain: DomainModel, cutoff: CutoffProfile,
          factor: float, lap_zeta: bool) -> Expr:
    """One application of the base construction to ``gamma``, scaling the bracket by ``factor``.

    With ``lap_zeta`` False the Laplacian term uses ``gamma`` without the cutoff.
    """
    zg = fa.mul(cutoff.zeta, gamma)
    lap_arg = zg if lap_zeta else gamma
    bracket = fa.add(
        fa.apply_N(zg, domain),
        fa.mul(domain.laplacian_delta, lap_arg),
        fa.scale(-1j, fa.apply_T(zg, domain)),
    )
    q = _one_minus_zeta_over_delta(domain, cutoff)
    return fa.simplify(fa.sub(fa.mul(q, gamma), fa.scale(factor, bracket)))


def base_weight(gamma: Expr, domain: DomainModel, cutoff: CutoffProfile | None = None) -> Expr:
    """``omega_{1,gamma}`` for an arbitrary smooth ``gamma``."""
    cutoff = cutoff or make_cutoff(domain)
    return _step(gamma, domain, cutoff, 1.0, True)


def inductive_weight(k: int, g: Expr, domain: DomainModel,
                     cutoff: CutoffProfile | None = None,
                     variant: Variant | str = Variant.CORRECTED,
                     g_id: str = "?") -> WeightProgram:
    if int(k) != k or k < 1:
        raise ValueError(f"order k must be an integer >= 1, got {k}")
    variant = Variant.parse(variant)
    cutoff = cutoff or make_cutoff(domain)
    omega = base_weight(g, domain, cutoff)
    sizes = [(fa.node_count(omega), fa.tree_size(omega))]
    for m in range(1, k):
        omega = _step(omega, domain, cutoff, 1.0 / (m + 1),
                      variant is Variant.CORRECTED)
        sizes.append((fa.node_count(omega), fa.tree_size(omega)))
    return WeightProgram(int(k), g, variant, omega, domain, g_id, tuple(sizes))


def recursion_residual(w: WeightProgram, cutoff: CutoffProfile | None = None) -> bool:
    """Structural check: rebuilding the last step from ``omega_{k-1}`` gives the same node."""
    if w.k == 1:
        return w.omega is base_weight(w.g, w.domain, cutoff)
    prev = inductive_weight(w.k - 1, w.g, w.domain, cutoff, w.variant, w.g_id)
    cutoff = cutoff or make_cutoff(w.domain)
    again = _step(prev.omega, w.domain, cutoff, 1.0 / w.k,
                  w.variant is Variant.CORRECTED)
    return again is w.omega


@dataclass(frozen=True)
class VanishingProfile:
    k: int
    scales: tuple[float, ...]
    # values[order][ray][scale]: |N^order (delta^k omega)|
    values: tuple[tuple[tuple[float, ...], ...], ...]
    # slopes[order][ray]; NaN when the profile vanishes to roundoff
    slopes: tuple[tuple[float, ...], ...]
    degenerate: tuple[tuple[bool, ...], ...]
    sup_abs_omega: float


def _normal_rays(domain: DomainModel, rays: int) -> np.ndarray:
    if domain.n == 1:
        th = 2 * np.pi * (np.arange(rays) + 0.5) / rays
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    rng = np.random.default_rng(20240601)
    d = rng.standard_normal((rays, domain.dim))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def loglog_slope(x, y) -> float:
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def vanishing_profile(w: WeightProgram, scales, rays: int = 8,
                      collar_samples: int = 2000, seed: int = 0,
                      roundoff_floor: float = 1e-12) -> VanishingProfile:
    """Measure the decay of ``delta^k omega`` and its normal derivatives along rays.

    A ray whose values all fall below ``roundoff_floor * scale^order`` relative to
    the magnitude of ``omega``'s ingredients is flagged degenerate: the field
    vanishes identically there and no decay exponent is meaningful.
    """
    from .geometry import sample_collar

    domain = w.domain
    scales = tuple(float(s) for s in scales)
    if not scales or any(not (0 < s < domain.collar_inner) for s in scales):
        raise ValueError("scales must lie in (0, collar_inner)")
    F = w.weighted()
    fields = [F]
    for _ in range(w.k - 1):
        fields.append(fa.apply_N(fields[-1], domain))
    dirs = _normal_rays(domain, rays)
    radii = np.array([domain.radius_at_distance(s) for s in scales])
    pts = (dirs[:, None, :] * radii[None, :, None]).reshape(-1, domain.dim)
    values, slopes, degenerate = [], [], []
    for order, field_ in enumerate(fields):
        v = np.abs(fa.evaluate_array(field_, pts)).reshape(rays, len(scales))
        values.append(tuple(tuple(map(float, row)) for row in v))
        row_slopes, row_deg = [], []
        for row in v:
            floor = roundoff_floor * np.asarray(scales) ** (w.k - order)
            if np.all(row <= floor):
                row_slopes.append(float("nan"))
                row_deg.append(True)
            else:
                row_slopes.append(loglog_slope(scales, np.maximum(row, 1e-300)))
                row_deg.append(False)
        slopes.append(tuple(row_slopes))
        degenerate.append(tuple(row_deg))
    samples = sample_collar(domain, collar_samples, seed)
    sup = float(np.max(np.abs(w.evaluate(samples))))
    return VanishingProfile(w.k, scales, tuple(values), tuple(slopes),
                            tuple(degenerate), sup)
