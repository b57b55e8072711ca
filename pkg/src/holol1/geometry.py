"""Model domains with a globally smooth boundary-distance function.

Both models are unit balls (the disc in C, the ball in C^2 = R^4) with

    delta = 1 - m(r),    m(r) = chi(r) r + (1 - chi(r)) (r^2 + 1/4),

where ``chi`` is a smooth step from 0 on ``[0, 1/4]`` to 1 on ``[1/2, inf)``.
For ``r >= 1/2`` this is exactly ``1 - r``, the distance to the sphere; near
the origin the surrogate ``r^2 + 1/4`` removes the cusp of ``|x|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import field_algebra as fa
from .field_algebra import Expr

BLEND_RADIUS = 0.5
BLEND_START = 0.25
DEFAULT_COLLAR = (0.05, 0.15)

DOMAIN_IDS = ("disc", "ball")


def smooth_step(t: Expr) -> Expr:
    """``s(t) = e(t) / (e(t) + e(1 - t))`` with ``e(t) = exp(-1/t)`` for ``t > 0``."""
    et = fa.smooth_step_e(t)
    e1t = fa.smooth_step_e(fa.sub(fa.ONE, t))
    return fa.mul(et, fa.recip(fa.add(et, e1t)))


def smooth_step_value(t):
    """Numerical twin of :func:`smooth_step` for arrays (used by tests and sampling)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        e0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        s = 1.0 - t
        e1 = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    return e0 / (e0 + e1)


@dataclass(frozen=True, eq=False)
class DomainModel:
    """A unit ball in C^n together with its smooth distance surrogate ``delta``."""

    name: str
    n: int
    delta: Expr
    collar_inner: float
    collar_outer: float
    blend_radius: float
    volume: float
    # fault-injection hook for self-test; 0.0 in every real run
    perturbation: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return 2 * self.n

    @cached_property
    def grad_delta(self) -> list[Expr]:
        return fa.gradient(self.delta, self.dim)

    @cached_property
    def laplacian_delta(self) -> Expr:
        return fa.apply_laplacian(self.delta, self.dim)

    @property
    def radial_breaks(self) -> tuple[float, ...]:
        """Radii where some assembled field stops being analytic."""
        return (BLEND_START, BLEND_RADIUS,
                1.0 - self.collar_outer, 1.0 - self.collar_inner)

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        return np.einsum("ij,ij->i", X, X) <= 1.0 + 1e-12

    def delta_values(self, X) -> np.ndarray:
        return fa.evaluate_array(self.delta, X).real

    def radius_at_distance(self, d: float) -> float:
        """Radius of the level set ``{delta = d}``, valid in the exact-distance zone."""
        if not 0.0 <= d <= 1.0 - self.blend_radius:
            raise ValueError(f"distance {d} outside the exact-distance zone")
        return 1.0 - d / (1.0 + self.perturbation)


@dataclass(frozen=True, eq=False)
class CutoffProfile:
    """Smooth cutoff ``zeta`` of ``delta``: 1 for ``delta <= inner``, 0 for ``delta >= outer``."""

    inner: float
    outer: float
    zeta: Expr


def _check_collar(collar_inner: float, collar_outer: float) -> None:
    if not (0.0 < collar_inner < collar_outer < 1.0 - BLEND_RADIUS):
        raise ValueError(
            "collar parameters must satisfy 0 < inner < outer < 1/2, got "
            f"inner={collar_inner}, outer={collar_outer}")


def _radial_delta(dim: int, perturbation: float) -> Expr:
    u = fa.add(*(fa.power(fa.coord(j), 2) for j in range(1, dim + 1)))
    r = fa.sqrt(u)
    # chi = s((r - 1/4) / (1/4))
    chi = smooth_step(fa.sub(fa.scale(1.0 / (BLEND_RADIUS - BLEND_START), r),
                             fa.const(BLEND_START / (BLEND_RADIUS - BLEND_START))))
    surrogate = fa.add(u, fa.const(0.25))
    m = fa.add(fa.mul(chi, r), fa.mul(fa.sub(fa.ONE, chi), surrogate))
    delta = fa.sub(fa.ONE, m)
    if perturbation:
        delta = fa.scale(1.0 + perturbation, delta)
    return delta


def make_disc_domain(collar_inner: float = DEFAULT_COLLAR[0],
                     collar_outer: float = DEFAULT_COLLAR[1],
                     *, perturbation: float = 0.0) -> DomainModel:
    """Unit disc in C; ``delta = 1 - |z|`` for ``|z| >= 1/2``."""
    _check_collar(collar_inner, collar_outer)
    return DomainModel("disc", 1, _radial_delta(2, perturbation), float(collar_inner),
                       float(collar_outer), BLEND_RADIUS, math.pi, perturbation)


def make_ball_domain(collar_inner: float = DEFAULT_COLLAR[0],
                     collar_outer: float = DEFAULT_COLLAR[1],
                     *, perturbation: float = 0.0) -> DomainModel:
    """Unit ball in C^2 (as R^4); volume ``pi^2 / 2``."""
    _check_collar(collar_inner, collar_outer)
    return DomainModel("ball", 2, _radial_delta(4, perturbation), float(collar_inner),
                       float(collar_outer), BLEND_RADIUS, math.pi ** 2 / 2, perturbation)


def make_domain(name: str, collar_inner: float = DEFAULT_COLLAR[0],
                collar_outer: float = DEFAULT_COLLAR[1], **kw) -> DomainModel:
    if name == "disc":
        return make_disc_domain(collar_inner, collar_outer, **kw)
    if name == "ball":
        return make_ball_domain(collar_inner, collar_outer, **kw)
    raise ValueError(f"unknown domain {name!r}; expected one of {DOMAIN_IDS}")


def make_cutoff(domain: DomainModel) -> CutoffProfile:
    cached = domain._cache.get("cutoff")
    if cached is not None:
        return cached
    e1, e2 = domain.collar_inner, domain.collar_outer
    t = fa.scale(1.0 / (e2 - e1), fa.sub(fa.const(e2), domain.delta))
    prof = CutoffProfile(e1, e2, smooth_step(t))
    domain._cache["cutoff"] = prof
    return prof


def sample_collar(domain: DomainModel, count: int, seed: int) -> np.ndarray:
    """Deterministic points with ``inner/2 <= delta <= outer``, shape ``(count, 2n)``."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    d = rng.uniform(domain.collar_inner / 2, domain.collar_outer, size=count)
    r = np.array([domain.radius_at_distance(x) for x in d])
    dirs = rng.standard_normal((count, domain.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs * r[:, None]


def sample_domain(domain: DomainModel, count: int, seed: int) -> np.ndarray:
    """Uniform points in the closed domain (rejection sampling from the cube)."""
    rng = np.random.default_rng(seed)
    out = []
    have = 0
    while have < count:
        X = rng.uniform(-1.0, 1.0, size=(2 * count + 16, domain.dim))
        X = X[np.einsum("ij,ij->i", X, X) <= 1.0]
        out.append(X)
        have += len(X)
    return np.concatenate(out)[:count]
