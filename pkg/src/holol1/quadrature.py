"""Adaptive cubature over the unit disc and ball, plus closed-form moment oracles.

The disc integrator works in polar coordinates ``(r, theta)``.  The initial
mesh puts breakpoints at the radii where the assembled fields stop being
analytic and at the angles of caller-supplied boundary singularities.  Every
cell carries a coarse value (one tensor Gauss rule) and a fine value (the same
rule on its four children); the per-cell error estimate is their difference,
and the cells with the largest estimates are split until the summed estimate
meets the tolerance.  Cells touching a boundary singularity use a Duffy
collapse with power grading, which absorbs ``|z - z0|^{-a}`` for ``a < 2``.

Integrands are vectorised: ``f(X)`` takes an ``(m, dim)`` array of Cartesian
points and returns ``m`` complex values.  All sums are exactly rounded
(``math.fsum``), so the result does not depend on evaluation order.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_legendre

Integrand = Callable[[np.ndarray], np.ndarray]

TWO_PI = 2.0 * math.pi


class NonConvergence(RuntimeError):
    """Raised in strict mode when the tolerance is not met within the budget."""


class NonConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_subdivisions: int = 4000
    # boundary points (complex numbers for the disc) where the integrand may blow up
    singular_points: tuple = ()
    base_rule: int = 12
    theta_panels: int = 8
    corner_grading: int = 10
    strict: bool = False

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 0:
            raise ValueError("max_subdivisions must be >= 0")
        if self.base_rule < 1 or self.theta_panels < 1 or self.corner_grading < 1:
            raise ValueError("rule orders and panel counts must be positive")

    def with_hints(self, points: Sequence) -> "QuadratureConfig":
        return replace(self, singular_points=tuple(points))


@dataclass(frozen=True)
class IntegralResult:
    value: complex
    error_estimate: float
    cells_used: int
    evaluations: int
    converged: bool = True


@lru_cache(maxsize=None)
def gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _fsum_complex(values) -> complex:
    values = np.asarray(values, dtype=complex)
    return complex(math.fsum(values.real), math.fsum(values.imag))


# ----------------------------------------------------------------------------
# disc


@dataclass(frozen=True)
class _Cell:
    r0: float
    r1: float
    t0: float
    t1: float
    # +1: singular corner at (r1, t0); -1: at (r1, t1); 0: regular
    corner: int = 0

    def splits(self, sing_angles: frozenset, R: float) -> tuple[tuple["_Cell", ...], ...]:
        """Candidate subdivisions of the cell.

        Regular cells offer their radial and angular bisections.  Corner cells
        offer a single split along the physically longer side (both when
        comparable), which keeps the graded rule well shaped.
        """
        rm = 0.5 * (self.r0 + self.r1)
        tm = 0.5 * (self.t0 + self.t1)
        if self.corner:
            dr = self.r1 - self.r0
            arc = self.r1 * (self.t1 - self.t0)
            rs = ((self.r0, rm), (rm, self.r1)) if dr * 2.0 >= arc else ((self.r0, self.r1),)
            ts = ((self.t0, tm), (tm, self.t1)) if arc * 2.0 >= dr else ((self.t0, self.t1),)
            opts = (tuple((a, b, c, d) for a, b in rs for c, d in ts),)
        else:
            opts = (((self.r0, rm, self.t0, self.t1), (rm, self.r1, self.t0, self.t1)),
                    ((self.r0, self.r1, self.t0, tm), (self.r0, self.r1, tm, self.t1)))
        return tuple(tuple(_Cell(a, b, c, d, _corner_flag(a, b, c, d, sing_angles, R))
                           for a, b, c, d in pair) for pair in opts)


def _corner_flag(r0, r1, t0, t1, sing_angles, R) -> int:
    if r1 != R:
        return 0
    if t0 in sing_angles:
        return 1
    if t1 in sing_angles:
        return -1
    return 0


@lru_cache(maxsize=None)
def _regular_template(n: int):
    x, w = gauss01(n)
    A, B = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return A.ravel(), B.ravel(), W.ravel()


@lru_cache(maxsize=None)
def _duffy_template(n: int, q: int):
    """Nodes ``(a, b)`` in the unit square, singular corner at the origin."""
    x, w = gauss01(n)
    S, V = np.meshgrid(x, x, indexing="ij")
    Wt = np.outer(w, w)
    s = S ** q
    jac = s * q * S ** (q - 1) * Wt
    a1, b1 = s, s * V          # triangle b <= a
    a2, b2 = s * V, s          # triangle a <= b
    A = np.concatenate([a1.ravel(), a2.ravel()])
    B = np.concatenate([b1.ravel(), b2.ravel()])
    W = np.concatenate([jac.ravel(), jac.ravel()])
    return A, B, W


def _cell_nodes(cells: Sequence[_Cell], cfg: QuadratureConfig):
    """Stacked ``(r, theta, weight, local)`` for a homogeneous list of cells.

    For corner cells ``local`` holds the exact offsets ``(R - r, theta - ts)``
    from the singular corner; for regular cells it is None.
    """
    r0 = np.array([c.r0 for c in cells])[:, None]
    r1 = np.array([c.r1 for c in cells])[:, None]
    t0 = np.array([c.t0 for c in cells])[:, None]
    t1 = np.array([c.t1 for c in cells])[:, None]
    local = None
    if cells[0].corner == 0:
        A, B, W = _regular_template(cfg.base_rule)
        r = r0 + (r1 - r0) * A
        t = t0 + (t1 - t0) * B
    else:
        A, B, W = _duffy_template(cfg.base_rule, cfg.corner_grading)
        sgn = np.array([c.corner for c in cells])[:, None]
        dr = (r1 - r0) * A
        dt = np.where(sgn > 0, 1.0, -1.0) * (t1 - t0) * B
        ts = np.where(sgn > 0, t0, t1)
        r = r1 - dr
        t = ts + dt
        local = (dr, dt, ts)
    wts = (r1 - r0) * (t1 - t0) * W * r
    return r, t, wts, local


def _offsets(X, local, hints: Sequence[complex], R: float) -> np.ndarray:
    """Displacement ``z - z0`` from the nearest hint, accurate near the hint.

    In corner cells ``z0 = R e^{i ts}`` and ``z = (R - dr) e^{i(ts + dt)}``, so
    ``z - z0 = e^{i ts} (R (e^{i dt} - 1) - dr e^{i dt})`` with ``e^{i dt} - 1``
    formed without cancellation.
    """
    z = X[:, 0] + 1j * X[:, 1]
    if not hints:
        return np.zeros_like(z)
    if local is not None:
        dr, dt, ts = (np.broadcast_to(v, local[0].shape).ravel() for v in local)
        em1 = -2.0 * np.sin(0.5 * dt) ** 2 + 1j * np.sin(dt)
        return np.exp(1j * ts) * (R * em1 - dr * (1.0 + em1))
    H = np.asarray(hints, dtype=complex)
    d = z[:, None] - H[None, :]
    return d[np.arange(len(z)), np.argmin(np.abs(d), axis=1)]


def _apply_rule(f: Integrand, cells: Sequence[_Cell], cfg: QuadratureConfig,
                R: float = 1.0):
    """Rule values for each cell, in input order, and the number of evaluations.

    Integrands with a truthy ``wants_offsets`` attribute are called as
    ``f(X, D)`` with ``D`` the complex displacement of each point from the
    nearest singular hint.
    """
    vals = np.zeros(len(cells), dtype=complex)
    nev = 0
    groups: dict[bool, list[int]] = {False: [], True: []}
    for i, c in enumerate(cells):
        groups[c.corner != 0].append(i)
    hints = [_as_complex(p) for p in cfg.singular_points]
    for is_corner, idx in groups.items():
        if not idx:
            continue
        sub = [cells[i] for i in idx]
        r, t, w, local = _cell_nodes(sub, cfg)
        X = np.stack([(r * np.cos(t)).ravel(), (r * np.sin(t)).ravel()], axis=1)
        if getattr(f, "wants_offsets", False):
            D = _offsets(X, local, hints, R)
            fx = np.asarray(f(X, D), dtype=complex).reshape(r.shape)
        else:
            fx = np.asarray(f(X), dtype=complex).reshape(r.shape)
        if not np.all(np.isfinite(fx)):
            raise FloatingPointError("integrand returned non-finite values")
        nev += fx.size
        prod = fx * w
        for j, i in enumerate(idx):
            vals[i] = _fsum_complex(prod[j])
    return vals, nev


def _as_complex(p) -> complex:
    if isinstance(p, (tuple, list, np.ndarray)):
        return complex(p[0], p[1])
    return complex(p)


def _hint_angles(cfg: QuadratureConfig) -> list[float]:
    out = []
    for p in cfg.singular_points:
        z = _as_complex(p)
        out.append(math.atan2(z.imag, z.real))
    return out


def _initial_mesh(R: float, breaks: Sequence[float], cfg: QuadratureConfig):
    rb = sorted({0.0, R, *[b for b in breaks if 0.0 < b < R]})
    angles = _hint_angles(cfg)
    start = angles[0] if angles else 0.0
    tb = {start + TWO_PI * j / cfg.theta_panels for j in range(cfg.theta_panels + 1)}
    sing = {start, start + TWO_PI}
    for a in angles[1:]:
        a = start + ((a - start) % TWO_PI)
        tb.add(a)
        sing.add(a)
    tb = sorted(tb)
    # drop near-duplicate angular breakpoints created by wrapping
    clean = [tb[0]]
    for x in tb[1:]:
        if x - clean[-1] > 1e-12:
            clean.append(x)
        elif x in sing:
            clean[-1] = x
    sing_angles = frozenset(sing) if angles else frozenset()
    cells = []
    for a, b in zip(rb[:-1], rb[1:]):
        for c, d in zip(clean[:-1], clean[1:]):
            cells.append(_Cell(a, b, c, d, _corner_flag(a, b, c, d, sing_angles, R)))
    return cells, sing_angles


def _with_children(f, cells, coarse, sing_angles, R, cfg):
    """Evaluate the candidate splits of every cell and keep the most informative.

    The error estimate of a cell is the largest of the discrepancies, so a
    feature varying along only one direction cannot hide from it.
    """
    options = [c.splits(sing_angles, R) for c in cells]
    flat = [k for opts in options for pair in opts for k in pair]
    kv, nev = _apply_rule(f, flat, cfg, R)
    out, pos = [], 0
    for c, v, opts in zip(cells, coarse, options):
        best = None
        for pair in opts:
            vals = kv[pos:pos + len(pair)]
            pos += len(pair)
            e = abs(vals.sum() - v)
            if best is None or e > best[4]:
                best = (c, v, pair, vals, e)
        out.append(best)
    return out, nev


def integrate_polar(f: Integrand, cfg: QuadratureConfig = QuadratureConfig(),
                    radius: float = 1.0, breaks: Sequence[float] = ()) -> IntegralResult:
    """Adaptive integral of ``f`` over the disc of the given radius."""
    cells, sing_angles = _initial_mesh(radius, breaks, cfg)
    coarse, nev = _apply_rule(f, cells, cfg, radius)
    # active entries: cell, coarse value, children, children values
    active, n2 = _with_children(f, cells, list(coarse), sing_angles, radius, cfg)
    nev += n2
    splits = 0
    converged = True
    while True:
        fine = np.array([e[3].sum() for e in active])
        err = np.array([e[4] for e in active])
        total = _fsum_complex(fine)
        err_sum = math.fsum(err)
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if err_sum <= tol:
            break
        if splits >= cfg.max_subdivisions:
            converged = False
            break
        order = sorted(range(len(active)), key=lambda i: (-err[i], i))
        chosen, remaining = [], err_sum
        for i in order:
            if remaining <= 0.5 * tol or splits + len(chosen) >= cfg.max_subdivisions:
                break
            chosen.append(i)
            remaining -= err[i]
        chosen_set = set(chosen)
        new_cells, new_coarse = [], []
        for i in chosen:
            _, _, ks, kvals, _ = active[i]
            new_cells.extend(ks)
            new_coarse.extend(kvals)
        fresh, n2 = _with_children(f, new_cells, new_coarse, sing_angles, radius, cfg)
        nev += n2
        splits += len(chosen)
        active = [e for i, e in enumerate(active) if i not in chosen_set] + fresh
        # deterministic ordering independent of refinement history
        active.sort(key=lambda e: (e[0].r0, e[0].t0, e[0].r1, e[0].t1))
    fine = np.array([e[3].sum() for e in active])
    err = np.array([e[4] for e in active])
    res = IntegralResult(_fsum_complex(fine), math.fsum(err), len(active), nev, converged)
    if not converged:
        if cfg.strict:
            raise NonConvergence(f"tolerance not met: estimate {res.error_estimate:.3e}")
        warnings.warn(f"cubature did not converge (error estimate {res.error_estimate:.3e})",
                      NonConvergenceWarning, stacklevel=2)
    return res


def integrate_disc(f: Integrand, cfg: QuadratureConfig = QuadratureConfig(),
                   domain=None) -> IntegralResult:
    """``int_D f dV`` over the unit disc; ``domain`` supplies radial breakpoints."""
    breaks = domain.radial_breaks if domain is not None else ()
    return integrate_polar(f, cfg, 1.0, breaks)


def integrate_epsilon_shell(f: Integrand, eps: float,
                            cfg: QuadratureConfig = QuadratureConfig(),
                            domain=None) -> IntegralResult:
    """Integral over ``{delta > eps}``, the concentric disc of radius ``1 - eps``.

    Valid for ``0 <= eps <= 1/2``, where ``delta`` is the exact boundary distance.
    Singular hints are moved radially onto the cut circle.
    """
    if not 0.0 <= eps <= 0.5:
        raise ValueError(f"eps must lie in [0, 1/2], got {eps}")
    if domain is not None and domain.n != 1:
        return integrate_ball(f, cfg, domain, radius=domain.radius_at_distance(eps))
    R = domain.radius_at_distance(eps) if domain is not None else 1.0 - eps
    breaks = domain.radial_breaks if domain is not None else ()
    if cfg.singular_points:
        cfg = cfg.with_hints([R * complex(p) / abs(complex(p)) for p in cfg.singular_points])
    return integrate_polar(f, cfg, R, breaks)


# ----------------------------------------------------------------------------
# ball in R^4 = C^2


def _ball_rule(radius: float, breaks, level: int, base: int):
    """Radial Gauss x Hopf-coordinate product rule.

    ``z1 = r cos(h) e^{i a}``, ``z2 = r sin(h) e^{i b}``;
    ``dV = r^3 sin(h) cos(h) dr dh da db``.
    """
    rb = sorted({0.0, radius, *[b for b in breaks if 0.0 < b < radius]})
    edges = []
    for a, b in zip(rb[:-1], rb[1:]):
        m = 2 ** level
        edges.extend((a + (b - a) * i / m, a + (b - a) * (i + 1) / m) for i in range(m))
    x, w = gauss01(base)
    r = np.concatenate([a + (b - a) * x for a, b in edges])
    wr = np.concatenate([(b - a) * w for a, b in edges]) * r ** 3
    nh = base + 4 * level
    xh, wh = gauss01(nh)
    h = 0.5 * math.pi * xh
    wh = 0.5 * math.pi * wh * np.sin(h) * np.cos(h)
    na = 2 * (base + 4 * level)
    ang = TWO_PI * np.arange(na) / na
    wa = np.full(na, TWO_PI / na)
    return r, wr, h, wh, ang, wa


def integrate_ball(f: Integrand, cfg: QuadratureConfig = QuadratureConfig(),
                   domain=None, radius: float = 1.0, max_level: int = 3) -> IntegralResult:
    """``int_B f dV`` over the ball of ``radius`` in R^4 by successive product-rule levels."""
    breaks = domain.radial_breaks if domain is not None else ()
    base = max(4, cfg.base_rule - 4)
    prev = None
    nev = 0
    value = 0j
    err = math.inf
    cells = 0
    for level in range(max_level + 1):
        r, wr, h, wh, ang, wa = _ball_rule(radius, breaks, level, base)
        acc = []
        # loop over radii in blocks to bound memory
        R_, H, A, B = np.meshgrid(r, h, ang, ang, indexing="ij", sparse=True)
        cos_h, sin_h = np.cos(h), np.sin(h)
        ca, sa = np.cos(ang), np.sin(ang)
        for i in range(len(r)):
            x1 = r[i] * cos_h[:, None, None] * ca[None, :, None]
            x2 = r[i] * cos_h[:, None, None] * sa[None, :, None]
            x3 = r[i] * sin_h[:, None, None] * ca[None, None, :]
            x4 = r[i] * sin_h[:, None, None] * sa[None, None, :]
            shape = (len(h), len(ang), len(ang))
            X = np.stack([np.broadcast_to(v, shape).ravel() for v in (x1, x2, x3, x4)], axis=1)
            fx = np.asarray(f(X), dtype=complex).reshape(shape)
            W = wr[i] * wh[:, None, None] * wa[None, :, None] * wa[None, None, :]
            acc.append(_fsum_complex((fx * W).ravel()))
            nev += fx.size
        del R_, H, A, B
        value = _fsum_complex(acc)
        cells = len(r)
        if prev is not None:
            err = abs(value - prev)
            if err <= max(cfg.abs_tol, cfg.rel_tol * abs(value)):
                return IntegralResult(value, err, cells, nev, True)
        prev = value
    if cfg.strict:
        raise NonConvergence(f"ball cubature: estimate {err:.3e}")
    warnings.warn(f"ball cubature did not converge (error estimate {err:.3e})",
                  NonConvergenceWarning, stacklevel=2)
    return IntegralResult(value, err, cells, nev, False)


def integrate(f: Integrand, domain, cfg: QuadratureConfig = QuadratureConfig()) -> IntegralResult:
    if domain.n == 1:
        return integrate_disc(f, cfg, domain)
    return integrate_ball(f, cfg, domain)


# ----------------------------------------------------------------------------
# closed-form oracles


def oracle_monomial_moment(m: int, p: int, a: float = 0.0) -> complex:
    """``int_disc z^m conj(z)^p |z|^{2a} dV``."""
    if m < 0 or p < 0:
        raise ValueError("m and p must be non-negative")
    if a <= -1:
        raise ValueError("weight exponent must exceed -1")
    if m != p:
        return 0j
    return complex(TWO_PI / (2 * m + 2 * a + 2))


def richardson(values: Sequence[float], ratio: float = 2.0, order: float = 1.0) -> float:
    """Richardson extrapolation of the last two terms of a refinement sequence."""
    a, b = values[-2], values[-1]
    f = ratio ** order
    return (f * b - a) / (f - 1.0)
