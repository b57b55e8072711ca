import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import gamma

from holol1.quadrature import (NonConvergence, NonConvergenceWarning, QuadratureConfig,
                               gauss01, integrate_ball, integrate_disc,
                               integrate_epsilon_shell, oracle_monomial_moment, richardson)


class Fn:
    """Adapter giving plain lambdas the integrand protocol."""

    wants_offsets = False

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, X):
        return self.fn(X)


class OffsetFn(Fn):
    wants_offsets = True

    def __call__(self, X, D):
        return self.fn(D)


def z_of(X):
    return X[:, 0] + 1j * X[:, 1]


def test_disc_examples():
    r = integrate_disc(Fn(lambda X: np.ones(len(X))))
    assert abs(r.value - math.pi) <= 1e-12 * math.pi
    assert abs(integrate_disc(Fn(z_of)).value) <= 1e-14
    assert integrate_disc(Fn(lambda X: abs(z_of(X)) ** 2)).value == pytest.approx(math.pi / 2, rel=1e-13)
    assert r.error_estimate >= 0 and r.cells_used > 0 and r.evaluations > 0


def test_ball_examples(ball):
    cfg = QuadratureConfig(rel_tol=1e-10)
    one = integrate_ball(Fn(lambda X: np.ones(len(X))), cfg, ball)
    assert one.value == pytest.approx(math.pi ** 2 / 2, rel=1e-10)
    assert abs(integrate_ball(Fn(lambda X: X[:, 0]), cfg, ball).value) <= 1e-12
    sq = integrate_ball(Fn(lambda X: np.sum(X ** 2, axis=1)), cfg, ball)
    assert sq.value == pytest.approx(math.pi ** 2 / 3, rel=1e-10)


def test_epsilon_shell_examples(disc):
    f1 = Fn(lambda X: np.ones(len(X)))
    for eps in (0.03, 0.001):
        assert integrate_epsilon_shell(f1, eps, domain=disc).value == pytest.approx(
            math.pi * (1 - eps) ** 2, rel=1e-12)
    assert integrate_epsilon_shell(f1, 0.0, domain=disc).value == pytest.approx(
        integrate_disc(f1, domain=disc).value, rel=1e-14)
    sq = Fn(lambda X: abs(z_of(X)) ** 2)
    assert integrate_epsilon_shell(sq, 0.5, domain=disc).value == pytest.approx(math.pi / 32, rel=1e-12)
    with pytest.raises(ValueError):
        integrate_epsilon_shell(f1, 0.7, domain=disc)
    with pytest.raises(ValueError):
        integrate_epsilon_shell(f1, -0.1, domain=disc)


def test_oracle_examples():
    assert oracle_monomial_moment(0, 0, 0) == pytest.approx(math.pi)
    assert oracle_monomial_moment(1, 1, 0) == pytest.approx(math.pi / 2)
    assert oracle_monomial_moment(2, 1, 0) == 0
    with pytest.raises(ValueError):
        oracle_monomial_moment(1, 1, -1.0)


@pytest.mark.parametrize("a", [0, 1])
def test_oracle_equivalence(a):
    for m in range(5):
        for p in range(5):
            f = Fn(lambda X, m=m, p=p: z_of(X) ** m * np.conj(z_of(X)) ** p * np.abs(z_of(X)) ** (2 * a))
            assert abs(integrate_disc(f).value - oracle_monomial_moment(m, p, a)) <= 1e-10


def _abs_sing_exact(a=1.5):
    # int_disc |1 - z|^{-a}: polar coordinates about z = 1 give
    # int_{-pi/2}^{pi/2} (2 cos phi)^{2-a} / (2-a) dphi
    return 2 ** (2 - a) / (2 - a) * math.sqrt(math.pi) * gamma((3 - a) / 2) / gamma((4 - a) / 2)


def test_singular_integrability_error_estimate():
    f = OffsetFn(lambda D: np.abs(D) ** -1.5)
    exact = _abs_sing_exact(1.5)
    vals = []
    for tol in (1e-4, 1e-6, 1e-8, 1e-10):
        r = integrate_disc(f, QuadratureConfig(rel_tol=tol).with_hints([1.0]))
        assert r.converged
        assert abs(r.value - exact) <= 10 * r.error_estimate
        vals.append(r.value.real)
    assert abs(richardson(vals, 100.0, 1.0) - exact) <= 1e-9 * exact
    assert abs(vals[-1] - exact) <= 1e-9 * exact


@pytest.mark.parametrize("a", [1.5, 1.9])
def test_holomorphic_boundary_singularity(a):
    # mean value property: int (1 - z)^{-a} = pi
    f = OffsetFn(lambda D: (-D) ** -a)
    r = integrate_disc(f, QuadratureConfig(rel_tol=1e-9).with_hints([1.0]))
    assert abs(r.value - math.pi) <= 1e-8


def test_nonconvergence_flagged():
    f = OffsetFn(lambda D: np.abs(D) ** -1.9)
    cfg = QuadratureConfig(rel_tol=1e-12, max_subdivisions=3).with_hints([1.0])
    with pytest.warns(NonConvergenceWarning):
        r = integrate_disc(f, cfg)
    assert not r.converged
    with pytest.raises(NonConvergence):
        integrate_disc(f, QuadratureConfig(rel_tol=1e-12, max_subdivisions=3, strict=True).with_hints([1.0]))


@pytest.mark.parametrize("kw", [dict(rel_tol=0), dict(abs_tol=-1.0), dict(max_subdivisions=-1),
                                dict(base_rule=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        QuadratureConfig(**kw)


@given(st.complex_numbers(max_magnitude=3, allow_nan=False),
       st.complex_numbers(max_magnitude=3, allow_nan=False))
def test_linearity(a, b):
    f = lambda X: np.exp(X[:, 0]) * np.cos(3 * X[:, 1])
    g = lambda X: z_of(X) ** 2 * np.conj(z_of(X))
    cfg = QuadratureConfig(rel_tol=1e-10)
    rf, rg = integrate_disc(Fn(f), cfg), integrate_disc(Fn(g), cfg)
    rs = integrate_disc(Fn(lambda X: a * f(X) + b * g(X)), cfg)
    bound = abs(a) * rf.error_estimate + abs(b) * rg.error_estimate + rs.error_estimate
    assert abs(rs.value - (a * rf.value + b * rg.value)) <= bound + 1e-13 * (1 + abs(a) + abs(b))


def test_determinism_across_threads():
    f = OffsetFn(lambda D: (-D) ** -1.5)
    cfg = QuadratureConfig(rel_tol=1e-9).with_hints([1.0])
    ref = integrate_disc(f, cfg)
    with ThreadPoolExecutor(4) as pool:
        outs = list(pool.map(lambda _: integrate_disc(f, cfg), range(4)))
    assert all(o.value == ref.value and o.error_estimate == ref.error_estimate for o in outs)


def test_gauss01_exact_for_polynomials():
    x, w = gauss01(6)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.sum(w * x ** 11) == pytest.approx(1 / 12, abs=1e-15)


def test_richardson():
    # a_h = 1 + h, extrapolates to 1
    assert richardson([1.5, 1.25], 2.0, 1.0) == pytest.approx(1.0)
