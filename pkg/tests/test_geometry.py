import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holol1 import field_algebra as fa
from holol1.geometry import (make_ball_domain, make_cutoff, make_disc_domain, make_domain,
                             sample_collar, sample_domain, smooth_step_value)


def _grad_norm(domain, X):
    g = np.stack([fa.evaluate_array(e, X).real for e in domain.grad_delta])
    return np.linalg.norm(g, axis=0)


def test_disc_delta_values(disc):
    assert fa.evaluate(disc.delta, (0.9, 0.0)).real == pytest.approx(0.1, abs=1e-15)
    assert fa.evaluate(disc.delta, (0.0, 0.0)).real == pytest.approx(0.75, abs=1e-15)
    p = 0.8 * np.array([math.cos(math.pi / 3), math.sin(math.pi / 3)])
    assert _grad_norm(disc, p[None, :])[0] == pytest.approx(1.0, abs=1e-14)
    assert disc.volume == math.pi


def test_ball_delta_and_volume(ball):
    assert fa.evaluate(ball.delta, (0.9, 0, 0, 0)).real == pytest.approx(0.1, abs=1e-15)
    assert ball.volume == pytest.approx(math.pi ** 2 / 2)
    X = sample_collar(ball, 50, 3)
    assert np.max(np.abs(_grad_norm(ball, X) - 1)) < 1e-12


@pytest.mark.parametrize("ci,co", [(0.0, 0.1), (0.1, 0.05), (0.1, 0.5), (-0.1, 0.2)])
def test_rejects_bad_collar(ci, co):
    with pytest.raises(ValueError):
        make_disc_domain(ci, co)
    with pytest.raises(ValueError):
        make_ball_domain(ci, co)


def test_unknown_domain():
    with pytest.raises(ValueError, match="torus"):
        make_domain("torus")


@pytest.mark.parametrize("name", ["disc", "ball"])
def test_collar_invariants(name):
    dom = make_domain(name)
    X = sample_collar(dom, 1000, 11)
    assert np.max(np.abs(_grad_norm(dom, X) - 1)) <= 1e-10
    N = fa.evaluate_array(fa.apply_N(dom.delta, dom), X)
    T = fa.evaluate_array(fa.apply_T(dom.delta, dom), X)
    assert np.max(np.abs(N - 1)) <= 1e-10
    assert np.max(np.abs(T)) <= 1e-12


def test_cutoff_values(disc):
    z = make_cutoff(disc).zeta
    e1, e2 = disc.collar_inner, disc.collar_outer
    for d, want in ((e1 / 2, 1.0), (2 * e2, 0.0), ((e1 + e2) / 2, 0.5)):
        r = disc.radius_at_distance(d)
        assert fa.evaluate(z, (r, 0.0)).real == pytest.approx(want, abs=1e-15)
    assert make_cutoff(disc) is make_cutoff(disc)


def test_cutoff_junction_flatness():
    # derivatives of s at t -> 0+ decay as the offset shrinks
    t = fa.coord(1)
    s = fa.mul(fa.smooth_step_e(t), fa.recip(fa.add(fa.smooth_step_e(t),
                                                     fa.smooth_step_e(fa.sub(fa.ONE, t)))))
    ders = [s]
    for _ in range(4):
        ders.append(fa.partial(ders[-1], 1))
    offs = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    for d in ders[1:]:
        for x0 in (0.0, 1.0):
            pts = np.stack([x0 + np.sign(0.5 - x0) * offs, np.zeros(4)], axis=1)
            v = np.abs(fa.evaluate_array(d, pts))
            # decreasing, up to roundoff once the values have collapsed
            assert np.all(np.diff(v) <= 1e-12)
            assert v[-1] < 1e-12


def test_delta_continuous_across_blend(disc):
    eps = 1e-12
    a = fa.evaluate(disc.delta, (0.5 - eps, 0.0)).real
    b = fa.evaluate(disc.delta, (0.5 + eps, 0.0)).real
    assert abs(a - b) <= 1e-11


def test_sample_collar_contract(disc, ball):
    X = sample_collar(disc, 3, 7)
    assert X.shape == (3, 2)
    d = disc.delta_values(X)
    assert np.all((d >= disc.collar_inner / 2 - 1e-15) & (d <= disc.collar_outer + 1e-15))
    assert sample_collar(ball, 10, 1).shape == (10, 4)
    np.testing.assert_array_equal(sample_collar(disc, 5, 2), sample_collar(disc, 5, 2))
    with pytest.raises(ValueError):
        sample_collar(disc, 0, 1)


def test_sample_domain_inside(ball):
    X = sample_domain(ball, 200, 0)
    assert X.shape == (200, 4)
    assert np.all(ball.contains(X))


@given(st.floats(-2.0, 3.0, allow_nan=False))
def test_smooth_step_range_and_symmetry(t):
    s = float(smooth_step_value(t))
    assert 0.0 <= s <= 1.0
    assert s + float(smooth_step_value(1.0 - t)) == pytest.approx(1.0, abs=1e-15)


@given(st.floats(0.0, 0.98), st.floats(0.0, 2 * math.pi))
def test_delta_positive_inside(r, th):
    disc = make_disc_domain()
    d = fa.evaluate(disc.delta, (r * math.cos(th), r * math.sin(th))).real
    assert d > 0
    if r >= 0.5:
        assert d == pytest.approx(1 - r, abs=1e-14)


def test_perturbation_hook_breaks_unit_gradient():
    dom = make_disc_domain(perturbation=1e-6)
    X = sample_collar(dom, 20, 0)
    assert np.max(np.abs(_grad_norm(dom, X) - 1)) > 1e-7
