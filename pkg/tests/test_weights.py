import numpy as np
import pytest

from holol1 import field_algebra as fa
from holol1.geometry import make_cutoff, make_disc_domain, sample_collar
from holol1.holo_catalog import g_expression
from holol1.weights import (Variant, base_weight, inductive_weight, loglog_slope,
                            recursion_residual, vanishing_profile)

ONE = fa.ONE


def test_base_weight_interior_and_collar(disc):
    w1 = base_weight(ONE, disc)
    assert fa.evaluate(w1, (0.0, 0.0)).real == pytest.approx(4 / 3, rel=1e-14)
    # zeta == 1 near the boundary, so omega_1 = -Lap(delta) = 1/r
    assert fa.evaluate(w1, (0.97, 0.0)).real == pytest.approx(1 / 0.97, rel=1e-13)
    assert base_weight(fa.ZERO, disc) is fa.ZERO


def test_base_weight_collar_by_finite_differences(disc):
    # -Lap(delta) at (0.97, 0) from a five-point stencil on delta itself
    h = 1e-3
    f = lambda a, b: fa.evaluate(disc.delta, (a, b)).real
    x0 = 0.97
    lap = (f(x0 + h, 0) + f(x0 - h, 0) + f(x0, h) + f(x0, -h) - 4 * f(x0, 0)) / h ** 2
    assert fa.evaluate(base_weight(ONE, disc), (x0, 0.0)).real == pytest.approx(-lap, rel=1e-5)


def test_k1_variants_identical(disc):
    a = inductive_weight(1, ONE, disc, variant="corrected")
    b = inductive_weight(1, ONE, disc, variant="paper_literal")
    assert a.omega is b.omega is base_weight(ONE, disc)


def test_k2_interior_values(disc):
    p = (0.1, 0.2)
    d = fa.evaluate(disc.delta, p).real
    lap = fa.evaluate(disc.laplacian_delta, p).real
    c = inductive_weight(2, ONE, disc, variant=Variant.CORRECTED)
    lit = inductive_weight(2, ONE, disc, variant=Variant.PAPER_LITERAL)
    assert fa.evaluate(c.omega, p).real == pytest.approx(1 / d ** 2, rel=1e-13)
    assert fa.evaluate(lit.omega, p).real == pytest.approx(1 / d ** 2 - lap / (2 * d), rel=1e-13)


@pytest.mark.parametrize("k", [2, 3])
def test_variants_agree_where_zeta_is_one(disc, k):
    X = sample_collar(disc, 200, 5)
    X = X[disc.delta_values(X) < disc.collar_inner * 0.999]
    g = g_expression("conj_pow:1", disc)
    a = inductive_weight(k, g, disc, variant="corrected").evaluate(X)
    b = inductive_weight(k, g, disc, variant="paper_literal").evaluate(X)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_rejects_bad_order(disc):
    for k in (0, -1, 1.5):
        with pytest.raises(ValueError):
            inductive_weight(k, ONE, disc)


def test_variant_parse():
    assert Variant.parse("Paper-Literal") is Variant.PAPER_LITERAL
    assert Variant.parse(Variant.CORRECTED) is Variant.CORRECTED
    with pytest.raises(ValueError):
        Variant.parse("fixed")


@pytest.mark.parametrize("k", [1, 2, 3])
def test_recursion_structure(disc, k):
    w = inductive_weight(k, g_expression("exp_x1", disc), disc)
    assert recursion_residual(w)
    assert len(w.sizes) == k


@pytest.mark.parametrize("k", [1, 2, 3])
def test_linearity_in_g(disc, k):
    g1, g2 = g_expression("conj_pow:1", disc), g_expression("exp_x1", disc)
    a, b = 0.7 - 0.2j, -1.3
    lhs = inductive_weight(k, fa.add(fa.scale(a, g1), fa.scale(b, g2)), disc).evaluate
    w1 = inductive_weight(k, g1, disc).evaluate
    w2 = inductive_weight(k, g2, disc).evaluate
    X = np.random.default_rng(3).uniform(-0.7, 0.7, size=(100, 2))
    ref = a * w1(X) + b * w2(X)
    np.testing.assert_allclose(lhs(X), ref, rtol=1e-12, atol=1e-12 * np.max(np.abs(ref)))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_boundedness_under_collar_change(k):
    for ci in (0.05, 0.045):
        dom = make_disc_domain(ci, 0.15)
        w = inductive_weight(k, g_expression("exp_x1", dom), dom, make_cutoff(dom))
        v = np.abs(w.evaluate(sample_collar(dom, 10_000, 2)))
        assert np.all(np.isfinite(v))
        assert v.max() <= 1e6


def test_vanishing_profile_disc(disc):
    w = inductive_weight(1, ONE, disc)
    prof = vanishing_profile(w, [1e-2, 1e-3, 1e-4])
    assert all(abs(s - 1) <= 0.1 for s in prof.slopes[0])
    assert not any(prof.degenerate[0])
    assert np.isfinite(prof.sup_abs_omega)


def test_vanishing_profile_flags_identically_zero(disc):
    # div(r^{-1} r_hat) = 0 in the plane, so omega_2 vanishes where zeta == 1
    prof = vanishing_profile(inductive_weight(2, ONE, disc), [1e-2, 1e-3])
    assert all(prof.degenerate[0])


def test_vanishing_profile_rejects_scales(disc):
    w = inductive_weight(1, ONE, disc)
    with pytest.raises(ValueError):
        vanishing_profile(w, [0.06])
    with pytest.raises(ValueError):
        vanishing_profile(w, [])


def test_loglog_slope():
    x = np.array([1e-1, 1e-2, 1e-3])
    assert loglog_slope(x, 3 * x ** 2) == pytest.approx(2.0)
