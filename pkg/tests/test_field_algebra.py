import math
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import qmc

from holol1 import field_algebra as fa
from holol1.geometry import make_cutoff
from holol1.weights import inductive_weight

x, y = fa.coord(1), fa.coord(2)


def test_basic_evaluation():
    assert fa.evaluate(fa.const(2 + 3j), (0.1, 0.2)) == 2 + 3j
    assert fa.evaluate(fa.mul(x, y), (0.3, 0.4)) == pytest.approx(0.12, abs=1e-16)


def test_eval_context_validates(disc):
    ctx = fa.EvalContext((0.3, 0.4), disc)
    assert fa.evaluate(x, ctx) == 0.3
    with pytest.raises(ValueError):
        fa.EvalContext((1.5, 0.0), disc)
    with pytest.raises(ValueError):
        fa.EvalContext((0.1, 0.0, 0.0), disc)


def test_collar_quotient_guard(disc):
    z = make_cutoff(disc).zeta
    q = fa.collar_quotient(fa.sub(fa.ONE, z), disc.delta, disc.collar_inner)
    r = disc.radius_at_distance(disc.collar_inner / 2)
    assert fa.evaluate(q, (r, 0.0)) == 0
    r = disc.radius_at_distance(0.3)
    assert fa.evaluate(q, (r, 0.0)).real == pytest.approx(1 / 0.3, rel=1e-14)


def test_partial_examples(disc):
    assert fa.partial(fa.power(x, 2), 1) is fa.scale(2.0, x)
    assert fa.partial(fa.const(5.0), 2) is fa.ZERO
    assert fa.evaluate(fa.partial(disc.delta, 1), (0.9, 0.0)).real == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(ValueError):
        fa.partial(x, 0)


def test_operator_examples(disc):
    c = fa.const(1.7)
    assert fa.apply_N(c, disc) is fa.ZERO
    assert fa.apply_T(c, disc) is fa.ZERO
    assert fa.apply_laplacian(c, 2) is fa.ZERO
    assert fa.evaluate(fa.apply_T(y, disc), (0.9, 0.0)).real == pytest.approx(1.0, abs=1e-15)
    assert fa.evaluate(fa.apply_laplacian(fa.add(fa.power(x, 2), fa.power(y, 2)), 2),
                       (0.2, 0.1)) == pytest.approx(4.0)
    for r in (0.6, 0.8, 0.93):
        p = (r * math.cos(1.0), r * math.sin(1.0))
        assert fa.evaluate(disc.laplacian_delta, p).real == pytest.approx(-1 / r, rel=1e-13)
        assert fa.evaluate(fa.apply_N(disc.delta, disc), p).real == pytest.approx(1.0, abs=1e-14)
        for k in (1, 2, 3):
            v = fa.evaluate(fa.apply_N(fa.power(disc.delta, k + 1), disc), p).real
            assert v == pytest.approx((k + 1) * (1 - r) ** k, rel=1e-12)


def test_laplacian_of_delta_by_finite_differences(disc):
    h = 1e-4
    p = np.array([0.55, 0.62])
    f = lambda q: fa.evaluate(disc.delta, tuple(q)).real
    fd = sum((f(p + e) - 2 * f(p) + f(p - e)) / h ** 2 for e in (np.array([h, 0]), np.array([0, h])))
    assert fa.evaluate(disc.laplacian_delta, tuple(p)).real == pytest.approx(fd, rel=1e-5)


def test_simplify_identities():
    e = fa.exp(fa.mul(x, y))
    assert fa.add(fa.ZERO, e) is e
    assert fa.mul(fa.ONE, e) is e
    assert fa.mul(fa.ZERO, e) is fa.ZERO
    assert fa.simplify(e) is e
    assert fa.add(e, e) is fa.scale(2.0, e)
    assert fa.mul(e, e) is fa.power(e, 2)


def test_hash_consing_shares_nodes():
    a = fa.mul(fa.add(x, fa.const(1.0)), fa.exp(y))
    b = fa.mul(fa.exp(y), fa.add(fa.const(1.0), x))
    assert a is b


def test_sexpr_snapshot():
    e = fa.add(fa.mul(x, fa.exp(x)), fa.exp(x))
    s = fa.to_sexpr(e)
    assert s.count("exp") == 1
    assert "#1=" in s and "#1#" in s
    assert fa.to_sexpr(e) == s


def test_domain_violation_raised():
    with pytest.raises(fa.DomainViolation):
        fa.evaluate(fa.recip(x), (0.0, 0.3))


# random smooth expressions for property tests

_consts = st.floats(-1.5, 1.5, allow_nan=False).map(fa.const)


_real_leaves = st.one_of(st.just(x), st.just(y), _consts)


def _real_extend(children):
    # real-valued nodes only, so that the guarded wrappers stay positive
    pair = st.tuples(children, children)
    return st.one_of(
        pair.map(lambda p: fa.add(*p)),
        pair.map(lambda p: fa.mul(*p)),
        st.tuples(st.sampled_from([0.5, -2.0, 3.0]), children).map(lambda p: fa.scale(*p)),
        st.tuples(children, st.integers(2, 3)).map(lambda p: fa.power(*p)),
        children.map(lambda c: fa.recip(fa.add(fa.const(2.0), fa.power(c, 2)))),
        children.map(lambda c: fa.exp(fa.scale(0.5, fa.recip(fa.add(fa.const(1.0), fa.power(c, 2)))))),
        children.map(lambda c: fa.sqrt(fa.add(fa.const(1.0), fa.power(c, 2)))),
        children.map(lambda c: fa.smooth_step_e(fa.add(fa.const(1.2), fa.scale(0.3, fa.recip(
            fa.add(fa.const(1.0), fa.power(c, 2))))))),
    )


real_exprs = st.recursive(_real_leaves, _real_extend, max_leaves=6)


def _complex_extend(children):
    pair = st.tuples(children, children)
    return st.one_of(
        pair.map(lambda p: fa.add(*p)),
        pair.map(lambda p: fa.mul(*p)),
        st.tuples(st.sampled_from([1j, 0.3 - 0.7j, -2.0]), children).map(lambda p: fa.scale(*p)),
        children.map(lambda c: fa.exp(fa.scale(0.5j, c))),
    )


# complex combinations of real-valued building blocks
exprs = st.recursive(real_exprs, _complex_extend, max_leaves=3)
points = st.tuples(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))


@given(real_exprs, points, st.sampled_from([1, 2]))
def test_partial_matches_finite_differences(e, p, j):
    h = 1e-5
    step = np.array([h, 0.0]) if j == 1 else np.array([0.0, h])
    P = np.array(p)
    exact = fa.evaluate(fa.partial(e, j), p)
    fd = (fa.evaluate(e, tuple(P + step)) - fa.evaluate(e, tuple(P - step))) / (2 * h)
    scale = max(1.0, abs(exact), abs(fa.evaluate(e, p)))
    assert abs(exact - fd) <= 1e-7 * scale


@given(real_exprs, points)
def test_clairaut_symmetry(e, p):
    a = fa.evaluate(fa.partial(fa.partial(e, 1), 2), p)
    b = fa.evaluate(fa.partial(fa.partial(e, 2), 1), p)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@given(exprs)
def test_simplify_preserves_values(e):
    X = np.random.default_rng(0).uniform(-0.6, 0.6, size=(100, 2))
    a = fa.evaluate_array(e, X)
    b = fa.evaluate_array(fa.simplify(e), X)
    np.testing.assert_allclose(b, a, rtol=1e-14, atol=1e-14)


@given(exprs)
def test_array_and_pointwise_evaluation_agree(e):
    X = np.random.default_rng(1).uniform(-0.6, 0.6, size=(7, 2))
    arr = fa.evaluate_array(e, X)
    for i, row in enumerate(X):
        assert fa.evaluate(e, tuple(row)) == arr[i]


def _halton_disc(count):
    u = qmc.Halton(d=2, scramble=False).random(count + 1)[1:]
    r = np.sqrt(u[:, 0])
    t = 2 * np.pi * u[:, 1]
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)


@pytest.mark.parametrize("g", ["one", "conj_pow:2"])
def test_guard_soundness_on_assembled_weights(disc, g):
    from holol1.holo_catalog import g_expression

    X = _halton_disc(100_000)
    X = np.vstack([X, [[0.0, 0.0]], [[1.0, 0.0]], [[0.0, -1.0]]])
    w = inductive_weight(3, g_expression(g, disc), disc)
    v = fa.evaluate_array(w.weighted(), X)
    assert np.all(np.isfinite(v))


def test_sharing_beats_tree_size(disc):
    from holol1.holo_catalog import g_expression

    w = inductive_weight(3, g_expression("conj_pow:2", disc), disc)
    shared, unshared = w.sizes[-1]
    assert shared == fa.node_count(w.omega)
    assert shared < unshared
    assert unshared > 1000 * shared


def test_concurrent_construction_interns_once():
    out = []

    def build():
        out.append(fa.mul(fa.exp(fa.add(x, fa.const(0.123456))), fa.power(y, 5)))

    ts = [threading.Thread(target=build) for _ in range(8)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert all(o is out[0] for o in out)
