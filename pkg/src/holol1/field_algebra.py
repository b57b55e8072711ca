"""Expression IR for smooth fields on a closed domain, with structural derivatives.

Expressions are immutable, hash-consed DAG nodes over the real coordinates
``x_1 .. x_{2n}`` with complex scalars.  Building goes through the smart
constructors below (``add``, ``mul``, ``scale`` ...), which fold constants,
flatten sums and products, merge like terms and intern every node, so that two
structurally equal subtrees are the same Python object.

Construction is expected to happen in a single build phase; the intern table is
lock-protected, so concurrent construction is safe but not parallel.  Evaluation
is pure and may run concurrently once expressions are built.

Evaluation semantics worth knowing:

* A product with an exactly-zero factor is zero, even when another factor is
  infinite or NaN at that point.  Smooth-step factors such as ``exp(-1/t)``
  evaluate to an exact 0 off their support, which is what keeps the
  ``1/|x|`` factors from the chain rule of ``sqrt`` harmless at the origin.
* ``CollarQuotient(f)`` is ``f / delta`` where ``delta >= eps1 * (1 - 1e-9)``
  and exactly 0 elsewhere.  The caller guarantees ``supp f`` lies in
  ``{delta >= eps1}``.
* Any non-finite value surviving to the root raises :class:`DomainViolation`.
"""
from __future__ import annotations

import hashlib
import math
import threading
import weakref
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

__all__ = [
    "Expr", "DomainViolation", "EvalContext",
    "const", "coord", "add", "sub", "neg", "mul", "scale", "power", "recip",
    "exp", "sqrt", "smooth_step_e", "collar_quotient",
    "partial", "gradient", "apply_N", "apply_T", "apply_laplacian",
    "simplify", "evaluate", "evaluate_array", "node_count", "tree_size",
    "to_sexpr",
]

CONST = "const"
COORD = "coord"
SUM = "sum"
PRODUCT = "product"
SCALE = "scale"
POWER = "power"
RECIP = "recip"
EXP = "exp"
SQRT = "sqrt"
STEPE = "stepe"
CQUOT = "cquot"

# relative slack on the CollarQuotient guard
GUARD_SLACK = 1e-9

_DISPLAY = {
    CONST: "const", COORD: "x", SUM: "+", PRODUCT: "*", SCALE: "scale",
    POWER: "pow", RECIP: "recip", EXP: "exp", SQRT: "sqrt", STEPE: "stepe",
    CQUOT: "cquot",
}


class DomainViolation(ArithmeticError):
    """A singular primitive was evaluated outside its guard (an assembly bug)."""


def _norm_scalar(c: complex) -> complex | float:
    c = complex(c)
    if c.imag == 0.0:
        return float(c.real) + 0.0
    return complex(c.real + 0.0, c.imag + 0.0)


def _fmt_scalar(c: complex | float | int) -> str:
    if isinstance(c, complex):
        sign = "+" if math.copysign(1.0, c.imag) > 0 else "-"
        return f"{c.real!r}{sign}{abs(c.imag)!r}j"
    return repr(c)


class Expr:
    """One interned node.  Do not instantiate directly; use the constructors."""

    __slots__ = ("kind", "value", "children", "digest", "_partials", "_plan",
                 "__weakref__")

    kind: str
    value: Any
    children: tuple["Expr", ...]
    digest: bytes

    def __repr__(self) -> str:
        s = to_sexpr(self)
        return s if len(s) < 200 else s[:197] + "..."

    # operator sugar keeps weight assembly readable
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n: int):
        return power(self, n)

    @property
    def is_const(self) -> bool:
        return self.kind == CONST


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(x)


_TABLE: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()
_LOCK = threading.RLock()


def _intern(kind: str, value: Any, children: tuple[Expr, ...] = ()) -> Expr:
    if kind == CONST or kind == SCALE:
        c = complex(value)
        vkey: Any = (c.real, c.imag)
    else:
        vkey = value
    key = (kind, vkey, tuple(id(c) for c in children))
    with _LOCK:
        node = _TABLE.get(key)
        if node is not None:
            return node
        node = Expr.__new__(Expr)
        node.kind = kind
        node.value = value
        node.children = children
        h = hashlib.blake2b(digest_size=16)
        h.update(kind.encode())
        h.update(_fmt_scalar(value).encode() if kind in (CONST, SCALE, CQUOT)
                 else repr(value).encode())
        for c in children:
            h.update(c.digest)
        node.digest = h.digest()
        node._partials = {}
        node._plan = None
        _TABLE[key] = node
        return node


# ----------------------------------------------------------------------------
# smart constructors


def const(c) -> Expr:
    return _intern(CONST, _norm_scalar(c))


ZERO = const(0.0)
ONE = const(1.0)


def coord(j: int) -> Expr:
    """Real coordinate ``x_j`` (1-based)."""
    if j < 1:
        raise ValueError(f"coordinate index must be >= 1, got {j}")
    return _intern(COORD, int(j))


def _split_coef(e: Expr) -> tuple[complex, Expr]:
    if e.kind == SCALE:
        return complex(e.value), e.children[0]
    return 1.0 + 0j, e


def add(*terms: Expr) -> Expr:
    """Sum with flattening, constant folding and like-term merging."""
    constant = 0j
    coefs: dict[int, complex] = {}
    bases: dict[int, Expr] = {}
    stack = [_lift(t) for t in reversed(terms)]
    while stack:
        t = stack.pop()
        if t.kind == SUM:
            stack.extend(reversed(t.children))
            continue
        if t.kind == CONST:
            constant += t.value
            continue
        if t.kind == SCALE and t.children[0].kind == SUM:
            a = complex(t.value)
            stack.extend(scale(a, c) for c in reversed(t.children[0].children))
            continue
        a, b = _split_coef(t)
        k = id(b)
        if k in coefs:
            coefs[k] += a
        else:
            coefs[k] = a
            bases[k] = b
    out = []
    for k, b in bases.items():
        a = coefs[k]
        if a != 0:
            out.append(scale(a, b))
    if constant != 0:
        out.append(const(constant))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    out.sort(key=lambda e: e.digest)
    return _intern(SUM, None, tuple(out))


def neg(e: Expr) -> Expr:
    return scale(-1.0, e)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def scale(a, e: Expr) -> Expr:
    a = complex(a)
    e = _lift(e)
    if a == 0 or (e.kind == CONST and e.value == 0):
        return ZERO
    if a == 1:
        return e
    if e.kind == CONST:
        return const(a * e.value)
    if e.kind == SCALE:
        return scale(a * e.value, e.children[0])
    return _intern(SCALE, _norm_scalar(a), (e,))


def mul(*factors: Expr) -> Expr:
    """Product with flattening, coefficient extraction and power merging."""
    coef = 1.0 + 0j
    expo: dict[int, int] = {}
    bases: dict[int, Expr] = {}
    stack = [_lift(f) for f in reversed(factors)]
    while stack:
        f = stack.pop()
        if f.kind == PRODUCT:
            stack.extend(reversed(f.children))
            continue
        if f.kind == CONST:
            coef *= f.value
            continue
        if f.kind == SCALE:
            coef *= f.value
            stack.append(f.children[0])
            continue
        if f.kind == POWER:
            b, n = f.children[0], f.value
        else:
            b, n = f, 1
        k = id(b)
        if k in expo:
            expo[k] += n
        else:
            expo[k] = n
            bases[k] = b
    if coef == 0:
        return ZERO
    out = [power(bases[k], n) for k, n in expo.items()]
    if not out:
        return const(coef)
    if len(out) == 1:
        body = out[0]
    else:
        out.sort(key=lambda e: e.digest)
        body = _intern(PRODUCT, None, tuple(out))
    return scale(coef, body)


def power(e: Expr, n: int) -> Expr:
    n = int(n)
    if n < 0:
        raise ValueError("negative powers are expressed with recip()")
    e = _lift(e)
    if n == 0:
        return ONE
    if n == 1:
        return e
    if e.kind == CONST:
        return const(complex(e.value) ** n)
    if e.kind == POWER:
        return power(e.children[0], e.value * n)
    if e.kind == SCALE:
        return scale(complex(e.value) ** n, power(e.children[0], n))
    return _intern(POWER, n, (e,))


def recip(e: Expr) -> Expr:
    e = _lift(e)
    if e.kind == CONST:
        if e.value == 0:
            raise ZeroDivisionError("recip of the zero constant")
        return const(1.0 / complex(e.value))
    if e.kind == RECIP:
        return e.children[0]
    if e.kind == SCALE:
        return scale(1.0 / complex(e.value), recip(e.children[0]))
    return _intern(RECIP, None, (e,))


def exp(e: Expr) -> Expr:
    e = _lift(e)
    if e.kind == CONST:
        return const(np.exp(complex(e.value)))
    return _intern(EXP, None, (e,))


def sqrt(e: Expr) -> Expr:
    e = _lift(e)
    if e.kind == CONST:
        return const(np.sqrt(complex(e.value)))
    return _intern(SQRT, None, (e,))


def smooth_step_e(e: Expr) -> Expr:
    """The primitive ``exp(-1/t)`` for ``t > 0``, else 0."""
    e = _lift(e)
    if e.kind == CONST:
        t = float(np.real(e.value))
        return const(np.exp(-1.0 / t) if t > 0 else 0.0)
    return _intern(STEPE, None, (e,))


def collar_quotient(f: Expr, delta: Expr, eps1: float) -> Expr:
    """``f / delta`` with the collar guard; requires ``supp f`` in ``{delta >= eps1}``."""
    f = _lift(f)
    if f.kind == CONST and f.value == 0:
        return ZERO
    if f.kind == SCALE:
        return scale(f.value, collar_quotient(f.children[0], delta, eps1))
    return _intern(CQUOT, float(eps1), (f, delta))


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up through the smart constructors."""
    memo: dict[int, Expr] = {}
    for node in _topo(e):
        ch = [memo[id(c)] for c in node.children]
        memo[id(node)] = _rebuild(node, ch)
    return memo[id(e)]


def _rebuild(node: Expr, ch: Sequence[Expr]) -> Expr:
    k = node.kind
    if k in (CONST, COORD):
        return node
    if k == SUM:
        return add(*ch)
    if k == PRODUCT:
        return mul(*ch)
    if k == SCALE:
        return scale(node.value, ch[0])
    if k == POWER:
        return power(ch[0], node.value)
    if k == RECIP:
        return recip(ch[0])
    if k == EXP:
        return exp(ch[0])
    if k == SQRT:
        return sqrt(ch[0])
    if k == STEPE:
        return smooth_step_e(ch[0])
    if k == CQUOT:
        return collar_quotient(ch[0], ch[1], node.value)
    raise AssertionError(k)


# ----------------------------------------------------------------------------
# structural differentiation


def partial(e: Expr, j: int) -> Expr:
    """Exact derivative of ``e`` with respect to ``x_j``, memoised per node."""
    if j < 1:
        raise ValueError(f"axis must be >= 1, got {j}")
    cached = e._partials.get(j)
    if cached is not None:
        return cached
    # differentiate children first so deep DAGs never hit the recursion limit
    for node in _topo(e):
        if j not in node._partials:
            node._partials[j] = _partial_node(node, j)
    return e._partials[j]


def _partial_node(e: Expr, j: int) -> Expr:
    k = e.kind
    d = [c._partials.get(j) for c in e.children]
    if k == CONST:
        return ZERO
    if k == COORD:
        return ONE if e.value == j else ZERO
    if k == SUM:
        return add(*d)
    if k == PRODUCT:
        terms = []
        ch = e.children
        for i, di in enumerate(d):
            if di is ZERO:
                continue
            terms.append(mul(*ch[:i], di, *ch[i + 1:]))
        return add(*terms)
    if k == SCALE:
        return scale(e.value, d[0])
    if k == POWER:
        c, n = e.children[0], e.value
        return scale(n, mul(power(c, n - 1), d[0]))
    if k == RECIP:
        return neg(mul(power(e, 2), d[0]))
    if k == EXP:
        return mul(e, d[0])
    if k == SQRT:
        return scale(0.5, mul(recip(e), d[0]))
    if k == STEPE:
        # e'(t) = e(t) / t^2
        return mul(e, power(recip(e.children[0]), 2), d[0])
    if k == CQUOT:
        f, delta = e.children
        eps1 = e.value
        ddelta = partial(delta, j)
        return sub(collar_quotient(d[0], delta, eps1),
                   collar_quotient(mul(e, ddelta), delta, eps1))
    raise AssertionError(k)


def gradient(e: Expr, dim: int) -> list[Expr]:
    return [partial(e, j) for j in range(1, dim + 1)]


def apply_N(e: Expr, domain) -> Expr:
    """Normal field ``sum_j delta_{x_j} d/dx_j`` applied to ``e``."""
    return add(*(mul(dj, partial(e, j))
                 for j, dj in enumerate(domain.grad_delta, start=1)))


def apply_T(e: Expr, domain) -> Expr:
    """Tangential field ``sum_j delta_{x_2j} d/dx_{2j-1} - delta_{x_{2j-1}} d/dx_{2j}``."""
    g = domain.grad_delta
    terms = []
    for j in range(1, domain.n + 1):
        a, b = 2 * j - 1, 2 * j
        terms.append(mul(g[b - 1], partial(e, a)))
        terms.append(neg(mul(g[a - 1], partial(e, b))))
    return add(*terms)


def apply_laplacian(e: Expr, dim: int) -> Expr:
    return add(*(partial(partial(e, j), j) for j in range(1, dim + 1)))


# ----------------------------------------------------------------------------
# traversal and metrics


def _topo(root: Expr) -> list[Expr]:
    """Children-before-parents ordering of the DAG below ``root``."""
    order: list[Expr] = []
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for c in reversed(node.children):
            if id(c) not in seen:
                stack.append((c, False))
    return order


def node_count(e: Expr) -> int:
    """Number of distinct nodes (the shared DAG size)."""
    return len(_topo(e))


def tree_size(e: Expr) -> int:
    """Size the expression would have as a tree without sharing."""
    size: dict[int, int] = {}
    for node in _topo(e):
        size[id(node)] = 1 + sum(size[id(c)] for c in node.children)
    return size[id(e)]


def to_sexpr(e: Expr) -> str:
    """Plain-text dump; shared nodes are labelled ``#n=`` and referenced as ``#n#``."""
    refs: dict[int, int] = {}
    for node in _topo(e):
        for c in node.children:
            refs[id(c)] = refs.get(id(c), 0) + 1
    labels: dict[int, int] = {}
    out: list[str] = []

    def emit(node: Expr) -> None:
        if id(node) in labels:
            out.append(f"#{labels[id(node)]}#")
            return
        if node.kind == CONST:
            out.append(_fmt_scalar(node.value))
            return
        if node.kind == COORD:
            out.append(f"x{node.value}")
            return
        if refs.get(id(node), 0) > 1:
            labels[id(node)] = len(labels) + 1
            out.append(f"#{labels[id(node)]}=")
        out.append("(" + _DISPLAY[node.kind])
        if node.kind in (SCALE, POWER, CQUOT):
            out.append(" " + _fmt_scalar(node.value))
        for c in node.children:
            out.append(" ")
            emit(c)
        out.append(")")

    # iterative emission would be nicer but dumps are for small/medium trees
    import sys
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10000))
    try:
        emit(e)
    finally:
        sys.setrecursionlimit(limit)
    return "".join(out)


# ----------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class EvalContext:
    """A single evaluation point, optionally tied to a domain for validation."""

    point: tuple[float, ...]
    domain: Any = None

    def __post_init__(self):
        if self.domain is not None:
            if len(self.point) != 2 * self.domain.n:
                raise ValueError("point dimension does not match the domain")
            if not self.domain.contains(np.asarray(self.point, float)[None, :])[0]:
                raise ValueError(f"point {self.point} lies outside the closed domain")


@dataclass
class _Plan:
    nodes: list[Expr]
    index: dict[int, int]
    last_use: list[int]


def _plan(e: Expr) -> _Plan:
    if e._plan is not None:
        return e._plan
    nodes = _topo(e)
    index = {id(n): i for i, n in enumerate(nodes)}
    last = list(range(len(nodes)))
    for i, n in enumerate(nodes):
        for c in n.children:
            last[index[id(c)]] = i
    last[-1] = len(nodes)
    plan = _Plan(nodes, index, last)
    e._plan = plan
    return plan


def evaluate_array(e: Expr, points, chunk: int = 16384) -> np.ndarray:
    """Evaluate ``e`` at every row of ``points`` (shape ``(m, dim)``)."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    m = X.shape[0]
    if m <= chunk:
        return _eval_chunk(e, X)
    parts = [_eval_chunk(e, X[i:i + chunk]) for i in range(0, m, chunk)]
    return np.concatenate(parts)


def evaluate(e: Expr, ctx: EvalContext | Sequence[float]) -> complex:
    """Evaluate at one point; returns a Python complex."""
    pt = ctx.point if isinstance(ctx, EvalContext) else ctx
    return complex(evaluate_array(e, np.asarray(pt, float)[None, :])[0])


def _eval_chunk(e: Expr, X: np.ndarray) -> np.ndarray:
    plan = _plan(e)
    nodes, index, last = plan.nodes, plan.index, plan.last_use
    m = X.shape[0]
    vals: list[Any] = [None] * len(nodes)
    dying: dict[int, list[int]] = {}
    for i, li in enumerate(last):
        dying.setdefault(li, []).append(i)
    with np.errstate(all="ignore"):
        for i, node in enumerate(nodes):
            ch = [vals[index[id(c)]] for c in node.children]
            vals[i] = _eval_node(node, ch, X, m)
            for d in dying.get(i, ()):
                if d != i:
                    vals[d] = None
    out = np.asarray(vals[-1])
    if out.shape != (m,):
        out = np.broadcast_to(out, (m,)).copy()
    if not np.all(np.isfinite(out)):
        bad = int(np.count_nonzero(~np.isfinite(out)))
        raise DomainViolation(
            f"non-finite value at {bad} of {m} points (unguarded singular primitive)")
    return out


def _eval_node(node: Expr, ch: list, X: np.ndarray, m: int):
    k = node.kind
    if k == CONST:
        return np.full(m, node.value)
    if k == COORD:
        return X[:, node.value - 1]
    if k == SUM:
        acc = ch[0] + ch[1]
        for v in ch[2:]:
            acc = acc + v
        return acc
    if k == PRODUCT:
        acc = ch[0] * ch[1]
        for v in ch[2:]:
            acc = acc * v
        if not np.all(np.isfinite(acc)):
            zero = ch[0] == 0
            for v in ch[1:]:
                zero |= v == 0
            acc = np.where(zero, 0.0, acc)
        return acc
    if k == SCALE:
        return node.value * ch[0]
    if k == POWER:
        return ch[0] ** node.value
    if k == RECIP:
        return 1.0 / ch[0]
    if k == EXP:
        return np.exp(ch[0])
    if k == SQRT:
        v = ch[0]
        if np.iscomplexobj(v):
            v = _real_or_raise(v, "sqrt")
        return np.sqrt(v)
    if k == STEPE:
        t = ch[0]
        if np.iscomplexobj(t):
            t = _real_or_raise(t, "smooth step")
        pos = t > 0
        return np.where(pos, np.exp(-1.0 / np.where(pos, t, 1.0)), 0.0)
    if k == CQUOT:
        f, delta = ch
        if np.iscomplexobj(delta):
            delta = _real_or_raise(delta, "collar quotient")
        ok = delta >= node.value * (1.0 - GUARD_SLACK)
        return np.where(ok, f / np.where(ok, delta, 1.0), 0.0)
    raise AssertionError(k)


def _real_or_raise(v: np.ndarray, what: str) -> np.ndarray:
    if np.any(np.abs(v.imag) > 0):
        raise DomainViolation(f"{what} of a complex argument")
    return v.real
