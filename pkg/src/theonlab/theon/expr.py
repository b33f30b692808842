"""Theon expressions: a closed set of membership tests on points of ``E_k``.

A point of ``E_k`` over ``[0,1]^d`` assigns a ``d``-vector to every nonempty
subset ``A`` of ``[k]``. Expressions are evaluated on whole batches at once:
the context holds, for every global subset mask, an ``(N, d)`` array, and a
tuple ``alpha`` of global vertices playing the roles of ``1..k``.

Node kinds (JSON ``"op"`` in parentheses):

* ``Const`` (``const``) -- constant truth value
* ``Thresh`` (``thresh``) -- ``x_A[f] <op> c``
* ``Cmp`` (``cmp``) -- ``x_A[f] < x_B[f]``
* ``SumMod`` (``summod``) -- ``frac(sum of x_A[f]) <op> c``
* ``MinFirst`` (``minfirst``) -- ``min_v x_{v}[f] <op> c``
* ``Sign`` (``sign``) -- the permutation ranking the first-order coordinates is even
* ``SigmaIs`` (``sigma``) -- that permutation equals a given one
* ``Not``/``And``/``Or``/``Equiv`` -- boolean structure
* ``FactorProj`` (``factor``) -- evaluate the child with factor indices shifted
* ``Pullback`` (``pullback``) -- evaluate the child at the projection along ``alpha``

Ties among first-order coordinates are broken by vertex index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

_OPS = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
}


class ExprError(ValueError):
    pass


def _vset(a) -> Tuple[int, ...]:
    t = tuple(sorted(int(v) for v in a))
    if not t or t[0] < 1 or len(set(t)) != len(t):
        raise ExprError(f"bad vertex subset {a!r}")
    return t


def _op(op):
    if op not in _OPS:
        raise ExprError(f"unknown comparison {op!r}")
    return op


class Expr:
    """Base class; subclasses are frozen dataclasses."""

    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class Const(Expr):
    value: bool


@dataclass(frozen=True)
class Thresh(Expr):
    subset: Tuple[int, ...]
    op: str
    c: float
    factor: int = 0

    def __post_init__(self):
        object.__setattr__(self, "subset", _vset(self.subset))
        object.__setattr__(self, "op", _op(self.op))
        object.__setattr__(self, "c", float(self.c))


@dataclass(frozen=True)
class Cmp(Expr):
    left: Tuple[int, ...]
    right: Tuple[int, ...]
    factor: int = 0

    def __post_init__(self):
        object.__setattr__(self, "left", _vset(self.left))
        object.__setattr__(self, "right", _vset(self.right))


@dataclass(frozen=True)
class SumMod(Expr):
    terms: Tuple[Tuple[Tuple[int, ...], int], ...]
    op: str
    c: float

    def __post_init__(self):
        terms = tuple((_vset(a), int(f)) for a, f in self.terms)
        if not terms:
            raise ExprError("SumMod needs at least one term")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "op", _op(self.op))
        object.__setattr__(self, "c", float(self.c))


@dataclass(frozen=True)
class MinFirst(Expr):
    op: str
    c: float
    factor: int = 0

    def __post_init__(self):
        object.__setattr__(self, "op", _op(self.op))
        object.__setattr__(self, "c", float(self.c))


@dataclass(frozen=True)
class Sign(Expr):
    factor: int = 0


@dataclass(frozen=True)
class SigmaIs(Expr):
    """``sigma_x == perm`` where ``perm[i-1]`` is the rank of ``x_{i}``."""

    perm: Tuple[int, ...]
    factor: int = 0

    def __post_init__(self):
        p = tuple(int(v) for v in self.perm)
        if sorted(p) != list(range(1, len(p) + 1)):
            raise ExprError(f"{self.perm!r} is not a permutation")
        object.__setattr__(self, "perm", p)


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


@dataclass(frozen=True)
class And(Expr):
    args: Tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Or(Expr):
    args: Tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Equiv(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class FactorProj(Expr):
    offset: int
    arg: Expr


@dataclass(frozen=True)
class Pullback(Expr):
    """Evaluate ``arg`` (arity ``len(alpha)``) at ``alpha^*(x)``; ``alpha`` is 1-based and injective."""

    alpha: Tuple[int, ...]
    arg: Expr

    def __post_init__(self):
        a = tuple(int(v) for v in self.alpha)
        if len(set(a)) != len(a) or not a or min(a) < 1:
            raise ExprError(f"pullback map {self.alpha!r} must be injective and 1-based")
        object.__setattr__(self, "alpha", a)


# --- validation ------------------------------------------------------------

def check_expr(e: Expr, k: int, dim: int, offset: int = 0) -> None:
    """Raise :class:`ExprError` unless every subset lies in ``[k]`` and every factor in ``range(dim)``."""

    def fac(f):
        if not 0 <= f + offset < dim:
            raise ExprError(f"factor {f + offset} outside a {dim}-dimensional space")

    def sub(a):
        if a[-1] > k:
            raise ExprError(f"subset {a} is not inside [{k}]")

    if isinstance(e, Const):
        return
    if isinstance(e, Thresh):
        sub(e.subset), fac(e.factor)
    elif isinstance(e, Cmp):
        sub(e.left), sub(e.right), fac(e.factor)
    elif isinstance(e, SumMod):
        for a, f in e.terms:
            sub(a), fac(f)
    elif isinstance(e, (MinFirst, Sign)):
        fac(e.factor)
    elif isinstance(e, SigmaIs):
        if len(e.perm) != k:
            raise ExprError(f"sigma test of length {len(e.perm)} in arity {k}")
        fac(e.factor)
    elif isinstance(e, Not):
        check_expr(e.arg, k, dim, offset)
    elif isinstance(e, (And, Or)):
        for a in e.args:
            check_expr(a, k, dim, offset)
    elif isinstance(e, Equiv):
        check_expr(e.left, k, dim, offset)
        check_expr(e.right, k, dim, offset)
    elif isinstance(e, FactorProj):
        check_expr(e.arg, k, dim, offset + e.offset)
    elif isinstance(e, Pullback):
        if max(e.alpha) > k:
            raise ExprError(f"pullback {e.alpha} leaves [{k}]")
        check_expr(e.arg, len(e.alpha), dim, offset)
    else:
        raise ExprError(f"unknown node {e!r}")


def reads(e: Expr, k: int) -> set:
    """Local subsets (as sorted tuples) whose coordinates ``e`` may read, in arity ``k``."""
    out = set()
    if isinstance(e, Thresh):
        out.add(e.subset)
    elif isinstance(e, Cmp):
        out.update((e.left, e.right))
    elif isinstance(e, SumMod):
        out.update(a for a, _ in e.terms)
    elif isinstance(e, (MinFirst, Sign, SigmaIs)):
        out.update((v,) for v in range(1, k + 1))
    elif isinstance(e, Not):
        out |= reads(e.arg, k)
    elif isinstance(e, (And, Or)):
        for a in e.args:
            out |= reads(a, k)
    elif isinstance(e, Equiv):
        out |= reads(e.left, k) | reads(e.right, k)
    elif isinstance(e, FactorProj):
        out |= reads(e.arg, k)
    elif isinstance(e, Pullback):
        for s in reads(e.arg, len(e.alpha)):
            out.add(tuple(sorted(e.alpha[v - 1] for v in s)))
    return out


# --- evaluation ------------------------------------------------------------

def subset_mask(vertices) -> int:
    m = 0
    for v in vertices:
        m |= 1 << (v - 1)
    return m


@lru_cache(maxsize=None)
def _global_mask(alpha: Tuple[int, ...], local: Tuple[int, ...]) -> int:
    return subset_mask(alpha[v - 1] for v in local)


class EvalContext:
    """Coordinates of one batch plus the memo table shared by all evaluations on it."""

    def __init__(self, coords: Dict[int, np.ndarray], size: int):
        self.coords = coords
        self.size = size
        self.cache: Dict = {}

    def coord(self, alpha, local, factor):
        return self.coords[_global_mask(alpha, local)][:, factor]


def evaluate(e: Expr, ctx: EvalContext, alpha: Tuple[int, ...], offset: int = 0) -> np.ndarray:
    """Boolean array of length ``ctx.size``: membership of ``alpha^*(theta)`` in ``e``."""
    key = (id(e), alpha, offset)
    hit = ctx.cache.get(key)
    if hit is not None:
        return hit
    out = _evaluate(e, ctx, alpha, offset)
    if not isinstance(out, np.ndarray) or out.shape != (ctx.size,):
        out = np.broadcast_to(np.asarray(out, dtype=bool), (ctx.size,))
    ctx.cache[key] = out
    return out


def _firsts(ctx, alpha, factor):
    return [ctx.coord(alpha, (v,), factor) for v in range(1, len(alpha) + 1)]


def _evaluate(e, ctx, alpha, off):
    if isinstance(e, Const):
        return np.full(ctx.size, e.value, dtype=bool)
    if isinstance(e, Thresh):
        return _OPS[e.op](ctx.coord(alpha, e.subset, e.factor + off), e.c)
    if isinstance(e, Cmp):
        f = e.factor + off
        return ctx.coord(alpha, e.left, f) < ctx.coord(alpha, e.right, f)
    if isinstance(e, SumMod):
        s = np.zeros(ctx.size)
        for a, f in e.terms:
            s = s + ctx.coord(alpha, a, f + off)
        return _OPS[e.op](np.mod(s, 1.0), e.c)
    if isinstance(e, MinFirst):
        xs = _firsts(ctx, alpha, e.factor + off)
        return _OPS[e.op](np.minimum.reduce(xs), e.c)
    if isinstance(e, Sign):
        xs = _firsts(ctx, alpha, e.factor + off)
        odd = np.zeros(ctx.size, dtype=bool)
        for i, j in itertools.combinations(range(len(xs)), 2):
            odd ^= xs[i] > xs[j]
        return ~odd
    if isinstance(e, SigmaIs):
        xs = _firsts(ctx, alpha, e.factor + off)
        out = np.ones(ctx.size, dtype=bool)
        for i, j in itertools.combinations(range(len(xs)), 2):
            below = xs[i] <= xs[j]
            out &= below if e.perm[i] < e.perm[j] else ~below
        return out
    if isinstance(e, Not):
        return ~evaluate(e.arg, ctx, alpha, off)
    if isinstance(e, And):
        out = np.ones(ctx.size, dtype=bool)
        for a in e.args:
            out = out & evaluate(a, ctx, alpha, off)
        return out
    if isinstance(e, Or):
        out = np.zeros(ctx.size, dtype=bool)
        for a in e.args:
            out = out | evaluate(a, ctx, alpha, off)
        return out
    if isinstance(e, Equiv):
        return evaluate(e.left, ctx, alpha, off) == evaluate(e.right, ctx, alpha, off)
    if isinstance(e, FactorProj):
        return evaluate(e.arg, ctx, alpha, off + e.offset)
    if isinstance(e, Pullback):
        return evaluate(e.arg, ctx, tuple(alpha[v - 1] for v in e.alpha), off)
    raise ExprError(f"unknown node {e!r}")


# --- serialization ---------------------------------------------------------

def to_dict(e: Expr) -> dict:
    if isinstance(e, Const):
        return {"op": "const", "value": e.value}
    if isinstance(e, Thresh):
        return {"op": "thresh", "set": list(e.subset), "cmp": e.op, "c": e.c, "factor": e.factor}
    if isinstance(e, Cmp):
        return {"op": "cmp", "left": list(e.left), "right": list(e.right), "factor": e.factor}
    if isinstance(e, SumMod):
        return {"op": "summod", "terms": [[list(a), f] for a, f in e.terms], "cmp": e.op, "c": e.c}
    if isinstance(e, MinFirst):
        return {"op": "minfirst", "cmp": e.op, "c": e.c, "factor": e.factor}
    if isinstance(e, Sign):
        return {"op": "sign", "factor": e.factor}
    if isinstance(e, SigmaIs):
        return {"op": "sigma", "perm": list(e.perm), "factor": e.factor}
    if isinstance(e, Not):
        return {"op": "not", "arg": to_dict(e.arg)}
    if isinstance(e, And):
        return {"op": "and", "args": [to_dict(a) for a in e.args]}
    if isinstance(e, Or):
        return {"op": "or", "args": [to_dict(a) for a in e.args]}
    if isinstance(e, Equiv):
        return {"op": "equiv", "args": [to_dict(e.left), to_dict(e.right)]}
    if isinstance(e, FactorProj):
        return {"op": "factor", "offset": e.offset, "arg": to_dict(e.arg)}
    if isinstance(e, Pullback):
        return {"op": "pullback", "alpha": list(e.alpha), "arg": to_dict(e.arg)}
    raise ExprError(f"unknown node {e!r}")


def from_dict(d: dict) -> Expr:
    try:
        op = d["op"]
        if op == "const":
            return Const(bool(d["value"]))
        if op == "thresh":
            return Thresh(tuple(d["set"]), d["cmp"], d["c"], d.get("factor", 0))
        if op == "cmp":
            return Cmp(tuple(d["left"]), tuple(d["right"]), d.get("factor", 0))
        if op == "summod":
            return SumMod(tuple((tuple(a), f) for a, f in d["terms"]), d["cmp"], d["c"])
        if op == "minfirst":
            return MinFirst(d["cmp"], d["c"], d.get("factor", 0))
        if op == "sign":
            return Sign(d.get("factor", 0))
        if op == "sigma":
            return SigmaIs(tuple(d["perm"]), d.get("factor", 0))
        if op == "not":
            return Not(from_dict(d["arg"]))
        if op == "and":
            return And(tuple(from_dict(a) for a in d["args"]))
        if op == "or":
            return Or(tuple(from_dict(a) for a in d["args"]))
        if op == "equiv":
            left, right = d["args"]
            return Equiv(from_dict(left), from_dict(right))
        if op == "factor":
            return FactorProj(int(d["offset"]), from_dict(d["arg"]))
        if op == "pullback":
            return Pullback(tuple(d["alpha"]), from_dict(d["arg"]))
    except (KeyError, TypeError) as exc:
        raise ExprError(f"malformed expression node {d!r}: {exc}") from None
    raise ExprError(f"unknown expression op {d.get('op')!r}")
