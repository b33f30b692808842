"""Theons, couplings and images of theons under open interpretations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .. import logic
from ..relational import Signature, Theory, pure_theory
from . import expr as ex


class TheonError(ValueError):
    pass


@dataclass(frozen=True)
class Theon:
    """Per-predicate membership oracles over ``[0,1]^dim``-valued coordinates.

    ``rank_bound`` and ``independence`` are declared claims about the given
    representation; qr-testlab probes can falsify them.
    """

    theory: Theory
    dim: int
    exprs: Mapping[str, ex.Expr]
    name: str = ""
    rank_bound: Optional[int] = None
    independence: Optional[int] = None
    parts: Tuple[Tuple[str, ...], ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise TheonError("ground space needs dimension >= 1")
        es = dict(self.exprs)
        names = set(self.theory.sig.names)
        if set(es) != names:
            raise TheonError(f"expressions for {sorted(es)} but predicates {sorted(names)}")
        for pname, k in self.theory.sig.predicates:
            try:
                ex.check_expr(es[pname], k, self.dim)
            except ex.ExprError as exc:
                raise TheonError(f"{pname}: {exc}") from None
        object.__setattr__(self, "exprs", es)

    def __hash__(self):
        return id(self)

    @property
    def sig(self) -> Signature:
        return self.theory.sig

    @property
    def max_arity(self) -> int:
        return self.sig.max_arity

    def membership(self, pred: str, point: Mapping[Tuple[int, ...], Sequence[float]]) -> bool:
        """Evaluate ``N_P`` at one point of ``E_k`` given as ``{subset: d-vector}``."""
        k = self.sig.arity(pred)
        coords = {}
        for a, v in point.items():
            a = tuple(sorted(a))
            vec = [float(x) for x in (v if hasattr(v, "__len__") else [v])]
            coords[ex.subset_mask(a)] = np.asarray([vec], dtype=float)
        ctx = ex.EvalContext(coords, 1)
        try:
            return bool(ex.evaluate(self.exprs[pred], ctx, tuple(range(1, k + 1)))[0])
        except KeyError as exc:
            raise TheonError(f"point lacks a coordinate needed by {pred}: mask {exc}") from None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "predicates": [[n, k] for n, k in self.sig.predicates],
            "exprs": {n: ex.to_dict(e) for n, e in self.exprs.items()},
            "rank_bound": self.rank_bound,
            "independence": self.independence,
        }


def theon_from_dict(d: dict, theory: Optional[Theory] = None) -> Theon:
    """Load a custom theon; the theory defaults to the pure theory on the listed predicates."""
    try:
        sig = Signature(tuple((n, int(k)) for n, k in d["predicates"]))
        exprs = {n: ex.from_dict(e) for n, e in d["exprs"].items()}
        dim = int(d.get("dim", 1))
    except (KeyError, TypeError, ValueError) as exc:
        raise TheonError(f"malformed theon description: {exc}") from None
    if theory is None:
        theory = pure_theory(sig)
    return Theon(theory, dim, exprs, d.get("name", "custom"), d.get("rank_bound"), d.get("independence"))


def load_theon(path: str) -> Theon:
    with open(path) as fh:
        return theon_from_dict(json.load(fh))


def _renamed(t: Theon, mapping: Optional[Mapping[str, str]]):
    if not mapping:
        return t.theory, dict(t.exprs)
    return t.theory.rename(mapping), {mapping.get(n, n): e for n, e in t.exprs.items()}


def _union(theories, name):
    out = theories[0]
    for th in theories[1:]:
        out = out.union(th)
    return Theory(out.sig, out.axioms, name)


def independent_coupling(ts: Sequence[Theon], rename: Optional[Sequence[Optional[Mapping[str, str]]]] = None,
                         name: str = "") -> Theon:
    """Product construction: factor ``i`` reads its own block of ground-space coordinates."""
    rename = list(rename) if rename is not None else [None] * len(ts)
    if len(rename) != len(ts):
        raise TheonError("one rename map per coupled theon")
    theories, exprs, parts = [], {}, []
    offset = 0
    for t, mp in zip(ts, rename):
        th, es = _renamed(t, mp)
        clash = set(es) & set(exprs)
        if clash:
            raise TheonError(f"predicate names clash: {sorted(clash)}; pass a rename map")
        for n, e in es.items():
            exprs[n] = e if offset == 0 else ex.FactorProj(offset, e)
        theories.append(th)
        parts.append(tuple(th.sig.names))
        offset += t.dim
    theory = _union(theories, name or " x ".join(t.name for t in ts))
    rb = [t.rank_bound for t in ts]
    ind = [t.independence for t in ts]
    return Theon(
        theory, offset, exprs, name or " (x) ".join(t.name for t in ts),
        max(rb) if None not in rb else None,
        min(ind) if None not in ind else None,
        tuple(parts),
    )


def aligned_coupling(ts: Sequence[Theon], rename: Optional[Sequence[Optional[Mapping[str, str]]]] = None,
                     name: str = "") -> Theon:
    """Coupling on a shared ground space: every factor reads the same coordinates."""
    dims = {t.dim for t in ts}
    if len(dims) != 1:
        raise TheonError(f"aligned coupling needs equal dimensions, got {sorted(dims)}")
    rename = list(rename) if rename is not None else [None] * len(ts)
    theories, exprs, parts = [], {}, []
    for t, mp in zip(ts, rename):
        th, es = _renamed(t, mp)
        clash = set(es) & set(exprs)
        if clash:
            raise TheonError(f"predicate names clash: {sorted(clash)}; pass a rename map")
        exprs.update(es)
        theories.append(th)
        parts.append(tuple(th.sig.names))
    theory = _union(theories, name or " & ".join(t.name for t in ts))
    return Theon(theory, dims.pop(), exprs, name or " & ".join(t.name for t in ts), parts=tuple(parts))


def diagonal_self_coupling(t: Theon, suffixes: Tuple[str, str] = ("_1", "_2")) -> Theon:
    maps = [{n: n + s for n in t.sig.names} for s in suffixes]
    return aligned_coupling([t, t], maps, name=f"diag({t.name})")


def independent_self_coupling(t: Theon, suffixes: Tuple[str, str] = ("_1", "_2")) -> Theon:
    maps = [{n: n + s for n in t.sig.names} for s in suffixes]
    return independent_coupling([t, t], maps, name=f"indep({t.name})")


def formula_to_expr(node, target: Theon) -> ex.Expr:
    """Translate an open formula over ``target``'s signature into a theon expression."""
    if isinstance(node, logic.Atom):
        if len(set(node.args)) != len(node.args):
            return ex.Const(False)
        return ex.Pullback(tuple(node.args), target.exprs[node.pred])
    if isinstance(node, logic.Eq):
        return ex.Const(node.left == node.right)
    if isinstance(node, logic.Not):
        return ex.Not(formula_to_expr(node.arg, target))
    if isinstance(node, logic.And):
        return ex.And(tuple(formula_to_expr(a, target) for a in node.args))
    if isinstance(node, logic.Or):
        return ex.Or(tuple(formula_to_expr(a, target) for a in node.args))
    if isinstance(node, logic.Const):
        return ex.Const(bool(node.value))
    raise TheonError(f"cannot translate {node!r}")


def interpret_theon(i: logic.Interpretation, t: Theon, theory: Optional[Theory] = None, name: str = "") -> Theon:
    """The theon ``I(N)`` whose sampled arrays are the images of ``N``'s arrays under ``i``."""
    for pname, k in i.target.predicates:
        if pname not in t.sig or t.sig.arity(pname) != k:
            raise TheonError(f"theon lacks target predicate {pname}/{k}")
    if theory is None:
        theory = pure_theory(i.source)
    elif theory.sig != i.source:
        raise TheonError("supplied theory does not match the interpretation's source signature")
    exprs: Dict[str, ex.Expr] = {p: formula_to_expr(i.formulas[p].node, t) for p in i.source.names}
    return Theon(theory, t.dim, exprs, name or f"I({t.name})", t.rank_bound, None)
