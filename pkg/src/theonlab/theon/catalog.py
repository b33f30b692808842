"""Built-in theons and interpretations, addressed as ``name:key=value,...``.

Vector parameters separate entries with ``/`` (``p=0.2/0.3/0.5``); scalars may
be decimals or ``a/b`` rationals only when the parameter is not a vector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

from .. import theories as th
from ..calculus import ActionTable, perm_parity, theta_qr_theon
from ..logic import Atom, Formula, Interpretation, Not, conj, disj, distinct, iff
from ..relational import Signature, Theory, pure_theory
from . import expr as ex
from .core import Theon, aligned_coupling, independent_coupling


class CatalogError(ValueError):
    pass


def _full(k):
    return tuple(range(1, k + 1))


# --- theon builders ----------------------------------------------------------

def qr_hypergraphon(k: int = 2, p: float = 0.5, name: str = "E") -> Theon:
    return Theon(th.hypergraph(k, name), 1, {name: ex.Thresh(_full(k), "<", p)},
                 f"qr-hypergraphon:k={k},p={p}", rank_bound=k, independence=k - 1)


def constant_graphon(p: float = 0.5, name: str = "E") -> Theon:
    t = qr_hypergraphon(2, p, name)
    return Theon(t.theory, 1, t.exprs, f"constant-graphon:p={p}", rank_bound=2, independence=1)


def skew_graphon(p: float = 0.5, name: str = "E") -> Theon:
    e = ex.SumMod((((1,), 0), ((2,), 0), ((1, 2), 0)), "<", p)
    return Theon(th.graph(name), 1, {name: e}, f"skew-graphon:p={p}", rank_bound=2)


def linear_order(name: str = "prec") -> Theon:
    return Theon(th.linear_order(name), 1, {name: ex.Cmp((1,), (2,))}, "linear-order", rank_bound=1)


def tournament_np(k: int = 2, p: float = 0.5, name: str = "E") -> Theon:
    """``x_[k] < p`` iff ``sigma_x`` is even."""
    e = ex.Equiv(ex.Thresh(_full(k), "<", p), ex.Sign())
    return Theon(th.tournament(k, name), 1, {name: e}, f"tournament-np:k={k},p={p}", rank_bound=k)


def qr_tournamon(k: int = 2, name: str = "E") -> Theon:
    t = tournament_np(k, 0.5, name)
    return Theon(t.theory, 1, t.exprs, f"qr-tournamon:k={k}", rank_bound=k)


def tournament_np_order(k: int = 2, p: float = 0.5, name: str = "E", order: str = "prec") -> Theon:
    """The tournament theon coupled with the order of its own first-order coordinates."""
    return aligned_coupling([tournament_np(k, p, name), linear_order(order)],
                            name=f"tournament-np-order:k={k},p={p}")


def _interval(full, lo, hi):
    parts = []
    if lo > 0:
        parts.append(ex.Thresh(full, ">=", lo))
    if hi < 1:
        parts.append(ex.Thresh(full, "<", hi))
    return ex.And(tuple(parts)) if parts else ex.Const(True)


def qr_colored_hypergraphon(c: int = 2, k: int = 2, p: Sequence = (0.5, 0.5), prefix: str = "E") -> Theon:
    p = [Fraction(v).limit_denominator(10 ** 12) if isinstance(v, float) else Fraction(v) for v in p]
    if len(p) != c:
        raise CatalogError(f"need {c} densities, got {len(p)}")
    names = [f"{prefix}{i}" for i in range(1, c + 1)]
    t = theta_qr_theon(ActionTable.trivial(k, names), p)
    return Theon(t.theory, 1, t.exprs, f"qr-colored-hypergraphon:c={c},k={k}", rank_bound=k, independence=k - 1)


def theta_qr(action: str = "sign", k: int = 2, p: Sequence = (0.5, 0.5)) -> Theon:
    p = [Fraction(v).limit_denominator(10 ** 12) if isinstance(v, float) else Fraction(v) for v in p]
    if action == "sign":
        table = ActionTable.sign(k)
    elif action == "trivial":
        table = ActionTable.trivial(k, [f"E{i}" for i in range(1, len(p) + 1)])
    else:
        raise CatalogError(f"unknown action {action!r} (sign, trivial)")
    return Theon(**{**_fields(theta_qr_theon(table, p)), "name": f"theta-qr:action={action},k={k}"})


def _fields(t: Theon) -> dict:
    return dict(theory=t.theory, dim=t.dim, exprs=t.exprs, name=t.name,
                rank_bound=t.rank_bound, independence=t.independence)


def dev_not_uinduce(k: int = 2, p: float = 0.5, name: str = "E") -> Theon:
    """Low branch is a threshold on ``x_[k]``; high branch sums the ``(k-1)``-set coordinates mod 1."""
    full = _full(k)
    low = ex.And((ex.MinFirst("<", 0.5), ex.Thresh(full, "<", p)))
    terms = tuple((tuple(v for v in full if v != w), 0) for w in full)
    high = ex.And((ex.MinFirst(">=", 0.5), ex.SumMod(terms, "<", p)))
    return Theon(th.hypergraph(k, name), 1, {name: ex.Or((low, high))}, f"dev-not-uinduce:k={k},p={p}",
                 rank_bound=k)


def indep_not_disc(k: int = 2, ell: int = 1, p: float = 0.5, name: str = "E") -> Theon:
    """Edge iff every ``(ell+1)``-subset coordinate is below ``p``."""
    if not 0 <= ell < k:
        raise CatalogError("need 0 <= ell < k")
    parts = tuple(ex.Thresh(a, "<", p) for a in itertools.combinations(_full(k), ell + 1))
    return Theon(th.hypergraph(k, name), 1, {name: ex.And(parts)}, f"indep-not-disc:k={k},ell={ell},p={p}",
                 rank_bound=ell + 1, independence=ell)


def indep_not_disc_adversary(k: int = 2, ell: int = 1, p: float = 0.5, name: str = "E") -> Theon:
    """The max-coordinate theon aligned with ``P_[ell+1] = {x_[ell+1] >= p}``."""
    base = indep_not_disc(k, ell, p, name)
    pname = th.antichain_name(_full(ell + 1))
    adv = Theon(pure_theory(Signature(((pname, ell + 1),))), 1,
                {pname: ex.Thresh(_full(ell + 1), ">=", p)}, "adversary")
    return aligned_coupling([base, adv], name=f"indep-not-disc-adversary:k={k},ell={ell},p={p}")


def empty_hypergraph(k: int = 2, name: str = "E") -> Theon:
    return Theon(th.hypergraph(k, name), 1, {name: ex.Const(False)}, f"empty-hypergraph:k={k}",
                 rank_bound=0, independence=k - 1)


def complete_hypergraph(k: int = 2, name: str = "E") -> Theon:
    return Theon(th.hypergraph(k, name), 1, {name: ex.Const(True)}, f"complete-hypergraph:k={k}",
                 rank_bound=0, independence=k - 1)


def qr_coloring(c: int = 2, prefix: str = "chi") -> Theon:
    exprs = {}
    for i in range(1, c + 1):
        exprs[f"{prefix}{i}"] = _interval((1,), (i - 1) / c, i / c)
    return Theon(th.coloring(c, prefix), 1, exprs, f"qr-coloring:c={c}", rank_bound=1)


def half_coloring(flip: bool = False, prefix: str = "chi") -> Theon:
    """Two-colouring by the half of ``[0,1]`` containing ``x_{1}``; ``flip`` swaps the colours."""
    lo, hi = ex.Thresh((1,), "<", 0.5), ex.Thresh((1,), ">=", 0.5)
    exprs = {f"{prefix}1": hi if flip else lo, f"{prefix}2": lo if flip else hi}
    return Theon(th.coloring(2, prefix), 1, exprs, f"half-coloring:flip={int(flip)}", rank_bound=1)


# --- interpretations ----------------------------------------------------------

def arc_orientation(k: int = 2, source: str = "P", edge: str = "E", order: str = "prec") -> Interpretation:
    """``k``-tournament from a ``k``-hypergraph and an order: edges follow even order patterns."""
    xs = _full(k)
    chains = []
    for s in itertools.permutations(xs):
        if perm_parity(s) == 1:
            chains.append(conj(*(Atom(order, (s[i], s[j])) for i, j in itertools.combinations(range(k), 2))))
    f = conj(distinct(xs), iff(Atom(edge, xs), disj(*chains)))
    target = Signature(((edge, k), (order, 2)))
    return Interpretation(Signature(((source, k),)), target, {source: Formula(f, k)})


def alternation_formula(ell: int = 1, source: str = "E", pred: str = "P") -> Interpretation:
    """``(ell+2)``-edges where some ``ell``-prefix sees both remaining vertices the same way."""
    k = ell + 2
    xs = _full(k)
    parts = []
    for rest in itertools.combinations(xs, ell):
        j1, j2 = [v for v in xs if v not in rest]
        parts.append(iff(Atom(pred, rest + (j1,)), Atom(pred, rest + (j2,))))
    return Interpretation(Signature(((source, k),)), Signature(((pred, ell + 1),)),
                          {source: Formula(disj(*parts), k)})


def alternating_copy(ell: int = 1, source: str = "E", pred: str = "P") -> Interpretation:
    """``(ell+2)``-edges are the vertex sets spanning a copy of the alternating ``(ell+1)``-tournament."""
    k = ell + 2
    xs = _full(k)
    lits = []
    for j in xs:
        t = tuple(v for v in xs if v != j)
        even = (k - j) % 2 == 0
        lits.append(Atom(pred, t) if even else Not(Atom(pred, t)))
    f = disj(conj(*lits), conj(*(Not(a) if not isinstance(a, Not) else a.arg for a in lits)))
    return Interpretation(Signature(((source, k),)), Signature(((pred, ell + 1),)), {source: Formula(f, k)})


# --- registry ---------------------------------------------------------------

@dataclass(frozen=True)
class Entry:
    name: str
    builder: Callable
    params: Tuple[Tuple[str, str, object], ...]  # (key, kind, default); kind in int|float|vec|str|bool
    summary: str

    def signature(self) -> str:
        return ",".join(f"{k}={d if not isinstance(d, tuple) else '/'.join(map(str, d))}"
                        for k, _, d in self.params)


THEONS: Dict[str, Entry] = {}
INTERPRETATIONS: Dict[str, Entry] = {}


def _reg(table, name, builder, params, summary):
    table[name] = Entry(name, builder, tuple(params), summary)


_reg(THEONS, "qr-hypergraphon", qr_hypergraphon, [("k", "int", 2), ("p", "float", 0.5)],
     "quasirandom k-hypergraphon: edge iff x_[k] < p")
_reg(THEONS, "qr-graphon", lambda p=0.5: qr_hypergraphon(2, p), [("p", "float", 0.5)],
     "quasirandom graphon: edge iff x_12 < p")
_reg(THEONS, "constant-graphon", constant_graphon, [("p", "float", 0.5)], "constant graphon, THRESH({1,2}, <, p)")
_reg(THEONS, "skew-graphon", skew_graphon, [("p", "float", 0.5)],
     "quasirandom graphon through frac(x1 + x2 + x12) < p")
_reg(THEONS, "linear-order", linear_order, [], "order of the first-order coordinates")
_reg(THEONS, "qr-tournamon", qr_tournamon, [("k", "int", 2)], "quasirandom k-tournamon")
_reg(THEONS, "tournament-np", tournament_np, [("k", "int", 2), ("p", "float", 0.5)],
     "k-tournament: x_[k] < p iff sigma_x even")
_reg(THEONS, "tournament-np-order", tournament_np_order, [("k", "int", 2), ("p", "float", 0.5)],
     "tournament-np aligned with the order of its own coordinates")
_reg(THEONS, "qr-colored-hypergraphon", qr_colored_hypergraphon,
     [("c", "int", 2), ("k", "int", 2), ("p", "vec", (0.5, 0.5))], "quasirandom c-coloured k-hypergraphon")
_reg(THEONS, "theta-qr", theta_qr, [("action", "str", "sign"), ("k", "int", 2), ("p", "vec", (0.5, 0.5))],
     "quasirandom object of an S_k action (sign or trivial)")
_reg(THEONS, "dev-not-uinduce", dev_not_uinduce, [("k", "int", 2), ("p", "float", 0.5)],
     "two-branch theon split on the minimum first-order coordinate")
_reg(THEONS, "indep-not-disc", indep_not_disc, [("k", "int", 2), ("ell", "int", 1), ("p", "float", 0.5)],
     "edge iff all (ell+1)-subset coordinates are below p")
_reg(THEONS, "indep-not-disc-adversary", indep_not_disc_adversary,
     [("k", "int", 2), ("ell", "int", 1), ("p", "float", 0.5)],
     "indep-not-disc aligned with the predicate x_[ell+1] >= p")
_reg(THEONS, "empty-hypergraph", empty_hypergraph, [("k", "int", 2)], "no edges")
_reg(THEONS, "complete-hypergraph", complete_hypergraph, [("k", "int", 2)], "all edges")
_reg(THEONS, "qr-coloring", qr_coloring, [("c", "int", 2)], "uniform c-colouring of the vertices")
_reg(THEONS, "half-coloring", half_coloring, [("flip", "bool", False)], "colour by the half containing x_1")

_reg(INTERPRETATIONS, "arc-orientation", arc_orientation, [("k", "int", 2)],
     "k-tournament P from hypergraph E and order prec")
_reg(INTERPRETATIONS, "alternation-formula", alternation_formula, [("ell", "int", 1)],
     "(ell+2)-hypergraph E from (ell+1)-tournament P: some ell-prefix agrees on the other two")
_reg(INTERPRETATIONS, "alternating-copy", alternating_copy, [("ell", "int", 1)],
     "(ell+2)-hypergraph E from (ell+1)-tournament P: copies of the alternating tournament")


def _convert(kind, text):
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(Fraction(text))
        if kind == "bool":
            if text.lower() in ("1", "true", "yes"):
                return True
            if text.lower() in ("0", "false", "no"):
                return False
            raise ValueError(text)
        if kind == "vec":
            return tuple(Fraction(v) for v in text.split("/"))
        return text
    except (ValueError, ZeroDivisionError):
        raise CatalogError(f"cannot read {text!r} as {kind}") from None


def parse_ref(ref: str, table: Mapping[str, Entry]) -> Tuple[Entry, dict]:
    name, _, rest = ref.partition(":")
    name = name.strip()
    if name not in table:
        raise CatalogError(f"unknown catalog entry {name!r}; known: {', '.join(sorted(table))}")
    entry = table[name]
    kinds = {k: kind for k, kind, _ in entry.params}
    args = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq or key not in kinds:
            raise CatalogError(f"{name}: unknown parameter {key!r}; expected {sorted(kinds) or 'none'}")
        args[key] = _convert(kinds[key], val)
    return entry, args


def build_theon(ref: str) -> Theon:
    entry, args = parse_ref(ref, THEONS)
    try:
        t = entry.builder(**args)
    except (ValueError, TypeError) as exc:
        raise CatalogError(f"{ref}: {exc}") from None
    return t


def build_interpretation(ref: str) -> Interpretation:
    entry, args = parse_ref(ref, INTERPRETATIONS)
    return entry.builder(**args)


# Interpretations paired with theons over their target signature, and the vertex count
# on which the two evaluation paths are compared.
INTERPRETATION_PAIRS: Tuple[Tuple[str, str, Callable[[], Theon], int], ...] = (
    ("arc-orientation:k=2", "qr-graphon(0.3) x linear-order",
     lambda: independent_coupling([qr_hypergraphon(2, 0.3), linear_order()]), 4),
    ("arc-orientation:k=3", "qr-hypergraphon(3,0.5) x linear-order",
     lambda: independent_coupling([qr_hypergraphon(3, 0.5), linear_order()]), 4),
    ("alternation-formula:ell=1", "tournament-np(2,0.3)", lambda: tournament_np(2, 0.3, "P"), 4),
    ("alternation-formula:ell=2", "tournament-np(3,0.3)", lambda: tournament_np(3, 0.3, "P"), 5),
    ("alternating-copy:ell=1", "tournament-np(2,0.3)", lambda: tournament_np(2, 0.3, "P"), 4),
    ("alternating-copy:ell=1", "tournament-np-order(2,0.3)",
     lambda: tournament_np_order(2, 0.3, "P"), 4),
    ("alternating-copy:ell=3", "tournament-np(4,0.3)", lambda: tournament_np(4, 0.3, "P"), 5),
)


BUILTIN_THEORIES: Dict[str, Callable[..., Theory]] = {
    "graph": th.graph,
    "hypergraph": th.hypergraph,
    "linear-order": th.linear_order,
    "coloring": th.coloring,
    "tournament": th.tournament,
}


def listing() -> dict:
    return {
        "theories": sorted(BUILTIN_THEORIES),
        "theons": [{"name": e.name, "params": e.signature(), "summary": e.summary} for e in THEONS.values()],
        "interpretations": [{"name": e.name, "params": e.signature(), "summary": e.summary}
                            for e in INTERPRETATIONS.values()],
    }
