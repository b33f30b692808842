"""Built-in canonical theories and a few model constructors used throughout."""

from __future__ import annotations

import itertools
from typing import Dict, Iterator, List, Sequence, Tuple

from .logic import Atom, Const, Eq, Formula, Not, conj, disj, distinct, iff, implies, parse_formula
from .relational import Model, Signature, Theory, injective_tuples


def perm_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq`` (distinct entries)."""
    inv = sum(1 for i, j in itertools.combinations(range(len(seq)), 2) if seq[i] > seq[j])
    return -1 if inv % 2 else 1


def _vars(k):
    return tuple(range(1, k + 1))


def _adjacent_swaps(k):
    for i in range(1, k):
        v = list(_vars(k))
        v[i - 1], v[i] = v[i], v[i - 1]
        yield tuple(v)


def hypergraph(k: int, name: str = "E") -> Theory:
    """``k``-uniform hypergraphs: ``name`` is invariant under permuting its arguments."""
    sig = Signature(((name, k),))
    axioms = [
        Formula(implies(Atom(name, _vars(k)), Atom(name, sw)), k) for sw in _adjacent_swaps(k)
    ]
    return Theory(sig, tuple(axioms), f"hypergraph[{k}]")


def graph(name: str = "E") -> Theory:
    t = hypergraph(2, name)
    return Theory(t.sig, t.axioms, "graph")


def linear_order(name: str = "prec") -> Theory:
    sig = Signature(((name, 2),))
    axioms = (
        parse_formula(f"x1=x2 | {name}(x1,x2) | {name}(x2,x1)", sig, 2),
        parse_formula(f"{name}(x1,x2) & {name}(x2,x3) -> {name}(x1,x3)", sig, 3),
    )
    return Theory(sig, axioms, "linear-order")


def coloring(c: int, prefix: str = "chi") -> Theory:
    names = [f"{prefix}{i}" for i in range(1, c + 1)]
    sig = Signature(tuple((n, 1) for n in names))
    axioms = [Formula(Not(conj(Atom(a, (1,)), Atom(b, (1,)))), 1) for a, b in itertools.combinations(names, 2)]
    axioms.append(Formula(disj(*(Atom(n, (1,)) for n in names)), 1))
    return Theory(sig, tuple(axioms), f"coloring[{c}]")


def tournament(k: int = 2, name: str = "E") -> Theory:
    """``k``-tournaments: on distinct vertices, an odd permutation flips membership."""
    sig = Signature(((name, k),))
    axioms = []
    for sw in _adjacent_swaps(k):
        axioms.append(Formula(implies(distinct(_vars(k)), iff(Atom(name, _vars(k)), Not(Atom(name, sw)))), k))
    return Theory(sig, tuple(axioms), f"tournament[{k}]")


def disjoint_union(*theories: Theory, name: str = "") -> Theory:
    out = theories[0]
    for t in theories[1:]:
        out = out.union(t)
    return Theory(out.sig, out.axioms, name or " + ".join(t.name for t in theories))


def antichain_theory(sets: Sequence[frozenset], prefix: str = "P") -> Theory:
    """Pure theory with one predicate ``P_<elements>`` of arity ``|A|`` per set ``A``."""
    preds = tuple((antichain_name(a, prefix), len(a)) for a in sets)
    return Theory(Signature(preds), (), "antichain")


def antichain_name(a, prefix: str = "P") -> str:
    return prefix + "_" + "_".join(str(v) for v in sorted(a))


# --- model constructors ----------------------------------------------------

def graph_model(n: int, edges, name: str = "E") -> Model:
    rel = set()
    for u, v in edges:
        rel.add((u, v))
        rel.add((v, u))
    return Model(Signature(((name, 2),)), n, {name: rel})


def hypergraph_model(n: int, k: int, edges, name: str = "E") -> Model:
    rel = set()
    for e in edges:
        rel.update(itertools.permutations(tuple(e), k))
    return Model(Signature(((name, k),)), n, {name: rel})


def complete_hypergraph(n: int, k: int, name: str = "E") -> Model:
    return hypergraph_model(n, k, itertools.combinations(range(1, n + 1), k), name)


def order_model(order: Sequence[int], name: str = "prec") -> Model:
    """Linear order listing vertices from smallest to largest."""
    rel = {(order[i], order[j]) for i, j in itertools.combinations(range(len(order)), 2)}
    return Model(Signature(((name, 2),)), len(order), {name: rel})


def tournament_from_orientation(n: int, k: int, positive: Dict[Tuple[int, ...], bool], name: str = "E") -> Model:
    """``positive[A]`` (``A`` increasing) says whether the increasing tuple of ``A`` is in the relation."""
    rel = set()
    for a in itertools.combinations(range(1, n + 1), k):
        for t in itertools.permutations(a):
            even = perm_sign(t) == 1
            if even == bool(positive[a]):
                rel.add(t)
    return Model(Signature(((name, k),)), n, {name: rel})


def labeled_tournaments(k: int, n: int, name: str = "E") -> Iterator[Model]:
    """All ``2^C(n,k)`` labelled ``k``-tournaments on ``[n]``."""
    sets = list(itertools.combinations(range(1, n + 1), k))
    for bits in itertools.product((True, False), repeat=len(sets)):
        yield tournament_from_orientation(n, k, dict(zip(sets, bits)), name)


def alternating_tournament(k: int, name: str = "E") -> Model:
    """The ``(k+1)``-vertex ``k``-tournament whose tuples are the even injections ``[k] -> [k+1]``."""
    rel = set()
    for t in injective_tuples(k + 1, k):
        missing = (set(range(1, k + 2)) - set(t)).pop()
        if perm_sign(t + (missing,)) == 1:
            rel.add(t)
    return Model(Signature(((name, k),)), k + 1, {name: rel})


def is_alternating(m: Model, vertices: Sequence[int], name: str = "E") -> bool:
    """Whether the ``k``-tournament ``m`` restricted to ``k+1`` sorted ``vertices`` is alternating.

    ``iota_{S - s_j}`` has sign ``(-1)^(k+1-j)``; a copy of the alternating
    tournament orients these tuples all by their sign or all against it.
    """
    s = sorted(vertices)
    k = len(s) - 1
    flags = set()
    for j in range(1, k + 2):
        t = tuple(s[:j - 1] + s[j:])
        present = t in m.relations[name]
        even = (k + 1 - j) % 2 == 0
        flags.add(present == even)
    return len(flags) == 1
