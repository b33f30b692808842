"""Finite relational structures: signatures, models, isomorphism and exact densities.

Vertices are the integers ``1..n``. A relation of arity ``k`` is a set of
injective ``k``-tuples over ``[n]``; repeated entries are never stored.
Everything here is exact (``fractions.Fraction``) and meant for small models
(``n`` up to roughly 8), where exhaustive search over ``S_n`` is cheap.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

DEFAULT_BUDGET = 2 ** 30


class BudgetExceeded(RuntimeError):
    """Raised when an exhaustive search would visit too many assignments."""

    def __init__(self, required, budget):
        super().__init__(
            f"search space of {required} relation assignments exceeds budget {budget}"
        )
        self.required = required
        self.budget = budget


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Signature:
    """Ordered list of ``(name, arity)`` pairs."""

    predicates: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        preds = tuple((str(n), int(k)) for n, k in self.predicates)
        object.__setattr__(self, "predicates", preds)
        seen = set()
        for name, k in preds:
            if not _NAME_RE.match(name):
                raise ValueError(f"invalid predicate name {name!r}")
            if name in seen:
                raise ValueError(f"duplicate predicate name {name!r}")
            if k < 1:
                raise ValueError(f"predicate {name!r} has arity {k} < 1")
            seen.add(name)

    @classmethod
    def of(cls, **arities) -> "Signature":
        return cls(tuple(arities.items()))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(n for n, _ in self.predicates)

    @property
    def max_arity(self) -> int:
        return max((k for _, k in self.predicates), default=0)

    def arity(self, name: str) -> int:
        for n, k in self.predicates:
            if n == name:
                return k
        raise KeyError(f"unknown predicate {name!r}")

    def __contains__(self, name) -> bool:
        return any(n == name for n, _ in self.predicates)

    def union(self, other: "Signature") -> "Signature":
        """Disjoint union; a shared name is allowed only with equal arity."""
        preds = list(self.predicates)
        for name, k in other.predicates:
            if name in self:
                if self.arity(name) != k:
                    raise ValueError(f"signature clash on {name!r}")
                continue
            preds.append((name, k))
        return Signature(tuple(preds))

    def restrict(self, names: Iterable[str]) -> "Signature":
        keep = set(names)
        return Signature(tuple((n, k) for n, k in self.predicates if n in keep))

    def rename(self, mapping: Mapping[str, str]) -> "Signature":
        return Signature(tuple((mapping.get(n, n), k) for n, k in self.predicates))


def injective_tuples(n: int, k: int) -> List[Tuple[int, ...]]:
    """All injective ``k``-tuples over ``[n]`` in lexicographic order."""
    return list(itertools.permutations(range(1, n + 1), k))


@dataclass(frozen=True)
class Model:
    """A finite canonical structure on the vertex set ``[n]``."""

    sig: Signature
    n: int
    relations: Mapping[str, FrozenSet[Tuple[int, ...]]] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("negative vertex count")
        rels = {}
        for name, k in self.sig.predicates:
            tuples = frozenset(tuple(int(v) for v in t) for t in self.relations.get(name, ()))
            for t in tuples:
                if len(t) != k:
                    raise ValueError(f"{name}: tuple {t} has length {len(t)}, expected {k}")
                if len(set(t)) != k:
                    raise ValueError(f"{name}: tuple {t} has repeated entries")
                if any(v < 1 or v > self.n for v in t):
                    raise ValueError(f"{name}: tuple {t} leaves [{self.n}]")
            rels[name] = tuples
        extra = set(self.relations) - set(self.sig.names)
        if extra:
            raise ValueError(f"relations for undeclared predicates {sorted(extra)}")
        object.__setattr__(self, "relations", rels)

    def __hash__(self):
        return hash((self.sig, self.n, tuple(self.relations[n] for n in self.sig.names)))

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return self.sig == other.sig and self.n == other.n and self.relations == other.relations

    def __repr__(self):
        return f"Model(n={self.n}, {dump_model(self).splitlines()[1:]})"

    def holds(self, name: str, t: Sequence[int]) -> bool:
        return tuple(t) in self.relations[name]

    def relabel(self, perm: Sequence[int]) -> "Model":
        """Image under the bijection ``v -> perm[v-1]``."""
        return Model(
            self.sig,
            self.n,
            {name: {tuple(perm[v - 1] for v in t) for t in ts} for name, ts in self.relations.items()},
        )

    def restrict(self, vertices: Sequence[int]) -> "Model":
        """Submodel induced on ``vertices``, relabelled so that ``vertices[i] -> i+1``."""
        pos = {v: i + 1 for i, v in enumerate(vertices)}
        if len(pos) != len(vertices):
            raise ValueError("repeated vertex in restriction")
        rels = {}
        for name, ts in self.relations.items():
            rels[name] = {tuple(pos[v] for v in t) for t in ts if all(v in pos for v in t)}
        return Model(self.sig, len(vertices), rels)

    def reduct(self, names: Iterable[str]) -> "Model":
        sub = self.sig.restrict(names)
        return Model(sub, self.n, {n: self.relations[n] for n in sub.names})

    def rename(self, mapping: Mapping[str, str]) -> "Model":
        return Model(
            self.sig.rename(mapping),
            self.n,
            {mapping.get(n, n): ts for n, ts in self.relations.items()},
        )

    def bits(self) -> Tuple[int, ...]:
        """Indicator vector over all injective tuples, predicates in signature order."""
        out = []
        for name, k in self.sig.predicates:
            rel = self.relations[name]
            out.extend(1 if t in rel else 0 for t in injective_tuples(self.n, k))
        return tuple(out)

    def code(self) -> int:
        """``bits()`` read as a binary number, first tuple most significant."""
        c = 0
        for b in self.bits():
            c = (c << 1) | b
        return c


def model_from_bits(sig: Signature, n: int, bits: Sequence[int]) -> Model:
    rels = {}
    i = 0
    for name, k in sig.predicates:
        tuples = injective_tuples(n, k)
        rels[name] = {t for t, b in zip(tuples, bits[i:i + len(tuples)]) if b}
        i += len(tuples)
    if i != len(bits):
        raise ValueError(f"expected {i} bits, got {len(bits)}")
    return Model(sig, n, rels)


def tuple_count(sig: Signature, n: int) -> int:
    return sum(math.perm(n, k) for _, k in sig.predicates)


# --- isomorphism -----------------------------------------------------------

def _invariant(m: Model):
    return tuple(len(m.relations[name]) for name in m.sig.names)


def isomorphic(a: Model, b: Model) -> Optional[Dict[int, int]]:
    """A vertex bijection ``f`` with ``f(a) == b``, or ``None``."""
    if a.sig != b.sig or a.n != b.n or _invariant(a) != _invariant(b):
        return None
    for perm in itertools.permutations(range(1, a.n + 1)):
        if a.relabel(perm) == b:
            return {v: perm[v - 1] for v in range(1, a.n + 1)}
    return None


def automorphism_count(m: Model) -> int:
    return sum(1 for perm in itertools.permutations(range(1, m.n + 1)) if m.relabel(perm) == m)


def labeled_weight(m: Model) -> Fraction:
    """``|Aut(m)| / n!``, the factor turning unlabeled density into labeled density."""
    return Fraction(automorphism_count(m), math.factorial(m.n))


def canonical_form(m: Model) -> Model:
    """Lexicographically smallest relabelling (by ``bits()``)."""
    best = None
    best_bits = None
    for perm in itertools.permutations(range(1, m.n + 1)):
        r = m.relabel(perm)
        rb = r.bits()
        if best_bits is None or rb < best_bits:
            best, best_bits = r, rb
    return best if best is not None else m


def labeled_copies(m: Model) -> List[Model]:
    """All distinct labelled models on ``[n]`` isomorphic to ``m``, sorted by ``bits()``."""
    seen = {}
    for perm in itertools.permutations(range(1, m.n + 1)):
        r = m.relabel(perm)
        seen.setdefault(r.bits(), r)
    return [seen[b] for b in sorted(seen)]


@dataclass(frozen=True)
class IsoClass:
    representative: Model
    automorphisms: int

    @property
    def n(self):
        return self.representative.n

    @property
    def labeled_weight(self) -> Fraction:
        return Fraction(self.automorphisms, math.factorial(self.n))


def iso_class(m: Model) -> IsoClass:
    return IsoClass(canonical_form(m), automorphism_count(m))


# --- theories and enumeration ---------------------------------------------

@dataclass(frozen=True)
class Theory:
    """A canonical theory: a signature plus open axioms (universal closure implied).

    Canonicity is implicit: predicates are false on tuples with repeated entries.
    Axioms are :class:`theonlab.logic.Formula` objects.
    """

    sig: Signature
    axioms: Tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "axioms", tuple(self.axioms))
        for f in self.axioms:
            for pred, k in f.predicates():
                if pred not in self.sig or self.sig.arity(pred) != k:
                    raise ValueError(f"axiom references {pred}/{k} outside the signature")

    def violations(self, m: Model):
        from .logic import check_axioms
        return check_axioms(self, m)

    def models(self, m: Model) -> bool:
        return m.sig == self.sig and not self.violations(m)

    def rename(self, mapping: Mapping[str, str], name: str = "") -> "Theory":
        return Theory(
            self.sig.rename(mapping),
            tuple(f.rename(mapping) for f in self.axioms),
            name or self.name,
        )

    def union(self, other: "Theory", name: str = "") -> "Theory":
        clash = set(self.sig.names) & set(other.sig.names)
        if clash:
            raise ValueError(f"theories share predicates {sorted(clash)}; rename first")
        return Theory(
            self.sig.union(other.sig),
            self.axioms + other.axioms,
            name or f"{self.name or 'T'} + {other.name or 'T'}",
        )


def pure_theory(sig: Signature) -> Theory:
    return Theory(sig, (), "pure")


def _components(theory: Theory) -> List[Tuple[str, ...]]:
    """Predicate groups linked by sharing an axiom, in signature order."""
    parent = {n: n for n in theory.sig.names}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for f in theory.axioms:
        names = sorted({p for p, _ in f.predicates()}, key=theory.sig.names.index)
        for a, b in zip(names, names[1:]):
            parent[find(b)] = find(a)
    groups: Dict[str, List[str]] = {}
    for name in theory.sig.names:
        groups.setdefault(find(name), []).append(name)
    return [tuple(g) for g in groups.values()]


def enumerate_labeled(theory: Theory, n: int, budget: int = DEFAULT_BUDGET) -> List[Model]:
    """Every labelled model of ``theory`` on ``[n]``, in order of ``bits()``.

    Predicates that never share an axiom are enumerated separately, so the
    search space is a sum over the groups rather than a product.
    """
    groups = _components(theory)
    sizes = [tuple_count(theory.sig.restrict(g), n) for g in groups]
    required = sum(2 ** s for s in sizes) if len(groups) > 1 else 2 ** tuple_count(theory.sig, n)
    if required > budget:
        raise BudgetExceeded(required, budget)
    parts = []
    for g, size in zip(groups, sizes):
        sub = Theory(theory.sig.restrict(g), tuple(f for f in theory.axioms if {p for p, _ in f.predicates()} <= set(g)))
        found = []
        for bits in itertools.product((0, 1), repeat=size):
            m = model_from_bits(sub.sig, n, bits)
            if not sub.violations(m):
                found.append(m.relations)
        parts.append(found)
    out = []
    for combo in itertools.product(*parts):
        rels = {}
        for r in combo:
            rels.update(r)
        out.append(Model(theory.sig, n, rels))
    if len(groups) > 1:
        out.sort(key=lambda m: m.bits())
    return out


def enumerate_models(theory: Theory, n: int, budget: int = DEFAULT_BUDGET) -> List[IsoClass]:
    """All models of ``theory`` on ``n`` vertices up to isomorphism.

    Classes are sorted by the ``bits()`` of their canonical representative.
    """
    classes = {}
    for m in enumerate_labeled(theory, n, budget):
        c = canonical_form(m)
        key = c.bits()
        if key not in classes:
            classes[key] = IsoClass(c, automorphism_count(c))
    return [classes[k] for k in sorted(classes)]


def induced_density(m: Model, host: Model) -> Fraction:
    """Fraction of ``|m|``-subsets of ``host`` inducing a copy of ``m``."""
    if m.sig != host.sig:
        raise ValueError("models over different signatures")
    if m.n > host.n:
        return Fraction(0)
    target = canonical_form(m).bits()
    hits = 0
    total = 0
    for vs in itertools.combinations(range(1, host.n + 1), m.n):
        total += 1
        sub = host.restrict(vs)
        if _invariant(sub) == _invariant(m) and canonical_form(sub).bits() == target:
            hits += 1
    return Fraction(hits, total)


# --- text format -----------------------------------------------------------

def dump_model(m: Model) -> str:
    """Serialize as ``n=<int>`` followed by one ``P: (a,b);(c,d)`` line per predicate."""
    lines = [f"n={m.n}"]
    for name in m.sig.names:
        ts = sorted(m.relations[name])
        body = ";".join("(" + ",".join(str(v) for v in t) + ")" for t in ts)
        lines.append(f"{name}: {body}" if body else f"{name}:")
    return "\n".join(lines) + "\n"


_TUPLE_RE = re.compile(r"\(\s*([0-9\s,]*)\)")


def parse_model(text: str, sig: Optional[Signature] = None) -> Model:
    """Inverse of :func:`dump_model`.

    Without ``sig`` the arities are read off the tuples, so every predicate must
    then have at least one tuple.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].replace(" ", "").startswith("n="):
        raise ModelFormatError("line 1: expected 'n=<int>'")
    try:
        n = int(lines[0].replace(" ", "")[2:])
    except ValueError:
        raise ModelFormatError(f"line 1: bad vertex count {lines[0]!r}") from None
    rels: Dict[str, set] = {}
    order = []
    for lineno, ln in enumerate(lines[1:], start=2):
        if ":" not in ln:
            raise ModelFormatError(f"line {lineno}: expected 'NAME: tuples'")
        name, body = ln.split(":", 1)
        name = name.strip()
        if name in rels:
            raise ModelFormatError(f"line {lineno}: predicate {name!r} repeated")
        ts = set()
        body = body.strip()
        if body:
            for chunk in body.split(";"):
                mt = _TUPLE_RE.fullmatch(chunk.strip())
                if not mt:
                    raise ModelFormatError(f"line {lineno}: bad tuple {chunk.strip()!r}")
                ts.add(tuple(int(x) for x in mt.group(1).split(",") if x.strip()))
        rels[name] = ts
        order.append(name)
    if sig is None:
        preds = []
        for name in order:
            lens = {len(t) for t in rels[name]}
            if len(lens) != 1:
                raise ModelFormatError(f"cannot infer arity of {name!r}; pass a signature")
            preds.append((name, lens.pop()))
        sig = Signature(tuple(preds))
    else:
        missing = set(order) - set(sig.names)
        if missing:
            raise ModelFormatError(f"predicates {sorted(missing)} not in signature")
    try:
        return Model(sig, n, rels)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None
