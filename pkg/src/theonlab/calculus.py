"""Exact densities: quasirandom S_k-action objects, product couplings, dilution maps.

Everything here except :func:`delta1_eval` is exact rational arithmetic.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .logic import Atom, Formula, Not, conj, disj, distinct, iff
from .relational import Model, Signature, Theory, dump_model, injective_tuples, parse_model

Perm = Tuple[int, ...]


class ActionError(ValueError):
    pass


def compose(s: Perm, t: Perm) -> Perm:
    """``(s o t)(i) = s(t(i))``."""
    return tuple(s[v - 1] for v in t)


def perm_parity(p: Perm) -> int:
    inv = sum(1 for i, j in itertools.combinations(range(len(p)), 2) if p[i] > p[j])
    return -1 if inv % 2 else 1


@dataclass(frozen=True)
class ActionTable:
    """A left action of ``S_k`` on a list of ``k``-ary predicate names."""

    k: int
    predicates: Tuple[str, ...]
    table: Mapping[Tuple[Perm, str], str]

    def __post_init__(self):
        perms = list(itertools.permutations(range(1, self.k + 1)))
        tab = dict(self.table)
        names = set(self.predicates)
        if len(names) != len(self.predicates) or not names:
            raise ActionError("predicate names must be distinct and nonempty")
        for s in perms:
            for p in self.predicates:
                if tab.get((s, p)) not in names:
                    raise ActionError(f"action undefined or leaves the language at ({s}, {p})")
        ident = tuple(range(1, self.k + 1))
        for p in self.predicates:
            if tab[(ident, p)] != p:
                raise ActionError(f"identity moves {p}")
        for s, t in itertools.product(perms, perms):
            for p in self.predicates:
                if tab[(compose(s, t), p)] != tab[(s, tab[(t, p)])]:
                    raise ActionError(f"composition law fails at {s}, {t}, {p}")
        object.__setattr__(self, "table", tab)

    def __hash__(self):
        return hash((self.k, self.predicates))

    @classmethod
    def from_function(cls, k: int, predicates: Sequence[str], fn: Callable[[Perm, str], str]) -> "ActionTable":
        perms = itertools.permutations(range(1, k + 1))
        return cls(k, tuple(predicates), {(s, p): fn(s, p) for s in perms for p in predicates})

    @classmethod
    def trivial(cls, k: int, predicates: Sequence[str]) -> "ActionTable":
        return cls.from_function(k, predicates, lambda s, p: p)

    @classmethod
    def sign(cls, k: int, predicates: Sequence[str] = ("E1", "E2")) -> "ActionTable":
        """Odd permutations swap the two predicates."""
        a, b = predicates
        return cls.from_function(k, predicates, lambda s, p: p if perm_parity(s) == 1 else (b if p == a else a))

    def act(self, s: Perm, p: str) -> str:
        return self.table[(tuple(s), p)]

    def orbits(self) -> List[Tuple[str, ...]]:
        seen, out = set(), []
        for p in self.predicates:
            if p in seen:
                continue
            orb = sorted({self.table[(s, p)] for s in itertools.permutations(range(1, self.k + 1))},
                         key=self.predicates.index)
            seen.update(orb)
            out.append(tuple(orb))
        return out

    def check_invariant(self, p: Mapping[str, Fraction]) -> None:
        for q in self.predicates:
            if q not in p:
                raise ActionError(f"no density for {q}")
            if p[q] < 0:
                raise ActionError(f"negative density for {q}")
        for orb in self.orbits():
            if len({p[q] for q in orb}) != 1:
                raise ActionError(f"density vector not invariant on orbit {orb}")
        if sum(Fraction(p[q]) for q in self.predicates) != 1:
            raise ActionError("densities must sum to 1")


def action_theory(action: ActionTable) -> Theory:
    """``T_Theta``: exactly one predicate per injective tuple, moving with the action."""
    k = action.k
    sig = Signature(tuple((p, k) for p in action.predicates))
    xs = tuple(range(1, k + 1))
    axioms = [Formula(iff(distinct(xs), disj(*(Atom(p, xs) for p in action.predicates))), k)]
    for s in itertools.permutations(xs):
        if s == xs:
            continue
        for p in action.predicates:
            axioms.append(Formula(iff(Atom(p, s), Atom(action.act(s, p), xs)), k))
    for p, q in itertools.combinations(action.predicates, 2):
        axioms.append(Formula(Not(conj(Atom(p, xs), Atom(q, xs))), k))
    return Theory(sig, tuple(axioms), "action-theory")


def _as_fractions(action: ActionTable, p) -> Dict[str, Fraction]:
    if isinstance(p, Mapping):
        out = {q: Fraction(v) for q, v in p.items()}
    else:
        vals = list(p)
        if len(vals) != len(action.predicates):
            raise ActionError(f"expected {len(action.predicates)} densities, got {len(vals)}")
        out = {q: Fraction(v) for q, v in zip(action.predicates, vals)}
    action.check_invariant(out)
    return out


def interval_partition(action: ActionTable, p) -> Dict[str, Tuple[float, float]]:
    """Consecutive intervals ``Z_P`` of lengths ``p_P`` in predicate order."""
    ps = _as_fractions(action, p)
    out, lo = {}, Fraction(0)
    for q in action.predicates:
        out[q] = (float(lo), float(lo + ps[q]))
        lo += ps[q]
    return out


def _complete(action: ActionTable, m: Model) -> Model:
    """Fill in one predicate missing from ``m`` as the complement of the others."""
    missing = [q for q in action.predicates if q not in m.sig]
    if not missing:
        return m
    if len(missing) > 1:
        raise ActionError(f"model lacks predicates {missing}")
    present = set().union(*(m.relations[q] for q in action.predicates if q in m.sig))
    rels = {q: m.relations[q] for q in action.predicates if q in m.sig}
    rels[missing[0]] = {t for t in injective_tuples(m.n, action.k) if t not in present}
    sig = Signature(tuple((q, action.k) for q in action.predicates))
    return Model(sig, m.n, rels)


def closed_form_qr_density(action: ActionTable, p, m: Model) -> Fraction:
    """Labelled density of ``m`` under the quasirandom object of ``(action, p)``.

    Each ``k``-set contributes the density of the predicate holding on its
    increasing tuple; by invariance this equals ``prod p_P^{|R_P(M)|/k!}``.
    """
    ps = _as_fractions(action, p)
    m = _complete(action, m)
    bad = action_theory(action).violations(m)
    if bad:
        raise ActionError(f"model violates the action theory: {bad[0].text}")
    out = Fraction(1)
    for a in itertools.combinations(range(1, m.n + 1), action.k):
        owner = [q for q in action.predicates if a in m.relations[q]]
        out *= ps[owner[0]]
    return out


def theta_qr_theon(action: ActionTable, p, name: str = ""):
    """Theon whose ``P``-peon is ``{x : x_[k] in Z_{sigma_x . P}}``."""
    from .theon import expr as ex
    from .theon.core import Theon

    k = action.k
    z = interval_partition(action, p)
    full = tuple(range(1, k + 1))

    def inside(q):
        lo, hi = z[q]
        parts = []
        if lo > 0:
            parts.append(ex.Thresh(full, ">=", lo))
        if hi < 1:
            parts.append(ex.Thresh(full, "<", hi))
        if lo >= hi:
            return ex.Const(False)
        return ex.And(tuple(parts)) if parts else ex.Const(True)

    exprs = {}
    for q in action.predicates:
        branches = []
        for s in itertools.permutations(full):
            branches.append(ex.And((ex.SigmaIs(s), inside(action.act(s, q)))))
        exprs[q] = ex.Or(tuple(branches))
    return Theon(action_theory(action), 1, exprs, name or "theta-qr", rank_bound=k, independence=None)


# --- product densities -------------------------------------------------------

Oracle = Callable[[Model], object]


def product_density(factors: Sequence[Tuple[Sequence[str], Oracle]], m: Model):
    """``prod_i phi_i(<m restricted to factor i's predicates>)``; exact when every factor is."""
    vals = [oracle(m.reduct(names)) for names, oracle in factors]
    if all(isinstance(v, (int, Fraction)) for v in vals):
        return math.prod((Fraction(v) for v in vals), start=Fraction(1))
    return math.prod(float(v) for v in vals)


# --- dilution ---------------------------------------------------------------

Overlay = FrozenSet[Tuple[int, ...]]


def _key(u: Iterable[Tuple[int, ...]]) -> str:
    return ";".join(",".join(str(v) for v in a) for a in sorted(u))


def _unkey(s: str) -> Overlay:
    if not s:
        return frozenset()
    return frozenset(tuple(int(v) for v in part.split(",")) for part in s.split(";"))


@dataclass(frozen=True)
class DensityVector:
    """Values ``xi(<M_U>)`` for every overlay ``U`` of ``ell``-sets from ``family`` on the base ``M``."""

    base: Model
    ell: int
    family: Tuple[Tuple[int, ...], ...]
    values: Mapping[Overlay, Fraction]
    check: bool = field(default=True, compare=False)

    def __post_init__(self):
        fam = tuple(sorted(tuple(sorted(a)) for a in self.family))
        for a in fam:
            if len(a) != self.ell or any(v < 1 or v > self.base.n for v in a):
                raise ValueError(f"{a} is not an {self.ell}-subset of the base")
        if len(set(fam)) != len(fam):
            raise ValueError("repeated set in the family")
        vals = {frozenset(tuple(sorted(a)) for a in u): Fraction(v) for u, v in self.values.items()}
        expected = {frozenset(c) for r in range(len(fam) + 1) for c in itertools.combinations(fam, r)}
        if set(vals) != expected:
            raise ValueError("values must cover exactly the overlays of the family")
        if self.check and any(not 0 <= v <= 1 for v in vals.values()):
            raise ValueError("density values must lie in [0, 1]")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "values", vals)

    @classmethod
    def full(cls, base: Model, ell: int, values: Mapping, check: bool = True) -> "DensityVector":
        fam = tuple(itertools.combinations(range(1, base.n + 1), ell))
        return cls(base, ell, fam, values, check)

    def overlays(self) -> List[Overlay]:
        return sorted(self.values, key=lambda u: (len(u), sorted(u)))

    def __getitem__(self, u) -> Fraction:
        return self.values[frozenset(tuple(sorted(a)) for a in u)]

    def total(self) -> Fraction:
        return sum(self.values.values(), Fraction(0))

    def to_json(self) -> str:
        return json.dumps({
            "base": dump_model(self.base),
            "ell": self.ell,
            "family": [list(a) for a in self.family],
            "values": {_key(u): f"{v.numerator}/{v.denominator}" for u, v in
                       sorted(self.values.items(), key=lambda kv: _key(kv[0]))},
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, sig: Optional[Signature] = None) -> "DensityVector":
        d = json.loads(text)
        return cls(parse_model(d["base"], sig), int(d["ell"]), tuple(tuple(a) for a in d["family"]),
                   {_unkey(k): Fraction(v) for k, v in d["values"].items()}, check=False)


def _transform(v: DensityVector, a: Fraction, b: Fraction) -> DensityVector:
    # U -> a^|U| * sum_{W >= U} b^|W - U| v(W)
    out = {}
    for u in v.values:
        s = Fraction(0)
        for w, val in v.values.items():
            if u <= w:
                s += b ** len(w - u) * val
        out[u] = a ** len(u) * s
    return DensityVector(v.base, v.ell, v.family, out, check=False)


def _t(t) -> Fraction:
    t = Fraction(t)
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    return t


def dilute(v: DensityVector, t) -> DensityVector:
    t = _t(t)
    return _transform(v, t, 1 - t)


def mobius_inverse(v: DensityVector, t) -> DensityVector:
    t = _t(t)
    return _transform(v, 1 / t, 1 - 1 / t)


# --- L1 distance through a coupling -----------------------------------------

def delta1_eval(c, n_samples: int, seed: int, pairs: Optional[Sequence[Tuple[str, str]]] = None,
                chunk_size: Optional[int] = None, threads: Optional[int] = None):
    """Estimate ``xi(d_T)`` for a coupling ``c`` of two copies of one signature.

    The value is an upper bound on the L1 distance of the two reducts; no
    minimisation over couplings takes place.
    """
    from .theon import expr as ex
    from .theon.sampling import CHUNK, DensityEstimate, run_sum, sample_theta

    if pairs is None:
        if len(c.parts) != 2 or len(c.parts[0]) != len(c.parts[1]):
            raise ValueError("cannot pair the predicates of this coupling; pass pairs")
        pairs = list(zip(c.parts[0], c.parts[1]))
    for a, b in pairs:
        if c.sig.arity(a) != c.sig.arity(b):
            raise ValueError(f"{a} and {b} have different arities")
    n = max(c.sig.arity(a) for a, _ in pairs)

    def job(rng, size):
        th = sample_theta(n, c.dim, c.max_arity, rng, size)
        ctx = ex.EvalContext(th.coords, size)
        d = np.zeros(size)
        for a, b in pairs:
            alpha = tuple(range(1, c.sig.arity(a) + 1))
            d += ex.evaluate(c.exprs[a], ctx, alpha) != ex.evaluate(c.exprs[b], ctx, alpha)
        return np.array([d.sum(), np.square(d).sum()])

    tot = run_sum(job, n_samples, seed, chunk_size or CHUNK, threads)
    mean = tot[0] / n_samples
    var = max(tot[1] / n_samples - mean * mean, 0.0)
    return DensityEstimate(float(mean), math.sqrt(var / n_samples), int(n_samples), seed)
