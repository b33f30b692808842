"""Quantifier-free formulas with equality, their text syntax, and open interpretations.

Grammar (lowest to highest precedence)::

    formula := iff
    iff     := imp ( "<->" imp )*
    imp     := or ( "->" imp )?              right associative
    or      := and ( "|" and )*
    and     := unary ( "&" unary )*
    unary   := "!" unary | primary
    primary := "(" formula ")" | "true" | "false"
             | NAME "(" var ("," var)* ")"
             | var "=" var | var "!=" var
    var     := "x" DIGITS                    1-based, at most the declared count

``->``, ``<->`` and ``!=`` are sugar and never appear in the AST. Quantifiers
are rejected.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .relational import (
    BudgetExceeded,
    DEFAULT_BUDGET,
    Model,
    Signature,
    Theory,
    enumerate_models,
    injective_tuples,
)


class FormulaSyntaxError(ValueError):
    def __init__(self, msg, pos=None, text=None):
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(f"{msg}{where}")
        self.pos = pos
        self.text = text


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    pred: str
    args: Tuple[int, ...]


@dataclass(frozen=True)
class Eq:
    left: int
    right: int


@dataclass(frozen=True)
class Not:
    arg: "Node"


@dataclass(frozen=True)
class And:
    args: Tuple["Node", ...]


@dataclass(frozen=True)
class Or:
    args: Tuple["Node", ...]


@dataclass(frozen=True)
class Const:
    value: bool


Node = Union[Atom, Eq, Not, And, Or, Const]


def conj(*args: Node) -> Node:
    flat = []
    for a in args:
        flat.extend(a.args if isinstance(a, And) else (a,))
    if not flat:
        return Const(True)
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(*args: Node) -> Node:
    flat = []
    for a in args:
        flat.extend(a.args if isinstance(a, Or) else (a,))
    if not flat:
        return Const(False)
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def iff(a: Node, b: Node) -> Node:
    return disj(conj(a, b), conj(Not(a), Not(b)))


def implies(a: Node, b: Node) -> Node:
    return disj(Not(a), b)


def distinct(vars_: Sequence[int]) -> Node:
    parts = [Not(Eq(i, j)) for i, j in itertools.combinations(vars_, 2)]
    if not parts:
        return Const(True)
    return conj(*parts)


def _walk(node: Node):
    yield node
    if isinstance(node, Not):
        yield from _walk(node.arg)
    elif isinstance(node, (And, Or)):
        for a in node.args:
            yield from _walk(a)


def _map_atoms(node: Node, fn: Callable[[Atom], Node]) -> Node:
    if isinstance(node, Atom):
        return fn(node)
    if isinstance(node, Not):
        return Not(_map_atoms(node.arg, fn))
    if isinstance(node, And):
        return conj(*(_map_atoms(a, fn) for a in node.args))
    if isinstance(node, Or):
        return disj(*(_map_atoms(a, fn) for a in node.args))
    return node


def _rename_vars(node: Node, mapping: Mapping[int, int]) -> Node:
    if isinstance(node, Atom):
        return Atom(node.pred, tuple(mapping[v] for v in node.args))
    if isinstance(node, Eq):
        return Eq(mapping[node.left], mapping[node.right])
    if isinstance(node, Not):
        return Not(_rename_vars(node.arg, mapping))
    if isinstance(node, And):
        return conj(*(_rename_vars(a, mapping) for a in node.args))
    if isinstance(node, Or):
        return disj(*(_rename_vars(a, mapping) for a in node.args))
    return node


@dataclass(frozen=True)
class Formula:
    """An open formula with free variables ``x1..x{nvars}``."""

    node: Node
    nvars: int

    def __post_init__(self):
        for sub in _walk(self.node):
            vs = ()
            if isinstance(sub, Atom):
                vs = sub.args
            elif isinstance(sub, Eq):
                vs = (sub.left, sub.right)
            for v in vs:
                if not 1 <= v <= self.nvars:
                    raise ValueError(f"variable x{v} outside x1..x{self.nvars}")

    def predicates(self):
        return {(a.pred, len(a.args)) for a in _walk(self.node) if isinstance(a, Atom)}

    def rename(self, mapping: Mapping[str, str]) -> "Formula":
        return Formula(_map_atoms(self.node, lambda a: Atom(mapping.get(a.pred, a.pred), a.args)), self.nvars)

    def __call__(self, m: Model, assignment: Sequence[int]) -> bool:
        return eval_formula(self, m, assignment)

    def __str__(self):
        return to_text(self.node)


# --- printing --------------------------------------------------------------

_PREC = {Or: 1, And: 2}


def to_text(node: Node, parent: int = 0) -> str:
    if isinstance(node, Atom):
        return f"{node.pred}(" + ",".join(f"x{v}" for v in node.args) + ")"
    if isinstance(node, Eq):
        return f"x{node.left}=x{node.right}"
    if isinstance(node, Const):
        return "true" if node.value else "false"
    if isinstance(node, Not):
        return "!" + to_text(node.arg, 3)
    prec = _PREC[type(node)]
    sep = " & " if isinstance(node, And) else " | "
    s = sep.join(to_text(a, prec) for a in node.args)
    return f"({s})" if parent >= prec else s


# --- parsing ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<op><->|->|!=|[()!&|,=])|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<bad>\S))"
)
_VAR_RE = re.compile(r"^x([0-9]+)$")


def _tokenize(text):
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            break
        if m.group("bad"):
            raise FormulaSyntaxError(f"unexpected character {m.group('bad')!r}", m.start("bad"), text)
        kind = "op" if m.group("op") else "name"
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text, sig, nvars):
        self.text = text
        self.sig = sig
        self.nvars = nvars
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            got = tok[1] or "end of input"
            raise FormulaSyntaxError(f"expected {value!r}, got {got!r}", tok[2], self.text)
        self.i += 1
        return tok

    def parse(self):
        node = self.iff()
        tok = self.peek()
        if tok[0] != "end":
            raise FormulaSyntaxError(f"unexpected {tok[1]!r}", tok[2], self.text)
        return node

    def iff(self):
        node = self.imp()
        while self.peek()[1] == "<->":
            self.take()
            node = iff(node, self.imp())
        return node

    def imp(self):
        node = self.or_()
        if self.peek()[1] == "->":
            self.take()
            return implies(node, self.imp())
        return node

    def or_(self):
        parts = [self.and_()]
        while self.peek()[1] == "|":
            self.take()
            parts.append(self.and_())
        return disj(*parts)

    def and_(self):
        parts = [self.unary()]
        while self.peek()[1] == "&":
            self.take()
            parts.append(self.unary())
        return conj(*parts)

    def unary(self):
        if self.peek()[1] == "!":
            self.take()
            return Not(self.unary())
        return self.primary()

    def var(self):
        kind, val, pos = self.take()
        m = _VAR_RE.match(val) if kind == "name" else None
        if not m:
            raise FormulaSyntaxError(f"expected a variable, got {val or 'end of input'!r}", pos, self.text)
        idx = int(m.group(1))
        if not 1 <= idx <= self.nvars:
            raise FormulaSyntaxError(f"variable {val} outside x1..x{self.nvars}", pos, self.text)
        return idx

    def primary(self):
        kind, val, pos = self.peek()
        if val == "(":
            self.take()
            node = self.iff()
            self.take(")")
            return node
        if kind != "name":
            raise FormulaSyntaxError(f"unexpected {val or 'end of input'!r}", pos, self.text)
        if val in ("forall", "exists"):
            raise FormulaSyntaxError("quantifiers are not supported", pos, self.text)
        if val in ("true", "false"):
            self.take()
            return Const(val == "true")
        nxt = self.toks[self.i + 1][1]
        if nxt == "(":
            self.take()
            self.take("(")
            args = [self.var()]
            while self.peek()[1] == ",":
                self.take()
                args.append(self.var())
            self.take(")")
            if self.sig is not None:
                if val not in self.sig:
                    raise FormulaSyntaxError(f"unknown predicate {val!r}", pos, self.text)
                k = self.sig.arity(val)
                if k != len(args):
                    raise FormulaSyntaxError(
                        f"predicate {val!r} has arity {k}, given {len(args)} arguments", pos, self.text
                    )
            return Atom(val, tuple(args))
        left = self.var()
        op = self.take()
        if op[1] not in ("=", "!="):
            raise FormulaSyntaxError(f"expected '=' or '!=', got {op[1]!r}", op[2], self.text)
        right = self.var()
        return Eq(left, right) if op[1] == "=" else Not(Eq(left, right))


def parse_formula(text: str, sig: Optional[Signature], nvars: int) -> Formula:
    return Formula(_Parser(text, sig, nvars).parse(), nvars)


# --- evaluation ------------------------------------------------------------

def eval_node(node: Node, m: Model, assignment: Sequence[int]) -> bool:
    if isinstance(node, Atom):
        vs = tuple(assignment[v - 1] for v in node.args)
        return vs in m.relations[node.pred]
    if isinstance(node, Eq):
        return assignment[node.left - 1] == assignment[node.right - 1]
    if isinstance(node, Not):
        return not eval_node(node.arg, m, assignment)
    if isinstance(node, And):
        return all(eval_node(a, m, assignment) for a in node.args)
    if isinstance(node, Or):
        return any(eval_node(a, m, assignment) for a in node.args)
    return node.value


def eval_formula(f: Formula, m: Model, assignment: Sequence[int]) -> bool:
    """Truth value of ``f`` in ``m``; atoms on repeated vertices are false."""
    if len(assignment) != f.nvars:
        raise ValueError(f"assignment of length {len(assignment)} for {f.nvars} variables")
    return eval_node(f.node, m, assignment)


def eval_batch(node: Node, atom: Callable[[str, Tuple[int, ...]], "np.ndarray"], assignment: Sequence[int]):
    """Vectorised evaluation; ``atom(pred, vertices)`` returns a boolean array.

    Tuples with repeated vertices never reach ``atom``.
    """
    if isinstance(node, Atom):
        vs = tuple(assignment[v - 1] for v in node.args)
        if len(set(vs)) != len(vs):
            return False
        return atom(node.pred, vs)
    if isinstance(node, Eq):
        return assignment[node.left - 1] == assignment[node.right - 1]
    if isinstance(node, Not):
        return np.logical_not(eval_batch(node.arg, atom, assignment))
    if isinstance(node, And):
        out = True
        for a in node.args:
            out = np.logical_and(out, eval_batch(a, atom, assignment))
        return out
    if isinstance(node, Or):
        out = False
        for a in node.args:
            out = np.logical_or(out, eval_batch(a, atom, assignment))
        return out
    return node.value


# --- theories --------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    axiom: int
    assignment: Tuple[int, ...]
    text: str = ""


def check_axioms(t: Theory, m: Model) -> List[Violation]:
    """Every (axiom, assignment) pair that fails; empty iff ``m`` models ``t``."""
    for name, k in t.sig.predicates:
        if name not in m.sig or m.sig.arity(name) != k:
            raise ValueError(f"model lacks predicate {name}/{k}")
    out = []
    verts = range(1, m.n + 1)
    for idx, ax in enumerate(t.axioms):
        for a in itertools.product(verts, repeat=ax.nvars):
            if not eval_node(ax.node, m, a):
                out.append(Violation(idx, a, str(ax)))
    return out


# --- interpretations -------------------------------------------------------

class InterpretationError(ValueError):
    pass


@dataclass(frozen=True)
class Interpretation:
    """Maps each source predicate ``P`` to an open formula in ``k(P)`` variables over ``target``."""

    source: Signature
    target: Signature
    formulas: Mapping[str, Formula]

    def __post_init__(self):
        fs = dict(self.formulas)
        for name, k in self.source.predicates:
            if name not in fs:
                raise InterpretationError(f"source predicate {name!r} not mapped")
            if fs[name].nvars != k:
                raise InterpretationError(f"{name}: formula has {fs[name].nvars} variables, arity is {k}")
            for pred, arity in fs[name].predicates():
                if pred not in self.target or self.target.arity(pred) != arity:
                    raise InterpretationError(f"{name}: {pred}/{arity} is not in the target signature")
        extra = set(fs) - set(self.source.names)
        if extra:
            raise InterpretationError(f"formulas for unknown source predicates {sorted(extra)}")
        object.__setattr__(self, "formulas", fs)

    def __hash__(self):
        return hash((self.source, self.target, tuple(self.formulas[n] for n in self.source.names)))


def identity_interpretation(sig: Signature) -> Interpretation:
    return Interpretation(
        sig, sig, {name: Formula(Atom(name, tuple(range(1, k + 1))), k) for name, k in sig.predicates}
    )


def structure_erasing(source: Signature, target: Signature) -> Interpretation:
    """``source -> target`` acting identically on the predicates of ``source``."""
    for name, k in source.predicates:
        if name not in target or target.arity(name) != k:
            raise InterpretationError(f"{name}/{k} missing from target")
    return Interpretation(
        source, target, {name: Formula(Atom(name, tuple(range(1, k + 1))), k) for name, k in source.predicates}
    )


def apply_interpretation(i: Interpretation, m: Model) -> Model:
    for name, k in i.target.predicates:
        if name not in m.sig or m.sig.arity(name) != k:
            raise InterpretationError(f"model lacks target predicate {name}/{k}")
    rels = {}
    for name, k in i.source.predicates:
        node = i.formulas[name].node
        rels[name] = {t for t in injective_tuples(m.n, k) if eval_node(node, m, t)}
    return Model(i.source, m.n, rels)


def union_interpretation(i: Interpretation, j: Interpretation) -> Interpretation:
    """``I ∪ J``: acts as ``I`` on its source predicates and as ``J`` on the others."""
    clash = set(i.source.names) & set(j.source.names)
    if clash:
        raise InterpretationError(f"source signatures overlap on {sorted(clash)}")
    try:
        target = i.target.union(j.target)
    except ValueError as exc:
        raise InterpretationError(str(exc)) from None
    fs = dict(i.formulas)
    fs.update(j.formulas)
    return Interpretation(Signature(i.source.predicates + j.source.predicates), target, fs)


def substitute(node: Node, j: Interpretation) -> Node:
    """Replace each atom ``Q(x_a..)`` by ``J(Q)`` with its variables renamed to ``x_a..``."""

    def repl(atom: Atom) -> Node:
        if len(set(atom.args)) != len(atom.args):
            return Const(False)
        f = j.formulas[atom.pred]
        body = _rename_vars(f.node, {t + 1: a for t, a in enumerate(atom.args)})
        # keeps canonicity when the substituted variables collide
        return conj(distinct(atom.args), body) if len(atom.args) > 1 else body

    return _map_atoms(node, repl)


def compose_interpretation(i: Interpretation, j: Interpretation) -> Interpretation:
    """``i ∘ j`` with ``j.source == i.target``: applying it equals ``i(j(m))``."""
    for name, k in i.target.predicates:
        if name not in j.source or j.source.arity(name) != k:
            raise InterpretationError(f"{name}/{k} of the first target is not a source predicate of the second")
    return Interpretation(
        i.source,
        j.target,
        {name: Formula(substitute(f.node, j), f.nvars) for name, f in i.formulas.items()},
    )


@dataclass
class InterpretationReport:
    passed: bool
    sizes: Tuple[int, ...]
    checked: int
    counterexample: Optional[Model] = None
    image: Optional[Model] = None
    violations: Tuple[Violation, ...] = ()


def check_interpretation(i: Interpretation, src: Theory, dst: Theory, nmax: int,
                         budget: int = DEFAULT_BUDGET) -> InterpretationReport:
    """Bounded check that ``i`` maps models of ``dst`` (up to ``nmax`` vertices) to models of ``src``.

    Only sizes ``1..nmax`` are examined; passing says nothing about larger models.
    """
    checked = 0
    sizes = []
    for n in range(1, nmax + 1):
        for cls in enumerate_models(dst, n, budget):
            checked += 1
            img = apply_interpretation(i, cls.representative)
            bad = check_axioms(src, img)
            if bad:
                return InterpretationReport(False, tuple(sizes) + (n,), checked, cls.representative, img, tuple(bad))
        sizes.append(n)
    return InterpretationReport(True, tuple(sizes), checked)


# --- interpretation files --------------------------------------------------

_HEAD_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(([^)]*)\)\s*:=(.*)$")


def parse_interpretation(text: str, target: Signature, source: Optional[Signature] = None) -> Interpretation:
    """Lines ``P(x1,...,xk) := <formula over target>``; ``#`` starts a comment."""
    fs = {}
    preds = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        ln = raw.split("#", 1)[0].strip()
        if not ln:
            continue
        m = _HEAD_RE.match(ln)
        if not m:
            raise FormulaSyntaxError(f"line {lineno}: expected 'P(x1,...,xk) := formula'")
        name = m.group(1)
        args = [a.strip() for a in m.group(2).split(",")]
        if args != [f"x{t}" for t in range(1, len(args) + 1)]:
            raise FormulaSyntaxError(f"line {lineno}: head variables must be x1..xk in order")
        try:
            fs[name] = parse_formula(m.group(3), target, len(args))
        except FormulaSyntaxError as exc:
            raise FormulaSyntaxError(f"line {lineno}: {exc}") from None
        preds.append((name, len(args)))
    if source is None:
        source = Signature(tuple(preds))
    return Interpretation(source, target, fs)


def dump_interpretation(i: Interpretation) -> str:
    lines = []
    for name, k in i.source.predicates:
        head = f"{name}(" + ",".join(f"x{t}" for t in range(1, k + 1)) + ")"
        lines.append(f"{head} := {i.formulas[name]}")
    return "\n".join(lines) + "\n"
