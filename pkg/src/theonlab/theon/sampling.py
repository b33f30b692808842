"""Exchangeable-array sampling, realisation and Monte Carlo estimation.

Reproducibility: a job of ``n_samples`` draws is cut into chunks of
``chunk_size``; chunk ``c`` draws from
``np.random.SeedSequence(entropy=seed, spawn_key=(c,))``. Per-chunk results are
combined in chunk order, so an estimate depends only on
``(seed, chunk_size, n_samples)`` and never on the number of threads.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..relational import Model, injective_tuples, labeled_copies, model_from_bits
from . import expr as ex
from .core import Theon, TheonError

CHUNK = 1 << 16


@dataclass(frozen=True)
class DensityEstimate:
    value: float
    stderr: float
    n_samples: int
    seed: int

    @classmethod
    def bernoulli(cls, hits: int, n: int, seed: int) -> "DensityEstimate":
        v = hits / n if n else float("nan")
        return cls(v, math.sqrt(v * (1 - v) / n) if n else float("nan"), n, seed)

    def z(self, target: float) -> float:
        """Standardised distance to ``target``; infinite when the estimate has no spread but misses."""
        d = self.value - target
        if self.stderr > 0:
            return d / self.stderr
        return 0.0 if d == 0 else math.copysign(math.inf, d)

    def to_dict(self, name: str = "") -> dict:
        out = {"value": self.value, "stderr": self.stderr, "n_samples": self.n_samples, "seed": self.seed}
        if name:
            out = {"name": name, **out}
        return out


# --- seeds and sharding ------------------------------------------------------

def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chunk),)))


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))


def chunk_sizes(n_samples: int, chunk_size: int = CHUNK) -> List[int]:
    n_samples = int(n_samples)
    if n_samples < 0:
        raise ValueError("negative sample count")
    full, rest = divmod(n_samples, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunks(job: Callable[[np.random.Generator, int], object], n_samples: int, seed: int,
               chunk_size: int = CHUNK, threads: Optional[int] = None) -> list:
    """Run ``job(rng, size)`` on every chunk; results are returned in chunk order."""
    sizes = chunk_sizes(n_samples, chunk_size)
    threads = threads or default_threads()
    tasks = [(c, s) for c, s in enumerate(sizes)]

    def one(cs):
        return job(chunk_rng(seed, cs[0]), cs[1])

    if threads == 1 or len(tasks) <= 1:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, tasks))


def run_sum(job, n_samples, seed, chunk_size=CHUNK, threads=None):
    parts = run_chunks(job, n_samples, seed, chunk_size, threads)
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total


# --- coordinates -------------------------------------------------------------

def subsets_up_to(n: int, r: int) -> List[Tuple[int, ...]]:
    """Nonempty subsets of ``[n]`` of size at most ``r``, by size then lexicographically."""
    out = []
    for s in range(1, min(n, r) + 1):
        out.extend(itertools.combinations(range(1, n + 1), s))
    return out


@dataclass
class Theta:
    """A batch of ``size`` points of ``E_{[n], max_arity}`` over ``[0,1]^dim``."""

    n: int
    dim: int
    max_arity: int
    coords: Dict[int, np.ndarray]

    @property
    def size(self) -> int:
        return next(iter(self.coords.values())).shape[0] if self.coords else 0

    def point(self, i: int = 0) -> Dict[Tuple[int, ...], Tuple[float, ...]]:
        return {a: tuple(self.coords[ex.subset_mask(a)][i]) for a in subsets_up_to(self.n, self.max_arity)}

    def permuted(self, perm: Sequence[int]) -> "Theta":
        """Coordinates moved along ``v -> perm[v-1]``: the new ``theta_{perm(A)}`` is the old ``theta_A``."""
        out = {}
        for a in subsets_up_to(self.n, self.max_arity):
            out[ex.subset_mask(perm[v - 1] for v in a)] = self.coords[ex.subset_mask(a)]
        return Theta(self.n, self.dim, self.max_arity, out)


def sample_theta(n: int, dim: int, max_arity: int, seed, size: int = 1) -> Theta:
    """I.i.d. uniform coordinates for every ``A`` in ``r(n, max_arity)``; ``seed`` is an int or a Generator."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    coords = {}
    for a in subsets_up_to(n, max_arity):
        coords[ex.subset_mask(a)] = rng.random((size, dim))
    return Theta(n, dim, max_arity, coords)


# --- realisation -------------------------------------------------------------

@dataclass
class Realized:
    """Relations of ``size`` sampled models on ``[n]``: ``rel[P][alpha]`` is a boolean array."""

    theon: Theon
    n: int
    size: int
    rel: Dict[str, Dict[Tuple[int, ...], np.ndarray]]

    def bits(self) -> np.ndarray:
        """``(size, T)`` matrix whose rows follow :meth:`Model.bits` ordering."""
        cols = []
        for name, k in self.theon.sig.predicates:
            cols.extend(self.rel[name][t] for t in injective_tuples(self.n, k))
        if not cols:
            return np.zeros((self.size, 0), dtype=bool)
        return np.stack(cols, axis=1)

    def model(self, i: int = 0) -> Model:
        return model_from_bits(self.theon.sig, self.n, [int(b) for b in self.bits()[i]])


def realize_batch(t: Theon, theta: Theta, names: Optional[Sequence[str]] = None) -> Realized:
    if theta.max_arity < min(t.max_arity, theta.n) or theta.dim < t.dim:
        raise TheonError("theta does not cover the coordinates this theon reads")
    ctx = ex.EvalContext(theta.coords, theta.size)
    rel = {}
    for name, k in t.sig.predicates:
        if names is not None and name not in names:
            continue
        rel[name] = {a: ex.evaluate(t.exprs[name], ctx, a) for a in injective_tuples(theta.n, k)}
    return Realized(t, theta.n, theta.size, rel)


def realize_model(t: Theon, theta: Theta, index: int = 0) -> Model:
    return realize_batch(t, theta).model(index)


def sample_models(t: Theon, n: int, count: int, seed: int) -> List[Model]:
    th = sample_theta(n, t.dim, t.max_arity, seed, count)
    r = realize_batch(t, th)
    return [r.model(i) for i in range(count)]


# --- model codes -------------------------------------------------------------

def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack a boolean ``(N, T)`` matrix into ``(N, ceil(T/63))`` int64 words, first bit most significant."""
    n, t = bits.shape
    w = max(1, -(-t // 63))
    out = np.zeros((n, w), dtype=np.int64)
    for j in range(t):
        word, pos = divmod(j, 63)
        width = min(63, t - 63 * word)
        out[:, word] |= bits[:, j].astype(np.int64) << (width - 1 - pos)
    return out


def pack_model(m: Model) -> Tuple[int, ...]:
    return tuple(int(v) for v in pack_rows(np.asarray([m.bits()], dtype=bool))[0])


def _match_any(words: np.ndarray, targets: Sequence[Tuple[int, ...]]) -> np.ndarray:
    if words.shape[1] == 1:
        return np.isin(words[:, 0], np.asarray([t[0] for t in targets], dtype=np.int64))
    hit = np.zeros(words.shape[0], dtype=bool)
    for t in targets:
        hit |= np.all(words == np.asarray(t, dtype=np.int64), axis=1)
    return hit


def _check_model(t: Theon, m: Model):
    if m.sig != t.sig:
        raise TheonError("model signature differs from the theon's")


def estimate_density(t: Theon, m: Model, n_samples: int, seed: int, chunk_size: int = CHUNK,
                     threads: Optional[int] = None) -> Tuple[DensityEstimate, DensityEstimate]:
    """Labelled ``P[K|[n] = m]`` and unlabelled ``P[K|[n] ~ m]`` estimates."""
    _check_model(t, m)
    if m.n == 0:
        one = DensityEstimate(1.0, 0.0, int(n_samples), seed)
        return one, one
    exact = [pack_model(m)]
    copies = [pack_model(c) for c in labeled_copies(m)]

    def job(rng, size):
        r = realize_batch(t, sample_theta(m.n, t.dim, t.max_arity, rng, size))
        words = pack_rows(r.bits())
        return np.array([_match_any(words, exact).sum(), _match_any(words, copies).sum()], dtype=np.int64)

    hits = run_sum(job, n_samples, seed, chunk_size, threads)
    return (DensityEstimate.bernoulli(int(hits[0]), n_samples, seed),
            DensityEstimate.bernoulli(int(hits[1]), n_samples, seed))


def estimate_models(t: Theon, models: Sequence[Model], n_samples: int, seed: int, chunk_size: int = CHUNK,
                    threads: Optional[int] = None) -> List[DensityEstimate]:
    """Labelled densities of several models on the same ``[n]``, from one shared sample."""
    if not models:
        return []
    n = models[0].n
    for m in models:
        _check_model(t, m)
        if m.n != n:
            raise TheonError("all models must share the vertex count")
    codes = [[pack_model(m)] for m in models]

    def job(rng, size):
        words = pack_rows(realize_batch(t, sample_theta(n, t.dim, t.max_arity, rng, size)).bits())
        return np.array([_match_any(words, c).sum() for c in codes], dtype=np.int64)

    hits = run_sum(job, n_samples, seed, chunk_size, threads)
    return [DensityEstimate.bernoulli(int(h), n_samples, seed) for h in hits]


def empirical_distribution(t: Theon, n: int, n_samples: int, seed: int, chunk_size: int = CHUNK,
                           threads: Optional[int] = None) -> Dict[Model, int]:
    """Counts of every labelled model on ``[n]`` seen in ``n_samples`` draws, ordered by code."""

    def job(rng, size):
        r = realize_batch(t, sample_theta(n, t.dim, t.max_arity, rng, size))
        bits = r.bits()
        keys, counts = np.unique(bits, axis=0, return_counts=True)
        return [(tuple(int(b) for b in k), int(c)) for k, c in zip(keys, counts)]

    total: Dict[Tuple[int, ...], int] = {}
    for part in run_chunks(job, n_samples, seed, chunk_size, threads):
        for k, c in part:
            total[k] = total.get(k, 0) + c
    return {model_from_bits(t.sig, n, k): total[k] for k in sorted(total)}


def estimate_events(t: Theon, n: int, events: Sequence[Callable[[Realized, Theta], np.ndarray]],
                    n_samples: int, seed: int, chunk_size: int = CHUNK,
                    threads: Optional[int] = None) -> List[DensityEstimate]:
    """Bernoulli estimates for several events of one sampled model on ``[n]``."""

    def job(rng, size):
        th = sample_theta(n, t.dim, t.max_arity, rng, size)
        r = realize_batch(t, th)
        return np.array([int(np.count_nonzero(ev(r, th))) for ev in events], dtype=np.int64)

    hits = run_sum(job, n_samples, seed, chunk_size, threads)
    return [DensityEstimate.bernoulli(int(h), n_samples, seed) for h in hits]


# --- flattenings -------------------------------------------------------------

def _low_coords(low: Mapping, k: int, ell: int, dim: int) -> Dict[int, np.ndarray]:
    out = {}
    for a in subsets_up_to(k, ell):
        key = a if a in low else (a[0] if len(a) == 1 and a[0] in low else None)
        if key is None:
            raise TheonError(f"low point lacks coordinate {a}")
        v = np.atleast_1d(np.asarray(low[key], dtype=float))
        if v.shape[-1] == 1 and dim > 1:
            v = np.repeat(v, dim, axis=-1)
        out[ex.subset_mask(a)] = v.reshape(-1, dim)
    return out


def estimate_flattening(t: Theon, pred: str, ell: int, low: Mapping, inner_samples: int, seed: int,
                        chunk_size: int = CHUNK, threads: Optional[int] = None) -> DensityEstimate:
    """``W^ell(low)``: membership frequency when every coordinate above level ``ell`` is resampled."""
    k = t.sig.arity(pred)
    if not 0 <= ell < k:
        raise ValueError(f"need 0 <= ell < k(P) = {k}")
    fixed = _low_coords(low, k, ell, t.dim)
    alpha = tuple(range(1, k + 1))
    high = [a for a in subsets_up_to(k, k) if len(a) > ell]

    def job(rng, size):
        coords = {m: np.broadcast_to(v, (size, t.dim)) for m, v in fixed.items()}
        for a in high:
            coords[ex.subset_mask(a)] = rng.random((size, t.dim))
        return np.int64(np.count_nonzero(ex.evaluate(t.exprs[pred], ex.EvalContext(coords, size), alpha)))

    hits = run_sum(job, inner_samples, seed, chunk_size, threads)
    return DensityEstimate.bernoulli(int(hits), inner_samples, seed)


def flattening_profile(t: Theon, pred: str, ell: int, probes: int, inner_samples: int, seed: int
                       ) -> Tuple[Dict[int, np.ndarray], np.ndarray]:
    """Hit counts of ``inner_samples`` resamples at each of ``probes`` random low points.

    Probe ``i`` draws its inner coordinates from its own stream derived from ``(seed, i)``.
    """
    k = t.sig.arity(pred)
    if not 0 <= ell < k:
        raise ValueError(f"need 0 <= ell < k(P) = {k}")
    lows = sample_theta(k, t.dim, ell, np.random.default_rng(np.random.SeedSequence(seed)), probes).coords \
        if ell > 0 else {}
    alpha = tuple(range(1, k + 1))
    high = [a for a in subsets_up_to(k, k) if len(a) > ell]
    hits = np.zeros(probes, dtype=np.int64)
    for i in range(probes):
        rng = chunk_rng(seed, i + 1)
        coords = {m: np.broadcast_to(v[i], (inner_samples, t.dim)) for m, v in lows.items()}
        for a in high:
            coords[ex.subset_mask(a)] = rng.random((inner_samples, t.dim))
        hits[i] = np.count_nonzero(ex.evaluate(t.exprs[pred], ex.EvalContext(coords, inner_samples), alpha))
    return lows, hits


def density_via_flattenings(t: Theon, m: Model, n_outer: int, inner_samples: int, seed: int,
                            threads: Optional[int] = None) -> DensityEstimate:
    """Labelled density of a ``k``-uniform hypergraph ``m`` as an integral of flattening products.

    For each outer draw of the coordinates below level ``k``, every ``k``-set gets
    its own inner Monte Carlo estimate of ``W^{k-1}``; their product is unbiased.
    """
    _check_model(t, m)
    if len(t.sig.predicates) != 1:
        raise TheonError("density via flattenings needs a single-predicate hypergraph theon")
    pred, k = t.sig.predicates[0]
    ell = k - 1
    ksets = list(itertools.combinations(range(1, m.n + 1), k))
    edge = [m.holds(pred, a) for a in ksets]
    lowsets = subsets_up_to(m.n, ell)
    chunk = max(1, CHUNK // max(1, inner_samples))
    s = inner_samples

    def job(rng, size):
        coords = {}
        for a in lowsets:
            coords[ex.subset_mask(a)] = np.repeat(rng.random((size, t.dim)), s, axis=0)
        for a in ksets:
            coords[ex.subset_mask(a)] = rng.random((size * s, t.dim))
        ctx = ex.EvalContext(coords, size * s)
        prod = np.ones(size)
        for a, e in zip(ksets, edge):
            w = ex.evaluate(t.exprs[pred], ctx, a).reshape(size, s).mean(axis=1)
            prod *= w if e else 1.0 - w
        return np.array([prod.sum(), np.square(prod).sum()])

    tot = run_sum(job, n_outer, seed, chunk, threads)
    mean = tot[0] / n_outer
    var = max(tot[1] / n_outer - mean * mean, 0.0)
    return DensityEstimate(float(mean), math.sqrt(var / max(1, n_outer - 1)), int(n_outer), seed)


# --- interpretation coherence ------------------------------------------------

def interpretation_mismatches(i, t: Theon, n: int, trials: int, seed: int, exact_models: int = 0) -> int:
    """Disagreements between realising ``I(N)`` and applying ``I`` to the realisation of ``N``.

    Both paths see the same ``theta``. The second evaluates the formulas with
    :func:`theonlab.logic.eval_batch` on the realised relations; the first
    ``exact_models`` samples are also pushed through the model-level
    :func:`theonlab.logic.apply_interpretation`.
    """
    from ..logic import apply_interpretation, eval_batch
    from .core import interpret_theon

    it = interpret_theon(i, t)
    theta = sample_theta(n, max(t.dim, it.dim), max(t.max_arity, it.max_arity, 1), seed, trials)
    base = realize_batch(t, theta)
    image = realize_batch(it, theta)
    bad = np.zeros(trials, dtype=bool)
    for name, k in i.source.predicates:
        node = i.formulas[name].node
        for a in injective_tuples(n, k):
            direct = eval_batch(node, lambda p, vs: base.rel[p][vs], a)
            bad |= np.broadcast_to(np.asarray(direct, dtype=bool), (trials,)) != image.rel[name][a]
    for j in range(min(exact_models, trials)):
        if apply_interpretation(i, base.model(j)) != image.model(j):
            bad[j] = True
    return int(bad.sum())
