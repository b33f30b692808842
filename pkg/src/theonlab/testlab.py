"""Statistical falsifiers for the quasirandomness hierarchy.

Every test here can only refute: ``pass`` means that no violation turned up
under the documented probe family and sample size.

Sparse contingency tables are pooled before any chi-square test. While some
expected count is below 5, the category with the smallest marginal count on
any axis of size > 1 is merged into the next-smallest category on that axis.
Ties go to the lower axis, then to the lower index. Zero-marginal categories
are dropped first.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import theories as th
from .relational import Model, canonical_form, dump_model, injective_tuples, model_from_bits
from .theon import expr as ex
from .theon.core import Theon
from .theon.sampling import (CHUNK, DensityEstimate, chunk_rng, empirical_distribution, estimate_events,
                             flattening_profile, pack_rows, realize_batch, run_chunks, sample_theta, subsets_up_to)

Z_REJECT = 4.0


@dataclass
class TestReport:
    test: str
    config: dict
    statistic: float
    p_value: Optional[float]
    decision: str
    evidence: Optional[dict] = None
    estimates: List[dict] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.decision not in ("pass", "reject", "inconclusive"):
            raise ValueError(f"bad decision {self.decision!r}")

    @property
    def passed(self) -> bool:
        return self.decision == "pass"

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def combined_z(joint: DensityEstimate, a: DensityEstimate, b: DensityEstimate) -> Tuple[float, float]:
    """``(joint - a*b)`` over ``sqrt(se_J^2 + (b se_a)^2 + (a se_b)^2)``."""
    gap = joint.value - a.value * b.value
    se = math.sqrt(joint.stderr ** 2 + (b.value * a.stderr) ** 2 + (a.value * b.stderr) ** 2)
    if se == 0:
        return gap, (0.0 if gap == 0 else math.copysign(math.inf, gap))
    return gap, gap / se


def _two_sided(z: float) -> float:
    return float(2 * stats.norm.sf(abs(z))) if math.isfinite(z) else 0.0


# --- pooling and chi-square --------------------------------------------------

def pool_table(table: np.ndarray, min_expected: float = 5.0) -> np.ndarray:
    t = np.asarray(table, dtype=float)
    for axis in range(t.ndim):
        other = tuple(i for i in range(t.ndim) if i != axis)
        keep = t.sum(axis=other) > 0
        t = np.compress(keep, t, axis=axis)
    total = t.sum()
    if total == 0:
        return t
    while True:
        if any(s == 0 for s in t.shape):
            return t
        margins = [t.sum(axis=tuple(i for i in range(t.ndim) if i != ax)) for ax in range(t.ndim)]
        expected = np.ones(t.shape) * total
        for ax, m in enumerate(margins):
            shape = [1] * t.ndim
            shape[ax] = -1
            expected = expected * (m / total).reshape(shape)
        if expected.min() >= min_expected:
            return t
        cands = [(m.min(), ax, int(np.argmin(m))) for ax, m in enumerate(margins) if t.shape[ax] > 1]
        if not cands:
            return t
        _, ax, i = min(cands)
        m = margins[ax].copy()
        m[i] = np.inf
        j = int(np.argmin(m))
        t = np.moveaxis(t, ax, 0)
        t[j] = t[j] + t[i]
        t = np.delete(t, i, axis=0)
        t = np.moveaxis(t, 0, ax)


def chi_square(table: np.ndarray) -> Tuple[float, float, int, Tuple[int, ...]]:
    """Pooled chi-square independence test; degenerate tables give ``(0, 1, 0)``."""
    t = pool_table(table)
    if t.ndim < 2 or any(s < 2 for s in t.shape):
        return 0.0, 1.0, 0, tuple(t.shape)
    res = stats.chi2_contingency(t, correction=False)
    return float(res[0]), float(res[1]), int(res[2]), tuple(t.shape)


# --- resampling probes -------------------------------------------------------

def _resample_probe(t: Theon, level: int, above: bool, trials: int, seed: int, chunk_size: int,
                    threads: Optional[int]):
    preds = list(t.sig.predicates)

    def job(rng, size):
        flips = []
        witness = None
        for name, k in preds:
            theta = sample_theta(k, t.dim, k, rng, size)
            alpha = tuple(range(1, k + 1))
            before = ex.evaluate(t.exprs[name], ex.EvalContext(theta.coords, size), alpha)
            moved = dict(theta.coords)
            for a in subsets_up_to(k, k):
                if (len(a) > level) == above:
                    moved[ex.subset_mask(a)] = rng.random((size, t.dim))
            after = ex.evaluate(t.exprs[name], ex.EvalContext(moved, size), alpha)
            diff = before != after
            flips.append(int(diff.sum()))
            if witness is None and diff.any():
                i = int(np.argmax(diff))
                witness = {
                    "predicate": name,
                    "before": {",".join(map(str, a)): theta.coords[ex.subset_mask(a)][i].tolist()
                               for a in subsets_up_to(k, k)},
                    "after": {",".join(map(str, a)): moved[ex.subset_mask(a)][i].tolist()
                              for a in subsets_up_to(k, k)},
                    "member_before": bool(before[i]),
                }
        return np.array(flips, dtype=np.int64), witness

    parts = run_chunks(job, trials, seed, chunk_size, threads)
    flips = sum(p[0] for p in parts)
    witness = next((p[1] for p in parts if p[1] is not None), None)
    return {name: int(f) for (name, _), f in zip(preds, flips)}, witness


def independence_probe(t: Theon, ell: int, trials: int = 10_000, seed: int = 0, chunk_size: int = CHUNK,
                       threads: Optional[int] = None) -> TestReport:
    """Resample every coordinate of level ``<= ell``; any membership flip refutes ``ell``-independence
    of this representation."""
    if not 0 <= ell < t.max_arity:
        raise ValueError("need 0 <= ell < max arity")
    flips, witness = _resample_probe(t, ell, False, trials, seed, chunk_size, threads)
    total = sum(flips.values())
    rate = total / (trials * len(flips))
    return TestReport(
        "independence_probe",
        {"theon": t.name, "ell": ell, "trials": trials, "seed": seed, "chunk_size": chunk_size},
        rate, None, "reject" if total else "pass", witness,
        [{"name": f"flip_rate[{n}]", "value": f / trials,
          "stderr": math.sqrt((f / trials) * (1 - f / trials) / trials)} for n, f in flips.items()],
        {"flips": flips, "probe": "resample coordinates with |A| <= ell in the given representation"},
    )


def rank_probe(t: Theon, r: int, trials: int = 10_000, seed: int = 0, chunk_size: int = CHUNK,
               threads: Optional[int] = None) -> TestReport:
    """Resample every coordinate of level ``> r``; any flip refutes rank ``<= r`` of this representation."""
    if r < 0:
        raise ValueError("rank bound must be nonnegative")
    flips, witness = _resample_probe(t, r, True, trials, seed, chunk_size, threads)
    total = sum(flips.values())
    return TestReport(
        "rank_probe",
        {"theon": t.name, "r": r, "trials": trials, "seed": seed, "chunk_size": chunk_size},
        total / (trials * len(flips)), None, "reject" if total else "pass", witness,
        [{"name": f"flip_rate[{n}]", "value": f / trials,
          "stderr": math.sqrt((f / trials) * (1 - f / trials) / trials)} for n, f in flips.items()],
        {"flips": flips},
    )


# --- weak independence ---------------------------------------------------------

def _categories(words: np.ndarray) -> np.ndarray:
    _, inv = np.unique(words, axis=0, return_inverse=True)
    return inv.reshape(-1)


def weak_independence_test(t: Theon, ell: int, m: int, n_samples: int = 100_000, bins: int = 4, seed: int = 0,
                           alpha: float = 0.001, projections: int = 8, chunk_size: int = CHUNK,
                           threads: Optional[int] = None) -> TestReport:
    """Chi-square the realised labelled model on ``[m]`` against binned low coordinates.

    Tests: one per low coordinate ``(A, factor)`` with ``|A| <= ell``, plus
    ``projections`` random pairs of low coordinates binned jointly. Bonferroni
    over all tests.
    """
    if m < t.max_arity:
        raise ValueError("m must be at least the maximum arity")
    if ell < 1:
        raise ValueError("ell must be positive")
    low = [(a, f) for a in subsets_up_to(m, ell) for f in range(t.dim)]

    def job(rng, size):
        theta = sample_theta(m, t.dim, max(t.max_arity, ell), rng, size)
        words = pack_rows(realize_batch(t, theta).bits())
        binned = np.stack([np.minimum((theta.coords[ex.subset_mask(a)][:, f] * bins).astype(np.int64), bins - 1)
                           for a, f in low], axis=1)
        return words, binned

    parts = run_chunks(job, n_samples, seed, chunk_size, threads)
    words = np.concatenate([p[0] for p in parts])
    binned = np.concatenate([p[1] for p in parts])
    cat = _categories(words)
    ncat = int(cat.max()) + 1

    pick = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(2 ** 31 - 1,)))
    tests = [((i,), f"theta[{','.join(map(str, low[i][0]))}]#{low[i][1]}") for i in range(len(low))]
    if len(low) >= 2:
        for _ in range(projections):
            i, j = sorted(pick.choice(len(low), size=2, replace=False).tolist())
            tests.append(((i, j), f"joint({tests[i][1]},{tests[j][1]})"))
    results = []
    for cols, label in tests:
        key = np.zeros(len(cat), dtype=np.int64)
        for c in cols:
            key = key * bins + binned[:, c]
        table = np.zeros((ncat, bins ** len(cols)))
        np.add.at(table, (cat, key), 1)
        chi, p, dof, shape = chi_square(table)
        results.append({"test": label, "chi2": chi, "p_value": p, "dof": dof, "pooled_shape": list(shape)})
    ntest = len(results)
    worst = min(results, key=lambda r: r["p_value"])
    adj = min(1.0, worst["p_value"] * ntest)
    decision = "reject" if worst["p_value"] < alpha / ntest else "pass"
    return TestReport(
        "weak_independence_test",
        {"theon": t.name, "ell": ell, "m": m, "n_samples": n_samples, "bins": bins, "seed": seed,
         "alpha": alpha, "projections": projections, "chunk_size": chunk_size},
        worst["chi2"], adj, decision,
        {"worst_test": worst} if decision == "reject" else None,
        [],
        {"tests": results, "n_tests": ntest, "model_categories": ncat},
    )


# --- locality ------------------------------------------------------------------

def _sub_bits(realized, vs: Sequence[int]) -> np.ndarray:
    cols = []
    for name, k in realized.theon.sig.predicates:
        for tup in injective_tuples(len(vs), k):
            cols.append(realized.rel[name][tuple(vs[i - 1] for i in tup)])
    return np.stack(cols, axis=1) if cols else np.zeros((realized.size, 0), dtype=bool)


def locality_test(t: Theon, sets: Sequence[Sequence[int]], mode: str = "labeled", n_samples: int = 100_000,
                  seed: int = 0, alpha: float = 0.001, chunk_size: int = CHUNK,
                  threads: Optional[int] = None) -> TestReport:
    """Chi-square the joint law of the submodels on ``sets`` against the product of their marginals.

    ``labeled`` compares labelled submodels (vertices in the listed order);
    ``symmetric`` compares their isomorphism types.
    """
    if mode not in ("labeled", "symmetric"):
        raise ValueError("mode is labeled or symmetric")
    sets = [tuple(s) for s in sets]
    if len(sets) < 2:
        raise ValueError("need at least two vertex sets")
    n = max(max(s) for s in sets)
    inter = {f"{i},{j}": len(set(sets[i]) & set(sets[j])) for i, j in itertools.combinations(range(len(sets)), 2)}

    def job(rng, size):
        r = realize_batch(t, sample_theta(n, t.dim, t.max_arity, rng, size))
        return [pack_rows(_sub_bits(r, s)) for s in sets]

    parts = run_chunks(job, n_samples, seed, chunk_size, threads)
    cats, labels = [], []
    for i, s in enumerate(sets):
        words = np.concatenate([p[i] for p in parts])
        keys, inv = np.unique(words, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        names = []
        for key in keys:
            bits = _unpack(key, _nbits(t, len(s)))
            mdl = model_from_bits(t.sig, len(s), bits)
            names.append(dump_model(canonical_form(mdl) if mode == "symmetric" else mdl))
        if mode == "symmetric":
            uniq = sorted(set(names))
            remap = np.array([uniq.index(x) for x in names])
            inv, names = remap[inv], uniq
        cats.append(inv)
        labels.append(names)
    shape = tuple(len(l) for l in labels)
    table = np.zeros(shape)
    np.add.at(table, tuple(cats), 1)
    chi, p, dof, pooled = chi_square(table)
    total = table.sum()
    cells = []
    if table.size <= 64:
        margins = [table.sum(axis=tuple(j for j in range(table.ndim) if j != i)) / total for i in range(table.ndim)]
        for idx in itertools.product(*(range(s) for s in shape)):
            prod = float(np.prod([margins[i][idx[i]] for i in range(len(idx))]))
            cells.append({"models": [labels[i][idx[i]] for i in range(len(idx))],
                          "joint": float(table[idx] / total), "product": prod})
    return TestReport(
        "locality_test",
        {"theon": t.name, "sets": [list(s) for s in sets], "mode": mode, "n_samples": n_samples, "seed": seed,
         "alpha": alpha, "chunk_size": chunk_size, "intersections": inter},
        chi, p, "reject" if p < alpha else "pass",
        {"cells": cells} if p < alpha else None, [],
        {"dof": dof, "pooled_shape": list(pooled), "cells": cells},
    )


def _nbits(t: Theon, n: int) -> int:
    return sum(len(injective_tuples(n, k)) for _, k in t.sig.predicates)


def _unpack(words, nbits: int) -> List[int]:
    out = []
    for w, word in enumerate(words):
        width = min(63, nbits - 63 * w)
        out.extend((int(word) >> (width - 1 - i)) & 1 for i in range(width))
    return out


# --- discrepancy ---------------------------------------------------------------

def _hyper_pred(t: Theon) -> Tuple[str, int]:
    hs = [(n, k) for n, k in t.sig.predicates]
    if len(hs) != 1:
        raise ValueError("expected a single hypergraph predicate")
    return hs[0]


def default_linear_hosts(k: int, ell: int) -> List[Model]:
    """One edge, and two edges sharing exactly ``ell`` vertices."""
    one = th.hypergraph_model(k, k, [tuple(range(1, k + 1))])
    second = tuple(range(1, ell + 1)) + tuple(range(k + 1, 2 * k - ell + 1))
    two = th.hypergraph_model(2 * k - ell, k, [tuple(range(1, k + 1)), second])
    return [one, two]


def clique_disc_test(t: Theon, ell: int, probes: int = 50, inner_samples: int = 4000,
                     linear_hosts: Optional[Sequence[Model]] = None, seed: int = 0, n_samples: int = 200_000,
                     alpha: float = 0.001, threads: Optional[int] = None) -> TestReport:
    """(a) flattening constancy across random low points, (b) edge-pattern counts of ``ell``-linear hosts."""
    name, k = _hyper_pred(t)
    if not 1 <= ell <= k - 1:
        raise ValueError("need ell in [k-1]")
    lows, hits = flattening_profile(t, name, ell, probes, inner_samples, seed)
    table = np.stack([hits, inner_samples - hits], axis=1)
    chi_a, p_a, dof_a, _ = chi_square(table)
    dens = DensityEstimate.bernoulli(int(hits.sum()), probes * inner_samples, seed)
    hosts = list(linear_hosts) if linear_hosts is not None else default_linear_hosts(k, ell)
    sub_b = []
    for h_i, h in enumerate(hosts):
        edges = sorted({tuple(sorted(e)) for e in h.relations[name]})
        for e1, e2 in itertools.combinations(edges, 2):
            if len(set(e1) & set(e2)) > ell:
                raise ValueError(f"host {h_i} is not {ell}-linear")

        def ev(r, _th, edges=edges):
            out = np.ones(r.size, dtype=bool)
            for e in edges:
                out &= r.rel[name][e]
            return out

        est = estimate_events(t, h.n, [ev], n_samples, seed + 1 + h_i, threads=threads)[0]
        e = len(edges)
        target = dens.value ** e
        se = math.sqrt(est.stderr ** 2 + (e * dens.value ** (e - 1) * dens.stderr) ** 2)
        z = (est.value - target) / se if se > 0 else (0.0 if est.value == target else math.inf)
        sub_b.append({"host": dump_model(h), "edges": e, "estimate": est.value, "stderr": est.stderr,
                      "target": target, "z": z})
    worst_z = max((abs(s["z"]) for s in sub_b), default=0.0)
    reject_a = p_a < alpha
    reject_b = worst_z > Z_REJECT
    decision = "reject" if reject_a or reject_b else "pass"
    evidence = None
    if decision == "reject":
        evidence = {"flattening_p_value": p_a} if reject_a else {"host": max(sub_b, key=lambda s: abs(s["z"]))}
    return TestReport(
        "clique_disc_test",
        {"theon": t.name, "ell": ell, "probes": probes, "inner_samples": inner_samples, "seed": seed,
         "n_samples": n_samples, "alpha": alpha},
        chi_a, p_a, decision, evidence,
        [{"name": "edge_density", "value": dens.value, "stderr": dens.stderr}],
        {"flattening": {"chi2": chi_a, "p_value": p_a, "dof": dof_a,
                        "min": float(hits.min() / inner_samples), "max": float(hits.max() / inner_samples)},
         "linear_hosts": sub_b},
    )


def disc_test(c: Theon, antichain: Sequence[Sequence[int]], n_samples: int = 200_000, seed: int = 0,
              edge: str = "E", preds: Optional[Mapping[Tuple[int, ...], str]] = None,
              threads: Optional[int] = None) -> TestReport:
    """Is the edge event on ``(1..k)`` independent of the joint ``P_A`` events, ``A`` in the antichain?"""
    k = c.sig.arity(edge)
    sets = [tuple(sorted(a)) for a in antichain]
    names = {a: (preds or {}).get(a, th.antichain_name(a)) for a in sets}
    for a in sets:
        if names[a] not in c.sig or c.sig.arity(names[a]) != len(a) or a[-1] > k:
            raise ValueError(f"coupling lacks predicate {names[a]}/{len(a)} for {a}")
    full = tuple(range(1, k + 1))

    def e_ev(r, _):
        return r.rel[edge][full]

    def q_ev(r, _):
        out = np.ones(r.size, dtype=bool)
        for a in sets:
            out &= r.rel[names[a]][a]
        return out

    def j_ev(r, th_):
        return e_ev(r, th_) & q_ev(r, th_)

    j, e, q = estimate_events(c, k, [j_ev, e_ev, q_ev], n_samples, seed, threads=threads)
    gap, z = combined_z(j, e, q)
    decision = "reject" if abs(z) > Z_REJECT else "pass"
    return TestReport(
        "disc_test",
        {"theon": c.name, "antichain": [list(a) for a in sets], "n_samples": n_samples, "seed": seed},
        z, _two_sided(z), decision,
        {"joint": j.value, "product": e.value * q.value} if decision == "reject" else None,
        [j.to_dict("joint"), e.to_dict("edge"), q.to_dict("antichain_events")],
        {"gap": gap, "product": e.value * q.value},
    )


# --- coupleability -------------------------------------------------------------

def coupleability_falsifier(candidate: Theon, n_samples: int = 100_000, max_model_size: int = 3, seed: int = 0,
                            parts: Optional[Sequence[Sequence[str]]] = None, min_size: int = 1,
                            threads: Optional[int] = None) -> TestReport:
    """Compare labelled densities of coupled models with the product of their reduct densities.

    Reduct densities are the marginal frequencies in the same sample. Every
    coupled model on ``[n]``, ``min_size <= n <= max_model_size``, whose cell
    or product is nonzero is scanned; ``|z| > 4`` on any of them rejects.
    """
    parts = [tuple(p) for p in (parts or candidate.parts)]
    if len(parts) < 2:
        raise ValueError("candidate must be a coupling with at least two parts")
    scanned, worst = [], None
    for n in range(max(1, min_size), max_model_size + 1):
        dist = empirical_distribution(candidate, n, n_samples, seed + n, threads=threads)
        marg = [dict() for _ in parts]
        joint: Dict[Tuple[Model, ...], int] = {}
        for mdl, cnt in dist.items():
            key = tuple(mdl.reduct(p) for p in parts)
            joint[key] = joint.get(key, 0) + cnt
            for i, r in enumerate(key):
                marg[i][r] = marg[i].get(r, 0) + cnt
        for key in itertools.product(*(sorted(m, key=lambda x: x.bits()) for m in marg)):
            jd = DensityEstimate.bernoulli(joint.get(key, 0), n_samples, seed)
            ms = [DensityEstimate.bernoulli(marg[i][r], n_samples, seed) for i, r in enumerate(key)]
            prod, var = 1.0, jd.stderr ** 2
            for i, mi in enumerate(ms):
                others = math.prod(mj.value for j_, mj in enumerate(ms) if j_ != i)
                var += (others * mi.stderr) ** 2
                prod *= mi.value
            gap = jd.value - prod
            z = gap / math.sqrt(var) if var > 0 else (0.0 if gap == 0 else math.inf)
            rec = {"n": n, "model": _dump_joint(key), "joint": jd.value, "product": prod, "z": z}
            scanned.append(rec)
            if worst is None or abs(z) > abs(worst["z"]):
                worst = rec
    decision = "reject" if worst is not None and abs(worst["z"]) > Z_REJECT else "pass"
    stat = abs(worst["z"]) if worst else 0.0
    return TestReport(
        "coupleability_falsifier",
        {"theon": candidate.name, "n_samples": n_samples, "max_model_size": max_model_size, "seed": seed,
         "parts": [list(p) for p in parts], "min_size": min_size},
        stat, _two_sided(stat), decision, worst if decision == "reject" else None,
        [{"name": "witness_joint", "value": worst["joint"], "stderr": None},
         {"name": "witness_product", "value": worst["product"], "stderr": None}] if worst else [],
        {"scanned": len(scanned), "worst": worst, "cells": scanned[:512]},
    )


def _dump_joint(parts: Sequence[Model]) -> str:
    lines = [f"n={parts[0].n}"]
    for p in parts:
        lines.extend(dump_model(p).splitlines()[1:])
    return "\n".join(lines)
