"""Registry of separation experiments.

Each experiment returns a report dict in the stable JSON schema::

    {schema: 1, command, params, seed, n_samples, estimates: [{name, value, stderr}],
     oracle: [{name, value}], statistic, p_value, decision, details}
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import testlab as tl
from . import theories as th
from .logic import apply_interpretation, identity_interpretation, union_interpretation
from .relational import Model, Signature, injective_tuples, pure_theory
from .theon import expr as ex
from .theon import catalog as cat
from .theon.core import Theon, aligned_coupling, diagonal_self_coupling, independent_self_coupling, interpret_theon
from .theon.sampling import estimate_models
from .calculus import delta1_eval


class ExperimentError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    name: str
    params: Dict[str, object] = field(default_factory=dict)
    seed: int = 0
    samples: Optional[int] = None
    threads: Optional[int] = None
    alpha: float = 0.001


def derive_seed(seed: int, tag: int) -> int:
    """A 63-bit seed for sub-experiment ``tag``, derived from ``seed``."""
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=(10 ** 6 + tag,)).generate_state(1, np.uint64)[0]
               >> np.uint64(1))


def _est(name, e):
    return {"name": name, "value": e.value, "stderr": e.stderr}


def _report(spec, n_samples, estimates, oracle, statistic, p_value, decision, details):
    return tl._clean({
        "schema": 1,
        "command": f"run {spec.name}",
        "params": dict(spec.params),
        "seed": spec.seed,
        "n_samples": n_samples,
        "estimates": estimates,
        "oracle": oracle,
        "statistic": statistic,
        "p_value": p_value,
        "decision": decision,
        "details": details,
    })


# --- sep-ucouple-independence ----------------------------------------------------

def sep_ucouple_independence(spec: ExperimentSpec) -> dict:
    ell = spec.params["ell"]
    n = spec.samples or 100_000
    t = cat.qr_tournamon(ell + 1)
    weak = tl.weak_independence_test(t, ell, ell + 2, n, seed=spec.seed, alpha=spec.alpha, threads=spec.threads)
    probe = tl.independence_probe(t, ell, 10_000, derive_seed(spec.seed, 1), threads=spec.threads)
    ok = weak.passed and probe.decision == "reject"
    return _report(spec, n, probe.estimates, [], weak.statistic, weak.p_value, "pass" if ok else "reject",
                   {"weak_independence": weak.to_dict(), "independence_probe": probe.to_dict()})


# --- sep-uinduce-ucouple ----------------------------------------------------------

def uinduce_hosts(ell: int) -> Tuple[Model, Model]:
    """``H`` on ``[ell+3]`` with edges ``[ell+2]`` and ``[ell+1] + {ell+3}`` under the two orders."""
    k = ell + 2
    h = th.hypergraph_model(ell + 3, k, [tuple(range(1, k + 1)), tuple(range(1, k)) + (k + 1,)])
    o1 = th.order_model(list(range(1, ell + 4)))
    o2 = th.order_model(list(range(1, ell + 1)) + [ell + 3, ell + 2, ell + 1])
    sig = h.sig.union(o1.sig)
    return tuple(Model(sig, ell + 3, {**h.relations, **o.relations}) for o in (o1, o2))


def uinduce_oracle(ell: int, p: Fraction) -> Dict[str, Fraction]:
    """Exact ``xi(<H_1>)`` and ``xi(<H_2>)`` by enumerating the threshold pattern of every
    ``(ell+1)``-set for the vertex order of each host.

    Given the order ``sigma`` and the bits ``b_A = [theta_A < p]``, the
    increasing tuple of ``A`` is oriented iff ``b_A`` equals the evenness of its
    order pattern; the host is realised iff its two edges are exactly the
    alternating ``(ell+2)``-sets.
    """
    k = ell + 1
    n = ell + 3
    sets = list(itertools.combinations(range(1, n + 1), k))
    big = list(itertools.combinations(range(1, n + 1), k + 1))
    edges = {tuple(range(1, k + 2)), tuple(range(1, k + 1)) + (k + 2,)}
    sigmas = {"H1": tuple(range(1, n + 1)),
              "H2": tuple(list(range(1, ell + 1)) + [ell + 3, ell + 2, ell + 1])}
    out = {}
    for label, sigma in sigmas.items():
        # sigma[v-1] is the rank of vertex v's first-order coordinate
        even = {a: th.perm_sign([sigma[v - 1] for v in a]) == 1 for a in sets}
        cond = Fraction(0)
        for bits in itertools.product((True, False), repeat=len(sets)):
            oriented = {a: b == even[a] for a, b in zip(sets, bits)}
            alt = set()
            for s in big:
                flags = {oriented[s[:j] + s[j + 1:]] == ((k - j) % 2 == 0) for j in range(k + 1)}
                if len(flags) == 1:
                    alt.add(s)
            if alt == edges:
                w = sum(bits)
                cond += p ** w * (1 - p) ** (len(sets) - w)
        out[f"{label}_conditional"] = cond
        out[label] = cond / math.factorial(n)
    return out


def uinduce_theon(ell: int, p: float) -> Theon:
    base = cat.tournament_np_order(ell + 1, p, name="P")
    i = union_interpretation(cat.alternating_copy(ell, "E", "P"), identity_interpretation(Signature((("prec", 2),))))
    theory = th.hypergraph(ell + 2).union(th.linear_order())
    return interpret_theon(i, base, theory, name=f"alternating-copy(tournament-np-order:p={p})")


def sep_uinduce_ucouple(spec: ExperimentSpec) -> dict:
    ell = spec.params["ell"]
    p = Fraction(spec.params["p"]).limit_denominator(10 ** 9)
    if ell < 1 or ell % 2 == 0:
        raise ExperimentError("ell must be a positive odd integer")
    if not 0 < p < 1:
        raise ExperimentError("p must lie in (0, 1)")
    n = spec.samples or 4_000_000
    t = uinduce_theon(ell, float(p))
    h1, h2 = uinduce_hosts(ell)
    e1, e2 = estimate_models(t, [h1, h2], n, spec.seed, threads=spec.threads)
    exact = uinduce_oracle(ell, p)
    ratio_exact = exact["H2"] / exact["H1"]
    formula = (3 * p * p - 3 * p + 1) / (p * (1 - p))
    # multinomial delta method for the ratio and the difference of two disjoint cells
    v1, v2 = e1.value, e2.value
    var1, var2, cov = v1 * (1 - v1) / n, v2 * (1 - v2) / n, -v1 * v2 / n
    ratio = v2 / v1 if v1 > 0 else math.inf
    se_ratio = abs(ratio) * math.sqrt(var1 / v1 ** 2 + var2 / v2 ** 2 - 2 * cov / (v1 * v2)) if v1 and v2 else math.inf
    diff = v2 - v1
    se_diff = math.sqrt(var1 + var2 - 2 * cov)
    z_diff = diff / se_diff if se_diff > 0 else 0.0
    diff_exact = float(exact["H2"] - exact["H1"])
    if p == Fraction(1, 2):
        stat, decision = z_diff, "pass" if abs(z_diff) < 4 else "reject"
        z_ratio = None
    else:
        z_ratio = (ratio - float(ratio_exact)) / se_ratio
        stat, decision = z_ratio, "pass" if abs(z_ratio) <= 4 else "reject"
    return _report(
        spec, n,
        [_est("xi(<H1>)", e1), _est("xi(<H2>)", e2), {"name": "ratio", "value": ratio, "stderr": se_ratio},
         {"name": "difference", "value": diff, "stderr": se_diff}],
        [{"name": "xi(<H1>)", "value": float(exact["H1"])}, {"name": "xi(<H2>)", "value": float(exact["H2"])},
         {"name": "ratio", "value": f"{ratio_exact.numerator}/{ratio_exact.denominator}"},
         {"name": "ratio_formula", "value": f"{formula.numerator}/{formula.denominator}"},
         {"name": "difference", "value": diff_exact},
         {"name": "xi(<H1>) given order", "value": float(exact["H1_conditional"])},
         {"name": "xi(<H2>) given order", "value": float(exact["H2_conditional"])}],
        stat, tl._two_sided(stat), decision,
        {"z_ratio": z_ratio, "z_difference": z_diff,
         "ratio_relative_error": abs(ratio / float(ratio_exact) - 1) if ratio_exact else None,
         "normalization": "labelled densities include the 1/(ell+3)! chance of the host order"},
    )


# --- sep-dev-uinduce ---------------------------------------------------------------

def dev_probe_coupling(k: int, p: float, probe: Tuple[str, float]) -> Theon:
    """The Dev theon aligned with one predicate per ``(k-1)``-set containing 1.

    ``("below", c)`` reads ``x_A < c``; ``("first-high", c)`` reads ``x_{1} >= c``.
    """
    kind, c = probe
    dev = cat.dev_not_uinduce(k, p)
    sets = [a for a in itertools.combinations(range(1, k + 1), k - 1) if 1 in a]
    exprs, preds = {}, []
    for a in sets:
        name = th.antichain_name(a)
        if kind == "below":
            exprs[name] = ex.Thresh(tuple(range(1, k)), "<", c)
        elif kind == "first-high":
            exprs[name] = ex.Thresh((1,), ">=", c)
        else:
            raise ExperimentError(f"unknown probe kind {kind!r}")
        preds.append((name, k - 1))
    probe_theon = Theon(pure_theory(Signature(tuple(preds))), 1, exprs, f"probe:{kind}<{c}>")
    return aligned_coupling([dev, probe_theon], name=f"dev-probe:{kind}={c}")


DEV_PROBES = tuple([("below", round(0.1 * i, 1)) for i in range(1, 10)] + [("first-high", 0.5)])


def dev_probes(k: int, p: float, n_samples: int, seed: int, threads=None) -> List[dict]:
    out = []
    sets = [a for a in itertools.combinations(range(1, k + 1), k - 1) if 1 in a]
    for i, probe in enumerate(DEV_PROBES):
        r = tl.disc_test(dev_probe_coupling(k, p, probe), sets, n_samples, derive_seed(seed, 100 + i),
                         threads=threads)
        out.append({"probe": f"{probe[0]}:{probe[1]}", "z": r.statistic, "decision": r.decision,
                    "joint": r.estimates[0]["value"], "product": r.details["product"]})
    return out


def dev_coloring_gap(k: int, p: float, n_samples: int, seed: int, max_size: Optional[int] = None,
                     threads=None) -> List[dict]:
    """Labelled densities of colour-1 monochromatic models under the two half-colour couplings."""
    dev = cat.dev_not_uinduce(k, p)
    couplings = [aligned_coupling([dev, cat.half_coloring(flip)]) for flip in (False, True)]
    rows = []
    for s in range(k, (max_size or k + 1) + 1):
        ksets = list(itertools.combinations(range(1, s + 1), k))
        picks = [[a for a, b in zip(ksets, bits) if b] for bits in itertools.product((0, 1), repeat=len(ksets))]
        models = [Model(couplings[0].sig, s, {"E": th.hypergraph_model(s, k, e).relations["E"],
                                                "chi1": {(v,) for v in range(1, s + 1)}}) for e in picks]
        low = estimate_models(couplings[0], models, n_samples, derive_seed(seed, 2 * s), threads=threads)
        high = estimate_models(couplings[1], models, n_samples, derive_seed(seed, 2 * s + 1), threads=threads)
        for e, a, b in zip(picks, low, high):
            se = math.hypot(a.stderr, b.stderr)
            z = (a.value - b.value) / se if se > 0 else 0.0
            rows.append({"size": s, "edges": [list(x) for x in e],
                         "density_low": a.value, "density_high": b.value, "z": z})
    return rows


def sep_dev_uinduce(spec: ExperimentSpec) -> dict:
    k, p = spec.params["k"], float(spec.params["p"])
    if k < 2 or not 0 < p < 1:
        raise ExperimentError("need k >= 2 and 0 < p < 1")
    n = spec.samples or 2_000_000
    probes = dev_probes(k, p, min(n, 1_000_000), spec.seed, spec.threads)
    gaps = dev_coloring_gap(k, p, n, spec.seed, threads=spec.threads)
    worst_probe = max(abs(r["z"]) for r in probes)
    best_gap = max(gaps, key=lambda r: abs(r["z"]))
    ok = worst_probe < 4 and abs(best_gap["z"]) >= 5
    return _report(
        spec, n,
        [{"name": "gap_low", "value": best_gap["density_low"], "stderr": None},
         {"name": "gap_high", "value": best_gap["density_high"], "stderr": None}],
        [], abs(best_gap["z"]), tl._two_sided(best_gap["z"]), "pass" if ok else "reject",
        {"dev_probes": probes, "max_probe_z": worst_probe, "coloring_gap": best_gap, "scanned": len(gaps)},
    )


# --- sep-independence-disc -------------------------------------------------------------

def sep_independence_disc(spec: ExperimentSpec) -> dict:
    k, ell, p = spec.params["k"], spec.params["ell"], float(spec.params["p"])
    if not 1 <= ell < k or not 0 < p < 1:
        raise ExperimentError("need 1 <= ell < k and 0 < p < 1")
    n = spec.samples or 200_000
    probe = tl.independence_probe(cat.indep_not_disc(k, ell, p), ell, 10_000, derive_seed(spec.seed, 1),
                                  threads=spec.threads)
    disc = tl.disc_test(cat.indep_not_disc_adversary(k, ell, p), [tuple(range(1, ell + 2))], n, spec.seed,
                        threads=spec.threads)
    product = p ** math.comb(k, ell + 1) * (1 - p)
    ok = probe.passed and disc.decision == "reject"
    return _report(spec, n, disc.estimates, [{"name": "joint", "value": 0.0}, {"name": "product", "value": product}],
                   disc.statistic, disc.p_value, "pass" if ok else "reject",
                   {"independence_probe": probe.to_dict(), "disc_test": disc.to_dict()})


# --- sep-uinduce-ucouple-order -------------------------------------------------------------

def sep_uinduce_ucouple_order(spec: ExperimentSpec) -> dict:
    n = spec.samples or 100_000
    lo = cat.linear_order()
    levels = spec.params.get("levels", 2)
    loc = []
    for ell in range(1, levels + 1):
        a = tuple(range(1, ell + 2))
        b = tuple(range(2, ell + 3))
        r = tl.locality_test(lo, [a, b], "symmetric", n, derive_seed(spec.seed, ell), spec.alpha,
                             threads=spec.threads)
        loc.append({"ell": ell, "sets": [list(a), list(b)], "decision": r.decision, "p_value": r.p_value})
    weak = tl.weak_independence_test(lo, 1, 2, n, seed=spec.seed, alpha=spec.alpha, threads=spec.threads)
    ok = all(r["decision"] == "pass" for r in loc) and weak.decision == "reject"
    return _report(spec, n, [], [], weak.statistic, weak.p_value, "pass" if ok else "reject",
                   {"symmetric_locality": loc, "weak_independence": weak.to_dict()})


# --- alternating-census -------------------------------------------------------------------

def alternating_census(k: int) -> Dict[int, int]:
    """Histogram: number of alternating ``(k+1)``-subsets -> number of labelled tournaments on ``[k+2]``."""
    hist: Dict[int, int] = {}
    for m in th.labeled_tournaments(k, k + 2):
        c = sum(th.is_alternating(m, s) for s in itertools.combinations(range(1, k + 3), k + 1))
        hist[c] = hist.get(c, 0) + 1
    return dict(sorted(hist.items()))


def run_alternating_census(spec: ExperimentSpec) -> dict:
    k = spec.params["k"]
    if not 2 <= k <= 4:
        raise ExperimentError("k must be 2, 3 or 4")
    hist = alternating_census(k)
    mx = max(hist)
    return _report(spec, sum(hist.values()), [{"name": "max_copies", "value": mx, "stderr": 0.0}],
                   [{"name": "max_copies", "value": 2}], mx, None, "pass" if mx == 2 else "reject",
                   {"histogram": {str(c): v for c, v in hist.items()}, "tournaments": sum(hist.values())})


# --- self-coupling ---------------------------------------------------------------------------

def self_coupling(spec: ExperimentSpec) -> dict:
    t = cat.build_theon(spec.params["theon"])
    n = spec.samples or 100_000
    size = spec.params.get("max_size", 2)
    diag = tl.coupleability_falsifier(diagonal_self_coupling(t), n, size, spec.seed, threads=spec.threads)
    ind = tl.coupleability_falsifier(independent_self_coupling(t), n, size, derive_seed(spec.seed, 1),
                                     threads=spec.threads)
    d_diag = delta1_eval(diagonal_self_coupling(t), n, derive_seed(spec.seed, 2), threads=spec.threads)
    d_ind = delta1_eval(independent_self_coupling(t), n, derive_seed(spec.seed, 3), threads=spec.threads)
    ok = diag.decision == "reject" and ind.passed
    return _report(spec, n, [_est("delta1_diagonal", d_diag), _est("delta1_independent", d_ind)], [],
                   diag.statistic, diag.p_value, "pass" if ok else "reject",
                   {"diagonal": diag.to_dict(), "independent": ind.to_dict()})


# --- registry -------------------------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    name: str
    run: Callable[[ExperimentSpec], dict]
    params: Tuple[Tuple[str, type, object], ...]
    summary: str


REGISTRY: Dict[str, Experiment] = {e.name: e for e in [
    Experiment("sep-ucouple-independence", sep_ucouple_independence, (("ell", int, 1),),
               "qr-tournamon(ell+1): weak independence holds, the representation is not ell-independent"),
    Experiment("sep-uinduce-ucouple", sep_uinduce_ucouple, (("ell", int, 1), ("p", Fraction, Fraction(3, 10))),
               "ordered alternating-copy hypergraph: H2/H1 density ratio vs the exact census"),
    Experiment("sep-dev-uinduce", sep_dev_uinduce, (("k", int, 2), ("p", Fraction, Fraction(1, 2))),
               "Dev probes pass while the half-colouring couplings disagree"),
    Experiment("sep-independence-disc", sep_independence_disc,
               (("k", int, 2), ("ell", int, 1), ("p", Fraction, Fraction(1, 2))),
               "max-coordinate theon: ell-independent but its adversarial coupling breaks Disc"),
    Experiment("sep-uinduce-ucouple-order", sep_uinduce_ucouple_order, (("levels", int, 2),),
               "linear order: symmetric locality holds, weak 1-independence fails"),
    Experiment("alternating-census", run_alternating_census, (("k", int, 2),),
               "maximum number of alternating copies in a k-tournament on k+2 vertices"),
    Experiment("self-coupling", self_coupling, (("theon", str, "qr-graphon:p=0.5"), ("max_size", int, 2)),
               "diagonal vs independent self-coupling"),
]}


def coerce_params(name: str, raw: Dict[str, object]) -> Dict[str, object]:
    if name not in REGISTRY:
        raise ExperimentError(f"unknown experiment {name!r}; known: {', '.join(REGISTRY)}")
    exp = REGISTRY[name]
    out = {}
    known = {k: (typ, d) for k, typ, d in exp.params}
    for key in raw:
        if key not in known:
            raise ExperimentError(f"{name}: unknown parameter {key!r}")
    for key, (typ, default) in known.items():
        v = raw.get(key, default)
        try:
            if typ is Fraction:
                v = Fraction(str(v))
            elif typ is int:
                v = int(float(v)) if isinstance(v, str) and "e" in v.lower() else int(v)
            else:
                v = typ(v)
        except (ValueError, ZeroDivisionError):
            raise ExperimentError(f"{name}: cannot read {key}={v!r}") from None
        out[key] = v
    return out


def run_experiment(spec: ExperimentSpec) -> dict:
    spec.params = coerce_params(spec.name, spec.params)
    report = REGISTRY[spec.name].run(spec)
    report["params"] = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in spec.params.items()}
    return report
