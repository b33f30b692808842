import json

import numpy as np
import pytest

from theonlab import testlab as tl
from theonlab import theories as th
from theonlab.experiments import uinduce_theon
from theonlab.relational import Signature, pure_theory
from theonlab.theon import catalog as cat
from theonlab.theon import expr as ex
from theonlab.theon.core import Theon, diagonal_self_coupling, independent_coupling, independent_self_coupling
from theonlab.theon.sampling import DensityEstimate


# --- resampling probes ------------------------------------------------------------

def test_independence_probe_examples():
    r = tl.independence_probe(cat.constant_graphon(0.3), 1, 10_000, 1)
    assert r.passed and r.details["flips"] == {"E": 0}
    r = tl.independence_probe(cat.skew_graphon(0.3), 1, 10_000, 1)
    assert r.decision == "reject" and abs(r.estimates[0]["value"] - 0.42) < 0.02
    assert r.evidence["predicate"] == "E"
    assert tl.independence_probe(cat.linear_order(), 1, 1000, 1).decision == "reject"


def test_rank_probe_examples():
    assert tl.rank_probe(cat.linear_order(), 1, 5000, 2).passed
    assert tl.rank_probe(cat.qr_hypergraphon(2, 0.5), 1, 5000, 2).decision == "reject"
    for k in (2, 3):
        assert tl.rank_probe(cat.qr_tournamon(k), k, 5000, 2).passed


def test_rank_zero_theons_pass_both_probes():
    for t in (cat.empty_hypergraph(2), cat.complete_hypergraph(3)):
        assert tl.rank_probe(t, 0, 2000, 1).passed
        for ell in range(t.max_arity):
            assert tl.independence_probe(t, ell, 2000, 1).passed


def test_probe_monotonicity():
    theons = [cat.qr_hypergraphon(3, 0.4), cat.qr_tournamon(3), cat.indep_not_disc(3, 1, 0.5),
              cat.constant_graphon(0.3), cat.skew_graphon(0.3)]
    for t in theons:
        res = [tl.independence_probe(t, ell, 3000, 4).passed for ell in range(t.max_arity)]
        for ell in range(1, len(res)):
            if res[ell]:
                assert res[ell - 1]


def test_probe_reports_replay_exactly():
    a = tl.independence_probe(cat.skew_graphon(0.3), 1, 5000, 11)
    b = tl.independence_probe(cat.skew_graphon(0.3), 1, 5000, 11, threads=1)
    assert a.to_json() == b.to_json()


# --- weak independence -----------------------------------------------------------------

def test_weak_independence_examples():
    assert tl.weak_independence_test(cat.qr_hypergraphon(2, 0.5), 1, 3, 60_000, seed=1).passed
    r = tl.weak_independence_test(cat.linear_order(), 1, 2, 20_000, seed=1)
    assert r.decision == "reject" and r.evidence["worst_test"]["p_value"] < 1e-6
    assert tl.weak_independence_test(cat.qr_tournamon(2), 1, 3, 60_000, seed=1).passed


def test_weak_independence_validates_arguments():
    with pytest.raises(ValueError):
        tl.weak_independence_test(cat.qr_hypergraphon(3, 0.5), 1, 2, 100)


def test_weak_independence_false_rejection_rate():
    t = cat.qr_hypergraphon(2, 0.5)
    rejects = sum(tl.weak_independence_test(t, 1, 3, 5_000, seed=s, projections=4).decision == "reject"
                  for s in range(100))
    assert rejects <= 2


# --- locality ----------------------------------------------------------------------------

def test_locality_on_linear_order():
    r = tl.locality_test(cat.linear_order(), [(1, 2), (2, 3)], "labeled", 100_000, 3)
    assert r.decision == "reject"
    assert r.config["intersections"] == {"0,1": 1}
    up = [c for c in r.details["cells"] if c["models"] == ["n=2\nprec: (1,2)\n"] * 2][0]
    assert abs(up["joint"] - 1 / 6) < 0.004
    assert abs(up["product"] - 1 / 4) < 0.004
    s = tl.locality_test(cat.linear_order(), [(1, 2), (2, 3)], "symmetric", 100_000, 3)
    assert s.passed


def test_locality_disjoint_sets_of_graphon():
    assert tl.locality_test(cat.qr_hypergraphon(2, 0.5), [(1, 2), (3, 4)], "labeled", 50_000, 2).passed


def test_locality_argument_checks():
    with pytest.raises(ValueError):
        tl.locality_test(cat.linear_order(), [(1, 2)], "labeled", 10)
    with pytest.raises(ValueError):
        tl.locality_test(cat.linear_order(), [(1, 2), (2, 3)], "other", 10)


# --- discrepancy --------------------------------------------------------------------------

def test_clique_disc_examples():
    assert tl.clique_disc_test(cat.qr_hypergraphon(3, 0.5), 2, probes=30, inner_samples=2000,
                               n_samples=100_000, seed=1).passed
    assert tl.clique_disc_test(cat.skew_graphon(0.3), 1, probes=30, inner_samples=2000,
                               n_samples=100_000, seed=1).passed
    r = tl.clique_disc_test(cat.dev_not_uinduce(2, 0.5), 1, probes=30, inner_samples=2000, n_samples=50_000)
    assert r.decision in ("pass", "reject")


def test_clique_disc_rejects_a_nonconstant_flattening():
    # edge iff x_1 < 1/2: the flattening is 0 or 1
    t = Theon(th.graph(), 1, {"E": ex.MinFirst("<", 0.5)}, "min-first")
    r = tl.clique_disc_test(t, 1, probes=20, inner_samples=500, n_samples=20_000)
    assert r.decision == "reject" and "flattening_p_value" in r.evidence


def test_clique_disc_checks_linearity():
    bad = th.hypergraph_model(4, 3, [(1, 2, 3), (1, 2, 4)])
    with pytest.raises(ValueError):
        tl.clique_disc_test(cat.qr_hypergraphon(3, 0.5), 1, probes=2, inner_samples=10, linear_hosts=[bad])


def test_disc_rejects_the_adversary():
    r = tl.disc_test(cat.indep_not_disc_adversary(2, 1, 0.5), [(1, 2)], 100_000, 1)
    assert r.decision == "reject"
    assert r.evidence["joint"] == 0.0 and abs(r.evidence["product"] - 0.25) < 0.01


def test_disc_passes_independent_unary_predicate():
    unary = Theon(pure_theory(Signature((("P_1", 1),))), 1, {"P_1": ex.Thresh((1,), "<", 0.4)}, "unary")
    c = independent_coupling([cat.qr_hypergraphon(2, 0.5), unary])
    assert tl.disc_test(c, [(1,)], 100_000, 2).passed


def test_disc_validates_coupling():
    with pytest.raises(ValueError):
        tl.disc_test(cat.qr_hypergraphon(2, 0.5), [(1,)], 100)


# --- coupleability ------------------------------------------------------------------------

def test_diagonal_self_coupling_rejected():
    r = tl.coupleability_falsifier(diagonal_self_coupling(cat.qr_hypergraphon(2, 0.5)), 100_000, 2, 1)
    assert r.decision == "reject" and r.statistic >= 5
    both = [c for c in r.details["cells"] if c["n"] == 2 and c["model"].count("(1,2)") == 2]
    assert abs(both[0]["joint"] - 0.5) < 0.01 and abs(both[0]["product"] - 0.25) < 0.01


def test_independent_couplings_pass():
    assert tl.coupleability_falsifier(independent_self_coupling(cat.qr_hypergraphon(2, 0.5)), 100_000, 2, 1).passed
    c = independent_coupling([cat.qr_hypergraphon(2, 0.5), cat.linear_order()])
    assert tl.coupleability_falsifier(c, 100_000, 3, 1).passed


def test_order_aligned_alternating_hypergraph_is_rejected():
    t = uinduce_theon(1, 0.3)
    r = tl.coupleability_falsifier(t, 1_000_000, 4, 2, parts=[["E"], ["prec"]], min_size=4)
    assert r.decision == "reject"
    assert r.evidence["n"] == 4


def test_falsifier_needs_parts():
    with pytest.raises(ValueError):
        tl.coupleability_falsifier(cat.linear_order(), 10, 2)


# --- statistics helpers ------------------------------------------------------------------

def test_pool_table_merges_sparse_cells():
    t = np.array([[100, 2], [100, 1], [100, 100]])
    pooled = tl.pool_table(t)
    assert pooled.sum() == t.sum()
    assert pooled.shape[1] == 2 or pooled.shape[0] < 3
    assert np.array_equal(tl.pool_table(t), pooled)


def test_chi_square_degenerate_tables():
    assert tl.chi_square(np.array([[10, 0], [20, 0]]))[:3] == (0.0, 1.0, 0)
    chi, p, dof, _ = tl.chi_square(np.array([[500, 0], [0, 500]]))
    assert p < 1e-10 and dof == 1


def test_combined_z():
    j = DensityEstimate(0.0, 0.0, 1000, 0)
    a = DensityEstimate(0.5, 0.01, 1000, 0)
    gap, z = tl.combined_z(j, a, a)
    assert gap == -0.25 and z < -10


def test_report_serialization_is_deterministic():
    r = tl.TestReport("x", {"b": 1, "a": float("inf")}, float("nan"), None, "pass")
    assert json.loads(r.to_json())["config"] == {"a": "inf", "b": 1}
    assert r.to_json() == r.to_json()
    with pytest.raises(ValueError):
        tl.TestReport("x", {}, 0.0, None, "maybe")
