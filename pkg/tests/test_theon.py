import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from theonlab import theories as th
from theonlab.calculus import ActionTable, closed_form_qr_density
from theonlab.logic import apply_interpretation, structure_erasing
from theonlab.relational import Model, Signature, automorphism_count, enumerate_labeled, labeled_copies
from theonlab.theon import catalog as cat
from theonlab.theon import expr as ex
from theonlab.theon.core import (
    Theon,
    TheonError,
    diagonal_self_coupling,
    independent_coupling,
    independent_self_coupling,
    interpret_theon,
    load_theon,
    theon_from_dict,
)
from theonlab.theon.sampling import (
    density_via_flattenings,
    empirical_distribution,
    estimate_density,
    estimate_flattening,
    estimate_models,
    interpretation_mismatches,
    realize_batch,
    realize_model,
    sample_models,
    sample_theta,
)

C3 = Model(Signature((("E", 2),)), 3, {"E": {(1, 2), (2, 3), (3, 1)}})


def z_ok(est, target, bound=4.0):
    return abs(est.value - target) <= bound * max(est.stderr, 1e-12)


# --- membership --------------------------------------------------------------

def test_membership_examples():
    g = cat.constant_graphon(0.3)
    assert g.membership("E", {(1,): 0.9, (2,): 0.9, (1, 2): 0.2})
    s = cat.skew_graphon(0.3)
    assert not s.membership("E", {(1,): 0.5, (2,): 0.6, (1, 2): 0.3})
    t = cat.qr_tournamon(2)
    assert not t.membership("E", {(1,): 0.9, (2,): 0.1, (1, 2): 0.3})
    assert t.membership("E", {(1,): 0.1, (2,): 0.9, (1, 2): 0.3})


def test_membership_needs_all_coordinates():
    with pytest.raises(TheonError):
        cat.skew_graphon(0.3).membership("E", {(1, 2): 0.1})


def test_sign_ties_break_by_index():
    t = cat.qr_tournamon(2)
    assert t.membership("E", {(1,): 0.5, (2,): 0.5, (1, 2): 0.1})


def test_sigma_is_rank_vector():
    e = ex.SigmaIs((2, 3, 1))
    ctx = ex.EvalContext({1: np.array([[0.5]]), 2: np.array([[0.9]]), 4: np.array([[0.1]])}, 1)
    assert ex.evaluate(e, ctx, (1, 2, 3))[0]


def test_expr_validation():
    with pytest.raises(TheonError):
        Theon(th.graph(), 1, {"E": ex.Thresh((1, 3), "<", 0.5)})
    with pytest.raises(TheonError):
        Theon(th.graph(), 1, {"E": ex.Thresh((1, 2), "<", 0.5, factor=1)})
    with pytest.raises(ex.ExprError):
        ex.Thresh((1, 2), "~", 0.5)


# --- sampling ----------------------------------------------------------------

def test_sample_theta_shape_and_determinism():
    a = sample_theta(2, 1, 2, 5)
    b = sample_theta(2, 1, 2, 5)
    assert sorted(a.point()) == [(1,), (1, 2), (2,)]
    assert a.point() == b.point()
    assert a.point() != sample_theta(2, 1, 2, 6).point()


def test_sample_theta_is_uniform():
    t = sample_theta(1, 1, 1, 3, 1_000_000)
    assert abs(t.coords[1].mean() - 0.5) < 0.002


def test_realized_orders_are_total():
    for m in sample_models(cat.linear_order(), 5, 200, 1):
        assert th.linear_order().models(m)


def test_p_one_graphon_is_complete():
    m = realize_model(cat.qr_hypergraphon(2, 1.0), sample_theta(5, 1, 2, 0))
    assert m == th.complete_hypergraph(5, 2)


def test_tournamon_cycle_density():
    lab, unl = estimate_density(cat.qr_tournamon(2), C3, 200_000, 2)
    assert z_ok(unl, 0.25) and z_ok(lab, 0.125)


def test_unlabeled_is_labeled_times_copies():
    lab, unl = estimate_density(cat.qr_hypergraphon(2, 0.4), th.graph_model(3, [(1, 2)]), 200_000, 4)
    assert unl.value == pytest.approx(3 * lab.value, abs=5 * unl.stderr)


def test_zero_graphon_gives_exact_zero():
    lab, unl = estimate_density(cat.qr_hypergraphon(2, 0.0), th.graph_model(3, [(1, 2)]), 10_000, 1)
    assert lab.value == 0 and unl.value == 0


def test_estimates_do_not_depend_on_threads():
    t = cat.skew_graphon(0.3)
    m = th.graph_model(3, [(1, 2), (2, 3)])
    one = estimate_density(t, m, 300_000, 9, threads=1)
    many = estimate_density(t, m, 300_000, 9, threads=4)
    assert one == many


def test_exchangeability():
    for t in (cat.skew_graphon(0.3), cat.qr_tournamon(3), cat.dev_not_uinduce(2, 0.5), cat.linear_order(),
              cat.tournament_np_order(2, 0.3)):
        theta = sample_theta(4, t.dim, t.max_arity, 8, 300)
        base = realize_batch(t, theta)
        for perm in [(2, 1, 3, 4), (4, 3, 1, 2), (2, 3, 4, 1)]:
            moved = realize_batch(t, theta.permuted(perm))
            for j in range(0, 300, 37):
                assert moved.model(j) == base.model(j).relabel(perm)


@pytest.mark.parametrize("t,theory", [
    (cat.qr_tournamon(2), th.tournament(2)), (cat.qr_tournamon(3), th.tournament(3)),
    (cat.linear_order(), th.linear_order()), (cat.qr_coloring(3), th.coloring(3)),
    (cat.half_coloring(True), th.coloring(2)), (cat.skew_graphon(0.4), th.graph()),
    (cat.dev_not_uinduce(3, 0.5), th.hypergraph(3)),
])
def test_realized_models_satisfy_axioms(t, theory):
    for m in sample_models(t, 4, 60, 3):
        assert theory.models(m)


# --- couplings -----------------------------------------------------------------

def test_independent_coupling_reads_separate_factors():
    c = independent_coupling([cat.qr_hypergraphon(2, 0.5), cat.linear_order()])
    assert c.dim == 2
    edge = cat.qr_hypergraphon(2, 0.5).exprs["E"]
    assert c.exprs["E"] in (edge, ex.FactorProj(0, edge))
    assert c.exprs["prec"] == ex.FactorProj(1, cat.linear_order().exprs["prec"])
    with pytest.raises(TheonError):
        independent_coupling([cat.linear_order(), cat.linear_order()])


def test_single_coupling_behaves_like_the_theon():
    t = cat.skew_graphon(0.3)
    c = independent_coupling([t])
    theta = sample_theta(4, 1, 2, 1, 500)
    assert np.array_equal(realize_batch(t, theta).bits(), realize_batch(c, theta).bits())


def test_two_orders_coupled_independently():
    c = independent_coupling([cat.linear_order(), cat.linear_order("lt")])
    counts = empirical_distribution(c, 2, 100_000, 5)
    assert len(counts) == 4
    for v in counts.values():
        assert abs(v / 100_000 - 0.25) < 4 * math.sqrt(0.1875 / 100_000)


def test_independent_coupling_factorizes():
    t1, t2 = cat.qr_hypergraphon(2, 0.3), cat.linear_order()
    c = independent_coupling([t1, t2])
    n = 200_000
    for size in (2, 3):
        models = [Model(c.sig, size, {**g.relations, **o.relations})
                  for g in enumerate_labeled(th.graph(), size) for o in enumerate_labeled(th.linear_order(), size)]
        ests = estimate_models(c, models, n, 10 + size)
        for m, e in zip(models, ests):
            edges = len(m.relations["E"]) // 2
            exact = 0.3 ** edges * 0.7 ** (math.comb(size, 2) - edges) / math.factorial(size)
            assert z_ok(e, exact)


def test_diagonal_self_coupling():
    d = diagonal_self_coupling(cat.qr_hypergraphon(2, 0.5))
    both = Model(d.sig, 2, {"E_1": {(1, 2), (2, 1)}, "E_2": {(1, 2), (2, 1)}})
    lab, _ = estimate_density(d, both, 100_000, 1)
    assert z_ok(lab, 0.5)
    for m in sample_models(d, 4, 50, 2):
        assert m.relations["E_1"] == m.relations["E_2"]


def test_rank_zero_diagonal_equals_independent():
    t = cat.complete_hypergraph(2)
    a = sample_models(diagonal_self_coupling(t), 3, 20, 1)
    b = sample_models(independent_self_coupling(t), 3, 20, 1)
    assert a == b


# --- interpretation images --------------------------------------------------------

def test_structure_erasing_image_is_the_factor():
    c = independent_coupling([cat.qr_hypergraphon(2, 0.4), cat.linear_order()])
    i = structure_erasing(Signature((("E", 2),)), c.sig)
    img = interpret_theon(i, c)
    theta = sample_theta(4, 2, 2, 3, 400)
    a, b = realize_batch(img, theta), realize_batch(c, theta)
    for j in range(400):
        assert a.model(j) == b.model(j).reduct(["E"])


def test_alternation_image_edges_are_alternating_triples():
    img = interpret_theon(cat.alternating_copy(1, "H", "P"), cat.tournament_np(2, 0.3, "P"))
    t = cat.tournament_np(2, 0.3, "P")
    theta = sample_theta(4, 1, 3, 7, 100)
    base, hyp = realize_batch(t, theta), realize_batch(img, theta)
    for j in range(100):
        m = base.model(j)
        for s in itertools.combinations(range(1, 5), 3):
            assert hyp.rel["H"][s][j] == th.is_alternating(m, s, "P")


def test_arc_orientation_reproduces_tournament_np():
    p = 0.3
    coupled = independent_coupling([cat.qr_hypergraphon(2, p), cat.linear_order()])
    image = interpret_theon(cat.arc_orientation(2, source="E2", edge="E"), coupled)
    direct = cat.tournament_np(2, p)
    n = 200_000
    models = list(th.labeled_tournaments(2, 3))
    a = estimate_models(image, [m.rename({"E": "E2"}) for m in models], n, 1)
    b = estimate_models(direct, models, n, 2)
    for x, y in zip(a, b):
        assert abs(x.value - y.value) <= 4 * math.hypot(x.stderr, y.stderr)


def test_equality_atoms_are_translated():
    from theonlab.logic import Formula, Interpretation, parse_formula
    sig = Signature((("E", 2),))
    i = Interpretation(sig, sig, {"E": parse_formula("x1!=x2 & E(x1,x2) | x1=x2", sig, 2)})
    img = interpret_theon(i, cat.qr_hypergraphon(2, 0.0))
    assert sample_models(img, 3, 5, 0)[0].relations["E"] == frozenset()


@pytest.mark.parametrize("ref,label,factory,n", cat.INTERPRETATION_PAIRS, ids=lambda v: v if isinstance(v, str) else "")
def test_interpretation_coherence(ref, label, factory, n):
    assert interpretation_mismatches(cat.build_interpretation(ref), factory(), n, 10_000, 5, exact_models=40) == 0


def test_coherence_check_detects_a_wrong_image(monkeypatch):
    from theonlab.theon import core
    i = cat.alternating_copy(1)
    wrong = interpret_theon(cat.alternation_formula(1), cat.tournament_np(2, 0.3, "P"))
    monkeypatch.setattr(core, "interpret_theon", lambda *a, **k: wrong)
    assert interpretation_mismatches(i, cat.tournament_np(2, 0.3, "P"), 4, 2_000, 1) > 0


# --- flattenings -------------------------------------------------------------------

@pytest.mark.parametrize("t,p", [(cat.constant_graphon(0.3), 0.3), (cat.skew_graphon(0.3), 0.3)])
def test_flattening_is_p_for_graphons(t, p):
    for low in ({1: 0.1, 2: 0.8}, {1: 0.95, 2: 0.5}):
        e = estimate_flattening(t, "E", 1, low, 100_000, 3)
        assert z_ok(e, p)


def test_flattening_of_hypergraphon_at_top_level():
    t = cat.qr_hypergraphon(3, 0.4)
    rng = np.random.default_rng(1)
    for _ in range(3):
        low = {a: rng.random() for a in [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3)]}
        assert z_ok(estimate_flattening(t, "E", 2, low, 50_000, 2), 0.4)


def test_density_via_flattenings_matches_direct():
    t = cat.skew_graphon(0.3)
    m = th.graph_model(3, [(1, 2)])
    nested = density_via_flattenings(t, m, 20_000, 64, 4)
    direct, _ = estimate_density(t, m, 400_000, 5)
    assert abs(nested.value - direct.value) <= 4 * math.hypot(nested.stderr, direct.stderr)
    assert abs(direct.value - 0.3 * 0.49) < 0.005


# --- closed form cross-check ------------------------------------------------------------

def test_theta_qr_matches_closed_form():
    action = ActionTable.trivial(2, ("E1", "E2"))
    p = (Fraction(3, 10), Fraction(7, 10))
    t = cat.theta_qr("trivial", 2, p)
    models = []
    for g in enumerate_labeled(th.graph("E1"), 3):
        comp = {a for a in itertools.permutations(range(1, 4), 2) if a not in g.relations["E1"]}
        models.append(Model(t.sig, 3, {"E1": g.relations["E1"], "E2": comp}))
    ests = estimate_models(t, models, 200_000, 3)
    for m, e in zip(models, ests):
        assert z_ok(e, float(closed_form_qr_density(action, p, m)))


# --- serialisation ------------------------------------------------------------------

def test_theon_json_round_trip(tmp_path):
    for t in (cat.skew_graphon(0.3), cat.dev_not_uinduce(3, 0.5), cat.theta_qr("sign", 3),
              independent_coupling([cat.qr_hypergraphon(2, 0.4), cat.linear_order()])):
        d = t.to_dict()
        again = theon_from_dict(json.loads(json.dumps(d)))
        theta = sample_theta(4, t.dim, t.max_arity, 2, 200)
        assert np.array_equal(realize_batch(t, theta).bits(), realize_batch(again, theta).bits())
    path = tmp_path / "skew.json"
    path.write_text(json.dumps(cat.skew_graphon(0.3).to_dict()))
    assert load_theon(str(path)).exprs == cat.skew_graphon(0.3).exprs


def test_malformed_theon_file():
    with pytest.raises(TheonError):
        theon_from_dict({"exprs": {}})
    with pytest.raises(TheonError):
        theon_from_dict({"predicates": [["E", 2]], "exprs": {"E": {"op": "nope"}}})


# --- catalog ------------------------------------------------------------------------

def test_catalog_refs():
    assert cat.build_theon("skew-graphon:p=0.3").exprs == cat.skew_graphon(0.3).exprs
    assert cat.build_theon("theta-qr:action=trivial,k=2,p=0.25/0.75").sig.names == ("E1", "E2")
    with pytest.raises(cat.CatalogError):
        cat.build_theon("nonexistent")
    with pytest.raises(cat.CatalogError):
        cat.build_theon("qr-graphon:q=1")
    with pytest.raises(cat.CatalogError):
        cat.build_theon("qr-graphon:p=abc")
    names = {e["name"] for e in cat.listing()["theons"]}
    assert {"qr-tournamon", "skew-graphon", "dev-not-uinduce"} <= names
