import itertools
import math
import random
from fractions import Fraction

import pytest

from theonlab import theories as th
from theonlab.calculus import (
    ActionError,
    ActionTable,
    DensityVector,
    action_theory,
    closed_form_qr_density,
    delta1_eval,
    dilute,
    interval_partition,
    mobius_inverse,
    product_density,
    theta_qr_theon,
)
from theonlab.relational import Model, Signature, enumerate_labeled
from theonlab.theon import catalog as cat
from theonlab.theon.core import diagonal_self_coupling, independent_coupling, independent_self_coupling
from theonlab.theon.sampling import estimate_models

SIGN = ActionTable.sign(2, ("E", "Ebar"))
HALF = (Fraction(1, 2), Fraction(1, 2))


def test_sign_action_on_three_tournaments():
    for m in th.labeled_tournaments(2, 3):
        assert closed_form_qr_density(SIGN, HALF, m) == Fraction(1, 8)


def test_trivial_action_graph_example():
    action = ActionTable.trivial(2, ("E", "N"))
    m = th.graph_model(4, [(1, 2), (3, 4)])
    assert closed_form_qr_density(action, (Fraction(3, 10), Fraction(7, 10)), m) == \
        Fraction(3, 10) ** 2 * Fraction(7, 10) ** 4


def test_single_vertex_density_is_one():
    assert closed_form_qr_density(SIGN, HALF, Model(Signature((("E", 2),)), 1, {})) == 1


@pytest.mark.parametrize("n", [2, 3, 4])
def test_closed_form_sums_to_one(n):
    action = ActionTable.trivial(2, ("E", "N"))
    p = (Fraction(3, 10), Fraction(7, 10))
    assert sum(closed_form_qr_density(action, p, m) for m in enumerate_labeled(th.graph(), n)) == 1
    tours = list(th.labeled_tournaments(2, n))
    assert all(closed_form_qr_density(SIGN, HALF, m) == Fraction(1, 2 ** math.comb(n, 2)) for m in tours)


def test_action_table_validation():
    with pytest.raises(ActionError):
        ActionTable.from_function(2, ("A", "B"), lambda s, p: "B" if p == "A" else "A")
    with pytest.raises(ActionError):
        closed_form_qr_density(SIGN, (Fraction(3, 10), Fraction(7, 10)), th.graph_model(2, []))
    with pytest.raises(ActionError):
        closed_form_qr_density(SIGN, (Fraction(1, 2), Fraction(1, 3)), th.graph_model(2, []))
    with pytest.raises(ActionError):
        closed_form_qr_density(SIGN, HALF, th.graph_model(2, [(1, 2)]))


def test_action_theory_models_are_the_tournaments():
    t = action_theory(SIGN)
    assert len([m for m in enumerate_labeled(t, 3)]) == 8
    assert SIGN.orbits() == [("E", "Ebar")]
    assert interval_partition(SIGN, HALF) == {"E": (0.0, 0.5), "Ebar": (0.5, 1.0)}


def test_theta_qr_sampling_matches_closed_form_k3():
    action = ActionTable.sign(3, ("E", "Ebar"))
    t = theta_qr_theon(action, HALF)
    models = [m for m in th.labeled_tournaments(3, 4)]
    full = [Model(t.sig, 4, {"E": m.relations["E"],
                             "Ebar": {a for a in itertools.permutations(range(1, 5), 3) if a not in m.relations["E"]}})
            for m in models]
    for m, e in zip(full, estimate_models(t, full, 200_000, 3)):
        exact = float(closed_form_qr_density(action, HALF, m))
        assert abs(e.value - exact) <= 4 * e.stderr


# --- product densities -----------------------------------------------------------

def _tour(m):
    return closed_form_qr_density(SIGN, HALF, m)


def _order(m):
    return Fraction(1, math.factorial(m.n)) if th.linear_order().models(m) else Fraction(0)


def test_product_density_examples():
    sig = Signature((("E", 2), ("prec", 2)))
    t = next(iter(th.labeled_tournaments(2, 3)))
    o = th.order_model([2, 3, 1])
    m = Model(sig, 3, {"E": t.relations["E"], "prec": o.relations["prec"]})
    factors = [(["E"], _tour), (["prec"], _order)]
    assert product_density(factors, m) == Fraction(1, 8) * Fraction(1, 6)
    assert product_density([(["E"], _tour), (["prec"], lambda m: 0)], m) == 0
    assert product_density([(["E"], _tour)], m) == Fraction(1, 8)
    assert isinstance(product_density([(["E"], lambda m: 0.5)], m), float)


# --- dilution ----------------------------------------------------------------------

BASE2 = th.graph_model(2, [])
BASE3 = th.graph_model(3, [(1, 2)])


def test_dilute_identity_at_one():
    v = DensityVector.full(BASE2, 2, {(): Fraction(1, 3), ((1, 2),): Fraction(1, 5)})
    assert dilute(v, 1) == v
    assert mobius_inverse(v, 1) == v


def test_dilute_two_vertex_expansion():
    a, b, t = Fraction(1, 3), Fraction(1, 5), Fraction(2, 7)
    v = DensityVector.full(BASE2, 2, {(): a, ((1, 2),): b})
    d = dilute(v, t)
    assert d[()] == a + (1 - t) * b
    assert d[[(1, 2)]] == t * b


def test_mobius_full_family_term():
    fam = list(itertools.combinations(range(1, 4), 2))
    rng = random.Random(2)
    vals = {u: Fraction(rng.randint(0, 9), 10)
            for r in range(4) for u in itertools.combinations(fam, r)}
    v = DensityVector(BASE3, 2, tuple(fam), vals)
    t = Fraction(2, 5)
    assert mobius_inverse(v, t)[fam] == t ** -3 * v[fam]


def _random_vector(rng, ell, size):
    fam = rng.sample(list(itertools.combinations(range(1, 4), ell)), size)
    vals = {u: Fraction(rng.randint(0, 50), rng.randint(50, 100))
            for r in range(size + 1) for u in itertools.combinations(fam, r)}
    return DensityVector(BASE3, ell, tuple(fam), vals)


def test_round_trip_on_random_vectors():
    rng = random.Random(7)
    for _ in range(100):
        v = _random_vector(rng, rng.choice([1, 2]), rng.randint(0, 3))
        t = Fraction(rng.randint(1, 20), 20)
        assert mobius_inverse(dilute(v, t), t) == v
        assert dilute(mobius_inverse(v, t), t).values == v.values


def test_dilution_preserves_total_mass():
    rng = random.Random(3)
    for _ in range(20):
        v = _random_vector(rng, 2, 3)
        assert dilute(v, Fraction(1, 3)).total() == v.total()


def test_density_vector_validation_and_json():
    with pytest.raises(ValueError):
        DensityVector.full(BASE2, 2, {(): Fraction(1, 2)})
    with pytest.raises(ValueError):
        DensityVector.full(BASE2, 2, {(): Fraction(3, 2), ((1, 2),): 0})
    with pytest.raises(ValueError):
        dilute(DensityVector.full(BASE2, 2, {(): 0, ((1, 2),): 0}), 0)
    v = _random_vector(random.Random(1), 1, 3)
    text = v.to_json()
    assert '"values"' in text and "/" in text
    again = DensityVector.from_json(text, BASE3.sig)
    assert again == v


# --- delta_1 -------------------------------------------------------------------------

def test_delta1_diagonal_is_exactly_zero():
    for t in (cat.qr_hypergraphon(2, 0.5), cat.skew_graphon(0.3), cat.qr_tournamon(3)):
        assert delta1_eval(diagonal_self_coupling(t), 20_000, 1).value == 0.0


def test_delta1_independent_self_coupling():
    e = delta1_eval(independent_self_coupling(cat.qr_hypergraphon(2, 0.5)), 100_000, 2)
    assert abs(e.value - 0.5) <= 4 * e.stderr


def test_delta1_of_two_graphons():
    p, q = 0.3, 0.6
    c = independent_coupling([cat.qr_hypergraphon(2, p), cat.qr_hypergraphon(2, q, name="F")])
    e = delta1_eval(c, 100_000, 3, pairs=[("E", "F")])
    assert abs(e.value - (p * (1 - q) + q * (1 - p))) <= 4 * e.stderr
    assert 0 <= e.value <= 1


def test_delta1_needs_matching_pairs():
    c = independent_coupling([cat.qr_hypergraphon(2, 0.3), cat.qr_hypergraphon(3, 0.3, name="F")])
    with pytest.raises(ValueError):
        delta1_eval(c, 100, 1, pairs=[("E", "F")])
