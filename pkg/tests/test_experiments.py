import json
from fractions import Fraction

import pytest

from theonlab.experiments import (
    REGISTRY,
    ExperimentError,
    ExperimentSpec,
    alternating_census,
    coerce_params,
    derive_seed,
    dev_probes,
    run_experiment,
    uinduce_oracle,
)

KEYS = {"schema", "command", "params", "seed", "n_samples", "estimates", "oracle", "statistic", "p_value", "decision"}


def _run(name, samples, seed=3, **params):
    return run_experiment(ExperimentSpec(name, dict(params), seed=seed, samples=samples))


def test_uinduce_oracle_ratio_is_exact():
    o = uinduce_oracle(1, Fraction(3, 10))
    assert o["H2"] / o["H1"] == Fraction(37, 21)
    assert o["H1_conditional"] == Fraction(21, 100) ** 2
    half = uinduce_oracle(1, Fraction(1, 2))
    assert half["H1"] == half["H2"]


@pytest.mark.parametrize("p", [Fraction(1, 5), Fraction(3, 10), Fraction(2, 3)])
def test_uinduce_oracle_against_closed_ratio(p):
    o = uinduce_oracle(1, p)
    assert o["H2"] / o["H1"] == (3 * p * p - 3 * p + 1) / (p * (1 - p))


def test_alternating_census_k2():
    hist = alternating_census(2)
    assert sum(hist.values()) == 64 and max(hist) == 2


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(5, 1) == derive_seed(5, 1)
    assert len({derive_seed(5, t) for t in range(20)}) == 20
    assert 0 <= derive_seed(2 ** 40, 3) < 2 ** 63


def test_coerce_params():
    assert coerce_params("sep-uinduce-ucouple", {"p": "0.3"}) == {"ell": 1, "p": Fraction(3, 10)}
    assert coerce_params("sep-dev-uinduce", {"k": "3"})["k"] == 3
    with pytest.raises(ExperimentError):
        coerce_params("sep-uinduce-ucouple", {"q": 1})
    with pytest.raises(ExperimentError):
        coerce_params("nope", {})
    with pytest.raises(ExperimentError):
        coerce_params("sep-uinduce-ucouple", {"ell": "one"})


def test_even_ell_is_rejected():
    with pytest.raises(ExperimentError):
        _run("sep-uinduce-ucouple", 1000, ell=2)


@pytest.mark.parametrize("name,samples,params,decision", [
    ("sep-ucouple-independence", 30_000, {"ell": 1}, "pass"),
    ("sep-independence-disc", 50_000, {}, "pass"),
    ("sep-uinduce-ucouple-order", 20_000, {}, "pass"),
    ("alternating-census", None, {"k": 2}, "pass"),
    ("self-coupling", 50_000, {}, "pass"),
    ("sep-uinduce-ucouple", 200_000, {"p": "0.5"}, "pass"),
])
def test_experiments_reach_their_verdicts(name, samples, params, decision):
    r = _run(name, samples, **params)
    assert KEYS <= set(r)
    assert r["schema"] == 1 and r["seed"] == 3
    assert r["decision"] == decision
    json.dumps(r)


def test_every_registered_experiment_has_a_case():
    assert set(REGISTRY) == {"sep-ucouple-independence", "sep-uinduce-ucouple", "sep-dev-uinduce",
                             "sep-independence-disc", "sep-uinduce-ucouple-order", "alternating-census",
                             "self-coupling"}


def test_uinduce_reports_oracle_and_z():
    r = _run("sep-uinduce-ucouple", 200_000)
    oracle = {o["name"]: o["value"] for o in r["oracle"]}
    assert oracle["ratio"] == "37/21"
    assert {"z_ratio", "z_difference"} <= set(r["details"])


def test_replay_is_bit_exact():
    a = _run("sep-independence-disc", 20_000, seed=9)
    b = _run("sep-independence-disc", 20_000, seed=9)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    c = run_experiment(ExperimentSpec("sep-independence-disc", {}, seed=9, samples=20_000, threads=1))
    assert json.dumps(c, sort_keys=True) == json.dumps(a, sort_keys=True)


def test_dev_probes_pass_for_k3():
    rows = dev_probes(3, 0.5, 200_000, 4)
    assert len(rows) == 10
    assert all(abs(r["z"]) < 4 for r in rows)


def test_dev_probes_detect_the_k2_branch_dependence():
    # at k=2 the coordinate left free by the probes also decides the branch
    rows = {r["probe"]: r for r in dev_probes(2, 0.5, 200_000, 4)}
    assert abs(rows["below:0.7"]["z"]) >= 4
