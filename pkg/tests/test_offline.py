import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from invplace.core import DemandScenario, FractionalPlacement, NetworkInstance, Placement, StarNetwork, expand_star, rng_stream
from invplace.demand import ScenarioSet
from invplace.gallery import build_tight
from invplace.offline import (
    fluid_placement_lp,
    lipschitz_check,
    off_expected,
    off_value,
    off_values,
    saa_placement,
    star_off_values,
)
from oracles import brute_force_off, star_closed_form

SMALL = np.array([[1.0, 0.4], [0.0, 0.7]])
EPS = 1e-7


def small():
    return NetworkInstance(SMALL, 2)


def test_off_value_examples():
    assert abs(off_value(small(), Placement.of([1, 1], 2), DemandScenario(np.array([1, 1]))).value - 1.7) < 1e-12
    assert off_value(small(), Placement.of([2, 0], 2), DemandScenario(np.array([0, 0]))).value == 0
    fam = build_tight(4, 2)
    x = FractionalPlacement(np.full(4, 0.5), 2)
    assert np.allclose(off_values(fam.inst, x, fam.scenarios), 1.0)


def test_off_value_duals_and_flow():
    res = off_value(small(), FractionalPlacement(np.array([0.5, 1.5]), 2), np.array([1, 1]), duals=True)
    assert abs(res.value - (SMALL * res.flow).sum()) < 1e-8 and res.duals.shape == (2,)


def test_off_expected_examples():
    inst = small()
    x = Placement.of([1, 1], 2)
    one = ScenarioSet.from_matrix([[1, 1]] * 3)
    assert abs(off_expected(inst, x, one) - 1.7) < 1e-12
    inst2 = NetworkInstance(SMALL, 2)
    mixed = ScenarioSet.from_matrix([[1, 1], [2, 0]])
    assert abs(off_expected(inst2, Placement.of([2, 0], 2), mixed) - (1.4 + 2.0) / 2) < 1e-12
    assert off_expected(inst, x, ScenarioSet.from_matrix([[0, 0], [0, 0]])) == 0


def test_off_expected_mean_of_two_values():
    vals = [off_value(small(), Placement.of([1, 1], 2), np.array([1, 1])).value,
            off_value(small(), Placement.of([2, 0], 2), np.array([1, 1])).value]
    assert abs(np.mean(vals) - 1.55) < 1e-12


def test_saa_examples():
    s = saa_placement(small(), ScenarioSet.from_matrix([[1, 1]]), 2)
    assert abs(s.value - 1.7) < 1e-8 and np.allclose(s.x_hat.x, [1, 1], atol=1e-8)
    fam = build_tight(4, 2)
    s = saa_placement(fam.inst, fam.scenarios, 2)
    assert abs(s.value - 1) < 1e-8 and np.allclose(s.x_hat.x, 0.5, atol=1e-8)
    z = saa_placement(small(), ScenarioSet.from_matrix([[1, 1]]), 0)
    assert z.value == 0 and np.all(z.x_hat.x == 0)


def test_saa_value_matches_its_flows_and_json():
    inst = expand_star(StarNetwork(2, 0.5), 3)
    S = ScenarioSet.from_matrix([[1, 2, 0], [0, 1, 3], [2, 0, 1]])
    s = saa_placement(inst, S)
    assert abs(s.value - (s.flows * inst.rewards).sum() / 3) < 1e-8
    assert abs(s.value - off_expected(inst, s.x_hat, S)) < 1e-8
    assert '"x_hat"' in s.to_json()


def test_fluid_examples():
    inst = expand_star(StarNetwork(2, 0.5), 6)
    x, v = fluid_placement_lp(inst, [2, 3, 1])
    assert np.allclose(x.x, [2, 3, 1]) and abs(v - (6 + 2 * EPS)) < 1e-12
    x, v = fluid_placement_lp(inst, [0, 0, 0])
    assert v == 0 and np.allclose(x.x, [6, 0, 0])
    x, v = fluid_placement_lp(expand_star(StarNetwork(1, 0.5), 1), [1, 1])
    assert np.allclose(x.x, [1, 0]) and abs(v - (1 + EPS)) < 1e-12


def test_fluid_fdc_tiebreak():
    inst = expand_star(StarNetwork(2, 0.5), 3)
    x, _ = fluid_placement_lp(inst, [0, 0, 0], prefer="fdc")
    assert np.allclose(x.x, [0, 3, 0])


def test_lipschitz_examples():
    D = DemandScenario(np.array([1, 1]))
    assert lipschitz_check(small(), D, Placement.of([1, 1], 2), Placement.of([1, 1], 2))
    assert lipschitz_check(small(), D, Placement.of([2, 0], 2), Placement.of([1, 1], 2))


@st.composite
def instance_and_demand(draw):
    n = draw(st.integers(1, 3))
    m = draw(st.integers(1, 3))
    r = draw(st.lists(st.sampled_from([0.0, 0.2, 0.5, 0.9, 1.0]), min_size=n * m, max_size=n * m))
    x = draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
    D = draw(st.lists(st.integers(0, 2), min_size=m, max_size=m))
    return np.array(r).reshape(n, m), np.array(x), np.array(D)


@given(instance_and_demand())
@settings(max_examples=150, deadline=None)
def test_off_value_matches_exhaustive_search(data):
    r, x, D = data
    inst = NetworkInstance(r, int(x.sum()))
    v = off_value(inst, Placement(x), D).value
    assert abs(v - brute_force_off(r, x, D)) <= 1e-8


@given(instance_and_demand(), st.data())
@settings(max_examples=150, deadline=None)
def test_monotone_and_submodular(data, more):
    r, x, D = data
    n = len(x)
    i = more.draw(st.integers(0, n - 1))
    k = more.draw(st.integers(0, n - 1))
    inst = NetworkInstance(r, 0)

    def f(v):
        return off_value(inst, v.astype(float), D).value

    e = np.eye(n, dtype=int)
    assert f(x + e[i]) >= f(x) - 1e-12
    assert f(x + e[i]) - f(x) >= f(x + e[i] + e[k]) - f(x + e[k]) - 1e-9


@given(st.integers(1, 4), st.floats(0.05, 0.95), st.data())
@settings(max_examples=200, deadline=None)
def test_star_closed_form_matches_reference(k, r, data):
    inst = expand_star(StarNetwork(k, r))
    x = np.array(data.draw(st.lists(st.integers(0, 4), min_size=k + 1, max_size=k + 1)))
    D = np.array(data.draw(st.lists(st.integers(0, 4), min_size=k + 1, max_size=k + 1)))
    got = star_off_values(inst, x, D)[0]
    assert abs(got - star_closed_form(k, r, EPS, x, D)) <= 1e-9
    assert abs(got - off_value(inst, Placement(x), D).value) <= 1e-9


def test_saa_concave_in_q():
    for seed in range(4):
        rng = rng_stream(seed, 7)
        inst = NetworkInstance(np.round(rng.random((3, 3)) * (rng.random((3, 3)) < 0.7), 2), 0)
        S = ScenarioSet.from_matrix(rng.integers(0, 4, size=(6, 3)))
        vals = np.array([saa_placement(inst, S, Q).value for Q in range(11)])
        inc = np.diff(vals)
        assert np.all(inc >= -1e-9) and np.all(np.diff(inc) <= 1e-7)


def test_saa_beats_candidate_placements():
    rng = rng_stream(3, 1)
    inst = expand_star(StarNetwork(3, 0.4), 5)
    S = ScenarioSet.from_matrix(rng.integers(0, 4, size=(8, 4)))
    best = saa_placement(inst, S).value
    for _ in range(50):
        x = rng.multinomial(5, np.ones(4) / 4)
        assert off_expected(inst, Placement(x), S) <= best + 1e-8
