import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invplace.core import DemandScenario, FractionalPlacement, NetworkInstance, Placement, degree_profile, rng_stream
from invplace.demand import ScenarioSet
from invplace.gallery import build_tight
from invplace.offline import off_value
from invplace.rounding import (
    certify_rounding,
    dependent_round,
    round_placement,
    rounding_bound,
    split_yhl,
    two_stage_assign,
    unit_split,
)
from invplace.verify import rounding_stats


def test_integral_weights_untouched():
    W = dependent_round([0, 0, 1], rng_stream(0), size=1000)
    assert np.all(W == [0, 0, 1])


def test_two_halves_give_exactly_one_unit():
    W = dependent_round([0.5, 0.5], rng_stream(1), size=100_000)
    assert np.all(W.sum(axis=1) == 1)
    assert abs(W[:, 0].mean() - 0.5) <= 3 * np.sqrt(0.25 / 1e5)


def test_single_weight_bernoulli():
    W = dependent_round([0.3], rng_stream(2), size=100_000)
    assert abs(W.mean() - 0.3) <= 3 * np.sqrt(0.21 / 1e5)


def test_weights_out_of_range_rejected():
    with pytest.raises(ValueError):
        dependent_round([1.2], rng_stream(0))


def test_round_placement_examples():
    x = FractionalPlacement(np.array([1.0, 2.0, 0.0]), 3)
    assert np.array_equal(round_placement(x, rng_stream(0)).x, [1, 2, 0])
    R = round_placement(FractionalPlacement(np.array([1.5, 0.5, 2.0]), 4), rng_stream(1), size=100_000)
    rows = {tuple(r) for r in R}
    assert rows == {(2, 0, 2), (1, 1, 2)}
    assert abs((R[:, 0] == 2).mean() - 0.5) <= 0.005
    R = round_placement(FractionalPlacement(np.full(4, 0.25), 1), rng_stream(2), size=100_000)
    assert np.all(R.sum(axis=1) == 1) and np.all(np.abs(R.mean(axis=0) - 0.25) <= 3 * np.sqrt(0.1875 / 1e5))


def test_round_placement_single_realization_is_a_placement():
    p = round_placement(FractionalPlacement(np.array([0.4, 1.6]), 2), rng_stream(3))
    assert isinstance(p, Placement) and p.Q == 2


@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_degree_preservation_every_trial(w, seed):
    W = dependent_round(w, rng_stream(seed), size=200)
    s = float(np.sum(w))
    assert np.all((W.sum(axis=1) == np.floor(s + 1e-12)) | (W.sum(axis=1) == np.ceil(s - 1e-12)))


def test_marginals_and_negative_correlation():
    rng = rng_stream(4)
    for v in range(5):
        w = rng.random(int(rng.integers(2, 9)))
        st_ = rounding_stats(w, dependent_round(w, rng_stream(4, v), size=100_000))
        assert st_["P2"] and st_["P3"] and st_["P1_fraction"] >= 0.85


def test_split_examples():
    s = split_yhl([0.9, 0.6], 1.5)
    assert np.allclose(s.yL, [0.8, 0.2], atol=1e-12) and np.allclose(s.yH, [1, 1], atol=1e-12)
    s = split_yhl([0.3, 0.3], 2.0)
    assert np.allclose(s.yL, [0.3, 0.3]) and np.allclose(s.yH, [0.3, 0.3])
    s = split_yhl([0.5], 0.5)
    assert np.allclose(s.yL, [0]) and np.allclose(s.yH, [1])


def test_split_rejects_overfull_row():
    with pytest.raises(ValueError):
        split_yhl([0.9, 0.9], 1.5)


def test_split_many_small_entries_keep_high_sum_bounded():
    # three halves on 1.5 units: raising every entry to 1 would need 3 units
    s = split_yhl([0.5, 0.5, 0.5], 1.5)
    assert s.yH.sum() <= 2 + 1e-12 and s.yL.sum() <= 1 + 1e-12
    assert np.allclose(0.5 * s.yH + 0.5 * s.yL, 0.5)


@st.composite
def split_input(draw):
    T = draw(st.integers(1, 6))
    x = draw(st.floats(0, 4))
    y = np.array(draw(st.lists(st.floats(0, 1), min_size=T, max_size=T)))
    if y.sum() > x:
        y = y * (x / y.sum()) * draw(st.floats(0, 1))
    return y, x


@given(split_input())
@settings(max_examples=500, deadline=None)
def test_split_invariants(data):
    y, x = data
    s = split_yhl(y, x)
    xf = x - np.floor(x)
    assert np.all(np.abs(s.yH * xf + s.yL * (1 - xf) - y) <= 1e-9) or xf == 0
    assert np.all(s.yL >= -1e-9) and np.all(s.yL <= s.yH + 1e-9) and np.all(s.yH <= 1 + 1e-9)
    assert s.yL.sum() <= np.floor(x) + 1e-9 and s.yH.sum() <= np.floor(x) + 1 + 1e-9


def test_unit_split_rows_and_columns():
    flow = np.array([[1.5, 0.0], [0.5, 1.0]])
    y, ut = unit_split(flow, np.array([2, 1]))
    assert list(ut) == [0, 0, 1]
    assert np.allclose(y.sum(axis=1), flow.sum(axis=1)) and np.all(y.sum(axis=0) <= 1 + 1e-12)


def test_assign_integral_placement_reproduces_flow():
    inst = NetworkInstance(np.array([[1.0, 0.4], [0.0, 0.7]]), 2)
    D = DemandScenario(np.array([1, 1]))
    res = off_value(inst, Placement.of([1, 1], 2), D)
    out = two_stage_assign(inst, Placement.of([1, 1], 2), D, res, rng_stream(0), size=50)
    assert np.allclose(out.reward, res.value)


def test_assign_single_dc_is_deterministic():
    inst = NetworkInstance(np.array([[1.0, 0.5, 0.2]]), 3)
    D = DemandScenario(np.array([2, 1, 1]))
    out = two_stage_assign(inst, Placement.of([3], 3), D, None, rng_stream(0), size=100)
    assert np.allclose(out.reward, off_value(inst, Placement.of([3], 3), D).value)


def test_assign_tight_instance_mean():
    fam = build_tight(4, 2)
    x = FractionalPlacement(np.full(4, 0.5), 2)
    N = 100_000
    rewards = []
    for s in fam.scenarios.scenarios:
        rewards.append(two_stage_assign(fam.inst, x, s, None, rng_stream(5, len(rewards)), size=N // 6).reward)
    r = np.concatenate(rewards)
    assert r.mean() >= 0.75 - 3 * r.std() / np.sqrt(len(r))


def _random_instance(rng, n, m):
    r = np.round(rng.random((n, m)), 2) * (rng.random((n, m)) < 0.7)
    r[rng.integers(0, n, m), np.arange(m)] = np.maximum(r[rng.integers(0, n, m), np.arange(m)], 0.3)
    return NetworkInstance(r, 0)


def test_no_save_events_negatively_correlated():
    rng = rng_stream(6)
    B = 40_000
    for case in range(6):
        inst = _random_instance(rng, 4, 3)
        Q = 3
        x = rng.dirichlet(np.ones(4)) * Q
        D = DemandScenario(rng.integers(1, 3, size=3))
        out = two_stage_assign(inst, FractionalPlacement(x, Q), D, None, rng_stream(6, case), size=B, keep_y=True)
        Y = out.Y  # B x n x T
        for t in range(Y.shape[2]):
            S = [i for i in range(4) if inst.rewards[i, out.unit_type[t]] > 0]
            for size in (2, 3):
                for sub in itertools.combinations(S, size):
                    none = ~Y[:, list(sub), t].any(axis=1)
                    p = none.mean()
                    prod = np.prod([1 - Y[:, i, t].mean() for i in sub])
                    assert p <= prod + 3 * np.sqrt(p * (1 - p) / B) + 1e-12


def test_per_type_save_probability_bound():
    rng = rng_stream(7)
    B = 40_000
    for case in range(6):
        inst = _random_instance(rng, 3, 3)
        Q = 3
        x = rng.dirichlet(np.ones(3)) * Q
        D = DemandScenario(rng.integers(1, 3, size=3))
        res = off_value(inst, FractionalPlacement(x, Q), D)
        y, ut = unit_split(res.flow, D)
        out = two_stage_assign(inst, FractionalPlacement(x, Q), D, res, rng_stream(7, case), size=B)
        dj = degree_profile(inst).d_j
        for t in range(len(ut)):
            j = ut[t]
            got = (out.Z[:, :, t] * inst.rewards[:, j][None]).sum(axis=1)
            target = rounding_bound(dj[j]) * float(inst.rewards[:, j] @ y[:, t])
            assert got.mean() >= target - 3 * got.std() / np.sqrt(B) - 1e-12


def test_certify_integral_placement_is_exact():
    fam = build_tight(4, 2)
    rep = certify_rounding(fam.inst, FractionalPlacement(np.array([1.0, 1, 0, 0]), 2), fam.scenarios, 1000,
                           rng_stream(0), z_trials=0)
    assert rep.ratio_hat == 1.0 and rep.stderr == 0.0


def test_certify_tight_instance_hits_five_sixths():
    fam = build_tight(4, 2)
    rep = certify_rounding(fam.inst, FractionalPlacement(np.full(4, 0.5), 2), fam.scenarios, 5000, rng_stream(1))
    assert abs(rep.ratio_hat - 5 / 6) <= 1e-12 and rep.passed
    assert rep.z_ratio_hat <= rep.ratio_hat + 0.02


def test_certify_degree_one_bound_is_one():
    inst = NetworkInstance(np.array([[1.0, 0.0], [0.0, 0.6]]), 2)
    S = ScenarioSet.from_matrix([[1, 2], [2, 0], [0, 1]])
    rep = certify_rounding(inst, FractionalPlacement(np.array([0.7, 1.3]), 2), S, 2000, rng_stream(2), z_trials=0)
    assert rep.bound == 1.0 and rep.ratio_hat >= 1 - 3 * rep.stderr


def test_certify_zero_offline_value():
    inst = NetworkInstance(np.array([[1.0]]), 1)
    rep = certify_rounding(inst, FractionalPlacement(np.array([1.0]), 1), ScenarioSet.from_matrix([[0]]), 1000,
                           rng_stream(0), z_trials=0)
    assert rep.ratio_hat == 1.0


def test_certify_needs_enough_trials():
    fam = build_tight(4, 2)
    with pytest.raises(ValueError):
        certify_rounding(fam.inst, FractionalPlacement(np.full(4, 0.5), 2), fam.scenarios, 10, rng_stream(0))
