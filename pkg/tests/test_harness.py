import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invplace.core import ArrivalSequence, DemandScenario, NetworkInstance, Placement, StarNetwork, expand_star, rng_stream
from invplace.data import RegionData
from invplace.demand import ScenarioSet, SpatialModel, empirical_scenarios
from invplace.fulfillment import MyopicPolicy, OraclePolicy, PolicySpec, ShadowPricePolicy
from invplace.gallery import build_tight
from invplace.harness import (
    DOMINANCE,
    InvariantViolation,
    adversarial_value,
    competitive_ratio,
    gap_decay_study,
    hindsight_errors,
    omniscient_value,
    oracle_dominates,
    q_for_load_factor,
    random_star_model,
    run_grid,
    simulate,
)
from invplace.offline import off_value

EPS = 1e-7


def test_simulate_examples():
    inst = expand_star(StarNetwork(1, 0.5), 2)
    seq = ArrivalSequence.from_types([1, 1, 0], 2)
    x = Placement.of([1, 1], 2)
    out = simulate(inst, x, MyopicPolicy(), seq)
    assert out.reward == pytest.approx(1.5) and list(out.decisions) == [1, 0, -1]
    sp = ShadowPricePolicy(PolicySpec("stoch-sp"), ScenarioSet.from_matrix([[1, 2]]), lam_override=0.6)
    out = simulate(inst, x, sp, seq)
    assert out.reward == pytest.approx(2.0, abs=1e-6) and list(out.decisions) == [1, -1, 0]
    assert simulate(inst, x, MyopicPolicy(), ArrivalSequence.from_types([], 2)).reward == 0


class Cheater(MyopicPolicy):
    """Claims an FDC serves another district; simulate must refuse."""

    def decide(self, state, j):
        return 1


def test_simulate_rejects_infeasible_decisions():
    inst = expand_star(StarNetwork(2, 0.5), 2)
    with pytest.raises(InvariantViolation):
        simulate(inst, Placement.of([1, 1, 0], 2), Cheater(), ArrivalSequence.from_types([2], 3))


def test_adversary_examples():
    inst = expand_star(StarNetwork(1, 0.5), 1)
    x = Placement.of([1, 0], 1)
    res = adversarial_value(inst, x, MyopicPolicy, DemandScenario(np.array([1, 1])))
    assert res.exact and res.value == pytest.approx(0.5) and res.worst_order == (1, 0)
    one = adversarial_value(inst, x, MyopicPolicy, DemandScenario(np.array([0, 1])))
    assert one.orders_checked == 1
    assert one.value == simulate(inst, x, MyopicPolicy(), ArrivalSequence.from_types([1], 2)).reward
    D = DemandScenario(np.array([2, 1]))
    orc = adversarial_value(inst, x, OraclePolicy, D)
    assert orc.value == pytest.approx(off_value(inst, x, D).value)


def test_adversary_heuristic_flagged():
    inst = expand_star(StarNetwork(2, 0.5), 4)
    res = adversarial_value(inst, Placement.of([2, 1, 1], 4), MyopicPolicy, DemandScenario(np.array([4, 4, 4])),
                            limit=100, samples=50)
    assert not res.exact and res.orders_checked == 51


@given(st.integers(1, 2), st.data())
@settings(max_examples=40, deadline=None)
def test_adversary_no_better_than_random_orders(k, data):
    inst = expand_star(StarNetwork(k, 0.5))
    x = Placement(np.array(data.draw(st.lists(st.integers(0, 2), min_size=k + 1, max_size=k + 1))))
    D = DemandScenario(np.array(data.draw(st.lists(st.integers(0, 2), min_size=k + 1, max_size=k + 1))))
    adv = adversarial_value(inst, x, MyopicPolicy, D).value
    rng = rng_stream(data.draw(st.integers(0, 1000)))
    base = np.repeat(np.arange(k + 1), D.D)
    rand = np.mean([simulate(inst, x, MyopicPolicy(), ArrivalSequence.from_types(rng.permutation(base), k + 1)).reward
                    for _ in range(20)])
    assert adv <= rand + 1e-12


def test_omniscient_examples():
    inst = NetworkInstance(np.array([[1.0, 0.4], [0.0, 0.7]]), 2)
    assert omniscient_value(inst, ScenarioSet.from_matrix([[1, 1]]), 2) == pytest.approx(1.7)
    assert omniscient_value(inst, ScenarioSet.from_matrix([[0, 0]]), 2) == 0
    fam = build_tight(4, 2)
    assert omniscient_value(fam.inst, fam.scenarios, 2) == pytest.approx(1.0)


def test_competitive_ratio_examples():
    assert competitive_ratio(1.7, 1.7) == 1.0
    assert competitive_ratio(0.85, 1.7) == 0.5
    assert competitive_ratio(0.0, 0.0) == 1.0


def test_oracle_on_fractional_optimum_train_equals_test():
    inst = expand_star(StarNetwork(2, 0.5), 4)
    seqs = [ArrivalSequence.from_types(t, 3) for t in ([1, 1, 0, 2], [2, 2, 0, 0], [1, 0, 0, 1])]
    S = empirical_scenarios(seqs)
    from invplace.offline import saa_placement

    sol = saa_placement(inst, S, 4)
    x = Placement(np.rint(sol.x_hat.x).astype(int))
    assert np.allclose(x.x, sol.x_hat.x, atol=1e-9)
    mean = np.mean([simulate(inst, x, OraclePolicy(), q).reward for q in seqs])
    assert competitive_ratio(mean, omniscient_value(inst, S, 4)) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(1, 3), st.floats(0.05, 0.95), st.data())
@settings(max_examples=150, deadline=None)
def test_error_taxonomy_matches_hindsight(k, r, data):
    inst = expand_star(StarNetwork(k, r))
    x = Placement(np.array(data.draw(st.lists(st.integers(0, 3), min_size=k + 1, max_size=k + 1))))
    types = data.draw(st.lists(st.integers(0, k), max_size=10))
    seq = ArrivalSequence.from_types(types, k + 1)
    lam = data.draw(st.sampled_from([0.0, 0.3, 0.6, 1.0, 2.0]))
    for pol in (MyopicPolicy(), ShadowPricePolicy(PolicySpec("stoch-sp"), ScenarioSet.from_matrix([[0] * (k + 1)]),
                                                  lam_override=lam)):
        out = simulate(inst, x, pol, seq)
        assert (out.type1_errors, out.type2_errors) == hindsight_errors(inst, x, seq, out)
        if isinstance(pol, MyopicPolicy):
            assert out.type1_errors == 0 and out.spills_rejected == 0


def test_q_for_load_factor():
    assert q_for_load_factor(30, 1.0) == 30
    assert q_for_load_factor(30, 2.5) == 12
    assert q_for_load_factor(2, 2.5) == 1
    assert q_for_load_factor(25, 2.0) == 12  # 12.5 rounds to even


def _region(rid, n_fdc, seqs_train, seqs_test):
    tr, te = empirical_scenarios(seqs_train), empirical_scenarios(seqs_test)
    return RegionData(rid, n_fdc, ("s",), tr, te)


def test_trivial_grid_all_ratios_near_one():
    seq = ArrivalSequence.from_types([0] * 5, 1)
    reg = _region(1, 0, [seq, seq], [seq])
    res = run_grid([reg], r_values=(0.5,), load_factors=(0.5,))
    assert res.rows and all(abs(row[5] - 1) <= 0.01 for row in res.rows)
    assert not oracle_dominates(res) and res.manifest["dominance_violations"] == 0


def test_grid_failed_cell_is_reported_not_fatal():
    seq = ArrivalSequence.from_types([0, 1], 2)
    good = _region(1, 1, [seq, seq], [seq])
    bad = _region(2, 1, [seq], [seq])
    object.__setattr__(bad, "train", ScenarioSet.from_matrix([[1, 1]]))  # no sequences for the myopic search
    res = run_grid([good, bad], r_values=(0.5,), load_factors=(1.0,), placements=("myopic",), policies=("myopic",))
    assert len(res.rows) == 1 and len(res.errors) == 1


def test_grid_table_weightings():
    seq = ArrivalSequence.from_types([0, 1, 1], 2)
    reg = _region(1, 1, [seq, seq], [seq])
    res = run_grid([reg], r_values=(0.5,), load_factors=(1.0, 2.0), placements=("fluid",), policies=("myopic",))
    assert set(res.table()) == set(res.table("demand")) == {(0.5, "fluid", "myopic")}
    assert len(res.curves()) == 2


def test_gap_degenerate_demand_is_zero():
    inst = expand_star(StarNetwork(2, 0.5), 5)
    g = gap_decay_study(inst, SpatialModel.point_masses([2, 2, 1]), [2, 4], holdout_size=10, resamples=3)
    assert np.allclose(g.mean_gap, 0) and np.allclose(g.abs_gap, 0)


def test_gap_needs_ascending_k():
    inst = expand_star(StarNetwork(1, 0.5), 2)
    with pytest.raises(ValueError):
        gap_decay_study(inst, SpatialModel.point_masses([1, 1]), [5, 2])


def test_random_star_model_mean():
    m = random_star_model(4, 20, rng_stream(0))
    assert m.m == 5 and abs(m.mean_demand().sum() - 20) <= 5 * 1.0


def test_dominance_ledger_counts_every_run():
    before = DOMINANCE.checks
    inst = expand_star(StarNetwork(1, 0.5), 1)
    simulate(inst, Placement.of([1, 0], 1), MyopicPolicy(), ArrivalSequence.from_types([1], 2))
    assert DOMINANCE.checks == before + 1
