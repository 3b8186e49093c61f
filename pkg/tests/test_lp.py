import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from invplace.lp import (
    LpProblem,
    certificate,
    is_certified,
    solve_lp,
    solve_transportation,
    to_lp_format,
    transportation_lp,
)

SMALL = np.array([[1.0, 0.4], [0.0, 0.7]])


def test_single_variable_bound():
    p = LpProblem([1.0], [[1.0]], [3.0], ("<=",))
    s = solve_lp(p)
    assert s.optimal and abs(s.objective - 3) < 1e-9 and abs(s.duals[0] - 1) < 1e-9


def test_two_variables_dual_of_shared_row():
    p = LpProblem([1.0, 1.0], [[1, 1], [1, 0]], [1.0, 0.25], ("<=", "<="))
    s = solve_lp(p)
    assert abs(s.objective - 1) < 1e-9 and abs(s.duals[0] - 1) < 1e-9
    assert abs(s.x.sum() - 1) < 1e-9 and s.x[0] <= 0.25 + 1e-9
    assert is_certified(p, s)


def test_infeasible_reported():
    s = solve_lp(LpProblem([1.0], [[1.0]], [-1.0], ("<=",)))
    assert s.status == "infeasible"


def test_unbounded_reported():
    s = solve_lp(LpProblem([1.0, 0.0], [[0.0, 1.0]], [1.0], ("<=",)))
    assert s.status == "unbounded"


def test_equality_rows():
    p = LpProblem([1.0, 2.0], [[1, 1]], [4.0], ("=",))
    s = solve_lp(p)
    assert abs(s.objective - 8) < 1e-9 and is_certified(p, s)


def test_highs_agrees_with_tableau():
    p = LpProblem([3.0, 2.0, 1.0], [[1, 1, 1], [1, 0, 0], [0, 1, 2]], [4, 2, 3], ("<=", "<=", "="))
    a, b = solve_lp(p, "simplex"), solve_lp(p, "highs")
    assert abs(a.objective - b.objective) < 1e-9


def test_bad_problems_rejected():
    import pytest

    with pytest.raises(ValueError):
        LpProblem([], [], [], ())
    with pytest.raises(ValueError):
        LpProblem([np.inf], [[1.0]], [1.0], ("<=",))
    with pytest.raises(ValueError):
        LpProblem([1.0], [[1.0]], [1.0], (">=",))


def test_transportation_examples():
    assert abs(solve_transportation(SMALL, [1, 1], [1, 1])[0] - 1.7) < 1e-12
    assert solve_transportation(SMALL, [1, 1], [0, 0])[0] == 0
    assert abs(solve_transportation(SMALL, [2, 0], [1, 1])[0] - 1.4) < 1e-12


def test_lp_dump_mentions_every_row():
    text = to_lp_format(transportation_lp(SMALL, [1, 1], [1, 1]))
    assert text.count(" c") >= 4 and "Maximize" in text


@st.composite
def transport(draw, integer=True):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 4))
    r = np.array(draw(st.lists(st.sampled_from([0.0, 0.1, 0.35, 0.5, 0.8, 1.0]), min_size=n * m, max_size=n * m)))
    if integer:
        s = draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
        d = draw(st.lists(st.integers(0, 4), min_size=m, max_size=m))
    else:
        s = draw(st.lists(st.floats(0, 4), min_size=n, max_size=n))
        d = draw(st.lists(st.floats(0, 4), min_size=m, max_size=m))
    return r.reshape(n, m), np.array(s, float), np.array(d, float)


@given(transport())
@settings(max_examples=200, deadline=None)
def test_integer_data_gives_integral_flow_matching_lp(data):
    r, s, d = data
    v, f = solve_transportation(r, s, d)
    assert np.all(np.abs(f - np.round(f)) <= 1e-7)
    assert np.all(f.sum(axis=0) <= d + 1e-9) and np.all(f.sum(axis=1) <= s + 1e-9)
    p = transportation_lp(r, s, d)
    sol = solve_lp(p)
    assert abs(sol.objective - v) <= 1e-8
    assert is_certified(p, sol)


@given(transport(integer=False))
@settings(max_examples=100, deadline=None)
def test_strong_duality_fractional(data):
    r, s, d = data
    p = transportation_lp(r, s, d)
    sol = solve_lp(p)
    c = certificate(p, sol)
    assert c["gap"] <= 1e-6 * (1 + abs(sol.objective)) and c["primal"] <= 1e-7 and c["cs"] <= 1e-6
    assert abs(solve_transportation(r, s, d)[0] - sol.objective) <= 1e-8
