import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpus import model
from oracles import ANNULUS_E3_MID, exterior_e3
from fellerlab.exterior import (ExteriorError, ExteriorOptions, NonPositivePotential, below, bounded_solution_gaps,
                                build_grid, cauchy_solution, decay_verdict, is_supersolution,
                                minimal_exterior_solution, slope_dichotomy, solve_annulus, write_trace)
from fellerlab.profiles import RadialProfile


def test_annulus_closed_form():
    h = solve_annulus(model("euclid3"), 1.0, 2.0, 1.0, 1.0, 0.0)
    assert h(1.5) == pytest.approx(ANNULUS_E3_MID, rel=1e-5)
    h = solve_annulus(model("euclid3"), 1.0, 30.0, 1.0, 1.0, 0.0)
    assert h(2.0) == pytest.approx(0.5 * math.exp(-1.0), rel=1e-4)


def test_harmonic_limit():
    trace = minimal_exterior_solution(model("euclid3"), 1.0, 0.0)
    r = np.array([2.0, 5.0, 10.0])
    assert np.allclose(trace.final(r), 1.0 / r, rtol=1e-3)


def test_zero_data_gives_zero():
    h = solve_annulus(model("hyperbolic2"), 1.0, 20.0, 3.0, 0.0, 0.0)
    assert np.all(h.values == 0.0)


def test_errors():
    with pytest.raises(ExteriorError):
        solve_annulus(model("euclid3"), 2.0, 1.0)
    with pytest.raises(NonPositivePotential):
        solve_annulus(model("euclid3"), 1.0, 5.0, "r - 3")
    with pytest.raises(ExteriorError):
        minimal_exterior_solution(model("euclid3"), 0.0)


def test_decay_examples():
    e3 = minimal_exterior_solution(model("euclid3"))
    assert e3.limit_estimate == 0.0 and decay_verdict(e3).holds
    v1 = minimal_exterior_solution(model("cubic_decay2"))
    assert v1.limit_estimate > 1e-3 and decay_verdict(v1).fails
    for trace in (e3, v1):
        for sol in trace.solutions:
            # the outer node carries the Dirichlet value; far values may underflow to 0
            assert np.all(sol.values >= 0) and np.all(sol.values <= 1.0)
            assert np.all(sol.restrict(1.0, min(11.0, sol.grid[-2])).values > 0)


def test_solutions_increase_with_exhaustion():
    trace = minimal_exterior_solution(model("hyperbolic3"))
    for a, b in zip(trace.solutions, trace.solutions[1:]):
        n = a.values.size
        assert np.all(b.values[:n] >= a.values - 1e-10)


def test_cauchy_reproduces_minimal_solution():
    M = model("euclid3")
    trace = minimal_exterior_solution(M)
    v = cauchy_solution(M, 1.0, 1.0, trace.inner_slope, r_end=4.0)
    r = np.linspace(1.0, 4.0, 61)
    assert np.max(np.abs(v(r) - trace.final(r))) < 1e-4
    assert trace.inner_slope == pytest.approx(-2.0, rel=1e-3)


def test_cauchy_between_minimal_and_bounded():
    M = model("cubic_growth2")
    h = minimal_exterior_solution(M)
    grid = h.discretization.grid
    top = h.discretization.index_at(64.0)
    u = solve_annulus(M, 1.0, float(grid[top]), 1.0, 1.0, 1.0, grid=grid[: top + 1])
    lo, hi = h.inner_slope, u.meta["inner_slope"]
    assert lo < hi
    v = cauchy_solution(M, 1.0, 1.0, 0.5 * (lo + hi), r_end=1.8)
    r = np.linspace(1.05, 1.8, 16)
    assert np.all(h.final(r) < v(r)) and np.all(v(r) < u(r))


@settings(max_examples=10, deadline=None)
@given(alpha=st.floats(0.01, 5.0), lam=st.floats(0.1, 4.0))
def test_cauchy_with_zero_inner_value_grows(alpha, lam):
    v = cauchy_solution(model("hyperbolic2"), 1.0, lam, alpha, inner_value=0.0, r_end=6.0)
    assert np.all(v.values >= 0) and np.all(np.diff(v.values) >= 0)


def test_cauchy_overflow_is_flagged():
    v = cauchy_solution(model("euclid3"), 1.0, 100.0, 1.0, r_end=200.0, overflow=1e30)
    assert v.meta["truncated"] and v.grid[-1] < 200.0


def test_bounded_gaps_shrink_on_complete_models():
    gaps = [g for _, g in bounded_solution_gaps(model("euclid3"), doublings=(4, 6, 8))]
    assert gaps[-1] < gaps[0] and gaps[-1] < 1e-6
    incomplete = [g for _, g in bounded_solution_gaps(model("cubic_growth2"), doublings=(4, 6, 8))]
    assert incomplete[-1] > 1e-2


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(0.05, 10.0), name=st.sampled_from(["euclid2", "euclid3", "hyperbolic3", "cubic_decay2"]))
def test_annulus_maximum_principle(lam, name):
    h = solve_annulus(model(name), 1.0, 40.0, lam)
    assert np.all(h.values[1:-1] > 0) and np.all(h.values <= 1.0)
    assert slope_dichotomy(h)


def test_comparison_helpers():
    M = model("euclid3")
    grid = build_grid(1.0, 20.0)
    exact = RadialProfile.from_function(grid, lambda r: np.exp(-(r - 1.0)) / r)
    h = solve_annulus(M, 1.0, 20.0, 1.0, grid=grid)
    assert below(h, exact, slack=1e-4)
    # a constant >= 1 is a supersolution of Delta u <= u
    ones = RadialProfile(grid, np.ones_like(grid))
    assert is_supersolution(M, ones, 1.0)


def test_write_trace(tmp_path):
    trace = minimal_exterior_solution(model("euclid3"), opts=ExteriorOptions(tol=1e-6, min_outer_factor=64))
    files = write_trace(trace, tmp_path)
    assert files and all(p.exists() for p in map(type(tmp_path), files))
    d = json.loads(trace.to_json())
    assert d["converged"] and d["inner_slope"] < 0


@pytest.mark.parametrize("r", [1.0, 3.0, 7.5, 11.0])
def test_closed_form_points(r):
    trace = minimal_exterior_solution(model("euclid3"))
    assert trace.final(r) == pytest.approx(exterior_e3(r), rel=1e-4)
