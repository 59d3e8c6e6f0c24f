import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import power_law_volume
from fellerlab.isoperimetry import (FaberKrahnProfile, Inadmissible, IsoperimetryError, MonotonicityFailure,
                                    check_regularity, cheeger_reduce, feller_from_faber_krahn, gaussian_bound,
                                    v_and_index, v_from_lambda)


def power(p):
    return FaberKrahnProfile.from_function(f"s^(-2/{p})")


def test_square_root_profile():
    assert v_from_lambda(power(4), 2.0) == pytest.approx(1.0, rel=1e-12)


def test_small_times():
    P = power(4)
    vs = [v_from_lambda(P, t) for t in (1e-2, 1e-5, 1e-8)]
    assert vs[0] > vs[1] > vs[2] > 0 and vs[2] < 1e-15


@settings(max_examples=30, deadline=None)
@given(p=st.floats(2.5, 8.0), t=st.floats(1e-3, 1e3))
def test_power_law_closed_form_and_round_trip(p, t):
    P = power(p)
    V = v_from_lambda(P, t)
    assert V == pytest.approx(power_law_volume(t, p), rel=1e-8)
    assert float(P.t_of_v(V)[0]) == pytest.approx(t, rel=1e-8)


@settings(max_examples=10, deadline=None)
@given(p=st.floats(2.5, 8.0))
def test_volume_increasing(p):
    P = power(p)
    t = np.geomspace(1e-4, 1e4, 200)
    V, idx = v_and_index(P, t)
    assert np.all(np.diff(V) > 0)
    assert np.allclose(idx, p / 2, rtol=0, atol=1e-10)


def test_regularity_examples():
    assert check_regularity(power(4)).passed
    r = check_regularity(power(3), T=math.inf)
    assert r.passed and r.nondecreasing
    # oscillating index decreases beyond T
    P = FaberKrahnProfile(lambda s: -0.5 * np.log(s) + np.log1p(0.2 * np.sin(np.log(s))))
    bad = check_regularity(P, T=1.0)
    assert not bad.passed and not bad.nondecreasing
    unbounded = FaberKrahnProfile.from_function("0.5*(-log(s))^3", s_max=math.exp(-1))
    res = check_regularity(unbounded)
    assert not res.bounded


def test_gaussian_bound():
    P = power(4)
    C = 2.0
    assert gaussian_bound(P, (C, 1.0, 5.0), 0.0, 1.0) == pytest.approx(C / v_from_lambda(P, 1.0))
    d, t, D = 1.5, 2.0, 5.0
    ratio = gaussian_bound(P, (1, 1, D), 2 * d, t) / gaussian_bound(P, (1, 1, D), d, t)
    assert ratio == pytest.approx(math.exp(-3 * d * d / (D * t)), rel=1e-12)
    assert gaussian_bound(P, (1, 1, 5), 10.0, 1.0) < 1e-8 / v_from_lambda(P, 1.0)
    with pytest.raises(ValueError):
        gaussian_bound(P, (1, 1, 4), 1.0, 1.0)


@settings(max_examples=20, deadline=None)
@given(d1=st.floats(0, 10), d2=st.floats(0, 10), t=st.floats(0.1, 10))
def test_gaussian_bound_monotone_in_distance(d1, d2, t):
    P = power(4)
    lo, hi = sorted((d1, d2))
    assert gaussian_bound(P, d=hi, t=t) <= gaussian_bound(P, d=lo, t=t)


def test_cheeger():
    P = cheeger_reduce("s^(3/4)")
    assert float(P(2.0)) == pytest.approx(0.25 * 2.0 ** -0.5, rel=1e-12)
    flat = cheeger_reduce("s")
    assert float(flat(7.0)) == pytest.approx(0.25)
    with pytest.raises(MonotonicityFailure):
        cheeger_reduce("s^2")


def test_feller_route():
    assert feller_from_faber_krahn(power(4)).holds
    constant = FaberKrahnProfile.from_function(1.0)
    assert not constant.admissible
    assert not feller_from_faber_krahn(constant).conclusive
    with pytest.raises(Inadmissible):
        v_from_lambda(constant, 1.0)
    unbounded = FaberKrahnProfile.from_function("0.5*(-log(s))^3", s_max=math.exp(-1))
    assert not feller_from_faber_krahn(unbounded).conclusive


def test_profile_errors():
    with pytest.raises(MonotonicityFailure):
        FaberKrahnProfile.from_function("s")
    with pytest.raises(IsoperimetryError):
        FaberKrahnProfile.from_function(-1.0)
    with pytest.raises(ValueError):
        v_from_lambda(power(4), 0.0)
