import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fellerlab.profiles import ProfileError, RadialProfile
from fellerlab.tridiag import thomas
from fellerlab.verdict import Status, fails, holds, inconclusive, to_jsonable


def test_verdict_flags():
    assert holds().holds and holds().conclusive
    assert fails().fails and fails().conclusive
    assert not inconclusive().conclusive
    assert str(fails()) == "Fails" and Status.HOLDS.value == "Holds"


def test_jsonable_handles_special_floats_and_numpy():
    d = to_jsonable({"a": math.inf, "b": np.float64(1.5), "c": np.arange(3), "v": holds("x", "why", k=math.nan)})
    text = json.dumps(d, sort_keys=True)
    assert json.loads(text)["b"] == 1.5
    assert "NaN" not in text and "Infinity" not in text


def test_profile_validation():
    with pytest.raises(ProfileError):
        RadialProfile([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ProfileError):
        RadialProfile([0.0, 1.0], [1.0, math.nan])
    p = RadialProfile([1.0, 2.0, 3.0], [3.0, 2.0, 1.0], {"k": 1})
    assert p(2.5) == 1.5 and len(p.restrict(1.5, 3.0)) == 2
    assert p.to_csv().splitlines()[0] == "r,value"
    with pytest.raises(ValueError):
        p.values[0] = 9.0


@given(n=st.integers(3, 60), seed=st.integers(0, 2 ** 31 - 1))
def test_thomas_matches_dense_solve(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.1, 1.0, n)
    c = rng.uniform(0.1, 1.0, n)
    b = -(a + c + rng.uniform(0.0, 1.0, n))  # diagonally dominant, as in every solver here
    rhs = rng.normal(size=n)
    A = np.diag(b) + np.diag(a[1:], -1) + np.diag(c[:-1], 1)
    x = thomas(a, b, c, rhs)
    assert np.allclose(A @ x, rhs, atol=1e-10)
