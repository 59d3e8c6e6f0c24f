import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fellerlab.warping import (DomainExceeded, NonPositive, PoleViolation, TablePiece, WarpingFunction,
                               eval_log, make_model, sphere_constant, warping)


def test_eval_log_examples():
    e = eval_log(warping("sinh(r)"), 1.0)
    assert e.log_g == pytest.approx(math.log(math.sinh(1.0)), rel=1e-14)
    assert e.dlog_g == pytest.approx(1.0 / math.tanh(1.0), rel=1e-14)
    e = eval_log(warping("r"), 1.0)
    assert (e.log_g, e.dlog_g) == (0.0, 1.0)
    e = eval_log(warping("r", "exp(-r^3)", (2, 10)), 20.0)
    assert e.log_g == -8000.0 and e.dlog_g == pytest.approx(-1200.0, rel=1e-14)
    assert not e.valid  # far outside double range in plain form


def test_make_model_examples():
    assert make_model(3, warping("sinh(r)")).dim == 3
    with pytest.raises(PoleViolation):
        make_model(2, warping("r^2"))
    make_model(2, warping("r", "exp(-r^3)", (2, 10)))
    with pytest.raises(ValueError):
        make_model(1, warping("r"))


def test_non_positive_detected():
    with pytest.raises(NonPositive):
        make_model(2, warping("r", "2 - r", (0.5, 1.0)))


def test_sphere_constants():
    assert sphere_constant(2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert sphere_constant(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_constant(4) == pytest.approx(2 * math.pi ** 2, rel=1e-15)


def test_domain_guards():
    g = warping("r")
    with pytest.raises(DomainExceeded):
        g.logd(np.array([-1.0]))
    r = np.linspace(0, 2, 21)
    t = WarpingFunction(TablePiece(r, np.log(np.maximum(r, 1e-300))))
    with pytest.raises(DomainExceeded):
        t.logd(np.array([3.0]))


def test_table_from_csv(tmp_path):
    r = np.linspace(0.0, 5.0, 501)
    path = tmp_path / "g.csv"
    path.write_text("r,g\n" + "\n".join(f"{float(a)!r},{math.sinh(a)!r}" for a in r))
    g = WarpingFunction(TablePiece.from_csv(path))
    M = make_model(3, g, check_radius=5.0)
    x = np.linspace(0.1, 4.9, 97)
    assert np.allclose(M.g.value(x), np.sinh(x), rtol=1e-6)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.05, 30.0))
def test_dlog_matches_finite_difference(r):
    for g in (warping("sinh(r)"), warping("r", "exp(-r^3)", (2, 10)), warping("r", "cosh(r)", (0.5, 1.5))):
        h = 1e-6 * r
        lp, lm = g.log(np.array([r + h]))[0], g.log(np.array([r - h]))[0]
        d = g.logd(np.array([r]))[1][0]
        assert d == pytest.approx((lp - lm) / (2 * h), rel=1e-6, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.01, 50.0), a=st.floats(0.2, 3.0), w=st.floats(0.1, 5.0))
def test_blend_preserves_positivity(r, a, w):
    g = warping("r", "1 + r^2", (a, a + w))
    assert np.isfinite(g.log(np.array([r]))[0])
    assert g.value(np.array([r]))[0] > 0


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.01, 8.0), m=st.integers(2, 6))
def test_power_identity(r, m):
    M = make_model(m, warping("sinh(r)"))
    assert math.exp(M.log_area_density(np.array([r]))[0]) == pytest.approx(math.sinh(r) ** (m - 1), rel=1e-12)


def test_blend_is_c2():
    g = warping("r", "exp(-r^3)", (2.0, 10.0))
    for edge in (2.0, 10.0):
        lo = g.logd(np.array([edge * (1 - 1e-9)]))
        hi = g.logd(np.array([edge * (1 + 1e-9)]))
        for a, b in zip(lo, hi):
            assert a[0] == pytest.approx(b[0], rel=1e-5, abs=1e-5)
