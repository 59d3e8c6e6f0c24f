import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from corpus import corpus, model
from oracles import GREEN_H3_R1, LOG_RESIDUAL_CUBIC_R10, VOLUME_CUBIC_DECAY
from fellerlab.classifier import (SCHEMA_VERSION, classify, classify_feller, classify_parabolic,
                                  classify_stochastically_complete, classify_volume, green_kernel, volume_functions)
from fellerlab.warping import make_model, warping


@pytest.mark.parametrize("name, expected", [("euclid2", "Holds"), ("euclid3", "Fails"), ("cubic_decay2", "Holds")])
def test_parabolic(name, expected):
    assert classify_parabolic(model(name)).status.value == expected


@pytest.mark.parametrize("name, expected", [("euclid3", "Holds"), ("cubic_growth2", "Fails"), ("cubic_decay2", "Holds")])
def test_stochastic_completeness(name, expected):
    assert classify_stochastically_complete(model(name)).status.value == expected


@pytest.mark.parametrize("name, expected", [("hyperbolic3", "Holds"), ("cubic_decay2", "Fails"), ("euclid2", "Holds")])
def test_feller(name, expected):
    assert classify_feller(model(name)).status.value == expected


def test_volume_functions():
    v = volume_functions(model("euclid3"), 2.0)
    assert v.area == pytest.approx(16 * math.pi, rel=1e-14)
    assert math.isinf(volume_functions(model("euclid2"), 3.0).residual_volume)
    v = volume_functions(model("cubic_decay2"), 10.0)
    assert v.log_residual_volume == pytest.approx(LOG_RESIDUAL_CUBIC_R10, rel=1e-10)


def test_total_volume():
    verdict, value = classify_volume(model("cubic_decay2"))
    assert verdict.holds
    assert value == pytest.approx(VOLUME_CUBIC_DECAY, rel=1e-8)
    verdict, value = classify_volume(model("euclid2"))
    assert verdict.fails and math.isinf(value)


def test_green_kernel():
    assert green_kernel(model("euclid3"), 2.0) == pytest.approx(0.5, rel=1e-8)
    assert math.isinf(green_kernel(model("euclid2"), 5.0))
    assert green_kernel(model("hyperbolic3"), 1.0) == pytest.approx(GREEN_H3_R1, rel=1e-8)


def test_report_serialises():
    rep = classify(model("hyperbolic3"))
    d = json.loads(rep.to_json())
    assert d["schema"] == SCHEMA_VERSION
    assert d["feller"]["status"] == "Holds"
    assert {f["name"] for f in d["consistency_flags"]} >= {"infinite volume => Feller"}


@pytest.mark.parametrize("M", corpus(), ids=lambda M: M.label)
def test_implications(M):
    rep = classify(M)
    assert not rep.violations
    if rep.stochastically_complete.fails or rep.volume_finite.fails:
        assert rep.feller.holds


@settings(max_examples=10, deadline=None)
@given(logc=st.floats(-30.0, 30.0), tail=st.sampled_from(["exp(-r^3)", "exp(-r)", "r^2", "exp(r^3)"]))
def test_scale_invariance(logc, tail):
    base = make_model(2, warping("r", tail, (2.0, 10.0)))
    scaled = make_model(2, warping("r", f"exp({logc!r}) * {tail}", (2.0, 10.0)))
    assert classify_feller(scaled).status == classify_feller(base).status
