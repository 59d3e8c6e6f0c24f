import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fellerlab.ends import EmptyList, WarpedLine, classify_warped_line, combine_end_verdicts, split_ends
from fellerlab.verdict import fails, holds, inconclusive
from fellerlab.warping import NonPositiveValue


def test_split_examples():
    a, b = split_ends(WarpedLine.parse("cosh(t)", 3))
    r = np.linspace(0.1, 30.0, 300)
    assert np.array_equal(a.g.log(r), b.g.log(r))
    plus, minus = split_ends(WarpedLine.parse("exp(t^3)", 2))
    assert plus.g.log(np.array([5.0]))[0] == pytest.approx(125.0)
    assert minus.g.log(np.array([5.0]))[0] == pytest.approx(-125.0)
    c1, c2 = split_ends(WarpedLine.parse("1", 2))
    assert c1.g.log(np.array([10.0]))[0] == 0.0 == c2.g.log(np.array([10.0]))[0]


def test_declared_tails_override():
    W = WarpedLine.parse("exp(t^3)", 2, tail_neg="exp(t^3)")
    _, minus = split_ends(W)
    assert "declared" in minus.label


def test_warped_line_examples():
    rep = classify_warped_line(WarpedLine.parse("exp(t^3)", 2))
    assert rep.feller.fails and rep.feller.evidence["failing"] == [2]
    rep = classify_warped_line(WarpedLine.parse("cosh(t)", 3))
    assert rep.feller.holds and [e.feller.status.value for e in rep.ends] == ["Holds", "Holds"]
    d = rep.to_dict()
    assert d["feller"]["status"] == "Holds" and len(d["ends"]) == 2


def test_even_f_gives_identical_reports():
    rep = classify_warped_line(WarpedLine.parse("cosh(t)", 2))
    a, b = (e.to_dict(evidence=False) for e in rep.ends)
    a.pop("model"), b.pop("model")
    assert a == b


def test_combinator():
    H, F, I = holds(), fails(), inconclusive()
    assert combine_end_verdicts([H, H]).holds
    assert combine_end_verdicts([H, F]).fails
    assert not combine_end_verdicts([I, H]).conclusive
    assert combine_end_verdicts([I, F]).fails
    with pytest.raises(EmptyList):
        combine_end_verdicts([])


@settings(max_examples=30, deadline=None)
@given(vs=st.lists(st.sampled_from(["H", "F", "I"]), min_size=1, max_size=6))
def test_combinator_laws(vs):
    make = {"H": holds, "F": fails, "I": inconclusive}
    out = combine_end_verdicts([make[v]() for v in vs])
    if "F" in vs:
        assert out.fails
    elif set(vs) == {"H"}:
        assert out.holds
    else:
        assert not out.conclusive


def test_invalid_lines():
    with pytest.raises(NonPositiveValue):
        WarpedLine.parse("t", 2)
    with pytest.raises(ValueError):
        WarpedLine.parse("cosh(t)", 1)


@pytest.mark.parametrize("f, dim", [("exp(t^3)", 2), ("cosh(t)", 3), ("1 + t^2", 2), ("exp(-t^2)", 2)])
def test_window_perturbation(f, dim):
    W = WarpedLine.parse(f, dim)
    base = [e.feller.status for e in classify_warped_line(W).ends]
    for window in [(0.5, 2.0), (0.6, 1.2), (1.0, 2.0)]:
        assert [e.feller.status for e in classify_warped_line(W, window).ends] == base
