"""Acceptance criteria, one test each.  Every test prints a single PASS/FAIL line."""

import math
import time

import numpy as np

from corpus import corpus, model
from oracles import HEAT_POLE_E3_T05, exterior_e3, power_law_volume

from fellerlab.classifier import classify, classify_feller, classify_parabolic
from fellerlab.cli import preset_path, run_scenario
from fellerlab.comparison import (ConjugatePoint, check_positive_nondecreasing, as_bound, hsu_criterion,
                                  hsu_sharpness_model, jacobi_model)
from fellerlab.ends import WarpedLine, classify_warped_line
from fellerlab.exterior import (decay_verdict, flux_nondecreasing, minimal_exterior_solution,
                                strictly_decreasing)
from fellerlab.heat import HeatOptions, Indicator, evolve, probe_state
from fellerlab.isoperimetry import FaberKrahnProfile, check_regularity, v_and_index, v_from_lambda
from fellerlab.verdict import Status


RESULTS = {}


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[n] = line
    print("\n" + line)
    assert ok, detail


def test_criterion_01_exterior_closed_form():
    t0 = time.perf_counter()
    trace = minimal_exterior_solution(model("euclid3"), 1.0, 1.0)
    elapsed = time.perf_counter() - t0
    r = np.linspace(1.0, 11.0, 2001)
    exact = np.array([exterior_e3(x) for x in r])
    err = float(np.max(np.abs(trace.final(r) - exact) / exact))
    verdict = decay_verdict(trace)
    ok = err < 1e-4 and elapsed < 5.0 and trace.limit_estimate == 0.0 and verdict.holds
    report(1, ok, f"rel sup error {err:.2e} on [1,11], limit {trace.limit_estimate}, "
                  f"verdict {verdict.status.value}, {elapsed:.2f}s")


def test_criterion_02_cubic_decay_surface():
    t0 = time.perf_counter()
    M = model("cubic_decay2")
    rep = classify(M)
    trace = minimal_exterior_solution(M, 1.0, 1.0)
    ext = decay_verdict(trace)
    heat, state = probe_state(M, 1.0, 1.0)
    scen = run_scenario(preset_path("ex_versus1"))
    elapsed = time.perf_counter() - t0
    samples = heat.evidence["samples"]
    far = samples[-1][1]
    ok = (rep.parabolic.holds and rep.feller.fails and ext.fails and trace.far_value > 1e-3
          and heat.fails and far > 1e-3 and not scen.conflicts and not scen.errors
          and set(scen.matrix["feller"].values()) == {"Fails"} and elapsed < 60.0)
    report(2, ok, f"parabolic {rep.parabolic.status.value}, feller {rep.feller.status.value}, "
                  f"exterior {ext.status.value} (plateau {trace.far_value:.3g}), heat {heat.status.value} "
                  f"(far value {far:.3g}), matrix {scen.matrix['feller']}, conflicts {len(scen.conflicts)}, "
                  f"{elapsed:.1f}s")


def test_criterion_03_corpus_agreement():
    rows = []
    conflicts = []
    conclusive = 0
    for M in corpus():
        f = classify_feller(M)
        e = decay_verdict(minimal_exterior_solution(M, 1.0, 1.0))
        rows.append((M.label, f.status.value, e.status.value))
        if f.conclusive and e.conclusive:
            conclusive += 1
            if f.status != e.status:
                conflicts.append(M.label)
    ok = len(rows) >= 12 and not conflicts and conclusive >= 10
    report(3, ok, f"{len(rows)} models, {conclusive} jointly conclusive, conflicts {conflicts}; "
                  + "; ".join(f"{a}: {b}/{c}" for a, b, c in rows))


def test_criterion_04_heat_semigroup():
    t0 = time.perf_counter()
    M = model("euclid3")
    fixed = HeatOptions(dt=1e-3, refine=False, report_radius=8.0, wall=40.0)
    s, t = 0.2, 0.3
    once = evolve(M, Indicator(1.0), s + t, fixed)
    half = evolve(M, Indicator(1.0), s, fixed)
    twice = evolve(M, half.profile(), t, fixed)
    r = once.grid[once.grid <= 8.0]
    semigroup = float(np.max(np.abs(twice(r) - once(r))))
    m0 = evolve(M, Indicator(1.0), 0.0, fixed).mass
    masses = [evolve(M, Indicator(1.0), x, fixed).mass / m0 for x in (0.05, 0.5, 2.0)]
    pole_state = evolve(M, Indicator(1.0), 0.5)
    pole_err = abs(pole_state.pole_value - HEAT_POLE_E3_T05) / HEAT_POLE_E3_T05
    elapsed = time.perf_counter() - t0
    ok = semigroup < 1e-6 and max(masses) <= 1 + 1e-10 and pole_err < 1e-4 and elapsed < 30.0
    report(4, ok, f"semigroup sup gap {semigroup:.2e}, max relative mass {max(masses):.12f}, "
                  f"pole rel error {pole_err:.2e}, {elapsed:.1f}s")


def test_criterion_05_monotonicity():
    bad = []
    for M in corpus():
        trace = minimal_exterior_solution(M, 1.0, 1.0)
        checks = {
            "increasing in n": trace.monotone_violation <= 1e-10,
            "0 < h <= 1": trace.range_ok,
            "flux": flux_nondecreasing(trace),
        }
        if classify_parabolic(M).holds:
            checks["strictly decreasing"] = strictly_decreasing(trace.final)
        bad += [f"{M.label}: {k}" for k, v in checks.items() if not v]
    report(5, not bad, f"{len(corpus())} models, violations {bad}")


def test_criterion_06_jacobi():
    t0 = time.perf_counter()
    M = jacobi_model(-1.0, 3, r_max=10.0)
    r = np.linspace(0.0, 10.0, 4001)
    err = float(np.max(np.abs(M.g.value(r) - np.sinh(r)) / np.maximum(1.0, np.sinh(r))))
    try:
        jacobi_model(1.0, 2, r_max=10.0)
        at = math.nan
    except ConjugatePoint as e:
        at = e.radius
    elapsed = time.perf_counter() - t0
    ok = err < 1e-8 and abs(at - math.pi) < 1e-8 and elapsed < 1.0
    report(6, ok, f"sinh error {err:.2e} on [0,10], conjugate point {at!r} (off by {abs(at - math.pi):.1e}), "
                  f"{elapsed:.2f}s")


def test_criterion_07_hsu_sharpness():
    t0 = time.perf_counter()
    G = "(1+r)^2"
    crit = hsu_criterion(G)
    M, diag = hsu_sharpness_model(G, 1.0, 2)
    positive, monotone = check_positive_nondecreasing(as_bound(G))
    feller = classify_feller(M)
    elapsed = time.perf_counter() - t0
    checks_ok = (positive and monotone and diag["curvature_estimate_ok"] and diag["area_density_integrable"]
                 and diag["outer_volume_ratio_integrable"])
    ok = crit.status == Status.INCONCLUSIVE and checks_ok and feller.fails and elapsed < 30.0
    report(7, ok, f"criterion {crit.status.value}, alpha estimate {diag['alpha']['alpha']:.2e}, "
                  f"curvature/volume/ratio checks {checks_ok}, model feller {feller.status.value}, {elapsed:.1f}s")


def test_criterion_08_ends():
    line = WarpedLine.parse("exp(t^3)", 2)
    base = classify_warped_line(line)
    per_end = [e.feller.status.value for e in base.ends]
    cosh = classify_warped_line(WarpedLine.parse("cosh(t)", 2))
    cosh_ends = [e.feller.status.value for e in cosh.ends]
    stable = []
    for window in [(0.5, 2.0), (1.0, 2.0), (0.75, 1.25)]:
        alt = classify_warped_line(line, window)
        stable.append([e.feller.status.value for e in alt.ends] == per_end and alt.feller.status == base.feller.status)
        alt = classify_warped_line(WarpedLine.parse("cosh(t)", 2), window)
        stable.append([e.feller.status.value for e in alt.ends] == cosh_ends)
    ok = (base.feller.fails and per_end == ["Holds", "Fails"] and base.feller.evidence["failing"] == [2]
          and cosh_ends == ["Holds", "Holds"] and cosh.feller.holds and all(stable))
    report(8, ok, f"exp(t^3) ends {per_end} -> {base.feller.status.value}; cosh ends {cosh_ends}; "
                  f"window perturbations stable {all(stable)}")


def test_criterion_09_isoperimetry():
    worst_rt, worst_v, worst_idx, passed = 0.0, 0.0, 0.0, True
    for p in (3, 4, 6):
        P = FaberKrahnProfile.from_function(f"s^(-2/{p})")
        ts = np.geomspace(1e-3, 1e3, 25)
        for t in ts:
            V = v_from_lambda(P, float(t))
            back = float(P.t_of_v(V)[0])
            worst_rt = max(worst_rt, abs(back - t) / t)
            worst_v = max(worst_v, abs(V - power_law_volume(t, p)) / power_law_volume(t, p))
        _, idx = v_and_index(P, ts)
        worst_idx = max(worst_idx, float(np.max(np.abs(idx - p / 2))))
        passed = passed and check_regularity(P, T=1.0).passed
    ok = worst_rt < 1e-8 and worst_v < 1e-8 and worst_idx < 1e-10 and passed
    report(9, ok, f"round trip {worst_rt:.1e}, V vs closed form {worst_v:.1e}, "
                  f"index error {worst_idx:.1e}, regularity {passed}")


def test_criterion_10_implications():
    violations = []
    for M in corpus():
        rep = classify(M)
        violations += [f"{M.label}: {v['name']}" for v in rep.violations]
        # the conclusion is Feller = Holds, stricter than "not Fails"
        strict = {
            "stochastically incomplete": rep.stochastically_complete.fails,
            "infinite volume": rep.volume_finite.fails,
            "vanishing Green kernel": rep.parabolic.fails and _vanishing(rep.green_kernel_at),
        }
        violations += [f"{M.label}: {k} but feller {rep.feller.status.value}"
                       for k, premise in strict.items() if premise and not rep.feller.holds]
    report(10, not violations, f"{len(corpus())} models, violations {violations}")


def _vanishing(profile):
    vals = [g for _, g in profile or []]
    return len(vals) > 1 and all(np.isfinite(vals)) and all(b < a for a, b in zip(vals, vals[1:]))
