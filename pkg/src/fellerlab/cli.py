"""Command-line interface and JSON scenario runner."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

import jsonschema

from . import __version__
from .classifier import classify
from .comparison import (
    ComparisonError,
    curvature_of,
    feller_by_sec_comparison,
    hsu_criterion,
    hsu_sharpness_model,
    non_feller_by_ric_comparison,
)
from .ends import WarpedLine, classify_warped_line, split_ends
from .exterior import DEFAULT_OPTIONS as EXTERIOR_DEFAULTS, ExteriorOptions, decay_verdict, minimal_exterior_solution
from .formula import ParseError, parse
from .heat import DEFAULT_OPTIONS as HEAT_DEFAULTS, HeatOptions, probe_state
from .integrals import DEFAULT_OPTIONS as TAIL_DEFAULTS, TailOptions
from .isoperimetry import FaberKrahnProfile, check_regularity, feller_from_faber_krahn, gaussian_bound, v_from_lambda
from .verdict import Status, Verdict, fails, holds, inconclusive, to_jsonable
from .warping import ModelManifold, make_model, warping

REPORT_SCHEMA = "fellerlab.report/1"
EXIT_OK, EXIT_VALIDATION, EXIT_ROUTE, EXIT_CONFLICT = 0, 2, 3, 4
OPEN_PROBLEM_TAG = "open problem — experiment only"

ROUTES_BY_KIND = {
    "model": ("integral", "exterior", "heat", "comparison"),
    "warped_line": ("integral", "exterior"),
    "curvature_bound": ("comparison", "integral"),
    "faber_krahn": ("isoperimetry",),
}

_FORMULA = {"type": "string", "minLength": 1}
_WARPING = {
    "type": "object",
    "required": ["body"],
    "additionalProperties": False,
    "properties": {
        "body": _FORMULA,
        "tail": _FORMULA,
        "blend": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
}
SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["version", "kind", "routes"],
    "properties": {
        "version": {"const": 1},
        "name": {"type": "string"},
        "anchor": {"type": "string"},
        "tags": {"type": "array", "items": {"type": "string"}},
        "kind": {"enum": sorted(ROUTES_BY_KIND)},
        "routes": {"type": "array", "items": {"enum": ["integral", "exterior", "heat", "comparison", "isoperimetry"]},
                   "minItems": 1, "uniqueItems": True},
        "model": {
            "type": "object",
            "required": ["dim", "g"],
            "additionalProperties": False,
            "properties": {"dim": {"type": "integer", "minimum": 2}, "g": _WARPING},
        },
        "line": {
            "type": "object",
            "required": ["f", "dim"],
            "additionalProperties": False,
            "properties": {
                "f": _FORMULA, "dim": {"type": "integer", "minimum": 2}, "tail_pos": _FORMULA, "tail_neg": _FORMULA,
                "window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
            },
        },
        "bound": {
            "type": "object",
            "required": ["G", "dim"],
            "additionalProperties": False,
            "properties": {"G": _FORMULA, "dim": {"type": "integer", "minimum": 2}, "beta": {"type": "number"},
                           "kind": {"enum": ["SectionalUpper", "RicciLower"]}},
        },
        "profile": {
            "type": "object",
            "required": ["Lambda"],
            "additionalProperties": False,
            "properties": {"Lambda": _FORMULA, "s_max": {"type": "number"}, "T": {"type": ["number", "null"]},
                           "times": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}}},
        },
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "exterior": {"type": "object", "properties": {"R0": {"type": "number", "exclusiveMinimum": 0},
                                                              "lam": {"type": "number", "exclusiveMinimum": 0}}},
                "heat": {"type": "object", "properties": {"R": {"type": "number", "exclusiveMinimum": 0},
                                                          "times": {"type": "array", "items": {"type": "number"}}}},
                "integral": {"type": "object"},
            },
        },
    },
}
_PAYLOAD = {"model": "model", "warped_line": "line", "curvature_bound": "bound", "faber_krahn": "profile"}


class ValidationError(ValueError):
    """Scenario rejected; ``where`` is a line number or a dotted field path."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass(frozen=True)
class Tolerances:
    exterior: ExteriorOptions = EXTERIOR_DEFAULTS
    heat: HeatOptions = HEAT_DEFAULTS
    integral: TailOptions = TAIL_DEFAULTS

    def snapshot(self) -> dict:
        return {"exterior": dict(self.exterior.__dict__), "heat": dict(self.heat.__dict__),
                "integral": dict(self.integral.__dict__)}


@dataclass
class Report:
    scenario: dict
    routes: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    matrix: dict = field(default_factory=dict)
    conflicts: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict, repr=False)

    @property
    def exit_code(self) -> int:
        if self.conflicts:
            return EXIT_CONFLICT
        if self.errors:
            return EXIT_ROUTE
        return EXIT_OK

    def to_dict(self) -> dict:
        return to_jsonable({
            "schema": REPORT_SCHEMA,
            "scenario": {k: self.scenario.get(k) for k in ("name", "kind", "anchor", "tags", "routes")},
            "routes": self.routes,
            "route_errors": self.errors,
            "cross_validation": {"matrix": self.matrix, "conflicts": self.conflicts},
            "provenance": self.provenance,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# scenario loading


def load_scenario(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(e.msg, f"line {e.lineno}, column {e.colno}") from None
    return validate_scenario(data)


def validate_scenario(data: Any) -> dict:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errs = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        raise ValidationError(e.message, ".".join(str(p) for p in e.absolute_path) or "<root>")
    kind = data["kind"]
    key = _PAYLOAD[kind]
    if key not in data:
        raise ValidationError(f"kind {kind!r} needs a {key!r} block", key)
    bad = [r for r in data["routes"] if r not in ROUTES_BY_KIND[kind]]
    if bad:
        raise ValidationError(f"route(s) {bad} not applicable to kind {kind!r}", "routes")
    _check_formulas(data, kind)
    return data


def _check_formulas(data: dict, kind: str) -> None:
    fields = {
        "model": [("model.g.body", "r"), ("model.g.tail", "r")],
        "warped_line": [("line.f", "t"), ("line.tail_pos", "t"), ("line.tail_neg", "t")],
        "curvature_bound": [("bound.G", "r")],
        "faber_krahn": [("profile.Lambda", "s")],
    }[kind]
    for path, var in fields:
        node = data
        for part in path.split("."):
            node = node.get(part) if isinstance(node, dict) else None
        if node is None:
            continue
        try:
            parse(node, var)
        except ParseError as e:
            raise ValidationError(f"formula {node!r}: {e}", path) from None


def scenario_hash(data: dict) -> str:
    return hashlib.sha256(json.dumps(data, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def build_model(spec: dict, name: str = "") -> ModelManifold:
    g = spec["g"]
    w = warping(g["body"], g.get("tail"), g.get("blend"))
    return make_model(spec["dim"], w, name=name or w.label)


# ---------------------------------------------------------------------------
# routes


def _exterior(M: ModelManifold, opts: dict, tol: Tolerances, dump: Optional[dict], key: str) -> Verdict:
    trace = minimal_exterior_solution(M, float(opts.get("R0", 1.0)), float(opts.get("lam", 1.0)), tol.exterior)
    if dump is not None:
        dump[f"{key}.csv"] = trace.to_csv()
    v = decay_verdict(trace, tol.exterior)
    return replace(v, evidence={**v.evidence, "monotone_violation": trace.monotone_violation,
                                "inner_slope": trace.inner_slope})


def _heat(M: ModelManifold, opts: dict, tol: Tolerances, dump: Optional[dict], key: str) -> Verdict:
    R = float(opts.get("R", 1.0))
    times = [float(t) for t in opts.get("times", [1.0])]
    vs = []
    for t in times:
        v, state = probe_state(M, R, t, None, tol.heat)
        vs.append(v)
        if dump is not None:
            dump[f"{key}_t{t:g}.csv"] = state.to_csv()
    ev = {"per_time": [v.to_dict() for v in vs]}
    if any(v.fails for v in vs):
        return fails("heat", "far-field plateau at some probe time", **ev)
    if all(v.holds for v in vs):
        return holds("heat", "far-field decay at every probe time", **ev)
    return inconclusive("heat", "not every probe time conclusive", **ev)


def _model_comparison(M: ModelManifold) -> dict:
    """The model's own radial curvature used as both comparison bounds."""
    G = curvature_of(M.g)
    sec = feller_by_sec_comparison(G, M.dim)
    ric = non_feller_by_ric_comparison(G, M.dim)
    if sec.holds:
        feller = holds("comparison", "sectional upper bound transfers Feller", sectional=sec, ricci=ric)
    elif ric.fails:
        feller = fails("comparison", "Ricci lower bound transfers non-Feller", sectional=sec, ricci=ric)
    else:
        feller = inconclusive("comparison", "neither comparison transfers", sectional=sec, ricci=ric)
    return {"feller": feller}


def _integral_model(M: ModelManifold, tol: Tolerances) -> dict:
    rep = classify(M, tol.integral)
    return {"report": rep, "parabolic": rep.parabolic, "stochastically_complete": rep.stochastically_complete,
            "feller": rep.feller, "volume_finite": rep.volume_finite}


def _run_model(sc: dict, tol: Tolerances, dump: Optional[dict]) -> dict:
    M = build_model(sc["model"], sc.get("name", ""))
    opts = sc.get("options", {})
    jobs = {
        "integral": lambda: _integral_model(M, tol),
        "exterior": lambda: {"feller": _exterior(M, opts.get("exterior", {}), tol, dump, "exterior")},
        "heat": lambda: {"feller": _heat(M, opts.get("heat", {}), tol, dump, "heat")},
        "comparison": lambda: _model_comparison(M),
    }
    return {r: jobs[r] for r in sc["routes"]}


def _run_line(sc: dict, tol: Tolerances, dump: Optional[dict]) -> dict:
    ln = sc["line"]
    W = WarpedLine.parse(ln["f"], ln["dim"], ln.get("tail_pos"), ln.get("tail_neg"))
    window = tuple(ln.get("window", (0.5, 1.5)))
    opts = sc.get("options", {})

    def integral():
        rep = classify_warped_line(W, window, tol.integral)
        return {"report": rep, "end1.feller": rep.ends[0].feller, "end2.feller": rep.ends[1].feller,
                "feller": rep.feller}

    def exterior():
        from .ends import combine_end_verdicts

        ends = split_ends(W, window)
        vs = [_exterior(E, opts.get("exterior", {}), tol, dump, f"exterior_end{i + 1}") for i, E in enumerate(ends)]
        return {"end1.feller": vs[0], "end2.feller": vs[1], "feller": combine_end_verdicts(vs)}

    jobs = {"integral": integral, "exterior": exterior}
    return {r: jobs[r] for r in sc["routes"]}


def _run_bound(sc: dict, tol: Tolerances, dump: Optional[dict]) -> dict:
    b = sc["bound"]
    G, m = b["G"], int(b["dim"])
    beta = b.get("beta")
    kind = b.get("kind")
    cache = {}

    def sharp():
        if "model" not in cache:
            cache["model"] = hsu_sharpness_model(G, float(beta), m)
        return cache["model"]

    def comparison():
        out = {"hsu": hsu_criterion(G)}
        if kind == "SectionalUpper":
            out["feller"] = feller_by_sec_comparison(G, m)
        elif kind == "RicciLower":
            out["feller"] = non_feller_by_ric_comparison(G, m)
        if beta is not None:
            M, diag = sharp()
            out["sharpness"] = diag
            checks = diag["area_density_integrable"] and diag["outer_volume_ratio_integrable"]
            v = (fails("comparison", "sharpness model: g^{m-1} and the outer volume ratio are integrable", **diag)
                 if checks else inconclusive("comparison", "sharpness integrability checks did not pass", **diag))
            out["sharpness_model.feller"] = v
        return out

    def integral():
        if beta is None:
            raise ValidationError("the integral route on a curvature bound needs 'beta'", "bound.beta")
        M, _ = sharp()
        rep = classify(M, tol.integral)
        return {"report": rep, "sharpness_model.feller": rep.feller}

    jobs = {"comparison": comparison, "integral": integral}
    # the sharpness model is shared; build it before the routes fan out
    if beta is not None:
        sharp()
    return {r: jobs[r] for r in sc["routes"]}


def _run_profile(sc: dict, tol: Tolerances, dump: Optional[dict]) -> dict:
    p = sc["profile"]
    P = FaberKrahnProfile.from_function(p["Lambda"], float(p.get("s_max", math.inf)))
    T = p.get("T")
    T = math.inf if T is None else float(T)

    def iso():
        v = feller_from_faber_krahn(P, T)
        out = {"feller": v, "admissible": P.admissible}
        if P.admissible:
            times = [float(t) for t in p.get("times", [1.0])]
            out["volume_function"] = [[t, v_from_lambda(P, t)] for t in times]
            out["gaussian_bound_d0"] = [[t, gaussian_bound(P, (1.0, 1.0, 5.0), 0.0, t)] for t in times]
            reg = check_regularity(P, T)
            out["regularity"] = {k: val for k, val in reg.to_dict().items() if k not in ("t", "index")}
            if dump is not None:
                dump["regularity.csv"] = "t,index\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(reg.t, reg.index))
        return out

    return {"isoperimetry": iso}


_RUNNERS = {"model": _run_model, "warped_line": _run_line, "curvature_bound": _run_bound, "faber_krahn": _run_profile}


def cross_validate(routes: dict) -> tuple[dict, list]:
    """Per property, the verdict of each route; conclusive disagreements are conflicts."""
    matrix: dict = {}
    for route in sorted(routes):
        for prop, v in routes[route].items():
            if isinstance(v, Verdict):
                matrix.setdefault(prop, {})[route] = v.status.value
    conflicts = []
    for prop in sorted(matrix):
        row = matrix[prop]
        names = sorted(row)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                sa, sb = row[a], row[b]
                if Status.INCONCLUSIVE.value not in (sa, sb) and sa != sb:
                    conflicts.append({"property": prop, "routes": [a, b], "verdicts": [sa, sb]})
    return matrix, conflicts


def run_scenario(path_or_data, tol: Tolerances = Tolerances(), dump_profiles: Optional[str] = None,
                 parallel: bool = True) -> Report:
    sc = load_scenario(path_or_data) if not isinstance(path_or_data, dict) else validate_scenario(path_or_data)
    dump = {} if dump_profiles else None
    jobs = _RUNNERS[sc["kind"]](sc, tol, dump)
    results, errors = {}, {}

    def run(item):
        name, job = item
        try:
            return name, job(), None
        except Exception as e:  # route errors are reported, not fatal
            return name, None, f"{type(e).__name__}: {e}"

    items = sorted(jobs.items())
    if parallel and len(items) > 1:
        with ThreadPoolExecutor(max_workers=len(items)) as pool:
            outcomes = list(pool.map(run, items))
    else:
        outcomes = [run(it) for it in items]
    for name, res, err in outcomes:
        if err is not None:
            errors[name] = err
        else:
            results[name] = res
    matrix, conflicts = cross_validate(results)
    rep = Report(sc, {k: _route_json(v) for k, v in results.items()}, errors, matrix, conflicts)
    rep.provenance = {"tool": "fellerlab", "version": __version__, "scenario_sha256": scenario_hash(sc),
                      "options": tol.snapshot()}
    if dump is not None:
        out = Path(dump_profiles)
        out.mkdir(parents=True, exist_ok=True)
        stem = sc.get("name") or "scenario"
        for fname, text in sorted(dump.items()):
            (out / f"{stem}_{fname}").write_text(text, encoding="utf-8")
        rep.profiles = {k: str(out / f"{stem}_{k}") for k in sorted(dump)}
    return rep


def _route_json(res: dict) -> dict:
    return {k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in res.items()}


# ---------------------------------------------------------------------------
# presets


def _preset_files():
    root = resources.files("fellerlab") / "presets"
    return sorted((p for p in root.iterdir() if p.name.endswith(".json")), key=lambda p: p.name)


def list_presets() -> list:
    out = []
    for p in _preset_files():
        d = json.loads(p.read_text(encoding="utf-8"))
        out.append({"name": d["name"], "kind": d["kind"], "anchor": d.get("anchor", ""), "tags": d.get("tags", []),
                    "routes": d["routes"]})
    return out


def preset_path(name: str) -> Path:
    for p in _preset_files():
        if p.name == f"{name}.json":
            with resources.as_file(p) as f:
                return Path(f)
    raise ValidationError(f"no preset named {name!r}", "preset")


# ---------------------------------------------------------------------------
# command line


def _tolerances(args) -> Tolerances:
    ext, heat, integ = EXTERIOR_DEFAULTS, HEAT_DEFAULTS, TAIL_DEFAULTS
    if getattr(args, "tol_exterior", None) is not None:
        ext = replace(ext, tol=args.tol_exterior)
    if getattr(args, "max_radius", None) is not None:
        ext = replace(ext, max_radius=args.max_radius)
    if getattr(args, "report_radius", None) is not None:
        ext = replace(ext, report_radius=args.report_radius)
    if getattr(args, "tol_heat", None) is not None:
        heat = replace(heat, rtol_time=args.tol_heat)
    if getattr(args, "tol_margin", None) is not None:
        integ = replace(integ, margin=args.tol_margin)
    return Tolerances(ext, heat, integ)


def _emit(obj, as_json: bool, text: str) -> None:
    if as_json:
        sys.stdout.write(json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(text.rstrip("\n") + "\n")


def _model_from_args(args) -> ModelManifold:
    spec = {"dim": args.dim, "g": {"body": args.g}}
    if args.tail:
        spec["g"]["tail"] = args.tail
    if args.blend:
        spec["g"]["blend"] = list(args.blend)
    return build_model(spec)


def _cmd_classify(args) -> int:
    M = _model_from_args(args)
    rep = classify(M, _tolerances(args).integral)
    lines = [f"model: {M.label} (m={M.dim})"]
    for k in ("parabolic", "stochastically_complete", "feller", "volume_finite"):
        v = getattr(rep, k)
        lines.append(f"  {k:24s} {v.status.value:13s} {v.reason}")
    if rep.violations:
        lines.append(f"  consistency violations: {rep.violations}")
    _emit(rep.to_dict(), args.json, "\n".join(lines))
    return EXIT_OK


def _cmd_exterior(args) -> int:
    M = _model_from_args(args)
    tol = _tolerances(args)
    trace = minimal_exterior_solution(M, args.R0, args.lam, tol.exterior)
    v = decay_verdict(trace, tol.exterior)
    if args.dump_profiles:
        from .exterior import write_trace

        write_trace(trace, args.dump_profiles)
    text = (f"model: {M.label} (m={M.dim})\n  decay verdict: {v.status.value} ({v.reason})\n"
            f"  far value h({trace.far_radius:.6g}) = {trace.far_value:.6g}, outer radius {trace.outer_radii[-1]:.6g}")
    _emit({"verdict": v, "trace": trace.to_dict()}, args.json, text)
    return EXIT_OK


def _cmd_heat(args) -> int:
    M = _model_from_args(args)
    tol = _tolerances(args)
    dump = {} if args.dump_profiles else None
    v = _heat(M, {"R": args.R, "times": args.t}, tol, dump, "heat")
    if dump:
        out = Path(args.dump_profiles)
        out.mkdir(parents=True, exist_ok=True)
        for k, txt in dump.items():
            (out / k).write_text(txt, encoding="utf-8")
    lines = [f"model: {M.label} (m={M.dim})", f"  feller probe: {v.status.value} ({v.reason})"]
    for pt in v.evidence["per_time"]:
        lines.append(f"    t={pt['evidence']['t']:g}: {pt['status']}")
    _emit(v, args.json, "\n".join(lines))
    return EXIT_OK


def _cmd_compare(args) -> int:
    out: dict = {}
    try:
        if args.mode == "sec":
            out["feller"] = feller_by_sec_comparison(args.G, args.dim)
        elif args.mode == "ric":
            out["feller"] = non_feller_by_ric_comparison(args.G, args.dim)
        elif args.mode == "hsu":
            out["feller"] = hsu_criterion(args.G)
        else:
            M, diag = hsu_sharpness_model(args.G, args.beta, args.dim)
            out["sharpness"] = diag
            out["feller"] = classify(M).feller
    except ComparisonError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_ROUTE
    _emit(out, args.json, f"{args.mode} comparison with G = {args.G}: {out['feller'].status.value} "
                          f"({out['feller'].reason})")
    return EXIT_OK


def _cmd_ends(args) -> int:
    W = WarpedLine.parse(args.f, args.dim, args.tail_pos, args.tail_neg)
    rep = classify_warped_line(W, tuple(args.window), _tolerances(args).integral)
    text = "\n".join([f"warped line f = {args.f} (m={args.dim})"]
                     + [f"  end{i + 1}: {e.feller.status.value}" for i, e in enumerate(rep.ends)]
                     + [f"  overall: {rep.feller.status.value} ({rep.feller.reason})"])
    _emit(rep.to_dict(), args.json, text)
    return EXIT_OK


def _cmd_iso(args) -> int:
    P = FaberKrahnProfile.from_function(args.Lambda, args.s_max)
    T = math.inf if args.T is None else args.T
    v = feller_from_faber_krahn(P, T)
    out = {"feller": v}
    lines = [f"Faber-Krahn profile Lambda(s) = {args.Lambda}: {v.status.value} ({v.reason})"]
    if P.admissible:
        out["volume_function"] = [[t, v_from_lambda(P, t)] for t in args.t]
        lines += [f"  V({t:g}) = {V:.12g}" for t, V in out["volume_function"]]
    _emit(out, args.json, "\n".join(lines))
    return EXIT_OK


def _cmd_run(args) -> int:
    target = args.scenario
    if not Path(target).exists():
        target = preset_path(target)
    rep = run_scenario(target, _tolerances(args), args.dump_profiles)
    if args.json:
        sys.stdout.write(rep.to_json())
    else:
        lines = [f"scenario: {rep.scenario.get('name', target)} ({rep.scenario['kind']})"]
        for prop in sorted(rep.matrix):
            cells = ", ".join(f"{r}={s}" for r, s in sorted(rep.matrix[prop].items()))
            lines.append(f"  {prop:28s} {cells}")
        for name, err in sorted(rep.errors.items()):
            lines.append(f"  route {name} failed: {err}")
        for c in rep.conflicts:
            lines.append(f"  CONFLICT on {c['property']}: {c['routes'][0]}={c['verdicts'][0]} vs "
                         f"{c['routes'][1]}={c['verdicts'][1]}")
        if OPEN_PROBLEM_TAG in rep.scenario.get("tags", []):
            lines.append(f"  [{OPEN_PROBLEM_TAG}]")
        sys.stdout.write("\n".join(lines) + "\n")
    return rep.exit_code


def _cmd_presets(args) -> int:
    cat = list_presets()
    text = "\n".join(f"{p['name']:28s} {p['kind']:16s} {p['anchor']}" + (f"  [{', '.join(p['tags'])}]" if p["tags"] else "")
                     for p in cat)
    _emit(cat, args.json, text)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--tol-exterior", type=float, help="exhaustion stopping tolerance")
    p.add_argument("--tol-heat", type=float, help="relative time-stepping tolerance")
    p.add_argument("--tol-margin", type=float, help="ratio-test margin for integral classification")
    p.add_argument("--max-radius", type=float, help="cap on the exhaustion radius")
    p.add_argument("--seed", type=int, default=None, help="reserved; the core is deterministic")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", "-m", type=int, required=True)
    p.add_argument("--g", required=True, help="warping body, formula in r")
    p.add_argument("--tail", help="tail formula in r")
    p.add_argument("--blend", type=float, nargs=2, metavar=("A", "B"), help="blend window")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fellerlab", description="Parabolicity, stochastic completeness and the "
                                 "Feller property of rotationally symmetric manifolds.")
    ap.add_argument("--version", action="version", version=f"fellerlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="integral criteria for a model manifold")
    _add_model(p)
    _add_common(p)
    p.set_defaults(fn=_cmd_classify)

    p = sub.add_parser("exterior", help="minimal exterior solution by exhaustion")
    _add_model(p)
    p.add_argument("--R0", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--report-radius", type=float)
    p.add_argument("--dump-profiles", metavar="DIR")
    _add_common(p)
    p.set_defaults(fn=_cmd_exterior)

    p = sub.add_parser("heat", help="heat semigroup Feller probe")
    _add_model(p)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--t", type=float, nargs="+", default=[1.0])
    p.add_argument("--dump-profiles", metavar="DIR")
    _add_common(p)
    p.set_defaults(fn=_cmd_heat)

    p = sub.add_parser("compare", help="curvature comparison and Hsu's criterion")
    p.add_argument("mode", choices=["sec", "ric", "hsu", "sharpness"])
    p.add_argument("--G", required=True, help="curvature function, formula in r")
    p.add_argument("--dim", "-m", type=int, default=2)
    p.add_argument("--beta", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("ends", help="two-ended warped line R x_f S^{m-1}")
    p.add_argument("--f", required=True, help="formula in t")
    p.add_argument("--dim", "-m", type=int, required=True)
    p.add_argument("--tail-pos")
    p.add_argument("--tail-neg")
    p.add_argument("--window", type=float, nargs=2, default=[0.5, 1.5])
    _add_common(p)
    p.set_defaults(fn=_cmd_ends)

    p = sub.add_parser("isoperimetry", help="Faber-Krahn route")
    p.add_argument("--Lambda", required=True, help="formula in s")
    p.add_argument("--s-max", type=float, default=math.inf)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--t", type=float, nargs="+", default=[1.0])
    _add_common(p)
    p.set_defaults(fn=_cmd_iso)

    p = sub.add_parser("run", help="run a JSON scenario file or a preset name")
    p.add_argument("scenario")
    p.add_argument("--dump-profiles", metavar="DIR")
    _add_common(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("presets", help="list bundled scenarios")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_presets)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.fn(args))
    except ValidationError as e:
        sys.stderr.write(f"validation error: {e}\n")
        return EXIT_VALIDATION
    except ParseError as e:
        sys.stderr.write(f"parse error: {e}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
