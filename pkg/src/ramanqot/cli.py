"""Command-line front end: ``ramanqot profile|nli|optimize|verify``.

Every run writes ``manifest.json`` into the output directory before any
result.  Settings come from, in increasing precedence, library defaults, the
scenario's ``settings`` object and command-line flags.

Exit codes: 0 ok, 1 numerical failure, 2 input error.
"""

import argparse
from dataclasses import asdict, fields, replace
from datetime import datetime, timezone
import json
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .closed import DegenerateError, coherence_factor, eta_total, nli_to_csv
from .fitting import FitError, FitOptions, effective_length_errors, fit_all, fit_to_csv, pooled_residual_db
from .identities import verify_identities
from .integral import (FittedRho, IntegralError, OdeRho, QuadratureSettings, eta_total_numeric,
                       lumped_reduction_check)
from .model import InvariantError, Span
from .pumps import PumpDesignProblem, optimize_pumps, pump_comb
from .raman import RamanSolverError, SolverSettings, profile_to_csv, solve_span
from .scenario import BUNDLED, ScenarioError, bundled_scenario, pumps_to_doc, read_scenario

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2

NUMERIC_ERRORS = (RamanSolverError, FitError, IntegralError, DegenerateError, FloatingPointError)


class InputError(ValueError):
    pass


def _scenario_path(arg):
    p = Path(arg)
    if not p.exists() and arg in BUNDLED:
        return bundled_scenario(arg)
    return p


def _apply(cls, base, section, where):
    """Override dataclass ``base`` with the keys of ``section``."""
    if not section:
        return base
    if not isinstance(section, dict):
        raise InputError(f"{where}: expected a JSON object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(section) - names)
    if unknown:
        raise InputError(f"{where}: unknown keys {unknown}; allowed {sorted(names)}")
    try:
        return replace(base, **section)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: {exc}") from None


def _settings(args, scenario_settings):
    """(SolverSettings, FitOptions, QuadratureSettings) after scenario and CLI overrides."""
    s = scenario_settings or {}
    solver = _apply(SolverSettings, SolverSettings(), s.get("solver"), "$.settings.solver")
    fit = _apply(FitOptions, FitOptions(), s.get("fit"), "$.settings.fit")
    quad = _apply(QuadratureSettings, QuadratureSettings(), s.get("quadrature"), "$.settings.quadrature")
    cli = {k: getattr(args, k, None) for k in ("rtol", "atol", "bvp_tol")}
    solver = replace(solver, **{k: v for k, v in cli.items() if v is not None})
    if getattr(args, "window", None) is not None:
        quad = replace(quad, window=args.window == "on")
    res = getattr(args, "resolution", None)
    if res is not None:
        if res < 1:
            raise InputError("--resolution must be >= 1")
        if res > 1:
            quad = quad.refined(res)
    return solver, fit, quad


def _overrides(args):
    skip = {"func", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def write_manifest(out, args, scenario):
    """RunManifest: what was run, with which settings, by which version."""
    doc = {
        "command": args.command,
        "scenario": str(scenario) if scenario else None,
        "overrides": _overrides(args),
        "out": str(out),
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, default=str) + "\n", encoding="utf-8")
    return path


def _prepare(args):
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise InputError(f"output directory {out} not writable ({exc.strerror})") from None
    scenario = _scenario_path(args.scenario) if getattr(args, "scenario", None) else None
    write_manifest(out, args, scenario)
    return out, scenario


def _distinct_spans(plan):
    """Unique span objects in first-seen order with their positions."""
    seen = {}
    for j, s in enumerate(plan.spans):
        seen.setdefault(id(s), (s, []))[1].append(j)
    return list(seen.values())


def cmd_profile(args):
    out, scenario = _prepare(args)
    plan, scen = read_scenario(scenario)
    solver, fopt, _ = _settings(args, scen)
    spans = _distinct_spans(plan)
    lines = []
    for n, (span, _) in enumerate(spans):
        tag = "" if len(spans) == 1 else f"_span{n + 1}"
        prof = solve_span(span, solver)
        fit = fit_all(prof, span, fopt)
        profile_to_csv(prof, out / f"profile{tag}.csv")
        fit_to_csv(fit, out / f"fit{tag}.csv")
        leff = effective_length_errors(fit, prof)
        lines.append(f"span{n + 1}: channels={len(fit)} max_leff_error={leff.max():.4f} "
                     f"pooled_residual_db={pooled_residual_db(fit, prof):.4f} "
                     f"max_rms_db={fit.rms_db.max():.4f} max_abs_db={fit.max_db.max():.4f} "
                     f"bvp_iterations={prof.iterations}")
    (out / "residual_summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK


def _span_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--spans expects comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise InputError("--spans needs positive span counts")
    return vals


def _epsilon(text, plan):
    if text == "auto":
        span = plan.spans[0]
        return float(np.mean(coherence_factor(span.fiber, span.channels.frequency, span.channels.bandwidth)))
    try:
        eps = float(text)
    except ValueError:
        raise InputError(f"--epsilon expects a number or 'auto', got {text!r}") from None
    if eps < 0:
        raise InputError("--epsilon must be >= 0")
    return eps


def cmd_nli(args):
    out, scenario = _prepare(args)
    plan, scen = read_scenario(scenario)
    solver, fopt, quad = _settings(args, scen)
    if args.pump_interferers:
        plan = replace(plan, pump_interferers=True)
    if args.epsilon is not None:
        plan = replace(plan, epsilon=_epsilon(args.epsilon, plan))
    method = args.method or scen.get("method", "closed")
    if method not in ("closed", "integral", "both"):
        raise InputError(f"method must be closed|integral|both, got {method!r}")
    rho_kind = args.rho or scen.get("rho", "fit")
    if rho_kind not in ("fit", "ode"):
        raise InputError(f"rho must be fit|ode, got {rho_kind!r}")
    counts = _span_list(args.spans) if args.spans else [plan.num_spans]
    # profiles and fits depend only on the span, not on how many are chained
    cache = {}

    def prepared(span):
        if id(span) not in cache:
            prof = solve_span(span, solver)
            fit = fit_all(prof, span, fopt, include_fw_pumps=plan.pump_interferers)
            src = FittedRho(fit) if rho_kind == "fit" else OdeRho(prof)
            cache[id(span)] = (fit, src)
        return cache[id(span)]

    for n in counts:
        p = plan if n == plan.num_spans else plan.with_spans(n)
        items = [prepared(s) for s in p.spans]
        res = {}
        if method in ("closed", "both"):
            res["closed"] = eta_total(p, [f for f, _ in items])
            nli_to_csv(res["closed"], out / f"nli_{n}span_closed.csv")
        if method in ("integral", "both"):
            res["integral"] = eta_total_numeric(p, [s for _, s in items], quad)
            nli_to_csv(res["integral"], out / f"nli_{n}span_integral.csv")
        if method == "both":
            delta = res["closed"].snr_db - res["integral"].snr_db
            data = np.column_stack([res["closed"].wavelength_nm, res["closed"].snr_db, res["integral"].snr_db, delta])
            np.savetxt(out / f"nli_{n}span_delta.csv", data, delimiter=",", fmt="%.10e", comments="",
                       header="wavelength_nm,snr_closed_db,snr_integral_db,delta_db")
            print(f"spans={n} max_abs_delta_db={np.max(np.abs(delta)):.4f}")
        else:
            sp = next(iter(res.values()))
            print(f"spans={n} method={method} snr_min_db={sp.snr_db.min():.3f} snr_max_db={sp.snr_db.max():.3f}")
    return EXIT_OK


def cmd_optimize(args):
    out, scenario = _prepare(args)
    plan, scen = read_scenario(scenario)
    solver, _, _ = _settings(args, scen)
    base = plan.spans[0]
    comb = pump_comb(base.channels, args.pumps, args.spacing_thz * 1e12, args.gap_thz * 1e12, args.direction)
    try:
        problem = PumpDesignProblem(comb, args.floor, p_max=args.p_max, start=args.start,
                                    restarts=args.restarts, max_evals=args.max_evals, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    pumps, rep = optimize_pumps(problem, Span(base.fiber, base.channels, type(base.pumps).empty()), solver)
    snippet = {"pumps": pumps_to_doc(pumps, si=False)}
    (out / "pumps.json").write_text(json.dumps(snippet, indent=2) + "\n", encoding="utf-8")
    report = asdict(rep)
    report["power"] = [float(v) for v in rep.power]
    report["comb_wavelength_nm"] = [float(v) for v in 299792458.0 / comb.frequency * 1e9]
    (out / "optimize_report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(f"feasible={rep.feasible} achieved_floor={rep.achieved_floor:.4f} "
          f"total_pump_power_mw={rep.total_power * 1e3:.1f} evaluations={rep.evaluations}")
    return EXIT_OK if rep.feasible else EXIT_NUMERIC


def _perturbations(items):
    out = {}
    for item in items or []:
        name, _, val = item.partition("=")
        try:
            out[name] = float(val)
        except ValueError:
            raise InputError(f"--perturb expects NAME=VALUE, got {item!r}") from None
    return out


def cmd_verify(args):
    out, _ = _prepare(args)
    rep = verify_identities(args.draws, args.seed, _perturbations(args.perturb))
    lines = rep.lines()
    lumped = lumped_reduction_check()
    bounds = {"xpm": 0.05, "spm": 0.10}
    ok = rep.ok
    for key, err in lumped.items():
        good = err <= bounds[key]
        ok &= good
        lines.append(f"{'PASS' if good else 'FAIL'} lumped_{key}: closed vs quadrature rel err {err:.2e} "
                     f"(bound {bounds[key]:.0%})")
    (out / "verify_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser():
    p = argparse.ArgumentParser(prog="ramanqot", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True,
                            help=f"scenario JSON path or bundled name ({', '.join(sorted(BUNDLED))})")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--rtol", type=float, help="solver relative tolerance")
        sp.add_argument("--atol", type=float, help="solver absolute tolerance [W]")
        sp.add_argument("--bvp-tol", type=float, dest="bvp_tol", help="BVP boundary tolerance")

    sp = sub.add_parser("profile", help="solve and fit power profiles")
    common(sp)
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("nli", help="NLI efficiency and SNR_NLI spectra")
    common(sp)
    sp.add_argument("--method", choices=("closed", "integral", "both"))
    sp.add_argument("--spans", help="comma-separated span counts, e.g. 1,3,10")
    sp.add_argument("--resolution", type=int, help="integral refinement factor (1 = default)")
    sp.add_argument("--window", choices=("on", "off"), help="rectangular window of the integral model")
    sp.add_argument("--rho", choices=("fit", "ode"), help="profile source of the integral model")
    sp.add_argument("--pump-interferers", action="store_true", dest="pump_interferers", default=None)
    sp.add_argument("--epsilon", help="SPM coherence exponent, or 'auto' for the channel-mean GN estimate")
    sp.set_defaults(func=cmd_nli)

    sp = sub.add_parser("optimize", help="minimum total pump power for a received-power floor")
    common(sp)
    sp.add_argument("--floor", type=float, required=True, help="min received fraction P(L)/P(0)")
    sp.add_argument("--pumps", type=int, default=15, help="comb size")
    sp.add_argument("--spacing-thz", type=float, default=1.0, dest="spacing_thz")
    sp.add_argument("--gap-thz", type=float, default=2.0, dest="gap_thz",
                    help="distance of the lowest-frequency pump above the highest channel")
    sp.add_argument("--direction", choices=("FW", "BW"), default="FW")
    sp.add_argument("--p-max", type=float, default=1.0, dest="p_max", help="per-pump bound [W]")
    sp.add_argument("--start", type=float, default=0.05, help="initial power per pump [W]")
    sp.add_argument("--restarts", type=int, default=2)
    sp.add_argument("--max-evals", type=int, default=2500, dest="max_evals")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("verify", help="identity suite and lumped-reduction cross-check")
    common(sp, scenario=False)
    sp.add_argument("--draws", type=int, default=100)
    sp.add_argument("--perturb", action="append", metavar="NAME=REL",
                    help="offset an identity's right-hand side (harness self-test)")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, InvariantError, InputError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
