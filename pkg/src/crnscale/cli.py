"""Command-line front end: ``crnscale <command> ...``.

Exit status is 0 on success, 1 when the inputs produce diagnostics (parse
errors, unresolved reductions, failed runs) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import re
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import gallery
from .core import classical_ode_rhs, validate
from .parse import ParseError, parse_network_diagnostics, parse_scaling_diagnostics
from .reduce import (RECIPES, LimitModel, ReductionError, VariableKind, format_reduced, normalized_initial,
                     parse_reduced, reduce_network, to_hybrid)
from .report import report_table, report_to_dict, timescales_table
from .scaling import verify_all_balance
from .sim import (DEFAULT_EVENT_CAP, HybridControls, HybridProcess, LinearPredicate, OdeControls, OdeProcess,
                  ScaledProcess, SSAProcess, compare_models, hitting_table, run_ensemble)
from .sim.export import (dumps, ensemble_summary, sha256_file, write_ensemble_csv, write_hitting_csv,
                         write_json, write_trajectories_csv)

VERSION = "0.1.0"


class CliError(Exception):
    """Reported on stderr; exit status 1."""


# ------------------------------------------------------------------ helpers

def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return v


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _print_diags(path, diags):
    for d in diags:
        print(f"{path}:{d.line}:{d.column}: {d.severity}: {d.message}", file=sys.stderr)


def _load_network(path: str, strict: bool = False):
    text = Path(path).read_text(encoding="utf-8")
    net, diags = parse_network_diagnostics(text, strict=strict)
    _print_diags(path, diags)
    if net is None:
        raise CliError(f"{path}: could not parse the network")
    return net


def _load_spec(net, path: str):
    text = Path(path).read_text(encoding="utf-8")
    spec, diags = parse_scaling_diagnostics(text, net)
    _print_diags(path, diags)
    if spec is None:
        raise CliError(f"{path}: could not parse the scaling")
    return spec


def _is_reduced(path: str) -> bool:
    return "#@ reduced-model" in Path(path).read_text(encoding="utf-8")


_TERM = re.compile(r"\s*([+-])?\s*(?:(\d+(?:\.\d*)?)\s*\*?\s*)?([A-Za-z_][A-Za-z0-9_]*)\s*")
_PRED = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*:(.*?)(==|<=|>=|<|>)\s*([-+0-9.eE]+)\s*$")


def parse_predicate_text(text: str) -> tuple[str, dict[str, float], str, float]:
    """``name: 2*A + B <= 3`` -> (name, {A: 2, B: 1}, '<=', 3.0)."""
    m = _PRED.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad predicate {text!r}; expected NAME: EXPR OP VALUE")
    name, expr, op, value = m.groups()
    terms: dict[str, float] = {}
    pos = 0
    expr = expr.strip()
    while pos < len(expr):
        t = _TERM.match(expr, pos)
        if not t or t.end() == pos:
            raise argparse.ArgumentTypeError(f"bad expression {expr!r} in predicate {name!r}")
        sign, coef, var = t.groups()
        c = float(coef) if coef else 1.0
        terms[var] = terms.get(var, 0.0) + (-c if sign == "-" else c)
        pos = t.end()
    if not terms:
        raise argparse.ArgumentTypeError(f"empty expression in predicate {name!r}")
    return name, terms, op, float(value)


def _parse_aux(items) -> dict[str, dict[str, int]]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise CliError(f"bad --aux {item!r}; expected NAME=COMBINATION")
        name, combo = item.split("=", 1)
        terms = {}
        for part in combo.split("+"):
            m = re.fullmatch(r"\s*(\d+)?\s*\*?\s*([A-Za-z_][A-Za-z0-9_]*)\s*", part)
            if not m:
                raise CliError(f"bad term {part!r} in --aux {item!r}")
            terms[m.group(2)] = terms.get(m.group(2), 0) + int(m.group(1) or 1)
        out[name.strip()] = terms
    return out


def _aux_vectors(net, aux) -> dict[str, tuple[int, ...]]:
    out = {}
    for name, terms in aux.items():
        theta = [0] * net.n_species
        for s, c in terms.items():
            if s not in net.names:
                raise CliError(f"unknown species {s!r} in auxiliary {name!r}")
            theta[net.species_index(s)] += c
        out[name] = tuple(theta)
    return out


def _grid(t_end: float, n: int) -> np.ndarray:
    return np.linspace(0.0, t_end, n)


def _progress(label: str):
    step = {"next": 0}

    def report(done, total):
        pct = 100 * done // total
        if pct >= step["next"] or done == total:
            print(f"{label}: {done}/{total} replicates", file=sys.stderr)
            step["next"] = pct + 10
    return report


def _manifest(args, inputs: list[str], extra: dict | None = None) -> dict:
    config = {k: (str(v) if isinstance(v, (Fraction, Path)) else v) for k, v in sorted(vars(args).items())
              if k != "func"}
    out = {
        "tool": "crnscale",
        "version": VERSION,
        "command": args.command,
        "config": config,
        "inputs": {p: sha256_file(p) for p in inputs},
    }
    if extra:
        out.update(extra)
    return out


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


# ------------------------------------------------------------------ commands

def cmd_validate(args) -> int:
    net = _load_network(args.network, strict=args.strict)
    text = Path(args.network).read_text(encoding="utf-8")
    _, parse_diags = parse_network_diagnostics(text, strict=args.strict)
    diags = validate(net)
    for d in diags:
        where = ""
        if d.reaction is not None and "reaction" not in d.message:
            where = f" (reaction {net.reaction_name(d.reaction)})"
        print(f"{args.network}: {d.severity}: {d.message}{where}", file=sys.stderr)
    problems = [d for d in list(parse_diags) + list(diags)
                if d.severity == "error" or (args.strict and d.severity == "warning")]
    print(f"{args.network}: {net.n_species} species, {net.n_reactions} reactions, "
          f"{len(parse_diags) + len(diags)} diagnostics")
    return 1 if problems else 0


def cmd_analyze(args) -> int:
    net = _load_network(args.network)
    spec = _load_spec(net, args.scale)
    gammas = args.gamma or [Fraction(0)]
    reports = [verify_all_balance(spec, g) for g in gammas]
    out = _out_dir(args)
    if args.format == "report":
        payload = [report_to_dict(r) for r in reports]
        text = dumps(payload if len(payload) > 1 else payload[0])
    else:
        text = "\n".join(report_table(r) for r in reports)
    if out:
        write_json([report_to_dict(r) for r in reports], out / "report.json")
        (out / "report.txt").write_text("\n".join(report_table(r) for r in reports))
        write_json(_manifest(args, [args.network, args.scale]), out / "manifest.json")
        print(f"wrote {out / 'report.json'} and {out / 'report.txt'}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def cmd_timescales(args) -> int:
    net = _load_network(args.network)
    spec = _load_spec(net, args.scale)
    report = verify_all_balance(spec, args.gamma or 0)
    if args.format == "report":
        d = report_to_dict(report)
        keys = ("natural_timescales", "r1", "r2", "max_admissible_gamma", "k2_generators")
        sys.stdout.write(dumps({k: d[k] for k in keys}))
    else:
        sys.stdout.write(timescales_table(report))
    return 0


def _build_reduced(args, net, spec) -> LimitModel:
    aux = _aux_vectors(net, _parse_aux(args.aux))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = reduce_network(spec, args.gamma or 0, aux or None, args.recipe)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return model


def cmd_reduce(args) -> int:
    net = _load_network(args.network)
    spec = _load_spec(net, args.scale)
    model = _build_reduced(args, net, spec)
    text = format_reduced(model)
    out = _out_dir(args)
    if out:
        (out / "reduced.crn").write_text(text)
        write_json(_manifest(args, [args.network, args.scale]), out / "manifest.json")
        print(f"wrote {out / 'reduced.crn'}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    for msg in model.unresolved:
        print(f"unresolved: {msg}", file=sys.stderr)
    return 0 if model.closed else 1


def _predicates(process, texts):
    preds = []
    for text in texts or ():
        name, terms, op, value = parse_predicate_text(text)
        unknown = [t for t in terms if t not in process.names]
        if unknown:
            raise CliError(f"predicate {name!r} uses unknown variables {unknown}")
        preds.append(process.predicate(name, terms, op, value))
    return preds


def _process_for(args):
    """Return (process, inputs, description) for the simulate command."""
    inputs = [args.model] + ([args.scale] if args.scale else [])
    ode = OdeControls(method=args.ode_method, rtol=args.rtol, atol=args.atol)
    if _is_reduced(args.model):
        if args.scale:
            raise CliError("a reduced model carries its own scaling; drop the scale argument")
        model = parse_reduced(Path(args.model).read_text(encoding="utf-8"))
        return _limit_process(args, model, ode), inputs, f"reduced model at gamma = {model.gamma}"
    net = _load_network(args.model)
    spec = _load_spec(net, args.scale) if args.scale else None
    if args.method == "ssa":
        if spec is not None and args.n is not None:
            return ScaledProcess(spec, args.gamma or 0, args.n), inputs, f"scaled process at N = {args.n:g}"
        if net.initial is None:
            raise CliError("the network has no init line; cannot choose a starting state")
        return SSAProcess(net), inputs, "full network"
    if args.method == "ode":
        if spec is not None:
            if any(a != 1 for a in spec.alpha):
                raise CliError("rate equations need every species abundant (alpha = 1); "
                               "reduce the network and simulate the limit model instead")
            kappa = spec.kappa
            y0 = normalized_initial(spec)
        else:
            kappa = net.effective_rates()
            y0 = [float(v) for v in (net.initial or [0] * net.n_species)]
        rhs = lambda t, y: classical_ode_rhs(net, y, kappa)  # noqa: E731
        return OdeProcess(rhs, net.names, y0, ode), inputs, "mass-action rate equations"
    if spec is None:
        raise CliError("hybrid simulation of a network needs a scaling file and --gamma")
    model = _build_reduced(args, net, spec)
    return _limit_process(args, model, ode), inputs, f"limit model at gamma = {model.gamma}"


def _limit_process(args, model: LimitModel, ode: OdeControls):
    if not model.closed:
        raise CliError("limit model is not closed: " + "; ".join(model.unresolved))
    # report limit-model time in the original network's units
    hybrid = to_hybrid(model, time_scale=model.spec.N0 ** float(model.gamma))
    if args.method == "ode" and hybrid.discrete:
        raise CliError("the model has jump variables; use --method hybrid")
    if args.method == "ssa":
        raise CliError("a limit model is simulated with --method hybrid (or ode when it has no jumps)")
    return HybridProcess(hybrid, HybridControls(ode=ode, event_cap=args.event_cap))


def cmd_simulate(args) -> int:
    process, inputs, what = _process_for(args)
    preds = _predicates(process, args.hit)
    grid = _grid(args.t_end, args.grid)
    print(f"simulating {what}: {args.replicates} replicates to t = {args.t_end:g}", file=sys.stderr)
    stats = run_ensemble(process, args.replicates, args.seed, args.t_end, grid, predicates=preds,
                         stop_on_hit=args.stop_on_hit, threads=args.threads, keep_trajectories=True,
                         progress=_progress("simulate"), event_cap=args.event_cap)
    out = _out_dir(args)
    summary = ensemble_summary(stats)
    if out:
        write_trajectories_csv(stats.trajectories, out / "trajectories.csv")
        write_ensemble_csv(stats, out / "ensemble.csv")
        write_hitting_csv(stats, out)
        write_json(summary, out / "summary.json")
        write_json(_manifest(args, inputs, {"process": what}), out / "manifest.json")
        print(f"wrote results to {out}", file=sys.stderr)
    elif args.format == "report":
        sys.stdout.write(dumps(summary))
    else:
        write_trajectories_csv(stats.trajectories, sys.stdout)
    return 0


def _num(v) -> str:
    v = float(v)
    if v != v:
        return "nan"
    return repr(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)


def cmd_compare(args) -> int:
    net = _load_network(args.network)
    spec = _load_spec(net, args.scale)
    if net.initial is None:
        raise CliError("the network has no init line")
    model = _build_reduced(args, net, spec)
    if not model.closed:
        raise CliError("limit model is not closed: " + "; ".join(model.unresolved))
    gamma = model.gamma
    factor = spec.N0 ** float(gamma)
    live = [v for v in model.variables if v.kind is not VariableKind.ELIMINATED]
    # full-model observables: each retained variable's leading block, in counts
    full_obs = {}
    for v in live:
        full_obs[v.name] = {net.names[i]: float(t) for i, t in enumerate(v.theta)
                            if t and spec.alpha[i] == v.alpha}
    full = SSAProcess(net)
    ode = OdeControls(method=args.ode_method, rtol=args.rtol, atol=args.atol)
    reduced = HybridProcess(to_hybrid(model), HybridControls(ode=ode, event_cap=args.event_cap))
    full_preds, red_preds = [], []
    for text in args.hit or ():
        name, terms, op, value = parse_predicate_text(text)
        counts: dict[str, float] = {}
        for var, c in terms.items():
            if var not in full_obs:
                raise CliError(f"predicate {name!r}: {var!r} is not a retained variable")
            for s, w in full_obs[var].items():
                counts[s] = counts.get(s, 0.0) + c * w
            scale = spec.N0 ** float(model.variable(var).alpha)
            if scale != 1.0:
                raise CliError(f"predicate {name!r}: only counted (alpha = 0) variables are supported")
        full_preds.append(LinearPredicate.on(net.names, name, counts, op, value))
        red_preds.append(reduced.predicate(name, terms, op, value))
    grid = _grid(args.t_end, args.grid)
    print(f"full model: {args.replicates} replicates", file=sys.stderr)
    fs = run_ensemble(full, args.replicates, args.seed, args.t_end, grid, observables=full_obs,
                      predicates=full_preds, stop_on_hit=args.stop_on_hit, threads=args.threads,
                      progress=_progress("full"),
                      event_cap=args.event_cap)
    n_red = args.reduced_replicates or args.replicates
    print(f"reduced model: {n_red} replicates", file=sys.stderr)
    rs = run_ensemble(reduced, n_red, args.seed, args.t_end / factor, grid / factor,
                      observables=[v.name for v in live if v.name in reduced.names],
                      predicates=red_preds, stop_on_hit=args.stop_on_hit, threads=args.threads,
                      progress=_progress("reduced"))
    alphas = {v.name: v.alpha for v in live}
    cmp = compare_models(fs, rs, spec.N0, gamma, alphas)
    payload = {
        "gamma": str(gamma),
        "time_factor": cmp.time_factor,
        "observables": {name: {"max_abs_difference": cmp.max_abs_difference(name),
                               "bands_overlap_fraction": float(np.mean(o.bands_overlap))}
                        for name, o in cmp.observables.items()},
        "hitting": {name: vars(h) for name, h in cmp.hitting.items()},
    }
    out = _out_dir(args)
    if out:
        write_ensemble_csv(fs, out / "full.csv")
        write_ensemble_csv(rs, out / "reduced.csv")
        write_hitting_csv(fs, out)
        for name, samples in rs.hitting.items():
            (out / f"hitting_{name}_reduced.csv").write_text(
                name + "\n" + "".join(_num(s * factor) + "\n" for s in samples))
        write_json(payload, out / "comparison.json")
        (out / "reduced.crn").write_text(format_reduced(model))
        write_json(_manifest(args, [args.network, args.scale]), out / "manifest.json")
        print(f"wrote results to {out}", file=sys.stderr)
    if args.format == "report":
        sys.stdout.write(dumps(payload))
    else:
        sys.stdout.write(hitting_table(cmp) if cmp.hitting else "")
        for name, o in payload["observables"].items():
            sys.stdout.write(f"{name}: max |full - reduced| = {o['max_abs_difference']:.6g}, "
                             f"std bands overlap at {100 * o['bands_overlap_fraction']:.0f}% of grid times\n")
    return 0


def cmd_examples(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    for name in gallery.FILES:
        (out / name).write_text(gallery.read_text(name))
        print(out / name)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crnscale", description="Multiscale analysis and simulation of "
                                "stochastic reaction networks.")
    p.add_argument("--version", action="version", version=f"crnscale {VERSION}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp, scale=True, scale_optional=False):
        if scale:
            sp.add_argument("scale", nargs="?" if scale_optional else None, help="scaling file (.scale)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--format", choices=("csv", "report"), default="csv",
                        help="csv/plain tables or a JSON report")

    def sim_flags(sp):
        sp.add_argument("--seed", type=_u64, default=0)
        sp.add_argument("--replicates", type=_positive_int, default=1)
        sp.add_argument("--t-end", type=_positive_float, required=True)
        sp.add_argument("--grid", type=_positive_int, default=101, help="number of sample times")
        sp.add_argument("--threads", type=_positive_int, default=1)
        sp.add_argument("--event-cap", type=_positive_int, default=DEFAULT_EVENT_CAP)
        sp.add_argument("--hit", action="append", metavar="NAME:EXPR OP VALUE",
                        help="hitting-time predicate, e.g. 'tau1: DNA + DNA_D == 1'")
        sp.add_argument("--stop-on-hit", action="store_true",
                        help="end each replicate once every predicate has held")
        sp.add_argument("--ode-method", choices=("RK45", "DOP853", "RK23"), default="RK45")
        sp.add_argument("--rtol", type=_positive_float, default=1e-8)
        sp.add_argument("--atol", type=_positive_float, default=1e-10)

    def reduce_flags(sp):
        sp.add_argument("--aux", action="append", metavar="NAME=COMBINATION",
                        help="auxiliary variable, e.g. 'Z45=DNA+DNA_D'")
        sp.add_argument("--recipe", choices=RECIPES, default="none",
                        help="source of averaged intensities")

    sp = sub.add_parser("validate", help="parse a network and report diagnostics")
    sp.add_argument("network")
    sp.add_argument("--strict", action="store_true", help="treat warnings as errors")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("analyze", help="balance conditions for one or more time scales")
    sp.add_argument("network")
    common(sp)
    sp.add_argument("--gamma", type=_rational, action="append", help="time scale (repeatable)")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("timescales", help="natural time scales, r1, r2 and the admissible bound")
    sp.add_argument("network")
    common(sp)
    sp.add_argument("--gamma", type=_rational)
    sp.set_defaults(func=cmd_timescales)

    sp = sub.add_parser("reduce", help="emit the limit model at a time scale")
    sp.add_argument("network")
    common(sp)
    sp.add_argument("--gamma", type=_rational, required=True)
    reduce_flags(sp)
    sp.set_defaults(func=cmd_reduce)

    sp = sub.add_parser("simulate", help="simulate a network or an emitted limit model")
    sp.add_argument("model", help="network file or reduced model file")
    common(sp, scale_optional=True)
    sp.add_argument("--method", choices=("ssa", "hybrid", "ode"), default="ssa")
    sp.add_argument("--gamma", type=_rational)
    sp.add_argument("--n", type=_positive_float, help="scaling parameter N for the scaled process")
    sim_flags(sp)
    reduce_flags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="full network against its limit model")
    sp.add_argument("network")
    common(sp)
    sp.add_argument("--gamma", type=_rational, required=True)
    sp.add_argument("--reduced-replicates", type=_positive_int)
    sim_flags(sp)
    reduce_flags(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("examples", help="write the built-in example files")
    sp.add_argument("--out", help="target directory (default: current)")
    sp.set_defaults(func=cmd_examples)
    return p


_NEGATIVE_RATIONAL = re.compile(r"^-\d+/\d+$")


def _attach_negative_rationals(argv):
    """Rewrite ``--flag -3/2`` as ``--flag=-3/2``; argparse would read the value as a flag."""
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE_RATIONAL.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_attach_negative_rationals(sys.argv[1:] if argv is None else list(argv)))
    try:
        return args.func(args)
    except (CliError, ParseError, ReductionError, ValueError, OSError) as exc:
        print(f"crnscale {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except argparse.ArgumentTypeError as exc:
        print(f"crnscale {args.command}: usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
