"""Balance reports as deterministic JSON and as plain-text tables."""

from __future__ import annotations

from fractions import Fraction

from .exact import dot
from .scaling import BalanceReport, ScalingSpec, Verdict


def fmt_value(v) -> str:
    """Exact rendering: integers plainly, other rationals as p/q, infinities as +inf/-inf."""
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        if v == float("inf"):
            return "+inf"
        if v == float("-inf"):
            return "-inf"
        return repr(v)
    return str(v)


def _sides(spec: ScalingSpec, theta) -> tuple[list[int], list[int]]:
    plus, minus = [], []
    for k, r in enumerate(spec.network.reactions):
        d = dot(theta, r.zeta)
        if d > 0:
            plus.append(k)
        elif d < 0:
            minus.append(k)
    return plus, minus


def _combo(spec: ScalingSpec, theta) -> str:
    parts = []
    for i, t in enumerate(theta):
        if t:
            t = Fraction(t)
            parts.append(("" if t == 1 else fmt_value(t) + " ") + spec.network.species[i].name)
    return " + ".join(parts)


def _row(spec: ScalingSpec, theta, verdict: Verdict | None) -> dict:
    plus, minus = _sides(spec, theta)
    names = spec.network.reaction_name
    row = {
        "combination": _combo(spec, theta),
        "theta": [fmt_value(Fraction(t)) for t in theta],
        "producing": [names(k) for k in plus],
        "consuming": [names(k) for k in minus],
    }
    if verdict is None:
        row.update(status="unchanged", max_plus="-inf", max_minus="-inf", timescale="+inf")
    else:
        row.update(status=verdict.status.value, max_plus=fmt_value(verdict.max_plus),
                   max_minus=fmt_value(verdict.max_minus), timescale=fmt_value(verdict.bound))
    return row


def report_to_dict(report: BalanceReport) -> dict:
    spec = report.spec
    net = spec.network
    unit = lambda i: tuple(int(j == i) for j in range(net.n_species))  # noqa: E731
    return {
        "gamma": fmt_value(report.gamma),
        "N0": fmt_value(spec.N0),
        "alpha": {s.name: fmt_value(a) for s, a in zip(net.species, spec.alpha)},
        "beta": {net.reaction_name(k): fmt_value(b) for k, b in enumerate(spec.beta)},
        "rho": {net.reaction_name(k): fmt_value(r) for k, r in enumerate(spec.rho)},
        "kappa": {net.reaction_name(k): fmt_value(float(c)) for k, c in enumerate(spec.kappa)},
        "species": [_row(spec, unit(i), v) for i, v in enumerate(report.species_verdicts)],
        "classes": [dict(_row(spec, cv.sign_class.witness, cv.verdict), component=cv.scc)
                    for cv in report.class_verdicts],
        "components": [[net.species[i].name for i in c] for c in report.sccs],
        "natural_timescales": {s.name: fmt_value(g) for s, g in zip(net.species, report.natural_timescales)},
        "r1": fmt_value(report.r1),
        "r2": fmt_value(report.r2),
        "k2_generators": [_combo(spec, g) for g in report.k2_generators],
        "max_admissible_gamma": fmt_value(report.max_admissible_gamma),
        "admissible": report.admissible,
        "all_conditions_hold": report.all_conditions_hold,
        "caveats": list(report.caveats),
    }


def _equation(row: dict) -> str:
    def side(names):
        if not names:
            return "-inf"
        rho = ["rho_" + n for n in names]
        return rho[0] if len(rho) == 1 else "max(" + ", ".join(rho) + ")"
    return f"{side(row['producing'])} = {side(row['consuming'])}"


def report_table(report: BalanceReport) -> str:
    """One line per species and per sign class: balance equation, values, verdict."""
    d = report_to_dict(report)
    rows = [(r["combination"], _equation(r), f"{r['max_plus']} vs {r['max_minus']}", r["status"], r["timescale"])
            for r in d["species"] + d["classes"]]
    header = ("combination", "balance equation", "values", "status", "time scale")
    widths = [max(len(h), *(len(r[j]) for r in rows)) for j, h in enumerate(header)]
    lines = [f"balance at gamma = {d['gamma']}", ""]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    lines.append("")
    lines.append(f"all balance conditions hold: {'yes' if d['all_conditions_hold'] else 'no'}")
    lines.append(f"max admissible gamma: {d['max_admissible_gamma']}")
    lines.append(f"r1 = {d['r1']}, r2 = {d['r2']}")
    for c in d["caveats"]:
        lines.append(f"note: {c}")
    return "\n".join(lines) + "\n"


def timescales_table(report: BalanceReport) -> str:
    d = report_to_dict(report)
    width = max(len("species"), *(len(n) for n in d["natural_timescales"]))
    lines = [f"{'species'.ljust(width)}  time scale"]
    for name, g in d["natural_timescales"].items():
        lines.append(f"{name.ljust(width)}  {g}")
    lines.append("")
    lines.append(f"r1 = {d['r1']}")
    lines.append(f"r2 = {d['r2']}")
    lines.append(f"max admissible gamma = {d['max_admissible_gamma']}")
    lines.append("invariant cone generators: " + ("; ".join(d["k2_generators"]) or "none"))
    return "\n".join(lines) + "\n"


__all__ = ["fmt_value", "report_table", "report_to_dict", "timescales_table"]
