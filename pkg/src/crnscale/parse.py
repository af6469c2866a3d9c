"""Reader and writer for ``.crn`` network files and ``.scale`` exponent files.

Network grammar (one statement per line, ``#`` starts a comment)::

    # crn-v1
    species M, D, RNA
    volume 1.5
    init M = 2, D = 6
    r9: 2 M -> D @ 8.30e-2
    bind: A + B <-> C @ 1, 2      # becomes bind_f and bind_r
    0 -> RNA @ 0.1

Scaling files are YAML mappings with keys ``N0``, ``alpha`` and ``beta``.
Exponents are read as exact rationals from their source text, so ``0.5``
and ``1/2`` are the same value.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import yaml

from .core import Network, Reaction, Species
from .scaling import ScalingSpec

HEADER = "# crn-v1"
_HEADER_RE = re.compile(r"^\s*#\s*crn-v(\S*)\s*$")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TERM = re.compile(r"^(?:(\d+)\s*\*?\s*)?([A-Za-z_][A-Za-z0-9_]*)$")
COEFF_LIMIT = 2**31
KEYWORDS = {"species", "volume", "init"}


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str
    severity: str = "error"

    def __str__(self):
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


class ParseError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.severity == "error"]
        super().__init__("; ".join(str(d) for d in errors) or "parse failed")


def _decode(text) -> tuple[str | None, list[ParseDiagnostic]]:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            before = bytes(text[:exc.start])
            line = before.count(b"\n") + 1
            col = exc.start - (before.rfind(b"\n") + 1) + 1
            return None, [ParseDiagnostic(line, col, "input is not valid UTF-8")]
    return text, []


class _Builder:
    def __init__(self, strict: bool):
        self.strict = strict
        self.diags: list[ParseDiagnostic] = []
        self.names: list[str] = []
        self.reactions: list[tuple[dict, dict, float, str | None]] = []
        self.labels: set[str] = set()
        self.volume: float | None = None
        self.initial: dict[str, int] | None = None
        self.init_pos: dict[str, tuple[int, int]] = {}

    def error(self, line, col, msg):
        self.diags.append(ParseDiagnostic(line, col, msg, "error"))

    def warn(self, line, col, msg):
        self.diags.append(ParseDiagnostic(line, col, msg, "warning"))

    def use_species(self, name, line, col):
        if name in self.names:
            return
        if self.strict:
            self.error(line, col, f"undeclared species {name!r}")
        else:
            self.warn(line, col, f"species {name!r} declared implicitly")
        self.names.append(name)


def parse_network_diagnostics(text, *, strict: bool = False) -> tuple[Network | None, list[ParseDiagnostic]]:
    """Parse network text, returning the network (or ``None``) and all diagnostics."""
    text, diags = _decode(text)
    if text is None:
        return None, diags
    b = _Builder(strict)
    saw_header = False
    saw_statement = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        m = _HEADER_RE.match(raw)
        if m and not saw_statement and not saw_header:
            saw_header = True
            if m.group(1) != "1":
                b.error(lineno, raw.index("crn") + 1, f"unsupported format version crn-v{m.group(1)}")
            continue
        code = raw.split("#", 1)[0]
        if not code.strip():
            continue
        saw_statement = True
        _statement(b, code, lineno)
    if not saw_header:
        b.warn(1, 1, f"missing '{HEADER}' header line")
    if any(d.severity == "error" for d in b.diags):
        return None, b.diags
    names = b.names
    index = {n: i for i, n in enumerate(names)}
    recs = []
    for lhs, rhs, rate, label in b.reactions:
        nu = [0] * len(names)
        nup = [0] * len(names)
        for n, c in lhs.items():
            nu[index[n]] = c
        for n, c in rhs.items():
            nup[index[n]] = c
        recs.append(Reaction(tuple(nu), tuple(nup), rate, label))
    initial = None
    if b.initial is not None:
        for n, pos in b.init_pos.items():
            if n not in index:
                b.error(pos[0], pos[1], f"initial value for unknown species {n!r}")
        if any(d.severity == "error" for d in b.diags):
            return None, b.diags
        initial = tuple(b.initial.get(n, 0) for n in names)
    net = Network(tuple(Species(i, n) for i, n in enumerate(names)), tuple(recs),
                  1.0 if b.volume is None else b.volume, initial)
    return net, b.diags


def parse_network(text, *, strict: bool = False) -> Network:
    net, diags = parse_network_diagnostics(text, strict=strict)
    if net is None:
        raise ParseError(diags)
    return net


def _statement(b: _Builder, code: str, lineno: int):
    stripped = code.strip()
    col0 = len(code) - len(code.lstrip()) + 1
    head = stripped.split(None, 1)[0] if stripped else ""
    rest_col = col0 + len(head)
    rest = stripped[len(head):]
    if head == "species":
        _species_line(b, rest, lineno, rest_col)
    elif head == "volume":
        if b.volume is not None:
            b.error(lineno, col0, "volume declared twice")
        v = _number(b, rest.strip(), lineno, rest_col + len(rest) - len(rest.lstrip()), "volume")
        if v is not None:
            b.volume = v
    elif head == "init":
        _init_line(b, rest, lineno, rest_col)
    else:
        _reaction_line(b, code, lineno)


def _split_items(rest: str, col: int):
    """Split on commas, yielding (stripped item, 1-based column)."""
    pos = 0
    for piece in rest.split(","):
        lead = len(piece) - len(piece.lstrip())
        yield piece.strip(), col + pos + lead
        pos += len(piece) + 1


def _species_line(b, rest, lineno, col):
    if not rest.strip():
        return
    for item, c in _split_items(rest, col):
        if not _IDENT.fullmatch(item):
            b.error(lineno, c, f"invalid species name {item!r}")
        elif item in KEYWORDS:
            b.error(lineno, c, f"{item!r} is a reserved word")
        elif item in b.names:
            b.error(lineno, c, f"species {item!r} declared twice")
        else:
            b.names.append(item)


def _init_line(b, rest, lineno, col):
    if b.initial is not None:
        b.error(lineno, col, "initial state declared twice")
        return
    b.initial = {}
    if not rest.strip():
        return
    for item, c in _split_items(rest, col):
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\d+)", item)
        if not m:
            b.error(lineno, c, f"expected 'species = count', found {item!r}")
            continue
        name, value = m.group(1), int(m.group(2))
        if name in b.initial:
            b.error(lineno, c, f"initial value for {name!r} given twice")
        elif value >= 2**63:
            b.error(lineno, c + item.index(m.group(2)), "initial count exceeds the 64-bit range")
        else:
            b.initial[name] = value
            b.init_pos[name] = (lineno, c)


def _number(b, token, lineno, col, what) -> float | None:
    try:
        v = float(token)
    except ValueError:
        b.error(lineno, col, f"expected a number for {what}, found {token!r}")
        return None
    if not math.isfinite(v) or v <= 0:
        b.error(lineno, col, f"{what} must be a positive finite number, found {token!r}")
        return None
    return v


def _reaction_line(b: _Builder, code: str, lineno: int):
    label = None
    body_start = 0
    m = re.match(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*:", code)
    if m:
        label = m.group(1)
        body_start = m.end()
        if label in b.labels or label + "_f" in b.labels:
            b.error(lineno, m.start(1) + 1, f"duplicate reaction label {label!r}")
    at = code.find("@", body_start)
    if at < 0:
        b.error(lineno, len(code.rstrip()) + 1, "expected '@ rate' after the reaction")
        return
    if code.count("@") > 1:
        b.error(lineno, code.find("@", at + 1) + 1, "unexpected second '@'")
        return
    body = code[body_start:at]
    rev = body.find("<->")
    if rev >= 0:
        arrow, arrow_len = rev, 3
    else:
        arrow, arrow_len = body.find("->"), 2
    if arrow < 0:
        b.error(lineno, body_start + 1, f"unknown statement {code.strip()!r}: expected '->' or '<->'")
        return
    if "->" in body[arrow + arrow_len:]:
        b.error(lineno, body_start + body.find("->", arrow + arrow_len) + 1, "more than one arrow")
        return
    lhs = _side(b, body[:arrow], lineno, body_start + 1)
    rhs = _side(b, body[arrow + arrow_len:], lineno, body_start + arrow + arrow_len + 1)
    rates = []
    for item, c in _split_items(code[at + 1:], at + 2):
        rates.append(_number(b, item, lineno, c, "rate constant"))
    expected = 2 if arrow_len == 3 else 1
    if len(rates) != expected:
        b.error(lineno, at + 1, f"expected {expected} rate constant(s), found {len(rates)}")
        return
    if lhs is None or rhs is None or any(r is None for r in rates):
        return
    if arrow_len == 3:
        names = (None, None) if label is None else (label + "_f", label + "_r")
        for n in names:
            if n is not None:
                if n in b.labels:
                    b.error(lineno, 1, f"duplicate reaction label {n!r}")
                b.labels.add(n)
        b.reactions.append((lhs, rhs, rates[0], names[0]))
        b.reactions.append((rhs, lhs, rates[1], names[1]))
    else:
        if label is not None:
            b.labels.add(label)
        b.reactions.append((lhs, rhs, rates[0], label))


def _side(b: _Builder, text: str, lineno: int, col: int) -> dict | None:
    if text.strip() == "0":
        return {}
    if not text.strip():
        b.error(lineno, col, "empty reaction side (write 0 for no species)")
        return None
    out: dict[str, int] = {}
    ok = True
    pos = 0
    for piece in text.split("+"):
        lead = len(piece) - len(piece.lstrip())
        term = piece.strip()
        c = col + pos + lead
        pos += len(piece) + 1
        m = _TERM.match(term)
        if not m:
            b.error(lineno, c, f"unknown token {term!r} in reaction side")
            ok = False
            continue
        coeff = int(m.group(1)) if m.group(1) else 1
        name = m.group(2)
        if coeff == 0:
            b.error(lineno, c, "coefficient must be positive")
            ok = False
            continue
        if coeff >= COEFF_LIMIT:
            b.error(lineno, c, f"coefficient {coeff} is not below 2^31")
            ok = False
            continue
        if name in KEYWORDS:
            b.error(lineno, c + term.index(name), f"{name!r} is a reserved word")
            ok = False
            continue
        b.use_species(name, lineno, c + term.index(name))
        out[name] = out.get(name, 0) + coeff
        if out[name] >= COEFF_LIMIT:
            b.error(lineno, c, f"combined coefficient for {name!r} is not below 2^31")
            ok = False
    return out if ok else None


def format_number(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _format_side(names, coeffs) -> str:
    terms = []
    for n, c in zip(names, coeffs):
        if c:
            terms.append(n if c == 1 else f"{c} {n}")
    return " + ".join(terms) if terms else "0"


def format_network(network: Network) -> str:
    names = network.names
    lines = [HEADER, "species " + ", ".join(names) if names else "species"]
    if network.volume != 1.0:
        lines.append(f"volume {format_number(network.volume)}")
    if network.initial is not None:
        items = [f"{n} = {v}" for n, v in zip(names, network.initial)]
        lines.append("init " + ", ".join(items) if items else "init")
    for r in network.reactions:
        prefix = f"{r.label}: " if r.label else ""
        lines.append(f"{prefix}{_format_side(names, r.nu)} -> {_format_side(names, r.nu_prime)}"
                     f" @ {format_number(r.rate_const)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- scaling files


def _mark(node) -> tuple[int, int]:
    return node.start_mark.line + 1, node.start_mark.column + 1


def _rational(node, diags, what) -> Fraction | None:
    if not isinstance(node, yaml.ScalarNode):
        diags.append(ParseDiagnostic(*_mark(node), f"{what} must be a number"))
        return None
    try:
        return Fraction(node.value.strip())
    except (ValueError, ZeroDivisionError):
        diags.append(ParseDiagnostic(*_mark(node), f"{what}: cannot read {node.value!r} as a rational"))
        return None


def parse_scaling_diagnostics(text, network: Network) -> tuple[ScalingSpec | None, list[ParseDiagnostic]]:
    text, diags = _decode(text)
    if text is None:
        return None, diags
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.strip():
            m = _HEADER_RE.match(raw)
            if m and m.group(1) != "1":
                diags.append(ParseDiagnostic(lineno, 1, f"unsupported format version crn-v{m.group(1)}"))
                return None, diags
            break
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None) or getattr(exc, "context_mark", None)
        line, col = (mark.line + 1, mark.column + 1) if mark else (1, 1)
        problem = getattr(exc, "problem", None) or str(exc)
        return None, diags + [ParseDiagnostic(line, col, f"malformed scaling file: {problem}")]
    if root is None or not isinstance(root, yaml.MappingNode):
        where = _mark(root) if root is not None else (1, 1)
        return None, diags + [ParseDiagnostic(*where, "scaling file must be a mapping with N0, alpha, beta")]

    N0 = None
    alpha = [Fraction(0)] * network.n_species
    beta = [Fraction(0)] * network.n_reactions
    seen = set()
    for knode, vnode in root.value:
        key = knode.value if isinstance(knode, yaml.ScalarNode) else None
        if key in seen:
            diags.append(ParseDiagnostic(*_mark(knode), f"duplicate key {key!r}"))
            continue
        seen.add(key)
        if key == "N0":
            if not isinstance(vnode, yaml.ScalarNode):
                diags.append(ParseDiagnostic(*_mark(vnode), "N0 must be a number"))
                continue
            try:
                N0 = float(vnode.value)
            except ValueError:
                diags.append(ParseDiagnostic(*_mark(vnode), f"N0: cannot read {vnode.value!r} as a number"))
                continue
            if not (math.isfinite(N0) and N0 > 1):
                diags.append(ParseDiagnostic(*_mark(vnode), "N0 must be a finite number greater than 1"))
                N0 = None
        elif key in ("alpha", "beta"):
            if isinstance(vnode, yaml.ScalarNode) and vnode.value in ("", "~", "null"):
                continue
            if not isinstance(vnode, yaml.MappingNode):
                diags.append(ParseDiagnostic(*_mark(vnode), f"{key} must be a mapping"))
                continue
            _exponent_map(key, vnode, network, alpha if key == "alpha" else beta, diags)
        else:
            diags.append(ParseDiagnostic(*_mark(knode), f"unknown key {key!r} (expected N0, alpha, beta)"))
    if "N0" not in seen:
        diags.append(ParseDiagnostic(1, 1, "missing required key N0"))
    if any(d.severity == "error" for d in diags) or N0 is None:
        return None, diags
    return ScalingSpec(network, N0, tuple(alpha), tuple(beta)), diags


def _exponent_map(key, node, network, target, diags):
    seen = set()
    for knode, vnode in node.value:
        if not isinstance(knode, yaml.ScalarNode):
            diags.append(ParseDiagnostic(*_mark(knode), f"{key} keys must be names"))
            continue
        name = knode.value
        if key == "alpha":
            try:
                idx = network.species_index(name)
            except KeyError:
                diags.append(ParseDiagnostic(*_mark(knode), f"unknown species {name!r} in alpha"))
                continue
        else:
            try:
                idx = network.reaction_index(name)
            except (KeyError, ValueError):
                diags.append(ParseDiagnostic(*_mark(knode), f"unknown reaction {name!r} in beta"))
                continue
        if idx in seen:
            diags.append(ParseDiagnostic(*_mark(knode), f"{key} entry for {name!r} given twice"))
            continue
        seen.add(idx)
        v = _rational(vnode, diags, f"{key}[{name}]")
        if v is None:
            continue
        if key == "alpha" and v < 0:
            diags.append(ParseDiagnostic(*_mark(vnode), f"alpha[{name}] must be nonnegative"))
            continue
        target[idx] = v


def parse_scaling(text, network: Network) -> ScalingSpec:
    spec, diags = parse_scaling_diagnostics(text, network)
    if spec is None:
        raise ParseError(diags)
    return spec


def format_scaling(spec: ScalingSpec) -> str:
    net = spec.network
    lines = [HEADER, f"N0: {format_number(spec.N0)}", "alpha:"]
    for s, a in zip(net.species, spec.alpha):
        lines.append(f"  {s.name}: {a}")
    lines.append("beta:")
    for k, b in enumerate(spec.beta):
        key = net.reactions[k].label or str(k + 1)
        lines.append(f"  {key}: {b}")
    return "\n".join(lines) + "\n"
