"""Reduced models as network files with a ``#@`` annotation block.

The network and scaling are written in full, followed by the time scale,
auxiliary combinations, the averaging recipe and the classification of
every variable and term.  Reading rebuilds the model from the recipe and
checks the recorded classification against the rebuilt one, so a file
that parses is also a model that can be simulated.
"""

from __future__ import annotations

import warnings
from dataclasses import replace
from fractions import Fraction
from typing import Mapping, Sequence

from ..core import to_fraction
from ..parse import format_network, format_number, format_scaling, parse_network, parse_scaling
from ..scaling import ScalingSpec
from .averaging import averaged_limit_model
from .closed_forms import GOUTSIAS_AUX, goutsias_first_scale, goutsias_g2_model, goutsias_second_scale
from .limit import LimitModel, ReductionError, TermKind, build_limit_model

RECIPES = ("none", "generic", "goutsias")
MARK = "#@ "


class ReducedModelMismatch(ReductionError):
    pass


def reduce_network(spec: ScalingSpec, gamma, aux: Mapping[str, Sequence[int]] | None = None,
                   recipe: str = "none", z0: Sequence[float] | None = None,
                   check_admissible: bool = True) -> LimitModel:
    """Build the limit model at ``gamma`` with averaged intensities from ``recipe``.

    ``none`` leaves dependences on eliminated species unresolved, ``generic``
    averages over the counted fast block, ``goutsias`` uses the closed-form
    equilibria of the promoter network (gamma 0, 1 or 2).
    """
    gamma = to_fraction(gamma)
    if recipe == "none":
        model = build_limit_model(spec, gamma, aux, z0=z0, check_admissible=check_admissible)
    elif recipe == "generic":
        model = averaged_limit_model(spec, gamma, aux, z0=z0, check_admissible=check_admissible)
    elif recipe == "goutsias":
        if aux and dict(aux) != GOUTSIAS_AUX:
            raise ReductionError(f"the goutsias recipe fixes the auxiliary variables to {GOUTSIAS_AUX}")
        builders = {0: goutsias_first_scale, 1: goutsias_second_scale, 2: goutsias_g2_model}
        if gamma not in builders:
            raise ReductionError("the goutsias recipe covers gamma = 0, 1, 2")
        if spec.network.names != ("M", "D", "RNA", "DNA", "DNA_D", "DNA_2D"):
            raise ReductionError("the goutsias recipe needs the gallery promoter network")
        with warnings.catch_warnings():
            if not check_admissible:
                warnings.simplefilter("ignore")
            model = builders[int(gamma)](spec)
        if z0 is not None:
            raise ReductionError("the goutsias recipe takes its initial state from the network")
    else:
        raise ValueError(f"unknown recipe {recipe!r}; choose from {', '.join(RECIPES)}")
    return replace(model, recipe=recipe)


def _combination(model: LimitModel, theta) -> str:
    names = model.network.names
    return " + ".join(("" if t == 1 else f"{t} ") + names[i] for i, t in enumerate(theta) if t)


def _parse_combination(text: str, names: Sequence[str]) -> tuple[int, ...]:
    theta = [0] * len(names)
    for part in text.split("+"):
        bits = part.split()
        coef, name = (int(bits[0]), bits[1]) if len(bits) == 2 else (1, bits[0])
        theta[list(names).index(name)] += coef
    return tuple(theta)


def format_reduced(model: LimitModel) -> str:
    spec = model.spec
    net = model.network
    lines = [format_network(net).rstrip("\n"), "", MARK + "reduced-model v1"]
    for line in format_scaling(spec).splitlines():
        if line and not line.startswith("#"):
            lines.append(MARK + "scale " + line)
    lines.append(MARK + f"gamma: {model.gamma}")
    lines.append(MARK + f"recipe: {model.recipe}")
    lines.append(MARK + "z0: " + ", ".join(f"{n} = {format_number(v)}" for n, v in zip(net.names, model.z0)))
    for v in model.variables:
        if v.auxiliary:
            lines.append(MARK + f"aux: {v.name} = {_combination(model, v.theta)}")
    for v in model.variables:
        lines.append(MARK + f"variable: {v.name} {v.kind.value} alpha={v.alpha} initial={format_number(v.initial)}")
    for t in model.terms:
        if t.kind is not TermKind.VANISHING:
            lines.append(MARK + f"term: {net.reaction_name(t.reaction)} {t.variable} {t.kind.value} "
                                f"coefficient={t.coefficient} gap={t.exponent_gap}")
    for k in sorted(model.averaged):
        lines.append(MARK + f"averaged: {net.reaction_name(k)}")
    lines.append(MARK + f"closed: {'yes' if model.closed else 'no'}")
    for msg in model.unresolved:
        lines.append(MARK + f"unresolved: {msg}")
    for c in model.caveats:
        lines.append(MARK + f"caveat: {c}")
    return "\n".join(lines) + "\n"


def parse_reduced(text: str) -> LimitModel:
    net = parse_network(text)
    scale_lines, fields = [], []
    for raw in text.splitlines():
        if raw.startswith(MARK):
            body = raw[len(MARK):]
            if body.startswith("scale "):
                scale_lines.append(body[len("scale "):])
            elif ":" in body:
                key, value = body.split(":", 1)
                fields.append((key.strip(), value.strip()))
    if not scale_lines:
        raise ReducedModelMismatch("no reduced-model annotations found")
    spec = parse_scaling("\n".join(scale_lines) + "\n", net)
    get = {}
    aux, kinds = {}, {}
    for key, value in fields:
        if key == "aux":
            name, combo = value.split("=", 1)
            aux[name.strip()] = _parse_combination(combo, net.names)
        elif key == "variable":
            bits = value.split()
            kinds[bits[0]] = bits[1]
        else:
            get.setdefault(key, value)
    z0 = None
    if "z0" in get:
        values = {}
        for part in get["z0"].split(","):
            name, v = part.split("=")
            values[name.strip()] = float(v)
        z0 = [values[n] for n in net.names]
    recipe = get.get("recipe", "none")
    gamma = Fraction(get["gamma"])
    model = reduce_network(spec, gamma, aux or None, recipe,
                           z0=None if recipe == "goutsias" else z0, check_admissible=False)
    rebuilt = {v.name: v.kind.value for v in model.variables}
    if kinds and rebuilt != kinds:
        diff = sorted(n for n in set(kinds) | set(rebuilt) if kinds.get(n) != rebuilt.get(n))
        raise ReducedModelMismatch(f"recorded variable classes disagree with the rebuilt model for {diff}")
    return model


__all__ = ["RECIPES", "ReducedModelMismatch", "format_reduced", "parse_reduced", "reduce_network"]
