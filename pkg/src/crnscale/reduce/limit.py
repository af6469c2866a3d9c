"""Limit models on a chosen time scale.

Each (variable, reaction) pair with a nonzero coefficient is classified by
its exponent gap ``gamma + rho_k - alpha_var``:

* gap < 0: the term vanishes in the limit;
* gap = 0 and alpha = 0: a jump term (unit-Poisson counting process);
* gap = 0 and alpha > 0: a drift term (deterministic integral);
* gap > 0: the term is fast and the variable must be eliminated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from ..core import falling_factorial, to_fraction
from ..exact import dot, extreme_rays
from ..scaling import (INF, STABILITY_CAVEAT, ScalingSpec, SearchBudgetExceeded, compute_k2_r2,
                       first_timescale, in_k2, k2_constraints, theta_alpha, verify_all_balance)


class ReductionError(ValueError):
    pass


class NotInK2(ReductionError):
    """An auxiliary combination is not conserved by the first-scale fast reactions."""


class InadmissibleScaleWarning(UserWarning):
    """The chosen gamma exceeds the largest time scale the balance analysis allows."""


class TermKind(str, Enum):
    VANISHING = "vanishing"
    JUMP = "jump"
    DRIFT = "drift"
    FAST = "fast"


class VariableKind(str, Enum):
    FROZEN = "frozen"
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"
    ELIMINATED = "eliminated"


def classify_gap(gap: Fraction, alpha: Fraction) -> TermKind:
    if gap < 0:
        return TermKind.VANISHING
    if gap > 0:
        return TermKind.FAST
    return TermKind.JUMP if alpha == 0 else TermKind.DRIFT


@dataclass(frozen=True)
class TermClass:
    reaction: int
    variable: str
    coefficient: Fraction
    exponent_gap: Fraction
    kind: TermKind


@dataclass(frozen=True)
class LimitVariable:
    name: str
    theta: tuple[int, ...]
    alpha: Fraction
    kind: VariableKind
    initial: float
    auxiliary: bool = False
    species: int | None = None


@dataclass(frozen=True)
class FastBlock:
    species: tuple[int, ...]
    reactions: tuple[int, ...]
    conserved: tuple[tuple[int, ...], ...]   # integer vectors over ``species``
    gaps: tuple[Fraction, ...]               # distinct fast gap levels


# An averaged intensity receives the current values of every retained,
# frozen and auxiliary variable, keyed by name.
AveragedIntensity = Callable[[Mapping[str, float]], float]


@dataclass(frozen=True)
class LimitModel:
    spec: ScalingSpec
    gamma: Fraction
    variables: tuple[LimitVariable, ...]
    terms: tuple[TermClass, ...]
    fast_block: FastBlock
    averaged: Mapping[int, AveragedIntensity]
    closed: bool
    unresolved: tuple[str, ...]
    z0: tuple[float, ...]
    caveats: tuple[str, ...] = ()
    companions: Mapping[str, AveragedIntensity] = field(default_factory=dict)
    recipe: str = "none"      # how averaged intensities were supplied

    def variable(self, name: str) -> LimitVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def of_kind(self, kind: VariableKind) -> list[LimitVariable]:
        return [v for v in self.variables if v.kind is kind]

    def terms_for(self, name: str) -> list[TermClass]:
        return [t for t in self.terms if t.variable == name]

    def reactions_of_kind(self, name: str, kind: TermKind) -> list[int]:
        return sorted(t.reaction for t in self.terms if t.variable == name and t.kind is kind)

    @property
    def network(self):
        return self.spec.network


def limit_rate(spec: ScalingSpec, k: int, z: Sequence[float]) -> float:
    """Limiting intensity of reaction ``k`` in normalized coordinates.

    Abundant species (alpha > 0) enter as powers, counted species as
    falling factorials.
    """
    r = spec.network.reactions[k]
    value = spec.kappa[k]
    for i, n in enumerate(r.nu):
        if n:
            zi = z[i]
            value *= zi**n if spec.alpha[i] > 0 else falling_factorial(zi, n) if zi >= n else 0.0
    return float(value)


def normalized_initial(spec: ScalingSpec, x0: Sequence[int] | None = None) -> tuple[float, ...]:
    if x0 is None:
        x0 = spec.network.initial
    if x0 is None:
        return tuple(0.0 for _ in spec.network.species)
    return tuple(float(x) * spec.N0 ** -float(a) for x, a in zip(x0, spec.alpha))


def _variable_coefficients(spec: ScalingSpec, theta, alpha_theta) -> list[Fraction]:
    """theta . D^{alpha_theta} zeta_k for each reaction."""
    top = [t if spec.alpha[i] == alpha_theta else 0 for i, t in enumerate(theta)]
    return [dot(top, r.zeta) for r in spec.network.reactions]


def aux_initial(spec: ScalingSpec, theta, z0) -> float:
    a = theta_alpha(spec, theta)
    return float(sum(t * z for i, (t, z) in enumerate(zip(theta, z0)) if t and spec.alpha[i] == a))


def build_limit_model(spec: ScalingSpec, gamma, aux: Mapping[str, Sequence[int]] | None = None,
                      averaged: Mapping[int, AveragedIntensity] | None = None,
                      z0: Sequence[float] | None = None, check_admissible: bool = True) -> LimitModel:
    """Classify every term at time scale ``gamma`` and assemble the limit model.

    ``aux`` maps names to auxiliary combinations; each must lie in the cone
    left invariant by the first-scale fast reactions.  ``averaged`` supplies
    intensities (keyed by 0-based reaction index) that replace reactions
    depending on eliminated species.
    """
    gamma = to_fraction(gamma)
    net = spec.network
    aux = dict(aux or {})
    averaged = dict(averaged or {})
    z0 = tuple(float(v) for v in z0) if z0 is not None else normalized_initial(spec)
    caveats = [STABILITY_CAVEAT]

    if check_admissible:
        try:
            report = verify_all_balance(spec, gamma)
            if not report.admissible:
                warnings.warn(
                    f"gamma = {gamma} exceeds the largest admissible time scale "
                    f"{report.max_admissible_gamma}; normalized counts may diverge",
                    InadmissibleScaleWarning, stacklevel=2)
                caveats.append(f"gamma exceeds the admissible bound {report.max_admissible_gamma}")
        except SearchBudgetExceeded:
            caveats.append("admissibility not checked: sign-class search budget exceeded")

    names = set(net.names)
    for name, theta in aux.items():
        if name in names:
            raise ReductionError(f"auxiliary name {name!r} clashes with a species")
        if len(theta) != net.n_species or any(t < 0 for t in theta) or not any(theta):
            raise ReductionError(f"auxiliary {name!r} must be a nonzero nonnegative vector over the species")
        if not in_k2(spec, theta):
            raise NotInK2(f"auxiliary {name!r} = {tuple(theta)} is changed by reactions that are fast "
                          f"at the first time scale {first_timescale(spec)}")

    terms: list[TermClass] = []
    species_kind: dict[int, VariableKind] = {}
    for i, s in enumerate(net.species):
        ts = []
        for k, r in enumerate(net.reactions):
            if r.zeta[i]:
                gap = gamma + spec.rho[k] - spec.alpha[i]
                ts.append(TermClass(k, s.name, Fraction(r.zeta[i]), gap, classify_gap(gap, spec.alpha[i])))
        terms.extend(ts)
        species_kind[i] = _kind(ts, spec.alpha[i])

    eliminated = [i for i, kd in species_kind.items() if kd is VariableKind.ELIMINATED]
    variables = []
    for i, s in enumerate(net.species):
        theta = tuple(int(j == i) for j in range(net.n_species))
        variables.append(LimitVariable(s.name, theta, spec.alpha[i], species_kind[i], z0[i], False, i))
    for name, theta in aux.items():
        theta = tuple(int(t) for t in theta)
        a = theta_alpha(spec, theta)
        coeffs = _variable_coefficients(spec, theta, a)
        ts = []
        for k, c in enumerate(coeffs):
            # a reaction acts on the combination when theta . zeta_k != 0; the
            # limit equation carries only the top-block part of that increment
            if dot(theta, net.reactions[k].zeta):
                gap = gamma + spec.rho[k] - a
                ts.append(TermClass(k, name, c, gap, classify_gap(gap, a)))
        kind = _kind(ts, a)
        if kind is VariableKind.ELIMINATED:
            fast = sorted(t.reaction + 1 for t in ts if t.kind is TermKind.FAST and t.coefficient)
            raise ReductionError(
                f"auxiliary {name!r} has fast terms from reactions {fast} at gamma = {gamma}; "
                f"its time scale is below gamma (requires gamma + rho_k <= alpha_theta)")
        terms.extend(ts)
        variables.append(LimitVariable(name, theta, a, kind, aux_initial(spec, theta, z0), True))

    fast_reactions = sorted({t.reaction for t in terms if t.kind is TermKind.FAST and t.variable in names})
    gaps = sorted({t.exponent_gap for t in terms if t.kind is TermKind.FAST and t.variable in names})
    block_eqs = [tuple(net.reactions[k].zeta[i] for i in eliminated) for k in fast_reactions]
    conserved = tuple(extreme_rays(block_eqs, len(eliminated))) if eliminated else ()
    block = FastBlock(tuple(eliminated), tuple(fast_reactions), conserved, tuple(gaps))

    unresolved = []
    live = {v.name for v in variables if v.kind in (VariableKind.CONTINUOUS, VariableKind.DISCRETE)}
    for t in terms:
        if t.variable not in live or t.kind is TermKind.VANISHING:
            continue
        deps = [i for i, n in enumerate(net.reactions[t.reaction].nu) if n and i in eliminated]
        if deps and t.reaction not in averaged:
            msg = (f"reaction {net.reaction_name(t.reaction)} drives {t.variable} but its intensity "
                   f"depends on eliminated species {', '.join(net.species[i].name for i in deps)}")
            if msg not in unresolved:
                unresolved.append(msg)
    if averaged:
        caveats.append("averaged intensities assume the fast subsystem is stable (ergodic)")
    return LimitModel(spec, gamma, tuple(variables), tuple(terms), block, averaged,
                      not unresolved, tuple(unresolved), z0, tuple(caveats))


def _kind(ts: list[TermClass], alpha) -> VariableKind:
    kinds = {t.kind for t in ts}
    if TermKind.FAST in kinds:
        return VariableKind.ELIMINATED
    if kinds <= {TermKind.VANISHING}:
        return VariableKind.FROZEN
    return VariableKind.DISCRETE if alpha == 0 else VariableKind.CONTINUOUS


def default_aux(spec: ScalingSpec) -> dict[str, tuple[int, ...]]:
    """Generators of the invariant cone that are not single species, named by their terms."""
    gens, _ = compute_k2_r2(spec)
    out = {}
    for g in gens:
        if sum(1 for t in g if t) > 1:
            parts = [("" if t == 1 else str(t)) + spec.network.species[i].name for i, t in enumerate(g) if t]
            out["_".join(parts)] = g
    return out


def check_k2_membership(spec: ScalingSpec, theta) -> bool:
    return in_k2(spec, theta)


__all__ = [
    "AveragedIntensity", "FastBlock", "InadmissibleScaleWarning", "LimitModel", "LimitVariable",
    "NotInK2", "ReductionError", "TermClass", "TermKind", "VariableKind", "build_limit_model",
    "classify_gap", "default_aux", "limit_rate", "normalized_initial", "k2_constraints", "INF",
]
