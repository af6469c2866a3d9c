"""Reaction-network data model and mass-action kinetics."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import extreme_rays

INT64_MAX = 2**63 - 1


class NegativeCount(ValueError):
    """A reaction was applied to a state that cannot supply its reactants."""


class CountOverflow(OverflowError):
    """A species count left the signed 64-bit range."""


@dataclass(frozen=True)
class Species:
    index: int
    name: str


@dataclass(frozen=True)
class Reaction:
    """One irreversible reaction ``nu -> nu_prime`` with rate constant ``rate_const``."""

    nu: tuple[int, ...]
    nu_prime: tuple[int, ...]
    rate_const: float
    label: str | None = None

    def __post_init__(self):
        nu = tuple(int(v) for v in self.nu)
        nup = tuple(int(v) for v in self.nu_prime)
        if len(nu) != len(nup):
            raise ValueError("nu and nu_prime must have the same length")
        if any(v < 0 for v in nu + nup):
            raise ValueError("stoichiometric coefficients must be nonnegative")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "nu_prime", nup)
        object.__setattr__(self, "rate_const", float(self.rate_const))

    @property
    def zeta(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.nu, self.nu_prime))

    @property
    def order(self) -> int:
        return sum(self.nu)


@dataclass(frozen=True)
class Network:
    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...]
    volume: float = 1.0
    # Optional default initial state carried by gallery files.
    initial: tuple[int, ...] | None = field(default=None, compare=True)

    def __post_init__(self):
        species = tuple(self.species)
        reactions = tuple(self.reactions)
        names = [s.name for s in species]
        if len(set(names)) != len(names):
            raise ValueError("species names must be unique")
        for pos, s in enumerate(species):
            if s.index != pos:
                raise ValueError(f"species {s.name!r} has index {s.index}, expected {pos}")
        for k, r in enumerate(reactions):
            if len(r.nu) != len(species):
                raise ValueError(f"reaction {k + 1} has {len(r.nu)} entries, expected {len(species)}")
        if not self.volume > 0:
            raise ValueError("volume must be positive")
        object.__setattr__(self, "species", species)
        object.__setattr__(self, "reactions", reactions)
        object.__setattr__(self, "volume", float(self.volume))
        if self.initial is not None:
            init = tuple(int(v) for v in self.initial)
            if len(init) != len(species) or any(v < 0 for v in init):
                raise ValueError("initial state must be a nonnegative vector over the species")
            object.__setattr__(self, "initial", init)

    @classmethod
    def build(cls, names: Sequence[str], reactions: Sequence[tuple], volume: float = 1.0,
              initial: Sequence[int] | None = None) -> "Network":
        """Convenience constructor from name-keyed dictionaries.

        ``reactions`` holds ``(lhs, rhs, rate)`` or ``(lhs, rhs, rate, label)``
        tuples where ``lhs`` and ``rhs`` map species names to coefficients.
        """
        index = {n: i for i, n in enumerate(names)}
        recs = []
        for item in reactions:
            lhs, rhs, rate = item[:3]
            label = item[3] if len(item) > 3 else None
            nu = [0] * len(names)
            nup = [0] * len(names)
            for name, c in lhs.items():
                nu[index[name]] += c
            for name, c in rhs.items():
                nup[index[name]] += c
            recs.append(Reaction(tuple(nu), tuple(nup), rate, label))
        sp = tuple(Species(i, n) for i, n in enumerate(names))
        return cls(sp, tuple(recs), volume, None if initial is None else tuple(initial))

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.species)

    def species_index(self, name: str) -> int:
        for s in self.species:
            if s.name == name:
                return s.index
        raise KeyError(name)

    def reaction_name(self, k: int) -> str:
        """Label if present, else the 1-based reaction number."""
        label = self.reactions[k].label
        return label if label else str(k + 1)

    def reaction_index(self, key: str | int) -> int:
        """Resolve a reaction label or 1-based number to a 0-based index."""
        if isinstance(key, str):
            for k, r in enumerate(self.reactions):
                if r.label == key:
                    return k
            if key.strip().isdigit():
                key = int(key)
            else:
                raise KeyError(key)
        if isinstance(key, bool) or not 1 <= int(key) <= self.n_reactions:
            raise KeyError(key)
        return int(key) - 1

    def stoichiometry(self) -> np.ndarray:
        """Species-by-reaction matrix of net changes."""
        out = np.zeros((self.n_species, self.n_reactions), dtype=np.int64)
        for k, r in enumerate(self.reactions):
            out[:, k] = r.zeta
        return out

    def reactant_matrix(self) -> np.ndarray:
        out = np.zeros((self.n_species, self.n_reactions), dtype=np.int64)
        for k, r in enumerate(self.reactions):
            out[:, k] = r.nu
        return out

    def volume_factors(self) -> np.ndarray:
        """``V**-(order-1)`` per reaction, 1 for orders 0 and 1."""
        return np.array([self.volume ** -(r.order - 1) if r.order > 1 else 1.0
                         for r in self.reactions])

    def effective_rates(self) -> np.ndarray:
        """Rate constants with the volume factor folded in."""
        return np.array([r.rate_const for r in self.reactions]) * self.volume_factors()


def falling_factorial(x: int, n: int) -> int:
    out = 1
    for j in range(n):
        out *= x - j
    return out


def intensity(network: Network, k: int, x: Sequence[int]) -> float:
    """Mass-action intensity of reaction ``k`` at count vector ``x``."""
    r = network.reactions[k]
    value = r.rate_const
    for xi, n in zip(x, r.nu):
        if n:
            if xi < n:
                return 0.0
            value *= falling_factorial(int(xi), n)
    if r.order > 1:
        value /= network.volume ** (r.order - 1)
    return value


def apply_reaction(network: Network, x: Sequence[int], k: int) -> tuple[int, ...]:
    out = tuple(int(a) + b for a, b in zip(x, network.reactions[k].zeta))
    if any(v < 0 for v in out):
        raise NegativeCount(f"reaction {network.reaction_name(k)} drives a count negative at {tuple(x)}")
    if any(v > INT64_MAX for v in out):
        raise CountOverflow(f"reaction {network.reaction_name(k)} overflows a 64-bit count")
    return out


@dataclass(frozen=True)
class ConservationLaw:
    theta: tuple[int, ...]

    def value(self, x: Sequence) -> int | float:
        return sum(t * v for t, v in zip(self.theta, x))

    def describe(self, names: Sequence[str]) -> str:
        terms = []
        for t, n in zip(self.theta, names):
            if t:
                terms.append(n if t == 1 else f"{t}{n}")
        return " + ".join(terms)


def conservation_laws(network: Network) -> list[ConservationLaw]:
    """Extreme rays of the nonnegative left null cone of the stoichiometric matrix."""
    eqs = [r.zeta for r in network.reactions]
    if network.n_species == 0:
        return []
    return [ConservationLaw(t) for t in extreme_rays(eqs, network.n_species)]


def classical_ode_rhs(network: Network, z: Sequence[float], kappa: Sequence[float] | None = None) -> np.ndarray:
    """Deterministic mass-action vector field ``sum_k kappa_k z^nu_k zeta_k``."""
    z = np.asarray(z, dtype=float)
    if kappa is None:
        kappa = [r.rate_const for r in network.reactions]
    out = np.zeros(network.n_species)
    for kk, r in zip(kappa, network.reactions):
        rate = float(kk)
        for zi, n in zip(z, r.nu):
            if n:
                rate *= zi**n
        if rate:
            out += rate * np.asarray(r.zeta, dtype=float)
    return out


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    reaction: int | None = None
    species: int | None = None

    def __str__(self):
        return f"{self.severity}: {self.message}"


def validate(network: Network) -> list[Diagnostic]:
    """Structural checks: reaction order, unused species, duplicates, rates."""
    diags: list[Diagnostic] = []
    for k, r in enumerate(network.reactions):
        name = network.reaction_name(k)
        if r.order > 2:
            diags.append(Diagnostic(
                "warning",
                f"reaction {name}: order {r.order} exceeds the binary (order <= 2) assumption "
                "of the scaling analysis",
                reaction=k))
        if not r.rate_const > 0:
            diags.append(Diagnostic("error", f"reaction {name}: nonpositive rate constant {r.rate_const!r}",
                                    reaction=k))
        if r.nu == r.nu_prime:
            diags.append(Diagnostic("warning", f"reaction {name} has no net effect", reaction=k))
    seen: dict[tuple, int] = {}
    for k, r in enumerate(network.reactions):
        key = (r.nu, r.nu_prime)
        if key in seen:
            diags.append(Diagnostic(
                "warning",
                f"reaction {network.reaction_name(k)} duplicates reaction {network.reaction_name(seen[key])}",
                reaction=k))
        else:
            seen[key] = k
    for s in network.species:
        used = any(r.nu[s.index] or r.nu_prime[s.index] for r in network.reactions)
        changed = any(r.zeta[s.index] for r in network.reactions)
        if not used:
            diags.append(Diagnostic("warning", f"species {s.name} is never produced nor consumed",
                                    species=s.index))
        elif not changed:
            diags.append(Diagnostic("warning", f"species {s.name} only acts catalytically; its count never changes",
                                    species=s.index))
    return diags


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)
