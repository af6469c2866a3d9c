"""Fast subnetworks on a lattice: generators, stationary laws, averaged rates."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..exact import extreme_rays
from ..graph import closed_classes
from ..scaling import ScalingSpec
from .limit import LimitModel, ReductionError, TermKind, VariableKind, build_limit_model, limit_rate


class EmptyStateSpace(ValueError):
    pass


class NotIrreducible(ValueError):
    def __init__(self, classes):
        self.classes = classes
        super().__init__(f"truncated fast chain has {len(classes)} closed communicating classes")


class MultiScaleFastBlock(ValueError):
    """The fast reactions act at more than one speed; build the model by hand."""


class TruncationFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class FastGenerator:
    spec: ScalingSpec
    gamma: object
    species: tuple[int, ...]
    reactions: tuple[int, ...]
    frozen_slow: tuple[float, ...]
    states: tuple[tuple[int, ...], ...]
    transitions: tuple[tuple[int, int, float, int], ...]   # (source, target, rate, reaction)
    boundary: tuple[int, ...]                               # states with a transition cut off
    truncation: tuple[int, ...] | None
    conserved: tuple[tuple[int, ...], ...]
    index: Mapping[tuple[int, ...], int] = field(repr=False, default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def rate_matrix(self) -> sp.csr_matrix:
        n = self.n_states
        if not self.transitions:
            return sp.csr_matrix((n, n))
        src = np.array([t[0] for t in self.transitions])
        dst = np.array([t[1] for t in self.transitions])
        rate = np.array([t[2] for t in self.transitions])
        off = sp.coo_matrix((rate, (src, dst)), shape=(n, n)).tocsr()
        out = np.asarray(off.sum(axis=1)).ravel()
        return (off - sp.diags(out)).tocsr()

    def grown(self, factor: int = 2) -> "FastGenerator":
        if self.truncation is None:
            return self
        return fast_generator(self.spec, self.gamma, self.frozen_slow,
                              truncation=tuple(t * factor for t in self.truncation),
                              fast_species=self.species)


def _select_block(spec: ScalingSpec, gamma, fast_species):
    model = build_limit_model(spec, gamma, check_admissible=False)
    eliminated = [v.species for v in model.variables if v.kind is VariableKind.ELIMINATED]
    if fast_species is None:
        fast_species = [i for i in eliminated if spec.alpha[i] == 0]
    fast_species = tuple(sorted(fast_species))
    if not fast_species:
        raise EmptyStateSpace("no counted species is eliminated at this time scale")
    for i in fast_species:
        if spec.alpha[i] != 0:
            raise ValueError(f"species {spec.network.species[i].name} is abundant (alpha > 0); "
                             "only counted species form a lattice fast block")
        if i not in eliminated:
            raise ValueError(f"species {spec.network.species[i].name} is not fast at gamma = {gamma}")
    fast_terms = [t for t in model.terms
                  if t.kind is TermKind.FAST and t.variable in {spec.network.species[i].name for i in fast_species}]
    reactions = tuple(sorted({t.reaction for t in fast_terms}))
    gaps = {t.exponent_gap for t in fast_terms}
    if len(gaps) > 1:
        raise MultiScaleFastBlock(
            f"fast reactions act with exponent gaps {sorted(str(g) for g in gaps)}; "
            "a single-level block is required")
    return fast_species, reactions


def _rates(spec, reactions, species, z, y):
    zz = list(z)
    for i, v in zip(species, y):
        zz[i] = v
    return [limit_rate(spec, k, zz) for k in reactions]


def _auto_box(spec, reactions, species, z, start) -> tuple[int, ...]:
    """Box of size mean + 10 sqrt(mean) from a per-species birth-death bound."""
    box = []
    for pos, i in enumerate(species):
        probe = list(start)
        probe[pos] = max(start[pos], 1)
        rates = _rates(spec, reactions, species, z, probe)
        birth = death = 0.0
        for k, rate in zip(reactions, rates):
            zeta = spec.network.reactions[k].zeta[i]
            if zeta > 0:
                birth += zeta * rate
            elif zeta < 0:
                death += -zeta * rate / probe[pos]
        mean = birth / death if death > 0 else start[pos] + 10.0
        mean = max(mean, float(start[pos]), 1.0)
        box.append(int(math.ceil(mean + 10.0 * math.sqrt(mean))) + 1)
    return tuple(box)


def fast_generator(spec: ScalingSpec, gamma, frozen_slow: Sequence[float],
                   truncation: int | Sequence[int] | None = None,
                   fast_species: Sequence[int] | None = None,
                   conserved_values: Mapping[tuple[int, ...], int] | None = None) -> FastGenerator:
    """Generator of the fast lattice block with the slow coordinates frozen.

    ``frozen_slow`` is a full normalized state; its entries at the fast
    species give the starting configuration whose communicating class is
    explored.  ``conserved_values`` instead fixes the conserved combinations
    (keys are vectors over the fast species) and searches for a start.
    ``truncation`` bounds each fast coordinate; ``None`` chooses a box
    automatically when the block is not already bounded.
    """
    z = tuple(float(v) for v in frozen_slow)
    species, reactions = _select_block(spec, gamma, fast_species)
    net = spec.network
    zetas = [tuple(net.reactions[k].zeta[i] for i in species) for k in reactions]
    conserved = tuple(extreme_rays(zetas, len(species)))
    bounded = all(any(c[p] > 0 for c in conserved) for p in range(len(species)))

    if conserved_values is not None:
        start = _start_from_conserved(species, conserved_values, truncation, z)
    else:
        start = []
        for i in species:
            v = z[i]
            if abs(v - round(v)) > 1e-9:
                raise ValueError(f"fast species {net.species[i].name} needs an integer start, got {v}")
            start.append(int(round(v)))
        start = tuple(start)
        if any(v < 0 for v in start):
            raise EmptyStateSpace("negative starting configuration")

    if truncation is None and not bounded:
        truncation = _auto_box(spec, reactions, species, z, start)
    elif isinstance(truncation, int):
        truncation = (truncation,) * len(species)
    if truncation is not None:
        truncation = tuple(int(t) for t in truncation)
        if any(s > t for s, t in zip(start, truncation)):
            truncation = tuple(max(s, t) for s, t in zip(start, truncation))

    index = {start: 0}
    states = [start]
    transitions = []
    boundary = set()
    queue = deque([start])
    while queue:
        y = queue.popleft()
        src = index[y]
        for k, zeta, rate in zip(reactions, zetas, _rates(spec, reactions, species, z, y)):
            if rate <= 0:
                continue
            target = tuple(a + b for a, b in zip(y, zeta))
            if any(v < 0 for v in target):
                continue
            if truncation is not None and any(v > t for v, t in zip(target, truncation)):
                boundary.add(src)
                continue
            if target not in index:
                index[target] = len(states)
                states.append(target)
                queue.append(target)
            if target != y:
                transitions.append((src, index[target], rate, k))
    return FastGenerator(spec, gamma, species, reactions, z, tuple(states), tuple(transitions),
                         tuple(sorted(boundary)), truncation, conserved, index)


def _start_from_conserved(species, conserved_values, truncation, z):
    n = len(species)
    limits = []
    for p in range(n):
        cap = None
        for theta, value in conserved_values.items():
            if theta[p] > 0:
                c = value // theta[p]
                cap = c if cap is None else min(cap, c)
        if cap is None:
            cap = truncation[p] if isinstance(truncation, (list, tuple)) else truncation
        if cap is None:
            raise ValueError("unbounded coordinate: give a truncation or a conservation covering it")
        limits.append(int(cap))
    if any(c < 0 for c in limits) or math.prod(c + 1 for c in limits) > 10**6:
        raise EmptyStateSpace("conserved values admit no configuration")
    for y in product(*(range(c + 1) for c in limits)):
        if all(sum(t * v for t, v in zip(theta, y)) == value for theta, value in conserved_values.items()):
            return tuple(y)
    raise EmptyStateSpace("conserved values admit no lattice configuration")


@dataclass(frozen=True)
class Equilibrium:
    species: tuple[int, ...]
    support: tuple[tuple[int, ...], ...]
    probs: np.ndarray
    residual: float
    truncation_mass_bound: float

    def expectation(self, f: Callable[[tuple[int, ...]], float]) -> float:
        return float(sum(p * f(y) for y, p in zip(self.support, self.probs)))

    def prob(self, state: Sequence[int]) -> float:
        state = tuple(state)
        for y, p in zip(self.support, self.probs):
            if y == state:
                return float(p)
        return 0.0


def _solve(gen: FastGenerator) -> tuple[np.ndarray, float]:
    n = gen.n_states
    if n == 1:
        return np.ones(1), 0.0
    succ = [[] for _ in range(n)]
    for s, t, _, _ in gen.transitions:
        succ[s].append(t)
    closed = closed_classes(n, succ)
    if len(closed) > 1:
        raise NotIrreducible([[gen.states[i] for i in c] for c in closed])
    Q = gen.rate_matrix()
    A = Q.T.tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[n - 1] = 1.0
    pi = spla.spsolve(A.tocsc(), b)
    pi = np.where(pi < 0, 0.0, pi)
    pi /= pi.sum()
    residual = float(np.max(np.abs(Q.T @ pi)))
    return pi, residual


def stationary_distribution(gen: FastGenerator, tol: float = 1e-10, max_states: int = 200_000) -> Equilibrium:
    """Solve pi Q = 0 on the (grown as needed) truncated state space."""
    while True:
        if gen.n_states == 0:
            raise EmptyStateSpace("fast state space is empty")
        pi, residual = _solve(gen)
        mass = float(sum(pi[i] for i in gen.boundary))
        if mass < tol or gen.truncation is None or not gen.boundary:
            return Equilibrium(gen.species, gen.states, pi, residual, mass)
        grown = gen.grown()
        if grown.n_states > max_states:
            raise TruncationFailed(f"boundary mass {mass:.3g} still above {tol} with "
                                   f"{gen.n_states} states")
        gen = grown


def averaged_intensity(spec: ScalingSpec, k: int, equilibrium: Equilibrium, z: Sequence[float]) -> float:
    """Expectation of the limiting intensity of reaction ``k`` under the fast equilibrium."""
    zz = list(float(v) for v in z)
    total = 0.0
    for y, p in zip(equilibrium.support, equilibrium.probs):
        for i, v in zip(equilibrium.species, y):
            zz[i] = v
        total += p * limit_rate(spec, k, zz)
    return float(total)


class Averager:
    """Averaged intensities for a set of reactions, re-solving as the slow state moves.

    The fast block's conserved totals are taken from ``representative`` (a
    full normalized state), which is valid while those totals do not change
    on the slow time scale.
    """

    def __init__(self, spec: ScalingSpec, gamma, representative: Sequence[float],
                 fast_species: Sequence[int] | None = None, tol: float = 1e-10):
        self.spec = spec
        self.gamma = gamma
        self.representative = tuple(float(v) for v in representative)
        self.species, self.reactions = _select_block(spec, gamma, fast_species)
        self.tol = tol
        self._cache: dict[tuple, Equilibrium] = {}
        fast = set(self.species)
        deps = set()
        for k in self.reactions:
            deps |= {i for i, n in enumerate(spec.network.reactions[k].nu) if n and i not in fast}
        self.slow_inputs = tuple(sorted(deps))

    def equilibrium(self, z: Sequence[float]) -> Equilibrium:
        key = tuple(z[i] for i in self.slow_inputs)
        eq = self._cache.get(key)
        if eq is None:
            frozen = list(z)
            for i in self.species:
                frozen[i] = self.representative[i]
            gen = fast_generator(self.spec, self.gamma, frozen, fast_species=self.species)
            eq = stationary_distribution(gen, self.tol)
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = eq
        return eq

    def rate(self, k: int, z: Sequence[float]) -> float:
        return averaged_intensity(self.spec, k, self.equilibrium(z), z)

    def intensity(self, k: int) -> Callable[[Mapping[str, float]], float]:
        names = self.spec.network.names

        def f(values: Mapping[str, float]) -> float:
            z = [values.get(n, r) for n, r in zip(names, self.representative)]
            return self.rate(k, z)
        return f

    def dependencies(self, k: int) -> tuple[int, ...]:
        fast = set(self.species)
        own = {i for i, n in enumerate(self.spec.network.reactions[k].nu) if n and i not in fast}
        return tuple(sorted(own | set(self.slow_inputs)))


def averaged_limit_model(spec: ScalingSpec, gamma, aux: Mapping[str, Sequence[int]] | None = None,
                         z0: Sequence[float] | None = None, tol: float = 1e-10,
                         check_admissible: bool = True) -> LimitModel:
    """Limit model whose unresolved reactions are averaged over the lattice fast block.

    Abundant eliminated species cannot be averaged this way; a model that
    needs them stays unresolved and ``ReductionError`` is raised.
    """
    plain = build_limit_model(spec, gamma, aux, z0=z0, check_admissible=check_admissible)
    if plain.closed:
        return plain
    abundant = [spec.network.species[i].name for i in plain.fast_block.species if spec.alpha[i] > 0]
    if abundant:
        raise ReductionError(f"eliminated abundant species {', '.join(abundant)} need a closed-form "
                             "equilibrium; generic averaging covers counted species only")
    averager = Averager(spec, gamma, plain.z0, tol=tol)
    live = {v.name for v in plain.variables if v.kind in (VariableKind.CONTINUOUS, VariableKind.DISCRETE)}
    eliminated = set(plain.fast_block.species)
    needed = sorted({t.reaction for t in plain.terms
                     if t.variable in live and t.kind is not TermKind.VANISHING
                     and any(n and i in eliminated for i, n in enumerate(spec.network.reactions[t.reaction].nu))})
    averaged = {k: averager.intensity(k) for k in needed}
    model = build_limit_model(spec, gamma, aux, averaged=averaged, z0=plain.z0, check_admissible=False)
    return replace(model, recipe="generic")
