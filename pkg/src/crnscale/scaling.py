"""Scaling exponents, balance conditions and time-scale analysis.

All exponents are exact :class:`~fractions.Fraction` values.  The only
non-rational values are ``math.inf`` and ``-math.inf``, used for the
maximum over an empty reaction set (``-inf``) and for combinations that no
reaction changes (``+inf``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .core import Network, to_fraction
from .exact import Constraint, dot, extreme_rays, find_feasible_point
from .graph import species_graph, strongly_connected_components

INF = math.inf
NEG_INF = -math.inf
DEFAULT_BUDGET = 3**12


class IsolatedSpecies(ValueError):
    """The species is changed by no reaction, so it has no time scale."""


class SearchBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ScalingSpec:
    """Exponents embedding a network in a one-parameter family.

    ``kappa[k] = rate_const[k] * V**-(order-1) * N0**-beta[k]`` and
    ``rho[k] = beta[k] + nu_k . alpha``.
    """

    network: Network
    N0: float
    alpha: tuple[Fraction, ...]
    beta: tuple[Fraction, ...]
    kappa: tuple[float, ...] = field(init=False)
    rho: tuple[Fraction, ...] = field(init=False)

    def __post_init__(self):
        net = self.network
        alpha = tuple(to_fraction(a) for a in self.alpha)
        beta = tuple(to_fraction(b) for b in self.beta)
        if len(alpha) != net.n_species:
            raise ValueError("alpha must have one entry per species")
        if len(beta) != net.n_reactions:
            raise ValueError("beta must have one entry per reaction")
        if any(a < 0 for a in alpha):
            raise ValueError("alpha entries must be nonnegative")
        if not float(self.N0) > 1:
            raise ValueError("N0 must exceed 1")
        object.__setattr__(self, "N0", float(self.N0))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        rho = tuple(b + sum((n * a for n, a in zip(r.nu, alpha)), Fraction(0))
                    for b, r in zip(beta, net.reactions))
        object.__setattr__(self, "rho", rho)
        eff = net.effective_rates()
        kappa = tuple(float(c) * self.N0 ** -float(b) for c, b in zip(eff, beta))
        object.__setattr__(self, "kappa", kappa)

    @classmethod
    def from_kappa(cls, network: Network, N0: float, alpha, beta, kappa) -> "ScalingSpec":
        """Rescale the network's rate constants so the normalized rates equal ``kappa``."""
        beta = tuple(to_fraction(b) for b in beta)
        reactions = []
        for r, b, kk in zip(network.reactions, beta, kappa):
            vol = network.volume ** (r.order - 1) if r.order > 1 else 1.0
            reactions.append(replace(r, rate_const=float(kk) * float(N0) ** float(b) * vol))
        net = replace(network, reactions=tuple(reactions))
        return cls(net, N0, alpha, beta)

    @classmethod
    def uniform(cls, network: Network, N0: float = 100.0) -> "ScalingSpec":
        return cls(network, N0, (0,) * network.n_species, (0,) * network.n_reactions)

    @classmethod
    def classical(cls, network: Network, N0: float = 100.0) -> "ScalingSpec":
        """alpha = 1 everywhere and beta = 1 - order, the law-of-mass-action scaling."""
        beta = tuple(1 - r.order for r in network.reactions)
        return cls(network, N0, (1,) * network.n_species, beta)


def _max(values: Iterable[Fraction]) -> Fraction | float:
    return max(values, default=NEG_INF)


def _changing(spec: ScalingSpec, i: int, sign: int) -> list[int]:
    return [k for k, r in enumerate(spec.network.reactions) if r.zeta[i] * sign > 0]


class Status(str, Enum):
    BALANCED = "balanced"
    SATISFIED = "constraint satisfied"
    VIOLATED = "constraint violated"


@dataclass(frozen=True)
class Verdict:
    status: Status
    bound: Fraction | float       # the natural time scale of the species / combination
    max_minus: Fraction | float   # max rho over consuming reactions
    max_plus: Fraction | float    # max rho over producing reactions
    gamma: Fraction

    @property
    def balanced(self) -> bool:
        return self.status is Status.BALANCED

    @property
    def holds(self) -> bool:
        return self.status is not Status.VIOLATED


def _verdict(alpha_top, minus, plus, gamma) -> Verdict:
    gamma = to_fraction(gamma)
    mm, mp = _max(minus), _max(plus)
    both = max(mm, mp)
    bound = INF if both == NEG_INF else alpha_top - both
    if mm == mp:
        status = Status.BALANCED
    elif gamma <= bound:
        status = Status.SATISFIED
    else:
        status = Status.VIOLATED
    return Verdict(status, bound, mm, mp, gamma)


def species_timescale(spec: ScalingSpec, i: int) -> Fraction:
    ks = [k for k, r in enumerate(spec.network.reactions) if r.zeta[i]]
    if not ks:
        raise IsolatedSpecies(f"species {spec.network.species[i].name} is changed by no reaction")
    return spec.alpha[i] - max(spec.rho[k] for k in ks)


def check_species_balance(spec: ScalingSpec, i: int, gamma) -> Verdict:
    minus = [spec.rho[k] for k in _changing(spec, i, -1)]
    plus = [spec.rho[k] for k in _changing(spec, i, +1)]
    return _verdict(spec.alpha[i], minus, plus, gamma)


def _theta_signs(spec: ScalingSpec, theta: Sequence) -> tuple[list[int], list[int]]:
    theta = [to_fraction(t) for t in theta]
    if len(theta) != spec.network.n_species or any(t < 0 for t in theta) or not any(theta):
        raise ValueError("theta must be a nonzero nonnegative vector over the species")
    plus, minus = [], []
    for k, r in enumerate(spec.network.reactions):
        v = dot(theta, r.zeta)
        if v > 0:
            plus.append(k)
        elif v < 0:
            minus.append(k)
    return minus, plus


def theta_alpha(spec: ScalingSpec, theta: Sequence) -> Fraction:
    return max(spec.alpha[i] for i, t in enumerate(theta) if t)


def theta_timescale(spec: ScalingSpec, theta: Sequence) -> Fraction | float:
    minus, plus = _theta_signs(spec, theta)
    if not minus and not plus:
        return INF
    return theta_alpha(spec, theta) - max(spec.rho[k] for k in minus + plus)


def check_collective_balance(spec: ScalingSpec, theta: Sequence, gamma) -> Verdict:
    minus, plus = _theta_signs(spec, theta)
    return _verdict(theta_alpha(spec, theta), [spec.rho[k] for k in minus],
                    [spec.rho[k] for k in plus], gamma)


def scc_decompose(network: Network) -> list[list[int]]:
    return strongly_connected_components(network.n_species, species_graph(network))


# ---------------------------------------------------------------- sign classes


@dataclass(frozen=True)
class SignClass:
    gamma_minus: frozenset[int]
    gamma_plus: frozenset[int]
    gamma_zero: frozenset[int]
    witness: tuple[Fraction, ...] | None
    support: tuple[int, ...] = ()
    feasible: bool = True

    def key(self):
        return (sorted(self.gamma_plus), sorted(self.gamma_minus), sorted(self.gamma_zero))


def _sign_constraint(d, sigma) -> Constraint:
    if sigma > 0:
        return Constraint(d, ">=", Fraction(1))
    if sigma < 0:
        return Constraint(d, "<=", Fraction(-1))
    return Constraint(d, "==", Fraction(0))


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def enumerate_sign_classes(spec: ScalingSpec | Network, support: Iterable[int],
                           budget: int = DEFAULT_BUDGET) -> list[SignClass]:
    """Every realisable sign pattern of ``theta . zeta_k`` with supp(theta) in ``support``.

    Reactions are grouped by their restricted direction up to sign, so that
    parallel reactions share one branching decision.  Branches are pruned by
    exact feasibility; the parent's witness settles one child for free.
    """
    network = spec.network if isinstance(spec, ScalingSpec) else spec
    support = tuple(sorted(set(support)))
    if not support:
        return []
    n = len(support)
    directions: list[tuple[Fraction, ...]] = []
    members: list[list[tuple[int, int]]] = []
    lookup: dict[tuple, int] = {}
    always_zero = []
    for k, r in enumerate(network.reactions):
        z = tuple(Fraction(r.zeta[i]) for i in support)
        if not any(z):
            always_zero.append(k)
            continue
        lead = next(v for v in z if v)
        orient = 1 if lead > 0 else -1
        g = 0
        for v in z:
            g = math.gcd(g, int(v))
        canon = tuple(v * orient / g for v in z)
        if canon not in lookup:
            lookup[canon] = len(directions)
            directions.append(canon)
            members.append([])
        members[lookup[canon]].append((k, orient))

    norm = Constraint(tuple(Fraction(1) for _ in range(n)), ">=", Fraction(1))
    start = find_feasible_point([norm], n)
    out: list[SignClass] = []
    visited = 0

    def recurse(depth, constraints, signs, witness):
        nonlocal visited
        visited += 1
        if visited > budget:
            raise SearchBudgetExceeded(
                f"sign-class search over {n} species exceeded {budget} nodes")
        if depth == len(directions):
            plus, minus, zero = set(), set(), set(always_zero)
            for g, s in enumerate(signs):
                for k, orient in members[g]:
                    eff = s * orient
                    (plus if eff > 0 else minus if eff < 0 else zero).add(k)
            full = [Fraction(0)] * network.n_species
            for i, v in zip(support, witness):
                full[i] = v
            sc = SignClass(frozenset(minus), frozenset(plus), frozenset(zero), tuple(full), support)
            _check_witness(network, sc)
            out.append(sc)
            return
        d = directions[depth]
        current = _sign(dot(witness, d))
        for sigma in (1, 0, -1):
            cons = constraints + [_sign_constraint(d, sigma)]
            if sigma == current:
                v = abs(dot(witness, d))
                w = witness if (sigma == 0 or v >= 1) else tuple(x / v for x in witness)
            else:
                w = find_feasible_point(cons + [norm], n)
                if w is None:
                    continue
            recurse(depth + 1, cons, signs + [sigma], w)

    recurse(0, [], [], start)
    return out


def _check_witness(network: Network, sc: SignClass):
    """Substitute the witness back in; a mismatch is an internal error."""
    theta = sc.witness
    if theta is None or any(t < 0 for t in theta) or not any(theta):
        raise AssertionError("invalid witness")
    for k, r in enumerate(network.reactions):
        s = _sign(dot(theta, r.zeta))
        expected = 1 if k in sc.gamma_plus else -1 if k in sc.gamma_minus else 0
        if s != expected:
            raise AssertionError(f"witness does not realise the sign of reaction {k + 1}")


def class_min_alpha(spec: ScalingSpec, sc: SignClass) -> Fraction:
    """Smallest ``max_{supp theta} alpha`` over theta realising the class."""
    network = spec.network
    levels = sorted({spec.alpha[i] for i in sc.support})
    for a in levels:
        sub = [i for i in sc.support if spec.alpha[i] <= a]
        cons = []
        for k, r in enumerate(network.reactions):
            d = tuple(Fraction(r.zeta[i]) for i in sub)
            sigma = 1 if k in sc.gamma_plus else -1 if k in sc.gamma_minus else 0
            if not any(d):
                if sigma:
                    break
                continue
            cons.append(_sign_constraint(d, sigma))
        else:
            cons.append(Constraint(tuple(Fraction(1) for _ in sub), ">=", Fraction(1)))
            if find_feasible_point(cons, len(sub)) is not None:
                return a
    return levels[-1]


@dataclass(frozen=True)
class ClassVerdict:
    scc: int
    sign_class: SignClass
    verdict: Verdict

    @property
    def balanced(self) -> bool:
        return self.verdict.balanced


def class_verdict(spec: ScalingSpec, sc: SignClass, gamma, scc: int = 0) -> ClassVerdict:
    minus = [spec.rho[k] for k in sc.gamma_minus]
    plus = [spec.rho[k] for k in sc.gamma_plus]
    if _max(minus) == _max(plus):
        alpha_top = theta_alpha(spec, sc.witness)
    else:
        alpha_top = class_min_alpha(spec, sc)
    return ClassVerdict(scc, sc, _verdict(alpha_top, minus, plus, gamma))


# ---------------------------------------------------------------- time scales


def natural_timescales(spec: ScalingSpec) -> tuple[Fraction | float, ...]:
    out = []
    for i in range(spec.network.n_species):
        try:
            out.append(species_timescale(spec, i))
        except IsolatedSpecies:
            out.append(INF)
    return tuple(out)


def first_timescale(spec: ScalingSpec) -> Fraction | float:
    return min(natural_timescales(spec), default=INF)


def fast_reactions(spec: ScalingSpec, level) -> tuple[list[int], list[int]]:
    """Reactions k and species i with ``level + rho_k == alpha_i`` and zeta_ik != 0."""
    ks, species = set(), set()
    for k, r in enumerate(spec.network.reactions):
        for i, z in enumerate(r.zeta):
            if z and level + spec.rho[k] == spec.alpha[i]:
                ks.add(k)
                species.add(i)
    return sorted(ks), sorted(species)


def k2_constraints(spec: ScalingSpec) -> list[tuple[int, ...]]:
    r1 = first_timescale(spec)
    if r1 == INF:
        return []
    fast, fast_species = fast_reactions(spec, r1)
    eqs = []
    for k in fast:
        z = spec.network.reactions[k].zeta
        eqs.append(tuple(z[i] if i in fast_species else 0 for i in range(spec.network.n_species)))
    return eqs


def compute_k2_r2(spec: ScalingSpec) -> tuple[list[tuple[int, ...]], Fraction | float]:
    r1 = first_timescale(spec)
    n = spec.network.n_species
    if n == 0:
        return [], INF
    gens = extreme_rays(k2_constraints(spec), n)
    r2 = min((theta_timescale(spec, g) for g in gens), default=INF)
    if r2 != INF and not r2 > r1:
        raise AssertionError(f"second time scale {r2} does not exceed the first {r1}")
    return gens, r2


def in_k2(spec: ScalingSpec, theta: Sequence) -> bool:
    theta = [to_fraction(t) for t in theta]
    return all(dot(theta, eq) == 0 for eq in k2_constraints(spec))


# ---------------------------------------------------------------- full report


@dataclass(frozen=True)
class BalanceReport:
    spec: ScalingSpec
    gamma: Fraction
    species_verdicts: tuple[Verdict | None, ...]   # None for species no reaction changes
    class_verdicts: tuple[ClassVerdict, ...]
    natural_timescales: tuple[Fraction | float, ...]
    max_admissible_gamma: Fraction | float
    r1: Fraction | float
    k2_generators: tuple[tuple[int, ...], ...]
    r2: Fraction | float
    sccs: tuple[tuple[int, ...], ...]
    caveats: tuple[str, ...] = ()

    @property
    def admissible(self) -> bool:
        return self.gamma <= self.max_admissible_gamma

    @property
    def all_conditions_hold(self) -> bool:
        return all(v is None or v.holds for v in self.species_verdicts) and all(
            c.verdict.holds for c in self.class_verdicts)


STABILITY_CAVEAT = ("stability of the fast subsystems (stochastic boundedness) is assumed, "
                    "not verified")


def all_sign_classes(spec: ScalingSpec, budget: int = DEFAULT_BUDGET) -> list[tuple[int, SignClass]]:
    out = []
    for c, comp in enumerate(scc_decompose(spec.network)):
        for sc in enumerate_sign_classes(spec, comp, budget):
            out.append((c, sc))
    return out


def max_admissible(verdicts: Iterable[ClassVerdict]) -> Fraction | float:
    return min((cv.verdict.bound for cv in verdicts if not cv.balanced), default=INF)


def verify_all_balance(spec: ScalingSpec, gamma=0, budget: int = DEFAULT_BUDGET) -> BalanceReport:
    gamma = to_fraction(gamma)
    net = spec.network
    species = []
    for i in range(net.n_species):
        if any(r.zeta[i] for r in net.reactions):
            species.append(check_species_balance(spec, i, gamma))
        else:
            species.append(None)
    classes = tuple(class_verdict(spec, sc, gamma, c) for c, sc in all_sign_classes(spec, budget))
    gens, r2 = compute_k2_r2(spec)
    return BalanceReport(
        spec=spec,
        gamma=gamma,
        species_verdicts=tuple(species),
        class_verdicts=classes,
        natural_timescales=natural_timescales(spec),
        max_admissible_gamma=max_admissible(classes),
        r1=first_timescale(spec),
        k2_generators=tuple(gens),
        r2=r2,
        sccs=tuple(tuple(c) for c in scc_decompose(net)),
        caveats=(STABILITY_CAVEAT,),
    )


# ---------------------------------------------------------------- alpha search


@dataclass(frozen=True)
class AlphaCandidate:
    alpha: tuple[Fraction, ...]
    balanced_classes: int
    max_admissible_gamma: Fraction | float


def propose_alpha(network: Network, beta: Sequence, candidate_grid: Sequence[Sequence] | Mapping,
                  N0: float = 100.0, budget: int = DEFAULT_BUDGET) -> list[AlphaCandidate]:
    """Score every alpha on the grid and return the Pareto-best assignments.

    The score is (number of balanced sign classes, max admissible gamma); both
    are to be maximised.  Sign classes depend only on the network, so they are
    enumerated once.
    """
    if isinstance(candidate_grid, Mapping):
        grid = [candidate_grid[s.name] for s in network.species]
    else:
        grid = list(candidate_grid)
    if len(grid) != network.n_species:
        raise ValueError("candidate grid needs one entry per species")
    grid = [sorted({to_fraction(v) for v in g}) for g in grid]
    total = math.prod(len(g) for g in grid)
    if total > budget:
        raise SearchBudgetExceeded(f"{total} alpha assignments exceed the budget of {budget}")
    base = ScalingSpec(network, N0, (0,) * network.n_species, beta)
    classes = all_sign_classes(base, budget)
    scored = []
    for alpha in itertools.product(*grid):
        spec = ScalingSpec(network, N0, alpha, beta)
        verdicts = [class_verdict(spec, sc, 0, c) for c, sc in classes]
        nb = sum(1 for v in verdicts if v.balanced)
        scored.append(AlphaCandidate(tuple(alpha), nb, max_admissible(verdicts)))
    front = [a for a in scored
             if not any(_dominates(b, a) for b in scored)]
    front.sort(key=lambda a: (-a.balanced_classes, -a.max_admissible_gamma, a.alpha))
    return front


def _dominates(b: AlphaCandidate, a: AlphaCandidate) -> bool:
    ge = b.balanced_classes >= a.balanced_classes and b.max_admissible_gamma >= a.max_admissible_gamma
    gt = b.balanced_classes > a.balanced_classes or b.max_admissible_gamma > a.max_admissible_gamma
    return ge and gt
