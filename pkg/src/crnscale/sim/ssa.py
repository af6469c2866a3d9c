"""Exact stochastic simulation (direct method) of mass-action networks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numba import njit

from ..core import INT64_MAX, Network
from ..scaling import ScalingSpec
from .rng import RngStream, open01_nb

DEFAULT_EVENT_CAP = 10**8

_OPS = {"==": 0, "<=": 1, ">=": 2, "<": 3, ">": 4}
_STATUS = ("t_end", "event_cap", "hitting", "overflow")


class Exploded(RuntimeError):
    """The event cap was reached before the time horizon."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class LinearPredicate:
    """``sum_i coef_i * x_i  <op>  threshold`` on the simulated state."""

    name: str
    coef: tuple[float, ...]
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown comparison {self.op!r}")

    @classmethod
    def on(cls, names: Sequence[str], name: str, terms: Mapping[str, float], op: str, threshold: float):
        index = {n: i for i, n in enumerate(names)}
        coef = [0.0] * len(names)
        for n, c in terms.items():
            coef[index[n]] += float(c)
        return cls(name, tuple(coef), op, float(threshold))

    def __call__(self, x: Sequence[float]) -> bool:
        v = 0.0
        for c, xi in zip(self.coef, x):
            if c:
                v += c * xi
        return _compare(v, _OPS[self.op], self.threshold)


def _compare(v, op, thr):
    if op == 0:
        return v == thr
    if op == 1:
        return v <= thr
    if op == 2:
        return v >= thr
    if op == 3:
        return v < thr
    return v > thr


Predicate = Callable[[Sequence[float]], bool]


@dataclass
class Trajectory:
    """One simulated path.

    ``grid_states`` holds the state in output units (counts times ``scale``)
    at each grid time; rows past an early stop are NaN.
    """

    names: tuple[str, ...]
    x0: np.ndarray
    event_times: np.ndarray
    event_channels: np.ndarray
    grid_times: np.ndarray
    grid_states: np.ndarray
    final_state: np.ndarray
    t_final: float
    terminated_by: str
    hitting_times: dict[str, float | None] = field(default_factory=dict)
    deltas: np.ndarray | None = None      # channel-by-variable increments
    scale: np.ndarray | None = None

    @property
    def n_events(self) -> int:
        return int(len(self.event_times))

    def states_at_events(self) -> np.ndarray:
        """State after each event (row e is the state on [t_e, t_{e+1}))."""
        if self.deltas is None:
            raise ValueError("trajectory carries no increments")
        steps = self.deltas[self.event_channels]
        return np.asarray(self.x0)[None, :] + np.cumsum(steps, axis=0)

    def output_state(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x * self.scale if self.scale is not None else x


def hitting_time(trajectory: Trajectory, predicate: Predicate) -> float | None:
    """First event time at which ``predicate`` holds (on unscaled states)."""
    if predicate(trajectory.x0):
        return 0.0
    if trajectory.deltas is None:
        raise ValueError("trajectory carries no increments")
    x = np.array(trajectory.x0, dtype=np.int64 if trajectory.x0.dtype.kind in "iu" else float)
    for t, k in zip(trajectory.event_times, trajectory.event_channels):
        x = x + trajectory.deltas[k]
        if predicate(x):
            return float(t)
    return None


@dataclass(frozen=True)
class CompiledNetwork:
    """Flat arrays for the kernels."""

    rates: np.ndarray        # float64[R], volume factors folded in
    react_idx: np.ndarray    # int64[R, W] species index, -1 padding
    react_coef: np.ndarray   # int64[R, W]
    zeta: np.ndarray         # int64[R, S]


def compile_network(network: Network, rates: Sequence[float] | None = None) -> CompiledNetwork:
    R, S = network.n_reactions, network.n_species
    width = max([sum(1 for n in r.nu if n) for r in network.reactions] + [1])
    idx = -np.ones((R, width), dtype=np.int64)
    coef = np.zeros((R, width), dtype=np.int64)
    for k, r in enumerate(network.reactions):
        j = 0
        for i, n in enumerate(r.nu):
            if n:
                idx[k, j] = i
                coef[k, j] = n
                j += 1
    zeta = np.zeros((R, S), dtype=np.int64)
    for k, r in enumerate(network.reactions):
        zeta[k] = r.zeta
    if rates is None:
        rates = network.effective_rates()
    return CompiledNetwork(np.asarray(rates, dtype=np.float64).copy(), idx, coef, zeta)


@njit(cache=True, nogil=True)
def _propensities(x, rates, react_idx, react_coef, out):
    total = 0.0
    for k in range(rates.shape[0]):
        a = rates[k]
        for j in range(react_idx.shape[1]):
            i = react_idx[k, j]
            if i < 0:
                break
            xi = x[i]
            for m in range(react_coef[k, j]):
                a *= xi - m
            if xi < react_coef[k, j]:
                a = 0.0
                break
        out[k] = a
        total += a
    return total


@njit(cache=True, nogil=True)
def _pred_true(x, coef, op, thr):
    v = 0.0
    for i in range(x.shape[0]):
        if coef[i] != 0.0:
            v += coef[i] * x[i]
    if op == 0:
        return v == thr
    if op == 1:
        return v <= thr
    if op == 2:
        return v >= thr
    if op == 3:
        return v < thr
    return v > thr


@njit(cache=True, nogil=True)
def _ssa_kernel(x0, rates, react_idx, react_coef, zeta, t_end, key, counter, grid,
                pred_coef, pred_op, pred_thr, stop_all, event_cap, record, int_max):
    S = x0.shape[0]
    R = rates.shape[0]
    P = pred_op.shape[0]
    x = x0.copy()
    a = np.empty(R)
    cap = 1024 if record else 1
    ev_t = np.empty(cap)
    ev_k = np.empty(cap, dtype=np.int64)
    n_ev = 0
    G = grid.shape[0]
    grid_x = np.zeros((G, S), dtype=np.int64)
    g = 0
    hit = np.full(P, np.nan)
    n_hit = 0
    for p in range(P):
        if _pred_true(x, pred_coef[p], pred_op[p], pred_thr[p]):
            hit[p] = 0.0
            n_hit += 1
    t = 0.0
    status = 0
    if P > 0 and stop_all and n_hit == P:
        status = 2
        return ev_t[:0], ev_k[:0], grid_x, g, x, t, status, hit, counter
    while True:
        total = _propensities(x, rates, react_idx, react_coef, a)
        counter += np.uint64(1)
        u1 = open01_nb(key, counter)
        counter += np.uint64(1)
        u2 = open01_nb(key, counter)
        if total <= 0.0:
            t_next = np.inf
        else:
            t_next = t - np.log(u1) / total
        if t_next > t_end:
            while g < G and grid[g] <= t_end:
                grid_x[g] = x
                g += 1
            t = t_end
            status = 0
            break
        if n_ev >= event_cap:
            status = 1
            break
        target = u2 * total
        acc = 0.0
        k = R - 1
        for j in range(R):
            acc += a[j]
            if target < acc:
                k = j
                break
        while k > 0 and a[k] == 0.0:
            k -= 1
        while g < G and grid[g] < t_next:
            grid_x[g] = x
            g += 1
        overflow = False
        for i in range(S):
            dz = zeta[k, i]
            if dz > 0 and x[i] > int_max - dz:
                overflow = True
        if overflow:
            status = 3
            break
        for i in range(S):
            x[i] += zeta[k, i]
        t = t_next
        if record:
            if n_ev >= cap:
                cap *= 2
                nt = np.empty(cap)
                nk = np.empty(cap, dtype=np.int64)
                nt[:n_ev] = ev_t[:n_ev]
                nk[:n_ev] = ev_k[:n_ev]
                ev_t = nt
                ev_k = nk
            ev_t[n_ev] = t
            ev_k[n_ev] = k
        n_ev += 1
        if P > 0:
            for p in range(P):
                if np.isnan(hit[p]) and _pred_true(x, pred_coef[p], pred_op[p], pred_thr[p]):
                    hit[p] = t
                    n_hit += 1
            if stop_all and n_hit == P:
                status = 2
                break
    if not record:
        n_ev = 0
    return ev_t[:n_ev], ev_k[:n_ev], grid_x, g, x, t, status, hit, counter


def _python_ssa(x0, comp: CompiledNetwork, t_end, rng: RngStream, grid, predicates, stop_all,
                event_cap, record):
    """Reference implementation; same arithmetic and random draws as the kernel."""
    x = [int(v) for v in x0]
    R = len(comp.rates)
    zeta = comp.zeta.tolist()
    idx = comp.react_idx.tolist()
    coef = comp.react_coef.tolist()
    rates = comp.rates.tolist()
    ev_t, ev_k = [], []
    grid_x = []
    g = 0
    G = len(grid)
    hit = [0.0 if p(x) else None for p in predicates]
    t = 0.0
    if predicates and stop_all and all(h is not None for h in hit):
        return ev_t, ev_k, grid_x, x, t, "hitting", hit
    status = "t_end"
    n_ev = 0
    while True:
        a = []
        total = 0.0
        for k in range(R):
            v = rates[k]
            for i, n in zip(idx[k], coef[k]):
                if i < 0:
                    break
                xi = x[i]
                for m in range(n):
                    v *= xi - m
                if xi < n:
                    v = 0.0
                    break
            a.append(v)
            total += v
        u1 = rng.open01()
        u2 = rng.open01()
        t_next = math.inf if total <= 0.0 else t - float(np.log(u1)) / total
        if t_next > t_end:
            while g < G and grid[g] <= t_end:
                grid_x.append(list(x))
                g += 1
            t = t_end
            break
        if n_ev >= event_cap:
            status = "event_cap"
            break
        target = u2 * total
        acc = 0.0
        k = R - 1
        for j in range(R):
            acc += a[j]
            if target < acc:
                k = j
                break
        while k > 0 and a[k] == 0.0:
            k -= 1
        while g < G and grid[g] < t_next:
            grid_x.append(list(x))
            g += 1
        new = [xi + dz for xi, dz in zip(x, zeta[k])]
        if any(v > INT64_MAX for v in new):
            status = "overflow"
            break
        x = new
        t = t_next
        if record:
            ev_t.append(t)
            ev_k.append(k)
        n_ev += 1
        if predicates:
            for p, pred in enumerate(predicates):
                if hit[p] is None and pred(x):
                    hit[p] = t
            if stop_all and all(h is not None for h in hit):
                status = "hitting"
                break
    return ev_t, ev_k, grid_x, x, t, status, hit


def simulate_compiled(comp: CompiledNetwork, names, x0, t_end: float, rng: RngStream,
                      grid: Sequence[float] = (), predicates: Sequence = (),
                      stop_on_hit: bool = False, event_cap: int = DEFAULT_EVENT_CAP,
                      record_events: bool = True, backend: str = "auto",
                      scale: np.ndarray | None = None) -> Trajectory:
    x0 = np.asarray(x0, dtype=np.int64)
    if np.any(x0 < 0):
        raise ValueError("initial counts must be nonnegative")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    grid = np.asarray(sorted(float(g) for g in grid), dtype=np.float64)
    predicates = list(predicates)
    linear = all(isinstance(p, LinearPredicate) for p in predicates)
    if backend == "auto":
        backend = "numba" if linear else "python"
    if backend == "numba" and not linear:
        raise ValueError("the compiled backend only supports linear predicates")
    S = len(x0)
    if backend == "numba":
        P = len(predicates)
        pc = np.zeros((P, S))
        po = np.zeros(P, dtype=np.int64)
        pt = np.zeros(P)
        for p, pred in enumerate(predicates):
            pc[p] = pred.coef
            po[p] = _OPS[pred.op]
            pt[p] = pred.threshold
        ev_t, ev_k, grid_x, g, x, t, status, hit, counter = _ssa_kernel(
            x0, comp.rates, comp.react_idx, comp.react_coef, comp.zeta, float(t_end),
            np.uint64(rng.key), np.uint64(rng.counter), grid, pc, po, pt, bool(stop_on_hit),
            int(event_cap), bool(record_events), INT64_MAX)
        rng.counter = int(counter)
        grid_vals = np.full((len(grid), S), np.nan)
        grid_vals[:g] = grid_x[:g]
        hits = {pred.name: (None if np.isnan(h) else float(h)) for pred, h in zip(predicates, hit)}
        status = _STATUS[status]
        ev_t, ev_k = np.array(ev_t), np.array(ev_k, dtype=np.int64)
        final = np.array(x, dtype=np.int64)
    elif backend == "python":
        ev_t, ev_k, grid_x, x, t, status, hit = _python_ssa(
            x0, comp, float(t_end), rng, grid, predicates, stop_on_hit, event_cap, record_events)
        grid_vals = np.full((len(grid), S), np.nan)
        if grid_x:
            grid_vals[:len(grid_x)] = np.array(grid_x, dtype=float)
        hits = {getattr(pred, "name", f"p{p}"): h for p, (pred, h) in enumerate(zip(predicates, hit))}
        ev_t = np.array(ev_t, dtype=float)
        ev_k = np.array(ev_k, dtype=np.int64)
        final = np.array(x, dtype=np.int64)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if scale is not None:
        grid_vals = grid_vals * scale[None, :]
    traj = Trajectory(tuple(names), x0, ev_t, ev_k, grid, grid_vals, final, float(t), status,
                      hits, comp.zeta, scale)
    if status == "event_cap":
        raise Exploded(f"event cap {event_cap} reached at t = {t:.6g}", traj)
    if status == "overflow":
        raise OverflowError("a species count left the 64-bit range")
    return traj


def simulate_ssa(network: Network, x0: Sequence[int], t_end: float, rng: RngStream, **kwargs) -> Trajectory:
    """Simulate the network's Markov chain from ``x0`` up to ``t_end``.

    Keyword arguments: ``grid`` (sample times), ``predicates`` (hitting-time
    predicates on the count vector), ``stop_on_hit`` (stop once all have
    fired), ``event_cap``, ``record_events``, ``backend`` ('auto', 'numba' or
    'python').
    """
    comp = compile_network(network)
    return simulate_compiled(comp, network.names, x0, t_end, rng, **kwargs)


class SSAProcess:
    """The network's own Markov chain, as a replicate factory for ensembles."""

    def __init__(self, network: Network, x0: Sequence[int] | None = None):
        self.network = network
        if x0 is None:
            x0 = network.initial
        if x0 is None:
            raise ValueError("no initial state given and the network carries none")
        self.x0 = np.asarray(x0, dtype=np.int64)
        self.compiled = compile_network(network)
        self.names = network.names

    def simulate(self, rng: RngStream, t_end: float, **kwargs) -> Trajectory:
        return simulate_compiled(self.compiled, self.names, self.x0, t_end, rng, **kwargs)

    def predicate(self, name: str, terms: Mapping[str, float], op: str, threshold: float) -> LinearPredicate:
        return LinearPredicate.on(self.names, name, terms, op, threshold)


class ScaledProcess:
    """The normalized process of a scaling family at a given N, simulated on counts.

    Reaction ``k`` fires at ``kappa_k N**(gamma + beta_k)`` times the
    falling-factorial count intensity; reported states are ``N**-alpha`` times
    the counts.
    """

    def __init__(self, spec: ScalingSpec, gamma, N: float, x0: Sequence[int] | None = None,
                 z0: Sequence[float] | None = None):
        self.spec = spec
        self.gamma = gamma
        self.N = float(N)
        net = spec.network
        g = float(gamma)
        self.rates = np.array([kk * self.N ** (g + float(b)) for kk, b in zip(spec.kappa, spec.beta)])
        alpha = np.array([float(a) for a in spec.alpha])
        if z0 is not None:
            counts = np.rint(np.asarray(z0, dtype=float) * self.N**alpha)
        else:
            if x0 is None:
                x0 = net.initial
            if x0 is None:
                raise ValueError("no initial state given and the network carries none")
            counts = np.floor((self.N / spec.N0) ** alpha * np.asarray(x0, dtype=float) + 1e-9)
        self.x0 = counts.astype(np.int64)
        self.scale = self.N ** -alpha
        self.compiled = compile_network(net, self.rates)
        self.names = net.names

    def simulate(self, rng: RngStream, t_end: float, **kwargs) -> Trajectory:
        return simulate_compiled(self.compiled, self.names, self.x0, t_end, rng, scale=self.scale, **kwargs)

    def predicate(self, name: str, terms: Mapping[str, float], op: str, threshold: float) -> LinearPredicate:
        """Predicate on normalized values, translated to counts."""
        index = {n: i for i, n in enumerate(self.names)}
        coef = [0.0] * len(self.names)
        for n, c in terms.items():
            coef[index[n]] += float(c) * self.scale[index[n]]
        return LinearPredicate(name, tuple(coef), op, float(threshold))


def scaled_process(spec: ScalingSpec, gamma, N: float, **kwargs) -> ScaledProcess:
    return ScaledProcess(spec, gamma, N, **kwargs)
