"""Piecewise-deterministic simulation of limit models.

Continuous variables follow an ODE whose right-hand side may depend on the
discrete state; discrete variables jump through channels with
state-dependent intensities.  Between jumps the integrated total intensity
is accumulated with the trapezoid rule over the ODE solver's own steps,
and the next jump is placed where it reaches an Exp(1) threshold,
refined by bisection inside the bracketing step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .ode import OdeControls, Step, fill_grid, ode_steps
from .rng import RngStream
from .ssa import DEFAULT_EVENT_CAP, Exploded, LinearPredicate, Trajectory

Intensity = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class JumpChannel:
    name: str
    intensity: Intensity                 # (continuous, discrete) -> rate
    delta: tuple[float, ...]             # increment of the discrete variables


@dataclass(frozen=True)
class HybridModel:
    continuous: tuple[str, ...]
    discrete: tuple[str, ...]
    drift: Callable[[np.ndarray, np.ndarray], np.ndarray] | None
    channels: tuple[JumpChannel, ...]
    c0: tuple[float, ...]
    d0: tuple[float, ...]
    time_scale: float = 1.0              # factor from model time to reported time
    notes: tuple[str, ...] = ()

    @property
    def names(self) -> tuple[str, ...]:
        return self.continuous + self.discrete

    def predicate(self, name: str, terms, op: str, threshold: float) -> LinearPredicate:
        return LinearPredicate.on(self.names, name, terms, op, threshold)

    def total_intensity(self, c, d) -> tuple[float, list[float]]:
        rates = [max(float(ch.intensity(c, d)), 0.0) for ch in self.channels]
        return math.fsum(rates), rates


@dataclass(frozen=True)
class HybridControls:
    ode: OdeControls = OdeControls()
    integral_tol: float = 1e-10
    event_cap: int = DEFAULT_EVENT_CAP
    max_bisections: int = 200


def _bisect(model: HybridModel, step: Step, d, lam_a, acc, threshold, tol, max_iter):
    """Time in the step where the trapezoid integral reaches ``threshold``."""
    def excess(s):
        lam_s, _ = model.total_intensity(step.dense(s), d)
        return acc + 0.5 * (s - step.t_old) * (lam_a + lam_s) - threshold

    lo, hi = step.t_old, step.t_new
    s = hi
    for _ in range(max_iter):
        s = 0.5 * (lo + hi)
        e = excess(s)
        if abs(e) <= tol or hi - lo <= 4 * np.finfo(float).eps * max(abs(hi), 1.0):
            break
        if e < 0:
            lo = s
        else:
            hi = s
    return s


def simulate_hybrid(model: HybridModel, t_end: float, rng: RngStream, grid: Sequence[float] = (),
                    predicates: Sequence = (), stop_on_hit: bool = False,
                    controls: HybridControls = HybridControls(),
                    c0: Sequence[float] | None = None, d0: Sequence[float] | None = None) -> Trajectory:
    """Simulate ``model`` on [0, t_end] in model time.

    Predicates see the full vector (continuous then discrete) and are
    evaluated at time 0 and after every jump.  Every jump consumes two
    uniforms: one for the Exp(1) threshold, one to select the channel.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    nc, nd = len(model.continuous), len(model.discrete)
    c = np.array(model.c0 if c0 is None else c0, dtype=float)
    d = np.array(model.d0 if d0 is None else d0, dtype=float)
    if len(c) != nc or len(d) != nd:
        raise ValueError("initial state does not match the model's variables")
    grid = np.asarray(sorted(float(g) for g in grid), dtype=float)
    gv = np.full((len(grid), nc + nd), np.nan)
    g = 0
    predicates = list(predicates)
    x0 = np.concatenate([c, d])
    hits = {getattr(p, "name", f"p{i}"): (0.0 if p(x0) else None) for i, p in enumerate(predicates)}
    ev_t, ev_k = [], []
    deltas = np.zeros((len(model.channels), nc + nd))
    for j, ch in enumerate(model.channels):
        deltas[j, nc:] = ch.delta
    t = 0.0
    status = "t_end"
    pure_jump = nc == 0 or model.drift is None

    def all_hit():
        return predicates and all(h is not None for h in hits.values())

    if stop_on_hit and all_hit():
        status = "hitting"
    while status == "t_end":
        threshold = -math.log(rng.open01())
        u_select = rng.random()
        t_jump = None
        if pure_jump:
            lam, _ = model.total_intensity(c, d)
            if lam > 0 and t + threshold / lam <= t_end:
                t_jump = t + threshold / lam
            end = t_jump if t_jump is not None else t_end
            while g < len(grid) and (grid[g] < end if t_jump is not None else grid[g] <= end):
                if grid[g] >= t:
                    gv[g, :nc] = c
                    gv[g, nc:] = d
                g += 1
        else:
            d_now = d.copy()

            def rhs(_t, y):
                return np.asarray(model.drift(y, d_now), dtype=float)

            acc = 0.0
            lam_a, _ = model.total_intensity(c, d)
            for step in ode_steps(rhs, t, c, t_end, controls.ode):
                lam_b, _ = model.total_intensity(step.y_new, d)
                inc = 0.5 * (step.t_new - step.t_old) * (lam_a + lam_b)
                if acc + inc >= threshold and inc > 0:
                    t_jump = _bisect(model, step, d, lam_a, acc, threshold,
                                     controls.integral_tol, controls.max_bisections)
                    g = fill_grid(grid, gv, g, step, upto=t_jump, inclusive=False, extra=d)
                    c = np.asarray(step.dense(t_jump), dtype=float)
                    break
                g = fill_grid(grid, gv, g, step, upto=step.t_new, inclusive=True, extra=d)
                acc += inc
                lam_a = lam_b
                c = step.y_new
            if t_jump is None:
                while g < len(grid) and grid[g] <= t_end:
                    if grid[g] >= t:
                        gv[g, :nc] = c
                        gv[g, nc:] = d
                    g += 1
        if t_jump is None:
            t = t_end
            break
        if len(ev_t) >= controls.event_cap:
            status = "event_cap"
            break
        lam, rates = model.total_intensity(c, d)
        if lam <= 0:
            # the bisection landed where every channel is off; treat as no jump
            t = t_jump
            continue
        target = u_select * lam
        run = 0.0
        k = len(rates) - 1
        for j, r in enumerate(rates):
            run += r
            if target < run:
                k = j
                break
        while k > 0 and rates[k] == 0.0:
            k -= 1
        d = d + np.asarray(model.channels[k].delta, dtype=float)
        t = t_jump
        ev_t.append(t)
        ev_k.append(k)
        if predicates:
            x = np.concatenate([c, d])
            for i, p in enumerate(predicates):
                name = getattr(p, "name", f"p{i}")
                if hits[name] is None and p(x):
                    hits[name] = t
            if stop_on_hit and all_hit():
                status = "hitting"
    traj = Trajectory(model.names, x0, np.array(ev_t, dtype=float), np.array(ev_k, dtype=np.int64),
                      grid, gv, np.concatenate([c, d]), float(t), status, hits, deltas, None)
    if status == "event_cap":
        raise Exploded(f"event cap {controls.event_cap} reached at t = {t:.6g}", traj)
    return traj


class HybridProcess:
    """Replicate factory; reported times are model time times ``model.time_scale``."""

    def __init__(self, model: HybridModel, controls: HybridControls = HybridControls()):
        self.model = model
        self.controls = controls
        self.names = model.names

    def predicate(self, name, terms, op, threshold):
        return self.model.predicate(name, terms, op, threshold)

    def simulate(self, rng: RngStream, t_end: float, grid: Sequence[float] = (),
                 predicates: Sequence = (), stop_on_hit: bool = False, **_ignored) -> Trajectory:
        s = self.model.time_scale
        traj = simulate_hybrid(self.model, t_end / s, rng, [gt / s for gt in grid], predicates,
                               stop_on_hit, self.controls)
        if s != 1.0:
            traj.event_times = traj.event_times * s
            traj.grid_times = traj.grid_times * s
            traj.t_final *= s
            traj.hitting_times = {k: (None if v is None else v * s) for k, v in traj.hitting_times.items()}
        return traj


__all__ = ["HybridControls", "HybridModel", "HybridProcess", "JumpChannel", "simulate_hybrid"]
