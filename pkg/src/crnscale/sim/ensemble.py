"""Replicate ensembles with deterministic aggregation."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .ode import OdeControls, integrate_ode
from .rng import RngStream
from .ssa import LinearPredicate, Trajectory


class ReplicateError(RuntimeError):
    def __init__(self, replicate: int, cause: BaseException):
        super().__init__(f"replicate {replicate} failed: {type(cause).__name__}: {cause}")
        self.replicate = replicate
        self.cause = cause


Observable = str | Mapping[str, float]


def _observable_matrix(names: Sequence[str], observables: Mapping[str, Observable]) -> np.ndarray:
    index = {n: i for i, n in enumerate(names)}
    W = np.zeros((len(observables), len(names)))
    for row, spec in enumerate(observables.values()):
        terms = {spec: 1.0} if isinstance(spec, str) else spec
        for n, c in terms.items():
            if n not in index:
                raise KeyError(f"unknown variable {n!r} in observable")
            W[row, index[n]] += float(c)
    return W


@dataclass
class EnsembleStats:
    grid: np.ndarray
    observables: tuple[str, ...]
    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]
    count: np.ndarray                      # replicates that reached each grid time
    hitting: dict[str, np.ndarray]         # NaN where the predicate never held
    n: int
    seed: int
    terminated_by: dict[str, int] = field(default_factory=dict)
    trajectories: list[Trajectory] | None = None

    def standard_error(self, name: str) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.std[name] / np.sqrt(self.count)

    def hitting_summary(self, name: str) -> dict:
        s = self.hitting[name]
        hit = s[~np.isnan(s)]
        return {
            "n": int(len(s)), "hit": int(len(hit)),
            "mean": float(hit.mean()) if len(hit) else math.nan,
            "std": float(hit.std(ddof=1)) if len(hit) > 1 else 0.0,
        }


def run_ensemble(process, n: int, seed: int, t_end: float, grid: Sequence[float] = (),
                 observables: Sequence[str] | Mapping[str, Observable] | None = None,
                 predicates: Sequence = (), stop_on_hit: bool = False, threads: int = 1,
                 keep_trajectories: bool = False,
                 progress: Callable[[int, int], None] | None = None, **sim_kwargs) -> EnsembleStats:
    """Simulate ``n`` replicates; replicate ``r`` draws from ``RngStream(seed, r)``.

    ``observables`` are variable names or name -> {variable: coefficient}
    combinations, evaluated on the reported grid states.  Results do not
    depend on ``threads``: each replicate owns its stream and the reduction
    runs in replicate order.
    """
    if n < 1:
        raise ValueError("need at least one replicate")
    names = tuple(process.names)
    if observables is None:
        observables = {nm: nm for nm in names}
    elif not isinstance(observables, Mapping):
        observables = {nm: nm for nm in observables}
    W = _observable_matrix(names, observables)
    grid = np.asarray(sorted(float(g) for g in grid), dtype=float)
    predicates = list(predicates)

    def one(r: int) -> Trajectory:
        try:
            return process.simulate(RngStream(seed, r), t_end, grid=grid, predicates=predicates,
                                    stop_on_hit=stop_on_hit, **sim_kwargs)
        except Exception as exc:   # attribute the failure to its replicate
            raise ReplicateError(r, exc) from exc

    trajs: list[Trajectory] = [None] * n
    if threads <= 1:
        for r in range(n):
            trajs[r] = one(r)
            if progress:
                progress(r + 1, n)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for r, traj in enumerate(pool.map(one, range(n))):
                trajs[r] = traj
                if progress:
                    progress(r + 1, n)

    values = np.stack([t.grid_states @ W.T for t in trajs]) if len(grid) else np.zeros((n, 0, len(W)))
    count = np.sum(~np.isnan(values[:, :, 0]), axis=0) if len(W) else np.full(len(grid), n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(values, axis=0)
        std = np.nanstd(values, axis=0, ddof=1) if n > 1 else np.zeros_like(values[0])
    std = np.where(count[:, None] > 1, std, 0.0) if len(grid) else std
    obs = tuple(observables)
    hit_names = [getattr(p, "name", f"p{i}") for i, p in enumerate(predicates)]
    hitting = {h: np.array([math.nan if t.hitting_times.get(h) is None else t.hitting_times[h]
                            for t in trajs]) for h in hit_names}
    ends: dict[str, int] = {}
    for t in trajs:
        ends[t.terminated_by] = ends.get(t.terminated_by, 0) + 1
    return EnsembleStats(grid, obs, {o: mean[:, j] for j, o in enumerate(obs)},
                         {o: std[:, j] for j, o in enumerate(obs)}, count, hitting, n, seed,
                         dict(sorted(ends.items())), trajs if keep_trajectories else None)


class OdeProcess:
    """A deterministic vector field dressed as a replicate factory."""

    def __init__(self, rhs: Callable[[float, np.ndarray], np.ndarray], names: Sequence[str],
                 y0: Sequence[float], controls: OdeControls = OdeControls()):
        self.rhs = rhs
        self.names = tuple(names)
        self.y0 = np.asarray(y0, dtype=float)
        self.controls = controls

    def predicate(self, name, terms, op, threshold):
        return LinearPredicate.on(self.names, name, terms, op, threshold)

    def simulate(self, rng: RngStream, t_end: float, grid: Sequence[float] = (),
                 predicates: Sequence = (), stop_on_hit: bool = False, **_ignored) -> Trajectory:
        sol = integrate_ode(self.rhs, self.y0, (0.0, t_end), grid, self.controls)
        hits = {}
        for i, p in enumerate(predicates):
            name = getattr(p, "name", f"p{i}")
            hits[name] = next((float(t) for t, y in zip(sol.t, sol.y) if p(y)), None)
        return Trajectory(self.names, self.y0, np.zeros(0), np.zeros(0, dtype=np.int64), sol.grid_t,
                          sol.grid_y, sol.y[-1], float(sol.t[-1]), "t_end", hits, None, None)


__all__ = ["EnsembleStats", "OdeProcess", "ReplicateError", "run_ensemble"]
