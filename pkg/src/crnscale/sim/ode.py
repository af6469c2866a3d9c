"""Explicit Runge-Kutta integration with dense output.

Adaptive steppers are scipy's ``RK45``/``DOP853``/``RK23`` classes driven
one step at a time, so the hybrid simulator can inspect every accepted step.
``RK4`` is a fixed-step classical scheme with cubic Hermite interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.integrate import DOP853, RK23, RK45

_ADAPTIVE = {"RK45": RK45, "DOP853": DOP853, "RK23": RK23}


class StepSizeUnderflow(RuntimeError):
    pass


@dataclass(frozen=True)
class OdeControls:
    method: str = "RK45"
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = math.inf
    first_step: float | None = None
    fixed_step: float | None = None    # required for RK4

    def __post_init__(self):
        if self.method not in _ADAPTIVE and self.method != "RK4":
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "RK4" and not (self.fixed_step and self.fixed_step > 0):
            raise ValueError("RK4 needs a positive fixed_step")


@dataclass
class Step:
    t_old: float
    t_new: float
    y_old: np.ndarray
    y_new: np.ndarray
    dense: Callable[[float], np.ndarray]


def _hermite(t0, t1, y0, y1, f0, f1):
    h = t1 - t0

    def dense(t):
        s = (t - t0) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
    return dense


def ode_steps(fun: Callable[[float, np.ndarray], np.ndarray], t0: float, y0: Sequence[float],
              t_bound: float, controls: OdeControls = OdeControls()) -> Iterator[Step]:
    """Yield accepted steps from ``t0`` to ``t_bound``."""
    y0 = np.asarray(y0, dtype=float)
    if t_bound <= t0:
        return
    if controls.method == "RK4":
        t, y = float(t0), y0.copy()
        f = np.asarray(fun(t, y), dtype=float)
        while t < t_bound:
            h = min(controls.fixed_step, t_bound - t)
            k1 = f
            k2 = np.asarray(fun(t + h / 2, y + h / 2 * k1), dtype=float)
            k3 = np.asarray(fun(t + h / 2, y + h / 2 * k2), dtype=float)
            k4 = np.asarray(fun(t + h, y + h * k3), dtype=float)
            y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t_new = t_bound if t + h >= t_bound else t + h
            if not np.all(np.isfinite(y_new)):
                raise StepSizeUnderflow(f"non-finite state at t = {t_new:.6g}")
            f_new = np.asarray(fun(t_new, y_new), dtype=float)
            yield Step(t, t_new, y, y_new, _hermite(t, t_new, y, y_new, k1, f_new))
            t, y, f = t_new, y_new, f_new
        return
    kwargs = dict(rtol=controls.rtol, atol=controls.atol, max_step=controls.max_step)
    if controls.first_step is not None:
        kwargs["first_step"] = controls.first_step
    solver = _ADAPTIVE[controls.method](fun, float(t0), y0, float(t_bound), **kwargs)
    while solver.status == "running":
        t_old = solver.t
        y_old = solver.y.copy()
        message = solver.step()
        if solver.status == "failed":
            raise StepSizeUnderflow(f"integration failed at t = {solver.t:.6g}: {message}")
        interp = solver.dense_output()
        yield Step(t_old, solver.t, y_old, solver.y.copy(), interp)


@dataclass
class OdeSolution:
    t: np.ndarray          # accepted step end points, starting with t0
    y: np.ndarray          # states at ``t``
    grid_t: np.ndarray
    grid_y: np.ndarray


def integrate_ode(rhs: Callable[[float, np.ndarray], np.ndarray], y0: Sequence[float],
                  t_span: tuple[float, float], grid: Sequence[float] | None = None,
                  controls: OdeControls = OdeControls()) -> OdeSolution:
    t0, t1 = float(t_span[0]), float(t_span[1])
    y0 = np.asarray(y0, dtype=float)
    grid = np.asarray(sorted(grid) if grid is not None else [], dtype=float)
    gy = np.full((len(grid), len(y0)), np.nan)
    g = 0
    while g < len(grid) and grid[g] <= t0:
        if grid[g] == t0:
            gy[g] = y0
        g += 1
    ts, ys = [t0], [y0]
    for step in ode_steps(rhs, t0, y0, t1, controls):
        g = fill_grid(grid, gy, g, step, upto=step.t_new, inclusive=True)
        ts.append(step.t_new)
        ys.append(step.y_new)
    return OdeSolution(np.array(ts), np.array(ys), grid, gy)


def fill_grid(grid, out, g, step: Step, upto: float, inclusive: bool, extra=None) -> int:
    """Write dense-output values for grid points up to ``upto``; return next index."""
    while g < len(grid) and (grid[g] <= upto if inclusive else grid[g] < upto):
        if grid[g] >= step.t_old:
            y = step.y_new if grid[g] == step.t_new else step.dense(grid[g])
            out[g, :len(y)] = y
            if extra is not None:
                out[g, len(y):] = extra
        g += 1
    return g
