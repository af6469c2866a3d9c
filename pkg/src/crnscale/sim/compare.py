"""Full-versus-reduced comparisons on a common time axis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .ensemble import EnsembleStats


class GridMismatch(ValueError):
    pass


@dataclass
class ObservableComparison:
    name: str
    full_mean: np.ndarray
    reduced_mean: np.ndarray        # rescaled to full units
    difference: np.ndarray          # full - reduced
    bands_overlap: np.ndarray       # |difference| <= std_full + std_reduced


@dataclass
class HittingComparison:
    name: str
    full_mean: float
    reduced_mean: float             # rescaled to full time
    ratio: float                    # reduced / full
    full_hit: int
    reduced_hit: int
    full_n: int
    reduced_n: int


@dataclass
class Comparison:
    times: np.ndarray
    observables: dict[str, ObservableComparison]
    hitting: dict[str, HittingComparison]
    time_factor: float
    magnitude_factors: dict[str, float]

    def max_abs_difference(self, name: str) -> float:
        return float(np.nanmax(np.abs(self.observables[name].difference)))


def compare_models(full: EnsembleStats, reduced: EnsembleStats, N0: float, gamma,
                   alphas: Mapping[str, Fraction | float] | None = None,
                   names: Mapping[str, str] | None = None) -> Comparison:
    """Put ``reduced`` on the full model's axes and difference the two.

    Reduced time ``s`` corresponds to full time ``s * N0**gamma`` and a
    reduced value ``z`` of a variable with exponent ``alpha`` to
    ``z * N0**alpha``.  ``names`` maps full observable names to reduced ones
    where they differ.
    """
    factor = float(N0) ** float(gamma)
    alphas = dict(alphas or {})
    names = dict(names or {})
    scaled_grid = reduced.grid * factor
    if len(scaled_grid) != len(full.grid) or not np.allclose(scaled_grid, full.grid, rtol=1e-9, atol=1e-12):
        raise GridMismatch(f"reduced grid times N0^gamma = {factor:g} do not match the full grid")
    obs = {}
    mags = {}
    for name in full.observables:
        rname = names.get(name, name)
        if rname not in reduced.mean:
            continue
        mag = float(N0) ** float(alphas.get(rname, 0))
        mags[name] = mag
        red = reduced.mean[rname] * mag
        diff = full.mean[name] - red
        overlap = np.abs(diff) <= full.std[name] + reduced.std[rname] * mag
        obs[name] = ObservableComparison(name, full.mean[name], red, diff, overlap)
    hits = {}
    for name, samples in full.hitting.items():
        rname = names.get(name, name)
        if rname not in reduced.hitting:
            continue
        f = full.hitting_summary(name)
        r = reduced.hitting_summary(rname)
        rmean = r["mean"] * factor
        hits[name] = HittingComparison(name, f["mean"], rmean,
                                       rmean / f["mean"] if f["mean"] else math.nan,
                                       f["hit"], r["hit"], f["n"], r["n"])
    return Comparison(full.grid, obs, hits, factor, mags)


def hitting_table(comparison: Comparison) -> str:
    lines = [f"{'predicate':<12}{'full mean':>12}{'reduced mean':>15}{'ratio':>8}{'hit (full/red)':>22}"]
    for h in comparison.hitting.values():
        lines.append(f"{h.name:<12}{h.full_mean:>12.2f}{h.reduced_mean:>15.2f}{h.ratio:>8.3f}"
                     f"{f'{h.full_hit}/{h.full_n}, {h.reduced_hit}/{h.reduced_n}':>22}")
    return "\n".join(lines) + "\n"


__all__ = ["Comparison", "GridMismatch", "HittingComparison", "ObservableComparison",
           "compare_models", "hitting_table"]
