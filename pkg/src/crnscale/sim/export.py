"""CSV and JSON writers for simulation output."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .ensemble import EnsembleStats
from .ssa import Trajectory


def _fmt(x) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(int(x)) if x.is_integer() and abs(x) < 2**53 else repr(x)


def write_trajectories_csv(trajectories: Sequence[Trajectory], path, observables: Mapping[str, Mapping[str, float]] | None = None):
    """One block per replicate: a ``# replicate r`` line, the header, then rows.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _trajectory_blocks(trajectories, path, observables)
        return path
    path = Path(path)
    with path.open("w", newline="") as fh:
        _trajectory_blocks(trajectories, fh, observables)
    return path


def _trajectory_blocks(trajectories, fh, observables):
    w = csv.writer(fh, lineterminator="\n")
    for r, traj in enumerate(trajectories):
        names = list(traj.names)
        cols = list(observables) if observables else names
        if observables:
            index = {n: i for i, n in enumerate(names)}
            W = np.zeros((len(cols), len(names)))
            for j, terms in enumerate(observables.values()):
                for n, c in terms.items():
                    W[j, index[n]] += c
            values = traj.grid_states @ W.T
        else:
            values = traj.grid_states
        fh.write(f"# replicate {r}\n")
        w.writerow(["time"] + cols)
        for t, row in zip(traj.grid_times, values):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def write_ensemble_csv(stats: EnsembleStats, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["time"]
        for o in stats.observables:
            header += [f"mean_{o}", f"std_{o}"]
        w.writerow(header)
        for i, t in enumerate(stats.grid):
            row = [_fmt(t)]
            for o in stats.observables:
                row += [_fmt(stats.mean[o][i]), _fmt(stats.std[o][i])]
            w.writerow(row)
    return path


def write_hitting_csv(stats: EnsembleStats, directory, time_factor: float = 1.0) -> list[Path]:
    """One single-column file per predicate; ``nan`` marks replicates that never hit."""
    out = []
    for name, samples in stats.hitting.items():
        path = Path(directory) / f"hitting_{name}.csv"
        with path.open("w") as fh:
            fh.write(name + "\n")
            for s in samples:
                fh.write(_fmt(s * time_factor) + "\n")
        out.append(path)
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    if obj is None or isinstance(obj, (str, int, bool)):
        return obj
    return str(obj)


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, non-finite floats as strings."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def ensemble_summary(stats: EnsembleStats) -> dict:
    return {
        "replicates": stats.n,
        "seed": stats.seed,
        "terminated_by": stats.terminated_by,
        "hitting": {name: stats.hitting_summary(name) for name in stats.hitting},
        "final": {o: {"mean": stats.mean[o][-1] if len(stats.grid) else None,
                      "std": stats.std[o][-1] if len(stats.grid) else None} for o in stats.observables},
    }


__all__ = ["dumps", "ensemble_summary", "sha256_file", "sha256_text",
           "write_ensemble_csv", "write_hitting_csv", "write_json", "write_trajectories_csv"]
