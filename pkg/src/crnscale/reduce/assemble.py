"""Turn a closed limit model into something the hybrid simulator can run."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..sim.hybrid import HybridModel, JumpChannel
from .limit import LimitModel, ReductionError, TermKind, VariableKind, limit_rate


class NotClosed(ReductionError):
    pass


def _rate_function(model: LimitModel, k: int):
    averaged = model.averaged.get(k)
    if averaged is not None:
        return lambda values: float(averaged(values))
    spec = model.spec
    names = spec.network.names

    def rate(values: Mapping[str, float]) -> float:
        return limit_rate(spec, k, [values[n] for n in names])
    return rate


def to_hybrid(model: LimitModel, time_scale: float = 1.0) -> HybridModel:
    """Continuous variables carry the drift terms, discrete ones the jump channels.

    Frozen variables stay at their initial values; eliminated species are
    reported at their initial values too but never enter a rate, since a
    closed model routes every such dependence through an averaged intensity.
    """
    if not model.closed:
        raise NotClosed("limit model is not closed: " + "; ".join(model.unresolved))
    cont = tuple(v.name for v in model.of_kind(VariableKind.CONTINUOUS))
    disc = tuple(v.name for v in model.of_kind(VariableKind.DISCRETE))
    fixed = {v.name: float(v.initial) for v in model.variables
             if v.kind in (VariableKind.FROZEN, VariableKind.ELIMINATED)}

    def values_of(c, d):
        values = dict(fixed)
        values.update(zip(cont, (float(x) for x in c)))
        values.update(zip(disc, (float(x) for x in d)))
        return values

    drift_terms: dict[int, list[tuple[int, float]]] = {}
    jump_terms: dict[int, dict[int, float]] = {}
    for t in model.terms:
        if t.kind is TermKind.DRIFT and t.variable in cont:
            drift_terms.setdefault(t.reaction, []).append((cont.index(t.variable), float(t.coefficient)))
        elif t.kind is TermKind.JUMP and t.variable in disc:
            jump_terms.setdefault(t.reaction, {})[disc.index(t.variable)] = float(t.coefficient)

    drift_rates = [(k, _rate_function(model, k), terms) for k, terms in sorted(drift_terms.items())]

    def drift(c, d):
        values = values_of(c, d)
        out = np.zeros(len(cont))
        for _, rate, terms in drift_rates:
            r = rate(values)
            for j, coef in terms:
                out[j] += coef * r
        return out

    channels = []
    for k, deltas in sorted(jump_terms.items()):
        rate = _rate_function(model, k)
        delta = tuple(deltas.get(j, 0.0) for j in range(len(disc)))
        channels.append(JumpChannel(model.network.reaction_name(k),
                                    (lambda c, d, rate=rate: rate(values_of(c, d))), delta))
    c0 = tuple(float(model.variable(n).initial) for n in cont)
    d0 = tuple(float(model.variable(n).initial) for n in disc)
    return HybridModel(cont, disc, drift if cont else None, tuple(channels), c0, d0,
                       float(time_scale), tuple(model.caveats))
