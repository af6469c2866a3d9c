"""Closed-form equilibria and the gallery's hand-checkable reduced models."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..core import Network
from ..scaling import ScalingSpec
from .averaging import Equilibrium
from .limit import LimitModel, build_limit_model


class NoRootInRange(ArithmeticError):
    pass


# -- dimerization M + M <-> D ------------------------------------------------

def goutsias_mu(m: int, kappa9: float, kappa10: float) -> Equilibrium:
    """Stationary law of the dimerization pair on ``z1 + 2 z2 = m``.

    Weights are ``r**(z1+z2) / (z1! z2!)`` with ``r = kappa10/kappa9``,
    computed in log space; states are listed by increasing ``z2``.
    """
    m = int(m)
    if m < 0:
        raise ValueError("m must be nonnegative")
    if not (kappa9 > 0 and kappa10 > 0):
        raise ValueError("rates must be positive")
    log_r = math.log(kappa10 / kappa9)
    support = tuple((m - 2 * j, j) for j in range(m // 2 + 1))
    logw = np.array([(z1 + z2) * log_r - math.lgamma(z1 + 1) - math.lgamma(z2 + 1) for z1, z2 in support])
    w = np.exp(logw - logw.max())
    probs = w / w.sum()
    # detailed balance between (z1, z2) and (z1 - 2, z2 + 1) holds exactly
    flux = [abs(kappa9 * z1 * (z1 - 1) * p - kappa10 * (z2 + 1) * q)
            for (z1, z2), p, q in zip(support, probs, probs[1:])]
    return Equilibrium((0, 1), support, probs, float(max(flux, default=0.0)), 0.0)


def goutsias_alpha(m: int, kappa9: float, kappa10: float) -> float:
    """Mean dimer count under ``goutsias_mu(m)``."""
    eq = goutsias_mu(m, kappa9, kappa10)
    return float(sum(p * z2 for (_, z2), p in zip(eq.support, eq.probs)))


def alpha_moment_closure(m: float, kappa9: float, kappa10: float) -> float:
    """Root in [0, m/2] of ``kappa10 a = kappa9 (m - 2a)(m - 2a - 1)``.

    As a quadratic ``A a^2 + B a + C = 0`` with ``A = 4 kappa9``,
    ``B = kappa9 (2 - 4m) - kappa10`` and ``C = kappa9 m (m - 1)``; the
    smaller root is taken in the cancellation-free form ``2C / (-B + sqrt(B^2 - 4AC))``.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    A = 4.0 * kappa9
    B = kappa9 * (2.0 - 4.0 * m) - kappa10
    C = kappa9 * m * (m - 1.0)
    disc = B * B - 4.0 * A * C
    if disc < 0:
        raise NoRootInRange(f"no real root for m = {m}")
    denom = -B + math.sqrt(disc)
    roots = [2.0 * C / denom if denom != 0 else 0.0, (-B + math.sqrt(disc)) / (2.0 * A)]
    slack = 1e-12 * max(1.0, m)
    for a in roots:
        if -slack <= a <= m / 2 + slack:
            return min(max(a, 0.0), m / 2)
    raise NoRootInRange(f"no root in [0, {m / 2}] for m = {m}")


def phi_pair(y: float, kappa9: float, kappa10: float) -> tuple[float, float]:
    """Monomer and dimer levels on ``z1 + 2 z2 = y`` with ``kappa9 z1^2 = kappa10 z2``."""
    if y < 0:
        raise ValueError("y must be nonnegative")
    phi1 = 2.0 * kappa10 * y / (math.sqrt(kappa10 * kappa10 + 8.0 * kappa9 * kappa10 * y) + kappa10)
    return phi1, (y - phi1) / 2.0


# -- enzyme kinetics ---------------------------------------------------------

def michaelis_menten_rhs(x1: float, M: float, kappa) -> float:
    k1, k2, k3 = (float(k) for k in kappa)
    return -M * k1 * k3 * x1 / (k2 + k3 + k1 * x1)


# -- reduced models ----------------------------------------------------------

def mastny_reduced_model(kappa1: float, kappa2: float, kappa3: float,
                         z1_0: float, z3_0: float = 0.0) -> LimitModel:
    """Single-channel jump model ``S1 -> 2 S3`` with the effective decay rate.

    The channel the eliminated intermediate would have taken back to S1 is
    exposed as the companion intensity ``returned``.
    """
    if min(kappa1, kappa2, kappa3) <= 0:
        raise ValueError("rates must be positive")
    forward = kappa1 * kappa3 / (kappa2 + kappa3)
    back = kappa1 * kappa2 / (kappa2 + kappa3)
    net = Network.build(["S1", "S3"], [({"S1": 1}, {"S3": 2}, forward, "effective")])
    spec = ScalingSpec(net, 10.0, (0, 0), (0,))
    model = build_limit_model(spec, 0, z0=(z1_0, z3_0), check_admissible=False)
    return replace(model, companions={"returned": lambda values: back * values["S1"]},
                   caveats=model.caveats + ("reduced model for an unbalanced network; "
                                            "convergence holds for finite-dimensional distributions",))


def goutsias_kappa(spec: ScalingSpec) -> tuple[float, ...]:
    return tuple(float(k) for k in spec.kappa)


GOUTSIAS_AUX = {"Z12": (1, 2, 0, 0, 2, 0), "Z45": (0, 0, 0, 1, 1, 0)}


def goutsias_first_scale(spec: ScalingSpec) -> LimitModel:
    """The gamma = 0 limit: dimerization ODE with promoter jumps."""
    return build_limit_model(spec, 0)


def goutsias_second_scale(spec: ScalingSpec) -> LimitModel:
    """The gamma = 1 limit: mRNA birth-death with the averaged transcription rate."""
    k = goutsias_kappa(spec)

    def transcription(values):
        _, p2 = phi_pair(values["Z12"], k[8], k[9])
        return k[2] * k[4] * p2 / (k[5] + k[4] * p2) * values["Z45"]
    return build_limit_model(spec, 1, aux=GOUTSIAS_AUX, averaged={2: transcription})


def goutsias_g2_model(spec: ScalingSpec) -> LimitModel:
    """The gamma = 2 limit ("G2"): monomer pool ODE driven by promoter jumps."""
    k = goutsias_kappa(spec)

    def bound_fraction(values):
        _, p2 = phi_pair(values["Z12"], k[8], k[9])
        return p2, k[4] * p2 / (k[5] + k[4] * p2) * values["Z45"]

    def translation(values):
        _, z5 = bound_fraction(values)
        return k[0] * k[2] / k[3] * z5

    def monomer_decay(values):
        p1, _ = phi_pair(values["Z12"], k[8], k[9])
        return k[1] * p1

    def second_binding(values):
        p2, z5 = bound_fraction(values)
        return k[6] * p2 * z5

    return build_limit_model(spec, 2, aux=GOUTSIAS_AUX,
                             averaged={0: translation, 1: monomer_decay, 6: second_binding})


__all__ = [
    "GOUTSIAS_AUX", "NoRootInRange", "alpha_moment_closure",
    "goutsias_alpha", "goutsias_first_scale", "goutsias_g2_model", "goutsias_mu",
    "goutsias_second_scale", "mastny_reduced_model", "michaelis_menten_rhs", "phi_pair",
]
