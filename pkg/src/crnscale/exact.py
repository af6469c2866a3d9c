"""Exact rational polyhedral routines.

Two tools are provided, both over :class:`fractions.Fraction`:

* :func:`find_feasible_point` decides feasibility of a system of linear
  (in)equalities over the nonnegative orthant with a phase-one simplex
  using Bland's rule, and returns a rational witness.
* :func:`extreme_rays` computes the extreme rays of a pointed cone
  ``{x >= 0 : a_j . x = 0}`` by the double-description method, with each
  ray scaled to a primitive integer vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

Vector = tuple[Fraction, ...]


@dataclass(frozen=True)
class Constraint:
    """``coeffs . x  <sense>  rhs`` with sense one of ``>=``, ``<=``, ``==``."""

    coeffs: tuple[Fraction, ...]
    sense: str
    rhs: Fraction

    def __post_init__(self):
        if self.sense not in (">=", "<=", "=="):
            raise ValueError(f"unknown constraint sense {self.sense!r}")

    def holds(self, x: Sequence[Fraction]) -> bool:
        lhs = sum((c * v for c, v in zip(self.coeffs, x)), Fraction(0))
        if self.sense == ">=":
            return lhs >= self.rhs
        if self.sense == "<=":
            return lhs <= self.rhs
        return lhs == self.rhs


def as_fractions(values: Iterable) -> tuple[Fraction, ...]:
    return tuple(v if isinstance(v, Fraction) else Fraction(v) for v in values)


def dot(a: Sequence, b: Sequence):
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def find_feasible_point(constraints: Sequence[Constraint], n: int) -> Vector | None:
    """Return ``x >= 0`` satisfying every constraint, or ``None``.

    Phase-one simplex on a dense Fraction tableau.  Bland's rule rules out
    cycling, so the routine always terminates with an exact answer.
    """
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    kinds: list[str] = []
    for c in constraints:
        coeffs = list(as_fractions(c.coeffs))
        if len(coeffs) != n:
            raise ValueError("constraint length does not match dimension")
        b = Fraction(c.rhs)
        sense = c.sense
        if b < 0:
            coeffs = [-v for v in coeffs]
            b = -b
            sense = {">=": "<=", "<=": ">=", "==": "=="}[sense]
        rows.append(coeffs)
        rhs.append(b)
        kinds.append(sense)

    m = len(rows)
    if m == 0:
        return tuple(Fraction(0) for _ in range(n))

    # Column layout: originals | slack/surplus | artificials
    n_slack = sum(1 for k in kinds if k != "==")
    n_art = sum(1 for k in kinds if k != "<=")
    width = n + n_slack + n_art
    tableau = [[Fraction(0)] * (width + 1) for _ in range(m)]
    basis = [0] * m
    artificial = set()
    s_col = n
    a_col = n + n_slack
    for r in range(m):
        row = tableau[r]
        row[:n] = rows[r]
        row[width] = rhs[r]
        if kinds[r] == "<=":
            row[s_col] = Fraction(1)
            basis[r] = s_col
            s_col += 1
        elif kinds[r] == ">=":
            row[s_col] = Fraction(-1)
            s_col += 1
            row[a_col] = Fraction(1)
            basis[r] = a_col
            artificial.add(a_col)
            a_col += 1
        else:
            row[a_col] = Fraction(1)
            basis[r] = a_col
            artificial.add(a_col)
            a_col += 1

    # Objective: minimise the sum of artificials, kept as reduced costs.
    cost = [Fraction(0)] * (width + 1)
    for r in range(m):
        if basis[r] in artificial:
            for j in range(width + 1):
                cost[j] -= tableau[r][j]
    for j in artificial:
        cost[j] += 1

    while True:
        entering = next((j for j in range(width) if cost[j] < 0), None)
        if entering is None:
            break
        leaving = None
        best = None
        for r in range(m):
            a = tableau[r][entering]
            if a > 0:
                ratio = tableau[r][width] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leaving]):
                    best = ratio
                    leaving = r
        if leaving is None:
            # Phase-one objective is bounded below by zero; cannot happen.
            raise ArithmeticError("unbounded phase-one problem")
        _pivot(tableau, cost, leaving, entering)
        basis[leaving] = entering

    if -cost[width] != 0:
        return None
    x = [Fraction(0)] * n
    for r in range(m):
        if basis[r] < n:
            x[basis[r]] = tableau[r][width]
    return tuple(x)


def _pivot(tableau, cost, row, col):
    pivot_row = tableau[row]
    p = pivot_row[col]
    if p != 1:
        for j in range(len(pivot_row)):
            pivot_row[j] /= p
    for r, other in enumerate(tableau):
        if r != row:
            f = other[col]
            if f:
                for j in range(len(other)):
                    if pivot_row[j]:
                        other[j] -= f * pivot_row[j]
    f = cost[col]
    if f:
        for j in range(len(cost)):
            if pivot_row[j]:
                cost[j] -= f * pivot_row[j]


def primitive(v: Sequence[Fraction]) -> tuple[int, ...]:
    """Scale a nonzero rational vector to the primitive integer vector on its ray."""
    fr = as_fractions(v)
    den = 1
    for x in fr:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in fr]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    if g == 0:
        raise ValueError("zero vector has no primitive representative")
    return tuple(x // g for x in ints)


def extreme_rays(equations: Sequence[Sequence], n: int) -> list[tuple[int, ...]]:
    """Extreme rays of ``{x in R^n : x >= 0, a . x = 0 for a in equations}``.

    Starts from the unit vectors of the orthant and intersects with one
    hyperplane at a time (double description).  Rays produced by combining
    a positive and a negative ray are kept only if no other ray's support
    lies inside the union of the pair's supports (the combinatorial
    adjacency test).  Output is sorted and deterministic.
    """
    rays: list[tuple[Fraction, ...]] = [
        tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)
    ]
    for eq in equations:
        a = as_fractions(eq)
        if len(a) != n:
            raise ValueError("equation length does not match dimension")
        if not any(a):
            continue
        values = [dot(a, r) for r in rays]
        zero = [r for r, v in zip(rays, values) if v == 0]
        pos = [(r, v) for r, v in zip(rays, values) if v > 0]
        neg = [(r, v) for r, v in zip(rays, values) if v < 0]
        supports = [frozenset(i for i, x in enumerate(r) if x) for r in rays]
        new = list(zero)
        for rp, vp in pos:
            sp = frozenset(i for i, x in enumerate(rp) if x)
            for rn, vn in neg:
                sn = frozenset(i for i, x in enumerate(rn) if x)
                union = sp | sn
                adjacent = True
                for s, r in zip(supports, rays):
                    if r is rp or r is rn:
                        continue
                    if s <= union:
                        adjacent = False
                        break
                if not adjacent:
                    continue
                combo = tuple(-vn * x + vp * y for x, y in zip(rp, rn))
                new.append(tuple(Fraction(c) for c in primitive(combo)))
        rays = _dedupe_minimal(new)
    out = sorted({primitive(r) for r in rays}, key=lambda r: (sum(1 for x in r if x), r))
    return out


def _dedupe_minimal(rays):
    unique = {}
    for r in rays:
        unique[primitive(r)] = r
    keep = list(unique.values())
    supports = [frozenset(i for i, x in enumerate(r) if x) for r in keep]
    out = []
    for i, (r, s) in enumerate(zip(keep, supports)):
        if any(j != i and t < s for j, t in enumerate(supports)):
            continue
        out.append(r)
    return out
