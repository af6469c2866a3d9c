import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crnscale import gallery
from crnscale.core import (Network, NegativeCount, apply_reaction, classical_ode_rhs, conservation_laws,
                           intensity, validate)


def net(names, reactions, **kw):
    return Network.build(names, reactions, **kw)


# ----------------------------------------------------------- intensity

def test_binary_intensity_is_product_of_counts():
    n = net(["A", "B"], [({"A": 1, "B": 1}, {}, 2.0)])
    assert intensity(n, 0, (3, 4)) == 24.0


def test_dimerization_vanishes_with_one_molecule():
    n = net(["A"], [({"A": 2}, {}, 2.0)])
    assert intensity(n, 0, (1,)) == 0.0
    # no factor 1/2: kappa' x (x - 1)
    assert intensity(n, 0, (5,)) == 40.0


def test_zero_order_rate_ignores_state():
    n = net(["A"], [({}, {"A": 1}, 4.30)])
    for x in (0, 1, 17):
        assert intensity(n, 0, (x,)) == 4.30


def test_volume_divides_binary_rates_only():
    n = net(["A", "B"], [({"A": 1, "B": 1}, {}, 2.0), ({"A": 1}, {}, 3.0), ({}, {"A": 1}, 5.0)], volume=4.0)
    assert intensity(n, 0, (3, 4)) == pytest.approx(6.0)
    assert intensity(n, 1, (3, 4)) == 9.0
    assert intensity(n, 2, (3, 4)) == 5.0


def test_third_order_uses_falling_factorial():
    n = net(["A"], [({"A": 3}, {}, 1.0)], volume=2.0)
    assert intensity(n, 0, (4,)) == pytest.approx(4 * 3 * 2 / 4.0)


def test_intensity_sweep_nonnegative_and_zero_below_requirement():
    n = net(["A", "B", "C"], [({"A": 2}, {"B": 1}, 1.5), ({"A": 1, "B": 1}, {"C": 1}, 0.7),
                              ({"C": 1}, {}, 2.0), ({}, {"A": 1}, 1.0), ({"B": 2}, {"A": 1}, 0.3)])
    for x in itertools.product(range(4), repeat=3):
        for k, r in enumerate(n.reactions):
            lam = intensity(n, k, x)
            assert lam >= 0
            if any(xi < nu for xi, nu in zip(x, r.nu)):
                assert lam == 0


# ----------------------------------------------------------- apply_reaction

def test_apply_reaction_updates_counts():
    n = net(["S1", "S2", "S3"], [({"S1": 1, "S2": 1}, {"S3": 1}, 1.0), ({}, {"S1": 1}, 1.0)])
    assert apply_reaction(n, (3, 4, 0), 0) == (2, 3, 1)
    assert apply_reaction(n, (0, 0, 0), 1) == (1, 0, 0)


def test_infeasible_jump_raises():
    n = net(["S1", "S2"], [({"S1": 1}, {"S2": 1}, 1.0)])
    with pytest.raises(NegativeCount):
        apply_reaction(n, (0, 1), 0)


def test_reverse_reaction_restores_state():
    n = net(["A", "B", "C"], [({"A": 1, "B": 1}, {"C": 1}, 1.0), ({"C": 1}, {"A": 1, "B": 1}, 1.0)])
    x = (2, 5, 1)
    assert apply_reaction(n, apply_reaction(n, x, 0), 1) == x


# ----------------------------------------------------------- conservation laws

def test_goutsias_promoter_total_is_conserved(goutsias):
    thetas = {law.theta for law in conservation_laws(goutsias)}
    assert (0, 0, 0, 1, 1, 1) in thetas


def test_enzyme_total_is_conserved():
    thetas = {law.theta for law in conservation_laws(gallery.network("michaelis_menten"))}
    assert (0, 1, 1, 0) in thetas


def test_open_network_has_no_conservation_law():
    assert conservation_laws(gallery.network("network36")) == []


def _random_network(draw_data):
    n_species, reactions = draw_data
    names = [f"S{i}" for i in range(n_species)]
    recs = []
    for lhs, rhs in reactions:
        recs.append(({names[i]: c for i, c in enumerate(lhs) if c},
                     {names[i]: c for i, c in enumerate(rhs) if c}, 1.0))
    return Network.build(names, recs)


@st.composite
def small_networks(draw):
    s = draw(st.integers(1, 4))
    vec = st.lists(st.integers(0, 2), min_size=s, max_size=s)
    reactions = draw(st.lists(st.tuples(vec, vec).filter(lambda p: p[0] != p[1]), min_size=1, max_size=6))
    return _random_network((s, reactions))


@settings(max_examples=60, deadline=None)
@given(small_networks())
def test_conservation_laws_annihilate_every_reaction(n):
    for law in conservation_laws(n):
        assert all(t >= 0 for t in law.theta) and any(law.theta)
        for r in n.reactions:
            assert sum(Fraction(t) * z for t, z in zip(law.theta, r.zeta)) == 0


@settings(max_examples=60, deadline=None)
@given(small_networks(), st.lists(st.floats(0, 10), min_size=4, max_size=4))
def test_ode_rhs_orthogonal_to_conservation_laws(n, z):
    rhs = classical_ode_rhs(n, z[:n.n_species], [1.0] * n.n_reactions)
    for law in conservation_laws(n):
        assert abs(np.dot(law.theta, rhs)) <= 1e-9 * (1 + np.abs(rhs).sum() * max(law.theta))


# ----------------------------------------------------------- rate equations

def test_ode_rhs_linear_conversion():
    n = net(["A", "B"], [({"A": 1}, {"B": 1}, 1.0)])
    assert np.allclose(classical_ode_rhs(n, (2, 0), (1.0,)), (-2, 2))


def test_ode_rhs_zero_without_inflow():
    n = gallery.goutsias()
    assert np.all(classical_ode_rhs(n, np.zeros(6)) == 0)


def test_ode_rhs_birth_death_fixed_point():
    n = net(["A"], [({}, {"A": 1}, 3.0), ({"A": 1}, {}, 1.0)])
    assert np.allclose(classical_ode_rhs(n, (3.0,), (3.0, 1.0)), (0.0,))


# ----------------------------------------------------------- validation

def test_validate_flags_high_order():
    diags = validate(net(["S1", "S2"], [({"S1": 3}, {"S2": 1}, 1.0)]))
    assert any("order 3" in d.message for d in diags)


def test_validate_flags_nonpositive_rate():
    diags = validate(net(["S1", "S2"], [({"S1": 1}, {"S2": 1}, 0.0)]))
    assert any("nonpositive rate" in d.message for d in diags)


def test_validate_flags_duplicates_and_inert_species():
    n = net(["A", "B", "C"], [({"A": 1}, {"B": 1}, 1.0), ({"A": 1}, {"B": 1}, 2.0)])
    messages = " | ".join(d.message for d in validate(n))
    assert "duplicate" in messages
    assert "C" in messages


def test_shipped_goutsias_network_is_clean(goutsias):
    assert validate(goutsias) == []
