import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from crnscale import gallery
from crnscale.core import Network, classical_ode_rhs
from crnscale.exact import dot
from crnscale.reduce import (GOUTSIAS_AUX, EmptyStateSpace, InadmissibleScaleWarning, NotClosed, NotInK2,
                             NotIrreducible, ReducedModelMismatch, ReductionError, TermKind, VariableKind,
                             alpha_moment_closure, averaged_intensity, averaged_limit_model, build_limit_model,
                             classify_gap, fast_generator, format_reduced, goutsias_alpha, goutsias_first_scale,
                             goutsias_g2_model, goutsias_mu, goutsias_second_scale, limit_rate,
                             mastny_reduced_model, michaelis_menten_rhs, parse_reduced, phi_pair, reduce_network,
                             stationary_distribution, to_hybrid)
from crnscale.scaling import ScalingSpec
from crnscale.sim import RngStream, simulate_hybrid

K9_T1, K10_T1 = 0.0830, 0.500      # first-scaling rates of the dimerization pair
K9_T3, K10_T3 = 8.30, 0.500


def kinds(model):
    return {v.name: v.kind for v in model.variables}


def mm_spec(kappa=(1.0, 1.0, 1.0)):
    net = gallery.network("michaelis_menten")
    return ScalingSpec.from_kappa(net, 100, (1, 0, 0, 1), (0, 1, 1), kappa)


# ----------------------------------------------------------- classification

def test_gap_classification():
    assert classify_gap(Fraction(-1), Fraction(0)) is TermKind.VANISHING
    assert classify_gap(Fraction(0), Fraction(0)) is TermKind.JUMP
    assert classify_gap(Fraction(0), Fraction(1)) is TermKind.DRIFT
    assert classify_gap(Fraction(1, 2), Fraction(1)) is TermKind.FAST


def test_table1_first_scale(table1):
    model = build_limit_model(table1, 0)
    k = kinds(model)
    assert k["M"] is k["D"] is VariableKind.DISCRETE
    assert all(k[n] is VariableKind.FROZEN for n in ("RNA", "DNA", "DNA_D", "DNA_2D"))
    assert model.reactions_of_kind("M", TermKind.JUMP) == [8, 9]
    assert model.reactions_of_kind("D", TermKind.JUMP) == [8, 9]
    assert model.closed


def test_table3_first_scale(table3):
    model = build_limit_model(table3, 0)
    k = kinds(model)
    assert k["M"] is k["D"] is VariableKind.CONTINUOUS
    assert k["DNA"] is k["DNA_D"] is VariableKind.DISCRETE
    assert k["RNA"] is k["DNA_2D"] is VariableKind.FROZEN
    assert model.reactions_of_kind("M", TermKind.DRIFT) == [8, 9]
    assert model.reactions_of_kind("D", TermKind.DRIFT) == [8, 9]
    assert model.reactions_of_kind("DNA", TermKind.JUMP) == [4, 5]
    assert model.reactions_of_kind("DNA_D", TermKind.JUMP) == [4, 5]


def test_table3_first_scale_drift_is_dimerization(table3):
    hybrid = to_hybrid(build_limit_model(table3, 0))
    assert hybrid.continuous == ("M", "D")
    for m, d in [(0.02, 0.06), (1.0, 0.5), (3.0, 0.0)]:
        want = (2 * K10_T3 * d - 2 * K9_T3 * m * m, K9_T3 * m * m - K10_T3 * d)
        assert hybrid.drift(np.array([m, d]), np.array([0.0, 2.0])) == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("name", ["goutsias", "michaelis_menten"])
def test_classical_scaling_gives_mass_action(name):
    net = gallery.network(name)
    spec = ScalingSpec.classical(net)
    model = build_limit_model(spec, 0, check_admissible=False)
    assert all(v.kind is VariableKind.CONTINUOUS for v in model.variables)
    hybrid = to_hybrid(model)
    rng = np.random.default_rng(3)
    for _ in range(5):
        z = rng.uniform(0, 3, net.n_species)
        got = hybrid.drift(z, np.zeros(0))
        assert got == pytest.approx(classical_ode_rhs(net, z, spec.kappa), rel=1e-12, abs=1e-12)


def test_frozen_variables_keep_their_initial_values(table1):
    model = build_limit_model(table1, 0)
    for v in model.of_kind(VariableKind.FROZEN):
        assert all(t.kind is TermKind.VANISHING for t in model.terms_for(v.name))
        assert v.initial == model.z0[v.species]
    traj = simulate_hybrid(to_hybrid(model), 5.0, RngStream(0, 0), grid=[0, 2.5, 5])
    assert "RNA" not in traj.names and traj.n_events > 0


def test_aux_outside_invariant_cone_rejected(table3):
    with pytest.raises(NotInK2):
        build_limit_model(table3, 1, aux={"bad": (1, 0, 0, 0, 0, 0)})


def test_aux_name_clash_rejected(table3):
    with pytest.raises(ReductionError):
        build_limit_model(table3, 1, aux={"M": (1, 2, 0, 0, 2, 0)})


def test_inadmissible_gamma_warns():
    spec = ScalingSpec(gallery.network("network36"), 100, (0, 0), (2, 3, 3, 1))
    with pytest.warns(InadmissibleScaleWarning):
        build_limit_model(spec, 0)


def test_aux_coefficients_use_top_block(table3):
    model = build_limit_model(table3, 2, aux=GOUTSIAS_AUX)
    for name, theta in GOUTSIAS_AUX.items():
        a = model.variable(name).alpha
        top = [t if table3.alpha[i] == a else 0 for i, t in enumerate(theta)]
        for t in model.terms_for(name):
            assert dot(theta, table3.network.reactions[t.reaction].zeta) != 0
            assert t.coefficient == dot(top, table3.network.reactions[t.reaction].zeta)


def test_g2_structure(table3):
    model = goutsias_g2_model(table3)
    k = kinds(model)
    assert k["Z12"] is VariableKind.CONTINUOUS
    assert k["Z45"] is k["DNA_2D"] is VariableKind.DISCRETE
    assert model.reactions_of_kind("Z12", TermKind.DRIFT) == [0, 1]
    assert model.reactions_of_kind("Z45", TermKind.JUMP) == [6, 7]
    assert model.closed


def test_unaveraged_model_reports_unresolved(table3):
    model = build_limit_model(table3, 2, aux=GOUTSIAS_AUX)
    assert not model.closed and model.unresolved
    with pytest.raises(NotClosed):
        to_hybrid(model)


@st.composite
def scaled(draw):
    s = draw(st.integers(1, 4))
    names = [f"S{i}" for i in range(s)]
    vec = st.lists(st.integers(0, 2), min_size=s, max_size=s)
    recs = []
    for _ in range(draw(st.integers(1, 5))):
        lhs = draw(vec)
        rhs = draw(vec.filter(lambda v, lhs=lhs: v != lhs))
        recs.append(({n: c for n, c in zip(names, lhs) if c}, {n: c for n, c in zip(names, rhs) if c}, 1.0))
    net = Network.build(names, recs)
    alpha = draw(st.lists(st.integers(0, 2), min_size=s, max_size=s))
    beta = draw(st.lists(st.integers(-2, 2), min_size=len(recs), max_size=len(recs)))
    return ScalingSpec(net, 100, alpha, beta)


@settings(max_examples=80, deadline=None)
@given(scaled(), st.integers(-3, 3))
def test_classification_exhaustive_and_exclusive(spec, gamma):
    model = build_limit_model(spec, gamma, check_admissible=False)
    seen = {}
    for t in model.terms:
        key = (t.variable, t.reaction)
        assert key not in seen
        seen[key] = t
        v = model.variable(t.variable)
        assert t.exponent_gap == gamma + spec.rho[t.reaction] - v.alpha
        assert t.kind is classify_gap(t.exponent_gap, v.alpha)
    for i, s in enumerate(spec.network.species):
        for k, r in enumerate(spec.network.reactions):
            assert ((s.name, k) in seen) == bool(r.zeta[i])


# ----------------------------------------------------------- fast generators and stationary laws

def test_birth_chain_generator_and_poisson_law():
    net = gallery.network("birth_exchange")
    spec = ScalingSpec.from_kappa(net, 100, (0, 1), (0, 0, -1), (1.3, 0.7, 2.1))
    for z2 in (0.5, 1.0, 2.0):
        gen = fast_generator(spec, 1, (0, z2))
        # birth k1 + k3 z2 and death k2 z1 at every lattice point
        for s, t, rate, k in gen.transitions:
            y = gen.states[s][0]
            if gen.states[t][0] == y + 1:
                assert k in (0, 2)
            else:
                assert rate == pytest.approx(0.7 * y)
        eq = stationary_distribution(gen)
        mean = (1.3 + 2.1 * z2) / 0.7
        pmf = np.array([eq.prob((j,)) for j in range(200)])
        oracle = stats.poisson.pmf(np.arange(200), mean)
        assert 0.5 * np.abs(pmf - oracle).sum() < 1e-8
        assert eq.truncation_mass_bound < 1e-10


def test_dimer_pair_state_space(table1):
    gen = fast_generator(table1, 1, (5, 0, 0, 0, 2, 0), fast_species=(0, 1))
    assert sorted(gen.states) == [(5 - 2 * j, j) for j in range(3)][::-1] or \
        sorted(gen.states) == sorted((5 - 2 * j, j) for j in range(3))
    assert (1, 2) in gen.conserved


def test_dimer_pair_matches_closed_form(table1):
    for m in (0, 1, 4, 9, 30):
        gen = fast_generator(table1, 1, (m, 0, 0, 0, 2, 0), fast_species=(0, 1))
        eq = stationary_distribution(gen)
        mu = goutsias_mu(m, K9_T1, K10_T1)
        for y, p in zip(mu.support, mu.probs):
            assert eq.prob(y) == pytest.approx(p, abs=1e-12)


def test_enzyme_pair_is_binomial():
    spec = mm_spec((1.0, 2.0, 0.5))
    for x1, M in [(0.3, 1), (2.0, 5), (7.5, 20)]:
        eq = stationary_distribution(fast_generator(spec, 0, (x1, M, 0, 0)))
        free = 2.5 / (2.5 + x1)
        pmf = [eq.prob((j, M - j)) for j in range(M + 1)]
        assert pmf == pytest.approx(stats.binom.pmf(range(M + 1), M, free), abs=1e-12)


def test_promoter_flip_is_binomial(table3):
    k5, k6 = table3.kappa[4], table3.kappa[5]
    for y, n in [(0.05, 1), (1.0, 2), (3.0, 5)]:
        _, p2 = phi_pair(y, K9_T3, K10_T3)
        z = (0.0, p2, 0, n, 0, 0)
        eq = stationary_distribution(fast_generator(table3, 2, z, fast_species=(3, 4)))
        pmf = [eq.prob((j, n - j)) for j in range(n + 1)]
        assert pmf == pytest.approx(stats.binom.pmf(range(n + 1), n, k6 / (k6 + k5 * p2)), abs=1e-10)


def test_two_absorbing_states_are_not_irreducible():
    net = Network.build(["A", "B", "C"], [({"A": 1}, {"B": 1}, 1.0), ({"A": 1}, {"C": 1}, 1.0)])
    spec = ScalingSpec.uniform(net)
    gen = fast_generator(spec, 1, (1, 0, 0))
    with pytest.raises(NotIrreducible) as info:
        stationary_distribution(gen)
    assert sorted(map(sorted, info.value.classes)) == [[(0, 0, 1)], [(0, 1, 0)]]


def test_infeasible_conservation_is_empty(table1):
    with pytest.raises(EmptyStateSpace):
        fast_generator(table1, 1, (0,) * 6, fast_species=(0, 1), conserved_values={(1, 2): -1})


# ----------------------------------------------------------- averaged intensities

def test_enzyme_conversion_average():
    spec = mm_spec()
    eq = stationary_distribution(fast_generator(spec, 0, (1.0, 1, 0, 0)))
    assert averaged_intensity(spec, 2, eq, (1.0, 1, 0, 0)) == pytest.approx(1 / 3, rel=1e-12)


def test_averaged_drift_matches_michaelis_menten():
    spec = mm_spec((0.8, 1.5, 2.0))
    for M in (1, 5, 20):
        for x1 in (0.1, 1.0, 10.0):
            z = (x1, M, 0, 0)
            eq = stationary_distribution(fast_generator(spec, 0, z))
            drift = -averaged_intensity(spec, 0, eq, z) + averaged_intensity(spec, 1, eq, z)
            assert drift == pytest.approx(michaelis_menten_rhs(x1, M, (0.8, 1.5, 2.0)), rel=1e-9)


def test_transcription_average_matches_closed_form(table3):
    model = goutsias_second_scale(table3)
    k3, k5, k6 = table3.kappa[2], table3.kappa[4], table3.kappa[5]
    for z12, z45 in [(0.1, 2), (0.6, 1), (2.0, 2)]:
        _, p2 = phi_pair(z12, K9_T3, K10_T3)
        z = [0.0, p2, 0, z45, 0, 0]
        eq = stationary_distribution(fast_generator(table3, 1, z, fast_species=(3, 4)))
        generic = averaged_intensity(table3, 2, eq, z)
        assert model.averaged[2]({"Z12": z12, "Z45": z45}) == pytest.approx(generic, rel=1e-10)
        assert generic == pytest.approx(k3 * k5 * p2 * z45 / (k6 + k5 * p2), rel=1e-10)


def test_average_of_slow_reaction_is_its_rate():
    spec = mm_spec()
    z = (2.0, 3, 0, 0.4)
    eq = stationary_distribution(fast_generator(spec, 0, z))
    net = Network.build(["S1", "S2", "S3", "S4"], list(
        (r_lhs, r_rhs, 1.0) for r_lhs, r_rhs in [({"S1": 1, "S2": 1}, {"S3": 1}), ({"S3": 1}, {"S1": 1, "S2": 1}),
                                                 ({"S3": 1}, {"S2": 1, "S4": 1}), ({"S4": 1}, {})]))
    wide = ScalingSpec.from_kappa(net, 100, (1, 0, 0, 1), (0, 1, 1, 0), (1, 1, 1, 0.9))
    assert averaged_intensity(wide, 3, eq, z) == pytest.approx(limit_rate(wide, 3, z))


def test_generic_averaging_builds_closed_enzyme_model():
    spec = mm_spec()
    model = averaged_limit_model(spec, 0, z0=(1.0, 5, 0, 0))
    assert model.closed and model.recipe == "generic"
    hybrid = to_hybrid(model)
    got = hybrid.drift(np.array([2.0, 0.0]), np.zeros(0))
    assert got[0] == pytest.approx(michaelis_menten_rhs(2.0, 5, (1, 1, 1)), rel=1e-9)


def test_generic_averaging_rejects_abundant_fast_species(table3):
    with pytest.raises(ReductionError):
        averaged_limit_model(table3, 1, aux=GOUTSIAS_AUX)


# ----------------------------------------------------------- closed forms

def test_mu_examples():
    mu = goutsias_mu(0, K9_T1, K10_T1)
    assert mu.support == ((0, 0),) and mu.probs[0] == 1
    r = K10_T1 / K9_T1
    assert goutsias_mu(2, K9_T1, K10_T1).probs[1] == pytest.approx(r / (r * r / 2 + r), rel=1e-14)
    assert goutsias_mu(2, K9_T1, K10_T1).probs[1] == pytest.approx(0.24925, abs=5e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 300))
def test_mu_support_parity(m):
    mu = goutsias_mu(m, K9_T1, K10_T1)
    assert all(z1 % 2 == m % 2 and z1 + 2 * z2 == m for z1, z2 in mu.support)
    assert abs(mu.probs.sum() - 1) < 1e-12


def test_alpha_examples():
    r = K10_T1 / K9_T1
    assert goutsias_alpha(1, K9_T1, K10_T1) == 0
    assert goutsias_alpha(2, K9_T1, K10_T1) == pytest.approx(2 / (r + 2), rel=1e-13)
    assert goutsias_alpha(3, K9_T1, K10_T1) == pytest.approx(6 / (r + 6), rel=1e-13)
    assert goutsias_alpha(3, K9_T1, K10_T1) == pytest.approx(0.49900, abs=5e-6)


@pytest.mark.parametrize("m", [0, 1, 7, 40, 150])
def test_first_moment_identity(m):
    mu = goutsias_mu(m, K9_T1, K10_T1)
    mean_z1 = sum(p * z1 for (z1, _), p in zip(mu.support, mu.probs))
    assert m - 2 * goutsias_alpha(m, K9_T1, K10_T1) == pytest.approx(mean_z1, abs=1e-10 * max(m, 1))


def test_moment_closure_examples():
    assert alpha_moment_closure(0, K9_T1, K10_T1) == 0
    a = alpha_moment_closure(2, K9_T1, K10_T1)
    roots = np.roots([4 * K9_T1, K9_T1 * (2 - 8) - K10_T1, K9_T1 * 2 * 1])
    in_range = [x.real for x in roots if abs(x.imag) < 1e-14 and 0 <= x.real <= 1]
    assert a == pytest.approx(in_range[0], rel=1e-12)
    assert K10_T1 * a == pytest.approx(K9_T1 * (2 - 2 * a) * (1 - 2 * a), rel=1e-12)


def test_moment_closure_error_shrinks_with_m():
    errors = [abs(alpha_moment_closure(m, K9_T1, K10_T1) - goutsias_alpha(m, K9_T1, K10_T1)) / max(m, 1)
              for m in (10, 50, 200)]
    assert errors[-1] < errors[0]


def test_phi_examples():
    assert phi_pair(0, K9_T3, K10_T3) == (0.0, 0.0)
    p1, p2 = phi_pair(1, K9_T3, K10_T3)
    # quadratic 2 k9 p^2 + k10 p - k10 y = 0
    root = (-K10_T3 + math.sqrt(K10_T3 ** 2 + 8 * K9_T3 * K10_T3)) / (4 * K9_T3)
    assert p1 == pytest.approx(root, rel=1e-14)
    assert (round(p1, 6), round(p2, 6)) == (0.159145, 0.420428)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1e4), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_phi_identities(y, k9, k10):
    p1, p2 = phi_pair(y, k9, k10)
    assert p1 >= 0 and p2 >= -1e-12 * max(y, 1)
    assert p1 + 2 * p2 == pytest.approx(y, abs=1e-10 * max(1.0, y))
    assert k9 * p1 * p1 == pytest.approx(k10 * p2, rel=1e-8, abs=1e-10 * max(1.0, y))


def test_michaelis_menten_closed_form():
    assert michaelis_menten_rhs(0, 3, (1, 1, 1)) == 0
    assert michaelis_menten_rhs(1, 1, (1, 1, 1)) == pytest.approx(-1 / 3)
    assert michaelis_menten_rhs(1e6, 2, (1, 1, 3)) == pytest.approx(-2 * 3, rel=1e-4)


def test_mastny_model():
    model = mastny_reduced_model(1, 1, 1, 10)
    (ch,) = to_hybrid(model).channels
    assert ch.intensity(np.zeros(0), np.array([1.0, 0.0])) == pytest.approx(0.5)
    assert ch.delta == (-1.0, 2.0)
    for k1, k2, k3 in [(1, 2, 3), (0.5, 7, 0.1)]:
        m = mastny_reduced_model(k1, k2, k3, 4)
        (c,) = to_hybrid(m).channels
        eff = c.intensity(np.zeros(0), np.array([4.0, 0.0]))
        assert m.companions["returned"]({"S1": 4.0}) / eff == pytest.approx(k2 / k3)


def test_mastny_empty_start_never_moves():
    hybrid = to_hybrid(mastny_reduced_model(1, 1, 1, 0))
    traj = simulate_hybrid(hybrid, 10.0, RngStream(1, 0), grid=[10.0])
    assert traj.n_events == 0 and list(traj.final_state) == [0.0, 0.0]


# ----------------------------------------------------------- serialization

@pytest.mark.parametrize("gamma", [0, 1, 2])
def test_goutsias_reduced_round_trip(table3, gamma):
    model = reduce_network(table3, gamma, GOUTSIAS_AUX if gamma else None, "goutsias")
    text = format_reduced(model)
    assert format_reduced(parse_reduced(text)) == text


def test_generic_reduced_round_trip():
    model = reduce_network(mm_spec(), 0, recipe="generic", z0=(1.0, 5, 0, 0))
    text = format_reduced(model)
    again = parse_reduced(text)
    assert format_reduced(again) == text
    assert again.closed


def test_tampered_reduced_file_is_rejected(table3):
    text = format_reduced(goutsias_first_scale(table3))
    bad = text.replace("variable: RNA frozen", "variable: RNA discrete")
    assert bad != text
    with pytest.raises(ReducedModelMismatch):
        parse_reduced(bad)


def test_reduced_file_is_a_network_file(table3):
    from crnscale.parse import parse_network
    text = format_reduced(goutsias_g2_model(table3))
    assert parse_network(text) == table3.network


def test_goutsias_recipe_guards(table3):
    with pytest.raises(ReductionError):
        reduce_network(table3, 3, GOUTSIAS_AUX, "goutsias")
    with pytest.raises(ReductionError):
        reduce_network(mm_spec(), 0, recipe="goutsias")
    with pytest.raises(ValueError):
        reduce_network(table3, 0, recipe="magic")


def test_every_averaged_model_carries_stability_caveat(table3):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for model in (goutsias_second_scale(table3), goutsias_g2_model(table3)):
            assert any("stab" in c for c in model.caveats)
