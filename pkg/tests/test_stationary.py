import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from crnstat import corpus
from crnstat.balance import HypothesisError, solve_complex_balanced_equilibrium
from crnstat.network import parse_network
from crnstat.stationary import (
    FiniteDistribution,
    InsufficientBox,
    ProductFormDescriptor,
    _lu_solve,
    complex_balanced_distribution_check,
    detect_complex_balance_from_distributions,
    direct_stationary_solve,
    generator_matrix,
    gth_solve,
    master_equation_report,
    master_equation_residual,
    product_form,
    stochastically_complex_balanced,
    terminal_form_distribution,
    tv_distance,
)
from crnstat.statespace import IrreducibleComponent, StateBox, gamma_system, irreducible_components
from crnstat.structure import deficiency, is_weakly_reversible


def simplex(theta):
    return IrreducibleComponent(tuple((a, theta - a) for a in range(theta, -1, -1)))


def inverse_factorial(comp):
    w = np.array([1.0 / (math.factorial(a) * math.factorial(b)) for a, b in comp.states])
    return dict(zip(comp.states, w / w.sum()))


def finite_components(sys, cap):
    box = StateBox.uniform(sys.network.n, cap) if np.isscalar(cap) else StateBox(cap)
    return [c for c in irreducible_components(sys, box).components if not c.truncated]


# ---------------------------------------------------------------------------
# distributions and distances


def test_tv_distance_examples():
    a = {(0,): 0.5, (1,): 0.5}
    assert tv_distance(a, a) == 0.0
    assert tv_distance({(0,): 1.0}, {(1,): 1.0}) == 1.0
    assert tv_distance(a, {(0,): 0.25, (1,): 0.75}) == pytest.approx(0.25)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6), st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6))
def test_tv_distance_properties(wa, wb):
    a = {(i,): w / sum(wa) for i, w in enumerate(wa)}
    b = {(i + 1,): w / sum(wb) for i, w in enumerate(wb)}
    d = tv_distance(a, b)
    assert 0.0 <= d <= 1.0 + 1e-15
    assert d == pytest.approx(tv_distance(b, a))
    assert tv_distance(a, a) == 0.0


def test_distribution_must_be_normalized():
    with pytest.raises(ValueError):
        FiniteDistribution(((0,), (1,)), (0.5, 0.6))


def test_csv_and_json_round_trip():
    dist = product_form(ProductFormDescriptor((1.0, 1.0), simplex(5)))
    back, species = FiniteDistribution.from_csv(dist.to_csv(["A", "B"]))
    assert species == ["A", "B"] and back == dist
    back, species = FiniteDistribution.from_json(dist.to_json(["A", "B"]))
    assert species == ["A", "B"] and back == dist


# ---------------------------------------------------------------------------
# product form


def test_product_form_on_swap_component():
    comp = IrreducibleComponent(((1, 5), (3, 3), (5, 1)))
    dist = product_form(ProductFormDescriptor((1.0, 1.0), comp))
    np.testing.assert_allclose(dist.array(), [3 / 16, 10 / 16, 3 / 16], rtol=1e-14)


def test_product_form_singleton():
    dist = product_form(ProductFormDescriptor((2.0, 3.0), IrreducibleComponent(((0, 6),))))
    assert dist.probabilities == (1.0,)


def test_product_form_survives_large_counts():
    comp = IrreducibleComponent(tuple((a, 400 - a) for a in range(401)))
    dist = product_form(ProductFormDescriptor((1.0, 2.0), comp))
    expected = np.array([poisson.logpmf(a, 1.0) + poisson.logpmf(400 - a, 2.0) for a in range(401)])
    expected = np.exp(expected - expected.max())
    np.testing.assert_allclose(dist.array(), expected / expected.sum(), rtol=1e-9)


def test_product_form_refuses_truncated_component():
    with pytest.raises(ValueError):
        product_form(ProductFormDescriptor((1.0,), IrreducibleComponent(((1,), (2,)), truncated=True)))


@pytest.mark.parametrize("theta", [1, 3, 7])
def test_catalytic_autocatalysis_rate_depends_on_catalyst(theta):
    # the count of A is a birth-death chain with Poisson law of rate (k1 + k3 theta) / (k2 + k4 theta)
    k1, k2, k3, k4 = 1.0, 2.0, 3.0, 5.0
    sys = corpus.catalytic_autocatalysis(k1, k2, k3, k4)
    cap = 60
    an = irreducible_components(sys, StateBox((cap, theta)), through=(1, theta))
    comp = an.component_of((1, theta))
    assert comp.truncated and set(comp.states) == {(a, theta) for a in range(1, cap + 1)}
    rate = (k1 + k3 * theta) / (k2 + k4 * theta)
    direct = direct_stationary_solve(sys, comp, allow_truncated=True)
    formula = product_form(ProductFormDescriptor((rate, 1.0), comp, species=(0,)), allow_truncated=True)
    assert tv_distance(direct, formula) < 1e-12
    inverted = product_form(ProductFormDescriptor((1 / rate, 1.0), comp, species=(0,)), allow_truncated=True)
    assert tv_distance(direct, inverted) > 0.1


# ---------------------------------------------------------------------------
# master equation and direct solves


def test_direct_solve_symmetric_isomerization():
    sys = parse_network("A <-> B : 1, 1")
    dist = direct_stationary_solve(sys, simplex(1))
    assert dist.as_dict() == pytest.approx({(1, 0): 0.5, (0, 1): 0.5})


def test_direct_solve_isomer_dimer_theta3():
    dist = direct_stationary_solve(corpus.isomer_dimer(3), simplex(3))
    assert dist.as_dict() == pytest.approx({(3, 0): 1 / 8, (2, 1): 3 / 8, (1, 2): 3 / 8, (0, 3): 1 / 8}, abs=1e-14)


def test_uniform_distribution_residual_by_hand():
    # A->B at 1, B->A at 2 on {x1 + x2 = 2}; balance at (1,1): in 2/3 + 4/3, out 1
    sys = parse_network("A <-> B : 1, 2")
    uniform = FiniteDistribution(simplex(2).states, (1 / 3,) * 3)
    rep = master_equation_report(sys, uniform)
    assert rep.max_residual == pytest.approx(1.0)
    assert rep.location in {(1, 1), (0, 2)}


@pytest.mark.parametrize("theta", [2, 3, 5])
def test_inverse_factorial_is_stationary_for_isomer_dimer(theta):
    sys = corpus.isomer_dimer(theta)
    comp = simplex(theta)
    pf = product_form(ProductFormDescriptor((1.0, 1.0), comp))
    assert master_equation_residual(sys, pf) <= 1e-12
    assert tv_distance(direct_stationary_solve(sys, comp), pf) <= 1e-10


@pytest.mark.parametrize("name", sorted(corpus.corpus()))
def test_direct_solves_have_small_residual(name):
    sys = corpus.corpus()[name]
    for comp in finite_components(sys, 5):
        dist = direct_stationary_solve(sys, comp)
        assert master_equation_residual(sys, dist) <= 1e-10
        assert min(dist.probabilities) > 0


def test_gth_and_lu_agree():
    sys = corpus.dimerization(1.0, 2.0)
    an = irreducible_components(sys, StateBox.uniform(3, 40), through=(20, 20, 10))
    comp = an.component_of((20, 20, 10))
    q = generator_matrix(sys, comp.as_array())
    a, b = gth_solve(q.toarray()), _lu_solve(q)
    assert np.max(np.abs(a - b)) < 1e-12


def test_direct_solve_refuses_truncated():
    with pytest.raises(ValueError):
        direct_stationary_solve(corpus.isomer_dimer(3), IrreducibleComponent(((1, 2),), truncated=True))


def test_two_poisson_convolution():
    sys = corpus.corpus()["two_poisson"]
    comp = irreducible_components(sys, StateBox((40,))).components[0]
    dist = direct_stationary_solve(sys, comp, allow_truncated=True)
    np.testing.assert_allclose(dist.array(), corpus.two_poisson_pmf(40), atol=1e-10)


# ---------------------------------------------------------------------------
# stochastic complex balance


def test_complex_balanced_distribution_examples():
    k1, k2 = 2.0, 3.0
    sys = corpus.corpus()["isomer_decay"]
    for theta in (2, 6, 9):
        comp = simplex(theta)
        dist = product_form(ProductFormDescriptor((k2, k1), comp))
        assert master_equation_residual(sys, dist) < 1e-12
        assert complex_balanced_distribution_check(sys, comp, dist).passed

    dimer = corpus.dimerization(1.0, 2.0)
    c = solve_complex_balanced_equilibrium(dimer)
    comp = irreducible_components(dimer, StateBox.uniform(3, 8), through=(3, 2, 2)).component_of((3, 2, 2))
    assert complex_balanced_distribution_check(dimer, comp, product_form(ProductFormDescriptor(tuple(c), comp))).passed

    iso_dimer = corpus.isomer_dimer(3)
    comp = simplex(3)
    assert not complex_balanced_distribution_check(iso_dimer, comp, direct_stationary_solve(iso_dimer, comp)).passed


def test_stochastically_complex_balanced_examples():
    res = stochastically_complex_balanced(corpus.dimerization(1.0, 2.0), StateBox.uniform(3, 4))
    assert res.balanced and res.witness is not None and res.witness_check and res.consistent
    res = stochastically_complex_balanced(corpus.corpus()["one_way"], StateBox((3, 3)))
    assert not res.balanced and res.consistent
    res = stochastically_complex_balanced(corpus.corpus()["deficiency_one"], StateBox((4, 4)))
    assert not res.balanced and res.witness is not None and res.witness_check is False and res.consistent


@pytest.mark.parametrize("name", sorted(corpus.corpus()))
def test_distribution_balance_iff_gamma_system_balanced(name):
    sys = corpus.corpus()[name]
    for comp in finite_components(sys, 5):
        if len(comp) == 1:
            continue
        gs = gamma_system(sys, comp)
        dist = direct_stationary_solve(sys, comp)
        passed = complex_balanced_distribution_check(sys, comp, dist).passed
        assert passed == (solve_complex_balanced_equilibrium(gs.system) is not None), comp.states[:3]
        if passed:
            assert is_weakly_reversible(gs.subnetwork.network)


@pytest.mark.parametrize("name", sorted(corpus.corpus()))
def test_product_form_matches_direct_solve(name):
    sys = corpus.corpus()[name]
    c = solve_complex_balanced_equilibrium(sys)
    if c is None:
        pytest.skip("not complex balanced")
    for comp in finite_components(sys, 6):
        pf = product_form(ProductFormDescriptor(tuple(c), comp))
        assert tv_distance(pf, direct_stationary_solve(sys, comp)) <= 1e-10


@pytest.mark.parametrize("name", sorted(corpus.corpus()))
def test_terminal_form_matches_direct_solve(name):
    sys = corpus.corpus()[name]
    if deficiency(sys.network) != 0:
        with pytest.raises(HypothesisError):
            terminal_form_distribution(sys, IrreducibleComponent(((0,) * sys.network.n,)))
        return
    for comp in finite_components(sys, 5):
        tf = terminal_form_distribution(sys, comp)
        assert tv_distance(tf, direct_stationary_solve(sys, comp)) <= 1e-10


def test_boundary_demo_terminal_form_formulas():
    k = dict(k1=1.5, k2=2.5, k3=3.0, k4=7.0, k5=0.5)
    sys = corpus.boundary_demo(**k)
    comp = irreducible_components(sys, StateBox((2, 2, 6, 6)), through=(0, 1, 3, 3)).component_of((0, 1, 3, 3))
    tf = terminal_form_distribution(sys, comp)
    cd_only = product_form(ProductFormDescriptor((1.0, 1.0, k["k2"], k["k1"]), comp, species=(2, 3)))
    full = product_form(ProductFormDescriptor((math.sqrt(k["k4"]), math.sqrt(k["k3"]), k["k2"], k["k1"]), comp))
    assert tv_distance(tf, cd_only) < 1e-14
    assert tv_distance(tf, full) < 1e-14


def test_terminal_form_equals_product_form_when_weakly_reversible():
    sys = corpus.dimerization(1.0, 2.0)
    c = solve_complex_balanced_equilibrium(sys)
    for comp in finite_components(sys, 5):
        pf = product_form(ProductFormDescriptor(tuple(c), comp))
        assert tv_distance(pf, terminal_form_distribution(sys, comp)) < 1e-12


def test_birth_death_product_formula():
    k1, k2, k3, k4 = 2.0, 2.0, 2.0, 1.0
    sys = corpus.birth_death(k1, k2, k3, k4)
    cap = 40
    comp = irreducible_components(sys, StateBox((cap,))).components[0]
    dist = direct_stationary_solve(sys, comp, allow_truncated=True)
    lw = corpus.birth_death_product(cap, k3 / k4, k1 / k3, k2 / k4)
    expected = np.exp(lw - lw.max())
    np.testing.assert_allclose(dist.array(), expected / expected.sum(), rtol=1e-9)


def test_balanced_isomer_dimer_keeps_inverse_factorial_for_any_parameters():
    rng = np.random.default_rng(9)
    for theta in (2, 3, 5):
        for _ in range(5):
            r1, r2, r3 = rng.uniform(0.1, 5.0, size=3)
            sys = corpus.isomer_dimer_balanced(theta, r1, r2, r3)
            comp = simplex(theta)
            assert tv_distance(direct_stationary_solve(sys, comp), inverse_factorial(comp)) < 1e-10


def _transition_rates(sys, states):
    q = generator_matrix(sys, np.array(states)).toarray()
    np.fill_diagonal(q, 0.0)
    return q


def test_swap_component_has_same_rates_as_reversible_replacement():
    k1, k2 = 1.25, 0.5  # dyadic, so every rate product is exact
    original = corpus.absorbing_swap(k1, k2)
    replacement = parse_network("2A <-> 2B : a, b", {"a": k1, "b": 3 * k2})
    states = [(1, 5), (3, 3), (5, 1)]
    np.testing.assert_array_equal(_transition_rates(original, states), _transition_rates(replacement, states))


def test_cubic_swap_diagonal_has_same_rates_as_replacement():
    k1, k2 = 0.75, 1.5
    original = parse_network("2A -> 3A + B : a\nA + 3B -> 2B : b", {"a": k1, "b": k2})
    replacement = parse_network("2A <-> 3A + B : a, b", {"a": k1, "b": k2})
    states = [(x, x) for x in range(2, 30)]
    qo, qr = _transition_rates(original, states), _transition_rates(replacement, states)
    np.testing.assert_array_equal(qo, qr)
    # outflow from the top state leaves the truncation identically as well
    top = np.array([[29, 29]])
    from crnstat.network import propensities

    np.testing.assert_array_equal(propensities(original, top).sum(), propensities(replacement, top).sum())


# ---------------------------------------------------------------------------
# converse detector


def test_detector_dimerization_agrees():
    sys = corpus.dimerization(1.0, 2.0)
    c = solve_complex_balanced_equilibrium(sys)
    rep = detect_complex_balance_from_distributions(sys, c, StateBox.uniform(3, 12))
    assert rep.result and rep.empirical and rep.algebraic and rep.agree
    assert rep.good_states > 0
    a, b = 0.5, 3.0
    other = (a, b, math.sqrt(a * b / 2.0))
    assert detect_complex_balance_from_distributions(sys, other, StateBox.uniform(3, 12)).result


def test_detector_isomer_dimer_discriminates():
    sys = corpus.isomer_dimer(3)
    rep = detect_complex_balance_from_distributions(sys, (1.0, 1.0), StateBox((12, 12)))
    assert not rep.result and not rep.empirical and not rep.algebraic
    assert rep.discriminating_component is not None
    failing = {frozenset(c.states) for c in rep.failing_components}
    assert frozenset(simplex(3).states) not in failing


def test_detector_catalytic_autocatalysis_fixed_c_fails():
    k = (1.0, 2.0, 3.0, 5.0)
    sys = corpus.catalytic_autocatalysis(*k)
    for theta in (0, 2):
        c_theta = (k[0] + k[2] * theta) / (k[1] + k[3] * theta)
        rep = detect_complex_balance_from_distributions(sys, (c_theta, 1.0), StateBox((25, 6)))
        assert not rep.result and not rep.empirical
        assert rep.good_states > 0


def test_detector_box_too_small():
    sys = corpus.dimerization(1.0, 2.0)
    with pytest.raises(InsufficientBox):
        detect_complex_balance_from_distributions(sys, (1.0, 1.0, 1.0), StateBox.uniform(3, 3))


def test_detector_requires_almost_essential():
    sys = corpus.corpus()["isomer_decay"]
    with pytest.raises(HypothesisError):
        detect_complex_balance_from_distributions(sys, (1.0, 1.0), StateBox((14, 14)))
