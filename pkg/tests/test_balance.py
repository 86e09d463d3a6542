import numpy as np
import pytest

from crnstat import corpus
from crnstat.balance import (
    HypothesisError,
    balance_report,
    classify_boundary_equilibrium,
    complex_balance_residual,
    jacobian,
    local_stability_check,
    newton_equilibrium,
    ode_rhs,
    solve_complex_balanced_equilibrium,
    tree_constants,
    kinetic_laplacian,
)
from crnstat.network import parse_network
from crnstat.structure import analyze_structure, conservation_laws


def test_ode_rhs_examples():
    k1, k2 = 1.5, 0.7
    sys = corpus.dimerization(k1, k2)
    c = (k2, k1, k1)
    np.testing.assert_allclose(ode_rhs(sys, c), 0, atol=1e-15)
    np.testing.assert_allclose(complex_balance_residual(sys, c), 0, atol=1e-15)
    np.testing.assert_array_equal(ode_rhs(sys, (0, 0, 0)), 0)
    iso = parse_network("A <-> B : 1, 2")
    np.testing.assert_allclose(ode_rhs(iso, (1, 1)), (1, -1))


def test_one_way_is_never_balanced():
    sys = corpus.corpus()["one_way"]
    res = complex_balance_residual(sys, (2.0, 3.0))
    net = sys.network
    assert res[net.complex_index("B")] == pytest.approx(2.0)
    assert solve_complex_balanced_equilibrium(sys) is None


def test_balanced_family_residual_is_zero():
    k1, k2 = 2.0, 3.0
    sys = corpus.dimerization(k1, k2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.uniform(0.1, 5, size=2)
        c = np.sqrt(k1 * a * b / k2)
        assert balance_report(sys, (a, b, c)).is_complex_balanced


def test_balanced_variant_residual_depends_on_parameters():
    # by hand at c=(1,1): residual at A is -rho1*(theta-1), at 2B it is -rho1
    theta = 3
    balanced = corpus.isomer_dimer_balanced(theta, 0.0, 1.0, 1.0)
    generic = corpus.isomer_dimer_balanced(theta, 1.0, 2.0, 5.0)
    assert np.max(np.abs(complex_balance_residual(balanced, (1, 1)))) == 0.0
    res = complex_balance_residual(generic, (1, 1))
    net = generic.network
    assert res[net.complex_index("A")] == pytest.approx(-2.0)
    assert res[net.complex_index("2B")] == pytest.approx(-1.0)


def test_solve_dimerization():
    sys = corpus.dimerization(1.0, 2.0)
    c = solve_complex_balanced_equilibrium(sys)
    assert np.all(c > 0)
    assert c[0] * c[1] == pytest.approx(2.0 * c[2] ** 2, rel=1e-10)
    assert np.max(np.abs(complex_balance_residual(sys, c))) <= 1e-10


def test_deficiency_one_unbalanced():
    sys = corpus.corpus()["deficiency_one"]
    assert solve_complex_balanced_equilibrium(sys) is None
    # independent oracle: balance of A<->B needs c_B/c_A = k1/k2, of 2A<->2B needs (c_B/c_A)^2 = k3/k4
    k1, k2, k3, k4 = sys.rates
    assert (k1 / k2) ** 2 != pytest.approx(k3 / k4)


def test_deficiency_one_balanced_parameters():
    sys = parse_network("A <-> B : 1, 2\n2A <-> 2B : 1, 4")
    c = solve_complex_balanced_equilibrium(sys)
    assert c is not None
    assert c[1] / c[0] == pytest.approx(0.5)


def test_tree_constants_span_laplacian_kernel():
    for name, sys in corpus.corpus().items():
        if not analyze_structure(sys.network).weakly_reversible:
            continue
        rho = tree_constants(sys)
        assert np.all(rho > 0), name
        np.testing.assert_allclose(kinetic_laplacian(sys) @ rho, 0, atol=1e-9 * rho.max())


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(1)
    for name, sys in corpus.corpus().items():
        z = rng.uniform(0.5, 1.5, size=sys.network.n)
        jac = jacobian(sys, z)
        fd = np.zeros_like(jac)
        for i in range(sys.network.n):
            h = 1e-6 * z[i]
            up, dn = z.copy(), z.copy()
            up[i] += h
            dn[i] -= h
            fd[:, i] = (ode_rhs(sys, up) - ode_rhs(sys, dn)) / (2 * h)
        scale = max(np.max(np.abs(jac)), 1.0)
        np.testing.assert_allclose(jac, fd, rtol=1e-6, atol=1e-6 * scale, err_msg=name)


def test_boundary_equilibrium_of_boundary_demo():
    sys = corpus.boundary_demo(k1=2.0, k2=5.0)
    x = (0.0, 0.0, 5.0, 2.0)
    rep = classify_boundary_equilibrium(sys, x)
    net = sys.network
    assert {net.reaction_label(j) for j in rep.charged_reactions} == {"C -> D", "D -> C"}
    assert rep.all_terminal and rep.passed


def test_boundary_equilibrium_positive_and_vacuous():
    sys = corpus.dimerization(1.0, 2.0)
    c = solve_complex_balanced_equilibrium(sys)
    rep = classify_boundary_equilibrium(sys, c)
    assert set(rep.charged_reactions) == {0, 1} and rep.passed
    rep0 = classify_boundary_equilibrium(sys, (0.0, 0.0, 0.0))
    assert rep0.charged_reactions == () and rep0.passed


def test_boundary_classification_preconditions():
    with pytest.raises(HypothesisError):
        classify_boundary_equilibrium(corpus.corpus()["deficiency_one"], (1.0, 1.0))
    with pytest.raises(HypothesisError):
        classify_boundary_equilibrium(corpus.boundary_demo(), (1.0, 1.0, 1.0, 1.0))


def test_local_stability_examples():
    iso = parse_network("A <-> B : 1, 1")
    assert local_stability_check(iso, (1.0, 1.0))
    from crnstat.balance import restricted_eigenvalues

    np.testing.assert_allclose(restricted_eigenvalues(iso, (1.0, 1.0)).real, [-2.0])
    assert local_stability_check(corpus.dimerization(1.0, 1.0), (1.0, 1.0, 1.0))
    assert local_stability_check(parse_network("species A B"), (1.0, 1.0))


def test_cb_residual_bounds_ode_residual():
    rng = np.random.default_rng(2)
    for _ in range(30):
        sys = corpus.random_weakly_reversible_deficiency_zero(rng, conservative=False)
        c = solve_complex_balanced_equilibrium(sys)
        rep = balance_report(sys, c)
        assert rep.is_complex_balanced and rep.is_equilibrium


def test_random_deficiency_zero_weakly_reversible_always_balanced():
    rng = np.random.default_rng(3)
    systems = [corpus.random_weakly_reversible_deficiency_zero(rng, conservative=False) for _ in range(10)]
    for sys in systems:
        for _ in range(10):
            kappa = rng.lognormal(0.0, 1.0, size=sys.network.k)
            from crnstat.network import MassActionSystem

            s2 = MassActionSystem(sys.network, tuple(float(v) for v in kappa))
            c = solve_complex_balanced_equilibrium(s2)
            assert c is not None and np.all(c > 0)
            assert balance_report(s2, c).is_complex_balanced


def test_newton_converges_to_unique_equilibrium_per_class():
    rng = np.random.default_rng(4)
    count = 0
    while count < 6:
        sys = corpus.random_weakly_reversible_deficiency_zero(rng)
        c = solve_complex_balanced_equilibrium(sys)
        laws = conservation_laws(sys.network).astype(float)
        if laws.size == 0:
            continue
        count += 1
        target = newton_equilibrium(sys, c)
        np.testing.assert_allclose(target, c, rtol=1e-7)
        totals = laws @ c
        for _ in range(20):
            # random positive start in the same compatibility class
            start = c * rng.uniform(0.3, 3.0, size=c.size)
            start = _project_to_class(laws, totals, start)
            if start is None:
                continue
            z = newton_equilibrium(sys, start)
            np.testing.assert_allclose(laws @ z, totals, rtol=1e-8, atol=1e-10 * np.max(np.abs(totals)))
            np.testing.assert_allclose(z, c, rtol=1e-6)


def _project_to_class(laws, totals, z):
    """Move ``z`` along the stoichiometric subspace onto the class; ``None`` if that leaves the orthant."""
    correction = laws.T @ np.linalg.solve(laws @ laws.T, totals - laws @ z)
    # correction lies in the row space of the laws, i.e. orthogonal to S; this fixes the totals
    z = z + correction
    return z if np.all(z > 0) else None
