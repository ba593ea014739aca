"""Formal powers, derivative coefficient tables, and series evaluation."""

import numpy as np
import pytest

from spps import Mesh, constant, coordinate, ones, tabulate, zeros
from spps.errors import TruncationWarning
from spps.factorization import (
    OperatorSpec,
    SolutionSystem,
    apply_coefficients,
    polya_factors,
    wronskians,
)
from spps.powers import (
    DerivativeCoeffs,
    compute_A,
    evaluate_derivatives,
    evaluate_solution,
    formal_powers,
    initial_matrix,
    initial_values,
    rising_factorial,
    series_coefficients_at_node,
    solution_family,
    tail_ratio,
)


def trivial_factorization(mesh, n):
    """Factorization of the pure n-th derivative from the monomial seed."""
    op = OperatorSpec(n, tuple(zeros(mesh) for _ in range(n)), ones(mesh))
    funcs = []
    fact = 1.0
    for k in range(n):
        if k > 0:
            fact *= k
        funcs.append(tabulate(mesh, lambda t, k=k, f=fact: (t - mesh.x0) ** k / f))
    sys = SolutionSystem.from_functions(op, funcs)
    return op, polya_factors(wronskians(sys))


def exponential_factorization(mesh):
    """Factorization of y'' - 3y' + 2y from {e^x, e^2x}."""
    op = OperatorSpec(
        2, (constant(mesh, -3.0), constant(mesh, 2.0)), ones(mesh))
    sys = SolutionSystem.from_functions(
        op, [tabulate(mesh, np.exp), tabulate(mesh, lambda t: np.exp(2 * t))])
    return op, polya_factors(wronskians(sys))


# -- rising_factorial ------------------------------------------------------------

def test_rising_factorial_values():
    assert rising_factorial(3, 0) == 1.0
    assert rising_factorial(3, 1) == 3.0
    assert rising_factorial(3, 4) == 3 * 4 * 5 * 6
    assert rising_factorial(1, 5) == 120.0


# -- derivative coefficient table ------------------------------------------------

def test_A_all_ones_factors():
    m = Mesh(0.0, 1.0, 401, 0)
    _, fac = trivial_factorization(m, 4)
    A = compute_A(fac)
    assert A.rows == 4
    for ell in range(4):
        for alpha in range(ell + 1):
            want = 1.0 if alpha == ell else 0.0
            # repeated finite differencing amplifies roundoff near the ends
            assert np.max(np.abs(A.at(ell, alpha).values - want)) < 1e-6


def test_A_top_entry_is_first_factor():
    m = Mesh(0.0, 1.0, 101)
    _, fac = exponential_factorization(m)
    A = compute_A(fac)
    np.testing.assert_allclose(A.at(0, 0).values, np.exp(m.nodes), rtol=1e-9)


def test_A_second_row_closed_form():
    # seed {e^x, x e^x, e^{3x}}: W1 = e^x, W2 = e^{2x}, W3 = 4 e^{5x}
    # so b0 = e^x, b1 = W0 W2 / W1^2 = 1, b2 = W1 W3 / W2^2 = 4 e^{2x}, and
    #   A_{1,0} = b0' = e^x            A_{1,1} = b0 b1 = e^x
    #   A_{2,1} = A_{1,1}' + A_{1,0} b1 = 2 e^x
    #   A_{2,2} = A_{1,1} b2 = 4 e^{3x}
    m = Mesh(0.0, 1.0, 401)
    x = m.nodes
    op = OperatorSpec(3, tuple(zeros(m) for _ in range(3)), ones(m))
    derivs = []
    for fn in [
            lambda t, d: np.exp(t),
            lambda t, d: (t + d) * np.exp(t),
            lambda t, d: 3.0**d * np.exp(3 * t)]:
        derivs.append(tuple(tabulate(m, lambda t, d=d, f=fn: f(t, d))
                            for d in range(3)))
    W = wronskians(SolutionSystem(op, tuple(derivs), 0, 1.0, 0.0))
    np.testing.assert_allclose(W[1].values, np.exp(x), rtol=1e-12)
    np.testing.assert_allclose(W[2].values, np.exp(2 * x), rtol=1e-12)
    np.testing.assert_allclose(W[3].values, 4 * np.exp(5 * x), rtol=1e-12)
    fac = polya_factors(W)
    A = compute_A(fac)
    np.testing.assert_allclose(A.at(1, 0).values, np.exp(x), rtol=1e-7)
    np.testing.assert_allclose(A.at(1, 1).values, np.exp(x), rtol=1e-7)
    np.testing.assert_allclose(A.at(2, 1).values, 2 * np.exp(x), rtol=1e-6)
    np.testing.assert_allclose(A.at(2, 2).values, 4 * np.exp(3 * x), rtol=1e-7)


# -- formal powers ----------------------------------------------------------------

def test_powers_of_pure_derivative_are_monomials():
    m = Mesh(0.0, 1.0, 401, 0)
    op, fac = trivial_factorization(m, 2)
    table = formal_powers(fac, op.r, truncation=4)
    x = m.nodes
    for k in (1, 2):
        for j in range(4 * 2 + k):
            np.testing.assert_allclose(
                table.secondary(k, j).values, x**j, atol=5e-13 * max(1.0, j))


def test_powers_third_order_monomials_from_interior_basepoint():
    m = Mesh(-1.0, 1.0, 401)
    op, fac = trivial_factorization(m, 3)
    table = formal_powers(fac, op.r, truncation=3)
    for k in (1, 2, 3):
        for j in range(3 * 3 + k):
            np.testing.assert_allclose(
                table.secondary(k, j).values, m.nodes**j, atol=1e-11)


def test_main_power_indexing():
    m = Mesh(0.0, 1.0, 401, 0)
    op, fac = trivial_factorization(m, 2)
    table = formal_powers(fac, op.r, truncation=3)
    np.testing.assert_allclose(table.main(1, 2).values, m.nodes**4, atol=1e-12)
    np.testing.assert_allclose(table.main(2, 1).values, m.nodes**3, atol=1e-12)


def test_powers_vanish_at_basepoint():
    m = Mesh(0.0, 2.0, 401)
    op, fac = exponential_factorization(m)
    table = formal_powers(fac, op.r, truncation=5)
    i0 = m.i0
    for k in (1, 2):
        for j in range(1, 11):
            assert table.secondary(k, j).values[i0] == 0.0


# -- series evaluation -------------------------------------------------------------

def test_solution_at_lambda_zero_is_iterated_integral():
    m = Mesh(0.0, 1.0, 401, 0)
    op, fac = exponential_factorization(m)
    table = formal_powers(fac, op.r, truncation=8)
    # at lambda = 0 only the m = 0 term survives: u_k = b0 X^(k-1)/(k-1)!
    for k in (1, 2):
        u = evaluate_solution(table, fac.b[0], k, 0.0)
        fact = 1.0
        for i in range(1, k):
            fact *= i
        want = fac.b[0].values * table.secondary(k, k - 1).values / fact
        np.testing.assert_allclose(u.values, want, rtol=1e-12)


def test_pure_second_derivative_gives_hyperbolic_pair():
    m = Mesh(0.0, 1.0, 401, 0)
    op, fac = trivial_factorization(m, 2)
    table = formal_powers(fac, op.r, truncation=30)
    u1 = evaluate_solution(table, fac.b[0], 1, 1.0)
    u2 = evaluate_solution(table, fac.b[0], 2, 1.0)
    np.testing.assert_allclose(u1.values, np.cosh(m.nodes), rtol=1e-13)
    np.testing.assert_allclose(u2.values, np.sinh(m.nodes), atol=1e-14)


def test_pure_second_derivative_oscillatory():
    m = Mesh(0.0, np.pi, 401, 0)
    op, fac = trivial_factorization(m, 2)
    table = formal_powers(fac, op.r, truncation=40)
    u1 = evaluate_solution(table, fac.b[0], 1, -4.0)  # cos(2x)
    np.testing.assert_allclose(u1.values, np.cos(2 * m.nodes), atol=1e-11)


def test_solution_solves_equation_at_complex_lambda():
    m = Mesh(0.0, 1.0, 801)
    op, fac = exponential_factorization(m)
    table = formal_powers(fac, op.r, truncation=30)
    lam = 1.5 + 2.0j
    from spps.factorization import operator_residual
    for k in (1, 2):
        u = evaluate_solution(table, fac.b[0], k, lam)
        assert operator_residual(op, u, lam=lam) < 1e-8


def test_truncation_warning_raised_when_tail_large():
    m = Mesh(0.0, 1.0, 401, 0)
    op, fac = trivial_factorization(m, 2)
    table = formal_powers(fac, op.r, truncation=3)
    assert tail_ratio(table, 1, 400.0) > 1e-12
    with pytest.warns(TruncationWarning):
        evaluate_solution(table, fac.b[0], 1, 400.0)


def test_no_warning_when_series_converged():
    import warnings
    m = Mesh(0.0, 1.0, 401, 0)
    op, fac = trivial_factorization(m, 2)
    table = formal_powers(fac, op.r, truncation=30)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        evaluate_solution(table, fac.b[0], 1, 1.0)


# -- derivative evaluation -----------------------------------------------------------

def test_derivative_matches_finite_difference():
    m = Mesh(0.0, 1.0, 801)
    op, fac = exponential_factorization(m)
    table = formal_powers(fac, op.r, truncation=30)
    A = compute_A(fac)
    from spps import differentiate
    for k in (1, 2):
        u = evaluate_solution(table, fac.b[0], k, 2.0)
        du = evaluate_derivatives(table, A, k, 2.0, 1)
        fd = differentiate(u, 1)
        err = np.max(np.abs(du.values[2:-2] - fd.values[2:-2]))
        assert err < 1e-7 * max(1.0, u.max_abs())


def test_derivative_ladder_for_pure_operator():
    # for y'' = lam y built from the monomial seed, u_2' = u_1 and u_1' = lam u_2
    m = Mesh(0.0, 1.0, 401, 0)
    op, fac = trivial_factorization(m, 2)
    table = formal_powers(fac, op.r, truncation=30)
    A = compute_A(fac)
    lam = -2.5
    u1 = evaluate_solution(table, fac.b[0], 1, lam)
    u2 = evaluate_solution(table, fac.b[0], 2, lam)
    d1 = evaluate_derivatives(table, A, 1, lam, 1)
    d2 = evaluate_derivatives(table, A, 2, lam, 1)
    np.testing.assert_allclose(d2.values, u1.values, atol=1e-12)
    np.testing.assert_allclose(d1.values, lam * u2.values, atol=1e-12)


def test_third_order_derivative_consistency():
    m = Mesh(0.0, 1.0, 801)
    op = OperatorSpec(
        3, (coordinate(m), ones(m), tabulate(m, np.sin)), ones(m))
    from spps.factorization import build_seed_system
    sys = build_seed_system(op, rng_seed=5)
    fac = polya_factors(wronskians(sys))
    table = formal_powers(fac, op.r, truncation=25)
    A = compute_A(fac)
    from spps import differentiate
    u = evaluate_solution(table, fac.b[0], 2, 1.0)
    for ell in (1, 2):
        du = evaluate_derivatives(table, A, 2, 1.0, ell)
        fd = differentiate(u, ell)
        lo = hi = 4
        err = np.max(np.abs(du.values[lo:-hi] - fd.values[lo:-hi]))
        assert err < 1e-5 * max(1.0, u.max_abs())


# -- initial data -------------------------------------------------------------------

def test_initial_values_structure():
    m = Mesh(0.0, 1.0, 401, 0)
    op, fac = exponential_factorization(m)
    A = compute_A(fac)
    v1 = initial_values(A, fac.b[0], 1)
    v2 = initial_values(A, fac.b[0], 2)
    assert v1[0] == pytest.approx(1.0)  # b0(0) = e^0
    assert v2[0] == 0.0
    assert abs(v2[1]) > 1e-12  # nonzero diagonal


def test_initial_matrix_lower_triangular():
    m = Mesh(0.0, 1.0, 401)
    op = OperatorSpec(
        3, (coordinate(m), ones(m), tabulate(m, np.sin)), ones(m))
    from spps.factorization import build_seed_system
    sys = build_seed_system(op, rng_seed=5)
    fac = polya_factors(wronskians(sys))
    A = compute_A(fac)
    mat = initial_matrix(A, fac.b[0])
    assert mat.shape == (3, 3)
    for ell in range(3):
        for k in range(ell + 2, 4):
            assert mat[ell, k - 1] == 0.0
    assert all(abs(mat[k, k]) > 1e-12 for k in range(3))


def test_initial_matrix_matches_evaluated_solutions():
    m = Mesh(0.0, 1.0, 401)
    op, fac = exponential_factorization(m)
    table = formal_powers(fac, op.r, truncation=30)
    A = compute_A(fac)
    mat = initial_matrix(A, fac.b[0])
    i0 = m.i0
    for lam in (0.0, 1.0, -2.0, 3.0j):
        for k in (1, 2):
            u = evaluate_solution(table, fac.b[0], k, lam)
            assert u.values[i0] == pytest.approx(mat[0, k - 1], abs=1e-12)
            du = evaluate_derivatives(table, A, k, lam, 1)
            assert du.values[i0] == pytest.approx(mat[1, k - 1], abs=1e-12)


# -- per-node series coefficients ------------------------------------------------

def test_series_coefficients_reproduce_evaluation():
    m = Mesh(0.0, 1.0, 401)
    op, fac = exponential_factorization(m)
    table = formal_powers(fac, op.r, truncation=12)
    A = compute_A(fac)
    node = m.n - 1
    lam = -1.3 + 0.7j
    for k in (1, 2):
        coeffs = series_coefficients_at_node(table, A, fac.b[0], k, 0, node)
        horner = 0.0 + 0.0j
        for c in reversed(coeffs):
            horner = horner * lam + c
        u = evaluate_solution(table, fac.b[0], k, lam)
        assert horner == pytest.approx(u.values[node], rel=1e-12)
        coeffs1 = series_coefficients_at_node(table, A, fac.b[0], k, 1, node)
        horner1 = 0.0 + 0.0j
        for c in reversed(coeffs1):
            horner1 = horner1 * lam + c
        du = evaluate_derivatives(table, A, k, lam, 1)
        assert horner1 == pytest.approx(du.values[node], rel=1e-11)


# -- solution family ------------------------------------------------------------------

def test_solution_family_caches_and_solves():
    m = Mesh(0.0, 1.0, 801)
    op, fac = exponential_factorization(m)
    table = formal_powers(fac, op.r, truncation=30)
    A = compute_A(fac)
    from spps.factorization import operator_residual
    fam = solution_family(table, A, fac.b[0])
    assert len(fam) == 2
    for sol in fam:
        u = sol.value(1.0)
        assert u is sol.value(1.0)  # cached
        assert operator_residual(op, u, lam=1.0) < 1e-8
        du = sol.derivative(1.0, 1)
        assert du is sol.derivative(1.0, 1)
