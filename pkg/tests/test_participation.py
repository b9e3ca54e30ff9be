import numpy as np
import pytest
import sympy as sp

from smallsig.dae import CH3_A, CH3_E, LinearDAE, OutputMap, augment_pencil, example_ch3, output_matrix, reduce_state_matrix
from smallsig.errors import InconsistentInitialCondition, PreconditionError, RepeatedEigenvalue
from smallsig.participation import (
    classical_pf, generalized_pf, jordan_chains, jordan_pf, output_pf, residue, solve_linear_singular, verify_chain,
)
from smallsig.pencil import eigen


def _laplace_coefficients():
    """Exact partial fractions of x_k(s) = [(sE - A)^-1 E e_k]_k for the 5x5 example.

    Returns per variable (coefficient of 1/(s+2), of 1/(s+2)^2, of 1/(s+3)),
    i.e. the constant and t terms of the lambda = -2 participation and the
    lambda = -3 participation.
    """
    s = sp.symbols("s")
    E, A = sp.Matrix(CH3_E), sp.Matrix(CH3_A)
    M = s * E - A
    adj, d = M.adjugate(), M.det()
    out = []
    for k in range(5):
        ek = sp.zeros(5, 1)
        ek[k] = 1
        xk = sp.cancel((adj * E * ek)[k] / d)
        g = sp.cancel(xk * (s + 2) ** 2)
        out.append((float(sp.limit(sp.diff(g, s), s, -2)), float(sp.limit(g, s, -2)), float(sp.limit(xk * (s + 3), s, -3))))
    return np.array(out)


@pytest.fixture(scope="module")
def laplace():
    return _laplace_coefficients()


def test_jordan_pf_matches_partial_fractions(laplace):
    jp = jordan_pf(example_ch3(), eigenvalue=-2.0)
    assert np.allclose(jp.values[:, 0].real, laplace[:, 0], atol=1e-9)
    assert np.allclose(jp.time_poly[:, 0, 1], laplace[:, 1], atol=1e-9)


def test_simple_mode_pf_matches_partial_fractions(laplace):
    P = example_ch3()
    sol = eigen(P)
    k = int(np.argmin(np.abs(sol.finite_eigs + 3)))
    pf = generalized_pf(P, sol, [k])
    assert np.allclose(pf.values[:, 0].real, laplace[:, 2], atol=1e-9)


def test_generalized_pf_refuses_defective_modes():
    with pytest.raises(PreconditionError):
        generalized_pf(example_ch3())


def test_chain_based_pf_equals_subspace_pf():
    P = example_ch3()
    ch = jordan_chains(P, -2.0, 2)
    assert verify_chain(P, ch) < 1e-8
    a = jordan_pf(P, chains=ch)
    b = jordan_pf(P, eigenvalue=-2.0)
    assert np.allclose(a.values, b.values, atol=1e-8)


def test_constant_terms_sum_to_multiplicity():
    jp = jordan_pf(example_ch3(), eigenvalue=-2.0)
    assert abs(jp.values[:, 0].sum() - 2) < 1e-9


def test_classical_pf_symmetric_matrix():
    # for symmetric A, W = V^T and pi_{k,i} = v_{k,i}^2
    rng = np.random.default_rng(1)
    Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    A = Q @ np.diag([-1.0, -2, -3, -4, -5]) @ Q.T
    pf = classical_pf(A)
    lam, V = np.linalg.eigh(A)
    for i, l in enumerate(pf.eigenvalues):
        j = int(np.argmin(np.abs(lam - l)))
        assert np.allclose(pf.values[:, i].real, V[:, j] ** 2, atol=1e-12)


def test_repeated_eigenvalue_rejected():
    with pytest.raises(RepeatedEigenvalue):
        classical_pf(np.eye(3))


def test_augmented_pencil_pf_equals_reduced_pf():
    rng = np.random.default_rng(9)
    n, m = 4, 3
    dae = LinearDAE(rng.standard_normal((n, n)), rng.standard_normal((n, m)), rng.standard_normal((m, n)),
                    rng.standard_normal((m, m)) + 4 * np.eye(m))
    red = classical_pf(reduce_state_matrix(dae))
    aug = generalized_pf(augment_pencil(dae))
    assert np.all(aug.values[n:] == 0)
    for i, l in enumerate(red.eigenvalues):
        j = int(np.argmin(np.abs(aug.eigenvalues - l)))
        assert np.allclose(aug.values[:n, j], red.values[:, i], atol=1e-10)


def test_algebraic_pf_is_output_projection():
    # y = C_y x with C_y = -g_y^-1 g_x
    rng = np.random.default_rng(4)
    n, m = 3, 2
    dae = LinearDAE(rng.standard_normal((n, n)), rng.standard_normal((n, m)), rng.standard_normal((m, n)),
                    rng.standard_normal((m, m)) + 3 * np.eye(m))
    Cy = output_matrix(dae, OutputMap(np.zeros((m, n)), np.eye(m)))
    assert np.allclose(Cy, -np.linalg.solve(dae.gy, dae.gx))
    pf = classical_pf(reduce_state_matrix(dae))
    ypf = output_pf(pf, Cy)
    assert np.allclose(ypf.values, Cy @ pf.values)


def test_residue_against_transfer_function():
    rng = np.random.default_rng(6)
    A = rng.standard_normal((4, 4)) - 2 * np.eye(4)
    b = rng.standard_normal(4)
    c = rng.standard_normal(4)
    lam = np.linalg.eigvals(A)[0]
    # residue = lim (s - lam) c (sI - A)^-1 b
    h = 1e-6
    s = lam + h
    num = h * (c @ np.linalg.solve(s * np.eye(4) - A, b))
    assert abs(residue(A, b, c, lam) - num) < 1e-4 * max(1, abs(num))


def test_solve_linear_singular_against_expm():
    rng = np.random.default_rng(8)
    n = 4
    A = rng.standard_normal((n, n))
    from scipy.linalg import expm

    from smallsig.pencil import MatrixPencil

    x0 = rng.standard_normal(n)
    t = np.array([0.0, 0.3, 1.1])
    x = solve_linear_singular(MatrixPencil(np.eye(n), A), x0, t)
    for k, tk in enumerate(t):
        assert np.allclose(x[k].real, expm(A * tk) @ x0, atol=1e-10)


def test_solve_linear_singular_defective_and_consistency():
    P = example_ch3()
    sol = eigen(P)
    # a combination of finite right vectors is consistent and reproduced at t = 0
    x0 = (sol.right_vecs @ np.array([1.0, 0.5, -1.0])).real
    x = solve_linear_singular(P, x0, [0.0])
    assert np.allclose(x[0].real, x0, atol=1e-8)
    with pytest.raises(InconsistentInitialCondition) as ei:
        solve_linear_singular(P, np.array([0, 0, 0, 0, 1.0]), [0.0])
    assert ei.value.projected is not None


def test_defective_response_matches_algebra(laplace):
    # x_1 from e_1 is e^{-2t} times the lambda=-2 constant term plus the lambda=-3 term
    P = example_ch3()
    t = np.array([0.0, 0.5, 1.0])
    x = solve_linear_singular(P, np.eye(5)[0], t, project=True)
    want = laplace[0, 0] * np.exp(-2 * t) + laplace[0, 2] * np.exp(-3 * t)
    assert np.allclose(x[:, 0].real, want, atol=1e-8)
