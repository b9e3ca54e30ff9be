import numpy as np
import pytest

from smallsig.dae import (
    LinearDAE, OutputMap, SemiImplicitLHS, augment_pencil, builtin_model, omib_equilibrium, omib_linear, output_matrix,
    reduce_state_matrix,
)
from smallsig.errors import InputError, PreconditionError, SingularJacobian
from smallsig.pencil import MatrixPencil, eigen


def _random_dae(rng, n=4, m=3):
    return LinearDAE(rng.standard_normal((n, n)), rng.standard_normal((n, m)), rng.standard_normal((m, n)),
                     rng.standard_normal((m, m)) + 3 * np.eye(m))


def test_reduction_and_augmentation_share_finite_spectrum():
    dae = _random_dae(np.random.default_rng(0))
    lam = np.linalg.eigvals(reduce_state_matrix(dae))
    sol = eigen(augment_pencil(dae))
    assert sol.inf_multiplicity == dae.m
    d = np.abs(sol.finite_eigs[:, None] - lam[None, :]).min(axis=1)
    assert sol.nu == dae.n and d.max() < 1e-10


def test_semi_implicit_lhs():
    # T x' = f_x x with T = 2 I halves the spectrum
    dae = LinearDAE(np.diag([-2.0, -4.0]), np.zeros((2, 0)), np.zeros((0, 2)), np.zeros((0, 0)))
    P = augment_pencil(dae, SemiImplicitLHS(2 * np.eye(2), np.zeros((0, 2))))
    assert np.allclose(np.sort(eigen(P).finite_eigs.real), [-2.0, -1.0])


def test_singular_gy():
    dae = LinearDAE(np.eye(2), np.ones((2, 1)), np.ones((1, 2)), np.zeros((1, 1)))
    with pytest.raises(SingularJacobian):
        reduce_state_matrix(dae)
    # the pencil route still works and there is one more infinite eigenvalue than m
    sol = eigen(augment_pencil(dae))
    assert sol.nu + sol.inf_multiplicity == 3


def test_output_matrix():
    dae = _random_dae(np.random.default_rng(1))
    hx = np.ones((1, dae.n))
    hy = np.ones((1, dae.m))
    C = output_matrix(dae, OutputMap(hx, hy))
    assert np.allclose(C, hx - hy @ np.linalg.solve(dae.gy, dae.gx))


def test_shape_validation():
    with pytest.raises(InputError):
        LinearDAE(np.eye(2), np.zeros((3, 1)), np.zeros((1, 2)), np.zeros((1, 1)))


def test_omib_linear():
    d0 = omib_equilibrium()
    assert abs(np.sin(d0) - 0.7 / 1.22) < 1e-15
    lin = omib_linear()
    b = lin.meta["b"]
    assert abs(b - 100 * np.pi * 1.22 * np.cos(d0) / (5 * 0.7)) < 1e-12
    lam = np.linalg.eigvals(lin.fx)
    # undamped: +- j sqrt(b)
    assert np.allclose(np.sort(lam.imag), [-np.sqrt(b), np.sqrt(b)])
    with pytest.raises(PreconditionError):
        omib_equilibrium(P_m=2.0)


def test_builtins():
    assert isinstance(builtin_model("example_ch3"), MatrixPencil)
    assert builtin_model("example_ch4").r == 7
    assert builtin_model("toy_multimachine").n == 21
    with pytest.raises(InputError):
        builtin_model("nope")
