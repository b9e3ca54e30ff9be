import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from smallsig.dae import example_ch3, example_ch4_plant
from smallsig.errors import InputError, NonRegularPencil, PreconditionError
from smallsig.pencil import (
    MatrixPencil, MoebiusCoeffs, chordal_distance, cluster_eigenvalues, damping_and_frequency, eigen, is_regular,
    moebius_transform, prime_spectrum, residuals, stability_verdict,
)


def _det_roots(E, A):
    """Roots of det(sE - A): exact integer determinants at s = 0..r, then exact interpolation."""
    s = sympy.symbols("s")
    r = len(E)
    pts = [(k, (sympy.Matrix(E) * k - sympy.Matrix(A)).det(method="bareiss")) for k in range(r + 1)]
    p = sympy.Poly(sympy.interpolate(pts, s), s)
    return p.degree(), [complex(sympy.N(r)) for r in p.all_roots()]


def test_ch3_matches_determinant_roots():
    P = example_ch3()
    deg, roots = _det_roots(P.E.astype(int).tolist(), P.A.astype(int).tolist())
    sol = eigen(P)
    assert sol.nu == deg == 3
    assert sol.inf_multiplicity == 2
    # defective double root: QZ splits it by about sqrt(eps)
    got = np.sort(sol.finite_eigs.real)
    assert np.allclose(got, np.sort([r.real for r in roots]), atol=1e-6)


def test_ch4_matches_determinant_roots():
    P = example_ch4_plant().pencil
    deg, roots = _det_roots(P.E.astype(int).tolist(), P.A.astype(int).tolist())
    sol = eigen(P)
    assert deg == 5 and sol.inf_multiplicity == 2
    assert np.allclose(np.sort(sol.finite_eigs.real), np.sort([r.real for r in roots]), atol=1e-8)


def test_eigenvectors_normalized_and_small_residuals():
    rng = np.random.default_rng(3)
    P = MatrixPencil(rng.standard_normal((6, 6)), rng.standard_normal((6, 6)))
    sol = eigen(P)
    rr, rl = residuals(P, sol)
    assert rr.max() < 1e-12 and rl.max() < 1e-12
    for k in range(sol.nu):
        assert abs(sol.left_vecs[k] @ P.E @ sol.right_vecs[:, k] - 1) < 1e-10


def test_singular_pencil_rejected():
    E = np.array([[1.0, 0], [0, 0]])
    A = np.array([[1.0, 0], [0, 0]])
    P = MatrixPencil(E, A)
    assert not is_regular(P)
    with pytest.raises(NonRegularPencil):
        eigen(P)


def test_shape_errors():
    with pytest.raises(InputError):
        MatrixPencil(np.eye(2), np.eye(3))
    with pytest.raises(InputError):
        MatrixPencil(np.ones((2, 3)), np.ones((2, 3)))


def test_zero_E_gives_only_infinite():
    sol = eigen(MatrixPencil(np.zeros((3, 3)), np.eye(3)))
    assert sol.nu == 0 and sol.inf_multiplicity == 3


def test_degenerate_moebius_rejected():
    with pytest.raises(PreconditionError):
        MoebiusCoeffs(1, 2, 2, 4)


def test_transform_maps_known_spectrum():
    # s in {-1, -2, inf}
    P = MatrixPencil(np.diag([1.0, 1.0, 0.0]), np.diag([-1.0, -2.0, 1.0]))
    co = MoebiusCoeffs.shift_invert(0.5)
    z = eigen(moebius_transform(P, co)).finite_eigs
    # z = 1 / (s - sigma) for finite s, z = 0 for s = inf
    want = sorted([1 / (-1 - 0.5), 1 / (-2 - 0.5), 0.0])
    assert np.allclose(sorted(z.real), want, atol=1e-12)
    s = prime_spectrum(eigen(moebius_transform(P, co)), co)
    assert np.sum(~np.isfinite(s)) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000), st.floats(-2.0, 2.0), st.floats(0.3, 2.0))
def test_round_trip_maps(r, seed, sigma, nu):
    rng = np.random.default_rng(seed)
    co = MoebiusCoeffs.generalized_cayley(sigma, nu)
    s = rng.standard_normal(r) + 1j * rng.standard_normal(r)
    assert np.allclose(co.to_prime(co.from_prime(s)), s, rtol=1e-9, atol=1e-9)


def test_chordal_distance():
    assert chordal_distance(np.inf, np.inf) == 0.0
    assert chordal_distance(0.0, np.inf) == 1.0
    assert abs(chordal_distance(1.0, -1.0) - 1.0) < 1e-15


def test_cluster_transitive():
    g = cluster_eigenvalues(np.array([1.0, 1.0 + 6e-7, 1.0 + 1.2e-6, 5.0]))
    assert g == [[0, 1, 2], [3]]


def test_damping_and_frequency():
    z, fn = damping_and_frequency(-1 + 1j)
    assert abs(z - 1 / np.sqrt(2)) < 1e-15
    assert abs(fn - np.sqrt(2) / (2 * np.pi)) < 1e-15
    z0, f0 = damping_and_frequency(0.0)
    assert np.isnan(z0) and f0 == 0.0


def test_stability_verdict():
    rep = stability_verdict(np.array([-0.1 + 10j, -0.1 - 10j, -3]))
    assert rep.stable and rep.well_damped is False
    assert not stability_verdict(np.array([0.1, -1])).stable
    m = stability_verdict(np.array([1e-12, -1]), zero_tol=1e-9)
    assert m.marginal and not m.stable
