import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from smallsig.dae import example_ch4_plant
from smallsig.errors import InputError, PreconditionError
from smallsig.fractional import (
    OraSpec, assemble_closed_loop, example_ch4_closed_loop, foc_block, fractional_pencil, fractional_stability,
    ora_dc_gain, ora_frequency_response, ora_realize, ora_step_error, ora_step_simulation, split_order, suggest_order,
)
from smallsig.pencil import MatrixPencil, eigen


def test_spec_validation():
    with pytest.raises(PreconditionError):
        OraSpec(0.5, 10.0, 1.0, 4)
    with pytest.raises(PreconditionError):
        OraSpec(0.5, 1.0, 10.0, 0)
    with pytest.raises(PreconditionError):
        OraSpec(1.5, 1.0, 10.0, 4)


def test_suggest_order():
    assert suggest_order(1e-3, 1e3) == 6
    assert suggest_order(1.0, 10.0) == 4


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.95, 0.95).filter(lambda g: abs(g) > 0.05), st.integers(4, 12))
def test_ladder_interlaces_and_realizations_agree(gamma, N):
    real = ora_realize(OraSpec(gamma, 1e-2, 1e2, N))
    w = np.logspace(-3, 3, 25)
    Hp = ora_frequency_response(real, w)
    He = ora_frequency_response(real, w, "explicit")
    Hi = ora_frequency_response(real, w, "semi_implicit")
    assert np.max(np.abs(He - Hp) / np.abs(Hp)) < 1e-9
    assert np.max(np.abs(Hi - Hp) / np.abs(Hp)) < 1e-9
    z, p = real.zeros, real.poles
    # gamma > 0: each zero precedes its pole; gamma < 0 the reverse
    assert np.all((z < p) if gamma > 0 else (z > p))


def test_approximates_power_law_mid_band():
    g = 0.5
    real = ora_realize(OraSpec(g, 1e-3, 1e3, 12))
    w = np.logspace(-1, 1, 9)
    H = ora_frequency_response(real, w)
    exact = (1j * w) ** g
    assert np.max(np.abs(np.abs(H) / np.abs(exact) - 1)) < 0.02
    assert np.max(np.abs(np.angle(H) - np.angle(exact))) < np.radians(1.0)


def test_sparsity_counts():
    N = 9
    real = ora_realize(OraSpec(-0.3, 1e-2, 1e2, N))
    assert np.count_nonzero(real.E_I) == 2 * N
    assert np.count_nonzero(real.A_I) == 2 * N + 1
    assert np.count_nonzero(real.B_I) == 1


def test_step_error_final_value():
    # final value theorem: e = 1 / (1 + L(0)) with L(0) the product-formula gain at s -> 0
    K, g, wb = 10.0, -0.5, 1e-4
    spec = OraSpec(g, wb, 1e4, 8)
    real = ora_realize(spec)
    L0 = ora_frequency_response(real, [1e-14], K=K)[0].real
    assert abs(ora_step_error(K, g, wb) - 1 / (1 + L0)) < 1e-6 / (1 + L0)
    t, e = ora_step_simulation(K, spec)
    assert abs(e[-1] / ora_step_error(K, g, wb) - 1) < 1e-3
    assert abs(ora_dc_gain(real, K) - L0) < 1e-9 * L0


def test_split_order():
    assert split_order(1.6) == (1, pytest.approx(0.6))
    assert split_order(-0.4) == (-1, pytest.approx(0.6))
    assert split_order(2.0) == (2, 0.0)


@pytest.mark.parametrize("s", [0.3 + 1.1j, 2.0 + 0.5j, 0.7j + 0.05])
def test_controller_transfers(s):
    g = 0.6
    sg = s**g
    assert np.allclose(foc_block("FOI", g, K_i=3.0).transfer(s), 3.0 / sg)
    assert np.allclose(foc_block("FOPI", g, K_p=2.0, K_i=3.0).transfer(s), 2.0 + 3.0 / sg)
    assert np.allclose(foc_block("FO_AGC", g, K_i=3.0).transfer(s), -3.0 / sg)
    ll = 4.0 * (1 + 0.5 * sg) / (1 + 0.1 * sg)
    assert np.allclose(foc_block("FO_leadlag", g, K=4.0, T1=0.5, T2=0.1).transfer(s), ll)
    pss = 4.0 * ((1 + 0.5 * sg) / (1 + 0.1 * sg)) ** 2
    assert np.allclose(foc_block("FO_PSS", g, K_w=4.0, T1=0.5, T2=0.1).transfer(s), pss)


def test_controller_errors():
    with pytest.raises(InputError):
        foc_block("FOPI", 0.5, K_p=1.0)
    with pytest.raises(InputError):
        foc_block("PID", 0.5)


def _quadratic_det_roots(cl):
    """Roots of det(z^2 M + z M_gamma - A_cl) from exact integer determinants and interpolation."""
    z = sp.symbols("z")
    M = sp.Matrix(cl.M.astype(int).tolist())
    Mg = sp.Matrix(cl.M_gamma.astype(int).tolist())
    A = sp.Matrix(cl.A_cl.astype(int).tolist())
    deg = 2 * cl.rho
    pts = [(k, (M * k * k + Mg * k - A).det(method="bareiss")) for k in range(deg + 1)]
    p = sp.Poly(sp.interpolate(pts, z), z)
    return p.degree(), np.array([complex(r) for r in sp.Poly(p, z).nroots(n=20, maxsteps=200)])


def test_closed_loop_against_quadratic_determinant():
    cl = example_ch4_closed_loop()
    assert np.all(cl.M == np.round(cl.M)) and np.all(cl.A_cl == np.round(cl.A_cl))
    deg, roots = _quadratic_det_roots(cl)
    ver = fractional_stability(cl)
    assert deg == ver.eigenvalues.size == 11
    assert ver.inf_multiplicity == 18 - deg
    d = np.abs(ver.eigenvalues[:, None] - roots[None, :]).min(axis=1)
    assert d.max() < 1e-8


def test_stability_threshold_symmetry():
    a = fractional_stability(example_ch4_closed_loop(gamma=0.3))
    b = fractional_stability(example_ch4_closed_loop(gamma=0.7))
    assert abs(a.threshold - b.threshold) < 1e-15
    with pytest.raises(PreconditionError):
        fractional_stability(example_ch4_closed_loop(gamma=1.0))


def test_integer_order_closed_loop_poles_satisfy_loop_equation():
    # gamma = 1, controller fed u = K(s) y directly: poles satisfy 1 - K(s) G(s) = 0
    plant = example_ch4_plant()
    cl = assemble_closed_loop(plant, foc_block("FOPI", 1.0, K_p=7.0, K_i=10.0))
    assert not np.any(cl.M_gamma)
    sol = eigen(MatrixPencil(cl.M, cl.A_cl))
    assert sol.nu > 0
    for s in sol.finite_eigs:
        G = (plant.C @ np.linalg.solve(s * plant.E - plant.A, plant.B))[0, 0]
        assert abs(1 - (7.0 + 10.0 / s) * G) < 1e-6 * max(1.0, abs((7.0 + 10.0 / s) * G))


def test_pencil_shape():
    cl = example_ch4_closed_loop()
    assert fractional_pencil(cl).r == 2 * cl.rho == 18
