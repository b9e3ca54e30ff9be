"""Linearized DAE models: reduction to the state matrix, augmentation to a
pencil, output matrices and the built-in example models."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, PreconditionError, SingularJacobian
from .pencil import MatrixPencil

RCOND_MIN = 1e-12


def _mat(a, name="matrix"):
    a = np.array(a, dtype=float)
    if a.ndim != 2:
        raise InputError(f"{name} must be 2-D, got ndim={a.ndim}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LinearDAE:
    """Jacobians f_x, f_y, g_x, g_y of x' = f(x, y), 0 = g(x, y) at an equilibrium."""

    fx: np.ndarray
    fy: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    state_names: tuple = ()
    alg_names: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        fx = _mat(self.fx, name="fx")
        n = fx.shape[0]
        if fx.shape != (n, n):
            raise InputError(f"fx must be square, got {fx.shape}")
        gy = np.asarray(self.gy, dtype=float)
        m = 0 if gy.size == 0 else gy.shape[0]
        gy = _mat(gy.reshape(m, m) if gy.size == 0 else gy, name="gy")
        if gy.shape != (m, m):
            raise InputError(f"gy must be square, got {gy.shape}")
        fy = np.asarray(self.fy, dtype=float)
        gx = np.asarray(self.gx, dtype=float)
        fy = _mat(fy.reshape(n, 0) if fy.size == 0 and m == 0 else fy, name="fy")
        gx = _mat(gx.reshape(0, n) if gx.size == 0 and m == 0 else gx, name="gx")
        if fy.shape != (n, m):
            raise InputError(f"fy must be {n}x{m}, got {fy.shape}")
        if gx.shape != (m, n):
            raise InputError(f"gx must be {m}x{n}, got {gx.shape}")
        sn = tuple(self.state_names) or tuple(f"x{i}" for i in range(n))
        an = tuple(self.alg_names) or tuple(f"y{i}" for i in range(m))
        if len(sn) != n or len(an) != m:
            raise InputError("variable name counts do not match dimensions")
        for k, v in (("fx", fx), ("fy", fy), ("gx", gx), ("gy", gy), ("state_names", sn), ("alg_names", an)):
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.fx.shape[0]

    @property
    def m(self):
        return self.gy.shape[0]

    def gy_rcond(self):
        """Reciprocal 1-norm condition number of g_y (1.0 when m = 0)."""
        if self.m == 0:
            return 1.0
        with np.errstate(all="ignore"):
            c = np.linalg.cond(self.gy, 1)
        return 0.0 if not np.isfinite(c) else 1.0 / c

    def require_gy(self):
        rc = self.gy_rcond()
        if not rc > RCOND_MIN:
            raise SingularJacobian(
                f"g_y is singular or nearly so: reciprocal condition estimate {rc:.3e} <= {RCOND_MIN:g}", rcond=rc
            )
        return rc


@dataclass(frozen=True)
class SemiImplicitLHS:
    """Constant left-hand side blocks: T x' on the differential rows, R x' on the algebraic rows."""

    T: np.ndarray
    R: np.ndarray

    @classmethod
    def explicit(cls, n, m):
        return cls(np.eye(n), np.zeros((m, n)))


@dataclass(frozen=True)
class OutputMap:
    """Outputs w = h_x x + h_y y."""

    hx: np.ndarray
    hy: np.ndarray
    output_names: tuple = ()

    def __post_init__(self):
        hx = np.atleast_2d(np.asarray(self.hx, dtype=float))
        hy = np.asarray(self.hy, dtype=float)
        hy = hy.reshape(hx.shape[0], -1) if hy.size == 0 else np.atleast_2d(hy)
        if hx.shape[0] != hy.shape[0]:
            raise InputError("h_x and h_y must have the same number of rows")
        object.__setattr__(self, "hx", hx)
        object.__setattr__(self, "hy", hy)


def _gy_solve(dae, rhs):
    dae.require_gy()
    return np.linalg.solve(dae.gy, rhs)


def reduce_state_matrix(dae):
    """A_s = f_x - f_y g_y^-1 g_x."""
    if dae.m == 0:
        return np.array(dae.fx)
    return dae.fx - dae.fy @ _gy_solve(dae, dae.gx)


def augment_pencil(dae, lhs=None):
    """E_a = [[T, 0], [R, 0]] and A_a = [[f_x, f_y], [g_x, g_y]]."""
    n, m = dae.n, dae.m
    if lhs is None:
        lhs = SemiImplicitLHS.explicit(n, m)
    T = np.asarray(lhs.T, float)
    R = np.asarray(lhs.R, float).reshape(m, n)
    if T.shape != (n, n):
        raise InputError(f"T must be {n}x{n}, got {T.shape}")
    E = np.zeros((n + m, n + m))
    E[:n, :n] = T
    E[n:, :n] = R
    A = np.block([[dae.fx, dae.fy], [dae.gx, dae.gy]])
    return MatrixPencil(E, A)


def output_matrix(dae, omap):
    """C = h_x - h_y g_y^-1 g_x."""
    hx, hy = omap.hx, omap.hy
    if hx.shape[1] != dae.n or hy.shape[1] != dae.m:
        raise InputError(f"output map must be q x {dae.n} and q x {dae.m}")
    if dae.m == 0:
        return np.array(hx)
    return hx - hy @ _gy_solve(dae, dae.gx)


@dataclass(frozen=True)
class DescriptorPlant:
    """E x' = A x + B u, y = C x + D u."""

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def pencil(self):
        return MatrixPencil(self.E, self.A)


CH3_E = [[12, -3, 0, 0, 0], [4, 1, -1, 3, 0], [0, -4, -5, 1, 0], [8, 2, -5, 9, 0], [0, 0, 0, 0, 0]]
CH3_A = [[-17, 8, -2, 5, 3], [-7, -3, 3, -8, 1], [13, 9, 9, 3, 1], [-12, -7, 13, -22, 0], [1, 0, 0, 0, 1]]

CH4_E = [
    [4, 9, 9, -2, 10, 7, 3],
    [1, 5, 2, 2, 3, 1, 1],
    [1, 0, -2, -2, 6, 4, 1],
    [5, -2, -3, 18, 3, 16, 2],
    [6, 8, 6, 8, 6, 14, 2],
    [2, 11, 3, 6, 6, 2, 2],
    [4, 5, 5, 6, 2, 9, 1],
]
CH4_A = [
    [-15, -43, -39, 4, -35, -22, -5],
    [-3, -19, -2, -5, -12, -2, 1],
    [-4, -16, -30, 6, -9, -1, -7],
    [-25, -2, 3, -72, -3, -74, -4],
    [-27, -32, -23, -39, -24, -66, -5],
    [-8, -41, -15, -18, -24, -8, -8],
    [-18, -15, -9, -29, -13, -48, -1],
]


def example_ch3():
    """5x5 singular pencil with a defective double eigenvalue at -2."""
    return MatrixPencil(np.array(CH3_E, float), np.array(CH3_A, float))


def example_ch4_plant():
    """7x7 descriptor plant, single input on the sixth equation, output the sixth variable."""
    B = np.zeros((7, 1))
    B[5, 0] = 1.0
    C = np.zeros((1, 7))
    C[0, 5] = 1.0
    return DescriptorPlant(np.array(CH4_E, float), np.array(CH4_A, float), B, C, np.zeros((1, 1)))


def omib_equilibrium(e_q=1.22, v=1.0, X_tot=0.7, P_m=1.0, theta=0.0):
    ratio = P_m * X_tot / (v * e_q)
    if not -1.0 <= ratio <= 1.0:
        raise PreconditionError(f"no equilibrium: P_m X_tot / (v e'_q) = {ratio:.4g} lies outside [-1, 1]")
    return float(np.arcsin(ratio)) + theta


def omib_linear(e_q=1.22, v=1.0, X_tot=0.7, P_m=1.0, M=5.0, Omega_b=100 * np.pi, D=0.0, theta=0.0, delta_o=None):
    """Classical machine against an infinite bus, linearized.

    States are (delta, omega). The second-order form is
    delta'' + d delta' + b delta = 0 with b = Omega_b e_q v cos(delta_o - theta) / (M X_tot)
    and d = D / M; both are stored in ``meta``. ``delta_o`` overrides the
    equilibrium angle that is otherwise solved from the power balance.
    """
    if delta_o is None:
        delta_o = omib_equilibrium(e_q, v, X_tot, P_m, theta)
    ks = e_q * v * np.cos(delta_o - theta) / X_tot
    fx = np.array([[0.0, Omega_b], [-ks / M, -D / M]])
    b = Omega_b * ks / M
    meta = dict(b=b, d=D / M, delta_o=delta_o, Omega_b=Omega_b, M=M, e_q=e_q, v=v, X_tot=X_tot, P_m=P_m)
    return LinearDAE(fx, np.zeros((2, 0)), np.zeros((0, 2)), np.zeros((0, 0)), ("delta", "omega"), (), meta)


def builtin_model(name, **params):
    """Look up a built-in model by name."""
    if name == "example_ch3":
        return example_ch3()
    if name == "example_ch4":
        return example_ch4_plant().pencil
    if name == "omib_linear":
        return omib_linear(**params)
    if name == "toy_multimachine":
        from .toymodel import toy_multimachine, linearize

        return linearize(toy_multimachine(**params))
    raise InputError(f"unknown built-in model {name!r}")
