"""Fractional-order control: Oustaloup approximation of s^gamma, controller
blocks, closed-loop assembly and the doubled-pencil stability test."""

from dataclasses import dataclass
from math import floor

import numpy as np

from .errors import InputError, PreconditionError
from .pencil import MatrixPencil, eigen


@dataclass(frozen=True)
class OraSpec:
    gamma: float
    omega_b: float
    omega_h: float
    N: int

    def __post_init__(self):
        if not 0 < self.omega_b < self.omega_h:
            raise PreconditionError(f"need 0 < omega_b < omega_h, got [{self.omega_b}, {self.omega_h}]")
        if int(self.N) != self.N or self.N < 1:
            raise PreconditionError(f"approximation order must be a positive integer, got {self.N}")
        if abs(self.gamma) > 1:
            raise PreconditionError(f"|gamma| must not exceed 1 for a single block, got {self.gamma}; use split_order")

    @property
    def omega_v(self):
        return np.sqrt(self.omega_h / self.omega_b)


def suggest_order(omega_b, omega_h, floor_=4):
    """N = nu_b + nu_h for a band 10^-nu_b .. 10^nu_h, never below ``floor_``."""
    span = np.log10(omega_h) - np.log10(omega_b)
    return max(floor_, int(round(span)))


def ora_frequencies(spec):
    """Zeros w'_k, poles w_k and the high-frequency gain w_h^gamma."""
    k = np.arange(1, spec.N + 1)
    wv = spec.omega_v
    zeros = spec.omega_b * wv ** ((2 * k - 1 - spec.gamma) / spec.N)
    poles = spec.omega_b * wv ** ((2 * k - 1 + spec.gamma) / spec.N)
    return zeros, poles, spec.omega_h**spec.gamma


@dataclass(frozen=True)
class OraRealization:
    spec: OraSpec
    zeros: np.ndarray
    poles: np.ndarray
    hf_gain: float
    A_E: np.ndarray
    B_E: np.ndarray
    C_E: np.ndarray
    D_E: float
    E_I: np.ndarray
    A_I: np.ndarray
    B_I: np.ndarray
    C_I: np.ndarray

    def nnz(self):
        return dict(
            explicit=int(np.count_nonzero(self.A_E) + np.count_nonzero(self.B_E) + np.count_nonzero(self.C_E) + (self.D_E != 0)),
            semi_implicit=int(np.count_nonzero(self.E_I) + np.count_nonzero(self.A_I) + np.count_nonzero(self.B_I)),
        )


def ora_realize(spec):
    """Both state-space forms of the Oustaloup ladder.

    Explicit: chi' = A chi + B u, y = 1'chi + w_h^gamma u, with sections chained
    so that row k of A holds (w'_k - w_k) below the diagonal.
    Semi-implicit: states (chi_1..chi_N, y) with bidiagonal E and A, where the
    input enters only the first row and y is the last variable.
    """
    zeros, poles, g = ora_frequencies(spec)
    N = spec.N
    A = np.zeros((N, N))
    for k in range(N):
        A[k, k] = -poles[k]
        A[k, :k] = zeros[k] - poles[k]
    B = (g * (zeros - poles)).reshape(N, 1)
    C = np.ones((1, N))
    E_I = np.zeros((N + 1, N + 1))
    A_I = np.zeros((N + 1, N + 1))
    E_I[0, 0] = 1.0
    A_I[0, 0] = -poles[0]
    for k in range(1, N):
        E_I[k, k - 1] = -1.0
        E_I[k, k] = 1.0
        A_I[k, k - 1] = zeros[k - 1]
        A_I[k, k] = -poles[k]
    E_I[N, N - 1] = -1.0
    A_I[N, N - 1] = zeros[N - 1]
    A_I[N, N] = -1.0
    B_I = np.zeros((N + 1, 1))
    B_I[0, 0] = g
    C_I = np.zeros((1, N + 1))
    C_I[0, N] = 1.0
    return OraRealization(spec, zeros, poles, g, A, B, C, g, E_I, A_I, B_I, C_I)


def ora_frequency_response(real, omega, form="product", K=1.0):
    """K * H(j omega) from the product formula or either realization."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    s = 1j * omega
    if form == "product":
        h = np.full(s.shape, real.hf_gain, dtype=complex)
        for z, p in zip(real.zeros, real.poles):
            h *= (s + z) / (s + p)
    elif form == "explicit":
        N = real.spec.N
        h = np.array([(real.C_E @ np.linalg.solve(si * np.eye(N) - real.A_E, real.B_E))[0, 0] + real.D_E for si in s])
    elif form == "semi_implicit":
        h = np.array([(real.C_I @ np.linalg.solve(si * real.E_I - real.A_I, real.B_I))[0, 0] for si in s])
    else:
        raise InputError(f"unknown response form {form!r}")
    return K * h


def ora_dc_gain(real, K=1.0):
    return K * real.hf_gain * float(np.prod(real.zeros / real.poles))


def ora_step_error(K, gamma, omega_b):
    """Steady-state unity-feedback step error of K * ORA(s^gamma).

    The loop gain at s = 0 is K w_b^gamma, hence e = 1 / (1 + K w_b^gamma).
    """
    den = 1.0 + K * omega_b**gamma
    if den == 0:
        raise PreconditionError("1 + K omega_b^gamma vanishes: the closed loop has a pole at the origin")
    return 1.0 / den


def ora_step_simulation(K, spec, t_end=None, steps=4000):
    """Simulate the unity-feedback loop around K * ORA for a unit step.

    Trapezoidal steps on a geometric time grid reach the slow ladder poles
    without millions of uniform steps. Returns (t, e(t)).
    """
    real = ora_realize(spec)
    N = spec.N
    A, B, C, D = real.A_E, K * real.B_E, real.C_E, K * real.D_E
    # e = r - y, y = C chi + D e  =>  e = (r - C chi) / (1 + D)
    Acl = A - B @ C / (1 + D)
    Bcl = B / (1 + D)
    if t_end is None:
        t_end = 50.0 / spec.omega_b
    t = np.concatenate([[0.0], np.geomspace(1e-3 / spec.omega_h, t_end, steps)])
    chi = np.zeros((N, 1))
    I = np.eye(N)
    err = np.empty(len(t))
    err[0] = 1.0 / (1 + D)
    for k in range(1, len(t)):
        h = t[k] - t[k - 1]
        chi = np.linalg.solve(I - 0.5 * h * Acl, (I + 0.5 * h * Acl) @ chi + h * Bcl)
        err[k] = ((1.0 - C @ chi) / (1 + D))[0, 0]
    return t, err


def split_order(gamma):
    """gamma = n + r with integer n and r in [0, 1)."""
    n = floor(gamma)
    r = gamma - n
    if abs(r - 1.0) < 1e-12:
        n, r = n + 1, 0.0
    if abs(r) < 1e-12:
        r = 0.0
    return int(n), float(r)


@dataclass(frozen=True)
class ControllerBlock:
    """E_c1 x' + E_cg x^(gamma) = A_c x + B_c w,  0 = C_c x + D_c w - u."""

    E_c1: np.ndarray
    E_cg: np.ndarray
    A_c: np.ndarray
    B_c: np.ndarray
    C_c: np.ndarray
    D_c: np.ndarray
    gamma: float
    kind: str = ""

    def transfer(self, s):
        """u/w at complex frequency s with s^gamma on the principal branch."""
        sg = complex(s) ** self.gamma
        M = s * self.E_c1 + sg * self.E_cg - self.A_c
        x = np.linalg.solve(M, self.B_c)
        return self.C_c @ x + self.D_c


def foc_block(kind, gamma, **p):
    """Controller matrices of the fractional blocks.

    FOI: x^(gamma) = K_i w, u = x. FOPI adds the proportional path K_p w.
    FO_leadlag: K (1 + T1 s^gamma) / (1 + T2 s^gamma) with a two-variable form.
    FO_PSS: the squared lead-lag with gain K_w. FO_AGC: P_s^(gamma) = -K_i w
    for a measured deviation w of the centre-of-inertia speed.
    With gamma = 1 the fractional matrix moves into E_c1.
    """
    kind_u = kind.upper()

    def need(*names):
        miss = [k for k in names if k not in p]
        if miss:
            raise InputError(f"{kind} block needs parameters {miss}")
        return [float(p[k]) for k in names]

    one = np.ones((1, 1))
    if kind_u == "FOI":
        (Ki,) = need("K_i")
        mats = (one.copy(), np.zeros((1, 1)), Ki * one, one.copy(), np.zeros((1, 1)))
    elif kind_u == "FOPI":
        Kp, Ki = need("K_p", "K_i")
        mats = (one.copy(), np.zeros((1, 1)), Ki * one, one.copy(), Kp * one)
    elif kind_u == "FO_AGC":
        (Ki,) = need("K_i")
        mats = (one.copy(), np.zeros((1, 1)), -Ki * one, one.copy(), np.zeros((1, 1)))
    elif kind_u == "FO_LEADLAG":
        K, T1, T2 = need("K", "T1", "T2")
        Eg = np.array([[T2, 0.0], [T1, 0.0]])
        Ac = np.array([[-1.0, 0.0], [-1.0, 1.0]])
        Bc = np.array([[K], [0.0]])
        Cc = np.array([[0.0, 1.0]])
        mats = (Eg, Ac, Bc, Cc, np.zeros((1, 1)))
    elif kind_u == "FO_PSS":
        Kw, T1, T2 = need("K_w", "T1", "T2")
        Eg = np.zeros((4, 4))
        Eg[0, 0], Eg[1, 0], Eg[2, 2], Eg[3, 2] = T2, T1, T2, T1
        Ac = np.array([[-1.0, 0, 0, 0], [-1, 1, 0, 0], [0, 1, -1, 0], [0, 0, -1, 1]])
        Bc = np.array([[Kw], [0.0], [0.0], [0.0]])
        Cc = np.array([[0.0, 0.0, 0.0, 1.0]])
        mats = (Eg, Ac, Bc, Cc, np.zeros((1, 1)))
    else:
        raise InputError(f"unknown controller kind {kind!r}")
    Eg, Ac, Bc, Cc, Dc = mats
    Ac = np.atleast_2d(Ac)
    if gamma == 1:
        E1, Eg = Eg, np.zeros_like(Eg)
    else:
        E1 = np.zeros_like(Eg)
    return ControllerBlock(E1, Eg, Ac, np.atleast_2d(Bc), np.atleast_2d(Cc), np.atleast_2d(Dc), float(gamma), kind_u)


@dataclass(frozen=True)
class FractionalClosedLoop:
    """M x' + M_gamma x^(gamma) = A_cl x over the stacked (plant, controller, input) variables."""

    M: np.ndarray
    M_gamma: np.ndarray
    A_cl: np.ndarray
    gamma: float

    @property
    def beta(self):
        return 1.0 - self.gamma

    @property
    def rho(self):
        return self.M.shape[0]


def assemble_closed_loop(plant, block):
    """Stack plant E x' = A x + B u, y = C x + D u with the controller driven by y.

    The measurement enters the controller as w = y with no sign flip, so an
    integer-order loop has its poles where 1 - K(s) G(s) = 0; put a negative
    gain in the block for negative feedback.
    """
    E, A, B, C, D = (np.atleast_2d(np.asarray(a, float)) for a in (plant.E, plant.A, plant.B, plant.C, plant.D))
    l = A.shape[0]
    p = B.shape[1]
    q = C.shape[0]
    sc = block.A_c.shape[0]
    if E.shape != (l, l) or C.shape[1] != l or D.shape != (q, p):
        raise InputError("plant matrices have inconsistent dimensions")
    if block.B_c.shape != (sc, q) or block.C_c.shape != (p, sc) or block.D_c.shape != (p, q):
        raise InputError(
            f"controller expects {block.B_c.shape[1]} measurements and drives {block.C_c.shape[0]} inputs; plant has q={q}, p={p}"
        )
    rho = l + sc + p
    M = np.zeros((rho, rho))
    Mg = np.zeros((rho, rho))
    M[:l, :l] = E
    M[l : l + sc, l : l + sc] = block.E_c1
    Mg[l : l + sc, l : l + sc] = block.E_cg
    Acl = np.zeros((rho, rho))
    Acl[:l, :l] = A
    Acl[:l, l + sc :] = B
    Acl[l : l + sc, :l] = block.B_c @ C
    Acl[l : l + sc, l : l + sc] = block.A_c
    Acl[l : l + sc, l + sc :] = block.B_c @ D
    Acl[l + sc :, :l] = block.D_c @ C
    Acl[l + sc :, l : l + sc] = block.C_c
    Acl[l + sc :, l + sc :] = block.D_c @ D - np.eye(p)
    return FractionalClosedLoop(M, Mg, Acl, block.gamma)


def fractional_pencil(cl):
    """calE = [[I, 0], [0, M]], calA = [[0, I], [A_cl, -M_gamma]]."""
    rho = cl.rho
    I = np.eye(rho)
    Z = np.zeros((rho, rho))
    return MatrixPencil(np.block([[I, Z], [Z, cl.M]]), np.block([[Z, I], [cl.A_cl, -cl.M_gamma]]))


@dataclass(frozen=True)
class FractionalVerdict:
    eigenvalues: np.ndarray
    args: np.ndarray
    threshold: float
    stable: bool
    inf_multiplicity: int


def fractional_stability(cl):
    """Stable iff |Arg lambda| > min(gamma, 1 - gamma) pi / 2 for every finite lambda."""
    g = cl.gamma
    if not 0 < g < 1:
        raise PreconditionError(f"fractional order must lie in (0, 1), got {g}")
    sol = eigen(fractional_pencil(cl), want_left=False)
    lam = sol.finite_eigs
    args = np.abs(np.angle(lam))
    thr = min(g, 1 - g) * np.pi / 2
    return FractionalVerdict(lam, args, thr, bool(np.all(args > thr)), sol.inf_multiplicity)


def example_ch4_closed_loop(gamma=0.6, K_p=7.0, K_i=10.0):
    from .dae import example_ch4_plant

    return assemble_closed_loop(example_ch4_plant(), foc_block("FOPI", gamma, K_p=K_p, K_i=K_i))
