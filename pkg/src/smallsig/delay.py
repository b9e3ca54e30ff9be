"""Retarded LTI stability: crossing curves of the second-order PR loop,
delay-independent bands, Chebyshev pseudospectral eigenvalues of multi-delay
systems and (delay, gain) stability maps."""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize

from .errors import InputError, NumericalError, PreconditionError, SingularJacobian

RESIDUAL_TOL = 1e-8
REJECT_FACTOR = 0.9


@dataclass(frozen=True)
class SecondOrderPR:
    """x'' + c1 x' + c2 x = -u with u = K_p x' + kr_sign K_r x'(t - tau_r), gains scaled by eps.

    q(s) = s^2 + (c1 + eps K_p) s + c2 + kr_sign eps K_r s e^{-s tau_r}.
    ``kr_sign = -1`` is the textbook PR law u = K_p x' - K_r x'(t - tau); the
    OMIB stabilizer maps are drawn with ``kr_sign = +1`` (see ``omib_pr``).
    """

    c1: float
    c2: float
    Kp: float = 0.0
    Kr: float = 0.0
    tau_r: float = 0.0
    eps: float = 1.0
    kr_sign: int = -1

    def __post_init__(self):
        if self.tau_r < 0:
            raise PreconditionError(f"tau_r must be non-negative, got {self.tau_r}")
        if self.kr_sign not in (-1, 1):
            raise InputError("kr_sign must be +1 or -1")

    @property
    def c(self):
        return self.c1 + self.eps * self.Kp

    def with_(self, **kw):
        d = dict(self.__dict__)
        d.update(kw)
        return SecondOrderPR(**d)

    def q0(self, sigma, s):
        z = s - sigma
        return z * z + self.c * z + self.c2

    def q1(self, sigma, s):
        return self.kr_sign * self.eps * (s - sigma)

    def qtilde(self, sigma, s, tau, K):
        return self.q0(sigma, s) + self.q1(sigma, s) * K * np.exp(sigma * tau) * np.exp(-s * tau)

    def delay_lti(self, tau=None, K=None):
        """Companion form on (x, x'): x'' = -c2 x - c x' - kr_sign eps K x'(t - tau)."""
        tau = self.tau_r if tau is None else tau
        K = self.Kr if K is None else K
        A0 = np.array([[0.0, 1.0], [-self.c2, -self.c]])
        A1 = np.array([[0.0, 0.0], [0.0, -self.kr_sign * self.eps * K]])
        return DelayLTI(A0, [(A1, tau)])


def omib_pr(c, b=None, eps=None, kr_sign=1, **omib):
    """PR-stabilized OMIB loop with total friction c = d + K_p/Omega_b."""
    from .dae import omib_linear

    lin = omib_linear(**omib)
    b = lin.meta["b"] if b is None else b
    eps = 1.0 / lin.meta["Omega_b"] if eps is None else eps
    return SecondOrderPR(c1=c, c2=b, Kp=0.0, eps=eps, kr_sign=kr_sign)


@dataclass(frozen=True)
class CrossingBranch:
    nu: int
    mu: int
    omega: np.ndarray
    tau: np.ndarray
    K: np.ndarray
    residual: np.ndarray


def default_omega_grid():
    return np.logspace(-2, 3, 2000)


def sigma_crossings(sys, sigma=0.0, omega_grid=None, nus=(1, -1), mu_range=range(0, 5), tol=RESIDUAL_TOL):
    """(tau_cr, K_cr) points where a root of q sits on Re s = -sigma.

    tau = (Arg q1 - Arg q0 + (pi/2)(4 mu + nu + 1)) / omega and
    K = nu e^{-sigma tau} |q0 / q1|, evaluated at s = j omega. Points with
    tau < 0 are dropped; frequencies where q1 vanishes are skipped and
    returned in the second output. Every kept point is checked against the
    shifted quasi-polynomial with a scale-relative residual.
    """
    w = default_omega_grid() if omega_grid is None else np.asarray(omega_grid, float)
    if np.any(w <= 0):
        raise PreconditionError("crossing frequencies must be positive")
    s = 1j * w
    q0 = sys.q0(sigma, s)
    q1 = sys.q1(sigma, s)
    bad = np.abs(q1) < 1e-14 * np.maximum(1.0, np.abs(q0))
    skipped = w[bad]
    w, s, q0, q1 = w[~bad], s[~bad], q0[~bad], q1[~bad]
    branches = []
    for nu in nus:
        for mu in mu_range:
            tau = (np.angle(q1) - np.angle(q0) + 0.5 * np.pi * (4 * mu + nu + 1)) / w
            keep = tau >= 0
            t = tau[keep]
            K = nu * np.exp(-sigma * t) * np.abs(q0[keep] / q1[keep])
            val = sys.qtilde(sigma, s[keep], t, K)
            scale = np.abs(q0[keep]) + np.abs(q1[keep] * K * np.exp(sigma * t))
            res = np.abs(val) / np.maximum(scale, 1e-300)
            if res.size and res.max() > tol:
                raise NumericalError(f"crossing residual {res.max():.3e} exceeds {tol:g} (nu={nu}, mu={mu})")
            branches.append(CrossingBranch(nu, mu, w[keep], t, K, res))
    return branches, skipped


def delay_free_stable(sys, K):
    """Both roots of s^2 + (c + kr_sign eps K) s + c2 lie in the open left half plane."""
    return (sys.c + sys.kr_sign * sys.eps * K) > 0 and sys.c2 > 0


def crossing_frequencies(sys, K):
    """Positive omega with |q0(j omega)| = |K q1(j omega)| at sigma = 0.

    omega^4 + (c^2 - 2 c2 - eps^2 K^2) omega^2 + c2^2 = 0.
    """
    p = sys.c**2 - 2 * sys.c2 - (sys.eps * K) ** 2
    disc = p * p - 4 * sys.c2**2
    if disc < 0:
        return np.zeros(0)
    r = np.sqrt(disc)
    w2 = np.array([(-p - r) / 2, (-p + r) / 2])
    w2 = w2[w2 > 0]
    return np.unique(np.sqrt(w2))


def first_crossing_delay(sys, K):
    """Smallest tau > 0 at which a root of q reaches the imaginary axis, inf if none."""
    nu = 1 if K > 0 else -1
    best = np.inf
    for w in crossing_frequencies(sys, K):
        s = 1j * w
        base = np.angle(sys.q1(0.0, s)) - np.angle(sys.q0(0.0, s)) + 0.5 * np.pi * (nu + 1)
        t = np.mod(base, 2 * np.pi) / w
        if t <= 0:
            t = 2 * np.pi / w
        best = min(best, t)
    return best


@dataclass(frozen=True)
class DelayMargin:
    tau: float
    K: float
    K_sign: int


def delay_margin(sys, K_max=None, samples=400):
    """Largest delay reachable from tau = 0 without crossing the sigma = 0 boundary.

    For each gain whose delay-free loop is stable the first crossing delay is
    computed exactly; the margin is the supremum of that delay over the
    reachable gains. Only gains of one sign are reachable when c < 0.
    """
    if sys.c2 <= 0:
        raise PreconditionError("c2 must be positive for a delay-free stable loop")
    # gains on the delay-free boundary; log offsets resolve sups reached near it
    K0 = -sys.c / (sys.eps * sys.kr_sign)
    Ks = np.sqrt(sys.c2) / sys.eps
    if K_max is None:
        K_max = 20 * (abs(K0) + Ks)
    off = np.geomspace(1e-7 * Ks, K_max, samples)
    grid = np.sort(np.concatenate([K0 + off, K0 - off]))
    grid = np.array([k for k in grid if k != 0 and delay_free_stable(sys, k)])
    if grid.size == 0:
        raise PreconditionError("no gain renders the delay-free loop stable")
    taus = np.array([first_crossing_delay(sys, k) for k in grid])
    if np.any(np.isinf(taus)):
        k = grid[np.isinf(taus)][0]
        return DelayMargin(np.inf, float(k), int(np.sign(k)))
    i = int(np.argmax(taus))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda k: -first_crossing_delay(sys, k), bounds=(min(a, b), max(a, b)), method="bounded",
                                   options=dict(xatol=1e-9 * max(1.0, abs(grid[i]))))
    k_best, t_best = (res.x, -res.fun) if -res.fun >= taus[i] else (grid[i], taus[i])
    return DelayMargin(float(t_best), float(k_best), int(np.sign(k_best)))


@dataclass(frozen=True)
class DelayBand:
    low: float
    high: float
    kind: str


def delay_independent_band(c, eps):
    """Gains |K| < |c|/eps: delay-independent stable for c > 0, unstable for c < 0."""
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    if c == 0:
        return DelayBand(0.0, 0.0, "none")
    h = abs(c) / eps
    return DelayBand(-h, h, "stable" if c > 0 else "unstable")


@dataclass(frozen=True)
class DelayLTI:
    """x' = A0 x + sum A_i x(t - tau_i); zero delays are folded into A0, equal delays merged."""

    A0: np.ndarray
    delayed: list = field(default_factory=list)

    def __post_init__(self):
        A0 = np.atleast_2d(np.array(self.A0, dtype=float))
        n = A0.shape[0]
        if A0.shape != (n, n):
            raise InputError("A0 must be square")
        merged = {}
        for Ai, ti in self.delayed:
            Ai = np.atleast_2d(np.array(Ai, dtype=float))
            if Ai.shape != (n, n):
                raise InputError("delayed matrices must match A0")
            if ti < 0:
                raise PreconditionError(f"delays must be non-negative, got {ti}")
            if ti == 0:
                A0 = A0 + Ai
            elif not np.any(Ai):
                continue
            else:
                key = float(ti)
                merged[key] = merged.get(key, np.zeros((n, n))) + Ai
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "delayed", [(merged[t], t) for t in sorted(merged)])

    @property
    def n(self):
        return self.A0.shape[0]

    @property
    def tau_max(self):
        return max((t for _, t in self.delayed), default=0.0)

    def char_matrix(self, s):
        M = s * np.eye(self.n) - self.A0
        for Ai, t in self.delayed:
            M = M - Ai * np.exp(-s * t)
        return M

    def delay_free(self):
        return self.A0 + sum((Ai for Ai, _ in self.delayed), np.zeros_like(self.A0))


def _cheb(N):
    """Chebyshev-Gauss-Lobatto nodes on [-1, 1] (ascending) and their differentiation matrix."""
    n = N - 1
    j = np.arange(N)
    x = np.cos(np.pi * j / n)
    c = np.ones(N)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** j
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(N))
    D = D - np.diag(D.sum(axis=1))
    return x[::-1].copy(), D[::-1, ::-1].copy()


def _bary_weights(N):
    w = (-1.0) ** np.arange(N)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _interp_row(nodes, w, t):
    d = t - nodes
    hit = np.flatnonzero(np.abs(d) < 1e-14 * max(1.0, np.abs(nodes).max()))
    if hit.size:
        row = np.zeros_like(nodes)
        row[hit[0]] = 1.0
        return row
    q = w / d
    return q / q.sum()


def cheb_discretize(sys, N_C, tau_max=None):
    """Collocation matrix of the solution operator on N_C Chebyshev nodes over [-tau_max, 0].

    The first N_C - 1 block rows differentiate the interpolant; the last one
    (theta = 0) imposes x'(0) = A0 x(0) + sum A_i x(-tau_i).
    """
    if N_C < 3:
        raise PreconditionError(f"N_C must be at least 3, got {N_C}")
    tm = sys.tau_max if tau_max is None else float(tau_max)
    if sys.tau_max > tm:
        raise PreconditionError(f"delay {sys.tau_max} exceeds the discretization horizon {tm}")
    if tm <= 0:
        raise PreconditionError("maximum delay must be positive")
    n = sys.n
    x, D = _cheb(N_C)
    theta = 0.5 * tm * (x - 1.0)
    wts = _bary_weights(N_C)[::-1]
    M = np.zeros((n * N_C, n * N_C))
    M[: n * (N_C - 1)] = np.kron((2.0 / tm) * D[:-1], np.eye(n))
    last = np.zeros((n, n * N_C))
    last[:, -n:] += sys.A0
    for Ai, ti in sys.delayed:
        last += np.kron(_interp_row(theta, wts, -ti)[None, :], Ai)
    M[-n:] = last
    return M


def spurious_radius(N_C, tau_max):
    return REJECT_FACTOR * 2.0 * N_C**2 / tau_max


def cheb_eigenvalues(sys, N_C=20, reject=True):
    """Approximate characteristic roots sorted by decreasing real part."""
    if not sys.delayed:
        lam = np.linalg.eigvals(sys.A0)
    else:
        try:
            lam = np.linalg.eigvals(cheb_discretize(sys, N_C))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"dense eigenvalue solver failed: {exc}") from exc
        if reject:
            lam = lam[np.abs(lam) <= spurious_radius(N_C, sys.tau_max)]
    return lam[np.lexsort((lam.imag, -lam.real))]


@dataclass(frozen=True)
class LinearDDAE:
    """Delay-free (f_x, f_y, g_x, g_y) and delayed (f_xd, f_yd, g_xd) Jacobians."""

    fx: np.ndarray
    fy: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    fxd: np.ndarray
    fyd: np.ndarray
    gxd: np.ndarray


def ddae_delay_matrices(ddae, tau):
    """Retarded system with delays {tau, 2 tau} from the index-1 delayed linearization.

    A0 = f_x - f_y g_y^-1 g_x
    A1 = f_xd - f_y g_y^-1 g_xd - f_yd g_y^-1 g_x
    A2 = -f_yd g_y^-1 g_xd
    """
    fx, fy, gx, gy, fxd, fyd, gxd = (np.atleast_2d(np.asarray(a, float)) for a in
                                     (ddae.fx, ddae.fy, ddae.gx, ddae.gy, ddae.fxd, ddae.fyd, ddae.gxd))
    n = fx.shape[0]
    m = gy.shape[0] if gy.size else 0
    if m == 0:
        return DelayLTI(fx, [(fxd.reshape(n, n), tau)])
    rc = 1.0 / np.linalg.cond(gy, 1) if np.all(np.isfinite(gy)) else 0.0
    if not rc > 1e-12:
        raise SingularJacobian(f"delay-free g_y is singular: reciprocal condition estimate {rc:.3e}", rcond=rc)
    Gx = np.linalg.solve(gy, gx)
    Gxd = np.linalg.solve(gy, gxd)
    A0 = fx - fy @ Gx
    A1 = fxd - fy @ Gxd - fyd @ Gx
    A2 = -fyd @ Gxd
    return DelayLTI(A0, [(A1, tau), (A2, 2 * tau)])


def spectral_metric(lam, kind):
    lam = np.asarray(lam)
    if lam.size == 0:
        return np.nan
    if kind == "sigma":
        return float(np.max(lam.real))
    if kind == "zeta":
        mag = np.abs(lam)
        nz = mag > 0
        if not np.all(nz):
            return 0.0
        return float(np.min(-lam.real / mag))
    raise InputError(f"unknown map kind {kind!r}")


@dataclass(frozen=True)
class StabilityMap:
    tau_axis: np.ndarray
    gain_axis: np.ndarray
    metric: np.ndarray
    kind: str
    missing: tuple = ()

    def __post_init__(self):
        if self.metric.shape != (len(self.tau_axis), len(self.gain_axis)):
            raise InputError("metric shape must be (len(tau_axis), len(gain_axis))")

    def stable_mask(self, sigma=0.0, zeta_min=0.0):
        with np.errstate(invalid="ignore"):
            if self.kind == "sigma":
                return self.metric < -sigma
            return self.metric > zeta_min

    def cell(self, tau, gain):
        i = int(np.argmin(np.abs(self.tau_axis - tau)))
        j = int(np.argmin(np.abs(self.gain_axis - gain)))
        return i, j

    def connected_to_zero_delay(self, tau, gain, **kw):
        """Whether the stable region holding (tau, gain) touches the tau = 0 column."""
        mask = self.stable_mask(**kw)
        i, j = self.cell(tau, gain)
        if not mask[i, j]:
            return False
        lab, _ = ndimage.label(mask)
        return bool(np.any(lab[0] == lab[i, j]))


def stability_map(builder, tau_axis, gain_axis, N_C=12, kind="sigma"):
    """Evaluate the metric on every (tau, gain) cell; failures are stored as NaN."""
    tau_axis = np.asarray(tau_axis, float)
    gain_axis = np.asarray(gain_axis, float)
    if tau_axis.size == 0 or gain_axis.size == 0:
        raise PreconditionError("map axes must be non-empty")
    metric = np.full((tau_axis.size, gain_axis.size), np.nan)
    missing = []
    for i, t in enumerate(tau_axis):
        for j, k in enumerate(gain_axis):
            try:
                metric[i, j] = spectral_metric(cheb_eigenvalues(builder(t, k), N_C), kind)
            except (NumericalError, np.linalg.LinAlgError):
                missing.append((i, j))
    return StabilityMap(tau_axis, gain_axis, metric, kind, tuple(missing))


@dataclass(frozen=True)
class PathScan:
    crossed: bool
    s: np.ndarray
    abscissa: np.ndarray
    first_change: float


def path_crosses_boundary(builder, start, end, n=200, N_C=16):
    """Scan the spectral abscissa along the straight segment start -> end in (tau, gain).

    ``crossed`` is true when the spectral abscissa changes sign anywhere on the path.
    """
    s = np.linspace(0.0, 1.0, n)
    t = start[0] + s * (end[0] - start[0])
    k = start[1] + s * (end[1] - start[1])
    a = np.array([spectral_metric(cheb_eigenvalues(builder(ti, ki), N_C), "sigma") for ti, ki in zip(t, k)])
    sg = np.sign(a)
    ch = np.flatnonzero(sg[1:] != sg[:-1])
    return PathScan(bool(ch.size), s, a, float(s[ch[0] + 1]) if ch.size else np.nan)
