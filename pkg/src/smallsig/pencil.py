"""Matrix pencils sE - A: regularity, eigenstructure, Moebius transforms and
per-mode stability metrics."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InputError, NonRegularPencil, NumericalError, PreconditionError

TOL_INF = 1e-10
NORM_FLOOR = 1e-12
REG_FLOOR = 1e-12
CLUSTER_RTOL = 1e-6


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MatrixPencil:
    """The pair (E, A) standing for s*E - A."""

    E: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.E))
        A = np.atleast_2d(np.asarray(self.A))
        if E.ndim != 2 or E.shape[0] != E.shape[1]:
            raise InputError(f"E must be square, got shape {E.shape}")
        if A.shape != E.shape:
            raise InputError(f"E and A differ in shape: {E.shape} vs {A.shape}")
        if E.shape[0] < 1:
            raise InputError("pencil dimension must be at least 1")
        dt = np.result_type(E.dtype, A.dtype, np.float64)
        object.__setattr__(self, "E", _frozen(E.astype(dt)))
        object.__setattr__(self, "A", _frozen(A.astype(dt)))

    @property
    def r(self):
        return self.E.shape[0]

    def at(self, s):
        return s * self.E - self.A


@dataclass(frozen=True)
class EigenSolution:
    """Finite eigenpairs of a regular pencil plus the infinite multiplicity.

    ``right_vecs`` holds v_i as columns, ``left_vecs`` holds w_i as rows, so
    that w_i (lambda_i E - A) = 0.
    """

    finite_eigs: np.ndarray
    right_vecs: np.ndarray
    left_vecs: np.ndarray
    inf_multiplicity: int
    normalized: np.ndarray = field(default=None)

    @property
    def nu(self):
        return len(self.finite_eigs)

    @property
    def r(self):
        return self.nu + self.inf_multiplicity


@dataclass(frozen=True)
class MoebiusCoeffs:
    """Coefficients of s = (a z + b) / (c z + d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if abs(self.a * self.d - self.b * self.c) == 0:
            raise PreconditionError("degenerate Moebius coefficients: ad - bc = 0")

    @classmethod
    def prime(cls):
        return cls(-1, 0, 0, -1)

    @classmethod
    def invert(cls):
        return cls(0, 1, 1, 0)

    @classmethod
    def shift_invert(cls, sigma):
        return cls(sigma, 1, 1, 0)

    @classmethod
    def cayley(cls, sigma):
        return cls(sigma, -sigma, 1, 1)

    @classmethod
    def generalized_cayley(cls, sigma, nu):
        return cls(sigma, -nu, 1, 1)

    def to_prime(self, z):
        """Map eigenvalues z of the transformed pencil back to s."""
        z = np.asarray(z, dtype=complex)
        den = self.c * z + self.d
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (self.a * z + self.b) / den
        return np.where(den == 0, np.inf, s)

    def from_prime(self, s):
        """Inverse map z = (d s - b) / (a - c s)."""
        s = np.asarray(s, dtype=complex)
        den = self.a - self.c * s
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (self.d * s - self.b) / den
        return np.where(den == 0, np.inf, z)


def is_regular(pencil, probes=None, seed=0):
    """Probe det(sE - A) at random complex shifts.

    The determinant counts as nonzero when it exceeds 1e-12 times the product
    of the row norms of sE - A; logarithms avoid overflow.
    """
    r = pencil.r
    if probes is None:
        probes = r + 1
    if probes < r + 1:
        raise PreconditionError(f"need at least r+1 = {r + 1} probes, got {probes}")
    rng = np.random.default_rng(seed)
    scale = max(1.0, np.linalg.norm(pencil.A, 1) / max(np.linalg.norm(pencil.E, 1), 1e-300))
    shifts = scale * (rng.standard_normal(probes) + 1j * rng.standard_normal(probes))
    for s in shifts:
        P = pencil.at(s)
        rn = np.linalg.norm(P, axis=1)
        if np.any(rn == 0):
            continue
        sign, logdet = np.linalg.slogdet(P)
        if sign == 0:
            continue
        if logdet > np.log(REG_FLOOR) + np.sum(np.log(rn)):
            return True
    return False


def _normalize(E, v, w):
    """Scale so that w E v = 1, falling back to unit norms when w E v ~ 0."""
    v = v / np.linalg.norm(v)
    w = w / np.linalg.norm(w)
    p = w @ E @ v
    if abs(p) > NORM_FLOOR:
        return v, w / p, True
    return v, w, False


def eigen(pencil, want_left=True, tol_inf=TOL_INF, check_regular=True, seed=0):
    """Finite eigenvalues and eigenvectors of s E - A via the QZ algorithm."""
    if check_regular and not is_regular(pencil, seed=seed):
        raise NonRegularPencil("pencil is not regular: det(sE - A) vanishes identically")
    E, A = pencil.E, pencil.A
    try:
        out = sla.eig(A, E, left=want_left, right=True, homogeneous_eigvals=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"QZ eigensolver failed: {exc}") from exc
    if want_left:
        ab, vl, vr = out
    else:
        ab, vr = out
        vl = None
    alpha, beta = ab
    finite = np.abs(beta) > tol_inf * (np.abs(alpha) + np.abs(beta))
    idx = np.flatnonzero(finite)
    lam = alpha[idx] / beta[idx]
    order = np.lexsort((lam.imag, -lam.real))
    idx, lam = idx[order], lam[order]
    V = np.array(vr[:, idx], dtype=complex)
    W = np.array(vl[:, idx].conj().T, dtype=complex) if want_left else np.zeros((0, pencil.r), complex)
    flags = np.zeros(len(idx), dtype=bool)
    for k in range(len(idx)):
        if want_left:
            V[:, k], W[k], flags[k] = _normalize(E, V[:, k], W[k])
        else:
            V[:, k] /= np.linalg.norm(V[:, k])
    return EigenSolution(
        finite_eigs=_frozen(lam),
        right_vecs=_frozen(V),
        left_vecs=_frozen(W),
        inf_multiplicity=int(pencil.r - len(idx)),
        normalized=_frozen(flags),
    )


def residuals(pencil, sol):
    """Relative residuals of the right and left eigenpairs."""
    E, A = pencil.E, pencil.A
    scale = np.linalg.norm(E, 2) + np.linalg.norm(A, 2)
    rr, rl = [], []
    for k, lam in enumerate(sol.finite_eigs):
        v = sol.right_vecs[:, k]
        rr.append(np.linalg.norm((lam * E - A) @ v) / (scale * np.linalg.norm(v)))
        if sol.left_vecs.shape[0]:
            w = sol.left_vecs[k]
            rl.append(np.linalg.norm(w @ (lam * E - A)) / (scale * np.linalg.norm(w)))
    return np.array(rr), np.array(rl)


def cluster_eigenvalues(eigs, rtol=CLUSTER_RTOL):
    """Group indices of eigenvalues closer than rtol*max(1, |lambda|)."""
    eigs = np.asarray(eigs)
    groups, seen = [], np.zeros(len(eigs), bool)
    for i in range(len(eigs)):
        if seen[i]:
            continue
        grp = [i]
        seen[i] = True
        # transitive closure so near-equal chains end up together
        k = 0
        while k < len(grp):
            li = eigs[grp[k]]
            for j in range(len(eigs)):
                if not seen[j] and abs(eigs[j] - li) <= rtol * max(1.0, abs(li)):
                    seen[j] = True
                    grp.append(j)
            k += 1
        groups.append(sorted(grp))
    return groups


def _scalar(x):
    x = complex(x)
    return x.real if x.imag == 0 else x


def moebius_transform(pencil, coeffs):
    """Pencil z (aE - cA) - (dA - bE) whose eigenvalue z maps to s = (az+b)/(cz+d)."""
    a, b, c, d = (_scalar(x) for x in (coeffs.a, coeffs.b, coeffs.c, coeffs.d))
    E, A = pencil.E, pencil.A
    return MatrixPencil(a * E - c * A, d * A - b * E)


def prime_spectrum(sol, coeffs, tol_inf=TOL_INF):
    """All r eigenvalues of the original pencil from a transformed EigenSolution.

    Finite z map through s = (az+b)/(cz+d); s is infinite when |cz+d| is
    negligible against |az+b|, the same homogeneous test QZ output gets.
    Infinite z give s = a/c.
    """
    a, b, c, d = coeffs.a, coeffs.b, coeffs.c, coeffs.d
    z = np.asarray(sol.finite_eigs, dtype=complex)
    num, den = a * z + b, c * z + d
    inf = np.abs(den) <= tol_inf * (np.abs(num) + np.abs(den))
    s = np.where(inf, np.inf, num / np.where(inf, 1.0, den))
    s_inf = complex(a / c) if c != 0 else np.inf
    return np.concatenate([s, np.full(sol.inf_multiplicity, s_inf, dtype=complex)])


def chordal_distance(x, y):
    """Distance on the Riemann sphere; either argument may be infinite."""
    x, y = complex(x), complex(y)
    xi, yi = not np.isfinite(abs(x)), not np.isfinite(abs(y))
    if xi and yi:
        return 0.0
    if xi:
        return 1.0 / np.sqrt(1 + abs(y) ** 2)
    if yi:
        return 1.0 / np.sqrt(1 + abs(x) ** 2)
    return abs(x - y) / (np.sqrt(1 + abs(x) ** 2) * np.sqrt(1 + abs(y) ** 2))


def damping_and_frequency(lam):
    """Damping ratio and natural frequency in Hz of one eigenvalue.

    A zero eigenvalue has no damping ratio; it is reported as NaN and callers
    should test for it with ``np.isnan``.
    """
    lam = complex(lam)
    mag = abs(lam)
    if not np.isfinite(mag):
        raise PreconditionError("eigenvalue must be finite")
    fn = mag / (2 * np.pi)
    if mag == 0:
        return float("nan"), 0.0
    return -lam.real / mag, fn


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    marginal: bool
    well_damped: bool
    spectral_abscissa: float
    min_damping: float
    critical: complex
    damping_floor: float
    zero_tol: float

    def summary(self):
        if self.stable:
            tag = "stable"
        elif self.marginal:
            tag = "marginally stable"
        else:
            tag = "unstable"
        damp = "well-damped" if self.well_damped else "poorly damped"
        return f"{tag}, {damp} (max Re = {self.spectral_abscissa:.6g}, min zeta = {self.min_damping:.4g})"


def stability_verdict(sol, damping_floor=0.05, zero_tol=0.0):
    """Stable iff every finite eigenvalue has Re < -zero_tol.

    Eigenvalues with |Re| <= zero_tol make the verdict marginal rather than
    unstable. Oscillatory modes must also exceed ``damping_floor`` to count as
    well damped.
    """
    lam = np.asarray(sol.finite_eigs if isinstance(sol, EigenSolution) else sol, dtype=complex)
    if lam.size == 0:
        return StabilityReport(True, False, True, -np.inf, np.inf, complex(np.nan), damping_floor, zero_tol)
    re = lam.real
    k = int(np.argmax(re))
    absc = float(re[k])
    stable = bool(np.all(re < -zero_tol))
    marginal = (not stable) and bool(np.all(re <= zero_tol))
    osc = lam[np.abs(lam.imag) > 0]
    if osc.size:
        zetas = -osc.real / np.abs(osc)
        min_z = float(zetas.min())
    else:
        min_z = float("inf")
    well = stable and min_z > damping_floor
    return StabilityReport(stable, marginal, well, absc, min_z, complex(lam[k]), damping_floor, zero_tol)
