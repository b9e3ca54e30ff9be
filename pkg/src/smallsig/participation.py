"""Participation factors for state matrices and singular pencils.

Semisimple modes use the eigenvector products (w_i E)_k v_{k,i}. Defective
modes are handled through the deflating subspaces of the eigenvalue: with V
and W spanning the right and left generalized eigenspaces, G = W E V and
A V = E V T, the response to x(0) = e_k contains

    e^{lambda t} sum_p t^p [V N^p G^-1 W E]_{kk} / p!,    N = T - lambda I,

so participation becomes a polynomial in t. The constant term is the spectral
projector diagonal and does not depend on how the chains are scaled.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np
import scipy.linalg as sla

from .errors import InconsistentInitialCondition, InputError, NumericalError, PreconditionError, RepeatedEigenvalue
from .pencil import MatrixPencil, cluster_eigenvalues, eigen


@dataclass(frozen=True)
class ParticipationMatrix:
    values: np.ndarray
    row_labels: tuple
    col_labels: tuple
    eigenvalues: np.ndarray = None
    time_poly: np.ndarray = None  # rows x cols x degree, coefficient of t^p

    @property
    def magnitudes(self):
        return np.abs(self.values)

    def column_max_normalized(self):
        mags = np.abs(self.values)
        peak = mags.max(axis=0)
        peak[peak == 0] = 1.0
        return mags / peak

    def column(self, j):
        return self.values[:, j]


def _labels(prefix, n, given=None):
    if given is not None:
        if len(given) != n:
            raise InputError(f"expected {n} labels, got {len(given)}")
        return tuple(given)
    return tuple(f"{prefix}{i}" for i in range(n))


def _eig_labels(lams):
    return tuple(f"lambda{i}" for i in range(len(lams)))


def classical_pf(A_s, labels=None):
    """pi_{k,i} = w_{i,k} v_{k,i} with W = V^-1."""
    A_s = np.atleast_2d(np.asarray(A_s, dtype=float))
    n = A_s.shape[0]
    sol = eigen(MatrixPencil(np.eye(n), A_s))
    groups = cluster_eigenvalues(sol.finite_eigs)
    if any(len(g) > 1 for g in groups):
        raise RepeatedEigenvalue("state matrix has repeated eigenvalues; use generalized or Jordan participation")
    V, W = sol.right_vecs, sol.left_vecs
    vals = W.T * V
    return ParticipationMatrix(vals, _labels("x", n, labels), _eig_labels(sol.finite_eigs), sol.finite_eigs)


def residue(A_s, b, c, lam, tol=1e-6):
    """Residue c v_i w_i b of the mode closest to ``lam`` (w_i v_i = 1)."""
    A_s = np.atleast_2d(np.asarray(A_s, dtype=float))
    n = A_s.shape[0]
    sol = eigen(MatrixPencil(np.eye(n), A_s))
    d = np.abs(sol.finite_eigs - lam)
    i = int(np.argmin(d))
    if d[i] > tol * max(1.0, abs(lam)):
        raise PreconditionError(f"{lam} is not an eigenvalue of the state matrix")
    if np.sum(d <= tol * max(1.0, abs(lam))) > 1:
        raise RepeatedEigenvalue(f"{lam} is not a simple eigenvalue")
    v = sol.right_vecs[:, i]
    w = sol.left_vecs[i]
    return complex(np.asarray(c, dtype=complex).ravel() @ v * (w @ np.asarray(b, dtype=complex).ravel()))


def generalized_pf(pencil, sol=None, modes=None, labels=None):
    """PF_{k,i} = (w_i E)_k v_{k,i} for semisimple finite modes.

    ``modes`` picks a subset of eigenvalue indices (the critical columns).
    """
    if sol is None:
        sol = eigen(pencil)
    idx = np.arange(sol.nu) if modes is None else np.asarray(modes, dtype=int)
    groups = cluster_eigenvalues(sol.finite_eigs)
    defective = set()
    for g in groups:
        if len(g) > 1:
            lam = np.mean(sol.finite_eigs[g])
            geo = _geometric_multiplicity(pencil, lam)
            if geo < len(g):
                defective.update(g)
    bad = [int(i) for i in idx if int(i) in defective]
    if bad:
        raise PreconditionError(f"modes {bad} are defective; supply Jordan chains via jordan_pf")
    V = sol.right_vecs[:, idx]
    WE = sol.left_vecs[idx] @ pencil.E
    vals = WE.T * V
    eigs = sol.finite_eigs[idx]
    return ParticipationMatrix(vals, _labels("x", pencil.r, labels), tuple(f"lambda{i}" for i in idx), eigs)


def _geometric_multiplicity(pencil, lam, tol=1e-8):
    s = np.linalg.svd(lam * pencil.E - pencil.A, compute_uv=False)
    return int(np.sum(s <= tol * s[0]))


def _shift(pencil, lam):
    """A real shift away from the spectrum for the resolvent trick."""
    scale = max(1.0, abs(lam))
    for sigma in (lam.real + 0.37 * scale + 0.11, lam.real - 0.53 * scale - 0.29, lam.real + 1.7 * scale + 1.3):
        M = pencil.A - sigma * pencil.E
        if np.linalg.cond(M) < 1e10:
            return sigma, M
    raise NumericalError("could not find a regular shift for the resolvent")


def generalized_eigenspaces(pencil, lam, alpha):
    """Bases of the right and left generalized eigenspaces of ``lam``.

    Uses K = (A - sigma E)^-1 E, whose eigenvalue 1/(lam - sigma) carries the
    same generalized eigenspace; the alpha smallest singular directions of
    (K - kappa I)^alpha give the basis without any rank tolerance.
    """
    sigma, M = _shift(pencil, lam)
    kappa = 1.0 / (lam - sigma)
    r = pencil.r
    K = np.linalg.solve(M, pencil.E).astype(complex)
    P = np.linalg.matrix_power(K - kappa * np.eye(r), alpha)
    _, _, vh = np.linalg.svd(P)
    V = vh[-alpha:].conj().T
    Kl = (pencil.E @ np.linalg.inv(M)).astype(complex)
    Pl = np.linalg.matrix_power(Kl - kappa * np.eye(r), alpha)
    u, _, _ = np.linalg.svd(Pl)
    W = u[:, -alpha:].conj().T
    # W P_l = 0 means the rows of W are left null vectors of P_l
    return V, W


@dataclass(frozen=True)
class JordanChain:
    """Right chain v[0..beta-1] with (A - lam E) v[j] = E v[j-1] and the left analog."""

    eigenvalue: complex
    right: np.ndarray  # r x beta
    left: np.ndarray  # beta x r


def verify_chain(pencil, chain, tol=1e-8):
    E, A = pencil.E, pencil.A
    lam = chain.eigenvalue
    Ml = A - lam * E
    scale = np.linalg.norm(E, 2) + np.linalg.norm(A, 2)
    worst = 0.0
    R, L = chain.right, chain.left
    for j in range(R.shape[1]):
        prev = E @ R[:, j - 1] if j else 0
        worst = max(worst, np.linalg.norm(Ml @ R[:, j] - prev) / (scale * max(np.linalg.norm(R[:, j]), 1e-300)))
    for j in range(L.shape[0]):
        prev = L[j - 1] @ E if j else 0
        worst = max(worst, np.linalg.norm(L[j] @ Ml - prev) / (scale * max(np.linalg.norm(L[j]), 1e-300)))
    if worst > tol:
        raise PreconditionError(f"Jordan chain residual {worst:.3e} exceeds {tol:g}")
    return worst


def jordan_chains(pencil, lam, length, tol=1e-8):
    """Single Jordan chain of ``length`` vectors by null-space recursion.

    Intended for small pencils (r <= 20) with geometric multiplicity one.
    """
    if pencil.r > 20:
        raise PreconditionError("Jordan chains are only computed for dimension <= 20")
    E, A = pencil.E.astype(complex), pencil.A.astype(complex)
    Ml = A - lam * E
    u, s, vh = np.linalg.svd(Ml)
    if np.sum(s <= tol * s[0]) != 1:
        raise PreconditionError("chain recursion needs geometric multiplicity one")
    right = [vh[-1].conj()]
    left = [u[:, -1].conj()]
    for _ in range(1, length):
        v, *_ = np.linalg.lstsq(Ml, E @ right[-1], rcond=None)
        v = v - right[0] * (right[0].conj() @ v)  # drop the free null component
        right.append(v)
        w, *_ = np.linalg.lstsq(Ml.T, (left[-1] @ E), rcond=None)
        w = w - left[0] * (left[0].conj() @ w)
        left.append(w)
    chain = JordanChain(complex(lam), np.array(right).T, np.array(left))
    verify_chain(pencil, chain, tol=max(tol, 1e-6))
    return chain


def _block_response(pencil, V, W, lam):
    E, A = pencil.E, pencil.A
    EV = E @ V
    T = np.linalg.lstsq(EV, A @ V, rcond=None)[0]
    G = W @ EV
    if np.linalg.cond(G) > 1e12:
        raise NumericalError("left and right subspaces are not in duality (W E V singular)")
    Ginv_WE = np.linalg.solve(G, W @ E)
    return T, Ginv_WE


def jordan_pf(pencil, eigenvalue=None, multiplicity=None, chains=None, labels=None):
    """Time-polynomial participation of a (possibly defective) eigenvalue.

    Either give ``chains`` (a JordanChain or list of them, verified here) or an
    ``eigenvalue`` whose generalized eigenspace is computed. ``values`` holds
    the constant term and ``time_poly[k, 0, p]`` the coefficient of t^p.
    """
    if chains is not None:
        chains = [chains] if isinstance(chains, JordanChain) else list(chains)
        for ch in chains:
            verify_chain(pencil, ch)
        lam = chains[0].eigenvalue
        V = np.hstack([np.asarray(ch.right, complex) for ch in chains])
        W = np.vstack([np.asarray(ch.left, complex) for ch in chains])
    else:
        if eigenvalue is None:
            raise InputError("either an eigenvalue or Jordan chains are required")
        sol = eigen(pencil, want_left=False)
        groups = cluster_eigenvalues(sol.finite_eigs)
        d = [abs(np.mean(sol.finite_eigs[g]) - eigenvalue) for g in groups]
        g = groups[int(np.argmin(d))]
        lam = complex(np.mean(sol.finite_eigs[g]))
        if min(d) > 1e-6 * max(1.0, abs(eigenvalue)):
            raise PreconditionError(f"{eigenvalue} is not a finite eigenvalue of the pencil")
        alpha = multiplicity or len(g)
        V, W = generalized_eigenspaces(pencil, lam, alpha)
    alpha = V.shape[1]
    T, Ginv_WE = _block_response(pencil, V, W, lam)
    N = T - lam * np.eye(alpha)
    r = pencil.r
    poly = np.zeros((r, 1, alpha), complex)
    Np = np.eye(alpha)
    for p in range(alpha):
        poly[:, 0, p] = np.einsum("ij,ji->i", V @ Np, Ginv_WE) / factorial(p)
        Np = Np @ N
    return ParticipationMatrix(poly[:, :, 0].copy(), _labels("x", r, labels), (f"lambda={lam:.6g}",), np.array([lam]), poly)


def output_pf(pf, C, labels=None):
    """Pi_hat = C Pi_x; C = -g_y^-1 g_x gives algebraic PFs, C = A_s rate PFs."""
    C = np.atleast_2d(np.asarray(C))
    if C.shape[1] != pf.values.shape[0]:
        raise InputError(f"C has {C.shape[1]} columns, participation matrix has {pf.values.shape[0]} rows")
    poly = None if pf.time_poly is None else np.einsum("qk,kjp->qjp", C, pf.time_poly)
    return ParticipationMatrix(C @ pf.values, _labels("w", C.shape[0], labels), pf.col_labels, pf.eigenvalues, poly)


def parameter_output_matrix(n, j, row, label=None):
    """Single-row output matrix for a parameter that enters only the j-th equation."""
    row = np.asarray(row, dtype=float).ravel()
    if row.size != n:
        raise InputError(f"parameter row must have {n} entries")
    C = np.zeros((1, n))
    C[0] = row
    return C


def solve_linear_singular(pencil, x0, t_points, sol=None, project=False, rtol=1e-8):
    """x(t) of E x' = A x from x(0) = x0, summing over deflating subspaces.

    Semisimple modes contribute v_i (w_i E x0) e^{lambda_i t}; defective
    clusters contribute V e^{T t} G^-1 W E x0. An initial condition outside the
    span of the finite right eigenvectors is inconsistent; with
    ``project=True`` the consistent projection is integrated instead.
    """
    x0 = np.asarray(x0, dtype=complex).ravel()
    t_points = np.atleast_1d(np.asarray(t_points, dtype=float))
    if sol is None:
        sol = eigen(pencil)
    blocks = []
    for g in cluster_eigenvalues(sol.finite_eigs):
        if len(g) == 1:
            i = g[0]
            v, w = sol.right_vecs[:, i], sol.left_vecs[i]
            wev = w @ pencil.E @ v
            blocks.append((sol.finite_eigs[i], v[:, None], np.array([[0.0]]), (w @ pencil.E)[None, :] / wev))
        else:
            lam = complex(np.mean(sol.finite_eigs[g]))
            V, W = generalized_eigenspaces(pencil, lam, len(g))
            T, Ginv_WE = _block_response(pencil, V, W, lam)
            blocks.append((lam, V, T - lam * np.eye(len(g)), Ginv_WE))
    x0c = sum(V @ (P @ x0) for _, V, _, P in blocks) if blocks else np.zeros_like(x0)
    gap = np.linalg.norm(x0c - x0)
    consistent = gap <= rtol * max(np.linalg.norm(x0), 1.0)
    if not consistent and not project:
        raise InconsistentInitialCondition(
            f"initial condition is not consistent (distance {gap:.3e} from the finite eigenspace)", projected=x0c
        )
    out = np.zeros((len(t_points), pencil.r), complex)
    for lam, V, N, P in blocks:
        c = P @ x0
        for k, t in enumerate(t_points):
            out[k] += np.exp(lam * t) * (V @ (sla.expm(N * t) @ c))
    return out
