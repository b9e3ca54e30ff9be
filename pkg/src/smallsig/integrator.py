"""Implicit trapezoidal integration of DAEs, the one-step-delay variant,
GCO-based choice of delayed Jacobian elements and the step-size bound from
eigenvalue drift."""

from dataclasses import dataclass, field
import warnings

import numpy as np

from .dae import LinearDAE, reduce_state_matrix
from .delay import LinearDDAE, cheb_eigenvalues, ddae_delay_matrices
from .errors import InputError, NewtonDivergence, PreconditionError, SingularJacobian

BLOCKS = ("fx", "fy", "gx", "gy")
# algebraic variables of algebraic equations stay undelayed to keep the index
ELIGIBLE = ("fx", "fy", "gx")


@dataclass
class NonlinearDAE:
    """x' = f(x, y, p), 0 = g(x, y, p) with analytic Jacobians jac(x, y, p) -> (fx, fy, gx, gy)."""

    f: object
    g: object
    jac: object
    x0: np.ndarray
    y0: np.ndarray
    params: dict
    state_names: tuple = ()
    alg_names: tuple = ()

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, float).copy()
        self.y0 = np.asarray(self.y0, float).copy()
        if not self.state_names:
            self.state_names = tuple(f"x{i}" for i in range(self.n))
        if not self.alg_names:
            self.alg_names = tuple(f"y{i}" for i in range(self.m))

    @property
    def n(self):
        return self.x0.size

    @property
    def m(self):
        return self.y0.size

    def with_params(self, **patch):
        p = dict(self.params)
        p.update(patch)
        return NonlinearDAE(self.f, self.g, self.jac, self.x0, self.y0, p, self.state_names, self.alg_names)

    def pattern(self, seed=0):
        """Structural nonzeros: union of Jacobian nonzeros at x0 and at a perturbed point."""
        rng = np.random.default_rng(seed)
        a = self.jac(self.x0, self.y0, self.params)
        b = self.jac(self.x0 + 1e-3 * rng.standard_normal(self.n), self.y0 + 1e-3 * rng.standard_normal(self.m), self.params)
        return {k: (np.asarray(u) != 0) | (np.asarray(v) != 0) for k, u, v in zip(BLOCKS, a, b)}


def linearize(model, x=None, y=None):
    x = model.x0 if x is None else x
    y = model.y0 if y is None else y
    fx, fy, gx, gy = model.jac(x, y, model.params)
    return LinearDAE(fx, fy, gx, gy, model.state_names, model.alg_names)


@dataclass(frozen=True)
class DelaySelection:
    """Jacobian elements whose variable is taken one step back: (block, row, col)."""

    entries: tuple = ()

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            blk, i, j = e
            if blk not in ELIGIBLE:
                raise InputError(f"block {blk!r} cannot be delayed; allowed blocks are {ELIGIBLE}")
            if e in seen:
                raise InputError(f"duplicate selection entry {e}")
            seen.add(e)
        object.__setattr__(self, "entries", tuple(sorted((str(b), int(i), int(j)) for b, i, j in self.entries)))

    def __len__(self):
        return len(self.entries)

    def validate(self, pattern):
        for blk, i, j in self.entries:
            if not pattern[blk][i, j]:
                raise InputError(f"selection entry ({blk}, {i}, {j}) is structurally zero")

    def masks(self, n, m):
        shapes = dict(fx=(n, n), fy=(n, m), gx=(m, n), gy=(m, m))
        out = {k: np.zeros(s, bool) for k, s in shapes.items()}
        for blk, i, j in self.entries:
            out[blk][i, j] = True
        return out

    def row_patterns(self, n, m):
        """For each equation block, group rows by the set of delayed columns."""
        groups = {"f": {}, "g": {}}
        per_row = {"f": {}, "g": {}}
        for blk, i, j in self.entries:
            eq, kind = blk[0], blk[1]
            per_row[eq].setdefault(i, []).append((kind, j))
        for eq, size in (("f", n), ("g", m)):
            for i in range(size):
                key = tuple(sorted(per_row[eq].get(i, ())))
                groups[eq].setdefault(key, []).append(i)
        return groups


EMPTY = DelaySelection(())


@dataclass(frozen=True)
class ItmConfig:
    h: float
    newton_tol: float = 1e-8
    max_iter: int = 20

    def __post_init__(self):
        if not self.h > 0:
            raise PreconditionError(f"step must be positive, got {self.h}")
        if self.max_iter < 1:
            raise PreconditionError("max_iter must be at least 1")


def _mixed(x, y, xd, yd, key):
    xm, ym = x.copy(), y.copy()
    for kind, j in key:
        if kind == "x":
            xm[j] = xd[j]
        else:
            ym[j] = yd[j]
    return xm, ym


class _Evaluator:
    """f~, g~ and their split Jacobians for a fixed selection."""

    def __init__(self, model, sel):
        self.model = model
        self.n, self.m = model.n, model.m
        self.groups = sel.row_patterns(self.n, self.m)
        self.masks = sel.masks(self.n, self.m)
        self.plain = len(sel) == 0

    def fg(self, x, y, xd, yd, p):
        M = self.model
        if self.plain:
            return M.f(x, y, p), M.g(x, y, p)
        f = np.empty(self.n)
        g = np.empty(self.m)
        for key, rows in self.groups["f"].items():
            xm, ym = _mixed(x, y, xd, yd, key)
            f[rows] = M.f(xm, ym, p)[rows]
        for key, rows in self.groups["g"].items():
            xm, ym = _mixed(x, y, xd, yd, key)
            g[rows] = M.g(xm, ym, p)[rows]
        return f, g

    def full_jac(self, x, y, xd, yd, p):
        """Full Jacobians with every row evaluated at its own mixed point."""
        M = self.model
        if self.plain:
            return tuple(np.array(a, float) for a in M.jac(x, y, p))
        fx = np.empty((self.n, self.n))
        fy = np.empty((self.n, self.m))
        gx = np.empty((self.m, self.n))
        gy = np.empty((self.m, self.m))
        for eq, (A, B) in (("f", (fx, fy)), ("g", (gx, gy))):
            for key, rows in self.groups[eq].items():
                xm, ym = _mixed(x, y, xd, yd, key)
                J = M.jac(xm, ym, p)
                a, b = (J[0], J[1]) if eq == "f" else (J[2], J[3])
                A[rows] = np.asarray(a)[rows]
                B[rows] = np.asarray(b)[rows]
        return fx, fy, gx, gy

    def split_jac(self, x, y, xd, yd, p):
        """(delay-free, delayed) blocks; their sum is the full Jacobian exactly."""
        full = self.full_jac(x, y, xd, yd, p)
        free, dly = {}, {}
        for k, J in zip(BLOCKS, full):
            mk = self.masks[k]
            free[k] = np.where(mk, 0.0, J)
            dly[k] = np.where(mk, J, 0.0)
        return free, dly, dict(zip(BLOCKS, full))


def split_jacobians(model, sel, x, y, xd, yd, p=None):
    return _Evaluator(model, sel).split_jac(x, y, xd, yd, model.params if p is None else p)


@dataclass
class Point:
    x: np.ndarray
    y: np.ndarray
    f: np.ndarray
    # values one step back, used by delayed entries
    xd: np.ndarray
    yd: np.ndarray


def _iteration_matrix(free, h, n):
    return np.block([[np.eye(n) - 0.5 * h * free["fx"], -0.5 * h * free["fy"]], [free["gx"], free["gy"]]])


def _itm(ev, prev, cfg, p):
    n = ev.n
    h = cfg.h
    x, y = prev.x.copy(), prev.y.copy()
    xd, yd = prev.x, prev.y
    f, g = ev.fg(x, y, xd, yd, p)
    phi = x - prev.x - 0.5 * h * (f + prev.f)
    for it in range(1, cfg.max_iter + 1):
        res = np.concatenate([phi, g])
        free, _, _ = ev.split_jac(x, y, xd, yd, p)
        J = _iteration_matrix(free, h, n)
        try:
            dz = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"iteration matrix is singular: {exc}", rcond=0.0) from exc
        x = x + dz[:n]
        y = y + dz[n:]
        f, g = ev.fg(x, y, xd, yd, p)
        phi = x - prev.x - 0.5 * h * (f + prev.f)
        if max(np.max(np.abs(phi), initial=0.0), np.max(np.abs(g), initial=0.0)) <= cfg.newton_tol:
            return Point(x, y, f, prev.x, prev.y), it
    raise NewtonDivergence(f"Newton did not converge in {cfg.max_iter} iterations (residual {np.max(np.abs(res)):.3e})")


def initial_point(model, p=None):
    p = model.params if p is None else p
    return Point(model.x0.copy(), model.y0.copy(), model.f(model.x0, model.y0, p), model.x0.copy(), model.y0.copy())


def itm_step(model, prev, cfg):
    """One trapezoidal step with Newton on [I - h/2 f_x, -h/2 f_y; g_x, g_y]. Returns (point, iterations)."""
    return _itm(_Evaluator(model, EMPTY), prev, cfg, model.params)


def itm_step_delayed(model, selection, prev, cfg):
    """Trapezoidal step with the selected elements frozen at the previous step."""
    return _itm(_Evaluator(model, selection), prev, cfg, model.params)


def iteration_nnz(pattern, selection=EMPTY):
    """Structural nonzeros of the Newton matrix with and without the delayed entries."""
    n = pattern["fx"].shape[0]
    m = pattern["gy"].shape[0]
    mk = selection.masks(n, m)
    eye = np.eye(n, dtype=bool)
    full = int(np.count_nonzero(pattern["fx"] | eye) + sum(np.count_nonzero(pattern[k]) for k in ("fy", "gx", "gy")))
    red = {k: pattern[k] & ~mk[k] for k in BLOCKS}
    dly = int(np.count_nonzero(red["fx"] | eye) + sum(np.count_nonzero(red[k]) for k in ("fy", "gx", "gy")))
    return full, dly


def resolve_algebraic(model, x, y, p, tol=1e-10, max_iter=30):
    """Newton on g(x, y) = 0 for y with x fixed."""
    y = y.copy()
    for _ in range(max_iter):
        g = model.g(x, y, p)
        if np.max(np.abs(g), initial=0.0) <= tol:
            return y
        gy = np.asarray(model.jac(x, y, p)[3])
        y = y - np.linalg.solve(gy, g)
    raise NewtonDivergence("algebraic re-solve after event did not converge")


@dataclass(frozen=True)
class Event:
    """Patch applied once the integration clock reaches ``time``."""

    time: float
    params: dict = field(default_factory=dict)
    states: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    algebraics: np.ndarray
    iterations_per_step: np.ndarray
    state_names: tuple = ()
    alg_names: tuple = ()
    stats: dict = field(default_factory=dict)


def simulate(model, selection=None, cfg=None, t_end=1.0, events=()):
    """Fixed-step run; ``selection`` None or empty gives the plain trapezoidal method."""
    if cfg is None:
        raise InputError("an ItmConfig is required")
    if not t_end > 0:
        raise PreconditionError("t_end must be positive")
    sel = EMPTY if selection is None else selection
    pat = model.pattern()
    sel.validate(pat)
    steps = int(round(t_end / cfg.h))
    if abs(steps * cfg.h - t_end) > 1e-9 * max(1.0, t_end):
        steps = int(np.floor(t_end / cfg.h))
        warnings.warn(f"t_end is not a multiple of h; truncated to {steps * cfg.h:g}", stacklevel=2)
    p = dict(model.params)
    ev = _Evaluator(model, sel)
    pt = initial_point(model, p)
    X = np.empty((model.n, steps + 1))
    Y = np.empty((model.m, steps + 1))
    its = np.zeros(steps, int)
    X[:, 0], Y[:, 0] = pt.x, pt.y
    pending = sorted(events, key=lambda e: e.time)
    for k in range(steps):
        t = k * cfg.h
        while pending and pending[0].time <= t + 1e-12:
            e = pending.pop(0)
            p.update(e.params)
            x = pt.x.copy()
            for i, v in e.states.items():
                x[int(i)] = v
            y = resolve_algebraic(model, x, pt.y, p)
            f = ev.fg(x, y, pt.xd, pt.yd, p)[0]
            pt = Point(x, y, f, pt.xd, pt.yd)
            X[:, k], Y[:, k] = x, y
        try:
            pt, its[k] = _itm(ev, pt, cfg, p)
        except (NewtonDivergence, SingularJacobian) as exc:
            part = Trajectory(np.arange(k + 1) * cfg.h, X[:, : k + 1], Y[:, : k + 1], its[:k], model.state_names, model.alg_names)
            if isinstance(exc, NewtonDivergence):
                raise NewtonDivergence(f"step {k + 1} at t={t + cfg.h:g}: {exc}", partial=part) from exc
            raise
        X[:, k + 1], Y[:, k + 1] = pt.x, pt.y
    full, dly = iteration_nnz(pat, sel)
    stats = dict(steps=steps, total_newton_iters=int(its.sum()), nnz_full=full, nnz_delayed=dly)
    return Trajectory(np.arange(steps + 1) * cfg.h, X, Y, its, model.state_names, model.alg_names, stats)


def max_mismatch(a, b):
    return float(max(np.max(np.abs(a.states - b.states)), np.max(np.abs(a.algebraics - b.algebraics), initial=0.0)))


# --- GCO selection --------------------------------------------------------


@dataclass(frozen=True)
class GcoTable:
    """Max-over-modes scores for each structurally nonzero element."""

    scores: dict
    modes: np.ndarray
    pattern: dict

    @property
    def empty(self):
        return self.modes.size == 0


def relevant_modes(lam, fmin=0.1, fmax=2.0):
    lam = np.asarray(lam)
    fn = np.abs(lam) / (2 * np.pi)
    mask = (lam.imag > 0) & (fn >= fmin) & (fn <= fmax)
    return np.flatnonzero(mask)


def gco_scores(dae, modes=None, fmin=0.1, fmax=2.0, pattern=None):
    """|c v w b| / (|c| |v| |w| |b|) for every element, maximised over the relevant modes.

    For element (mu, nu): c is row nu of C_x = I (state columns) or
    C_y = -g_y^-1 g_x (algebraic columns); b is e_mu for differential
    equations and -f_y g_y^-1 e_mu for algebraic equations.
    """
    As = reduce_state_matrix(dae)
    lam, V = np.linalg.eig(As)
    W = np.linalg.inv(V)
    idx = relevant_modes(lam, fmin, fmax) if modes is None else np.asarray(modes, int)
    n, m = dae.n, dae.m
    if pattern is None:
        pattern = {k: np.asarray(getattr(dae, k)) != 0 for k in BLOCKS}
    Cy = -np.linalg.solve(dae.gy, dae.gx) if m else np.zeros((0, n))
    By = -dae.fy @ np.linalg.inv(dae.gy) if m else np.zeros((n, 0))
    Vs = V[:, idx]
    Ws = W[idx, :]
    vn = np.linalg.norm(Vs, axis=0)
    wn = np.linalg.norm(Ws, axis=1)

    def table(crow, bcol):
        # crow: rows c_nu (k x n), bcol: columns b_mu (n x l) -> (l, k) scores
        cv = np.abs(crow @ Vs)  # k x modes
        wb = np.abs(Ws @ bcol)  # modes x l
        cn = np.linalg.norm(crow, axis=1)
        bn = np.linalg.norm(bcol, axis=0)
        if idx.size == 0:
            return np.zeros((bcol.shape[1], crow.shape[0]))
        num = wb.T[:, None, :] * cv[None, :, :]
        den = bn[:, None, None] * cn[None, :, None] * (vn * wn)[None, None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(den > 0, num / den, 0.0)
        return s.max(axis=2)

    Cx = np.eye(n)
    Bx = np.eye(n)
    raw = dict(fx=table(Cx, Bx), fy=table(Cy, Bx), gx=table(Cx, By), gy=table(Cy, By))
    scores = {k: np.where(pattern[k], np.clip(raw[k], 0.0, 1.0), np.nan) for k in BLOCKS}
    return GcoTable(scores, lam[idx], pattern)


@dataclass(frozen=True)
class DensityReport:
    nnz_before: dict
    nnz_after: dict


def select_delayed(table, gco_max, blocks=ELIGIBLE):
    """Elements scoring below gco_max for every relevant mode."""
    entries = []
    before, after = {}, {}
    for k in BLOCKS:
        s = table.scores[k]
        pat = table.pattern[k]
        before[k] = int(np.count_nonzero(pat))
        chosen = np.zeros_like(pat)
        if k in blocks:
            with np.errstate(invalid="ignore"):
                chosen = pat & (s < gco_max)
            for i, j in zip(*np.nonzero(chosen)):
                entries.append((k, int(i), int(j)))
        after[k] = before[k] - int(np.count_nonzero(chosen))
    return DelaySelection(tuple(entries)), DensityReport(before, after)


def split_linear(dae, selection):
    """Delay-free and delayed parts of the Jacobians of a linearization."""
    mk = selection.masks(dae.n, dae.m)
    part = {k: (np.where(mk[k], 0.0, getattr(dae, k)), np.where(mk[k], getattr(dae, k), 0.0)) for k in BLOCKS}
    return LinearDDAE(part["fx"][0], part["fy"][0], part["gx"][0], part["gy"][0], part["fx"][1], part["fy"][1], part["gx"][1])


@dataclass(frozen=True)
class StepEstimate:
    h_max: float
    h_grid: np.ndarray
    eta: np.ndarray
    monotone: bool
    violations: tuple


def _pair(ref, approx):
    """Nearest-neighbour pairing without reuse."""
    approx = list(approx)
    out = []
    for lam in ref:
        if not approx:
            raise PreconditionError("not enough discretized modes to pair with the delay-free spectrum")
        d = [abs(a - lam) for a in approx]
        out.append(approx.pop(int(np.argmin(d))))
    return np.array(out)


def max_step_estimate(dae, selection, eta_max=0.01, h_grid=None, N_C=10, n_modes=10, zero_tol=1e-8):
    """Largest grid step whose one-step-delay linearization keeps the rightmost modes within eta_max."""
    if not eta_max > 0:
        raise PreconditionError("eta_max must be positive")
    h_grid = np.sort(np.asarray(h_grid if h_grid is not None else np.linspace(0.01, 0.3, 15), float))
    if isinstance(dae, NonlinearDAE):
        dae = linearize(dae)
    As = reduce_state_matrix(dae)
    lam = np.linalg.eigvals(As)
    lam = lam[np.abs(lam) > zero_tol]
    lam = lam[np.lexsort((lam.imag, -lam.real))][:n_modes]
    ddae = split_linear(dae, selection)
    eta = np.empty(h_grid.size)
    for k, h in enumerate(h_grid):
        approx = cheb_eigenvalues(ddae_delay_matrices(ddae, h), N_C)
        paired = _pair(lam, approx)
        eta[k] = float(np.max(np.abs(paired - lam) / np.abs(lam))) if lam.size else 0.0
    viol = tuple(int(i) for i in np.flatnonzero(np.diff(eta) < 0))
    ok = h_grid[eta <= eta_max]
    h_max = float(ok.max()) if ok.size else 0.0
    return StepEstimate(h_max, h_grid, eta, not viol, viol)
