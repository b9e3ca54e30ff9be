"""Desk-scale nonlinear DAE models for the integrator and delay studies.

``toy_multimachine`` is synthetic: k machines on a ring with a centre of
inertia speed, droop-shared secondary frequency control and a pilot-bus
secondary voltage loop. Its parameter defaults are invented for testing and
carry no claim about any real network.
"""

import numpy as np

from .errors import PreconditionError
from .integrator import Event, NonlinearDAE, linearize  # noqa: F401  (linearize re-exported)


def _ring(k, b):
    B = np.zeros((k, k))
    if k == 2:
        B[0, 1] = B[1, 0] = b
        return B
    for i in range(k):
        B[i, (i + 1) % k] = B[(i + 1) % k, i] = b
    return B


def _unpack(x, y, k):
    d, w, pt, e, xr = (x[i * k : (i + 1) * k] for i in range(5))
    ps = x[5 * k]
    wc, vp = y[0], y[1]
    pord, pe, q, qerr = (y[2 + i * k : 2 + (i + 1) * k] for i in range(4))
    return d, w, pt, e, xr, ps, wc, vp, pord, pe, q, qerr


def _flows(d, e, p):
    B = p["B"]
    dd = d[:, None] - d[None, :]
    S, C = np.sin(dd), np.cos(dd)
    pe = p["G"] * e**2 + e * ((B * S) @ e)
    q = p["Bsh"] * e**2 + e**2 * B.sum(axis=1) - e * ((B * C) @ e)
    return pe, q, S, C


def toy_multimachine(k=4, M=20.0, D=2.0, R=0.05, T_g=0.4, T_e=0.5, K_I=0.5, K_agc=0.5, K_v=1.0,
                     b=2.0, G=0.6, B_sh=0.2, e0=1.05, Omega_b=100 * np.pi, svr_coupling=0.3, delta0=None):
    """k-machine ring with CoI speed, AGC and secondary voltage control.

    States per machine: rotor angle against the CoI, speed, turbine power,
    internal voltage and the SVR integrator; one shared AGC state. Algebraic
    variables: CoI speed, pilot voltage, then per machine the AGC order,
    electrical power, reactive power and the reactive error.
    """
    if k < 2:
        raise PreconditionError("toy_multimachine needs at least two machines")
    if delta0 is None:
        delta0 = 0.05 * np.sin(np.arange(k) * 2.1)
    delta0 = np.asarray(delta0, float)
    if delta0.shape != (k,):
        raise PreconditionError(f"delta0 must have {k} entries")
    ones = np.ones(k)
    Mv = M * ones
    p = dict(
        k=k, M=Mv, D=D * ones, R=R * ones, T_g=T_g, T_e=T_e, K_I=K_I, K_agc=K_agc, K_v=K_v,
        B=_ring(k, b), G=G * ones, Bsh=B_sh * ones, Omega_b=Omega_b,
        # dense SVR distribution matrix
        Dsvr=(1 - svr_coupling) * np.eye(k) + svr_coupling * np.ones((k, k)) / k,
        wR=(1 / (R * ones)) / np.sum(1 / (R * ones)),
    )
    e = e0 * ones
    pe, q, _, _ = _flows(delta0, e, p)
    vp = float(e.mean())
    p.update(P0=pe.copy(), E0=e.copy(), Q0=q.copy(), Vp0=vp)
    x0 = np.concatenate([delta0, ones, pe, e, np.zeros(k), [0.0]])
    y0 = np.concatenate([[1.0, vp], np.zeros(k), pe, q, np.zeros(k)])
    names_x = tuple(f"{s}_{i}" for s in ("delta", "omega", "P_t", "e", "x_r") for i in range(1, k + 1)) + ("P_s",)
    names_y = ("omega_coi", "v_p") + tuple(f"{s}_{i}" for s in ("P_ord", "P_e", "Q", "Q_err") for i in range(1, k + 1))
    return NonlinearDAE(_toy_f, _toy_g, _toy_jac, x0, y0, p, names_x, names_y)


def _toy_f(x, y, p):
    k = p["k"]
    d, w, pt, e, xr, ps, wc, vp, pord, pe, q, qerr = _unpack(x, y, k)
    return np.concatenate([
        p["Omega_b"] * (w - wc),
        (pt - pe - p["D"] * (w - 1)) / p["M"],
        (p["P0"] + pord - (w - 1) / p["R"] - pt) / p["T_g"],
        (p["E0"] + xr - e) / p["T_e"],
        p["K_I"] * (p["Dsvr"] @ qerr),
        [-p["K_agc"] * (wc - 1)],
    ])


def _toy_g(x, y, p):
    k = p["k"]
    d, w, pt, e, xr, ps, wc, vp, pord, pe, q, qerr = _unpack(x, y, k)
    pe_c, q_c, _, _ = _flows(d, e, p)
    return np.concatenate([
        [p["M"] @ w / p["M"].sum() - wc, e.mean() - vp],
        p["wR"] * ps - pord,
        pe_c - pe,
        q_c - q,
        p["Q0"] + p["K_v"] * (p["Vp0"] - vp) - q - qerr,
    ])


def _toy_jac(x, y, p):
    k = p["k"]
    n, m = 5 * k + 1, 2 + 4 * k
    d, w, pt, e, xr, ps, wc, vp, pord, pe, q, qerr = _unpack(x, y, k)
    B = p["B"]
    _, _, S, C = _flows(d, e, p)
    I = np.eye(k)
    sx = {s: slice(i * k, (i + 1) * k) for i, s in enumerate(("d", "w", "pt", "e", "xr"))}
    ips = 5 * k
    sy = {s: slice(2 + i * k, 2 + (i + 1) * k) for i, s in enumerate(("pord", "pe", "q", "qerr"))}
    fx = np.zeros((n, n))
    fy = np.zeros((n, m))
    gx = np.zeros((m, n))
    gy = np.zeros((m, m))
    fx[sx["d"], sx["w"]] = p["Omega_b"] * I
    fy[sx["d"], 0] = -p["Omega_b"]
    fx[sx["w"], sx["w"]] = np.diag(-p["D"] / p["M"])
    fx[sx["w"], sx["pt"]] = np.diag(1 / p["M"])
    fy[sx["w"], sy["pe"]] = np.diag(-1 / p["M"])
    fx[sx["pt"], sx["w"]] = np.diag(-1 / (p["R"] * p["T_g"]))
    fx[sx["pt"], sx["pt"]] = -I / p["T_g"]
    fy[sx["pt"], sy["pord"]] = I / p["T_g"]
    fx[sx["e"], sx["e"]] = -I / p["T_e"]
    fx[sx["e"], sx["xr"]] = I / p["T_e"]
    fy[sx["xr"], sy["qerr"]] = p["K_I"] * p["Dsvr"]
    fy[ips, 0] = -p["K_agc"]
    gx[0, sx["w"]] = p["M"] / p["M"].sum()
    gy[0, 0] = -1.0
    gx[1, sx["e"]] = 1.0 / k
    gy[1, 1] = -1.0
    gx[sy["pord"], ips] = p["wR"]
    gy[sy["pord"], sy["pord"]] = -I
    BSe = (B * S) * e[None, :]  # B_ij s_ij e_j
    BCe = (B * C) * e[None, :]
    # P_e
    dpe_dd = -(BCe * e[:, None])
    dpe_dd[np.diag_indices(k)] = (BCe * e[:, None]).sum(axis=1)
    dpe_de = (B * S) * e[:, None]
    dpe_de[np.diag_indices(k)] = 2 * p["G"] * e + BSe.sum(axis=1)
    gx[sy["pe"], sx["d"]] = dpe_dd
    gx[sy["pe"], sx["e"]] = dpe_de
    gy[sy["pe"], sy["pe"]] = -I
    # Q
    dq_dd = -(BSe * e[:, None])
    dq_dd[np.diag_indices(k)] = (BSe * e[:, None]).sum(axis=1)
    dq_de = -(B * C) * e[:, None]
    dq_de[np.diag_indices(k)] = 2 * p["Bsh"] * e + 2 * e * B.sum(axis=1) - BCe.sum(axis=1)
    gx[sy["q"], sx["d"]] = dq_dd
    gx[sy["q"], sx["e"]] = dq_de
    gy[sy["q"], sy["q"]] = -I
    gy[sy["qerr"], 1] = -p["K_v"]
    gy[sy["qerr"], sy["q"]] = -I
    gy[sy["qerr"], sy["qerr"]] = -I
    return fx, fy, gx, gy


def coi_selection(model):
    """Delay the CoI speed where it is consumed and the machine speeds where it is formed."""
    from .integrator import DelaySelection

    k = model.params["k"]
    ent = [("fy", i, 0) for i in range(k)] + [("fy", 5 * k, 0)]
    ent += [("gx", 0, k + i) for i in range(k)]
    return DelaySelection(tuple(ent))


def load_step(model, t=1.0, dG=0.003, machine=0):
    G = np.array(model.params["G"], float)
    G[machine] += dG
    return Event(t, params=dict(G=G))


def omib_nonlinear(e_q=1.22, v=1.0, X_tot=0.7, P_m=1.0, M=5.0, Omega_b=100 * np.pi, D=5.0):
    """Classical machine against an infinite bus with the electrical power as algebraic variable."""
    from .dae import omib_equilibrium

    d0 = omib_equilibrium(e_q, v, X_tot, P_m)
    p = dict(e_q=e_q, v=v, X_tot=X_tot, P_m=P_m, M=M, Omega_b=Omega_b, D=D)

    def f(x, y, p):
        return np.array([p["Omega_b"] * (x[1] - 1), (p["P_m"] - y[0] - p["D"] * (x[1] - 1)) / p["M"]])

    def g(x, y, p):
        return np.array([p["e_q"] * p["v"] * np.sin(x[0]) / p["X_tot"] - y[0]])

    def jac(x, y, p):
        fx = np.array([[0.0, p["Omega_b"]], [0.0, -p["D"] / p["M"]]])
        fy = np.array([[0.0], [-1 / p["M"]]])
        gx = np.array([[p["e_q"] * p["v"] * np.cos(x[0]) / p["X_tot"], 0.0]])
        gy = np.array([[-1.0]])
        return fx, fy, gx, gy

    return NonlinearDAE(f, g, jac, [d0, 1.0], [P_m], p, ("delta", "omega"), ("P_e",))
