"""Command-line front end: ``smallsig <verb> [options]``.

Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 violated precondition.
"""

import argparse
import json
import sys

import numpy as np

from . import io as sio
from .dae import LinearDAE, augment_pencil, builtin_model, output_matrix, OutputMap, reduce_state_matrix
from .errors import InputError, PreconditionError, ToolkitError
from .pencil import MatrixPencil, MoebiusCoeffs, eigen, moebius_transform, prime_spectrum

VERBS = ("eig", "transform", "pf", "ora", "foc-stab", "delay-map", "delay-dis", "cheb-eig", "gco", "simulate", "hmax")


def _emit(args, text, suffix=None):
    out = args.out
    if out is None or out == "-":
        if suffix is None:
            sys.stdout.write(text)
        return
    path = out if suffix is None else out + suffix
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _model_args(p, builtin_default=None):
    p.add_argument("--model", default=builtin_default, help="JSON model path, or a built-in name with --builtin")
    p.add_argument("--builtin", action="store_true", help="treat --model as a built-in model name")
    p.add_argument("--E", dest="E_path", help="Matrix Market file for E (with --A)")
    p.add_argument("--A", dest="A_path", help="Matrix Market file for A (with --E)")


def _load(args):
    if args.E_path or args.A_path:
        if not (args.E_path and args.A_path):
            raise InputError("--E and --A must be given together")
        return MatrixPencil(sio.load_matrix(args.E_path), sio.load_matrix(args.A_path))
    if not args.model:
        raise InputError("no model given: use --model (with --builtin for built-in names) or --E/--A")
    if args.builtin:
        return builtin_model(args.model)
    return sio.load_model(args.model)


def _pencil(model, reduce=False):
    if isinstance(model, MatrixPencil):
        if reduce:
            raise InputError("--reduce needs a DAE model, not a pencil")
        return model
    if reduce:
        As = reduce_state_matrix(model)
        return MatrixPencil(np.eye(model.n), As)
    return augment_pencil(model, model.meta.get("lhs"))


def cmd_eig(args):
    model = _load(args)
    pen = _pencil(model, args.reduce)
    sol = eigen(pen, want_left=False, tol_inf=args.tol or 1e-10, seed=args.seed)
    _emit(args, sio.eigen_csv(sol.finite_eigs, sol.inf_multiplicity))


def _coeffs(args):
    k = args.kind
    if k == "prime":
        return MoebiusCoeffs.prime()
    if k == "invert":
        return MoebiusCoeffs.invert()
    if k == "shift-invert":
        return MoebiusCoeffs.shift_invert(args.sigma)
    if k == "cayley":
        return MoebiusCoeffs.cayley(args.sigma)
    if k == "gcayley":
        return MoebiusCoeffs.generalized_cayley(args.sigma, args.nu)
    if args.coeffs is None:
        raise InputError("--kind custom needs --coeffs a b c d")
    return MoebiusCoeffs(*args.coeffs)


def cmd_transform(args):
    model = _load(args)
    pen = _pencil(model)
    co = _coeffs(args)
    tp = moebius_transform(pen, co)
    sol = eigen(tp, want_left=False, tol_inf=args.tol or 1e-10, seed=args.seed)
    s = prime_spectrum(sol, co, args.tol or 1e-10)[: sol.nu]
    extra = [[float(np.real(v)), float(np.imag(v))] for v in s]
    _emit(args, sio.eigen_csv(sol.finite_eigs, sol.inf_multiplicity, ("s_re", "s_im"), extra))
    if args.emit_mtx:
        sio.save_matrix(args.emit_mtx + ".E.mtx", np.real_if_close(tp.E))
        sio.save_matrix(args.emit_mtx + ".A.mtx", np.real_if_close(tp.A))


def cmd_pf(args):
    from .participation import generalized_pf, jordan_pf
    from .pencil import cluster_eigenvalues

    model = _load(args)
    pen = _pencil(model)
    sol = eigen(pen, seed=args.seed)
    labels = None
    if isinstance(model, LinearDAE):
        labels = model.state_names + model.alg_names
    idx = np.arange(sol.nu)
    if args.modes:
        idx = idx[: args.modes]
    groups = cluster_eigenvalues(sol.finite_eigs)
    cols, vals, eigs = [], [], []
    done = set()
    for i in idx:
        g = next(g for g in groups if i in g)
        if len(g) > 1:
            if g[0] in done:
                continue
            done.add(g[0])
            try:
                part = generalized_pf(pen, sol, g, labels)
            except PreconditionError:
                part = jordan_pf(pen, eigenvalue=complex(np.mean(sol.finite_eigs[g])), labels=labels)
        else:
            part = generalized_pf(pen, sol, [i], labels)
        vals.append(part.values)
        cols += list(part.col_labels)
        eigs += list(part.eigenvalues)
    from .participation import ParticipationMatrix

    pf = ParticipationMatrix(np.hstack(vals), part.row_labels, tuple(cols), np.array(eigs))
    if args.kind != "states":
        if not isinstance(model, LinearDAE):
            raise InputError("--kind algebraic/rates needs a DAE model")
        n = model.n
        from .participation import output_pf

        state_pf = ParticipationMatrix(pf.values[:n], pf.row_labels[:n], pf.col_labels, pf.eigenvalues)
        if args.kind == "algebraic":
            C = output_matrix(model, OutputMap(np.zeros((model.m, n)), np.eye(model.m)))
            pf = output_pf(state_pf, C, model.alg_names)
        else:
            C = output_matrix(model, OutputMap(model.fx, model.fy))
            pf = output_pf(state_pf, C, tuple(f"d{s}" for s in model.state_names))
    _emit(args, sio.pf_csv(pf, args.floor))


def cmd_ora(args):
    from .fractional import OraSpec, ora_frequency_response, ora_realize, suggest_order

    N = args.N or suggest_order(args.wb, args.wh)
    spec = OraSpec(args.gamma, args.wb, args.wh, N)
    real = ora_realize(spec)
    w = np.logspace(np.log10(args.wb) - 1, np.log10(args.wh) + 1, args.points)
    H = ora_frequency_response(real, w, K=args.K)
    _emit(args, sio.bode_csv(w, H))
    if args.realization:
        pen = MatrixPencil(real.E_I, real.A_I)
        sio.save_model(args.realization, pen, extra={"B": sio._trip(args.K * real.B_I)})


def cmd_foc_stab(args):
    from .dae import example_ch4_plant
    from .fractional import assemble_closed_loop, foc_block, fractional_stability

    if args.plant != "example_ch4":
        raise InputError(f"unknown plant {args.plant!r}; available: example_ch4")
    params = dict(K_p=args.Kp, K_i=args.Ki, K=args.K, T1=args.T1, T2=args.T2, K_w=args.K)
    params = {k: v for k, v in params.items() if v is not None}
    block = foc_block(args.controller, args.gamma, **params)
    cl = assemble_closed_loop(example_ch4_plant(), block)
    v = fractional_stability(cl)
    extra = [[float(a), float(v.threshold), "true" if a > v.threshold else "false"] for a in v.args]
    _emit(args, sio.eigen_csv(v.eigenvalues, v.inf_multiplicity, ("arg_rad", "threshold_rad", "stable"), extra))
    if args.out not in (None, "-"):
        _emit(args, json.dumps({"stable": v.stable, "threshold_rad": float(v.threshold)}, indent=2) + "\n", ".verdict.json")


def _pr_system(args):
    from .delay import omib_pr

    return omib_pr(args.c, b=args.b, eps=args.eps, kr_sign=args.kr_sign)


def cmd_delay_map(args):
    from .delay import sigma_crossings, stability_map

    sys_ = _pr_system(args)
    taus = np.linspace(args.tau_min, args.tau_max, args.ntau)
    gains = np.linspace(args.k_min, args.k_max, args.nk)
    smap = stability_map(lambda t, k: sys_.delay_lti(t, k), taus, gains, N_C=args.nc, kind=args.kind)
    _emit(args, sio.map_csv(smap))
    if args.out not in (None, "-"):
        _emit(args, sio.map_sidecar(smap), ".json")
    if args.crossings:
        br, _ = sigma_crossings(sys_, args.sigma)
        with open(args.crossings, "w", newline="\n") as fh:
            fh.write(sio.crossings_csv(br))


def cmd_delay_dis(args):
    from .delay import delay_independent_band

    b = delay_independent_band(args.c, args.eps)
    _emit(args, sio.table_csv(["low", "high", "kind"], [[float(b.low), float(b.high), b.kind]]))


def cmd_cheb_eig(args):
    from .delay import DelayLTI, cheb_eigenvalues

    A0 = sio.load_matrix(args.A0)
    if len(args.Ad) != len(args.tau):
        raise InputError("each --Ad needs a matching --tau")
    sys_ = DelayLTI(A0, [(sio.load_matrix(p), t) for p, t in zip(args.Ad, args.tau)])
    lam = cheb_eigenvalues(sys_, args.nc)
    _emit(args, sio.eigen_csv(lam[: args.count] if args.count else lam))


def _nonlinear(name):
    from .toymodel import omib_nonlinear, toy_multimachine

    if name == "toy_multimachine":
        return toy_multimachine()
    if name == "omib_nonlinear":
        return omib_nonlinear()
    raise InputError(f"unknown nonlinear model {name!r}; available: toy_multimachine, omib_nonlinear")


def _selection(args, model):
    from .integrator import DelaySelection, gco_scores, linearize, select_delayed

    if args.delay_selection:
        try:
            with open(args.delay_selection) as fh:
                doc = json.load(fh)
            ent = [tuple(e) for e in doc["entries"]]
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"{args.delay_selection}: cannot read delay selection: {exc}") from exc
        return DelaySelection(tuple(ent))
    if args.gco_max is not None:
        table = gco_scores(linearize(model), pattern=model.pattern(args.seed))
        return select_delayed(table, args.gco_max)[0]
    return DelaySelection(())


def cmd_gco(args):
    from .integrator import gco_scores, linearize, select_delayed

    model = _nonlinear(args.model)
    table = gco_scores(linearize(model), fmin=args.fmin, fmax=args.fmax, pattern=model.pattern(args.seed))
    if table.empty:
        raise PreconditionError(f"no oscillatory modes with natural frequency in [{args.fmin}, {args.fmax}] Hz")
    sel, rep = select_delayed(table, args.gco_max)
    chosen = set(sel.entries)
    rows = []
    for blk in ("fx", "fy", "gx", "gy"):
        s = table.scores[blk]
        for i, j in zip(*np.nonzero(table.pattern[blk])):
            rows.append([blk, int(i), int(j), float(s[i, j]), "true" if (blk, int(i), int(j)) in chosen else "false"])
    _emit(args, sio.table_csv(["block", "row", "col", "score", "selected"], rows))
    if args.selection_out:
        with open(args.selection_out, "w", newline="\n") as fh:
            fh.write(json.dumps({"entries": [list(e) for e in sel.entries], "nnz_before": rep.nnz_before,
                                 "nnz_after": rep.nnz_after}, indent=2) + "\n")


def cmd_simulate(args):
    from .integrator import ItmConfig, max_mismatch, simulate
    from .toymodel import load_step

    model = _nonlinear(args.model)
    sel = _selection(args, model)
    cfg = ItmConfig(args.h, newton_tol=args.tol or 1e-8)
    events = []
    if args.event_time is not None:
        if args.model == "toy_multimachine":
            events.append(load_step(model, t=args.event_time, dG=args.step))
        else:
            from .integrator import Event

            events.append(Event(args.event_time, params=dict(P_m=model.params["P_m"] + args.step)))
    traj = simulate(model, sel, cfg, args.t_end, events)
    stats = dict(traj.stats)
    if args.compare_undelayed:
        ref = simulate(model, None, cfg, args.t_end, events)
        stats["max_mismatch"] = max_mismatch(traj, ref)
    _emit(args, sio.trajectory_csv(traj))
    if args.out not in (None, "-"):
        _emit(args, sio.stats_json(stats), ".stats.json")
    else:
        sys.stderr.write(sio.stats_json(stats))


def cmd_hmax(args):
    from .integrator import linearize, max_step_estimate

    model = _nonlinear(args.model)
    sel = _selection(args, model)
    grid = np.array(args.h_grid) if args.h_grid else None
    est = max_step_estimate(linearize(model), sel, args.eta_max, grid, N_C=args.nc, n_modes=args.modes)
    _emit(args, sio.table_csv(["h_s", "eta"], [[float(h), float(e)] for h, e in zip(est.h_grid, est.eta)]))
    summary = dict(h_max=est.h_max, monotone=est.monotone, violations=list(est.violations), selected=len(sel))
    if args.out not in (None, "-"):
        _emit(args, json.dumps(summary, indent=2) + "\n", ".json")
    else:
        sys.stderr.write(json.dumps(summary) + "\n")


def build_parser():
    ap = argparse.ArgumentParser(prog="smallsig", description="Small-signal stability toolkit")
    ap.add_argument("--out", help="output path (default stdout)")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized probes (default 0)")
    ap.add_argument("--tol", type=float, default=None, help="override the main numerical tolerance of the verb")
    # the global flags are accepted after the verb as well
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="verb", required=True)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **k: _add(*a, parents=[common], **k)

    p = sub.add_parser("eig", help="finite eigenvalues and infinite multiplicity")
    _model_args(p)
    p.add_argument("--reduce", action="store_true", help="eliminate algebraic variables first (needs invertible g_y)")
    p.set_defaults(func=cmd_eig)

    p = sub.add_parser("transform", help="Moebius-transformed pencil spectrum")
    _model_args(p)
    p.add_argument("--kind", choices=("prime", "invert", "shift-invert", "cayley", "gcayley", "custom"), default="prime")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--coeffs", type=float, nargs=4, metavar=("A", "B", "C", "D"))
    p.add_argument("--emit-mtx", help="prefix for writing the transformed E and A")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("pf", help="participation factors")
    _model_args(p)
    p.add_argument("--modes", type=int, default=0, help="keep the k rightmost modes (0 = all)")
    p.add_argument("--kind", choices=("states", "algebraic", "rates"), default="states")
    p.add_argument("--floor", type=float, default=0.0, help="omit entries with |pi| below this")
    p.set_defaults(func=cmd_pf)

    p = sub.add_parser("ora", help="Oustaloup approximation Bode data")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--wb", type=float, required=True)
    p.add_argument("--wh", type=float, required=True)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--realization", help="write the semi-implicit realization as a JSON pencil")
    p.set_defaults(func=cmd_ora)

    p = sub.add_parser("foc-stab", help="fractional closed-loop stability")
    p.add_argument("--plant", default="example_ch4")
    p.add_argument("--controller", default="FOPI", choices=("FOI", "FOPI", "FO_leadlag", "FO_PSS", "FO_AGC"))
    p.add_argument("--gamma", type=float, default=0.6)
    p.add_argument("--Kp", type=float, default=7.0)
    p.add_argument("--Ki", type=float, default=10.0)
    p.add_argument("--K", type=float, default=None)
    p.add_argument("--T1", type=float, default=None)
    p.add_argument("--T2", type=float, default=None)
    p.set_defaults(func=cmd_foc_stab)

    def pr_args(p):
        p.add_argument("--c", type=float, required=True, help="total delay-free friction c = c1 + eps K_p")
        p.add_argument("--b", type=float, default=None, help="stiffness (default: OMIB value)")
        p.add_argument("--eps", type=float, default=None, help="gain scale (default 1/Omega_b)")
        p.add_argument("--kr-sign", type=int, choices=(-1, 1), default=1)

    p = sub.add_parser("delay-map", help="sigma or zeta stability map of the PR-controlled OMIB")
    pr_args(p)
    p.add_argument("--kind", choices=("sigma", "zeta"), default="sigma")
    p.add_argument("--tau-min", type=float, default=0.0)
    p.add_argument("--tau-max", type=float, default=0.4)
    p.add_argument("--ntau", type=int, default=50)
    p.add_argument("--k-min", type=float, default=-1000.0)
    p.add_argument("--k-max", type=float, default=1000.0)
    p.add_argument("--nk", type=int, default=50)
    p.add_argument("--nc", type=int, default=12)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--crossings", help="also write the crossing-curve CSV here")
    p.set_defaults(func=cmd_delay_map)

    p = sub.add_parser("delay-dis", help="delay-independent gain band")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(func=cmd_delay_dis)

    p = sub.add_parser("cheb-eig", help="Chebyshev eigenvalues of x' = A0 x + sum A_i x(t - tau_i)")
    p.add_argument("--A0", required=True)
    p.add_argument("--Ad", action="append", default=[], help="Matrix Market file of a delayed matrix (repeatable)")
    p.add_argument("--tau", action="append", type=float, default=[], help="delay of the matching --Ad")
    p.add_argument("--nc", type=int, default=20)
    p.add_argument("--count", type=int, default=0)
    p.set_defaults(func=cmd_cheb_eig)

    def nl_args(p):
        p.add_argument("--model", default="toy_multimachine")
        p.add_argument("--gco-max", type=float, default=None)
        p.add_argument("--delay-selection", help="JSON file with an 'entries' list of [block, row, col]")

    p = sub.add_parser("gco", help="GCO scores and delayed-element selection")
    p.add_argument("--model", default="toy_multimachine")
    p.add_argument("--gco-max", type=float, default=0.01)
    p.add_argument("--fmin", type=float, default=0.1)
    p.add_argument("--fmax", type=float, default=2.0)
    p.add_argument("--selection-out")
    p.set_defaults(func=cmd_gco)

    p = sub.add_parser("simulate", help="trapezoidal time-domain run")
    nl_args(p)
    p.add_argument("--h", type=float, default=0.02)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--event-time", type=float, default=None)
    p.add_argument("--step", type=float, default=0.003, help="load (toy) or mechanical power (OMIB) step")
    p.add_argument("--compare-undelayed", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("hmax", help="largest one-step-delay step from eigenvalue drift")
    nl_args(p)
    p.add_argument("--eta-max", type=float, default=0.01)
    p.add_argument("--h-grid", type=float, nargs="+")
    p.add_argument("--nc", type=int, default=10)
    p.add_argument("--modes", type=int, default=10)
    p.set_defaults(func=cmd_hmax)
    return ap


def run(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args.func(args)
    except ToolkitError as exc:
        sys.stderr.write(f"smallsig {args.verb}: error: {exc}\n")
        return exc.exit_code
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
