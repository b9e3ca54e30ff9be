"""Matrix Market and JSON model files, and the CSV/JSON report writers.

Floats are written with 17 significant digits so that files round-trip
exactly and identical inputs give byte-identical outputs.
"""

import csv
import io as _io
import json
import warnings

import numpy as np
import scipy.io
import scipy.sparse as sp

from .dae import LinearDAE, SemiImplicitLHS
from .errors import InputError
from .pencil import MatrixPencil, damping_and_frequency


def fmt(x):
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


# --- Matrix Market ----------------------------------------------------------


def save_matrix(path, A):
    """Coordinate real general, 1-based, entries in row-major order."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    rows, cols = np.nonzero(A)
    lines = ["%%MatrixMarket matrix coordinate real general", f"{A.shape[0]} {A.shape[1]} {rows.size}"]
    lines += [f"{i + 1} {j + 1} {fmt(A[i, j])}" for i, j in zip(rows, cols)]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_matrix(path):
    try:
        with open(path) as fh:
            head = fh.readline().split()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if len(head) < 5 or head[0].lower() != "%%matrixmarket" or head[1].lower() != "matrix":
        raise InputError(f"{path}: not a Matrix Market file (bad banner)")
    if head[3].lower() not in ("real", "integer") or head[4].lower() != "general":
        raise InputError(f"{path}: expected a real general matrix, header says {' '.join(head[3:5])}")
    try:
        M = scipy.io.mmread(path)
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: malformed Matrix Market body: {exc}") from exc
    return np.asarray(M.toarray() if sp.issparse(M) else M, dtype=float)


# --- JSON model schema ------------------------------------------------------


def _triplets(doc, key, shape, pointer=""):
    raw = doc.get(key, [])
    if not isinstance(raw, list):
        raise InputError(f"{pointer}/{key}: expected a list of [row, col, value] triplets")
    out = np.zeros(shape)
    seen = set()
    dup = 0
    for k, t in enumerate(raw):
        loc = f"{pointer}/{key}/{k}"
        if not (isinstance(t, list) and len(t) == 3):
            raise InputError(f"{loc}: expected [row, col, value]")
        i, j, v = t
        if not (isinstance(i, int) and isinstance(j, int)) or isinstance(i, bool) or isinstance(j, bool):
            raise InputError(f"{loc}: indices must be integers")
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
            raise InputError(f"{loc}/2: value must be a finite number")
        if not (0 <= i < shape[0]):
            raise InputError(f"{loc}/0: row {i} outside [0, {shape[0]})")
        if not (0 <= j < shape[1]):
            raise InputError(f"{loc}/1: column {j} outside [0, {shape[1]})")
        if (i, j) in seen:
            dup += 1
        seen.add((i, j))
        out[i, j] += v
    if dup:
        warnings.warn(f"{pointer}/{key}: {dup} duplicate (row, col) entries were summed", stacklevel=3)
    return out


def _dims(doc, key):
    v = doc.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise InputError(f"/{key}: expected a non-negative integer")
    return v


def _names(doc, key, count):
    v = doc.get(key)
    if v is None:
        return ()
    if not isinstance(v, list) or not all(isinstance(s, str) for s in v):
        raise InputError(f"/{key}: expected a list of strings")
    if len(v) != count:
        raise InputError(f"/{key}: expected {count} names, got {len(v)}")
    return tuple(v)


def model_from_doc(doc):
    """LinearDAE (with optional SemiImplicitLHS) or MatrixPencil from a parsed document."""
    if not isinstance(doc, dict):
        raise InputError("/: expected a JSON object")
    if "E" in doc or "A" in doc:
        r = _dims(doc, "r")
        if r < 1:
            raise InputError("/r: pencil dimension must be at least 1")
        return MatrixPencil(_triplets(doc, "E", (r, r)), _triplets(doc, "A", (r, r)))
    n, m = _dims(doc, "n"), _dims(doc, "m")
    dae = LinearDAE(
        _triplets(doc, "fx", (n, n)), _triplets(doc, "fy", (n, m)),
        _triplets(doc, "gx", (m, n)), _triplets(doc, "gy", (m, m)),
        _names(doc, "state_names", n), _names(doc, "alg_names", m),
    )
    lhs = doc.get("lhs")
    if lhs is not None:
        if not isinstance(lhs, dict):
            raise InputError("/lhs: expected an object with T and R")
        dae.meta["lhs"] = SemiImplicitLHS(_triplets(lhs, "T", (n, n), "/lhs"), _triplets(lhs, "R", (m, n), "/lhs"))
    return dae


def load_model(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return model_from_doc(doc)


def _trip(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return [[int(i), int(j), float(A[i, j])] for i, j in zip(*np.nonzero(A))]


def model_to_doc(model, extra=None):
    if isinstance(model, MatrixPencil):
        doc = {"r": model.r, "E": _trip(model.E), "A": _trip(model.A)}
    elif isinstance(model, LinearDAE):
        doc = {"n": model.n, "m": model.m, "fx": _trip(model.fx), "fy": _trip(model.fy), "gx": _trip(model.gx),
               "gy": _trip(model.gy), "state_names": list(model.state_names), "alg_names": list(model.alg_names)}
        lhs = model.meta.get("lhs")
        if lhs is not None:
            doc["lhs"] = {"T": _trip(lhs.T), "R": _trip(lhs.R)}
    else:
        raise InputError(f"cannot serialise {type(model).__name__}")
    if extra:
        doc.update(extra)
    return doc


def dumps_doc(doc):
    """Canonical text: one triplet per line, keys in insertion order."""
    parts = []
    for k, v in doc.items():
        if isinstance(v, list) and v and isinstance(v[0], list):
            body = ",\n".join("    " + json.dumps(t) for t in v)
            parts.append(f'  {json.dumps(k)}: [\n{body}\n  ]')
        elif isinstance(v, dict):
            parts.append(f"  {json.dumps(k)}: " + dumps_doc(v).replace("\n", "\n  "))
        else:
            parts.append(f"  {json.dumps(k)}: {json.dumps(v)}")
    return "{\n" + ",\n".join(parts) + "\n}"


def save_model(path, model, extra=None):
    text = dumps_doc(model_to_doc(model, extra)) + "\n"
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


# --- CSV reports --------------------------------------------------------------


def _csv(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def eigen_rows(eigs, inf_multiplicity=0):
    rows = []
    for lam in eigs:
        lam = complex(lam)
        z, fn = damping_and_frequency(lam)
        rows.append([lam.real, lam.imag, z, fn, "finite"])
    rows += [[np.inf, np.nan, np.nan, np.nan, "infinite"]] * int(inf_multiplicity)
    return rows


def eigen_csv(eigs, inf_multiplicity=0, extra_header=(), extra=None):
    rows = eigen_rows(eigs, inf_multiplicity)
    if extra is not None:
        rows = [r + list(e) for r, e in zip(rows, extra)] + rows[len(extra):]
    return _csv(["re", "im", "zeta", "fn_hz", "kind", *extra_header], rows)


def pf_csv(pf, floor=0.0):
    rows = []
    for j, lab in enumerate(pf.col_labels):
        for k, var in enumerate(pf.row_labels):
            v = complex(pf.values[k, j])
            if abs(v) >= floor:
                rows.append([var, lab, v.real, v.imag, abs(v)])
    return _csv(["variable", "eig_id", "re", "im", "abs"], rows)


def bode_csv(omega, H):
    H = np.asarray(H)
    return _csv(["omega", "mag_db", "phase_deg"],
                [[float(w), float(20 * np.log10(abs(h))), float(np.degrees(np.angle(h)))] for w, h in zip(omega, H)])


def map_csv(smap):
    rows = [[float(t), float(k), float(smap.metric[i, j])] for i, t in enumerate(smap.tau_axis) for j, k in enumerate(smap.gain_axis)]
    return _csv(["tau_s", "gain", "metric"], rows)


def map_sidecar(smap):
    doc = {"kind": smap.kind, "tau_axis": [fmt(t) for t in smap.tau_axis], "gain_axis": [fmt(k) for k in smap.gain_axis],
           "missing": [list(c) for c in smap.missing]}
    return json.dumps(doc, indent=2) + "\n"


def crossings_csv(branches):
    rows = []
    for b in branches:
        for w, t, k in zip(b.omega, b.tau, b.K):
            rows.append([float(w), float(t), float(k), b.nu, b.mu])
    return _csv(["omega", "tau_cr", "k_cr", "branch_nu", "branch_mu"], rows)


def trajectory_csv(traj):
    rows = [[float(t), *map(float, traj.states[:, i]), *map(float, traj.algebraics[:, i])] for i, t in enumerate(traj.times)]
    return _csv(["t", *traj.state_names, *traj.alg_names], rows)


def stats_json(stats):
    out = {}
    for k, v in stats.items():
        if isinstance(v, (np.integer, bool, np.bool_)):
            v = v.item() if hasattr(v, "item") else v
        elif isinstance(v, (float, np.floating)):
            v = float(v)
        out[k] = v
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


def table_csv(header, rows):
    return _csv(header, rows)
