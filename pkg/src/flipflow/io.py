"""File formats: matrices, states, trajectories, results and event logs.

Floats are written with ``repr`` (shortest round-trip form) and JSON with
sorted keys, so identical data always produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import State
from .errors import ConfigError

RESULT_COLUMNS = ("seed", "T", "observable", "estimate", "reference", "abs_error")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps_json(obj))


def read_json(path, what="file"):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"{what} not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from None


def _reals(values, field, path):
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: field {field!r} must hold real numbers") from None
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path}: field {field!r} has non-finite entries")
    return arr


# --- matrices ----------------------------------------------------------------------

def read_matrix(path):
    """V from JSON ``{"n": N, "v": [N*N reals, row-major]}`` or headerless CSV."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"matrix file not found: {path}")
    if path.suffix.lower() == ".csv":
        return _read_matrix_csv(path)
    d = read_json(path, "matrix file")
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object with fields 'n' and 'v'")
    for key in ("n", "v"):
        if key not in d:
            raise ConfigError(f"{path}: missing field {key!r}")
    n = d["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError(f"{path}: field 'n' must be a positive integer")
    v = _reals(d["v"], "v", path).reshape(-1)
    if v.size != n * n:
        raise ConfigError(f"{path}: field 'v' has {v.size} entries, expected n*n = {n * n}")
    return v.reshape(n, n)


def _read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ConfigError(f"{path}: expected {n} rows of {n} comma-separated reals")
    return _reals([[c.strip() for c in r] for r in rows], "v", path).astype(float)


def write_matrix(path, v):
    v = np.asarray(v, dtype=float)
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in v:
                w.writerow([_fmt(x) for x in row])
    else:
        write_json(path, {"n": int(v.shape[0]), "v": v.reshape(-1).tolist()})


# --- states ------------------------------------------------------------------------

def state_to_dict(psi):
    return {"q": psi.q.tolist(), "p": psi.p.tolist()}


def state_from_dict(d, where="state"):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object with fields 'q' and 'p'")
    for key in ("q", "p"):
        if key not in d:
            raise ConfigError(f"{where}: missing field {key!r}")
    q = _reals(d["q"], "q", where).reshape(-1)
    p = _reals(d["p"], "p", where).reshape(-1)
    if q.size != p.size:
        raise ConfigError(f"{where}: fields 'q' and 'p' differ in length")
    return State(q, p)


def read_state(path):
    return state_from_dict(read_json(path, "state file"), str(path))


def write_state(path, psi):
    write_json(path, state_to_dict(psi))


# --- CSV outputs -------------------------------------------------------------------

def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def trajectory_header(n):
    return ["t"] + [f"q{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)]


def write_trajectory(path, times, rows):
    """CSV ``t,q1..qN,p1..pN``; ``rows`` is an (m, 2N) array."""
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[1] // 2 if rows.ndim == 2 and rows.shape[1] else 0
    _write_rows(path, trajectory_header(n), ([t, *r] for t, r in zip(times, rows)))


def write_results(path, rows):
    """CSV ``seed,T,observable,estimate,reference,abs_error``."""
    _write_rows(path, RESULT_COLUMNS, rows)


def read_results(path):
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        out = []
        for r in rd:
            out.append({
                "seed": int(r["seed"]),
                "T": float(r["T"]),
                "observable": r["observable"],
                "estimate": float(r["estimate"]),
                "reference": float(r["reference"]),
                "abs_error": float(r["abs_error"]),
            })
        return out


def write_events(path, times, taus):
    """CSV ``t_m,tau_m`` for each flip."""
    _write_rows(path, ("t_m", "tau_m"), zip(times, taus))


def finite_or_none(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x
