"""CSV/JSON writers and readers for run artefacts.

Floats are written with ``repr`` (shortest round-trip form), so reading a file
back reproduces the arrays bit for bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .stl.semantics import Trajectory

HISTORY_COLUMNS = ("k", "lambda", "bestC", "bestRho", "medianJ", "meanC", "meanRho")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))


def write_history(path, history) -> None:
    write_table(path, HISTORY_COLUMNS, (
        (h.k, h.lam, h.best_C, h.best_rho, h.median_J, h.mean_C, h.mean_rho) for h in history
    ))


def read_history(path) -> dict[str, np.ndarray]:
    header, data = read_table(path)
    return {name: data[:, i] for i, name in enumerate(header)}


def write_trajectory(path, tr: Trajectory) -> None:
    n, m = tr.states.shape[1], tr.inputs.shape[1]
    header = ["t"] + [f"x{i}" for i in range(n)] + [f"u{j}" for j in range(m)]
    pad = np.full((1, m), np.nan)  # no input is applied at the final sample
    inputs = np.vstack([tr.inputs, pad])
    write_table(path, header, (
        [k * tr.dt, *tr.states[k], *inputs[k]] for k in range(tr.states.shape[0])
    ))


def read_trajectory(path, dt: float | None = None) -> Trajectory:
    header, data = read_table(path)
    n = sum(h.startswith("x") for h in header)
    if dt is None:
        dt = float(data[1, 0] - data[0, 0])
    return Trajectory(dt, data[:, 1:1 + n], data[:-1, 1 + n:])


def write_funnels(path, funnels, names, dt: float) -> None:
    header = ["t"]
    for name in names:
        header += [f"gamma_{name}", f"Gamma_{name}"]
    L = len(funnels[0])
    cols = [np.arange(L) * dt]
    for f in funnels:
        cols += [f.gamma, f.Gamma]
    write_table(path, header, np.column_stack(cols))


def read_funnels(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    header, data = read_table(path)
    out = {}
    for i in range(1, len(header), 2):
        out[header[i][len("gamma_"):]] = (data[:, i], data[:, i + 1])
    return out


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
