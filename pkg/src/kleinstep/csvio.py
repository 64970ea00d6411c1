"""CSV and snapshot writers with a fixed, locale-independent number format."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .fv import FVState, charge_density, current_density

SNAPSHOT_COLUMNS = ("x", "re_phi", "im_phi", "re_chi", "im_chi", "rho", "j")


def fmt(v) -> str:
    """15 significant digits; booleans, ints and strings pass through."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v) + 0.0  # no "-0"
        if math.isnan(v):
            return "nan"
        return format(v, ".15g")
    return "" if v is None else str(v)


def write_csv(stream: IO[str], columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, header has {len(columns)}")
        w.writerow([fmt(v) for v in row])


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def snapshot_rows(state: FVState):
    rho = charge_density(state)
    j = current_density(state)
    x = state.grid.x
    for k in range(state.grid.n):
        yield (x[k], state.phi[k].real, state.phi[k].imag, state.chi[k].real, state.chi[k].imag, rho[k], j[k])


def write_snapshot(path: str | Path, state: FVState) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# t = {fmt(state.t)}\n")
        write_csv(fh, SNAPSHOT_COLUMNS, snapshot_rows(state))


def write_snapshots(directory: str | Path, states: Sequence[FVState]) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, s in enumerate(states):
        p = d / f"snapshot_{i:05d}.csv"
        write_snapshot(p, s)
        paths.append(p)
    return paths


def read_snapshot(path: str | Path) -> tuple[float, dict[str, np.ndarray]]:
    with open(path) as fh:
        first = fh.readline()
        t = float(first.split("=", 1)[1])
        data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
    return t, {name: data[:, i] for i, name in enumerate(SNAPSHOT_COLUMNS)}
