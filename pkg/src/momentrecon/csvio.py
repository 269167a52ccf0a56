"""CSV files for way-points, sampled processes and atomic measures.

Way-point and process files share one schema::

    coord,time,value,weight

For way-points ``weight`` is the atom mass behind the point; for a sampled
process it is the trapezoid quadrature weight of the sample, so the weights
of one coordinate add up to the duration. Atom dumps are
``<coord>,...,weight`` with one column per grid axis. Numbers are written
with 17 significant digits, enough for an exact round trip.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .oracle import SampledProcess
from .reconstruct import AtomicMeasure, CoordinateSeries

SERIES_HEADER = ["coord", "time", "value", "weight"]


class CsvFormatError(ValueError):
    pass


def _num(v) -> str:
    return format(float(v), ".17g")


def _coord_key(name: str):
    return (name[0], int(name[1:]))


def write_series_csv(path, series) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for s in series:
            for t, v, wt in zip(s.times, s.values, s.weights):
                w.writerow([s.coord, _num(t), _num(v), _num(wt)])


def _read_rows(path):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != SERIES_HEADER:
        raise CsvFormatError(f"{path}:1: expected header {','.join(SERIES_HEADER)}")
    out: dict[str, list] = {}
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != 4:
            raise CsvFormatError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
        name = row[0].strip()
        try:
            _coord_key(name)
            vals = [float(c) for c in row[1:]]
        except ValueError:
            raise CsvFormatError(f"{path}:{lineno}: cannot parse {row}") from None
        out.setdefault(name, []).append(vals)
    return out


def read_series_csv(path) -> list[CoordinateSeries]:
    groups = _read_rows(path)
    series = []
    for name in sorted(groups, key=_coord_key):
        a = np.array(groups[name])
        series.append(CoordinateSeries(name, a[:, 0], a[:, 1], a[:, 2]))
    return series


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def write_process_csv(path, proc: SampledProcess) -> None:
    names = [f"x{i + 1}" for i in range(proc.n)] + [f"u{j + 1}" for j in range(proc.m)]
    cols = [proc.states[:, i] for i in range(proc.n)]
    if proc.m:
        cols += [proc.controls[:, j] for j in range(proc.m)]
    wts = _trapezoid_weights(proc.times)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for name, col in zip(names, cols):
            for t, v, wt in zip(proc.times, col, wts):
                w.writerow([name, _num(t), _num(v), _num(wt)])


def read_process_csv(path) -> SampledProcess:
    """Sampled process from the way-point schema; all coordinates share times."""
    groups = _read_rows(path)
    states = sorted((k for k in groups if k.startswith("x")), key=_coord_key)
    controls = sorted((k for k in groups if k.startswith("u")), key=_coord_key)
    if not states:
        raise CsvFormatError(f"{path}: no state coordinates")
    times = np.array(groups[states[0]])[:, 0]
    cols = {}
    for name in states + controls:
        a = np.array(groups[name])
        if a.shape[0] != len(times) or not np.array_equal(a[:, 0], times):
            raise CsvFormatError(f"{path}: coordinate {name} is not sampled on the times of {states[0]}")
        cols[name] = a[:, 1]
    xs = np.column_stack([cols[k] for k in states])
    us = np.column_stack([cols[k] for k in controls]) if controls else None
    return SampledProcess(times, xs, us)


def write_atoms_csv(path, atoms: AtomicMeasure) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(atoms.names) + ["weight"])
        for p, wt in zip(atoms.points, atoms.weights):
            w.writerow([_num(v) for v in p] + [_num(wt)])


def read_atoms_csv(path) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    """Column names, points and weights of an atom dump."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][-1] != "weight":
        raise CsvFormatError(f"{path}:1: atom dump must end its header with 'weight'")
    try:
        a = np.array([[float(c) for c in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
    except ValueError as exc:
        raise CsvFormatError(f"{path}: {exc}") from None
    return tuple(rows[0][:-1]), a[:, :-1], a[:, -1]
