"""Plain-text moment files.

Grammar (one record per line, ``#`` starts a comment)::

    dims <n> <m>
    degree <2r>
    box <coord> <lo> <hi>        # one per coordinate, order t, u.., x..
    source <tag>                 # oracle | external-sdp
    order <r>                    # optional
    problem <name>               # optional
    y <alpha_0> ... <alpha_q-1> <value>

Unknown header keys are ignored. Values are written with 18 significant
digits so a save/load cycle is bit-exact.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .moments import Box, MomentVector, enumerate_indices
from .oracle import coordinate_names


class MomentFileError(ValueError):
    """Malformed or inconsistent moment file."""


def _fmt(v: float) -> str:
    return format(float(v), ".17e")


def format_moments(y: MomentVector) -> str:
    lines = [f"dims {y.n} {y.m}", f"degree {y.degree}"]
    for name, lo, hi in zip(y.coords, y.box.lo, y.box.hi):
        lines.append(f"box {name} {_fmt(lo)} {_fmt(hi)}")
    lines.append(f"source {y.meta.get('source', 'oracle')}")
    for key in ("order", "problem"):
        if key in y.meta:
            lines.append(f"{key} {y.meta[key]}")
    for alpha, v in zip(y.indices, y.values):
        lines.append("y " + " ".join(map(str, alpha)) + " " + _fmt(v))
    return "\n".join(lines) + "\n"


def save_moments(y: MomentVector, path) -> None:
    Path(path).write_text(format_moments(y), encoding="utf-8")


def parse_moments(text: str, where: str = "<string>") -> MomentVector:
    dims = degree = None
    boxes: list[tuple[str, float, float]] = []
    meta: dict = {}
    entries: dict[tuple[int, ...], float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        try:
            if key == "dims":
                if len(rest) != 2:
                    raise MomentFileError("dims needs <n> <m>")
                dims = (int(rest[0]), int(rest[1]))
            elif key == "degree":
                degree = int(rest[0])
                if degree < 0 or degree % 2:
                    raise MomentFileError(f"degree must be even and nonnegative, got {degree}")
            elif key == "box":
                if len(rest) != 3:
                    raise MomentFileError("box needs <coord> <lo> <hi>")
                boxes.append((rest[0], float(rest[1]), float(rest[2])))
            elif key in ("source", "problem"):
                meta[key] = " ".join(rest)
            elif key == "order":
                meta[key] = int(rest[0])
            elif key == "y":
                alpha = tuple(int(a) for a in rest[:-1])
                if any(a < 0 for a in alpha):
                    raise MomentFileError(f"negative exponent in {alpha}")
                if alpha in entries:
                    raise MomentFileError(f"duplicate moment index {alpha}")
                entries[alpha] = float(rest[-1])
        except MomentFileError as exc:
            raise MomentFileError(f"{where}:{lineno}: {exc}") from None
        except (ValueError, IndexError) as exc:
            raise MomentFileError(f"{where}:{lineno}: cannot parse '{raw.strip()}': {exc}") from None

    if dims is None or degree is None:
        raise MomentFileError(f"{where}: missing 'dims' or 'degree' header")
    names = tuple(b[0] for b in boxes)
    has_time = bool(names) and names[0] == "t"
    expected = coordinate_names(dims[0], dims[1], time=has_time)
    if names != expected:
        raise MomentFileError(f"{where}: box coordinates {names} do not match dims {dims} (expected {expected})")
    q = len(names)
    for alpha in entries:
        if len(alpha) != q:
            raise MomentFileError(f"{where}: index {alpha} has length {len(alpha)}, expected {q}")
        if sum(alpha) > degree:
            raise MomentFileError(f"{where}: index {alpha} exceeds degree {degree}")
    if (0,) * q not in entries:
        raise MomentFileError(f"{where}: missing zero-index moment")
    values = []
    for alpha in enumerate_indices(q, degree):
        if alpha not in entries:
            raise MomentFileError(f"{where}: missing moment {alpha}")
        values.append(entries[alpha])
    meta.setdefault("source", "oracle")
    box = Box([b[1] for b in boxes], [b[2] for b in boxes])
    return MomentVector(names, degree, np.array(values), box, meta)


def load_moments(path) -> MomentVector:
    path = Path(path)
    return parse_moments(path.read_text(encoding="utf-8"), str(path))
