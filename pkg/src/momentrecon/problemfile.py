"""Plain-text problem descriptions.

Grammar (``#`` starts a comment, blank lines ignored)::

    name <word>
    kind ocp | invariant          # default ocp
    dims <n> <m>
    time <t0> <tf | free> [<tmax>]  # ocp only; tmax bounds a free horizon
    box <coord> <lo> <hi>         # x1.., u1..
    x_init <v1> ... <vn>
    x_final <v1> ... <vn>         # ocp only
    dynamics <k>                  # opens the polynomial for f_k
    cost                          # opens h (ocp only)
    constraint                    # opens one path constraint g >= 0
    term <coeff> <a_0> ... <a_q-1>

Exponents in ``term`` lines are ordered (t, u1..um, x1..xn) for ``ocp`` and
(x1..xn) for ``invariant``. Terms attach to the most recently opened
polynomial. Optional ``trajectory <file>`` names a reference process CSV,
resolved relative to the spec file.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .moments import Box
from .oracle import OcpProblem
from .polynomial import Polynomial


class ProblemSpecError(ValueError):
    """Malformed problem description; message carries file:line:column."""


@dataclass(frozen=True)
class InvariantProblem:
    """Autonomous dynamics x' = f(x) on a box, studied through its invariant measure."""

    n: int
    f: tuple
    x_box: Box
    x_init: np.ndarray
    name: str = "invariant"


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    problem: object  # OcpProblem or InvariantProblem
    trajectory: Path | None = None

    @property
    def name(self) -> str:
        return self.problem.name


def _tokens(line: str):
    """Split into (token, 1-based column) pairs."""
    out, col, cur, start = [], 0, "", 0
    for col, ch in enumerate(line, 1):
        if ch.isspace():
            if cur:
                out.append((cur, start))
                cur = ""
        else:
            if not cur:
                start = col
            cur += ch
    if cur:
        out.append((cur, start))
    return out


def parse_problem(text: str, where: str = "<string>", base_dir: Path | None = None) -> ProblemSpec:
    fields: dict = {"kind": "ocp", "name": "problem"}
    boxes: dict[str, tuple[float, float]] = {}
    polys: dict = {}
    constraints: list = []
    current = None
    trajectory = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        toks = _tokens(raw.split("#", 1)[0])
        if not toks:
            continue
        (key, _), args = toks[0], toks[1:]

        def fail(msg, col=None):
            col = toks[0][1] if col is None else col
            raise ProblemSpecError(f"{where}:{lineno}:{col}: {msg}")

        def num(i, conv=float):
            if i >= len(args):
                fail(f"'{key}' needs more values")
            tok, col = args[i]
            try:
                return conv(tok)
            except ValueError:
                fail(f"cannot read '{tok}' as a number", col)

        if key in ("name", "kind"):
            if len(args) != 1:
                fail(f"'{key}' takes one word")
            fields[key] = args[0][0]
            if key == "kind" and fields[key] not in ("ocp", "invariant"):
                fail(f"unknown kind '{fields[key]}'", args[0][1])
        elif key == "dims":
            fields["dims"] = (num(0, int), num(1, int))
            if len(args) != 2 or min(fields["dims"]) < 0 or fields["dims"][0] < 1:
                fail("dims needs <n >= 1> <m >= 0>")
        elif key == "time":
            t0 = num(0)
            if len(args) < 2:
                fail("time needs <t0> <tf|free> [<tmax>]")
            tf = None if args[1][0] == "free" else num(1)
            tmax = num(2) if len(args) > 2 else tf
            if tmax is None:
                fail("free final time needs an upper bound <tmax>")
            fields["time"] = (t0, tf, tmax)
        elif key == "box":
            if len(args) != 3:
                fail("box needs <coord> <lo> <hi>")
            boxes[args[0][0]] = (num(1), num(2))
        elif key in ("x_init", "x_final"):
            fields[key] = [num(i) for i in range(len(args))]
        elif key == "dynamics":
            k = num(0, int)
            if k < 1:
                fail("dynamics index starts at 1", args[0][1])
            current = ("f", k)
            if current in polys:
                fail(f"dynamics {k} given twice")
            polys[current] = {}
        elif key == "cost":
            current = ("h", 0)
            polys[current] = {}
        elif key == "constraint":
            current = ("g", len(constraints))
            constraints.append({})
            polys[current] = constraints[-1]
        elif key == "term":
            if current is None:
                fail("'term' before any dynamics/cost/constraint block")
            coeff = num(0)
            alpha = tuple(num(i, int) for i in range(1, len(args)))
            if any(a < 0 for a in alpha):
                fail("negative exponent")
            polys[current][alpha] = polys[current].get(alpha, 0.0) + coeff
            fields.setdefault("_term_lines", []).append((lineno, len(alpha), toks[0][1]))
        elif key == "trajectory":
            if len(args) != 1:
                fail("trajectory takes one path")
            trajectory = Path(args[0][0])
            if base_dir is not None and not trajectory.is_absolute():
                trajectory = base_dir / trajectory
        else:
            fail(f"unknown keyword '{key}'")

    def need(k):
        if k not in fields:
            raise ProblemSpecError(f"{where}: missing '{k}'")
        return fields[k]

    n, m = need("dims")
    kind = fields["kind"]
    if kind == "invariant" and m:
        raise ProblemSpecError(f"{where}: invariant problems have no controls (dims {n} 0)")
    nv = n if kind == "invariant" else 1 + m + n
    for lineno, q, col in fields.get("_term_lines", []):
        if q != nv:
            raise ProblemSpecError(f"{where}:{lineno}:{col}: term has {q} exponents, expected {nv}")

    def box_of(prefix, count):
        lo, hi = [], []
        for i in range(1, count + 1):
            name = f"{prefix}{i}"
            if name not in boxes:
                raise ProblemSpecError(f"{where}: missing 'box {name}'")
            lo.append(boxes[name][0])
            hi.append(boxes[name][1])
        return Box(lo, hi)

    try:
        x_box = box_of("x", n)
        x_init = np.array(need("x_init"), dtype=float)
        f = []
        for k in range(1, n + 1):
            if ("f", k) not in polys:
                raise ProblemSpecError(f"{where}: missing 'dynamics {k}'")
            f.append(Polynomial(polys[("f", k)], nv))
        if kind == "invariant":
            if len(x_init) != n:
                raise ProblemSpecError(f"{where}: x_init has {len(x_init)} entries, expected {n}")
            prob = InvariantProblem(n, tuple(f), x_box, x_init, fields["name"])
        else:
            t0, tf, tmax = need("time")
            if ("h", 0) not in polys:
                raise ProblemSpecError(f"{where}: missing 'cost' block")
            prob = OcpProblem(
                n=n,
                m=m,
                f=tuple(f),
                h=Polynomial(polys[("h", 0)], nv),
                t_initial=t0,
                t_final=tf,
                x_init=x_init,
                x_final=np.array(need("x_final"), dtype=float),
                x_box=x_box,
                u_box=box_of("u", m) if m else None,
                t_box=Box([t0], [tmax]),
                constraints=tuple(Polynomial(g, nv) for g in constraints),
                name=fields["name"],
            )
    except ProblemSpecError:
        raise
    except ValueError as exc:
        raise ProblemSpecError(f"{where}: {exc}") from None
    return ProblemSpec(kind, prob, trajectory)


def load_problem(path) -> ProblemSpec:
    path = Path(path)
    return parse_problem(path.read_text(encoding="utf-8"), str(path), path.parent)


def format_problem(prob, trajectory: str | None = None) -> str:
    """Inverse of :func:`parse_problem` (up to comments and term order)."""
    lines = [f"name {prob.name}"]
    if isinstance(prob, InvariantProblem):
        lines += ["kind invariant", f"dims {prob.n} 0"]
        boxes = [(f"x{i + 1}", lo, hi) for i, (lo, hi) in enumerate(zip(prob.x_box.lo, prob.x_box.hi))]
    else:
        lines += ["kind ocp", f"dims {prob.n} {prob.m}"]
        tf = "free" if prob.t_final is None else repr(float(prob.t_final))
        lines.append(f"time {float(prob.t_initial)!r} {tf} {float(prob.t_box.hi[0])!r}")
        boxes = [(f"x{i + 1}", lo, hi) for i, (lo, hi) in enumerate(zip(prob.x_box.lo, prob.x_box.hi))]
        if prob.m:
            boxes += [(f"u{j + 1}", lo, hi) for j, (lo, hi) in enumerate(zip(prob.u_box.lo, prob.u_box.hi))]
    lines += [f"box {name} {float(lo)!r} {float(hi)!r}" for name, lo, hi in boxes]
    lines.append("x_init " + " ".join(repr(float(v)) for v in prob.x_init))
    if not isinstance(prob, InvariantProblem):
        lines.append("x_final " + " ".join(repr(float(v)) for v in prob.x_final))

    def block(head, p):
        lines.append(head)
        for alpha, c in sorted(p.terms.items()):
            lines.append(f"term {c!r} " + " ".join(map(str, alpha)))

    for k, fk in enumerate(prob.f, 1):
        block(f"dynamics {k}", fk)
    if not isinstance(prob, InvariantProblem):
        block("cost", prob.h)
        for g in prob.constraints:
            block("constraint", g)
    if trajectory:
        lines.append(f"trajectory {trajectory}")
    return "\n".join(lines) + "\n"
