"""Problem descriptions: data fields, manufactured cases, and JSON problem files."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .expr import ExpressionError, compile_expression
from .grid import BoxGrid, ScalarField
from .operator import OperatorSpec
from .symfun import ConeError, sigma_all

__all__ = [
    "ProblemSpec",
    "ClosedFormField",
    "paraboloid",
    "perturbed_paraboloid",
    "manufactured_problem",
    "MANUFACTURED_CASES",
    "build_case",
    "ProblemFormatError",
    "load_problem",
]


@dataclass
class ProblemSpec:
    """One Robin problem: box grid, operator, coefficient beta, data psi and phi.

    ``psi`` is the raw right-hand side (the solver normalizes it to
    psi ** (1/degree)); ``phi`` is the boundary data sampled on the full grid
    with only boundary entries used.  beta must be positive and psi
    nonnegative everywhere.
    """

    grid: BoxGrid
    op: OperatorSpec
    beta: float
    psi: ScalarField
    phi: ScalarField
    schedule: list[float] | None = None

    def __post_init__(self):
        if self.op.n != self.grid.n:
            raise ValueError(f"operator dimension n={self.op.n} does not match grid n={self.grid.n}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.psi.values.min() < 0:
            raise ValueError("psi must be nonnegative everywhere")
        if self.schedule is not None:
            ts = [float(t) for t in self.schedule]
            if not ts or any(not 0 < t <= 1 for t in ts) or sorted(ts) != ts:
                raise ValueError("schedule must be an increasing list of t in (0, 1]")
            self.schedule = ts

    def psi_tilde(self) -> np.ndarray:
        """Normalized right-hand side psi ** (1/degree)."""
        return self.psi.values ** (1.0 / self.op.degree)


@dataclass
class ClosedFormField:
    """A scalar function with analytic gradient and Hessian, on points (N, n)."""

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]


def paraboloid(center) -> ClosedFormField:
    """u(x) = |x - center|^2 / 2, with identity Hessian everywhere."""
    c = np.asarray(center, dtype=float)
    n = c.size

    def value(p):
        d = p - c
        return 0.5 * (d * d).sum(axis=-1)

    def gradient(p):
        return p - c

    def hessian(p):
        return np.broadcast_to(np.eye(n), (p.shape[0], n, n)).copy()

    return ClosedFormField(value, gradient, hessian)


def perturbed_paraboloid(n: int, amplitude: float) -> ClosedFormField:
    """u(x) = |x|^2 / 2 + amplitude * prod_i sin(pi x_i)."""
    a = float(amplitude)

    def parts(p):
        s = np.sin(np.pi * p)
        c = np.cos(np.pi * p)
        return s, c

    def value(p):
        s, _ = parts(p)
        return 0.5 * (p * p).sum(axis=-1) + a * s.prod(axis=-1)

    def gradient(p):
        s, c = parts(p)
        grad = np.empty_like(p)
        for i in range(n):
            others = np.prod(np.delete(s, i, axis=-1), axis=-1)
            grad[:, i] = p[:, i] + a * np.pi * c[:, i] * others
        return grad

    def hessian(p):
        s, c = parts(p)
        hess = np.empty((p.shape[0], n, n))
        full = s.prod(axis=-1)
        for i in range(n):
            hess[:, i, i] = 1.0 - a * np.pi**2 * full
            for j in range(i + 1, n):
                keep = [x for x in range(n) if x not in (i, j)]
                rest = s[:, keep].prod(axis=-1) if keep else 1.0
                val = a * np.pi**2 * c[:, i] * c[:, j] * rest
                hess[:, i, j] = val
                hess[:, j, i] = val
        return hess

    return ClosedFormField(value, gradient, hessian)


def _boundary_normal_sum(grid: BoxGrid, grad_values: np.ndarray) -> np.ndarray:
    """Sum over a node's outward axes of the analytic normal derivative.

    grad_values has shape grid.shape + (n,); interior entries of the result
    are zero.
    """
    out = np.zeros(grid.shape)
    m, n = grid.m, grid.n
    for a in range(n):
        sl = [slice(None)] * n
        sl[a] = 0
        out[tuple(sl)] += -grad_values[tuple(sl) + (a,)]
        sl[a] = m - 1
        out[tuple(sl)] += grad_values[tuple(sl) + (a,)]
    return out


def manufactured_problem(u_star: ClosedFormField, op: OperatorSpec, beta: float, grid: BoxGrid):
    """Turn a closed-form field into the problem it solves exactly.

    psi is the raw operator value (sigma_k or the sigma quotient of the
    transformed analytic Hessian) at every node; phi is the outward normal
    derivative plus beta * u_star on the boundary, corner nodes averaging
    their axis conditions.  Rejects u_star unless it is admissible at every
    grid node.  Returns (ProblemSpec, u_star sampled on the grid).
    """
    pts = grid.points()
    hess = u_star.hessian(pts)
    tr = np.trace(hess, axis1=-2, axis2=-1)
    eta_mat = tr[:, None, None] * np.eye(grid.n) - hess
    eta = np.linalg.eigvalsh(eta_mat)
    e = sigma_all(eta, op.cone_order)
    margins = e[:, 1:].min(axis=-1)
    worst = int(np.argmin(margins))
    if margins[worst] <= 0:
        node = tuple(int(i) for i in np.unravel_index(worst, grid.shape))
        raise ConeError(
            f"manufactured field is inadmissible at node {node} (margin {margins[worst]:.6g})",
            value=float(margins[worst]),
            node=node,
        )
    if op.l is None:
        psi_vals = e[:, op.k]
    else:
        psi_vals = e[:, op.k] / e[:, op.l]
    psi = ScalarField(grid, psi_vals.reshape(grid.shape))

    u_vals = u_star.value(pts).reshape(grid.shape)
    grad = u_star.gradient(pts).reshape(grid.shape + (grid.n,))
    fc = grid.face_count()
    dn = _boundary_normal_sum(grid, grad)
    phi_vals = np.zeros(grid.shape)
    mask = fc > 0
    phi_vals[mask] = dn[mask] / fc[mask] + beta * u_vals[mask]
    phi = ScalarField(grid, phi_vals)

    return ProblemSpec(grid, op, beta, psi, phi), ScalarField(grid, u_vals)


@dataclass(frozen=True)
class _Case:
    n: int
    k: int
    l: int | None
    beta: float
    lo: tuple
    hi: tuple
    build_field: Callable[[], ClosedFormField]


MANUFACTURED_CASES = {
    "paraboloid": _Case(3, 2, None, 1.0, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), lambda: paraboloid((0.5, 0.5, 0.5))),
    "perturbed-paraboloid": _Case(
        3, 2, None, 1.0, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), lambda: perturbed_paraboloid(3, 0.05)
    ),
    "perturbed-paraboloid-2d": _Case(
        2, 1, None, 1.0, (0.0, 0.0), (1.0, 1.0), lambda: perturbed_paraboloid(2, 0.05)
    ),
}


def build_case(case_id: str, m: int):
    """Instantiate a named manufactured case on an m-per-axis grid."""
    if case_id not in MANUFACTURED_CASES:
        raise KeyError(f"unknown manufactured case {case_id!r}; known: {sorted(MANUFACTURED_CASES)}")
    case = MANUFACTURED_CASES[case_id]
    grid = BoxGrid(case.lo, case.hi, m)
    op = OperatorSpec(case.n, case.k, case.l)
    return manufactured_problem(case.build_field(), op, case.beta, grid)


# ---------------------------------------------------------------------------
# problem files
# ---------------------------------------------------------------------------


class ProblemFormatError(ValueError):
    """A problem file is malformed or fails validation."""


def _field_from_json(payload, grid: BoxGrid, name: str) -> ScalarField:
    if not isinstance(payload, dict) or "kind" not in payload:
        raise ProblemFormatError(f"field '{name}' must be an object with a 'kind'")
    kind = payload["kind"]
    if kind == "constant":
        if "value" not in payload:
            raise ProblemFormatError(f"field '{name}': constant kind needs 'value'")
        return ScalarField.constant(grid, float(payload["value"]))
    if kind == "expression":
        if "expr" not in payload:
            raise ProblemFormatError(f"field '{name}': expression kind needs 'expr'")
        try:
            fn, used = compile_expression(payload["expr"])
        except ExpressionError as exc:
            raise ProblemFormatError(f"field '{name}': {exc}") from exc
        allowed = {f"x{i + 1}" for i in range(grid.n)}
        bad = sorted(set(used) - allowed)
        if bad:
            raise ProblemFormatError(f"field '{name}': variable {bad[0]!r} undefined for n={grid.n}")
        pts = grid.points()
        env = {f"x{i + 1}": pts[:, i] for i in range(grid.n)}
        vals = np.broadcast_to(np.asarray(fn(env), dtype=float), (grid.size,))
        return ScalarField(grid, vals.reshape(grid.shape))
    if kind == "grid":
        vals = np.asarray(payload.get("values", []), dtype=float)
        if vals.size != grid.size:
            raise ProblemFormatError(
                f"field '{name}': grid kind needs {grid.size} values (got {vals.size})"
            )
        return ScalarField(grid, vals.reshape(grid.shape))
    raise ProblemFormatError(f"field '{name}': unknown kind {kind!r}")


def load_problem(path) -> ProblemSpec:
    """Load and validate a JSON problem file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem file must contain a JSON object")

    for key in ("n", "k", "beta", "box", "psi", "phi"):
        if key not in doc:
            raise ProblemFormatError(f"missing required field '{key}'")
    box = doc["box"]
    if not isinstance(box, dict) or not all(key in box for key in ("lo", "hi", "m")):
        raise ProblemFormatError("'box' must be an object with 'lo', 'hi' and 'm'")
    try:
        grid = BoxGrid(tuple(box["lo"]), tuple(box["hi"]), int(box["m"]))
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"invalid box: {exc}") from exc
    if grid.n != int(doc["n"]):
        raise ProblemFormatError(f"'n' = {doc['n']} does not match box dimension {grid.n}")
    try:
        op = OperatorSpec(int(doc["n"]), int(doc["k"]), int(doc["l"]) if "l" in doc and doc["l"] is not None else None)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"invalid operator: {exc}") from exc

    psi = _field_from_json(doc["psi"], grid, "psi")
    phi = _field_from_json(doc["phi"], grid, "phi")
    schedule = doc.get("schedule")
    try:
        return ProblemSpec(grid, op, float(doc["beta"]), psi, phi, schedule)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(str(exc)) from exc
