"""Finite-difference Newton/continuation solver for the Robin problem.

Interior nodes carry the normalized operator equation, boundary nodes the
Robin condition u_nu + beta * u = phi with a second-order one-sided normal
stencil (corner and edge nodes average the conditions of their outward axes).
The unknown is the full grid field including boundary values, so the Jacobian
is square.  Damped Newton keeps every accepted iterate strictly admissible;
the continuation driver walks the data from an exactly solvable paraboloid
problem to the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import BoxGrid, ScalarField
from .operator import OperatorSpec, grad_at_eta
from .problem import ProblemSpec, manufactured_problem, paraboloid
from .symfun import ConeError, sigma_all

__all__ = [
    "NewtonOptions",
    "IterationRecord",
    "StageRecord",
    "Diagnostics",
    "SolveReport",
    "NonconvergenceError",
    "ContinuationError",
    "hessian_at",
    "residual",
    "jacobian",
    "newton_solve",
    "continuation_solve",
    "diagnostics",
]

_MIN_CONTINUATION_STEP = 1.0 / 256.0


@dataclass(frozen=True)
class NewtonOptions:
    """Damped-Newton controls.  tol=None means 1e-10 * (1 + max |psi_tilde|)."""

    tol: float | None = None
    max_iter: int = 50
    armijo: float = 1e-4
    min_step: float = 1e-12


@dataclass(frozen=True)
class IterationRecord:
    residual_norm: float
    step: float
    min_margin: float


@dataclass(frozen=True)
class StageRecord:
    t: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class Diagnostics:
    """Discrete suprema tracked as regressions along solves.

    sup_gradient is the largest nodal |grad u| (one-sided at faces),
    sup_hessian_eig the largest interior Hessian eigenvalue, and
    sup_normal_second the largest one-sided second normal difference on the
    boundary.  The continuous estimates these mirror have non-explicit
    constants, so the values are reported, never asserted against.
    """

    sup_gradient: float
    sup_hessian_eig: float
    sup_normal_second: float

    def to_dict(self) -> dict:
        return {
            "sup_gradient": self.sup_gradient,
            "sup_hessian_eig": self.sup_hessian_eig,
            "sup_normal_second": self.sup_normal_second,
        }


@dataclass
class SolveReport:
    """Per-iteration history, continuation path, and final diagnostics."""

    converged: bool = False
    residual_norm: float = float("nan")
    final_margin: float = float("nan")
    iterations: list[IterationRecord] = field(default_factory=list)
    continuation: list[StageRecord] = field(default_factory=list)
    diagnostics: Diagnostics | None = None

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "residual_norm": self.residual_norm,
            "final_margin": self.final_margin,
            "iterations": [
                {"residual_norm": r.residual_norm, "step": r.step, "min_margin": r.min_margin}
                for r in self.iterations
            ],
            "continuation": [
                {"t": s.t, "converged": s.converged, "iterations": s.iterations} for s in self.continuation
            ],
            "diagnostics": self.diagnostics.to_dict() if self.diagnostics else None,
        }


class NonconvergenceError(RuntimeError):
    """Newton failed (line-search underflow); carries the partial report."""

    def __init__(self, message: str, report: SolveReport):
        super().__init__(message)
        self.report = report


class ContinuationError(NonconvergenceError):
    """The continuation path could not reach t = 1 above the minimum step."""


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------


def _axis_slice(n: int, axis: int, index) -> tuple:
    sl = [slice(None)] * n
    sl[axis] = index
    return tuple(sl)


def hessian_at(u: ScalarField, node: tuple[int, ...]) -> np.ndarray:
    """Central-difference Hessian of u at one interior node (exact on quadratics)."""
    grid = u.grid
    node = tuple(int(i) for i in node)
    if len(node) != grid.n or any(not 1 <= i <= grid.m - 2 for i in node):
        raise ValueError(f"node {node} is not interior to the grid")
    v = u.values
    h = grid.h
    n = grid.n
    out = np.empty((n, n))

    def at(shift):
        return v[tuple(i + s for i, s in zip(node, shift))]

    zero = (0,) * n
    for i in range(n):
        ei = tuple(1 if a == i else 0 for a in range(n))
        mi = tuple(-1 if a == i else 0 for a in range(n))
        out[i, i] = (at(ei) - 2.0 * at(zero) + at(mi)) / h[i] ** 2
        for j in range(i + 1, n):
            def pm(si, sj):
                return tuple(si if a == i else sj if a == j else 0 for a in range(n))

            val = (at(pm(1, 1)) - at(pm(1, -1)) - at(pm(-1, 1)) + at(pm(-1, -1))) / (4.0 * h[i] * h[j])
            out[i, j] = val
            out[j, i] = val
    return out


def _interior_hessians(values: np.ndarray, grid: BoxGrid) -> np.ndarray:
    """Hessians at all interior nodes, shape (m-2,)*n + (n, n)."""
    n, m, h = grid.n, grid.m, grid.h

    def block(shift):
        return values[tuple(slice(1 + s, m - 1 + s) for s in shift)]

    center = block((0,) * n)
    out = np.empty(center.shape + (n, n))
    for i in range(n):
        sp_i = tuple(1 if a == i else 0 for a in range(n))
        sm_i = tuple(-1 if a == i else 0 for a in range(n))
        out[..., i, i] = (block(sp_i) - 2.0 * center + block(sm_i)) / h[i] ** 2
        for j in range(i + 1, n):
            def shift(si, sj):
                return tuple(si if a == i else sj if a == j else 0 for a in range(n))

            val = (block(shift(1, 1)) - block(shift(1, -1)) - block(shift(-1, 1)) + block(shift(-1, -1))) / (
                4.0 * h[i] * h[j]
            )
            out[..., i, j] = val
            out[..., j, i] = val
    return out


def _interior_eta(values: np.ndarray, grid: BoxGrid, want_vectors: bool = False):
    """Eigen-decomposition of trace(H) I - H at all interior nodes."""
    hess = _interior_hessians(values, grid)
    tr = np.trace(hess, axis1=-2, axis2=-1)
    s = tr[..., None, None] * np.eye(grid.n) - hess
    if want_vectors:
        return np.linalg.eigh(s)
    return np.linalg.eigvalsh(s)


def _margins(eta: np.ndarray, op: OperatorSpec) -> np.ndarray:
    return sigma_all(eta, op.cone_order)[..., 1:].min(axis=-1)


def _worst_node(margins: np.ndarray) -> tuple[tuple[int, ...], float]:
    flat = int(np.argmin(margins))
    node = tuple(int(i) + 1 for i in np.unravel_index(flat, margins.shape))
    return node, float(margins.reshape(-1)[flat])


def _value_from_eta(eta: np.ndarray, op: OperatorSpec) -> np.ndarray:
    e = sigma_all(eta, op.cone_order)
    if op.l is None:
        return e[..., op.k] ** (1.0 / op.k)
    return (e[..., op.k] / e[..., op.l]) ** (1.0 / op.degree)


def _boundary_residual(values: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """Robin residual on boundary nodes (zero on interior nodes)."""
    grid = spec.grid
    n, m, h = grid.n, grid.m, grid.h
    dn = np.zeros(grid.shape)
    for a in range(n):
        def at(i):
            return values[_axis_slice(n, a, i)]

        dn[_axis_slice(n, a, 0)] += (3.0 * at(0) - 4.0 * at(1) + at(2)) / (2.0 * h[a])
        dn[_axis_slice(n, a, m - 1)] += (3.0 * at(m - 1) - 4.0 * at(m - 2) + at(m - 3)) / (2.0 * h[a])
    fc = grid.face_count()
    mask = fc > 0
    out = np.zeros(grid.shape)
    out[mask] = dn[mask] / fc[mask] + spec.beta * values[mask] - spec.phi.values[mask]
    return out


def residual(u: ScalarField, spec: ProblemSpec) -> ScalarField:
    """Equation residual at every node; raises ConeError on any inadmissible node."""
    eta = _interior_eta(u.values, spec.grid)
    margins = _margins(eta, spec.op)
    if margins.min() <= 0.0:
        node, worst = _worst_node(margins)
        raise ConeError(
            f"inadmissible iterate at interior node {node} (cone margin {worst:.6g})",
            node=node,
            value=worst,
        )
    return ScalarField(spec.grid, _residual_values(u.values, eta, spec))


def _residual_values(values: np.ndarray, eta: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    out = _boundary_residual(values, spec)
    psi_t = spec.psi_tilde()
    core = spec.grid.interior()
    out[core] = _value_from_eta(eta, spec.op) - psi_t[core]
    return out


def jacobian(u: ScalarField, spec: ProblemSpec) -> sp.csr_matrix:
    """Sparse derivative of the residual with respect to every nodal value."""
    grid = spec.grid
    n, m, h = grid.n, grid.m, grid.h
    values = u.values

    eta, q = _interior_eta(values, grid, want_vectors=True)
    margins = _margins(eta, spec.op)
    if margins.min() <= 0.0:
        node, worst = _worst_node(margins)
        raise ConeError(
            f"inadmissible iterate at interior node {node} (cone margin {worst:.6g})",
            node=node,
            value=worst,
        )
    g = grad_at_eta(eta, spec.op)
    a = np.einsum("...ij,...j,...kj->...ik", q, g, q)
    tr = np.trace(a, axis1=-2, axis2=-1)
    fw = tr[..., None, None] * np.eye(n) - a  # dF/dr at each interior node

    flat = grid.flat_index()
    core = grid.interior()
    idx = flat[core].ravel()
    strides = [m ** (n - 1 - axis) for axis in range(n)]

    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    center = np.zeros(idx.shape)
    for i in range(n):
        dii = fw[..., i, i].ravel()
        center -= 2.0 * dii / h[i] ** 2
        add(idx, idx + strides[i], dii / h[i] ** 2)
        add(idx, idx - strides[i], dii / h[i] ** 2)
        for j in range(i + 1, n):
            dij = fw[..., i, j].ravel() / (2.0 * h[i] * h[j])
            add(idx, idx + strides[i] + strides[j], dij)
            add(idx, idx - strides[i] - strides[j], dij)
            add(idx, idx + strides[i] - strides[j], -dij)
            add(idx, idx - strides[i] + strides[j], -dij)
    add(idx, idx, center)

    fc = grid.face_count()
    for axis in range(n):
        sl = [slice(None)] * n
        for side in (0, 1):
            sl[axis] = 0 if side == 0 else m - 1
            face = flat[tuple(sl)].ravel()
            w = 1.0 / fc[tuple(sl)].ravel()
            sl[axis] = 1 if side == 0 else m - 2
            in1 = flat[tuple(sl)].ravel()
            sl[axis] = 2 if side == 0 else m - 3
            in2 = flat[tuple(sl)].ravel()
            add(face, face, 3.0 / (2.0 * h[axis]) * w)
            add(face, in1, -4.0 / (2.0 * h[axis]) * w)
            add(face, in2, 1.0 / (2.0 * h[axis]) * w)
    bidx = flat[grid.boundary_mask()]
    add(bidx, bidx, np.full(bidx.shape, spec.beta))

    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    return mat.tocsr()


# ---------------------------------------------------------------------------
# Newton and continuation
# ---------------------------------------------------------------------------


def newton_solve(u0: ScalarField, spec: ProblemSpec, opts: NewtonOptions | None = None):
    """Damped Newton from an admissible start.

    Solves J delta = -R with a sparse LU per iteration and halves the step
    until the trial iterate is strictly admissible at every interior node and
    the residual sup norm satisfies the Armijo decrease.  Terminates at
    opts.tol (residual sup norm) or opts.max_iter; returns (solution, report)
    with report.converged telling which.  A line-search step below
    opts.min_step raises NonconvergenceError.
    """
    opts = opts or NewtonOptions()
    grid = spec.grid
    if u0.grid != grid:
        raise ValueError("initial guess lives on a different grid")
    psi_t = spec.psi_tilde()
    tol = float(opts.tol) if opts.tol is not None else 1e-10 * (1.0 + float(np.abs(psi_t).max()))

    u = u0.values.copy()
    eta = _interior_eta(u, grid)
    margins = _margins(eta, spec.op)
    mmin = float(margins.min())
    if mmin <= 0.0:
        node, worst = _worst_node(margins)
        raise ConeError(
            f"initial guess inadmissible at interior node {node} (cone margin {worst:.6g})",
            node=node,
            value=worst,
        )
    res = _residual_values(u, eta, spec)
    rnorm = float(np.abs(res).max())

    report = SolveReport()
    for _ in range(opts.max_iter):
        if rnorm <= tol:
            break
        mat = jacobian(ScalarField(grid, u), spec)
        lu = spla.splu(mat.tocsc())
        delta = lu.solve(-res.ravel()).reshape(grid.shape)

        alpha = 1.0
        accepted = False
        while alpha >= opts.min_step:
            trial = u + alpha * delta
            eta_t = _interior_eta(trial, grid)
            margins_t = _margins(eta_t, spec.op)
            mmin_t = float(margins_t.min())
            if mmin_t > 0.0:
                res_t = _residual_values(trial, eta_t, spec)
                rnorm_t = float(np.abs(res_t).max())
                if rnorm_t <= (1.0 - opts.armijo * alpha) * rnorm:
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            report.converged = False
            report.residual_norm = rnorm
            report.final_margin = mmin
            raise NonconvergenceError(
                f"line search underflow (step < {opts.min_step:g}) at residual {rnorm:.3e}", report
            )
        u, res, rnorm, mmin = trial, res_t, rnorm_t, mmin_t
        report.iterations.append(IterationRecord(rnorm, alpha, mmin))

    report.converged = bool(rnorm <= tol)
    report.residual_norm = rnorm
    report.final_margin = mmin
    solution = ScalarField(grid, u)
    report.diagnostics = diagnostics(solution)
    return solution, report


def _default_targets() -> list[float]:
    return [round(0.1 * i, 12) for i in range(1, 11)]


def continuation_solve(spec: ProblemSpec, schedule: list[float] | None = None, opts: NewtonOptions | None = None):
    """Continuation from the exactly solvable paraboloid data to the target.

    The start u0 = |x - center|^2 / 2 solves the discrete problem with its own
    data (psi0, phi0) exactly.  Stage t blends the normalized data,
    psi_t = ((1-t) psi0_tilde + t psi_tilde) ** degree and
    phi_t = (1-t) phi0 + t phi, warm-starting each stage from the previous
    solution.  Nonconverged stages halve the step, down to 1/256; if the
    target data already equals the start data the path collapses to the
    single stage t = 1.
    """
    grid, op = spec.grid, spec.op
    spec0, u_start = manufactured_problem(paraboloid(grid.center), op, spec.beta, grid)
    deg = op.degree
    psi0_t = spec0.psi_tilde()
    psi1_t = spec.psi_tilde()
    phi0 = spec0.phi.values
    phi1 = spec.phi.values

    if schedule is None:
        schedule = spec.schedule
    if schedule is not None:
        targets = [float(t) for t in schedule]
        if targets[-1] != 1.0:
            targets.append(1.0)
    else:
        core = grid.interior()
        bmask = grid.boundary_mask()
        identical = np.array_equal(psi0_t[core], psi1_t[core]) and np.array_equal(phi0[bmask], phi1[bmask])
        targets = [1.0] if identical else _default_targets()

    report = SolveReport()
    u = u_start.values.copy()
    t_prev = 0.0
    i = 0
    while i < len(targets):
        t = targets[i]
        blend = (1.0 - t) * psi0_t + t * psi1_t
        stage_spec = ProblemSpec(
            grid,
            op,
            spec.beta,
            ScalarField(grid, blend**deg),
            ScalarField(grid, (1.0 - t) * phi0 + t * phi1),
        )
        try:
            sol, stage_rep = newton_solve(ScalarField(grid, u), stage_spec, opts)
            ok = stage_rep.converged
        except NonconvergenceError as exc:
            sol, stage_rep, ok = None, exc.report, False
        report.continuation.append(StageRecord(t, ok, len(stage_rep.iterations)))
        report.iterations.extend(stage_rep.iterations)
        if ok:
            u = sol.values
            t_prev = t
            i += 1
            report.residual_norm = stage_rep.residual_norm
            report.final_margin = stage_rep.final_margin
        else:
            step = 0.5 * (t - t_prev)
            if step < _MIN_CONTINUATION_STEP:
                report.converged = False
                raise ContinuationError(
                    f"continuation stalled at t = {t_prev:g} (minimum step {_MIN_CONTINUATION_STEP:g} reached)",
                    report,
                )
            targets.insert(i, t_prev + step)

    report.converged = True
    solution = ScalarField(grid, u)
    report.diagnostics = diagnostics(solution)
    return solution, report


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def diagnostics(u: ScalarField) -> Diagnostics:
    """Discrete gradient/Hessian/boundary suprema of a grid field."""
    grid = u.grid
    values = u.values
    n, m, h = grid.n, grid.m, grid.h

    grad_sq = np.zeros(grid.shape)
    for a in range(n):
        def at(i):
            return values[_axis_slice(n, a, i)]

        d = np.empty(grid.shape)
        d[_axis_slice(n, a, slice(1, m - 1))] = (at(slice(2, m)) - at(slice(0, m - 2))) / (2.0 * h[a])
        d[_axis_slice(n, a, 0)] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h[a])
        d[_axis_slice(n, a, m - 1)] = (3.0 * at(m - 1) - 4.0 * at(m - 2) + at(m - 3)) / (2.0 * h[a])
        grad_sq += d * d
    sup_gradient = float(np.sqrt(grad_sq).max())

    hess = _interior_hessians(values, grid)
    sup_hessian_eig = float(np.linalg.eigvalsh(hess)[..., -1].max())

    sup_normal_second = 0.0
    for a in range(n):
        def at(i):
            return values[_axis_slice(n, a, i)]

        lo = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h[a] ** 2
        hi = (2.0 * at(m - 1) - 5.0 * at(m - 2) + 4.0 * at(m - 3) - at(m - 4)) / h[a] ** 2
        sup_normal_second = max(sup_normal_second, float(np.abs(lo).max()), float(np.abs(hi).max()))

    return Diagnostics(sup_gradient, sup_hessian_eig, sup_normal_second)
