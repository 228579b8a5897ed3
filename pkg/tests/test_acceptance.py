"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  Randomized identity checks
use cone-stream samples shifted one unit up the diagonal ray so sigma_k is
well conditioned; the inequality sweeps run on the raw stream, which
deliberately grazes the cone boundary.
"""

import itertools
import json
import math
import time
from pathlib import Path

import numpy as np

from hessneumann.cli import main
from hessneumann.ellipticity import (
    maclaurin_bound,
    maclaurin_ratio,
    sample_block,
    sweep_ellipticity_ratio,
    sweep_maclaurin_ratio,
    sweep_trace_bound,
    trace_lower_bound,
)
from hessneumann.grid import BoxGrid, ScalarField
from hessneumann.operator import OperatorSpec, f_grad, f_grad_matrix, f_value, lambda_from_eta
from hessneumann.problem import build_case, manufactured_problem, paraboloid
from hessneumann.solver import continuation_solve, newton_solve, residual
from hessneumann.symfun import sigma

REPO = Path(__file__).resolve().parent.parent
SEED = 20240809

PURE = [(n, k) for n in range(2, 7) for k in range(1, n)]
QUOTIENT = [(n, k, l) for n in range(2, 7) for k in range(1, n) for l in range(1, k)]


def _passed(num, desc, t0):
    print(f"ACCEPTANCE {num:02d} {desc}: PASS ({time.perf_counter() - t0:.1f}s)")


def deep_lambdas(n, cone, count, seed):
    """Well-conditioned admissible samples: cone stream + unit diagonal shift."""
    return lambda_from_eta(sample_block(n, cone, seed=seed, scale=1.0, start=0, count=count) + 1.0)


def test_criterion_01_sigma_brute_force_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    for n in range(2, 9):
        vals = rng.standard_normal((10000, n))
        for k in range(n + 1):
            got = sigma(vals, k)
            if k == 0:
                assert (got == 1.0).all()
                continue
            combos = np.array(list(itertools.combinations(range(n), k)))
            terms = vals[:, combos].prod(axis=-1)
            want = terms.sum(axis=-1)
            scale = np.maximum(1.0, np.abs(terms).sum(axis=-1))
            assert (np.abs(got - want) <= 1e-12 * scale).all()
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    _passed(1, "sigma matches subset enumeration (n <= 8, 1e4 vectors per n)", t0)


def test_criterion_02_euler_homogeneity_identity():
    t0 = time.perf_counter()
    for n, k in PURE:
        spec = OperatorSpec(n, k)
        lam = deep_lambdas(n, k, 10000, SEED + k)
        fg = f_grad(lam, spec)
        euler = (fg * lam).sum(axis=-1)
        value = f_value(lam, spec)
        assert (np.abs(euler - value) <= 1e-11 * np.abs(value)).all()
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    _passed(2, "Euler identity sum f_i lam_i = f at rel 1e-11 (1e4 per (n,k))", t0)


def test_criterion_03_gradients_match_finite_differences():
    t0 = time.perf_counter()
    for cfg in PURE + QUOTIENT:
        n, k, l = cfg if len(cfg) == 3 else (*cfg, None)
        spec = OperatorSpec(n, k, l)
        lam = deep_lambdas(n, spec.cone_order, 1000, SEED + 7 * k + (l or 0))
        fg = f_grad(lam, spec)
        for i in range(n):
            h = 1e-5 * (1.0 + np.abs(lam[:, i]))
            up, dn = lam.copy(), lam.copy()
            up[:, i] += h
            dn[:, i] -= h
            fd = (f_value(up, spec) - f_value(dn, spec)) / (2.0 * h)
            assert (np.abs(fg[:, i] - fd) <= 1e-6 * np.maximum(np.abs(fd), 1e-3)).all()

    rng = np.random.default_rng(SEED)
    for cfg in PURE + [(3, 2, 1), (4, 3, 1), (5, 3, 2), (6, 4, 2), (6, 5, 3)]:
        n, k, l = cfg if len(cfg) == 3 else (*cfg, None)
        spec = OperatorSpec(n, k, l)
        lam = deep_lambdas(n, spec.cone_order, 1000, SEED + 11 * k + 3 * (l or 0))
        q, r = np.linalg.qr(rng.standard_normal((1000, n, n)))
        mats = np.einsum("...ij,...j,...kj->...ik", q, lam, q)
        mats = 0.5 * (mats + np.swapaxes(mats, -1, -2))
        e = rng.standard_normal((1000, n, n))
        e = 0.5 * (e + np.swapaxes(e, -1, -2))
        step = 1e-5
        f_up = f_value(np.linalg.eigvalsh(mats + step * e), spec)
        f_dn = f_value(np.linalg.eigvalsh(mats - step * e), spec)
        fd = (f_up - f_dn) / (2.0 * step)
        got = (f_grad_matrix(mats, spec) * e).sum(axis=(-2, -1))
        assert (np.abs(got - fd) <= 1e-5 * np.maximum(1.0, np.abs(fd))).all()
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    _passed(3, "f_grad (rel 1e-6) and f_grad_matrix (rel 1e-5) match FD oracles", t0)


def test_criterion_04_ellipticity_ratio_sweeps(tmp_path_factory):
    t0 = time.perf_counter()
    infima = []
    for cfg in PURE + QUOTIENT:
        n, k, l = cfg if len(cfg) == 3 else (*cfg, None)
        rep = sweep_ellipticity_ratio(n, k, l, samples=100000, seed=SEED)
        assert rep.extra["positivity_violations"] == 0, f"(n,k,l)=({n},{k},{l})"
        assert rep.extra["scale_violations"] == 0, f"(n,k,l)=({n},{k},{l})"
        assert rep.min_ratio > 0
        infima.append({"n": n, "k": k, "l": l, "samples": rep.samples, "empirical_infimum": rep.min_ratio})
    out = tmp_path_factory.mktemp("acceptance") / "ellipticity_ratio_infima.json"
    out.write_text(json.dumps(infima, indent=2) + "\n", encoding="utf-8")
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    print(f"  empirical infima written to {out}")
    _passed(4, "ellipticity-ratio sweeps: positive, scale-invariant (1e5 per config)", t0)


def test_criterion_05_maclaurin_ratio_bound():
    t0 = time.perf_counter()
    for n, k, l in QUOTIENT:
        rep = sweep_maclaurin_ratio(n, k, l, samples=100000, seed=SEED)
        assert rep.violations == 0, f"(n,k,l)=({n},{k},{l})"
        assert rep.extra["max_alpha"] <= maclaurin_bound(n, k, l) + 1e-12
    for p in range(3):
        assert abs(maclaurin_ratio(np.array([2.0, 2.0, 2.0]), 2, 1, p) - 0.25) < 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    _passed(5, "sigma-ratio product within (0, l(n-k)/(k(n-l))]; bound attained at uniform", t0)


def test_criterion_06_trace_lower_bound():
    t0 = time.perf_counter()
    for n, k in PURE:
        rep = sweep_trace_bound(n, k, samples=100000, seed=SEED)
        assert rep.violations == 0, f"(n,k)=({n},{k})"
        total = f_grad(np.ones(n), OperatorSpec(n, k)).sum()
        assert abs(total - trace_lower_bound(n, k)) < 1e-12
    assert abs(trace_lower_bound(3, 2) - 2.0 * math.sqrt(3.0)) < 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    _passed(6, "linearization trace >= explicit bound; equality at uniform spectra", t0)


def test_criterion_07_k1_linear_reduction():
    t0 = time.perf_counter()
    m = 33
    grid = BoxGrid((0.0, 0.0), (1.0, 1.0), m)
    op = OperatorSpec(2, 1)
    beta = 1.0
    pts = grid.points()
    psi = ScalarField(grid, (2.0 + pts[:, 0] + pts[:, 1]).reshape(grid.shape))
    phi = ScalarField(grid, (np.sin(pts[:, 0]) + np.cos(pts[:, 1])).reshape(grid.shape))
    from hessneumann.problem import ProblemSpec

    spec = ProblemSpec(grid, op, beta, psi, phi)

    # independent oracle: assemble (n-1) Lap_h + Robin rows with explicit loops
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    h = grid.h
    size = grid.size

    def flat(i, j):
        return i * m + j

    a = sp.lil_matrix((size, size))
    b = np.zeros(size)
    for i in range(m):
        for j in range(m):
            row = flat(i, j)
            if 0 < i < m - 1 and 0 < j < m - 1:
                a[row, flat(i + 1, j)] += 1.0 / h[0] ** 2
                a[row, flat(i - 1, j)] += 1.0 / h[0] ** 2
                a[row, flat(i, j + 1)] += 1.0 / h[1] ** 2
                a[row, flat(i, j - 1)] += 1.0 / h[1] ** 2
                a[row, row] += -2.0 / h[0] ** 2 - 2.0 / h[1] ** 2
                b[row] = psi.values[i, j]
            else:
                faces = []
                if i == 0:
                    faces.append((0, +1))
                if i == m - 1:
                    faces.append((0, -1))
                if j == 0:
                    faces.append((1, +1))
                if j == m - 1:
                    faces.append((1, -1))
                w = 1.0 / len(faces)
                for axis, inward in faces:
                    step = inward if axis == 0 else 0, inward if axis == 1 else 0
                    di, dj = step
                    a[row, row] += w * 3.0 / (2.0 * h[axis])
                    a[row, flat(i + di, j + dj)] += w * -4.0 / (2.0 * h[axis])
                    a[row, flat(i + 2 * di, j + 2 * dj)] += w * 1.0 / (2.0 * h[axis])
                a[row, row] += beta
                b[row] = phi.values[i, j]
    direct = spla.spsolve(a.tocsc(), b).reshape(grid.shape)

    start = ScalarField(grid, 0.5 * ((pts - 0.5) ** 2).sum(axis=1).reshape(grid.shape))
    sol, rep = newton_solve(start, spec)
    assert rep.converged and len(rep.iterations) == 1
    assert np.abs(sol.values - direct).max() < 1e-8
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    _passed(7, "k=1 solver matches direct Laplacian+Robin linear solve (33^2, 1e-8)", t0)


def test_criterion_08_paraboloid_exactness():
    t0 = time.perf_counter()
    grid = BoxGrid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 17)
    spec, u_star = manufactured_problem(paraboloid(grid.center), OperatorSpec(3, 2), 1.0, grid)
    np.testing.assert_allclose(spec.psi.values, 12.0)
    sol, rep = continuation_solve(spec)
    assert rep.converged
    res = residual(sol, spec)
    assert np.abs(res.values[grid.interior()]).max() < 1e-9
    assert np.abs(sol.values - u_star.values).max() < 1e-9
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    _passed(8, "paraboloid data (n=3,k=2,psi=12): residual and solution error < 1e-9", t0)


def test_criterion_09_mms_convergence_order(tmp_path):
    t0 = time.perf_counter()
    errs = {}
    for m in (9, 17, 33):
        spec, u_exact = build_case("perturbed-paraboloid", m)
        sol, rep = newton_solve(u_exact, spec)
        assert rep.converged
        errs[m] = float(np.abs(sol.values - u_exact.values).max())
    order_a = math.log(errs[9] / errs[17]) / math.log(2.0)
    order_b = math.log(errs[17] / errs[33]) / math.log(2.0)
    assert abs(order_a - 2.0) <= 0.3
    assert abs(order_b - 2.0) <= 0.3
    elapsed = time.perf_counter() - t0
    assert elapsed < 600.0
    print(f"  errors {errs} orders ({order_a:.3f}, {order_b:.3f})")
    _passed(9, "MMS order 2.0 +- 0.3 on perturbed paraboloid (m = 9, 17, 33)", t0)


def test_criterion_10_uniqueness_from_distinct_starts():
    t0 = time.perf_counter()
    grid = BoxGrid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 17)
    spec, u_star = manufactured_problem(paraboloid(grid.center), OperatorSpec(3, 2), 1.0, grid)
    pts = grid.points()
    tilt = (0.3 * pts[:, 0] - 0.2 * pts[:, 1] + 0.1 * pts[:, 2]).reshape(grid.shape)
    sol_a, rep_a = newton_solve(u_star, spec)
    sol_b, rep_b = newton_solve(ScalarField(grid, u_star.values + tilt), spec)
    assert rep_a.converged and rep_b.converged
    assert np.abs(sol_a.values - sol_b.values).max() < 1e-6
    _passed(10, "distinct admissible starts reach the same solution within 1e-6", t0)


def test_criterion_11_psi_with_zeros_robustness(tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "psi-zero"
    code = main(["solve", "--problem", str(REPO / "problems" / "psi-zero-17.json"), "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is True
    assert report["final_margin"] > 0
    assert all(rec["min_margin"] > 0 for rec in report["iterations"])
    assert report["continuation"][-1]["t"] == 1.0
    _passed(11, "psi vanishing at the center: continuation exit 0 with margins > 0", t0)
