"""Randomized certification of the operator's strict-ellipticity structure.

Four quantitative facts back the solver's conditioning and are swept here
over reproducible random cone samples:

* the sorted deleted-polynomial share sigma_{k-1}(eta|k) / sum_i sigma_{k-1}(eta|i)
  is strictly positive on the order-k cone (``deleted_term_share``);
* the linearization's smallest eigenvalue is a positive fraction of its trace,
  for both the pure and the quotient operator (``ellipticity_ratio``);
* the product of consecutive-order sigma ratios at a deleted index is bounded
  by l(n-k)/(k(n-l)), attained exactly at uniform spectra (``maclaurin_ratio``);
* the trace of the pure linearization is bounded below by an explicit
  constant, attained at uniform spectra (``trace_lower_bound``).

The positive constants themselves are not known in closed form except for the
last two bounds; sweeps therefore report empirical infima and assert only
sign/bound facts.  Sweeps are deterministic given (n, k, seed, scale): sample
generators are derived from (seed, block index) in fixed-size blocks, so any
chunking of the work, serial or threaded, reproduces the identical stream.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .operator import OperatorSpec, f_grad, lambda_from_eta
from .symfun import _as_values, _require_in_gamma, sigma_all, sigma_grad

__all__ = [
    "ConeSampler",
    "sample_eta",
    "SweepReport",
    "deleted_term_share",
    "ellipticity_ratio",
    "maclaurin_ratio",
    "maclaurin_bound",
    "trace_lower_bound",
    "trace_check",
    "sweep_deleted_term_share",
    "sweep_ellipticity_ratio",
    "sweep_maclaurin_ratio",
    "sweep_trace_bound",
    "default_sweep_plan",
]

_BLOCK = 4096  # samples per derived generator; fixed so chunking never changes the stream
_BISECT_TOL = 1e-10


def worker_count(workers: int | None = None) -> int:
    """Resolve the sweep parallelism: explicit arg, then HN_THREADS, then cores."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("HN_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _block_normals(seed: int, n: int, start: int, count: int) -> np.ndarray:
    """Standard-normal draws for samples [start, start+count), block-derived."""
    out = np.empty((count, n))
    pos = 0
    while pos < count:
        idx = start + pos
        block = idx // _BLOCK
        offset = idx % _BLOCK
        take = min(_BLOCK - offset, count - pos)
        g = np.random.default_rng((seed, block)).standard_normal((_BLOCK, n))
        out[pos : pos + take] = g[offset : offset + take]
        pos += take
    return out


def _shift_into_cone(g: np.ndarray, k: int, scale: float) -> np.ndarray:
    """Smallest t >= 0 with all sigma_i(g + t*ones) > 1e-6 * scale**i, per row.

    Bisection to absolute tolerance 1e-10 on the predicate-true endpoint; each
    row's trajectory is independent of the batch it is evaluated in.
    """
    n = g.shape[-1]
    delta = 1e-6 * scale ** np.arange(1, k + 1)

    def pred(t):
        return np.all(sigma_all(g + t[:, None], k)[..., 1:] > delta, axis=-1)

    t0 = np.zeros(g.shape[0])
    done = pred(t0)
    hi = np.ones_like(t0)
    need = ~done
    while need.any():
        ok = pred(hi)
        grow = need & ~ok
        if not grow.any():
            break
        hi[grow] *= 2.0
    lo = np.zeros_like(t0)
    active = ~done
    while active.any():
        mid = 0.5 * (lo + hi)
        ok = pred(mid)
        hi = np.where(active & ok, mid, hi)
        lo = np.where(active & ~ok, mid, lo)
        active = active & ((hi - lo) > _BISECT_TOL)
    return np.where(done, 0.0, hi)


def sample_block(n: int, k: int, seed: int, scale: float, start: int, count: int) -> np.ndarray:
    """Samples [start, start+count) of the deterministic cone stream, shape (count, n)."""
    g = _block_normals(seed, n, start, count)
    t = _shift_into_cone(g, k, scale)
    return scale * (g + t[:, None])


@dataclass
class ConeSampler:
    """Deterministic stream of spectra strictly inside the order-k cone.

    A standard-normal draw is shifted along the diagonal ray by the smallest
    nonnegative amount that clears a small sigma margin, then scaled.  Raw
    draws already inside the cone are kept as they are, so the stream covers
    both near-boundary and deep-interior points.
    """

    n: int
    k: int
    seed: int
    scale: float = 1.0
    position: int = field(default=0, compare=False)

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"cone index k={self.k} outside [1, {self.n}]")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def draw(self) -> np.ndarray:
        return self.draw_batch(1)[0]

    def draw_batch(self, count: int) -> np.ndarray:
        out = sample_block(self.n, self.k, self.seed, self.scale, self.position, count)
        self.position += count
        return out


def sample_eta(sampler: ConeSampler) -> np.ndarray:
    """Next spectrum from the sampler's stream (advances its position)."""
    return sampler.draw()


def deleted_term_share(eta, k: int):
    """Share of the k-th (descending order) deleted sigma_{k-1} term in the total.

    The spectrum is sorted descending internally.  Strictly positive on the
    order-k cone; the infimum over the cone is the unquantified constant the
    sweeps estimate.
    """
    vals = _as_values(eta)
    _require_in_gamma(vals, k, "deleted_term_share")
    s = -np.sort(-vals, axis=-1)
    table = sigma_grad(s, k)
    out = table[..., k - 1] / table.sum(axis=-1)
    return float(out) if vals.ndim == 1 else out


def ellipticity_ratio(lam, spec: OperatorSpec):
    """min_i f_i / sum_i f_i for the operator's gradient; in (0, 1/n], scale-free."""
    fg = f_grad(lam, spec)
    out = fg.min(axis=-1) / fg.sum(axis=-1)
    return float(out) if np.asarray(lam).ndim == 1 else out


def maclaurin_bound(n: int, k: int, l: int) -> float:
    """Upper bound l(n-k)/(k(n-l)) for the deleted sigma-ratio product."""
    return l * (n - k) / (k * (n - l))


def maclaurin_ratio(eta, k: int, l: int, p: int | None = None):
    """Deleted-index ratio product [sigma_k/sigma_{k-1}] * [sigma_{l-1}/sigma_l].

    All four polynomials are evaluated with entry ``p`` zeroed; ``p=None``
    returns the value for every deleted index along a new last axis.  Requires
    the spectrum in the order-(k+1) cone, which keeps every denominator
    positive.  Lies in (0, maclaurin_bound(n, k, l)], the bound attained
    exactly at uniform spectra.
    """
    vals = _as_values(eta)
    n = vals.shape[-1]
    if not 1 <= l < k <= n - 1:
        raise ValueError(f"need 1 <= l < k <= n-1, got (k, l) = ({k}, {l})")
    _require_in_gamma(vals, k + 1, "maclaurin_ratio")
    tk = sigma_grad(vals, k + 1)  # sigma_k  (eta | p)
    tk1 = sigma_grad(vals, k)  # sigma_{k-1}(eta | p)
    tl0 = sigma_grad(vals, l)  # sigma_{l-1}(eta | p)
    tl = sigma_grad(vals, l + 1)  # sigma_l  (eta | p)
    alpha = (tk / tk1) * (tl0 / tl)
    if p is None:
        return alpha
    if not 0 <= p < n:
        raise ValueError(f"index p={p} outside [0, {n})")
    out = alpha[..., p]
    return float(out) if vals.ndim == 1 else out


def trace_lower_bound(n: int, k: int) -> float:
    """Lower bound for sum_i f_i of the pure operator, attained at uniform spectra."""
    return (n - 1) / k * (n - k + 1) * math.comb(n, k - 1) / math.comb(n, k) ** ((k - 1) / k)


def trace_check(lam, spec: OperatorSpec):
    """Whether sum_i f_i >= trace_lower_bound(n, k) - 1e-10 (pure operator only)."""
    if spec.l is not None:
        raise ValueError("the trace lower bound is stated for the pure operator only")
    total = f_grad(lam, spec).sum(axis=-1)
    ok = total >= trace_lower_bound(spec.n, spec.k) - 1e-10
    return bool(ok) if np.asarray(lam).ndim == 1 else ok


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

_CHUNK = 20000


@dataclass
class SweepReport:
    """Outcome of one randomized sweep of an asserted inequality.

    ``min_ratio`` is the smallest signed slack of the inequality seen over the
    sweep and ``argmin`` the sample attaining it; ``violations`` counts samples
    whose slack falls below -tolerance (1e-12, except 1e-10 for the trace
    bound).  ``wall_time`` is informational and excluded from determinism
    guarantees and from the CSV row.
    """

    label: str
    n: int
    k: int
    l: int | None
    samples: int
    seed: int
    scale: float
    min_ratio: float
    argmin: list[float]
    violations: int
    wall_time: float
    extra: dict = field(default_factory=dict)

    CSV_HEADER = "label,n,k,l,samples,seed,scale,min_ratio,violations,extra"

    def to_json(self) -> str:
        payload = {
            "label": self.label,
            "n": self.n,
            "k": self.k,
            "l": self.l,
            "samples": self.samples,
            "seed": self.seed,
            "scale": self.scale,
            "min_ratio": self.min_ratio,
            "argmin": self.argmin,
            "violations": self.violations,
            "wall_time": self.wall_time,
            "extra": self.extra,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def csv_row(self) -> str:
        l = "" if self.l is None else str(self.l)
        extra = ";".join(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}" for k, v in sorted(self.extra.items()))
        return (
            f"{self.label},{self.n},{self.k},{l},{self.samples},{self.seed},"
            f"{self.scale:.17g},{self.min_ratio:.17g},{self.violations},{extra}"
        )


def _run_sweep(label, n, k, l, samples, seed, scale, workers, chunk_fn, tol):
    """Shared chunked driver: map chunk_fn over sample ranges, reduce in order."""
    if samples <= 0:
        raise ValueError("empty sweep: samples must be positive")
    t0 = time.perf_counter()
    ranges = [(s, min(_CHUNK, samples - s)) for s in range(0, samples, _CHUNK)]
    nw = worker_count(workers)
    if nw > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(lambda p: chunk_fn(*p), ranges))
    else:
        results = [chunk_fn(*p) for p in ranges]

    min_ratio = math.inf
    argmin = None
    violations = 0
    extra: dict = {}
    for slack, arg, viol, ex_chunk in results:
        violations += viol
        if slack < min_ratio:
            min_ratio = slack
            argmin = arg
        for key, val in ex_chunk.items():
            if key.startswith("max_"):
                extra[key] = max(extra.get(key, -math.inf), val)
            elif key.startswith("min_"):
                extra[key] = min(extra.get(key, math.inf), val)
            else:
                extra[key] = extra.get(key, 0) + val
    extra["tolerance"] = tol
    return SweepReport(
        label=label,
        n=n,
        k=k,
        l=l,
        samples=samples,
        seed=seed,
        scale=scale,
        min_ratio=float(min_ratio),
        argmin=[float(x) for x in argmin],
        violations=int(violations),
        wall_time=time.perf_counter() - t0,
        extra=extra,
    )


def sweep_deleted_term_share(n, k, samples, seed, scale=1.0, workers=None) -> SweepReport:
    """Positivity sweep of deleted_term_share over order-k cone samples."""

    def chunk(start, count):
        eta = sample_block(n, k, seed, scale, start, count)
        ratio = deleted_term_share(eta, k)
        i = int(np.argmin(ratio))
        return float(ratio[i]), eta[i], int((ratio < -1e-12).sum()), {}

    return _run_sweep("deleted-term-share", n, k, None, samples, seed, scale, workers, chunk, 1e-12)


def sweep_ellipticity_ratio(n, k, l=None, *, samples, seed, scale=1.0, workers=None) -> SweepReport:
    """Positivity and scale-invariance sweep of ellipticity_ratio.

    Samples are drawn in the order-k cone (pure) or order-(k+1) cone
    (quotient) and mapped back through the inverse transform.
    """
    spec = OperatorSpec(n, k, l)

    def chunk(start, count):
        eta = sample_block(n, spec.cone_order, seed, scale, start, count)
        lam = lambda_from_eta(eta)
        fg = f_grad(lam, spec)
        ratio = fg.min(axis=-1) / fg.sum(axis=-1)
        ratio10 = ellipticity_ratio(10.0 * lam, spec)
        pos_bad = int((fg.min(axis=-1) <= 0.0).sum())
        scale_bad = int((np.abs(ratio - ratio10) > 1e-12).sum())
        i = int(np.argmin(ratio))
        extra = {"positivity_violations": pos_bad, "scale_violations": scale_bad}
        return float(ratio[i]), lam[i], pos_bad + scale_bad, extra

    label = "ellipticity-ratio" if l is None else "ellipticity-ratio-quotient"
    return _run_sweep(label, n, k, l, samples, seed, scale, workers, chunk, 1e-12)


def sweep_maclaurin_ratio(n, k, l, *, samples, seed, scale=1.0, workers=None) -> SweepReport:
    """Two-sided bound sweep of maclaurin_ratio over order-(k+1) cone samples."""
    bound = maclaurin_bound(n, k, l)

    def chunk(start, count):
        eta = sample_block(n, k + 1, seed, scale, start, count)
        alpha = maclaurin_ratio(eta, k, l)
        slack = np.minimum(alpha, bound - alpha).min(axis=-1)
        viol = int((slack < -1e-12).sum())
        i = int(np.argmin(slack))
        return float(slack[i]), eta[i], viol, {"max_alpha": float(alpha.max())}

    rep = _run_sweep("maclaurin-ratio", n, k, l, samples, seed, scale, workers, chunk, 1e-12)
    rep.extra["bound"] = bound
    return rep


def sweep_trace_bound(n, k, *, samples, seed, scale=1.0, workers=None) -> SweepReport:
    """Sweep of sum_i f_i against its explicit lower bound (pure operator)."""
    spec = OperatorSpec(n, k)
    bound = trace_lower_bound(n, k)

    def chunk(start, count):
        eta = sample_block(n, k, seed, scale, start, count)
        lam = lambda_from_eta(eta)
        slack = f_grad(lam, spec).sum(axis=-1) - bound
        viol = int((slack < -1e-10).sum())
        i = int(np.argmin(slack))
        return float(slack[i]), lam[i], viol, {}

    rep = _run_sweep("trace-bound", n, k, None, samples, seed, scale, workers, chunk, 1e-10)
    rep.extra["bound"] = bound
    return rep


def default_sweep_plan(n_max: int):
    """All (family, n, k, l) combinations swept by the verification command.

    Every family runs over 2 <= n <= n_max and 1 <= k <= n-1; quotient
    families add 1 <= l < k.
    """
    plan = []
    for n in range(2, n_max + 1):
        for k in range(1, n):
            plan.append(("deleted-term-share", n, k, None))
            plan.append(("ellipticity-ratio", n, k, None))
            plan.append(("trace-bound", n, k, None))
            for l in range(1, k):
                plan.append(("ellipticity-ratio-quotient", n, k, l))
                plan.append(("maclaurin-ratio", n, k, l))
    return plan


def run_sweep(family: str, n: int, k: int, l: int | None, *, samples, seed, scale=1.0, workers=None) -> SweepReport:
    """Dispatch one planned sweep by family name."""
    if family == "deleted-term-share":
        return sweep_deleted_term_share(n, k, samples, seed, scale, workers)
    if family == "ellipticity-ratio":
        return sweep_ellipticity_ratio(n, k, None, samples=samples, seed=seed, scale=scale, workers=workers)
    if family == "ellipticity-ratio-quotient":
        return sweep_ellipticity_ratio(n, k, l, samples=samples, seed=seed, scale=scale, workers=workers)
    if family == "maclaurin-ratio":
        return sweep_maclaurin_ratio(n, k, l, samples=samples, seed=seed, scale=scale, workers=workers)
    if family == "trace-bound":
        return sweep_trace_bound(n, k, samples=samples, seed=seed, scale=scale, workers=workers)
    raise ValueError(f"unknown sweep family: {family}")
