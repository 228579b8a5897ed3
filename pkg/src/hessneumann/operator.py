"""The eta-transform and the normalized transformed-Hessian operators.

The equation's unknown matrix r (a pointwise real symmetric Hessian) enters
through eta(r) = trace(r) I - r.  With eta the eigenvalues of that transform,
the normalized operator is

    pure:      f(lam) = sigma_k(eta) ** (1/k)
    quotient:  f(lam) = (sigma_k(eta) / sigma_l(eta)) ** (1/(k-l))

both positively homogeneous of degree one.  Admissibility means eta lies in
the open cone of order k (pure) or k+1 (quotient).  Functions accept a single
spectrum/matrix or a batch on the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .symfun import _as_values, _require_in_gamma, sigma_all, sigma_grad

__all__ = [
    "OperatorSpec",
    "eta_from_lambda",
    "lambda_from_eta",
    "eta_matrix",
    "f_value",
    "f_grad",
    "f_grad_matrix",
    "admissible",
    "value_at_eta",
    "grad_at_eta",
    "margin_at_eta",
]

_SYM_RTOL = 1e-12


@dataclass(frozen=True)
class OperatorSpec:
    """Operator selection: dimension n, order k, optional quotient order l.

    ``l`` absent (or 0) selects the pure operator; 1 <= l < k <= n-1 selects
    the quotient.  ``cone_order`` is the admissibility cone: k for pure, k+1
    for the quotient.
    """

    n: int
    k: int
    l: int | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 1 <= self.k <= self.n - 1:
            raise ValueError(f"k={self.k} outside [1, {self.n - 1}]")
        if self.l == 0:
            object.__setattr__(self, "l", None)
        if self.l is not None and not 1 <= self.l < self.k:
            raise ValueError(f"l={self.l} outside [1, {self.k - 1}]")

    @property
    def cone_order(self) -> int:
        return self.k if self.l is None else self.k + 1

    @property
    def degree(self) -> int:
        """Denominator of the normalizing exponent: k (pure) or k-l (quotient)."""
        return self.k if self.l is None else self.k - self.l


def eta_from_lambda(lam) -> np.ndarray:
    """eta_i = sum_j lam_j - lam_i.  Reverses the ordering of the entries."""
    vals = _as_values(lam)
    return vals.sum(axis=-1, keepdims=True) - vals


def lambda_from_eta(eta) -> np.ndarray:
    """Inverse transform lam_i = (sum_j eta_j) / (n-1) - eta_i."""
    vals = _as_values(eta)
    n = vals.shape[-1]
    return vals.sum(axis=-1, keepdims=True) / (n - 1) - vals


def _as_sym_matrix(r) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2] or arr.shape[-1] < 2:
        raise ValueError("expected one or more square matrices of size >= 2")
    if not np.isfinite(arr).all():
        raise ValueError("matrix entries must be finite")
    asym = np.abs(arr - np.swapaxes(arr, -1, -2)).max()
    if asym > _SYM_RTOL * max(1.0, np.abs(arr).max()):
        raise ValueError(f"matrix is asymmetric beyond tolerance (|r - r^T| = {asym:.3g})")
    return arr


def eta_matrix(r) -> np.ndarray:
    """Matrix form of the transform: trace(r) I - r."""
    arr = _as_sym_matrix(r)
    n = arr.shape[-1]
    tr = np.trace(arr, axis1=-2, axis2=-1)
    return tr[..., None, None] * np.eye(n) - arr


def value_at_eta(eta, spec: OperatorSpec):
    """Normalized operator value from the transformed eigenvalues eta."""
    vals = _as_values(eta)
    e = _require_in_gamma(vals, spec.cone_order, "operator value")
    if spec.l is None:
        out = e[..., spec.k] ** (1.0 / spec.k)
    else:
        out = (e[..., spec.k] / e[..., spec.l]) ** (1.0 / spec.degree)
    return float(out) if vals.ndim == 1 else out


def grad_at_eta(eta, spec: OperatorSpec) -> np.ndarray:
    """Entrywise derivative of the normalized operator with respect to eta."""
    vals = _as_values(eta)
    e = _require_in_gamma(vals, spec.cone_order, "operator gradient")
    k, l = spec.k, spec.l
    tk = sigma_grad(vals, k)  # sigma_{k-1}(eta | i)
    if l is None:
        coef = (1.0 / k) * e[..., k] ** (1.0 / k - 1.0)
        return coef[..., None] * tk
    sk, sl = e[..., k], e[..., l]
    tl0 = sigma_grad(vals, l)  # sigma_{l-1}(eta | i)
    w = (tk * sl[..., None] - sk[..., None] * tl0) / sl[..., None] ** 2
    coef = (1.0 / spec.degree) * (sk / sl) ** (1.0 / spec.degree - 1.0)
    return coef[..., None] * w


def margin_at_eta(eta, spec: OperatorSpec):
    """Signed admissibility margin min_{i <= cone order} sigma_i(eta)."""
    vals = _as_values(eta)
    m = np.min(sigma_all(vals, spec.cone_order)[..., 1:], axis=-1)
    return float(m) if vals.ndim == 1 else m


def f_value(lam, spec: OperatorSpec):
    """Normalized operator value at the untransformed eigenvalues lam."""
    return value_at_eta(eta_from_lambda(lam), spec)


def f_grad(lam, spec: OperatorSpec) -> np.ndarray:
    """Closed-form gradient of f with respect to lam.

    Entry i is the sum over p != i of the eta-gradient entries, all of which
    are nonnegative on the admissible cone, so f_grad >= 0 entrywise.
    """
    g = grad_at_eta(eta_from_lambda(lam), spec)
    return g.sum(axis=-1, keepdims=True) - g


def f_grad_matrix(r, spec: OperatorSpec) -> np.ndarray:
    """Derivative of F(r) = f(eigenvalues of r) with respect to the entries of r.

    Built from the spectral decomposition of eta_matrix(r): the eta-level
    gradient is conjugated back and run through the transform again, so the
    result satisfies dF = <f_grad_matrix(r), dr> in the Frobenius pairing.
    At diagonal r this is diagonal with the entries of f_grad.
    """
    s = eta_matrix(r)
    w, q = np.linalg.eigh(s)
    g = grad_at_eta(w, spec)
    a = np.einsum("...ij,...j,...kj->...ik", q, g, q)
    tr = np.trace(a, axis1=-2, axis2=-1)
    return tr[..., None, None] * np.eye(a.shape[-1]) - a


def admissible(r, spec: OperatorSpec):
    """Whether eta_matrix(r)'s spectrum lies in the required cone, plus margin."""
    w = np.linalg.eigvalsh(eta_matrix(r))
    m = np.min(sigma_all(w, spec.cone_order)[..., 1:], axis=-1)
    if np.asarray(r).ndim == 2:
        return bool(m > 0.0), float(m)
    return m > 0.0, m
