"""Vectorised forward-mode automatic differentiation with sparse Jacobians.

An :class:`ADArray` carries a value vector together with the sparse matrix of
its derivatives with respect to every primary unknown of the simulator. All
arithmetic propagates both parts, so the residual assembled from ``ADArray``
operands comes with its exact Jacobian.

The module-level functions (:func:`exp`, :func:`maximum`, ...) accept plain
floats/arrays as well, which lets the property correlations in
:mod:`nearwell.fluid` be written once for both uses.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def _canonical(jac: sp.csr_matrix) -> sp.csr_matrix:
    if not jac.has_canonical_format:
        jac.sum_duplicates()
    return jac


def _with_data(jac: sp.csr_matrix, data: np.ndarray) -> sp.csr_matrix:
    """CSR matrix sharing the canonical sparsity pattern of ``jac``.

    Skips scipy's constructor checks, which dominate the cost of the many
    small element-wise operations during assembly.
    """
    out = object.__new__(type(jac))
    out.__dict__.update(jac.__dict__)
    out.data = data
    return out


def _row_scale(jac: sp.csr_matrix, a: np.ndarray) -> sp.csr_matrix:
    """Return ``diag(a) @ jac`` without building the diagonal matrix."""
    jac = _canonical(jac)
    rows = np.broadcast_to(a, (jac.shape[0],))
    return _with_data(jac, jac.data * np.repeat(rows, np.diff(jac.indptr)))


class ADArray:
    """Value vector plus its ``(n, n_unknowns)`` CSR Jacobian."""

    __slots__ = ("val", "jac")
    __array_priority__ = 1000

    def __init__(self, val, jac):
        self.val = np.asarray(val, dtype=float)
        self.jac = jac if sp.isspmatrix_csr(jac) else sp.csr_matrix(jac)
        if self.jac.shape[0] != self.val.shape[0]:
            raise ValueError(f"jacobian rows {self.jac.shape[0]} != values {self.val.shape[0]}")

    def __len__(self):
        return self.val.shape[0]

    @property
    def n_unknowns(self) -> int:
        return self.jac.shape[1]

    def __repr__(self):
        return f"ADArray(n={len(self)}, n_unknowns={self.n_unknowns})"

    # arithmetic -----------------------------------------------------------
    def __neg__(self):
        return ADArray(-self.val, -self.jac)

    def __add__(self, other):
        if isinstance(other, ADArray):
            return ADArray(self.val + other.val, self.jac + other.jac)
        return ADArray(self.val + other, self._broadcast_jac(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ADArray):
            return ADArray(self.val - other.val, self.jac - other.jac)
        return ADArray(self.val - other, self._broadcast_jac(other))

    def __rsub__(self, other):
        return ADArray(other - self.val, -self._broadcast_jac(other))

    def __mul__(self, other):
        if isinstance(other, ADArray):
            return ADArray(
                self.val * other.val,
                _row_scale(self.jac, other.val) + _row_scale(other.jac, self.val),
            )
        other = np.asarray(other, dtype=float)
        val = self.val * other
        return ADArray(val, _row_scale(self._broadcast_jac(other), np.broadcast_to(other, val.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ADArray):
            inv = 1.0 / other.val
            val = self.val * inv
            return ADArray(val, _row_scale(self.jac, inv) - _row_scale(other.jac, val * inv))
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        val = np.asarray(other, dtype=float) * inv
        return ADArray(val, _row_scale(self.jac, -val * inv))

    def __pow__(self, n):
        if isinstance(n, ADArray):
            raise TypeError("AD exponent not supported")
        val = self.val**n
        with np.errstate(divide="ignore", invalid="ignore"):
            dval = n * self.val ** (n - 1)
        return ADArray(val, _row_scale(self.jac, dval))

    def _broadcast_jac(self, other):
        shape = np.broadcast_shapes(self.val.shape, np.shape(other))
        if shape != self.val.shape:
            raise ValueError("constant operand cannot enlarge an ADArray")
        return self.jac

    # indexing -------------------------------------------------------------
    def __getitem__(self, idx):
        idx = np.atleast_1d(np.arange(len(self))[idx])
        return ADArray(self.val[idx], self.jac[idx])


# --------------------------------------------------------------------------
# constructors


def variables(*values: np.ndarray) -> list[ADArray]:
    """Create independent AD variables; their Jacobians are identity blocks."""
    sizes = [np.asarray(v).size for v in values]
    total = int(sum(sizes))
    out = []
    offset = 0
    for v, n in zip(values, sizes):
        rows = np.arange(n)
        jac = sp.csr_matrix((np.ones(n), (rows, rows + offset)), shape=(n, total))
        out.append(ADArray(np.asarray(v, dtype=float).ravel(), jac))
        offset += n
    return out


def constant(val, n_unknowns: int) -> ADArray:
    val = np.atleast_1d(np.asarray(val, dtype=float))
    return ADArray(val, sp.csr_matrix((val.shape[0], n_unknowns)))


def value(x):
    return x.val if isinstance(x, ADArray) else x


def is_ad(x) -> bool:
    return isinstance(x, ADArray)


# --------------------------------------------------------------------------
# elementwise functions (accept plain numbers too)


def _unary(x, f, df):
    if isinstance(x, ADArray):
        return ADArray(f(x.val), _row_scale(x.jac, df(x.val)))
    return f(x)


def exp(x):
    return _unary(x, np.exp, np.exp)


def expm1(x):
    return _unary(x, np.expm1, np.exp)


def log(x):
    return _unary(x, np.log, lambda v: 1.0 / v)


def maximum(x, bound: float):
    """Elementwise ``max(x, bound)``; derivative is zero where the bound is active."""
    if isinstance(x, ADArray):
        active = x.val >= bound
        return ADArray(np.where(active, x.val, bound), _row_scale(x.jac, active.astype(float)))
    return np.maximum(x, bound)


def minimum(x, bound: float):
    if isinstance(x, ADArray):
        active = x.val <= bound
        return ADArray(np.where(active, x.val, bound), _row_scale(x.jac, active.astype(float)))
    return np.minimum(x, bound)


def clip(x, lo: float, hi: float):
    return minimum(maximum(x, lo), hi)


def where(mask, a, b):
    """Select ``a`` where ``mask`` else ``b``; either side may be constant."""
    mask = np.asarray(mask, dtype=bool)
    if not isinstance(a, ADArray) and not isinstance(b, ADArray):
        return np.where(mask, a, b)
    n_unk = a.n_unknowns if isinstance(a, ADArray) else b.n_unknowns
    m = mask.astype(float)
    val = np.where(mask, value(a), value(b))
    jac = sp.csr_matrix((val.shape[0], n_unk))
    if isinstance(a, ADArray):
        jac = jac + _row_scale(a.jac, m)
    if isinstance(b, ADArray):
        jac = jac + _row_scale(b.jac, 1.0 - m)
    return ADArray(val, jac)


def matmul(mat: sp.spmatrix, x):
    """Apply a constant sparse operator (gather, scatter, divergence) to ``x``."""
    if isinstance(x, ADArray):
        return ADArray(mat @ x.val, sp.csr_matrix(mat @ x.jac))
    return mat @ x


def concatenate(parts: list[ADArray]) -> ADArray:
    return ADArray(
        np.concatenate([p.val for p in parts]),
        sp.vstack([p.jac for p in parts], format="csr"),
    )


def compose(val, args: list, partials: np.ndarray, n_unknowns: int) -> ADArray:
    """Wrap an externally evaluated function ``f(args)``.

    ``val`` holds ``f`` per row and ``partials[:, i]`` its derivative with
    respect to ``args[i]``; plain-array arguments contribute nothing.
    """
    val = np.asarray(val, dtype=float)
    jac = sp.csr_matrix((val.shape[0], n_unknowns))
    for i, a in enumerate(args):
        if isinstance(a, ADArray):
            jac = jac + _row_scale(a.jac, partials[:, i])
    return ADArray(val, jac)
