"""Linear algebra, Fourier and least-squares primitives.

Fourier sign convention, used everywhere in the package: the forward
transform carries a negative exponent,

    X[s] = sum_t x[t] * exp(-2j*pi*s*t/N),

and the inverse carries a positive exponent with a 1/N factor. At angular
frequency w_s = 2*pi*s/N the forward kernel is exp(-1j*h*w_s).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import linalg

from .errors import ContractViolationError, InvalidInputError, SingularDesignError

HERMITIAN_RTOL = 1e-12
TIE_RTOL = 1e-12


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{what} contains non-finite entries")


def dft_forward(
    sequence,
    sign_convention: Literal["negative", "positive"] = "negative",
    axis: int = -1,
) -> np.ndarray:
    """Unnormalized DFT along ``axis``.

    ``"negative"`` is the package-wide forward convention; ``"positive"``
    computes the same sum with ``exp(+2j*pi*s*t/N)`` (i.e. N times the inverse).
    """
    x = np.asarray(sequence, dtype=complex)
    if x.size == 0 or x.shape[axis] < 1:
        raise InvalidInputError("DFT input must have length >= 1")
    _check_finite(x, "DFT input")
    if sign_convention == "negative":
        return np.fft.fft(x, axis=axis)
    if sign_convention == "positive":
        return np.fft.ifft(x, axis=axis) * x.shape[axis]
    raise InvalidInputError(f"unknown sign convention {sign_convention!r}")


def dft_inverse(spectrum, axis: int = -1) -> np.ndarray:
    """Inverse of :func:`dft_forward` with the negative convention."""
    X = np.asarray(spectrum, dtype=complex)
    _check_finite(X, "DFT input")
    return np.fft.ifft(X, axis=axis)


def is_hermitian(m: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    m = np.asarray(m)
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    return bool(np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))), initial=0.0) <= rtol * scale)


def _tie_break(values: np.ndarray, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reorder runs of equal eigenvalues by comparing |v| entries lexicographically."""
    n = values.shape[0]
    tol = TIE_RTOL * max(1.0, float(np.max(np.abs(values))))
    order = list(range(n))
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and abs(values[stop] - values[start]) <= tol:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]
            mags = np.abs(vectors[:, block])
            # larger magnitude at the first differing index goes first
            keys = [tuple(-np.round(mags[:, c], 12)) for c in range(len(block))]
            ranked = sorted(range(len(block)), key=lambda c: keys[c])
            order[start:stop] = [block[c] for c in ranked]
        start = stop
    return values[order], vectors[:, order]


def hermitian_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix or a stack of them.

    Returns eigenvalues sorted in descending order and unit-norm eigenvectors
    stored column-wise. Equal eigenvalues are ordered deterministically.
    Accepts shape ``(n, n)`` or ``(..., n, n)``.
    """
    a = np.asarray(m)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise InvalidInputError("hermitian_eig expects square matrices")
    _check_finite(a, "matrix")
    if not is_hermitian(a):
        raise ContractViolationError("matrix is not Hermitian within tolerance")
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    w, v = np.linalg.eigh(a)
    w = w[..., ::-1]
    v = v[..., ::-1]
    if w.shape[-1] > 1:
        scale = np.maximum(1.0, np.max(np.abs(w), axis=-1, keepdims=True))
        ties = np.any(np.abs(np.diff(w, axis=-1)) <= TIE_RTOL * scale, axis=-1)
        if np.any(ties):
            w = np.array(w, copy=True)
            v = np.array(v, copy=True)
            for idx in zip(*np.nonzero(np.atleast_1d(ties))):
                key = idx if w.ndim > 1 else ()
                w[key], v[key] = _tie_break(w[key], v[key])
    return w, v


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    rss: float
    n_params: int

    @property
    def n_obs(self) -> int:
        return self.residuals.shape[0]


def _pivoted_qr(design: np.ndarray):
    norms = np.linalg.norm(design, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    safe = np.where(norms == 0.0, 1.0, norms)
    q, r, piv = linalg.qr(design / safe, mode="economic", pivoting=True)
    return q, r, piv, safe, zero


def independent_columns(design, cond_limit: float = 1e10) -> np.ndarray:
    """Indices of a maximal well-conditioned column subset, ascending.

    Columns are unit-normalized; a pivoted QR keeps pivots whose diagonal
    ratio |R_ii| / |R_00| is at least ``1 / cond_limit``.
    """
    X = np.asarray(design, dtype=float)
    _, r, piv, _, zero = _pivoted_qr(X)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return np.array([], dtype=int)
    keep = piv[: int(np.sum(diag >= diag[0] / cond_limit))]
    keep = np.setdiff1d(keep, zero)
    return np.sort(keep)


def ols_fit(design, response) -> OlsFit:
    """Least-squares fit through a column-pivoted QR factorization.

    Raises :class:`SingularDesignError` naming the dependent columns when the
    design is rank deficient.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    T_eff, k = X.shape
    if y.shape != (T_eff,):
        raise InvalidInputError(f"response length {y.shape} does not match design rows {T_eff}")
    if T_eff <= k:
        raise InvalidInputError(f"need more rows than columns, got {T_eff} x {k}")
    _check_finite(X, "design")
    _check_finite(y, "response")

    q, r, piv, scale, zero = _pivoted_qr(X)
    diag = np.abs(np.diag(r))
    tol = max(T_eff, k) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < k or zero.size:
        dependent = tuple(sorted(set(piv[rank:].tolist()) | set(zero.tolist())))
        raise SingularDesignError(
            f"design matrix is rank deficient (rank {rank} < {k}); "
            f"dependent columns: {list(dependent)}",
            dependent,
        )
    z = linalg.solve_triangular(r, q.T @ y)
    coef = np.empty(k)
    coef[piv] = z
    coef /= scale
    resid = y - X @ coef
    return OlsFit(coefficients=coef, residuals=resid, rss=float(resid @ resid), n_params=k)
