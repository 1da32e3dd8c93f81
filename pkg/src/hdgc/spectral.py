"""Spectral (frequency-domain) dynamic principal components.

Steps: lagged autocovariances -> kernel-smoothed spectral density on a grid of
angular frequencies -> per-frequency eigen-decomposition -> real filter taps
from the inverse Fourier transform of the eigenvector fields -> scores by
convolving the filters with the centered series.

Lag convention: ``C(h) = cov(Z[t+h], Z[t])`` and
``F(w) = sum_h w(|h|/L) C(h) exp(-1j*h*w)``. With that convention the score
``sum_k phi_k' Z[t-k]`` has spectrum ``conj(A)' F conj(A)`` where
``A(w) = sum_k phi_k exp(-1j*k*w)``, so the variance-maximizing taps are
``phi_k = (1/2pi) int phi(w) exp(-1j*k*w) dw``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np

from .errors import DegenerateInputError, DimensionMismatchError, InvalidParameterError
from .numeric import dft_forward, hermitian_eig
from .series import MultiChannelSeries

Sidedness = Literal["two_sided", "one_sided"]


def _bartlett(x: np.ndarray) -> np.ndarray:
    return 1.0 - x


def _parzen(x: np.ndarray) -> np.ndarray:
    return np.where(x <= 0.5, 1.0 - 6.0 * x**2 + 6.0 * x**3, 2.0 * (1.0 - x) ** 3)


def _flat(x: np.ndarray) -> np.ndarray:
    return np.ones_like(x)


KERNELS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "bartlett": _bartlett,
    "parzen": _parzen,
    "flat": _flat,
}


def kernel_weights(kernel: str, L_window: int) -> np.ndarray:
    """Weights w(|h|/L) for h = -L..L."""
    try:
        fn = KERNELS[kernel]
    except KeyError:
        raise InvalidParameterError(
            f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}"
        ) from None
    if L_window == 0:
        return np.ones(1)
    x = np.abs(np.arange(-L_window, L_window + 1)) / L_window
    return fn(x)


@dataclass(frozen=True)
class LagCovarianceSequence:
    """Matrices ``C(h)`` for ``h = -L..L`` stored at index ``h + L``."""

    matrices: np.ndarray
    max_lag: int

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    def lag(self, h: int) -> np.ndarray:
        if abs(h) > self.max_lag:
            raise InvalidParameterError(f"lag {h} outside +/-{self.max_lag}")
        return self.matrices[h + self.max_lag]


@dataclass(frozen=True)
class FrequencyGrid:
    """Angular frequencies ``2*pi*s/n_freq`` with signed ``s``, ascending in [-pi, pi)."""

    n_freq: int

    def __post_init__(self) -> None:
        if self.n_freq < 1:
            raise InvalidParameterError("n_freq must be >= 1")

    @property
    def index(self) -> np.ndarray:
        return np.arange(-(self.n_freq // 2), (self.n_freq - 1) // 2 + 1)

    @property
    def points(self) -> np.ndarray:
        return 2.0 * np.pi * self.index / self.n_freq

    def to_fft_order(self) -> np.ndarray:
        """Positions in this grid of FFT bins 0..n_freq-1."""
        return np.argsort(self.index % self.n_freq)


@dataclass(frozen=True)
class SpectralDensity:
    grid: FrequencyGrid
    matrices: np.ndarray  # (n_freq, n, n) complex, in grid order
    kernel_name: str
    L_window: int

    @property
    def n(self) -> int:
        return self.matrices.shape[1]


@dataclass(frozen=True)
class DynamicEigs:
    """Per-frequency eigenvalues (all ``n``) and the leading eigenvectors."""

    grid: FrequencyGrid
    eigenvalues: np.ndarray  # (n_freq, n) descending per row
    eigenvectors: np.ndarray  # (n_freq, n, k) phase-normalized columns
    trace: np.ndarray  # (n_freq,)

    @property
    def k_scores(self) -> int:
        return self.eigenvectors.shape[2]


@dataclass(frozen=True)
class DynamicFilterSet:
    """Real filter taps; ``coefficients[j, k + L, :]`` is the tap at lag ``k``."""

    coefficients: np.ndarray  # (k_scores, 2L+1, n)
    L_filter: int
    sidedness: Sidedness
    max_imag_residue: float = 0.0

    @property
    def k_scores(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n(self) -> int:
        return self.coefficients.shape[2]

    def tap(self, j: int, k: int) -> np.ndarray:
        return self.coefficients[j, k + self.L_filter]


@dataclass(frozen=True)
class ScoreMatrix:
    values: np.ndarray  # (T, k)
    explained_variance: np.ndarray
    boundary_margin: int = 0

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def k_scores(self) -> int:
        return self.values.shape[1]


def _as_array(series) -> np.ndarray:
    if isinstance(series, MultiChannelSeries):
        return series.values
    a = np.asarray(series, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def autocov(series, L_window: int) -> LagCovarianceSequence:
    """Centered lag autocovariances with divisor T for lags -L..L."""
    Z = _as_array(series)
    T, n = Z.shape
    if L_window < 0 or L_window >= T:
        raise InvalidParameterError(f"L_window must satisfy 0 <= L < T={T}, got {L_window}")
    Zc = Z - Z.mean(axis=0)
    mats = np.empty((2 * L_window + 1, n, n))
    for h in range(L_window + 1):
        c = Zc[h:].T @ Zc[: T - h] / T
        mats[L_window + h] = c
        mats[L_window - h] = c.T
    mats[L_window] = 0.5 * (mats[L_window] + mats[L_window].T)
    mats.setflags(write=False)
    return LagCovarianceSequence(matrices=mats, max_lag=L_window)


def spectral_density(
    lagcov: LagCovarianceSequence,
    kernel: str = "bartlett",
    grid: Optional[FrequencyGrid] = None,
) -> SpectralDensity:
    """Kernel-weighted Fourier sum of the lag covariances on ``grid``."""
    L = lagcov.max_lag
    if grid is None:
        grid = FrequencyGrid(max(128, 4 * L + 1))
    if grid.n_freq < 2 * L + 1:
        raise InvalidParameterError(
            f"grid of {grid.n_freq} points is too coarse for L_window={L}"
        )
    w = kernel_weights(kernel, L)
    n = lagcov.n
    stacked = np.zeros((grid.n_freq, n, n))
    for h in range(-L, L + 1):
        stacked[h % grid.n_freq] = w[h + L] * lagcov.matrices[h + L]
    raw = dft_forward(stacked, "negative", axis=0)
    mats = raw[grid.index % grid.n_freq]
    mats = 0.5 * (mats + np.conj(np.swapaxes(mats, 1, 2)))
    mats.setflags(write=False)
    return SpectralDensity(grid=grid, matrices=mats, kernel_name=kernel, L_window=L)


def _normalize_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-modulus entry is real and positive."""
    idx = np.argmax(np.abs(vectors), axis=-2)  # (..., k)
    lead = np.take_along_axis(vectors, idx[..., None, :], axis=-2)
    phase = np.conj(lead) / np.abs(lead)
    return vectors * phase


def dynamic_eigs(sd: SpectralDensity, k_scores: Optional[int] = None) -> DynamicEigs:
    """Top-``k_scores`` eigenpairs of the spectral density at every frequency.

    Eigenvectors are computed on the non-negative half of the grid and
    mirrored as ``phi(-w) = conj(phi(w))`` so that filter taps are real.
    """
    n = sd.n
    if k_scores is None:
        k_scores = n
    if not 1 <= k_scores <= n:
        raise InvalidParameterError(f"k_scores must be in [1, {n}], got {k_scores}")
    idx = sd.grid.index
    pos = {int(s): i for i, s in enumerate(idx)}
    own = [i for i, s in enumerate(idx) if s >= 0 or -s not in pos]
    vals = np.empty((len(idx), n))
    vecs = np.empty((len(idx), n, k_scores), dtype=complex)
    w, v = hermitian_eig(sd.matrices[own])
    vals[own] = w
    vecs[own] = _normalize_phase(v[:, :, :k_scores])
    for i, s in enumerate(idx):
        if s < 0 and -s in pos:
            vals[i] = vals[pos[-s]]
            vecs[i] = np.conj(vecs[pos[-s]])
    trace = np.real(np.trace(sd.matrices, axis1=1, axis2=2))
    for a in (vals, vecs, trace):
        a.setflags(write=False)
    return DynamicEigs(grid=sd.grid, eigenvalues=vals, eigenvectors=vecs, trace=trace)


def filters_from_eigs(
    eigs: DynamicEigs,
    L_filter: int,
    sidedness: Sidedness = "two_sided",
) -> DynamicFilterSet:
    """Filter taps as Riemann sums of the inverse transform over the grid."""
    N = eigs.grid.n_freq
    if L_filter < 0 or L_filter > (N - 1) // 2:
        raise InvalidParameterError(
            f"L_filter={L_filter} exceeds (n_freq-1)/2 for a grid of {N} points"
        )
    if sidedness not in ("two_sided", "one_sided"):
        raise InvalidParameterError(f"unknown sidedness {sidedness!r}")
    # eigenvector fields in FFT bin order: (N, n, k)
    fields = eigs.eigenvectors[eigs.grid.to_fft_order()]
    # (1/N) sum_s phi(w_s) exp(-i k w_s) is the forward DFT over s, divided by N
    taps = dft_forward(fields, "negative", axis=0) / N
    lags = np.arange(-L_filter, L_filter + 1)
    taps = taps[lags % N]  # (2L+1, n, k)
    residue = float(np.max(np.abs(taps.imag), initial=0.0))
    coef = np.ascontiguousarray(np.transpose(taps.real, (2, 0, 1)))
    if sidedness == "one_sided":
        coef[:, :L_filter, :] = 0.0
        norms = np.sqrt(np.sum(coef**2, axis=(1, 2)))
        norms[norms == 0.0] = 1.0
        coef /= norms[:, None, None]
    coef.setflags(write=False)
    return DynamicFilterSet(
        coefficients=coef, L_filter=L_filter, sidedness=sidedness, max_imag_residue=residue
    )


def apply_filters(Z: np.ndarray, filters: DynamicFilterSet) -> np.ndarray:
    """``sum_k phi_k' Z[t-k]`` with out-of-range taps dropped (no padding)."""
    T = Z.shape[0]
    L = filters.L_filter
    out = np.zeros((T, filters.k_scores))
    for k in range(-L, L + 1):
        taps = filters.coefficients[:, k + L, :]
        if not np.any(taps):
            continue
        lo, hi = max(0, k), T + min(0, k)
        out[lo:hi] += Z[lo - k : hi - k] @ taps.T
    return out


def dpc_scores(
    series,
    filters: DynamicFilterSet,
    explained: Optional[np.ndarray] = None,
) -> ScoreMatrix:
    """Dynamic principal component scores of ``series`` (centered first and after)."""
    Z = _as_array(series)
    T, n = Z.shape
    if n != filters.n:
        raise DimensionMismatchError(
            f"series has {n} channels but filters expect {filters.n}"
        )
    if T <= 2 * filters.L_filter:
        raise InvalidParameterError(
            f"series length {T} must exceed twice the filter span {filters.L_filter}"
        )
    scores = apply_filters(Z - Z.mean(axis=0), filters)
    scores -= scores.mean(axis=0)
    if explained is None:
        explained = np.full(filters.k_scores, np.nan)
    return ScoreMatrix(values=scores, explained_variance=np.asarray(explained, dtype=float),
                       boundary_margin=filters.L_filter)


def explained_variance(eigs: DynamicEigs) -> np.ndarray:
    """Share of the integrated trace carried by each dynamic eigenvalue."""
    total = float(np.sum(eigs.trace))
    if not total > 0.0:
        raise DegenerateInputError("spectral density has zero total trace")
    return np.sum(eigs.eigenvalues, axis=0) / total


def choose_k(v, threshold: float = 0.75) -> int:
    """Smallest number of components whose cumulative share reaches ``threshold``."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise InvalidParameterError("explained-variance vector is empty")
    if not 0.0 < threshold <= 1.0:
        raise InvalidParameterError(f"threshold must be in (0, 1], got {threshold}")
    hits = np.flatnonzero(np.cumsum(v) >= threshold - 1e-12)
    return int(hits[0]) + 1 if hits.size else int(v.size)


def default_L_window(T: int) -> int:
    return int(math.isqrt(T))


def default_n_freq(L_window: int) -> int:
    return max(128, 4 * L_window + 1)


@dataclass(frozen=True)
class DpcaResult:
    scores: ScoreMatrix
    filters: DynamicFilterSet
    eigs: DynamicEigs
    explained_variance: np.ndarray
    L_window: int
    L_filter: int
    n_freq: int
    kernel: str
    k_scores: int


def dynamic_pca(
    series,
    *,
    k_scores: Optional[int] = None,
    variance_threshold: float = 0.75,
    L_window: Optional[int] = None,
    L_filter: Optional[int] = None,
    n_freq: Optional[int] = None,
    kernel: str = "bartlett",
    sidedness: Sidedness = "two_sided",
) -> DpcaResult:
    """Run the full estimation chain; ``None`` parameters take the defaults.

    When ``k_scores`` is None it is chosen by ``variance_threshold``.
    """
    Z = _as_array(series)
    T = Z.shape[0]
    L_window = default_L_window(T) if L_window is None else L_window
    L_filter = L_window if L_filter is None else L_filter
    n_freq = default_n_freq(L_window) if n_freq is None else n_freq
    # grid must also carry the filter span
    n_freq = max(n_freq, 2 * L_filter + 1)
    sd = spectral_density(autocov(Z, L_window), kernel, FrequencyGrid(n_freq))
    full = dynamic_eigs(sd, None)
    v = explained_variance(full)
    if k_scores is None:
        k_scores = choose_k(v, variance_threshold)
    if not 1 <= k_scores <= Z.shape[1]:
        raise InvalidParameterError(f"k_scores must be in [1, {Z.shape[1]}], got {k_scores}")
    eigs = DynamicEigs(
        grid=full.grid,
        eigenvalues=full.eigenvalues,
        eigenvectors=full.eigenvectors[:, :, :k_scores],
        trace=full.trace,
    )
    filters = filters_from_eigs(eigs, L_filter, sidedness)
    scores = dpc_scores(Z, filters, v)
    return DpcaResult(scores, filters, eigs, v, L_window, L_filter, n_freq, kernel, k_scores)
