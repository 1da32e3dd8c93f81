"""Bivariate Granger-causality F tests."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence

import numpy as np
from scipy import special

from .errors import DegenerateFitError, InvalidInputError, InvalidParameterError
from .numeric import OlsFit, ols_fit
from .series import MultiChannelSeries

LagCriterion = Literal["bic", "aic", "fixed"]
Correction = Literal["none", "bh"]


@dataclass(frozen=True)
class GcTestResult:
    direction: tuple[str, str]  # (cause, effect)
    f_stat: float
    df1: int
    df2: int
    p_value: float
    reject: bool
    p_lags: int
    q_lags: int
    alpha: float = 0.05
    rss_restricted: float = float("nan")
    rss_unrestricted: float = float("nan")
    p_adjusted: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "cause": self.direction[0],
            "effect": self.direction[1],
            "f_stat": self.f_stat,
            "df1": self.df1,
            "df2": self.df2,
            "p_value": self.p_value,
            "p_adjusted": self.p_adjusted,
            "reject": self.reject,
            "p_lags": self.p_lags,
            "q_lags": self.q_lags,
            "rss_restricted": self.rss_restricted,
            "rss_unrestricted": self.rss_unrestricted,
        }


@dataclass(frozen=True)
class ConnectivityMatrix:
    """One test per ordered pair of distinct labels, in row-major pair order."""

    labels: tuple[str, ...]
    results: tuple[GcTestResult, ...]
    alpha: float = 0.05
    correction: Correction = "none"
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        m = len(self.labels)
        if len(self.results) != m * (m - 1):
            raise InvalidInputError(
                f"{len(self.results)} results for {m} labels; expected {m * (m - 1)}"
            )
        lookup = {r.direction: r for r in self.results}
        if any(a == b for a, b in lookup) or len(lookup) != len(self.results):
            raise InvalidInputError("results must cover distinct ordered pairs without self-loops")
        object.__setattr__(self, "_lookup", lookup)

    def get(self, cause: str, effect: str) -> GcTestResult:
        return self._lookup[(cause, effect)]

    def adjacency(self) -> np.ndarray:
        """Binary matrix with entry ``[i, j] = 1`` when label i Granger-causes label j."""
        idx = {lab: i for i, lab in enumerate(self.labels)}
        A = np.zeros((len(self.labels),) * 2, dtype=int)
        for r in self.results:
            if r.reject:
                A[idx[r.direction[0]], idx[r.direction[1]]] = 1
        return A

    def significant(self) -> list[tuple[str, str]]:
        return [r.direction for r in self.results if r.reject]


def _lagged(v: np.ndarray, lags: int, start: int) -> np.ndarray:
    T = v.shape[0]
    return np.column_stack([v[start - i : T - i] for i in range(1, lags + 1)])


def fit_ar(
    y,
    p_lags: int,
    x=None,
    q_lags: int = 0,
    start: Optional[int] = None,
) -> OlsFit:
    """Regress ``y[t]`` on a constant, ``p_lags`` own lags and ``q_lags`` lags of ``x``.

    Rows begin at ``start`` (default ``max(p_lags, q_lags)``) so that nested
    models can share one effective sample.
    """
    y = np.asarray(y, dtype=float)
    T = y.shape[0]
    if p_lags < 1 or q_lags < 0:
        raise InvalidParameterError("p_lags must be >= 1 and q_lags >= 0")
    if x is not None:
        x = np.asarray(x, dtype=float)
        if x.shape != y.shape:
            raise InvalidInputError(f"x has shape {x.shape} but y has {y.shape}")
    if T <= p_lags + q_lags + 1:
        raise InvalidParameterError(
            f"series of length {T} too short for p={p_lags}, q={q_lags}"
        )
    start = max(p_lags, q_lags) if start is None else start
    if start < max(p_lags, q_lags):
        raise InvalidParameterError("start row must leave room for all lags")
    cols = [np.ones(T - start), _lagged(y, p_lags, start)]
    # an identically zero regressor carries no information: coefficients are 0
    null_x = x is not None and q_lags > 0 and not np.any(x)
    if x is not None and q_lags > 0 and not null_x:
        cols.append(_lagged(x, q_lags, start))
    design = np.column_stack(cols)
    n_params = design.shape[1] + (q_lags if null_x else 0)
    if design.shape[0] <= n_params:
        raise InvalidParameterError(
            f"only {design.shape[0]} usable rows for {n_params} parameters"
        )
    fit = ols_fit(design, y[start:])
    if null_x:
        fit = OlsFit(np.concatenate([fit.coefficients, np.zeros(q_lags)]),
                     fit.residuals, fit.rss, n_params)
    return fit


def f_sf(f: float, d1: float, d2: float) -> float:
    """Upper-tail probability of the F(d1, d2) distribution.

    Uses ``P(F > f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2)`` with the regularized
    incomplete beta function.
    """
    if not np.isfinite(f):
        raise InvalidInputError(f"F statistic must be finite, got {f}")
    if d1 < 1 or d2 < 1:
        raise InvalidParameterError(f"degrees of freedom must be >= 1, got ({d1}, {d2})")
    if f <= 0.0:
        return 1.0
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))


def gc_test(
    x,
    y,
    p_lags: int = 2,
    q_lags: int = 2,
    alpha: float = 0.05,
    labels: tuple[str, str] = ("x", "y"),
) -> GcTestResult:
    """F test of H0: lags of ``x`` add nothing to predicting ``y``."""
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must be in (0, 1), got {alpha}")
    if q_lags < 1:
        raise InvalidParameterError("q_lags must be >= 1")
    start = max(p_lags, q_lags)
    unrestricted = fit_ar(y, p_lags, x, q_lags, start=start)
    restricted = fit_ar(y, p_lags, start=start)
    rss_u, rss_r = unrestricted.rss, restricted.rss
    y_eff = np.asarray(y, dtype=float)[start:]
    if rss_u <= 1e-13 * float(y_eff @ y_eff):
        raise DegenerateFitError("unrestricted model fits perfectly (RSS_U = 0)")
    K = p_lags + q_lags + 1
    df2 = unrestricted.n_obs - K
    f_stat = (max(rss_r - rss_u, 0.0) / q_lags) / (rss_u / df2)
    p = f_sf(f_stat, q_lags, df2)
    return GcTestResult(
        direction=tuple(labels),
        f_stat=float(f_stat),
        df1=q_lags,
        df2=int(df2),
        p_value=p,
        reject=p < alpha,
        p_lags=p_lags,
        q_lags=q_lags,
        alpha=alpha,
        rss_restricted=rss_r,
        rss_unrestricted=rss_u,
    )


def select_lag(
    y,
    x,
    max_lag: int,
    criterion: LagCriterion = "bic",
    fixed: int = 2,
) -> tuple[int, int]:
    """Pick ``p = q`` minimizing an information criterion of the unrestricted fit.

    All candidates are fit on the rows available to the largest lag.
    """
    if max_lag < 1:
        raise InvalidParameterError("max_lag must be >= 1")
    if criterion == "fixed":
        return fixed, fixed
    if criterion not in ("bic", "aic"):
        raise InvalidParameterError(f"unknown lag criterion {criterion!r}")
    best, best_val = 1, np.inf
    for lag in range(1, max_lag + 1):
        fit = fit_ar(y, lag, x, lag, start=max_lag)
        n = fit.n_obs
        penalty = np.log(n) if criterion == "bic" else 2.0
        value = n * np.log(fit.rss / n) + fit.n_params * penalty
        if value < best_val - 1e-12:
            best, best_val = lag, value
    return best, best


def benjamini_hochberg(p_values: Sequence[float]) -> np.ndarray:
    """Step-up adjusted p-values."""
    p = np.asarray(p_values, dtype=float)
    m = p.size
    if m == 0:
        return p
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adjusted, 1.0)
    return out


def pairwise_gc(
    channels,
    p_lags: int = 2,
    q_lags: int = 2,
    alpha: float = 0.05,
    correction: Correction = "none",
    labels: Optional[Sequence[str]] = None,
    lag_criterion: LagCriterion = "fixed",
    max_lag: int = 8,
) -> ConnectivityMatrix:
    """Run :func:`gc_test` on every ordered pair of columns."""
    if isinstance(channels, MultiChannelSeries):
        values, labels = channels.values, channels.channel_labels
    else:
        values = np.asarray(channels, dtype=float)
        labels = tuple(labels) if labels is not None else tuple(f"c{i}" for i in range(values.shape[1]))
    m = values.shape[1]
    if m < 2:
        raise InvalidParameterError("pairwise testing needs at least two channels")
    if correction not in ("none", "bh"):
        raise InvalidParameterError(f"unknown correction {correction!r}")
    results = []
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            pair = (labels[i], labels[j])
            try:
                if lag_criterion == "fixed":
                    p, q = p_lags, q_lags
                else:
                    p, q = select_lag(values[:, j], values[:, i], max_lag, lag_criterion)
                results.append(gc_test(values[:, i], values[:, j], p, q, alpha, pair))
            except Exception as exc:
                exc.pair = pair
                if exc.args:
                    exc.args = (f"{pair[0]} -> {pair[1]}: {exc.args[0]}",) + exc.args[1:]
                raise
    if correction == "bh":
        adj = benjamini_hochberg([r.p_value for r in results])
        results = [replace(r, p_adjusted=float(a), reject=bool(a < alpha)) for r, a in zip(results, adj)]
    return ConnectivityMatrix(tuple(labels), tuple(results), alpha, correction)
