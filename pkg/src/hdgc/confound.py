"""Partialling background scores out of the channels of interest."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError, SingularDesignError
from .numeric import OlsFit, hermitian_eig, independent_columns, ols_fit
from .series import MultiChannelSeries
from .spectral import ScoreMatrix, autocov, choose_k

logger = logging.getLogger(__name__)

COND_LIMIT = 1e10


@dataclass(frozen=True)
class RegressionSpec:
    include_intercept: bool = True
    include_interactions: bool = False
    interaction_order: int = 2

    def __post_init__(self) -> None:
        if self.include_interactions and self.interaction_order != 2:
            raise InvalidParameterError("only pairwise (order 2) interactions are supported")


@dataclass(frozen=True)
class IsolatedPair:
    x: np.ndarray
    y: np.ndarray
    fit_x: OlsFit
    fit_y: OlsFit


@dataclass(frozen=True)
class Residualized:
    """Residuals for any number of target channels against one design."""

    residuals: np.ndarray  # (T, m)
    fits: tuple[OlsFit, ...]
    design_columns: tuple[str, ...]
    dropped_columns: tuple[str, ...] = ()


def _score_values(scores) -> np.ndarray:
    vals = scores.values if isinstance(scores, ScoreMatrix) else np.asarray(scores, dtype=float)
    return vals[:, None] if vals.ndim == 1 else vals


def design_column_names(k: int, spec: RegressionSpec) -> list[str]:
    names = ["const"] if spec.include_intercept else []
    names += [f"dpc{j + 1}" for j in range(k)]
    if spec.include_interactions:
        names += [f"dpc{i + 1}*dpc{j + 1}" for i in range(k) for j in range(i + 1, k)]
    return names


def build_design(scores, spec: RegressionSpec = RegressionSpec()) -> np.ndarray:
    """Columns: optional intercept, the scores, then pairwise products ``i < j``."""
    S = _score_values(scores)
    T, k = S.shape
    if k < 1:
        raise InvalidParameterError("at least one score column is required")
    cols = []
    if spec.include_intercept:
        cols.append(np.ones((T, 1)))
    cols.append(S)
    if spec.include_interactions and k > 1:
        i, j = np.triu_indices(k, 1)
        cols.append(S[:, i] * S[:, j])
    return np.hstack(cols)


def _prune(design: np.ndarray, names: list[str], spec: RegressionSpec):
    if not spec.include_interactions:
        return design, names, []
    keep = independent_columns(design, COND_LIMIT)
    dropped = [names[c] for c in range(len(names)) if c not in set(keep.tolist())]
    if any("*" not in name for name in dropped):
        bad = [c for c in range(len(names)) if names[c] in dropped and "*" not in names[c]]
        raise SingularDesignError(f"score columns {bad} are linearly dependent", tuple(bad))
    if dropped:
        logger.warning("dropped %d near-collinear interaction columns: %s", len(dropped), dropped)
    return design[:, keep], [names[c] for c in keep], dropped


def residualize_channels(targets, scores, spec: RegressionSpec = RegressionSpec()) -> Residualized:
    """Regress each target column on the score design and keep the residuals."""
    Y = targets.values if isinstance(targets, MultiChannelSeries) else np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    S = _score_values(scores)
    if Y.shape[0] != S.shape[0]:
        raise DimensionMismatchError(
            f"targets have {Y.shape[0]} time points but scores have {S.shape[0]}"
        )
    names = design_column_names(S.shape[1], spec)
    design, names, dropped = _prune(build_design(S, spec), names, spec)
    fits = tuple(ols_fit(design, Y[:, c]) for c in range(Y.shape[1]))
    resid = np.column_stack([f.residuals for f in fits])
    return Residualized(resid, fits, tuple(names), tuple(dropped))


def residualize(targets, scores, spec: RegressionSpec = RegressionSpec()) -> IsolatedPair:
    """Background-free versions of the two channels of interest."""
    r = residualize_channels(targets, scores, spec)
    if r.residuals.shape[1] != 2:
        raise DimensionMismatchError(
            f"residualize expects exactly two target channels, got {r.residuals.shape[1]}"
        )
    return IsolatedPair(x=r.residuals[:, 0], y=r.residuals[:, 1], fit_x=r.fits[0], fit_y=r.fits[1])


def static_pca_scores(background, k: Optional[int] = None, variance_threshold: float = 0.75) -> ScoreMatrix:
    """Classical PCA scores from the zero-lag covariance.

    Eigenvectors carry the same sign rule as the dynamic version: the entry of
    largest magnitude is positive. When ``k`` is None it is chosen by
    ``variance_threshold`` on the eigenvalue shares.
    """
    Z = background.values if isinstance(background, MultiChannelSeries) else np.asarray(background, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n = Z.shape[1]
    w, V = hermitian_eig(autocov(Z, 0).lag(0))
    w = np.clip(w, 0.0, None)
    total = w.sum()
    explained = w / total if total > 0 else np.zeros_like(w)
    if k is None:
        k = choose_k(explained, variance_threshold)
    if not 1 <= k <= n:
        raise InvalidParameterError(f"k must be in [1, {n}], got {k}")
    V = np.real(V[:, :k])
    lead = V[np.argmax(np.abs(V), axis=0), np.arange(k)]
    V = V * np.sign(lead)
    scores = (Z - Z.mean(axis=0)) @ V
    return ScoreMatrix(values=scores, explained_variance=explained)
