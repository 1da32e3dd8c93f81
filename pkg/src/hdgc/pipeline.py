"""End-to-end analysis: background scores -> residualized COI -> pairwise GC."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .confound import RegressionSpec, residualize_channels, static_pca_scores
from .errors import HdgcError, InvalidInputError, InvalidParameterError, StageError
from .granger import ConnectivityMatrix, pairwise_gc
from .series import MultiChannelSeries
from .spectral import KERNELS, default_L_window, default_n_freq, dynamic_pca

logger = logging.getLogger(__name__)

Auto = Union[int, str]


@dataclass(frozen=True)
class PipelineConfig:
    coi_labels: tuple[str, ...] = ()
    background_labels: Optional[tuple[str, ...]] = None
    method: str = "sdpca"
    L_window: Auto = "auto"
    L_filter: Auto = "auto"
    n_freq: Auto = "auto"
    kernel: str = "bartlett"
    k_scores: Optional[int] = None
    variance_threshold: float = 0.75
    sidedness: str = "two_sided"
    interactions: bool = False
    intercept: bool = True
    scale_background: bool = False
    p_lags: int = 2
    q_lags: int = 2
    lag_criterion: str = "fixed"
    max_lag: int = 8
    alpha: float = 0.05
    correction: str = "none"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "coi_labels", tuple(self.coi_labels))
        if self.background_labels is not None:
            object.__setattr__(self, "background_labels", tuple(self.background_labels))
        if self.method not in ("sdpca", "pca"):
            raise InvalidParameterError(f"unknown method {self.method!r}")
        if self.kernel not in KERNELS:
            raise InvalidParameterError(f"unknown kernel {self.kernel!r}")
        if self.sidedness not in ("two_sided", "one_sided"):
            raise InvalidParameterError(f"unknown sidedness {self.sidedness!r}")
        if not 0.0 < self.variance_threshold <= 1.0:
            raise InvalidParameterError("variance_threshold must be in (0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidParameterError("alpha must be in (0, 1)")
        if self.correction not in ("none", "bh"):
            raise InvalidParameterError(f"unknown correction {self.correction!r}")
        if self.lag_criterion not in ("fixed", "bic", "aic"):
            raise InvalidParameterError(f"unknown lag criterion {self.lag_criterion!r}")
        if len(set(self.coi_labels)) != len(self.coi_labels):
            raise InvalidParameterError("coi_labels must be distinct")
        for name in ("L_window", "L_filter", "n_freq"):
            v = getattr(self, name)
            if not (v == "auto" or (isinstance(v, int) and v >= 0)):
                raise InvalidParameterError(f"{name} must be a non-negative integer or 'auto'")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["coi_labels"] = list(self.coi_labels)
        if self.background_labels is not None:
            d["background_labels"] = list(self.background_labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown pipeline config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class AnalysisResult:
    connectivity: ConnectivityMatrix
    resolved: dict
    explained_variance: np.ndarray
    k_scores: int
    residuals: np.ndarray
    scores: np.ndarray
    dropped_background: tuple[str, ...] = ()
    dropped_design_columns: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict)


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except HdgcError as exc:
                raise StageError(name, exc) from exc
        return inner
    return wrap


@_stage("split")
def split_channels(series: MultiChannelSeries, config: PipelineConfig):
    """COI block and background block; background defaults to all other channels."""
    if len(config.coi_labels) < 2:
        raise InvalidParameterError("at least two channels of interest are required")
    coi = series.select(config.coi_labels)
    if config.background_labels is not None:
        overlap = set(config.background_labels) & set(config.coi_labels)
        if overlap:
            raise InvalidParameterError(f"background overlaps COI: {sorted(overlap)}")
        background = series.select(config.background_labels)
    else:
        if series.n == len(config.coi_labels):
            raise InvalidInputError("no background channels remain after removing the COI")
        background = series.drop(config.coi_labels)
    return coi, background


def prepare_background(background: MultiChannelSeries, scale: bool = False):
    """Drop zero-variance channels (with a warning) and optionally standardize."""
    Z = background.values
    sd = Z.std(axis=0)
    constant = sd <= 1e-12 * np.maximum(1.0, np.abs(Z).max(axis=0))
    dropped = tuple(lab for lab, c in zip(background.channel_labels, constant) if c)
    if dropped:
        logger.warning("dropping %d constant background channels: %s", len(dropped), list(dropped))
    Z = Z[:, ~constant]
    if Z.shape[1] == 0:
        raise InvalidInputError("every background channel is constant")
    Z = Z - Z.mean(axis=0)
    if scale:
        Z = Z / Z.std(axis=0)
    return Z, dropped


def resolve_parameters(config: PipelineConfig, T: int) -> dict:
    L_window = default_L_window(T) if config.L_window == "auto" else int(config.L_window)
    L_filter = L_window if config.L_filter == "auto" else int(config.L_filter)
    n_freq = default_n_freq(L_window) if config.n_freq == "auto" else int(config.n_freq)
    n_freq = max(n_freq, 2 * L_filter + 1)
    return {"L_window": L_window, "L_filter": L_filter, "n_freq": n_freq}


@_stage("background")
def background_scores(Z: np.ndarray, config: PipelineConfig, resolved: dict):
    if config.method == "pca":
        sm = static_pca_scores(Z, config.k_scores, config.variance_threshold)
        return sm.values, sm.explained_variance
    res = dynamic_pca(
        Z,
        k_scores=config.k_scores,
        variance_threshold=config.variance_threshold,
        L_window=resolved["L_window"],
        L_filter=resolved["L_filter"],
        n_freq=resolved["n_freq"],
        kernel=config.kernel,
        sidedness=config.sidedness,
    )
    return res.scores.values, res.explained_variance


@_stage("residualize")
def _residualize(coi: MultiChannelSeries, scores: np.ndarray, config: PipelineConfig):
    spec = RegressionSpec(include_intercept=config.intercept, include_interactions=config.interactions)
    return residualize_channels(coi, scores, spec)


@_stage("granger")
def _granger(resid: np.ndarray, labels, config: PipelineConfig) -> ConnectivityMatrix:
    return pairwise_gc(
        resid,
        p_lags=config.p_lags,
        q_lags=config.q_lags,
        alpha=config.alpha,
        correction=config.correction,
        labels=labels,
        lag_criterion=config.lag_criterion,
        max_lag=config.max_lag,
    )


def analyze(series: MultiChannelSeries, config: PipelineConfig) -> AnalysisResult:
    """Run the full procedure on ``series``.

    Only background channels enter the score estimation; the COI block is
    touched solely at the residualization step.
    """
    coi, background = split_channels(series, config)
    Z, dropped = _stage("background")(prepare_background)(background, config.scale_background)
    resolved = resolve_parameters(config, series.T) if config.method == "sdpca" else {}
    scores, explained = background_scores(Z, config, resolved)
    residualized = _residualize(coi, scores, config)
    connectivity = _granger(residualized.residuals, coi.channel_labels, config)
    resolved = dict(resolved, k_scores=int(scores.shape[1]), method=config.method,
                    n_background=int(Z.shape[1]))
    return AnalysisResult(
        connectivity=connectivity,
        resolved=resolved,
        explained_variance=np.asarray(explained),
        k_scores=int(scores.shape[1]),
        residuals=residualized.residuals,
        scores=scores,
        dropped_background=dropped,
        dropped_design_columns=residualized.dropped_columns,
        metadata={"boundary_margin": resolved.get("L_filter", 0)},
    )
