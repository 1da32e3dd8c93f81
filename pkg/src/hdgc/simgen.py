"""Synthetic EEG-like networks with planted X_i -> Y_i links.

Every paired channel X_i is a weighted mix of five band-limited AR(2)
oscillators plus white noise; Y_i is a distributed-lag transform of X_i plus
noise. External channels Z_j are generated like X_i and then confound the
pairs through one of three influence schemes.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from scipy import optimize, signal

from .errors import InvalidParameterError
from .series import MultiChannelSeries

Scheme = Literal["none", "linear", "nonlinear", "causative"]
SCHEMES = ("none", "linear", "nonlinear", "causative")
BURN_IN = 200


def ar2_variance(r: float, rho: float, sigma: float = 1.0) -> float:
    """Stationary variance of nu(t) = psi1 nu(t-1) + psi2 nu(t-2) + eta(t)."""
    psi1, psi2 = 2.0 * r * math.cos(rho), -(r**2)
    return sigma**2 * (1.0 - psi2) / ((1.0 + psi2) * ((1.0 - psi2) ** 2 - psi1**2))


@dataclass(frozen=True)
class BandSpec:
    name: str
    r: float
    rho: float
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.r < 1.0 and 0.0 <= self.rho <= math.pi and self.sigma > 0.0):
            raise InvalidParameterError(
                f"band {self.name!r}: need 0 <= r < 1, 0 <= rho <= pi, sigma > 0 "
                f"(got r={self.r}, rho={self.rho}, sigma={self.sigma})"
            )

    @property
    def coefficients(self) -> tuple[float, float]:
        return 2.0 * self.r * math.cos(self.rho), -(self.r**2)

    @classmethod
    def at_frequency(cls, name: str, hz: float, sample_rate: float = 160.0, r: float = 0.95):
        """Band peaking at ``hz``, innovation scaled to unit stationary variance."""
        rho = 2.0 * math.pi * hz / sample_rate
        return cls(name, r, rho, 1.0 / math.sqrt(ar2_variance(r, rho)))


# nominal centre frequencies at 160 samples/s
DEFAULT_BANDS: tuple[BandSpec, ...] = (
    BandSpec.at_frequency("delta", 2.0),
    BandSpec.at_frequency("theta", 6.0),
    BandSpec.at_frequency("alpha", 10.0),
    BandSpec.at_frequency("beta", 20.0),
    BandSpec.at_frequency("gamma", 40.0),
)


@dataclass(frozen=True)
class NetworkConfig:
    N: int = 20
    N_external: int = 108
    T: int = 2000
    scheme: Scheme = "linear"
    n_influencers: int = 30
    influence_weight: float = 0.1
    interaction_scale: float = 0.0
    mu: float = 0.5
    effect_magnitude: float = 1.5
    effect_coeffs: Optional[tuple[float, ...]] = None
    max_effect_radius: float = 0.95
    sigma_eps: float = 1.0
    sigma_xi: float = 1.0
    sigma_nu: float = 1.0
    band_weight_range: tuple[float, float] = (0.5, 1.5)
    bands: tuple[BandSpec, ...] = DEFAULT_BANDS
    connected_size: Optional[int] = None
    shared_influencers: bool = False
    shared_bands: bool = False
    sample_rate: float = 160.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.N < 2 or self.N % 2:
            raise InvalidParameterError(f"N must be a positive even number, got {self.N}")
        if self.N_external < 0 or self.T < 100:
            raise InvalidParameterError("need N_external >= 0 and T >= 100")
        if self.scheme not in SCHEMES:
            raise InvalidParameterError(f"unknown scheme {self.scheme!r}")
        if self.influence_weight < 0 or self.interaction_scale < 0:
            raise InvalidParameterError("influence weights must be non-negative")
        if not -1.0 < self.mu < 1.0:
            raise InvalidParameterError(f"mu must lie in (-1, 1), got {self.mu}")
        if min(self.sigma_eps, self.sigma_xi, self.sigma_nu) <= 0:
            raise InvalidParameterError("noise standard deviations must be positive")
        lo, hi = self.band_weight_range
        if not 0 <= lo <= hi:
            raise InvalidParameterError("band_weight_range must satisfy 0 <= low <= high")
        pool = self.N_external if self.connected_size is None else self.connected_size
        if self.connected_size is not None and not 0 <= self.connected_size <= self.N_external:
            raise InvalidParameterError("connected_size must be within [0, N_external]")
        if self.scheme != "none" and self.n_influencers > pool:
            raise InvalidParameterError(
                f"n_influencers={self.n_influencers} exceeds the connected set of {pool}"
            )
        if self.n_influencers < 0:
            raise InvalidParameterError("n_influencers must be >= 0")

    @property
    def labels(self) -> tuple[str, ...]:
        h = self.N // 2
        return (tuple(f"X{i + 1}" for i in range(h)) + tuple(f"Y{i + 1}" for i in range(h))
                + tuple(f"Z{j + 1}" for j in range(self.N_external)))

    @property
    def coi_labels(self) -> tuple[str, ...]:
        return self.labels[: self.N]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["band_weight_range"] = list(self.band_weight_range)
        d["bands"] = [dataclasses.asdict(b) for b in self.bands]
        if self.effect_coeffs is not None:
            d["effect_coeffs"] = list(self.effect_coeffs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown network config fields: {sorted(unknown)}")
        if "bands" in d:
            d["bands"] = tuple(b if isinstance(b, BandSpec) else BandSpec(**b) for b in d["bands"])
        if "band_weight_range" in d:
            d["band_weight_range"] = tuple(d["band_weight_range"])
        if d.get("effect_coeffs") is not None:
            d["effect_coeffs"] = tuple(d["effect_coeffs"])
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    labels: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    influencer_map: dict = field(default_factory=dict)  # label -> tuple of Z labels
    weights: dict = field(default_factory=dict)  # label -> tuple of W values
    effect_coeffs: dict = field(default_factory=dict)  # Y label -> (psi1, psi2)
    config: Optional[NetworkConfig] = None

    @property
    def edge_labels(self) -> list[tuple[str, str]]:
        return [(self.labels[a], self.labels[b]) for a, b in self.edges]

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "edges": [list(e) for e in self.edge_labels],
            "edge_indices": [list(e) for e in self.edges],
            "influencer_map": {k: list(v) for k, v in self.influencer_map.items()},
            "weights": {k: list(v) for k, v in self.weights.items()},
            "effect_coeffs": {k: list(v) for k, v in self.effect_coeffs.items()},
            "config": self.config.to_dict() if self.config else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        labels = tuple(d["labels"])
        index = {lab: i for i, lab in enumerate(labels)}
        if "edge_indices" in d:
            edges = tuple(tuple(e) for e in d["edge_indices"])
        else:
            edges = tuple((index[a], index[b]) for a, b in d["edges"])
        cfg = NetworkConfig.from_dict(d["config"]) if d.get("config") else None
        return cls(
            labels=labels,
            edges=edges,
            influencer_map={k: tuple(v) for k, v in d.get("influencer_map", {}).items()},
            weights={k: tuple(v) for k, v in d.get("weights", {}).items()},
            effect_coeffs={k: tuple(v) for k, v in d.get("effect_coeffs", {}).items()},
            config=cfg,
        )


def ar2_band(T: int, spec: BandSpec, rng: np.random.Generator, burn_in: int = BURN_IN) -> np.ndarray:
    """Stationary AR(2) oscillator of length ``T`` after discarding ``burn_in`` samples."""
    psi1, psi2 = spec.coefficients
    if not (psi2 > -1.0 and psi1 + psi2 < 1.0 and psi2 - psi1 < 1.0):
        raise InvalidParameterError(f"band {spec.name!r} is not stationary")
    eta = rng.normal(0.0, spec.sigma, size=T + burn_in)
    return signal.lfilter([1.0], [1.0, -psi1, -psi2], eta)[burn_in:]


def companion_radius(coeffs: Sequence[float]) -> float:
    """Largest root modulus of z^p - c1 z^(p-1) - ... - cp."""
    return float(np.max(np.abs(np.roots(np.concatenate([[1.0], -np.asarray(coeffs, float)])))))


def stabilize(coeffs: Sequence[float], radius: float = 0.95) -> tuple[np.ndarray, float]:
    """Largest uniform scale in (0, 1] keeping the companion radius <= ``radius``."""
    c = np.asarray(coeffs, dtype=float)
    if companion_radius(c) <= radius:
        return c, 1.0
    scale = optimize.brentq(lambda s: companion_radius(s * c) - radius, 1e-9, 1.0, xtol=1e-14)
    # brentq may land a hair above the target
    while companion_radius(scale * c) > radius:
        scale = np.nextafter(scale, 0.0)
    return scale * c, float(scale)


def _band_mix(T: int, config: NetworkConfig, rng: np.random.Generator,
              latent: Optional[np.ndarray] = None) -> np.ndarray:
    """Channel-weighted sum of band oscillators plus white noise.

    ``latent`` (T x n_bands) holds network-wide oscillators; when absent the
    channel draws its own.
    """
    lo, hi = config.band_weight_range
    weights = rng.uniform(lo, hi, size=len(config.bands))
    out = rng.normal(0.0, config.sigma_eps, size=T)
    for b, (w, band) in enumerate(zip(weights, config.bands)):
        out += w * (ar2_band(T, band, rng) if latent is None else latent[:, b])
    return out


def _streams(seed: int) -> dict[str, np.random.SeedSequence]:
    names = ("x", "y", "z", "effects", "influence", "scheme", "bands")
    return dict(zip(names, np.random.SeedSequence(seed).spawn(len(names))))


def gen_network(config: NetworkConfig) -> tuple[MultiChannelSeries, GroundTruth]:
    """Base network (no influence applied) and its ground truth.

    Influencer sets and weights for the configured scheme are drawn here and
    recorded in the ground truth; the ``apply_*`` functions consume them.
    """
    T, h = config.T, config.N // 2
    streams = _streams(config.seed)
    x_rngs = [np.random.default_rng(s) for s in streams["x"].spawn(h)]
    y_rngs = [np.random.default_rng(s) for s in streams["y"].spawn(h)]
    z_rngs = [np.random.default_rng(s) for s in streams["z"].spawn(config.N_external)]
    eff_rng = np.random.default_rng(streams["effects"])
    latent = None
    if config.shared_bands:
        band_rng = np.random.default_rng(streams["bands"])
        latent = np.column_stack([ar2_band(T, b, band_rng) for b in config.bands])

    X = np.column_stack([_band_mix(T, config, g, latent) for g in x_rngs])
    Z = (np.column_stack([_band_mix(T, config, g, latent) for g in z_rngs])
         if config.N_external else np.empty((T, 0)))
    Y = np.empty((T, h))
    labels = config.labels
    effects = {}
    for i in range(h):
        if config.effect_coeffs is not None:
            psi = np.asarray(config.effect_coeffs, dtype=float)
        else:
            signs = eff_rng.choice([-1.0, 1.0], size=2)
            psi, _ = stabilize(config.effect_magnitude * signs, config.max_effect_radius)
        effects[labels[h + i]] = tuple(float(c) for c in psi)
        lagged = sum(c * np.concatenate([np.zeros(k + 1), X[: T - k - 1, i]])
                     for k, c in enumerate(psi))
        Y[:, i] = lagged + y_rngs[i].normal(0.0, config.sigma_xi, size=T)

    influencers, weights = _draw_influence(config, np.random.default_rng(streams["influence"]))
    series = MultiChannelSeries(np.hstack([X, Y, Z]), labels, config.sample_rate)
    truth = GroundTruth(
        labels=labels,
        edges=tuple((i, h + i) for i in range(h)),
        influencer_map=influencers,
        weights=weights,
        effect_coeffs=effects,
        config=config,
    )
    return series, truth


def _draw_influence(config: NetworkConfig, rng: np.random.Generator):
    if config.scheme == "none" or config.N_external == 0 or config.n_influencers == 0:
        return {}, {}
    if config.connected_size is None:
        connected = np.arange(config.N_external)
    else:
        connected = np.sort(rng.choice(config.N_external, config.connected_size, replace=False))
    omega = config.influence_weight
    k = config.n_influencers
    z_labels = config.labels[config.N:]
    influencers, weights = {}, {}
    h = config.N // 2
    for c, label in enumerate(config.coi_labels):
        if config.shared_influencers and c >= h:
            partner = config.coi_labels[c - h]
            influencers[label], weights[label] = influencers[partner], weights[partner]
            continue
        picks = rng.choice(connected, size=k, replace=False)
        u = rng.uniform(15.0 / 16.0, 17.0 / 16.0, size=k)
        influencers[label] = tuple(z_labels[j] for j in picks)
        weights[label] = tuple(float(w) for w in omega * u)
    return influencers, weights


def _influence_terms(net: MultiChannelSeries, truth: GroundTruth, label: str):
    """Per-influencer weighted columns W_ij Z_j(t) for one paired channel."""
    zs = truth.influencer_map.get(label, ())
    if not zs:
        return np.zeros((net.T, 0))
    idx = [net.index_of(z) for z in zs]
    return net.values[:, idx] * np.asarray(truth.weights[label])


def _check_scheme(config: NetworkConfig, expected: str) -> None:
    if config.scheme != expected:
        raise InvalidParameterError(f"config scheme is {config.scheme!r}, expected {expected!r}")


def _replace_paired(net: MultiChannelSeries, truth: GroundTruth, new_cols: dict) -> MultiChannelSeries:
    values = np.array(net.values, copy=True)
    for label, col in new_cols.items():
        values[:, net.index_of(label)] = col
    return MultiChannelSeries(values, net.channel_labels, net.sample_rate)


def _paired_labels(truth: GroundTruth) -> list[str]:
    pairs = sorted({a for e in truth.edges for a in e})
    return [truth.labels[i] for i in pairs]


def apply_linear_influence(net: MultiChannelSeries, truth: GroundTruth, config: NetworkConfig) -> MultiChannelSeries:
    """Add ``sum_j W_ij Z_j(t)`` to every paired channel."""
    _check_scheme(config, "linear")
    cols = {}
    for label in _paired_labels(truth):
        terms = _influence_terms(net, truth, label)
        if terms.shape[1]:
            cols[label] = net.column(label) + terms.sum(axis=1)
    return _replace_paired(net, truth, cols)


def softplus(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    pos = x > 0
    out = np.empty_like(x)
    out[pos] = x[pos] + np.log1p(np.exp(-x[pos]))
    out[~pos] = np.log1p(np.exp(x[~pos]))
    return out


def apply_nonlinear_influence(net: MultiChannelSeries, truth: GroundTruth, config: NetworkConfig) -> MultiChannelSeries:
    """Add softplus of the linear influence plus scaled pairwise products."""
    _check_scheme(config, "nonlinear")
    cols = {}
    for label in _paired_labels(truth):
        terms = _influence_terms(net, truth, label)
        linear = terms.sum(axis=1)
        # sum_{j<k} a_j a_k = ((sum a)^2 - sum a^2) / 2
        pairs = 0.5 * (linear**2 - np.sum(terms**2, axis=1))
        cols[label] = net.column(label) + softplus(linear) + config.interaction_scale * pairs
    return _replace_paired(net, truth, cols)


def apply_causative_influence(net: MultiChannelSeries, truth: GroundTruth, config: NetworkConfig) -> MultiChannelSeries:
    """Replace paired channels by ``mu X(t-1) + sum_j W_ij Z_j(t-1) + nu(t)``.

    The value before the first sample is taken as zero.
    """
    _check_scheme(config, "causative")
    labels = _paired_labels(truth)
    noise_rngs = [np.random.default_rng(s)
                  for s in _streams(config.seed)["scheme"].spawn(len(labels))]
    cols = {}
    for label, rng in zip(labels, noise_rngs):
        drive = config.mu * net.column(label) + _influence_terms(net, truth, label).sum(axis=1)
        lagged = np.concatenate([[0.0], drive[:-1]])
        cols[label] = lagged + rng.normal(0.0, config.sigma_nu, size=net.T)
    return _replace_paired(net, truth, cols)


def simulate(config: NetworkConfig) -> tuple[MultiChannelSeries, GroundTruth]:
    """Base network with the configured influence scheme applied."""
    net, truth = gen_network(config)
    apply = {
        "linear": apply_linear_influence,
        "nonlinear": apply_nonlinear_influence,
        "causative": apply_causative_influence,
    }.get(config.scheme)
    if apply is not None:
        net = apply(net, truth, config)
    return net, truth
