"""Container for synchronized multichannel recordings."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class MultiChannelSeries:
    """A T x n panel of real-valued signals with unique channel labels.

    The value array is copied on construction and marked read-only.
    """

    values: np.ndarray
    channel_labels: tuple[str, ...]
    sample_rate: Optional[float] = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise InvalidInputError("series values must be a 2-D (T x n) array")
        labels = tuple(str(label) for label in self.channel_labels)
        T, n = values.shape
        if T < 2 or n < 1:
            raise InvalidInputError(f"series needs T >= 2 and n >= 1, got T={T}, n={n}")
        if len(labels) != n:
            raise InvalidInputError(f"{len(labels)} labels given for {n} channels")
        if len(set(labels)) != n:
            dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
            raise InvalidInputError(f"duplicate channel labels: {dupes}")
        bad = ~np.isfinite(values)
        if bad.any():
            t, j = np.argwhere(bad)[0]
            raise InvalidInputError(
                f"non-finite value at time index {t}, channel {labels[j]!r}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_labels", labels)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.index_of(label)]

    def index_of(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise InvalidInputError(f"unknown channel label {label!r}") from None

    def select(self, labels: Sequence[str]) -> "MultiChannelSeries":
        idx = [self.index_of(lab) for lab in labels]
        return MultiChannelSeries(self.values[:, idx], tuple(labels), self.sample_rate)

    def drop(self, labels: Sequence[str]) -> "MultiChannelSeries":
        excluded = set(labels)
        keep = [lab for lab in self.channel_labels if lab not in excluded]
        return self.select(keep)
