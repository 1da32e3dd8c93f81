"""Scoring detected edges against planted ground truth."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .granger import ConnectivityMatrix
from .simgen import GroundTruth

Scope = Union[str, Iterable[tuple[str, str]]]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise InvalidInputError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def scope_pairs(labels: Sequence[str], truth: GroundTruth, scope: Scope = "coi") -> list[tuple[str, str]]:
    """Ordered pairs to evaluate.

    ``"coi"``: every ordered pair of distinct ``labels``; ``"designed"``: both
    directions of each planted pair; ``"designed_direction"``: the planted
    ``cause -> effect`` edges only. Anything else is taken as an explicit
    collection of ``(cause, effect)`` pairs.
    """
    if isinstance(scope, str):
        if scope == "coi":
            return [(a, b) for a in labels for b in labels if a != b]
        if scope == "designed":
            out = []
            for a, b in truth.edge_labels:
                out += [(a, b), (b, a)]
            return out
        if scope == "designed_direction":
            return [tuple(e) for e in truth.edge_labels]
        raise InvalidParameterError(f"unknown scope {scope!r}")
    return [tuple(p) for p in scope]


def confusion(predicted: ConnectivityMatrix, truth: GroundTruth, scope: Scope = "coi") -> ConfusionCounts:
    known = set(truth.labels)
    missing = [lab for lab in predicted.labels if lab not in known]
    if missing:
        raise InvalidInputError(f"predicted labels not present in ground truth: {missing}")
    true_edges = set(truth.edge_labels)
    tp = fp = fn = tn = 0
    for cause, effect in scope_pairs(predicted.labels, truth, scope):
        try:
            hit = predicted.get(cause, effect).reject
        except KeyError:
            raise InvalidInputError(f"pair {cause} -> {effect} was not tested") from None
        actual = (cause, effect) in true_edges
        if hit and actual:
            tp += 1
        elif hit:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def _require_counts(c: ConfusionCounts) -> None:
    if c.total <= 0:
        raise InvalidInputError("confusion counts are empty")


def accuracy(c: ConfusionCounts) -> float:
    _require_counts(c)
    return (c.tp + c.tn) / c.total


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation; 0 when any marginal is empty."""
    _require_counts(c)
    denom = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if denom == 0:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(denom)


def kappa(c: ConfusionCounts) -> float:
    """Cohen's kappa; with chance agreement 1 it is 1 on perfect agreement, else 0."""
    _require_counts(c)
    n = c.total
    observed = (c.tp + c.tn) / n
    expected = ((c.tp + c.fp) * (c.tp + c.fn) + (c.fn + c.tn) * (c.fp + c.tn)) / n**2
    if expected == 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1.0 - expected)


def summarize(c: ConfusionCounts) -> dict:
    return {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn,
            "accuracy": accuracy(c), "mcc": mcc(c), "kappa": kappa(c)}


def consensus_graph(adjacencies: Sequence, threshold: float = 0.7) -> np.ndarray:
    """Edges present in at least ``threshold`` of the input binary matrices."""
    if len(adjacencies) == 0:
        raise InvalidInputError("need at least one adjacency matrix")
    if not 0.0 < threshold <= 1.0:
        raise InvalidParameterError(f"threshold must be in (0, 1], got {threshold}")
    stack = np.asarray([np.asarray(a) for a in adjacencies])
    if stack.ndim != 3:
        raise InvalidInputError("adjacency matrices must share one 2-D shape")
    counts = np.count_nonzero(stack, axis=0)
    m = stack.shape[0]
    # integer comparison avoids float ties such as 7/10 vs 0.7
    needed = math.ceil(threshold * m - 1e-9)
    return (counts >= needed).astype(int)
