"""CSV ingest, derived-channel augmentation and report serialization."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import FormatError, InvalidInputError, InvalidSpecError, OutputError
from .granger import ConnectivityMatrix, GcTestResult
from .series import MultiChannelSeries

SCHEMA_VERSION = "1.0"


def fmt(x: float) -> str:
    """Seventeen significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def read_series(path, format: str = "csv", sample_rate: Optional[float] = None) -> MultiChannelSeries:
    """Header row of channel labels, then one row per time point."""
    if format != "csv":
        raise FormatError(f"unsupported format {format!r}; only 'csv' is read")
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not UTF-8 text ({exc.reason})") from None
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if any(not h for h in header):
        raise FormatError(f"{path}: blank channel label in header")
    seen = set()
    for h in header:
        if h in seen:
            raise FormatError(f"{path}: duplicate channel label {h!r}")
        seen.add(h)
    body = [r for r in rows[1:] if r]
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != len(header):
            raise FormatError(f"{path}: row {line} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise FormatError(
                    f"{path}: row {line}, column {j + 1} ({header[j]}): cannot parse {cell!r}"
                ) from None
            if not math.isfinite(v):
                raise FormatError(
                    f"{path}: row {line}, column {j + 1} ({header[j]}): non-finite value {cell!r}"
                )
            values[i, j] = v
    return MultiChannelSeries(values, tuple(header), sample_rate)


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_series(series: MultiChannelSeries, path) -> Path:
    path = Path(path)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(series.channel_labels)
        for row in series.values:
            w.writerow([fmt(v) for v in row])
    return path


@dataclass(frozen=True)
class AugmentationSpec:
    pair_differences: tuple[tuple[str, str], ...] = ()
    regional_averages: tuple[tuple[str, tuple[str, ...]], ...] = ()
    laplacians: tuple[tuple[str, tuple[str, ...]], ...] = ()
    products: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pair_differences", tuple(tuple(p) for p in self.pair_differences))
        object.__setattr__(self, "products", tuple(tuple(p) for p in self.products))
        object.__setattr__(self, "regional_averages",
                           tuple((n, tuple(ls)) for n, ls in self.regional_averages))
        object.__setattr__(self, "laplacians", tuple((c, tuple(ls)) for c, ls in self.laplacians))
        for a in self.pair_differences + self.products:
            if len(a) != 2:
                raise InvalidSpecError(f"expected a pair of labels, got {a!r}")
        for name, members in self.regional_averages + self.laplacians:
            if not members:
                raise InvalidSpecError(f"{name!r}: empty label set")

    def __len__(self) -> int:
        return (len(self.pair_differences) + len(self.regional_averages)
                + len(self.laplacians) + len(self.products))

    def new_labels(self) -> list[str]:
        return ([f"{a}-{b}" for a, b in self.pair_differences]
                + [name for name, _ in self.regional_averages]
                + [f"lap({c})" for c, _ in self.laplacians]
                + [f"{a}*{b}" for a, b in self.products])

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentationSpec":
        known = {"pair_differences", "regional_averages", "laplacians", "products"}
        unknown = set(d) - known
        if unknown:
            raise InvalidSpecError(f"unknown augmentation fields: {sorted(unknown)}")
        return cls(
            pair_differences=d.get("pair_differences", ()),
            regional_averages=[(e["name"], e["labels"]) if isinstance(e, dict) else e
                               for e in d.get("regional_averages", ())],
            laplacians=[(e["center"], e["neighbors"]) if isinstance(e, dict) else e
                        for e in d.get("laplacians", ())],
            products=d.get("products", ()),
        )


def augment_channels(series: MultiChannelSeries, spec: AugmentationSpec) -> MultiChannelSeries:
    """Append differences, regional averages, Laplacians and products, in that order."""
    def col(label: str) -> np.ndarray:
        try:
            return series.column(label)
        except InvalidInputError:
            raise InvalidSpecError(f"augmentation references unknown channel {label!r}") from None

    new = []
    for a, b in spec.pair_differences:
        new.append(col(a) - col(b))
    for _, members in spec.regional_averages:
        new.append(np.mean([col(m) for m in members], axis=0))
    for center, neighbors in spec.laplacians:
        new.append(col(center) - np.mean([col(m) for m in neighbors], axis=0))
    for a, b in spec.products:
        new.append(col(a) * col(b))
    labels = spec.new_labels()
    clash = set(labels) & set(series.channel_labels)
    if clash or len(set(labels)) != len(labels):
        raise InvalidSpecError(f"augmented labels must be new and unique: {sorted(clash) or labels}")
    if not new:
        return series
    values = np.hstack([series.values, np.column_stack(new)])
    return MultiChannelSeries(values, series.channel_labels + tuple(labels), series.sample_rate)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(doc: dict, path) -> Path:
    path = Path(path)
    with _open_for_write(path) as fh:
        # json writes floats with repr, which round-trips exactly
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=False)
        fh.write("\n")
    return path


def report_document(cm: ConnectivityMatrix, config: dict, resolved: dict,
                    explained_variance: Sequence[float] = (), extra: Optional[dict] = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "labels": list(cm.labels),
        "alpha": cm.alpha,
        "correction": cm.correction,
        "config": config,
        "resolved": resolved,
        "explained_variance": [float(v) for v in explained_variance],
        "tests": [r.to_dict() for r in cm.results],
    }
    if extra:
        doc.update(extra)
    return doc


def write_adjacency_csv(cm: ConnectivityMatrix, path) -> Path:
    """Square 0/1 matrix, rows are causes; the diagonal is left empty."""
    A = cm.adjacency()
    path = Path(path)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(cm.labels))
        for i, lab in enumerate(cm.labels):
            w.writerow([lab] + ["" if i == j else str(int(A[i, j])) for j in range(len(cm.labels))])
    return path


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_dot(cm: ConnectivityMatrix, path, name: str = "connectivity") -> Path:
    path = Path(path)
    with _open_for_write(path) as fh:
        fh.write(f"digraph {_dot_id(name)} {{\n")
        for lab in cm.labels:
            fh.write(f"  {_dot_id(lab)};\n")
        for r in cm.results:
            if r.reject:
                p = r.p_adjusted if r.p_adjusted is not None else r.p_value
                fh.write(f"  {_dot_id(r.direction[0])} -> {_dot_id(r.direction[1])} "
                         f"[label={_dot_id(format(p, '.3g'))}];\n")
        fh.write("}\n")
    return path


def write_report(cm: ConnectivityMatrix, out_dir, config: dict, resolved: dict,
                 explained_variance: Sequence[float] = (), extra: Optional[dict] = None,
                 stem: str = "report") -> dict[str, Path]:
    """JSON report, adjacency CSV and DOT digraph under ``out_dir``."""
    out_dir = Path(out_dir)
    if out_dir.exists() and not out_dir.is_dir():
        raise OutputError(f"{out_dir} exists and is not a directory")
    if out_dir.exists() and not os.access(out_dir, os.W_OK):
        raise OutputError(f"{out_dir} is not writable")
    doc = report_document(cm, config, resolved, explained_variance, extra)
    return {
        "json": write_json(doc, out_dir / f"{stem}.json"),
        "adjacency": write_adjacency_csv(cm, out_dir / f"{stem}_adjacency.csv"),
        "dot": write_dot(cm, out_dir / f"{stem}.dot"),
    }


def read_json(path) -> dict:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def connectivity_from_report(doc: dict) -> ConnectivityMatrix:
    """Rebuild the connectivity matrix stored in a JSON report."""
    try:
        results = tuple(
            GcTestResult(
                direction=(t["cause"], t["effect"]),
                f_stat=t["f_stat"], df1=t["df1"], df2=t["df2"], p_value=t["p_value"],
                reject=bool(t["reject"]), p_lags=t["p_lags"], q_lags=t["q_lags"],
                alpha=doc["alpha"], rss_restricted=t["rss_restricted"],
                rss_unrestricted=t["rss_unrestricted"], p_adjusted=t.get("p_adjusted"),
            )
            for t in doc["tests"]
        )
        return ConnectivityMatrix(tuple(doc["labels"]), results, doc["alpha"], doc["correction"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"report is missing field {exc}") from None


def read_adjacency_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Inverse of :func:`write_adjacency_csv`; the diagonal reads as 0."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise FormatError(f"{path}: empty file")
    labels = tuple(rows[0][1:])
    body = rows[1:]
    if len(body) != len(labels):
        raise FormatError(f"{path}: expected {len(labels)} rows, found {len(body)}")
    A = np.zeros((len(labels),) * 2, dtype=int)
    for i, row in enumerate(body):
        if len(row) != len(labels) + 1 or row[0] != labels[i]:
            raise FormatError(f"{path}: row {i + 2} does not match the header")
        for j, cell in enumerate(row[1:]):
            if i == j:
                continue
            if cell not in ("0", "1"):
                raise FormatError(f"{path}: row {i + 2}, column {j + 2}: expected 0 or 1, got {cell!r}")
            A[i, j] = int(cell)
    return labels, A
