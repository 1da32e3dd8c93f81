"""Command-line front end: simulate, analyze, benchmark, evaluate, augment.

Exit codes: 0 success, 1 usage error, 2 data or contract violation, 3 I/O.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import dataio
from .errors import HdgcError, InvalidParameterError, OutputError
from .metrics import accuracy, confusion, consensus_graph, kappa, mcc, summarize
from .pipeline import PipelineConfig, analyze
from .simgen import GroundTruth, NetworkConfig, simulate

logger = logging.getLogger("hdgc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _labels(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _auto_int(text: str):
    return text if text == "auto" else int(text)


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    doc = dataio.read_json(path)
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return doc


def _overrides(args, mapping: dict) -> dict:
    return {key: getattr(args, dest) for dest, key in mapping.items()
            if getattr(args, dest, None) is not None}


# ---------------------------------------------------------------- simulate

NETWORK_FLAGS = {
    "N": "N", "N_external": "N_external", "T": "T", "scheme": "scheme",
    "n_influencers": "n_influencers", "weight": "influence_weight",
    "interaction_scale": "interaction_scale", "mu": "mu", "seed": "seed",
}


def network_config(args) -> NetworkConfig:
    d = _load_config(args.config)
    d.update(_overrides(args, NETWORK_FLAGS))
    return NetworkConfig.from_dict(d)


def cmd_simulate(args) -> int:
    cfg = network_config(args)
    series, truth = simulate(cfg)
    out = Path(args.output_dir)
    dataio.write_series(series, out / "series.csv")
    dataio.write_json(truth.to_dict(), out / "truth.json")
    logger.info("wrote %d x %d series to %s", series.T, series.n, out)
    return EXIT_OK


# ----------------------------------------------------------------- analyze

PIPELINE_FLAGS = {
    "coi": "coi_labels", "background": "background_labels", "method": "method",
    "L_window": "L_window", "L_filter": "L_filter", "n_freq": "n_freq", "kernel": "kernel",
    "k_scores": "k_scores", "variance_threshold": "variance_threshold",
    "sidedness": "sidedness", "interactions": "interactions", "p_lags": "p_lags",
    "q_lags": "q_lags", "lag_criterion": "lag_criterion", "alpha": "alpha",
    "correction": "correction", "seed": "seed",
}


def pipeline_config(args, base: Optional[dict] = None) -> PipelineConfig:
    d = dict(base or {})
    d.update(_overrides(args, PIPELINE_FLAGS))
    return PipelineConfig.from_dict(d)


def cmd_analyze(args) -> int:
    cfg = pipeline_config(args, _load_config(args.config))
    series = dataio.read_series(args.input)
    result = analyze(series, cfg)
    extra = {
        "k_scores": result.k_scores,
        "dropped_background": list(result.dropped_background),
        "dropped_design_columns": list(result.dropped_design_columns),
        "input": str(args.input),
    }
    dataio.write_report(result.connectivity, args.output_dir, cfg.to_dict(), result.resolved,
                        result.explained_variance, extra)
    logger.info("%d directed tests, %d significant", len(result.connectivity.results),
                len(result.connectivity.significant()))
    return EXIT_OK


# ---------------------------------------------------------------- evaluate

def evaluation_row(cm, truth: GroundTruth) -> dict:
    """Metrics under every scoring convention."""
    coi = summarize(confusion(cm, truth, "coi"))
    row = dict(coi)
    row["accuracy_designed"] = accuracy(confusion(cm, truth, "designed"))
    row["accuracy_designed_direction"] = accuracy(confusion(cm, truth, "designed_direction"))
    return row


def cmd_evaluate(args) -> int:
    if args.consensus:
        mats, labels = [], None
        for p in args.consensus:
            lab, A = dataio.read_adjacency_csv(p)
            if labels is not None and lab != labels:
                raise UsageError(f"{p}: labels differ from {args.consensus[0]}")
            labels = lab
            mats.append(A)
        C = consensus_graph(mats, args.threshold)
        edges = [[labels[i], labels[j]] for i in range(len(labels))
                 for j in range(len(labels)) if i != j and C[i, j]]
        doc = {"schema_version": dataio.SCHEMA_VERSION, "labels": list(labels),
               "threshold": args.threshold, "n_inputs": len(mats), "edges": edges}
    else:
        if not (args.report and args.truth):
            raise UsageError("evaluate needs --report and --truth, or --consensus")
        cm = dataio.connectivity_from_report(dataio.read_json(args.report))
        truth = GroundTruth.from_dict(dataio.read_json(args.truth))
        doc = {"schema_version": dataio.SCHEMA_VERSION, **evaluation_row(cm, truth)}
    if args.output_dir:
        dataio.write_json(doc, Path(args.output_dir) / "evaluation.json")
    else:
        import json
        print(json.dumps(doc, indent=2))
    return EXIT_OK


# ----------------------------------------------------------------- augment

def cmd_augment(args) -> int:
    spec = dataio.AugmentationSpec.from_dict(dataio.read_json(args.spec))
    series = dataio.augment_channels(dataio.read_series(args.input), spec)
    dataio.write_series(series, Path(args.output_dir) / "augmented.csv")
    return EXIT_OK


# --------------------------------------------------------------- benchmark

DETAIL_COLUMNS = ("scheme", "weight", "n_influencers", "k_scores", "replicate", "accuracy",
                  "mcc", "kappa", "method", "accuracy_designed", "accuracy_designed_direction",
                  "tp", "fp", "fn", "tn", "status")
METRIC_COLUMNS = ("k_scores", "accuracy", "mcc", "kappa", "accuracy_designed",
                  "accuracy_designed_direction")


@dataclass(frozen=True)
class SweepConfig:
    schemes: tuple[str, ...] = ("linear",)
    weights: tuple[float, ...] = (0.1,)
    n_influencers: tuple[int, ...] = (30,)
    methods: tuple[str, ...] = ("sdpca",)
    replicates: int = 3
    seed: int = 0
    network: dict = field(default_factory=dict)
    pipeline: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = {"schemes", "weights", "n_influencers", "methods", "replicates", "seed",
                 "network", "pipeline"}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown sweep fields: {sorted(unknown)}")
        d = dict(d)
        for key in ("schemes", "weights", "n_influencers", "methods"):
            if key in d:
                d[key] = tuple(d[key])
        cfg = cls(**d)
        if cfg.replicates < 1:
            raise InvalidParameterError("replicates must be >= 1")
        return cfg

    def cells(self) -> list[tuple[str, float, int, str]]:
        return [(s, w, k, m) for s in self.schemes for w in self.weights
                for k in self.n_influencers for m in self.methods]


def replicate_seed(seed: int, replicate: int) -> int:
    """Network seed shared by every cell for a given replicate (common random numbers)."""
    return int(np.random.SeedSequence([seed, replicate]).generate_state(1)[0])


def _run_one(sweep: SweepConfig, cell, replicate: int) -> dict:
    scheme, weight, k, method = cell
    row = {"scheme": scheme, "weight": weight, "n_influencers": k, "replicate": replicate,
           "method": method}
    try:
        net_cfg = NetworkConfig.from_dict({**sweep.network, "scheme": scheme,
                                           "influence_weight": weight, "n_influencers": k,
                                           "seed": replicate_seed(sweep.seed, replicate)})
        series, truth = simulate(net_cfg)
        pipe = PipelineConfig.from_dict({"coi_labels": net_cfg.coi_labels, **sweep.pipeline,
                                         "method": method, "seed": sweep.seed})
        result = analyze(series, pipe)
        row.update(evaluation_row(result.connectivity, truth), k_scores=result.k_scores,
                   status="ok")
    except HdgcError as exc:
        logger.error("cell %s replicate %d failed: %s", cell, replicate, exc)
        row["status"] = f"error: {exc}"
    return row


def run_sweep(sweep: SweepConfig, threads: int = 1) -> list[dict]:
    jobs = [(cell, r) for cell in sweep.cells() for r in range(sweep.replicates)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda j: _run_one(sweep, *j), jobs))
    else:
        rows = [_run_one(sweep, *j) for j in jobs]
    return rows  # already in deterministic (cell, replicate) order


def aggregate(rows: Sequence[dict], sweep: SweepConfig) -> list[dict]:
    out = []
    for cell in sweep.cells():
        mine = [r for r in rows if (r["scheme"], r["weight"], r["n_influencers"], r["method"]) == cell
                and r.get("status") == "ok"]
        agg = {"scheme": cell[0], "weight": cell[1], "n_influencers": cell[2], "method": cell[3],
               "replicate": "mean", "status": f"n={len(mine)}"}
        for col in METRIC_COLUMNS:
            agg[col] = float(np.mean([r[col] for r in mine])) if mine else float("nan")
        out.append(agg)
    return out


def _cell_text(v) -> str:
    if isinstance(v, float):
        return dataio.fmt(v)
    return "" if v is None else str(v)


def write_metrics_csv(rows: Sequence[dict], path) -> Path:
    path = Path(path)
    fh = dataio._open_for_write(path)
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETAIL_COLUMNS)
        for r in rows:
            w.writerow([_cell_text(r.get(c)) for c in DETAIL_COLUMNS])
    return path


def cmd_benchmark(args) -> int:
    d = _load_config(args.config)
    if args.seed is not None:
        d["seed"] = args.seed
    if args.replicates is not None:
        d["replicates"] = args.replicates
    sweep = SweepConfig.from_dict(d)
    rows = run_sweep(sweep, args.threads)
    write_metrics_csv(rows + aggregate(rows, sweep), Path(args.output_dir) / "metrics.csv")
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        logger.error("%d of %d runs failed", failed, len(rows))
        return EXIT_DATA
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="RNG seed (overrides the config file)")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--output-dir", dest="output_dir", default=".", help="output directory")
    common.add_argument("--config", help="JSON config file; flags override its fields")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="hdgc", description="Granger causality between channels of interest "
                     "after removing background-network influence.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic network")
    p.add_argument("--N", type=int)
    p.add_argument("--N-external", dest="N_external", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--scheme", choices=("none", "linear", "nonlinear", "causative"))
    p.add_argument("--n-influencers", dest="n_influencers", type=int)
    p.add_argument("--weight", type=float)
    p.add_argument("--interaction-scale", dest="interaction_scale", type=float)
    p.add_argument("--mu", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", parents=[common], help="run the pipeline on a CSV recording")
    p.add_argument("--input", required=True)
    p.add_argument("--coi", type=_labels, help="comma-separated channels of interest")
    p.add_argument("--background", type=_labels)
    p.add_argument("--method", choices=("sdpca", "pca"))
    p.add_argument("--L-window", dest="L_window", type=_auto_int)
    p.add_argument("--L-filter", dest="L_filter", type=_auto_int)
    p.add_argument("--n-freq", dest="n_freq", type=_auto_int)
    p.add_argument("--kernel", choices=("bartlett", "parzen", "flat"))
    p.add_argument("--k-scores", dest="k_scores", type=int)
    p.add_argument("--variance-threshold", dest="variance_threshold", type=float)
    p.add_argument("--sidedness", choices=("two_sided", "one_sided"))
    p.add_argument("--interactions", action="store_true", default=None)
    p.add_argument("--p-lags", dest="p_lags", type=int)
    p.add_argument("--q-lags", dest="q_lags", type=int)
    p.add_argument("--lag-criterion", dest="lag_criterion", choices=("fixed", "bic", "aic"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--correction", choices=("none", "bh"))
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("benchmark", parents=[common], help="simulate-analyze-evaluate sweep")
    p.add_argument("--replicates", type=int)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("evaluate", parents=[common], help="score a report or build a consensus graph")
    p.add_argument("--report")
    p.add_argument("--truth")
    p.add_argument("--consensus", nargs="+", metavar="ADJACENCY_CSV")
    p.add_argument("--threshold", type=float, default=0.7)
    p.set_defaults(func=cmd_evaluate, output_dir=None)

    p = sub.add_parser("augment", parents=[common], help="append derived channels")
    p.add_argument("--input", required=True)
    p.add_argument("--spec", required=True, help="JSON augmentation spec")
    p.set_defaults(func=cmd_augment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("hdgc: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hdgc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HdgcError as exc:
        print(f"hdgc: error: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", EXIT_DATA)
    except OSError as exc:
        print(f"hdgc: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
