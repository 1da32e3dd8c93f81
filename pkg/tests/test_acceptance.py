"""Acceptance suite: ten end-to-end criteria at their stated tolerances.

Each test records one PASS/FAIL line, repeated in the terminal summary.
"""
import json
import math

import numpy as np
import pytest
from scipy import integrate, special

from conftest import record
from hdgc.cli import main, replicate_seed
from hdgc.granger import f_sf, gc_test
from hdgc.metrics import ConfusionCounts, accuracy, confusion, kappa, mcc
from hdgc.pipeline import PipelineConfig, analyze
from hdgc.simgen import NetworkConfig, simulate
from hdgc.spectral import FrequencyGrid, autocov, dynamic_pca, kernel_weights, spectral_density

pytestmark = pytest.mark.slow

REPS = 20
WEIGHTS = (0.1, 0.3, 0.5, 0.7)
SCOPES = ("designed_direction", "designed", "coi")


def run_linear(weight: float) -> dict:
    out = {s: [] for s in SCOPES}
    for rep in range(REPS):
        cfg = NetworkConfig(N=20, N_external=108, T=2000, scheme="linear", n_influencers=30,
                            influence_weight=weight, seed=replicate_seed(0, rep))
        series, truth = simulate(cfg)
        res = analyze(series, PipelineConfig(coi_labels=cfg.coi_labels, variance_threshold=0.75))
        for s in SCOPES:
            out[s].append(accuracy(confusion(res.connectivity, truth, s)))
    return {s: np.asarray(v) for s, v in out.items()}


@pytest.fixture(scope="module")
def linear_sweep():
    return {w: run_linear(w) for w in WEIGHTS}


def conventions(acc: dict) -> str:
    return ", ".join(f"{s}={acc[s].mean():.3f}" for s in SCOPES)


def test_criterion_01_linear_recovery(linear_sweep):
    acc = linear_sweep[0.1]
    mean = acc["designed_direction"].mean()
    passed = mean >= 0.85
    record(1, passed, f"linear w=0.1 k=30, 20 reps: designed-edge accuracy {mean:.3f} >= 0.85 "
                      f"[{conventions(acc)}]")
    assert passed


def test_criterion_02_degradation(linear_sweep):
    acc = np.array([linear_sweep[w]["designed_direction"] for w in WEIGHTS])  # (weights, reps)
    means = acc.mean(axis=1)
    steps_ok = True
    for i in range(len(WEIGHTS) - 1):
        diff = acc[i + 1] - acc[i]  # paired by replicate (common random numbers)
        se = diff.std(ddof=1) / math.sqrt(REPS)
        steps_ok &= bool(means[i + 1] <= means[i] + se)
    drop_ok = bool(means[-1] <= means[0] - 0.10)
    passed = steps_ok and drop_ok
    curve = ", ".join(f"{w}:{m:.3f}" for w, m in zip(WEIGHTS, means))
    record(2, passed, f"accuracy by weight {{{curve}}}; non-increasing within 1 SE: {steps_ok}; "
                      f"acc(0.7) <= acc(0.1) - 0.10: {drop_ok}")
    assert passed


def test_criterion_03_method_ordering():
    scores = {"sdpca": [], "pca": []}
    for rep in range(REPS):
        cfg = NetworkConfig(N=20, N_external=80, T=1500, scheme="causative", n_influencers=30,
                            influence_weight=0.1, mu=0.5, seed=replicate_seed(0, rep))
        series, truth = simulate(cfg)
        for method in scores:
            res = analyze(series, PipelineConfig(coi_labels=cfg.coi_labels, method=method))
            scores[method].append(mcc(confusion(res.connectivity, truth)))
    sd, pc = np.mean(scores["sdpca"]), np.mean(scores["pca"])
    passed = sd >= pc
    record(3, passed, f"causative N=20/100 T=1500, 20 reps: MCC sDPCA {sd:.3f} vs static PCA {pc:.3f}")
    assert passed


def test_criterion_04_type_one_rate():
    rng = np.random.default_rng(2024)
    rate = np.mean([gc_test(*rng.normal(size=(2, 1024)), 2, 2).reject for _ in range(500)])
    passed = 0.03 <= rate <= 0.07
    record(4, passed, f"white-noise rejection rate {rate:.3f} in [0.03, 0.07]")
    assert passed


def test_criterion_05_power():
    rng = np.random.default_rng(2025)
    hits = 0
    for _ in range(100):
        x = rng.normal(size=1025)
        y = 0.9 * x[:-1] + rng.normal(size=1024)
        hits += gc_test(x[1:], y, 2, 2).reject
    rate = hits / 100
    passed = rate >= 0.9
    record(5, passed, f"planted-link rejection rate {rate:.2f} >= 0.9")
    assert passed


def test_criterion_06_static_reduction():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 9))
        T = int(rng.integers(n + 20, 513))
        Z = rng.normal(size=(T, n)) @ rng.normal(size=(n, n))
        res = dynamic_pca(Z, k_scores=n, L_window=0, L_filter=0)
        Zc = Z - Z.mean(axis=0)
        w, V = np.linalg.eigh(Zc.T @ Zc / T)
        V = V[:, ::-1]
        V = V * np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(n)])
        worst = max(worst, float(np.max(np.abs(res.scores.values - Zc @ V))))
    passed = worst <= 1e-8
    record(6, passed, f"L=0 sDPCA vs PCA scores, 20 instances: max deviation {worst:.2e} <= 1e-8")
    assert passed


def test_criterion_07_spectral_oracle():
    rng = np.random.default_rng(7)
    grid = FrequencyGrid(64)
    worst = 0.0
    for n in range(1, 5):
        for L in (0, 1, 3, 8):
            for kernel in ("bartlett", "parzen", "flat"):
                ac = autocov(rng.normal(size=(120, n)), L)
                sd = spectral_density(ac, kernel, grid)
                w = kernel_weights(kernel, L)
                for F, omega in zip(sd.matrices, grid.points):
                    naive = sum(w[h + L] * ac.lag(h) * np.exp(-1j * h * omega) for h in range(-L, L + 1))
                    worst = max(worst, float(np.max(np.abs(F - naive))))
    passed = worst <= 1e-12
    record(7, passed, f"spectral density vs naive lag sum: max deviation {worst:.2e} <= 1e-12")
    assert passed


def f_density(x, d1, d2):
    logc = (special.gammaln((d1 + d2) / 2) - special.gammaln(d1 / 2) - special.gammaln(d2 / 2)
            + (d1 / 2) * np.log(d1 / d2))
    return np.exp(logc + (d1 / 2 - 1) * np.log(x) - ((d1 + d2) / 2) * np.log1p(d1 * x / d2))


def test_criterion_08_f_oracle():
    worst = 0.0
    for d1 in (1, 2, 5):
        for d2 in (5, 10, 50):
            for f in (0.05, 0.5, 1.0, 2.0, 4.0, 10.0, 30.0):
                tail, _ = integrate.quad(f_density, f, np.inf, args=(d1, d2), limit=200)
                worst = max(worst, abs(f_sf(f, d1, d2) - tail))
    passed = worst <= 5e-4
    record(8, passed, f"F upper tail vs quadrature: max deviation {worst:.2e} <= 5e-4")
    assert passed


def test_criterion_09_metric_oracle():
    from fractions import Fraction

    rng = np.random.default_rng(9)
    worst = 0.0
    done = 0
    while done < 50:
        c = ConfusionCounts(*(int(v) for v in rng.integers(0, 6, size=4)))
        if c.total == 0:
            continue
        truth = [1] * c.tp + [0] * c.fp + [1] * c.fn + [0] * c.tn
        pred = [1] * c.tp + [1] * c.fp + [0] * c.fn + [0] * c.tn
        n = len(truth)
        acc = Fraction(sum(a == b for a, b in zip(truth, pred)), n)
        pt, pp = Fraction(sum(truth), n), Fraction(sum(pred), n)
        pe = pt * pp + (1 - pt) * (1 - pp)
        kap = (Fraction(int(acc == 1)) if pe == 1 else (acc - pe) / (1 - pe))
        cov = sum((a - pt) * (b - pp) for a, b in zip(truth, pred))
        var = sum((a - pt) ** 2 for a in truth) * sum((b - pp) ** 2 for b in pred)
        m = 0.0 if var == 0 else float(cov) / math.sqrt(float(var))
        worst = max(worst, abs(accuracy(c) - float(acc)), abs(kappa(c) - float(kap)), abs(mcc(c) - m))
        done += 1
    passed = worst <= 1e-12
    record(9, passed, f"accuracy/MCC/kappa vs enumeration, 50 instances: max deviation {worst:.2e}")
    assert passed


def test_criterion_10_determinism(tmp_path):
    sweep = {"schemes": ["linear", "causative"], "weights": [0.1, 0.5], "n_influencers": [3],
             "methods": ["sdpca", "pca"], "replicates": 2, "seed": 11,
             "network": {"N": 4, "N_external": 12, "T": 400}}
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps(sweep))
    outputs = []
    for run, threads in enumerate(("1", "2")):
        assert main(["benchmark", "--config", str(cfg), "--threads", threads,
                     "--output-dir", str(tmp_path / f"run{run}")]) == 0
        outputs.append((tmp_path / f"run{run}" / "metrics.csv").read_bytes())
    passed = outputs[0] == outputs[1]
    record(10, passed, f"benchmark re-run ({len(outputs[0])} bytes CSV) byte-identical: {passed}")
    assert passed
