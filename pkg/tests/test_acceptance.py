"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are printed
in the "acceptance criteria" section of the terminal summary.  Criterion 9
needs the public course dataset and is skipped unless
``STYLEMILL_PUBLIC_CONFIG`` names a pipeline config that points at it.
"""

import itertools
import json
import os
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from stylemill.evaluation import CompareSpec, compare_methods, ratio_sweep, score_report, sweep_means
from stylemill.features import DIMENSIONS, ILSResponse, label_from_score, score_ils
from stylemill.learners import fit_model, predict, standardize_fit
from stylemill.learners.mlp import init_params, loss_and_grad
from stylemill.learners.svm import kernel_matrix, kkt_residuals, smo_solve
from stylemill.pipeline import PipelineConfig, rerun, run_pipeline, sample_config_path
from stylemill.rng import Rng
from stylemill.sampling import SplitSpec, split_labeled_unlabeled
from stylemill.semisup import self_train, supervised
from stylemill.stats import t_two_sided_p
from stylemill.synth import SynthSpec, generate

SUITE_START = time.perf_counter()

# pinned tolerances and limits
METRIC_TOL = 1e-12
SVM_EQ_TOL = 1e-10
KKT_TOL = 1e-3
TWO_POINT_TOL = 1e-6
GRAD_TOL = 1e-4
TTEST_TOL = 1e-6
TTEST_5_2 = (0.0377, 1e-4)
C6_BASELINE = (0.75, 0.85)
C6_ALPHA = 0.05
C7_SLACK = 0.02
C9_TARGETS = {"labeling_processing": 0.9479, "final_input": 0.9686}
C9_WINDOW = 0.05
LIMITS = {1: 5, 2: 30, 3: 10, 4: 1, 6: 180, 10: 300}

# criterion 6 and 7 synthetic setup
C6_SPEC = SynthSpec(n_students=1000, separation=1.3, seed=7)
C6_RATIO = 0.1
C6_SEEDS = range(20)
C6_KIND = "tree"
C7_SEEDS = range(10)


def check(n: int, ok: bool, detail: str, elapsed: float | None = None) -> None:
    limit = LIMITS.get(n)
    if elapsed is not None and limit is not None:
        detail += f"; {elapsed:.2f}s (limit {limit}s)"
        ok = ok and elapsed < limit
    line = f"C{n} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# ------------------------------------------------------------------ 1


def _brute(pred, truth, scores):
    cells = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    for p, t in zip(pred, truth):
        cells[("t" if p == t else "f") + ("p" if p == 1 else "n")] += 1
    tp, fp, fn, tn = cells["tp"], cells["fp"], cells["fn"], cells["tn"]
    pos = [s for s, t in zip(scores, truth) if t == 1]
    neg = [s for s, t in zip(scores, truth) if t == -1]
    pairs = [(a, b) for a in pos for b in neg]
    return {
        "accuracy": (tp + tn) / len(pred),
        "precision": tp / (tp + fp) if tp + fp else None,
        "recall": tp / (tp + fn) if tp + fn else None,
        "specificity": tn / (tn + fp) if tn + fp else None,
        "auc": sum((a > b) + 0.5 * (a == b) for a, b in pairs) / len(pairs) if pairs else None,
    }


def test_c1_metric_oracle():
    t0 = time.perf_counter()
    rng = Rng(101)
    worst, mismatched = 0.0, 0
    for _ in range(50):
        n = 1 + rng.randbelow(30)
        truth = [1 if rng.random() < 0.5 else -1 for _ in range(n)]
        pred = [1 if rng.random() < 0.5 else -1 for _ in range(n)]
        scores = [round(rng.random(), 1) for _ in range(n)]
        got = score_report(pred, scores, truth).values()
        for name, v in _brute(pred, truth, scores).items():
            if v is None or got[name] is None:
                mismatched += (v is None) != (got[name] is None)
            else:
                worst = max(worst, abs(v - got[name]))
    check(1, worst <= METRIC_TOL and mismatched == 0,
          f"50 instances, max |diff| {worst:.1e}, absent mismatches {mismatched}", time.perf_counter() - t0)


# ------------------------------------------------------------------ 2


def _svm_problem(seed):
    rng = Rng(seed)
    n = 20 + rng.randbelow(41)
    d = 2 + rng.randbelow(4)
    y = np.array([1 if rng.random() < 0.5 else -1 for _ in range(n)])
    y[0], y[1] = 1, -1
    X = rng.uniforms(n * d, -1, 1).reshape(n, d) + 0.8 * y[:, None]
    return X, y


def test_c2_svm_correctness():
    t0 = time.perf_counter()
    C = 1.0
    eq, kkt, box_ok = 0.0, 0.0, True
    for seed in range(20):
        X, y = _svm_problem(seed)
        Xs = standardize_fit(X).transform(X)
        K = kernel_matrix(Xs, Xs, "linear", 1.0)
        sol = smo_solve(K, y, C)
        eq = max(eq, abs(float(np.dot(sol.alpha, y))))
        kkt = max(kkt, float(kkt_residuals(sol.alpha, y, K, sol.b, C).max()))
        box_ok &= bool(np.all(sol.alpha >= 0.0) and np.all(sol.alpha <= C))
    X2 = np.array([[-1.0], [1.0]])
    y2 = np.array([-1, 1])
    two = smo_solve(kernel_matrix(X2, X2, "linear", 1.0), y2, C=1.0, tol=1e-9)
    two_err = max(float(np.abs(two.alpha - 0.5).max()), abs(two.b))
    ok = eq <= SVM_EQ_TOL and kkt <= KKT_TOL and box_ok and two_err <= TWO_POINT_TOL
    check(2, ok, f"20 sets: max |sum a*y| {eq:.1e}, max KKT {kkt:.1e}, box {box_ok}; "
                 f"2-point error {two_err:.1e}", time.perf_counter() - t0)


# ------------------------------------------------------------------ 3


def test_c3_mlp_gradient():
    t0 = time.perf_counter()
    worst = 0.0
    h = 1e-5
    for seed in range(10):
        rng = Rng(seed)
        d, hidden = 1 + rng.randbelow(4), 1 + rng.randbelow(8)
        X = rng.uniforms(6 * d, -2, 2).reshape(6, d)
        t = np.array([rng.randbelow(2) for _ in range(6)], dtype=float)
        theta = init_params(d, hidden, seed)
        _, g = loss_and_grad(theta, X, t, hidden)
        num = np.empty_like(theta)
        for i in range(len(theta)):
            e = np.zeros_like(theta)
            e[i] = h
            num[i] = (loss_and_grad(theta + e, X, t, hidden)[0] - loss_and_grad(theta - e, X, t, hidden)[0]) / (2 * h)
        rel = np.abs(g - num) / np.maximum(np.abs(g) + np.abs(num), 1e-8)
        worst = max(worst, float(rel.max()))
    check(3, worst < GRAD_TOL, f"10 configurations, max relative error {worst:.1e}", time.perf_counter() - t0)


# ------------------------------------------------------------------ 4


def test_c4_ils_parity():
    t0 = time.perf_counter()
    ok = True
    for k, dim in enumerate(DIMENSIONS):
        seen = set()
        for bits in itertools.product("ab", repeat=11):
            answers = ["a"] * 44
            answers[k * 11:(k + 1) * 11] = bits
            score = score_ils(ILSResponse("u", "".join(answers)))[dim]
            lab = label_from_score(dim, score)
            ok &= score % 2 == 1 and (lab.pole == dim.poles[0]) == (score > 0) and lab.strength is not None
            seen.add(score)
        ok &= seen == set(range(-11, 12, 2))
    check(4, ok, "2^11 answer sets per dimension: odd, nonzero, banded", time.perf_counter() - t0)


# ------------------------------------------------------------------ 5


def test_c5_conservation_and_degeneracy():
    ds, _ = generate(SynthSpec(n_students=80, separation=1.5, seed=5))
    dim = DIMENSIONS[0]
    rng = Rng(55)
    conserved = 0
    for _ in range(100):
        r = [0.1, 0.2, 0.5, 0.75][rng.randbelow(4)]
        sp = split_labeled_unlabeled(ds, dim, SplitSpec(r, rng.next_u64()))
        run = self_train(sp.L, sp.U, dim, "nb")
        conserved += run.n_total == sp.L.n_rows + sp.U.n_rows == ds.n_rows
    equal = True
    Q = generate(SynthSpec(n_students=200, seed=99))[0].X
    for kind in ("svm", "nb", "tree", "forest", "mlp"):
        full = split_labeled_unlabeled(ds, dim, SplitSpec(1.0, 3))
        run = self_train(full.L, full.U, dim, kind, seed=2)
        base = supervised(full.L, dim, kind, seed=2)
        equal &= full.U.n_rows == 0 and np.array_equal(predict(run.final_model, Q)[0], predict(base, Q)[0])
    check(5, conserved == 100 and equal,
          f"|D'| = |L| + |U| on {conserved}/100 splits; r = 1 / empty U identical to baseline for all kinds: {equal}")


# ------------------------------------------------------------------ 6


def test_c6_self_training_benefit():
    t0 = time.perf_counter()
    ds, _ = generate(C6_SPEC)
    rep = compare_methods(ds, C6_SPEC.dimension, CompareSpec(C6_RATIO, list(C6_SEEDS), kind=C6_KIND))
    sl = rep["means"]["SL"]["accuracy"]
    ssl = rep["means"]["SSL"]["accuracy"]
    tt = rep["means"]["TT"]["accuracy"]
    cell = rep["ttests"]["SL vs SSL"]["accuracy"]
    ok = C6_BASELINE[0] <= sl <= C6_BASELINE[1] and ssl >= sl and cell["t_value"] < 0 and cell["p_value"] < C6_ALPHA
    check(6, ok, f"n=1000 separation=1.3 r=0.1 kind={C6_KIND} 20 seeds: SL {sl:.4f}, SSL {ssl:.4f} "
                 f"(TT {tt:.4f}); SL-SSL t={cell['t_value']:.3f} p={cell['p_value']:.2e}", time.perf_counter() - t0)


# ------------------------------------------------------------------ 7


def test_c7_ratio_sweep_consistency():
    parts, ok = [], True
    for i, dim in enumerate(DIMENSIONS):
        ds, _ = generate(C6_SPEC.replace(dimension=dim, seed=C6_SPEC.seed + i))
        means = sweep_means(ratio_sweep(ds, dim, [C6_RATIO, 1.0], [C6_KIND], list(C7_SEEDS)))
        lo, hi = means[(C6_RATIO, C6_KIND)], means[(1.0, C6_KIND)]
        ok &= hi >= lo - C7_SLACK
        parts.append(f"{dim.value} r=1 {hi:.4f} vs r=0.1 {lo:.4f}")
    check(7, ok, "; ".join(parts))


# ------------------------------------------------------------------ 8


def _df2(t):
    return 1 - abs(t) / (2 + t * t) ** 0.5


def test_c8_ttest_precision():
    # references: df = 2 closed form; 40-digit values from mpmath.betainc otherwise
    refs = {(0.0, 2): 1.0, (5.0, 2): _df2(5.0),
            (1.0, 5): 0.3632174676491226, (2.0, 10): 0.07338803477074037}
    errs = {k: abs(t_two_sided_p(*k) - v) for k, v in refs.items()}
    p52 = t_two_sided_p(5.0, 2)
    ok = max(errs.values()) <= TTEST_TOL and abs(p52 - TTEST_5_2[0]) <= TTEST_5_2[1]
    check(8, ok, f"max |p - ref| {max(errs.values()):.1e}; p(5, 2) = {p52:.6f}")


# ------------------------------------------------------------------ 9


def test_c9_dataset_reproduction():
    cfg_path = os.environ.get("STYLEMILL_PUBLIC_CONFIG")
    if not cfg_path or not Path(cfg_path).is_file():
        line = "C9 SKIP: public course dataset not available offline (set STYLEMILL_PUBLIC_CONFIG)"
        ACCEPTANCE_LINES.append(line)
        pytest.skip(line)
    cfg = PipelineConfig.from_file(cfg_path)
    summary = run_pipeline(cfg).summary
    by_dim = {d["dimension"]: d for d in summary["dimensions"]}
    got = {
        "labeling_processing": by_dim["Processing"]["labeling_cv"]["mean"]["accuracy"],
        "final_input": by_dim["Input"]["final_cv"]["mean"]["accuracy"],
    }
    hits = {k: abs(got[k] - C9_TARGETS[k]) <= C9_WINDOW for k in got}
    detail = ", ".join(f"{k} {got[k]:.4f} vs {C9_TARGETS[k]}" for k in got)
    line = f"C9 {'PASS' if all(hits.values()) else 'MISS (best-effort, see discrepancy analysis)'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


# ------------------------------------------------------------------ 10


def test_c10_end_to_end_determinism(tmp_path):
    work = tmp_path / "sample"
    shutil.copytree(sample_config_path().parent, work)
    run_pipeline(PipelineConfig.from_file(work / "config.json"))
    _, differing = rerun(work / "out" / "manifest.json", tmp_path / "again")
    reports = sorted(p.name for p in (work / "out").glob("report_*.json"))
    same = all((work / "out" / n).read_bytes() == (tmp_path / "again" / n).read_bytes() for n in reports)
    manifest = json.loads((work / "out" / "manifest.json").read_text())
    ok = differing == [] and same and len(reports) == 4 and manifest["status"] == "ok"
    check(10, ok, f"rerun from manifest: {len(reports)} reports byte-identical, differing outputs {differing}; "
                  f"acceptance suite elapsed", time.perf_counter() - SUITE_START)
