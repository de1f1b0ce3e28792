"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``. The simulation-backed
criteria default to the full profile (2000 replications, size windows
[3.6, 6.5] percent). Setting ``PANELCD_ACCEPT_PROFILE=ci`` switches to 500
replications with windows widened to [2.5, 7.5] percent. Worker count
comes from ``PANELCD_WORKERS`` (default 2).

Criterion of test_c04b (LM_adj frequency >= 20 percent under the feedback
design) is expected to fail: with pair moments computed exactly from the
realized unit designs, as the oracle-equivalence criterion requires, the
moment-adjusted statistic stays calibrated (~5.5 percent) no matter how
the feedback is wired. The published oversize that this clause targets is
only reachable when the moment computation ignores realized cross-design
overlap, which the exactness contract here forbids. test_c04b keeps the
target on record rather than weakening it.
"""

import os
import time

import numpy as np
import pytest

from panelcd.cd_stats import (
    lm_bc_stat,
    lm_rmt_stat,
    cd_lm_stat,
    null_constants,
    rlm_pe_stat,
    rlm_stat,
    rmt_centering,
)
from panelcd.cli import main
from panelcd.correlation import (
    correlation_matrix,
    pair_trace_reductions,
    trace_stats,
)
from panelcd.dgp import Alternative, DgpConfig, ErrorDist, generate_panel
from panelcd.mc import ExperimentPlan, run_experiment
from panelcd.panel import fit

PROFILE = os.environ.get("PANELCD_ACCEPT_PROFILE", "full")
REPS = 500 if PROFILE == "ci" else 2000
SIZE_WINDOW = (2.5, 7.5) if PROFILE == "ci" else (3.6, 6.5)
WORKERS = int(os.environ.get("PANELCD_WORKERS", "2"))
ROOT_SEED = 20240501


def _line(cid, ok, detail):
    print(f"[acceptance] {cid}: {'PASS' if ok else 'FAIL'} ({detail})")


def _frequencies(cfg, tests):
    plan = ExperimentPlan(
        cells=(cfg,), reps=REPS, tests=tests, root_seed=ROOT_SEED, workers=WORKERS
    )
    report = run_experiment(plan)
    assert all(row.failed_reps < 0.01 * REPS for row in report.rows)
    return {row.test: row.frequency for row in report.rows}


def _in_window(freq):
    return SIZE_WINDOW[0] <= freq <= SIZE_WINDOW[1]


def test_c01_exact_identity_suite():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 61))
        t = int(rng.integers(n + 5, 3 * n + 1))
        stats = trace_stats(correlation_matrix(rng.standard_normal((n, t))), t)
        cdlm = cd_lm_stat(stats).statistic
        lmbc = lm_bc_stat(stats).statistic
        rlm = rlm_stat(stats).statistic
        shift = n / (2.0 * (t - 1))
        rem = np.sqrt(n) / (2.0 * (t - 1) * (np.sqrt(n) + np.sqrt(n - 1.0)))
        ratio = np.sqrt(n / (n - 1.0))
        worst = max(
            worst,
            abs(cdlm - lmbc - shift),
            abs(cdlm - ratio * (rlm + shift)),
            abs(lmbc - ratio * (rlm + rem)),
        )
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 5.0
    _line("C1 exact identities", ok, f"max residual {worst:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-10
    assert elapsed < 5.0


def test_c02_oracle_equivalence():
    rng = np.random.default_rng(202)
    start = time.perf_counter()

    # correlation matrix vs per-pair scalar loop
    v = rng.standard_normal((12, 40))
    rho = correlation_matrix(v).rho
    ss = (v**2).sum(axis=1)
    worst_corr = 0.0
    for i in range(12):
        for j in range(12):
            expected = 1.0 if i == j else (v[i] * v[j]).sum() / np.sqrt(ss[i] * ss[j])
            worst_corr = max(worst_corr, abs(rho[i, j] - expected))

    # tr(R^4) vs the naive quadruple product
    corr = correlation_matrix(rng.standard_normal((30, 70)))
    stats = trace_stats(corr, 70)
    naive = float(np.trace(corr.rho @ corr.rho @ corr.rho @ corr.rho))
    tr4_rel = abs(stats.tr_r4 - naive) / naive

    # pair-moment trace reductions vs dense projection construction
    worst_tr = 0.0
    for t, k in [(40, 5), (25, 3), (12, 2)]:
        for _ in range(5):
            q_i = np.linalg.qr(rng.standard_normal((t, k)))[0]
            q_j = np.linalg.qr(rng.standard_normal((t, k)))[0]
            m_i = np.eye(t) - q_i @ q_i.T
            m_j = np.eye(t) - q_j @ q_j.T
            prod = m_i @ m_j
            tr_mm, tr_mm2 = pair_trace_reductions(q_i.T @ q_j, t, k)
            worst_tr = max(
                worst_tr, abs(tr_mm - np.trace(prod)), abs(tr_mm2 - np.trace(prod @ prod))
            )

    elapsed = time.perf_counter() - start
    ok = worst_corr <= 1e-13 and tr4_rel <= 1e-10 and worst_tr <= 1e-10 and elapsed < 30.0
    _line(
        "C2 oracle equivalence",
        ok,
        f"corr {worst_corr:.1e}, tr4 rel {tr4_rel:.1e}, traces {worst_tr:.1e}, {elapsed:.1f}s",
    )
    assert worst_corr <= 1e-13
    assert tr4_rel <= 1e-10
    assert worst_tr <= 1e-10
    assert elapsed < 30.0


def test_c03_size_reproduction_heterogeneous():
    cfg = DgpConfig(dgp=1, t=100, n=100, k=2, error_dist=ErrorDist.NORMAL)
    freqs = _frequencies(cfg, ("RLM", "RLM_PE", "LM_adj", "CD_P"))
    ok = all(_in_window(freqs[t]) for t in ("RLM", "RLM_PE", "LM_adj", "CD_P"))
    detail = ", ".join(f"{t}={freqs[t]:.2f}%" for t in ("RLM", "RLM_PE", "LM_adj", "CD_P"))
    _line("C3 null size, heterogeneous (100,100)", ok, detail + f", window {SIZE_WINDOW}")
    for t in ("RLM", "RLM_PE", "LM_adj", "CD_P"):
        assert _in_window(freqs[t]), f"{t} frequency {freqs[t]:.2f}% outside {SIZE_WINDOW}"


@pytest.fixture(scope="module")
def dgp2_frequencies():
    cfg = DgpConfig(dgp=2, t=100, n=200, k=3, error_dist=ErrorDist.NORMAL)
    return _frequencies(cfg, ("RLM", "RLM_PE", "LM_adj"))


def test_c04a_weak_exogeneity_robust_tests(dgp2_frequencies):
    freqs = dgp2_frequencies
    ok = _in_window(freqs["RLM"]) and _in_window(freqs["RLM_PE"])
    _line(
        "C4a weak exogeneity, robust pair (100,200)",
        ok,
        f"RLM={freqs['RLM']:.2f}%, RLM_PE={freqs['RLM_PE']:.2f}%, window {SIZE_WINDOW}",
    )
    assert _in_window(freqs["RLM"])
    assert _in_window(freqs["RLM_PE"])


def test_c04b_weak_exogeneity_moment_adjusted_oversize(dgp2_frequencies):
    # Known-red clause: exact realized-design moments keep LM_adj calibrated
    # here (~5.5%), so the >= 20% oversize cannot appear (see module docstring).
    freq = dgp2_frequencies["LM_adj"]
    ok = freq >= 20.0
    _line("C4b weak exogeneity, moment-adjusted oversize", ok, f"LM_adj={freq:.2f}% vs >=20%")
    assert freq >= 20.0, (
        f"LM_adj frequency {freq:.2f}% < 20%: the oversize target is not "
        "reachable with pair moments computed exactly from the realized designs"
    )


def test_c05_dense_alternative_power_ordering():
    cfg = DgpConfig(
        dgp=1, t=100, n=200, k=2, error_dist=ErrorDist.CHISQ5,
        alternative=Alternative.DENSE, h=3.0,
    )
    freqs = _frequencies(cfg, ("RLM", "RLM_PE", "CD_P"))
    gap = freqs["RLM_PE"] - freqs["RLM"]
    ok = gap >= 10.0 and freqs["CD_P"] <= 12.0
    _line(
        "C5 dense power ordering (100,200)",
        ok,
        f"RLM_PE={freqs['RLM_PE']:.2f}%, RLM={freqs['RLM']:.2f}%, gap={gap:.2f}pp, CD_P={freqs['CD_P']:.2f}%",
    )
    assert gap >= 10.0
    assert freqs["CD_P"] <= 12.0


def test_c06_sparse_alternative_gain():
    cfg = DgpConfig(
        dgp=1, t=200, n=400, k=2, error_dist=ErrorDist.CHISQ5,
        alternative=Alternative.SPARSE,
    )
    freqs = _frequencies(cfg, ("RLM", "RLM_PE"))
    gap = freqs["RLM_PE"] - freqs["RLM"]
    ok = gap >= 5.0
    _line(
        "C6 sparse power gain (200,400)",
        ok,
        f"RLM_PE={freqs['RLM_PE']:.2f}%, RLM={freqs['RLM']:.2f}%, gap={gap:.2f}pp",
    )
    assert gap >= 5.0


def test_c07_fixed_effects_and_dynamic_sizes():
    freqs3 = _frequencies(
        DgpConfig(dgp=3, t=100, n=100, k=2, error_dist=ErrorDist.CHISQ5), ("RLM", "RLM_PE")
    )
    freqs4 = _frequencies(
        DgpConfig(dgp=4, t=100, n=100, k=0, error_dist=ErrorDist.CHISQ5), ("RLM", "RLM_PE")
    )
    ok = all(_in_window(f[t]) for f in (freqs3, freqs4) for t in ("RLM", "RLM_PE"))
    _line(
        "C7 model robustness (100,100)",
        ok,
        f"within: RLM={freqs3['RLM']:.2f}%, RLM_PE={freqs3['RLM_PE']:.2f}%; "
        f"dynamic: RLM={freqs4['RLM']:.2f}%, RLM_PE={freqs4['RLM_PE']:.2f}%",
    )
    for f in (freqs3, freqs4):
        for t in ("RLM", "RLM_PE"):
            assert _in_window(f[t])


def test_c08_theorem_constants_on_oracle_residuals():
    rng = np.random.default_rng(ROOT_SEED)
    n = t = 300
    rlm_vals, pe_vals = [], []
    for _ in range(500):
        v = rng.standard_normal((n, t))
        v -= v.mean(axis=1, keepdims=True)  # unit-centred oracle residuals
        stats = trace_stats(correlation_matrix(v), t)
        rlm_vals.append(rlm_stat(stats).statistic)
        pe_vals.append(rlm_pe_stat(stats).statistic)
    rlm_vals = np.asarray(rlm_vals)
    pe_vals = np.asarray(pe_vals)
    checks = {
        "mean(RLM)": (rlm_vals.mean(), -0.2, 0.2),
        "var(RLM)": (rlm_vals.var(ddof=1), 0.7, 1.35),
        "mean(RLM_PE)": (pe_vals.mean(), -0.2, 0.2),
        "var(RLM_PE)": (pe_vals.var(ddof=1), 0.7, 1.35),
    }
    ok = all(lo <= val <= hi for val, lo, hi in checks.values())
    _line(
        "C8 theorem constants (300,300)",
        ok,
        ", ".join(f"{k}={v[0]:.3f}" for k, v in checks.items()),
    )
    for name, (val, lo, hi) in checks.items():
        assert lo <= val <= hi, f"{name}={val:.4f} outside [{lo}, {hi}]"


def test_c09_worker_count_determinism(tmp_path):
    argv = [
        "simulate", "--dgp", "1", "--T", "50", "--n", "50", "--k", "2",
        "--reps", "200", "--seed", str(ROOT_SEED), "--tests", "rlm,rlmpe,cdp",
        "--format", "csv",
    ]
    one = tmp_path / "w1.csv"
    eight = tmp_path / "w8.csv"
    assert main(argv + ["--workers", "1", "--output", str(one)]) == 0
    assert main(argv + ["--workers", "8", "--output", str(eight)]) == 0
    ok = one.read_bytes() == eight.read_bytes()
    _line("C9 worker determinism", ok, f"{one.stat().st_size} bytes compared")
    assert ok


def test_c10_rlm_lmrmt_convergence():
    rng = np.random.default_rng(ROOT_SEED)
    n = t = 200
    worst = 0.0
    for _ in range(100):
        gen = generate_panel(DgpConfig(dgp=1, t=t, n=n, k=2), rng)
        resid = fit(gen.panel, gen.model_spec, keep_bases=False)
        stats = trace_stats(correlation_matrix(resid), resid.t_eff)
        diff = abs(rlm_stat(stats).statistic - lm_rmt_stat(stats, resid.k_eff).statistic)
        worst = max(worst, diff)
    gap = null_constants(n, t).mu0 - rmt_centering(n, t)
    expected_gap = n**2 / (t**2 * (t - 1.0))
    gap_rel = abs(gap - expected_gap) / expected_gap
    ok = worst <= 0.1 and gap_rel <= 1e-9
    _line("C10 RLM/LM_RMT convergence", ok, f"max diff {worst:.4f}, gap rel err {gap_rel:.1e}")
    assert worst <= 0.1
    assert gap_rel <= 1e-9
