"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS criterion N: ...`` or ``FAIL criterion N: ...``
line before asserting, so ``pytest -v`` output doubles as the report.
"""

import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from resorg import experiments, sorn
from resorg.cli import ExperimentSpec, bundled_spec_path, bundled_specs, load_spec, run_experiment
from resorg.experiments import synthetic_process
from resorg.info import EmbeddingSpec, active_information_storage, transfer_entropy
from resorg.measures import (
    criticality_estimate,
    fisher_memory_curve,
    ipc,
    legendre_basis,
    separation_rank,
)
from resorg.reservoir import (
    Reservoir,
    ReservoirParams,
    build_reservoir,
    fading_memory_check,
    memory_capacity,
)
from resorg.task_complexity import task_complexity
from resorg.tasks import gen_iid_uniform
from test_measures import mc_fisher


@pytest.fixture
def report(capsys):
    def _report(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return _report


def test_criterion_01_mc_bound(report):
    mcs = []
    for seed in range(20):
        r = build_reservoir(ReservoirParams(20, spectral_radius=0.95, nonlinearity="linear", seed=seed))
        mcs.append(memory_capacity(r, gen_iid_uniform(4000, seed=1000 + seed), 40).scalars["MC"])
    w = np.diag(np.full(19, 0.95), -1)
    w_in = np.zeros(20)
    w_in[0] = 1.0
    line = Reservoir.from_matrices(w_in, w, nonlinearity="linear")
    delay_mc = memory_capacity(line, gen_iid_uniform(4000, seed=7), 40).scalars["MC"]
    ok = max(mcs) <= 21 and delay_mc >= 18
    report(1, ok, f"max MC over 20 seeds {max(mcs):.3f} <= 21; delay line MC {delay_mc:.3f} >= 18")


def test_criterion_02_ipc_bound(report):
    basis = legendre_basis(2, range(1, 31))
    r = build_reservoir(ReservoirParams(20, nonlinearity="tanh", seed=0))
    u = gen_iid_uniform(5000, lo=-0.999, hi=0.999, seed=1)
    rep = ipc(r, u, basis)
    caps = np.array(list(rep.capacities.values()))
    lin = build_reservoir(ReservoirParams(20, nonlinearity="linear", seed=0))
    deg1 = ipc(lin, u, legendre_basis(1, range(1, 31))).total
    mc = memory_capacity(lin, u, 30).scalars["MC"]
    ok = bool(np.all((caps >= 0) & (caps <= 1))) and rep.total <= 21 and abs(deg1 - mc) <= 0.1 * mc
    report(2, ok, f"capacities in [{caps.min():.3g}, {caps.max():.3g}], total {rep.total:.3f} <= 21; "
                  f"linear degree-1 total {deg1:.3f} vs MC {mc:.3f} (rel diff {abs(deg1 - mc) / mc:.3f})")


def test_criterion_03_estimator_oracles(report):
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, 100_000)
    copy = np.r_[0, x[:-1]]
    te_copy = transfer_entropy(x, copy, EmbeddingSpec(1, 1)).value
    te_ind = transfer_entropy(x, rng.integers(0, 2, 100_000), EmbeddingSpec(1, 1)).value
    ais_iid = active_information_storage(rng.integers(0, 2, 100_000), 1).value
    ais_p2 = active_information_storage(np.arange(100_000) % 2, 1).value
    ok = abs(te_copy - 1) <= 0.01 and te_ind < 0.005 and ais_iid < 0.01 and abs(ais_p2 - 1) <= 0.005
    report(3, ok, f"TE copy {te_copy:.4f}, TE independent {te_ind:.5f}, AIS iid {ais_iid:.5f}, "
                  f"AIS period-2 {ais_p2:.4f}")


@pytest.mark.slow
def test_criterion_04_sorn_vs_static(report):
    cfg = {"n_excitatory": 100, "n": 8}
    rows = [experiments.sorn_counting_run(cfg, seed)[0] for seed in range(10)]
    plastic = np.mean([r["sorn_normalized"] for r in rows])
    static = np.mean([r["static_normalized"] for r in rows])
    task = sorn.CountingTask(1)
    easy = [
        sorn.sorn_train_and_eval(sorn.SornParams(100, seed=seed), task, sorn.Plasticity(),
                                 sorn.Phases()).normalized_performance
        for seed in range(10)
    ]
    ok = plastic > static and min(easy) > 0.95
    report(4, ok, f"n=8 mean normalized SORN {plastic:.4f} > static {static:.4f}; "
                  f"n=1 SORN min over 10 trials {min(easy):.4f} > 0.95")


@pytest.fixture(scope="module")
def ablation_rows():
    cfg = {"n_excitatory": 100, "steps": 50_000, "record_last": 10_000}
    return [experiments.sorn_ablation_run(cfg, seed)[0] for seed in range(10)]


@pytest.mark.slow
def test_criterion_05_sorn_ablations(report, ablation_rows):
    m = {k: np.mean([r[k] for r in ablation_rows]) for k in ablation_rows[0]}
    corr_ratio = m["no_sn_correlation"] / m["full_correlation"]
    std_ratio = m["no_ip_rate_std"] / m["full_rate_std"]
    ok = corr_ratio >= 2 and std_ratio >= 2
    report(5, ok, f"correlation SN off/on {m['no_sn_correlation']:.4f}/{m['full_correlation']:.4f} "
                  f"= {corr_ratio:.2f}x; rate std IP off/on {m['no_ip_rate_std']:.4f}/"
                  f"{m['full_rate_std']:.4f} = {std_ratio:.2f}x")


@pytest.mark.slow
def test_criterion_06_ip_target_rate(report, ablation_rows):
    target = sorn.SornParams().target_rate
    rates = np.array([r["full_rate"] for r in ablation_rows])
    worst = float(np.max(np.abs(rates - target)))
    report(6, worst <= 0.02, f"full-plasticity rates {rates.min():.4f}..{rates.max():.4f}, "
                             f"max |rate - {target}| = {worst:.4f} <= 0.02")


@pytest.mark.slow
def test_criterion_07_te_adaptation(report):
    rows = [experiments.te_adapt_coupled_maps_run({"e": 0.75}, seed)[0] for seed in range(20)]
    adapted = np.mean([r["mse_adapted"] for r in rows])
    static = np.mean([r["mse_static"] for r in rows])
    wins = np.mean([r["adapted_wins"] for r in rows])
    ok = adapted <= static and wins >= 0.7
    report(7, ok, f"mean MSE adapted {adapted:.3g} <= static {static:.3g}; adapted wins {wins:.0%} >= 70%")


def test_criterion_08_separation_rank(report):
    distinct_ranks, identical_ranks = [], []
    for seed in range(20):
        r = build_reservoir(ReservoirParams(50, nonlinearity="tanh", seed=seed))
        g = np.random.default_rng(500 + seed)
        streams = [g.uniform(-1, 1, 50) for _ in range(10)]
        distinct_ranks.append(separation_rank(r, streams, 50).rank)
        identical_ranks.append(separation_rank(r, [streams[0]] * 10, 50).rank)
    ok = set(distinct_ranks) == {10} and set(identical_ranks) == {1}
    report(8, ok, f"distinct ranks {sorted(set(distinct_ranks))}, identical ranks "
                  f"{sorted(set(identical_ranks))} over 20 seeds")


def test_criterion_09_criticality(report):
    lam = {}
    for rho in (0.5, 2.0):
        r = build_reservoir(ReservoirParams(50, spectral_radius=rho, nonlinearity="linear", seed=0))
        lam[rho] = criticality_estimate(r, np.zeros(1000), horizon=1000).exponent
    rhos = np.round(np.arange(0.1, 2.01, 0.1), 2)
    sweep = [experiments.criticality_run({"n_units": 50, "spectral_radius": float(p)}, 0)[0]["exponent"]
             for p in rhos]
    rho_s = spearmanr(rhos, sweep).statistic
    ok = (abs(lam[0.5] - math.log(0.5)) <= 0.01 and abs(lam[2.0] - math.log(2)) <= 0.01
          and rho_s > 0.95)
    report(9, ok, f"linear exponent {lam[0.5]:.4f} (ln 0.5 = {math.log(0.5):.4f}), {lam[2.0]:.4f} "
                  f"(ln 2 = {math.log(2):.4f}); tanh sweep Spearman {rho_s:.3f} > 0.95")


def test_criterion_10_fmc_oracle(report):
    r = build_reservoir(ReservoirParams(5, spectral_radius=0.8, nonlinearity="linear", seed=11))
    eps = 0.01
    j = fisher_memory_curve(r, eps, 5).J
    oracle = mc_fisher(np.array(r.w_res), r.w_in[:, 0], eps, 5)
    rel = np.max(np.abs(j - oracle) / oracle)
    w_in = np.array([0.3, -0.5, 0.2, 0.9, 0.4])
    j0 = fisher_memory_curve(Reservoir.from_matrices(w_in, np.zeros((5, 5)), "linear"), eps, 5).J
    exact = j0[0] == np.sum(w_in**2) / eps and not j0[1:].any()
    ok = rel <= 0.05 and exact
    report(10, ok, f"max relative deviation from Monte-Carlo {rel:.4f} <= 0.05 for k <= 5; "
                   f"W=0: J(0)={j0[0]:.6g} vs {np.sum(w_in**2) / eps:.6g}, J(k>=1) all zero: {not j0[1:].any()}")


def test_criterion_11_fading_memory(report):
    converged = 0
    for seed in range(20):
        r = build_reservoir(ReservoirParams(50, spectral_radius=0.95, nonlinearity="tanh", seed=seed))
        g = np.random.default_rng(seed + 77)
        rep = fading_memory_check(r, g.uniform(-1, 1, 1000), g.uniform(-1, 1, 50),
                                  g.uniform(-1, 1, 50), tolerance=1e-6)
        converged += rep.converged
    report(11, converged == 20, f"{converged}/20 seeds reach state distance < 1e-6 within 1000 steps")


def test_criterion_12_task_complexity(report):
    hits = {"copy": 0, "xor_two_lags": 0}
    expected = {"copy": (1, 1), "xor_two_lags": (1, 2)}
    for name in hits:
        for seed in range(20):
            x, y = synthetic_process(name, 100_000, seed)
            rep = task_complexity(y, x, 4, 4)
            hits[name] += (rep.memory.k_star, rep.input.l_star) == expected[name]
    ok = all(v == 20 for v in hits.values())
    report(12, ok, f"copy (k*, l*) = (1, 1) in {hits['copy']}/20; XOR of two lags (k*, l*) = (1, 2) "
                   f"in {hits['xor_two_lags']}/20")


def test_criterion_13_determinism(report, tmp_path):
    mismatched = []
    for name in bundled_specs():
        spec = load_spec(bundled_spec_path(name))
        a = run_experiment(spec, tmp_path / name / "a").out_dir / "trials.csv"
        b = run_experiment(spec, tmp_path / name / "b").out_dir / "trials.csv"
        if a.read_bytes() != b.read_bytes():
            mismatched.append(name)
    n = len(bundled_specs())
    report(13, not mismatched, f"{n - len(mismatched)}/{n} bundled specs give byte-identical trials.csv"
                               + (f"; mismatched: {mismatched}" if mismatched else ""))
