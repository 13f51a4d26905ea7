"""Trial functions for every experiment kind the CLI runs.

Each trial function takes the merged config dict and a trial seed and returns
``(row, curves)``: a flat dict of scalar results and a dict of named
``(x_name, y_name, xs, ys)`` curves. Unknown config keys are rejected by the
schema before a trial runs.
"""

from __future__ import annotations

import warnings
from typing import Any, Callable

import numpy as np

from . import measures, reservoir, sor, sorn, tasks, te_adaptation
from .task_complexity import task_complexity

Curves = dict[str, tuple[str, str, Any, Any]]
TrialFn = Callable[[dict, int], tuple[dict, Curves]]


def _reservoir(c: dict, seed: int, nonlinearity: str) -> reservoir.Reservoir:
    return reservoir.build_reservoir(
        reservoir.ReservoirParams(
            n_units=c.get("n_units", 20),
            spectral_radius=c.get("spectral_radius", 0.95),
            input_scaling=c.get("input_scaling", 1.0),
            connection_density=c.get("connection_density", 1.0),
            nonlinearity=c.get("nonlinearity", nonlinearity),
            leak_rate=c.get("leak_rate", 1.0),
            seed=seed,
        )
    )


def _input_seed(seed: int) -> int:
    # input streams draw from a seed distinct from the network's
    return (seed + 0x9E3779B9) % 2**63


def mc_curve(c: dict, seed: int):
    r = _reservoir(c, seed, "linear")
    u = tasks.gen_iid_uniform(c.get("length", 4000), seed=_input_seed(seed))
    rep = reservoir.memory_capacity(r, u, c.get("k_max", 40), c.get("ridge_lambda", 1e-8),
                                    c.get("washout", 100))
    mc_k = rep.curves["MC_k"]
    return {"MC": rep.scalars["MC"]}, {"mc": ("k", "MC_k", range(1, len(mc_k) + 1), mc_k)}


def ipc_run(c: dict, seed: int):
    r = _reservoir(c, seed, "tanh")
    u = tasks.gen_iid_uniform(c.get("length", 5000), lo=-0.999, hi=0.999, seed=_input_seed(seed))
    basis = measures.legendre_basis(c.get("max_degree", 2), range(1, c.get("max_delay", 30) + 1))
    rep = measures.ipc(r, u, basis, c.get("ridge_lambda", 1e-8), c.get("washout", 100))
    row = {"total": rep.total}
    for d in range(1, c.get("max_degree", 2) + 1):
        row[f"total_degree_{d}"] = rep.total_of_degree(d, basis)
    return row, {"ipc": ("function", "capacity", list(rep.capacities), list(rep.capacities.values()))}


def fmc_run(c: dict, seed: int):
    r = _reservoir({**c, "nonlinearity": "linear"}, seed, "linear")
    rep = measures.fisher_memory_curve(r, c.get("noise_variance", 1e-2), c.get("k_max", 50))
    return ({"J_total": float(rep.J.sum()), "J_0": float(rep.J[0])},
            {"fmc": ("k", "J", range(len(rep.J)), rep.J)})


def ranks_run(c: dict, seed: int):
    r = _reservoir({"n_units": 50, **c}, seed, "tanh")
    rng = np.random.default_rng(_input_seed(seed))
    m, length = c.get("n_streams", 10), c.get("stream_length", 50)
    distinct = [rng.uniform(-1, 1, length) for _ in range(m)]
    # a generalization universe: noisy variants of one stream
    base = rng.uniform(-1, 1, length)
    noisy = [base + c.get("universe_noise", 0.01) * rng.standard_normal(length) for _ in range(m)]
    rtol = c.get("rank_rtol", 1e-12)
    sep = measures.separation_rank(r, distinct, length, rtol)
    gen = measures.generalization_rank(r, noisy, length, rtol)
    same = measures.separation_rank(r, [distinct[0]] * m, length, rtol)
    return {
        "separation_rank": sep.rank,
        "generalization_rank": gen.rank,
        "identical_rank": same.rank,
        "quality": measures.quality_score(sep, gen),
    }, {}


def criticality_run(c: dict, seed: int):
    r = _reservoir(c, seed, "tanh")
    horizon = c.get("horizon", 1000)
    washout = c.get("washout", 100)
    amp = c.get("input_amplitude", 1.0)
    u = amp * tasks.gen_iid_uniform(horizon + washout, seed=_input_seed(seed)).values
    rep = measures.criticality_estimate(r, u, c.get("perturbation", 1e-8), horizon,
                                        c.get("perturbation_trials", 10), c.get("tolerance", 0.01),
                                        washout)
    return {"exponent": rep.exponent, "regime": rep.regime}, {}


def sorn_counting_run(c: dict, seed: int):
    p = sorn.SornParams(n_excitatory=c.get("n_excitatory", 100), seed=seed)
    task = sorn.CountingTask(c.get("n", 8))
    ph = sorn.Phases(c.get("plastic_steps", 50_000), c.get("readout_steps", 5_000),
                     c.get("test_steps", 5_000))
    plastic = sorn.sorn_train_and_eval(p, task, sorn.Plasticity(), ph)
    static = sorn.sorn_train_and_eval(p, task, sorn.Plasticity.none(), ph)
    return {
        "n_excitatory": p.n_excitatory,
        "sorn_accuracy": plastic.accuracy,
        "sorn_normalized": plastic.normalized_performance,
        "static_accuracy": static.accuracy,
        "static_normalized": static.normalized_performance,
        "sorn_rate": plastic.mean_rate,
        "sorn_flags": ";".join(plastic.flags) or "none",
    }, {}


def sorn_ablation_run(c: dict, seed: int):
    p = sorn.SornParams(n_excitatory=c.get("n_excitatory", 100), seed=seed)
    steps, last = c.get("steps", 50_000), c.get("record_last", 10_000)
    task = sorn.CountingTask(c.get("n", 4))
    row = {}
    for name, rules in (
        ("full", sorn.Plasticity()),
        ("no_sn", sorn.Plasticity(sn=False)),
        ("no_ip", sorn.Plasticity(ip=False)),
    ):
        st = sorn.sorn_activity(p, rules, steps, last, task)
        row[f"{name}_rate"] = st.mean_rate
        row[f"{name}_rate_std"] = st.rate_std
        row[f"{name}_correlation"] = st.mean_correlation
    return row, {}


def sor_layers(c: dict, seed: int, train_steps: int) -> list[sor.SorParams]:
    n = c.get("n_units", 36)
    alpha, beta, gamma = c.get("alpha", 50.0), c.get("beta", 1.0), c.get("gamma", 0.5)
    layers = []
    in_dim = c.get("input_dim", 1)
    for i in range(c.get("layers", 2)):
        layers.append(
            sor.SorParams(
                n, in_dim, alpha=alpha / 10**i, beta=beta, gamma=gamma,
                eta=sor.Schedule(0.3, 0.01, train_steps),
                neighborhood=sor.Schedule(n**0.5 / 2, 0.3, train_steps),
                rule=c.get("rule", "som"), seed=seed + 100 * i,
            )
        )
        in_dim = n
    return layers


def sor_pattern_run(c: dict, seed: int):
    length, n_train = c.get("length", 8000), c.get("n_train", 4000)
    u, tgt = tasks.gen_pattern_detection(
        length, c.get("pattern_length", 3), c.get("n_patterns", 3), c.get("noise", 0.05),
        _input_seed(seed),
    )
    tgt = tgt.values[:, 0]
    row = {}
    for name, steps in (("ample", c.get("ample_steps", 4000)), ("tiny", c.get("tiny_steps", 20))):
        layers = sor_layers(c, seed, steps)
        trained = sor.stack_hierarchy(layers, u, steps)
        err, bal = sor.classification_errors(sor.hierarchy_states(layers, trained, u), tgt, n_train)
        row[f"{name}_error"] = err
        row[f"{name}_balanced_error"] = bal
    return row, {}


def _adapt_cfg(c: dict) -> te_adaptation.AdaptationConfig:
    return te_adaptation.AdaptationConfig(
        epsilon=c.get("epsilon", 0.01),
        epoch_length=c.get("epoch_length", 1000),
        max_epochs=c.get("max_epochs", 50),
        bins=c.get("bins", 8),
        stabilization=c.get("stabilization", 3),
        l_max=c.get("l_max", 10),
    )


def _adapt_compare(c: dict, seed: int, series: np.ndarray):
    r = te_adaptation.AdaptiveReservoir.from_reservoir(_reservoir({"n_units": 50, **c}, seed, "tanh"))
    u, v = series[:-1], series[1:]
    cmp = te_adaptation.compare_adaptation(r, u[:, None], v[:, None], c.get("n_train", 3000),
                                           _adapt_cfg(c), c.get("ridge_lambda", 1e-6))
    m = cmp.pretrain.reservoir.m
    return cmp.as_row(), {"m": ("unit", "m_i", range(len(m)), m)}


def te_adapt_coupled_maps_run(c: dict, seed: int):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", tasks.ClampWarning)
        _, y = tasks.gen_coupled_maps(c.get("length", 5001), c.get("e", 0.75),
                                      c.get("omega", 0.0), seed=_input_seed(seed))
    return _adapt_compare(c, seed, y.values[:, 0])


def te_adapt_mackey_glass_run(c: dict, seed: int):
    mg = tasks.gen_mackey_glass(c.get("length", 5001), tau=c.get("tau", 17),
                                subsample=c.get("subsample", 1), seed=_input_seed(seed))
    x = mg.values[:, 0]
    return _adapt_compare(c, seed, x - x.mean())


def synthetic_process(name: str, length: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Binary ``(x, y)`` test processes with known memory and input history."""
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, length)
    y = np.zeros(length, dtype=np.int64)
    if name == "copy":
        y[1:] = x[:-1]
    elif name == "xor_two_lags":
        y[2:] = x[1:-1] ^ x[:-2]
    elif name == "xor_input":
        for t in range(length - 1):
            y[t + 1] = y[t] ^ x[t]
    elif name == "xor_self":
        y[:2] = (0, 1)
        for t in range(1, length - 1):
            y[t + 1] = y[t] ^ y[t - 1]
    elif name == "period_2":
        y = np.arange(length) % 2
    elif name == "independent":
        y = rng.integers(0, 2, length)
    else:
        raise ValueError(f"unknown process {name!r}")
    return x, y


PROCESSES = ("copy", "xor_two_lags", "xor_input", "xor_self", "period_2", "independent")


def task_complexity_run(c: dict, seed: int):
    x, y = synthetic_process(c.get("process", "copy"), c.get("length", 100_000), seed)
    rep = task_complexity(y, x, c.get("k_max", 5), c.get("l_max", 5), c.get("epsilon", 0.01))
    a, t = rep.memory.curve, rep.input.curve
    row = {
        "k_star": rep.memory.k_star,
        "l_star": rep.input.l_star,
        "A_at_k_star": float(a[rep.memory.k_star - 1]),
        "T_at_l_star": rep.input.te_at_l_star,
        "plateau_k": int(rep.memory.plateau_found),
        "plateau_l": int(rep.input.plateau_found),
    }
    return row, {"A_Y": ("k", "A_Y", range(1, len(a) + 1), a),
                 "T_XY": ("l", "T", range(1, len(t) + 1), t)}


EXPERIMENTS: dict[str, TrialFn] = {
    "mc_curve": mc_curve,
    "ipc": ipc_run,
    "fmc": fmc_run,
    "ranks": ranks_run,
    "criticality_sweep": criticality_run,
    "sorn_counting": sorn_counting_run,
    "sorn_ablation": sorn_ablation_run,
    "sor_pattern": sor_pattern_run,
    "te_adapt_coupled_maps": te_adapt_coupled_maps_run,
    "te_adapt_mackey_glass": te_adapt_mackey_glass_run,
    "task_complexity": task_complexity_run,
}
