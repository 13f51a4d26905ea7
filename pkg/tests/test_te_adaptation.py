from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resorg.reservoir import ReservoirParams, build_reservoir, run
from resorg.te_adaptation import (
    AdaptationConfig,
    AdaptiveReservoir,
    adapt_epoch,
    adaptive_run,
    adaptive_step,
    plateau_index,
    pretrain,
    select_input_history,
    unit_transfer_entropies,
)


def _reservoir(n=10, seed=0, w_in_scale=1.0):
    r = build_reservoir(ReservoirParams(n, spectral_radius=0.9, input_scaling=w_in_scale,
                                        nonlinearity="tanh", seed=seed))
    return AdaptiveReservoir.from_reservoir(r)


def test_decay_from_memory_length():
    r = replace(_reservoir(3), m=np.array([1, 3, 9]))
    assert np.array_equal(r.a, [1.0, 0.5, 0.2])
    with pytest.raises(ValueError):
        replace(r, m=np.array([1, 0, 2]))


def test_unit_memory_reduces_to_plain_update(rng):
    r = _reservoir(6)
    y = rng.uniform(-1, 1, 6)
    x, y2 = adaptive_step(r, y, 0.3)
    assert np.allclose(x, r.w @ y + r.w_in * 0.3)
    assert np.array_equal(y2, np.tanh(x))


def test_pure_self_memory(rng):
    n = 5
    r = AdaptiveReservoir(np.zeros((n, n)), np.zeros(n), np.array([2, 3, 4, 5, 9]), np.zeros(n, bool))
    y = rng.uniform(-1, 1, n)
    x, _ = adaptive_step(r, y, 0.7)
    assert np.allclose(x, (1 - r.a) * y)


def test_step_loop_oracle(rng):
    n = 4
    r = replace(_reservoir(n, seed=2), m=np.array([1, 2, 5, 7]))
    y = rng.uniform(-1, 1, n)
    x, _ = adaptive_step(r, y, -0.4)
    ref = [
        r.a[i] * sum(r.w[i, j] * y[j] for j in range(n)) + (1 - r.a[i]) * y[i] + r.w_in[i] * -0.4
        for i in range(n)
    ]
    assert np.allclose(x, ref)
    with pytest.raises(ValueError):
        adaptive_step(r, y[:3], 0.0)


def test_run_matches_step_and_plain_reservoir(rng):
    params = ReservoirParams(8, spectral_radius=0.9, nonlinearity="tanh", seed=1)
    base = build_reservoir(params)
    r = AdaptiveReservoir.from_reservoir(base)
    u = rng.uniform(-1, 1, 50)
    xs, ys = adaptive_run(r, u[:, None])
    y = np.zeros(8)
    for t in range(50):
        x, y = adaptive_step(r, y, u[t])
        assert np.allclose(xs[t], x) and np.allclose(ys[t], y)
    assert np.allclose(ys, run(base, u[:, None]).states)


@settings(max_examples=40, deadline=None)
@given(
    m=st.lists(st.integers(1, 50), min_size=5, max_size=5),
    te=st.lists(st.floats(0, 3), min_size=5, max_size=5),
    prev=st.lists(st.floats(0, 3), min_size=5, max_size=5),
    frozen=st.lists(st.booleans(), min_size=5, max_size=5),
)
def test_adapt_epoch_invariants(m, te, prev, frozen):
    r = AdaptiveReservoir(np.zeros((5, 5)), np.zeros(5), np.array(m), np.array(frozen))
    out = adapt_epoch(r, np.array(te), np.array(prev), 0.01)
    assert np.all(out.m >= 1)
    assert np.array_equal(out.a, 2.0 / (1.0 + out.m))
    assert np.all((out.a > 0) & (out.a <= 1))
    assert np.array_equal(out.m[out.frozen], r.m[r.frozen])
    assert np.all(np.abs(out.m - r.m) <= 1)


def test_adapt_epoch_examples():
    r = AdaptiveReservoir(np.zeros((3, 3)), np.zeros(3), np.array([2, 1, 4]), np.zeros(3, bool))
    out = adapt_epoch(r, np.array([0.50, 0.40, 0.405]), np.array([0.40, 0.50, 0.40]), 0.01)
    assert out.m.tolist() == [3, 1, 4]
    assert adapt_epoch(r, np.ones(3), None, 0.01) is r
    frozen = replace(r, frozen=np.array([True, False, False]))
    assert adapt_epoch(frozen, np.array([0.9, 0, 0]), np.zeros(3), 0.01).m[0] == 2


def test_plateau_index():
    assert plateau_index(np.array([0.0, 1.0, 1.0, 1.0]), 0.01) == (2, True)
    assert plateau_index(np.array([1.0, 1.0]), 0.01) == (1, True)
    assert plateau_index(np.array([0.0, 0.5, 1.0]), 0.01) == (3, False)
    assert plateau_index(np.array([0.3]), 0.01) == (1, False)


def _binary(n, seed):
    return np.random.default_rng(seed).integers(0, 2, n)


def test_select_history_copy():
    u = _binary(20_000, 0)
    v = np.zeros_like(u)
    v[1:] = u[:-1]
    sel = select_input_history(u, v, 0.01, 5)
    assert sel.l_hat == 1 and sel.plateau_found
    assert sel.te_curve[0] == pytest.approx(1.0, abs=0.01)


def test_select_history_independent():
    sel = select_input_history(_binary(20_000, 1), _binary(20_000, 2), 0.01, 3)
    assert sel.l_hat == 1 and np.all(sel.te_curve < 0.01)


def test_select_history_xor_of_two_lags():
    u = _binary(40_000, 3)
    v = np.zeros_like(u)
    v[2:] = u[1:-1] ^ u[:-2]
    sel = select_input_history(u, v, 0.01, 4)
    assert sel.l_hat == 2
    assert sel.te_curve[0] == pytest.approx(0.0, abs=0.01)
    assert sel.te_curve[1] == pytest.approx(1.0, abs=0.01)


@pytest.mark.filterwarnings("ignore::resorg.info.DiscretizationWarning")
def test_select_history_errors():
    with pytest.raises(ValueError):
        select_input_history(np.zeros(5), np.zeros(5), 0.01, 10)
    with pytest.raises(ValueError):
        select_input_history(np.zeros(50), np.zeros(50), 0.01, 0)
    with pytest.raises(ValueError):
        select_input_history(np.zeros(50), np.zeros(40), 0.01, 2)


def test_config_validation():
    for kw in ({"epsilon": 0}, {"epoch_length": 5}, {"max_epochs": -1}, {"stabilization": 0},
               {"l_max": 0}, {"k": 2}):
        with pytest.raises(ValueError):
            AdaptationConfig(**kw)


def _drive(n=2000, seed=7):
    u = np.random.default_rng(seed).uniform(-1, 1, n + 1)
    return u[:-1, None], u[1:, None]


def test_pretrain_zero_epochs_times_out():
    r = _reservoir(6)
    u, v = _drive()
    res = pretrain(r, u, v, AdaptationConfig(max_epochs=0, l_max=2), l_hat=1)
    assert res.epochs == 0 and res.timed_out
    assert np.array_equal(res.reservoir.m, r.m)


def test_pretrain_infinite_epsilon_freezes_after_window():
    r = _reservoir(6)
    u, v = _drive()
    res = pretrain(r, u, v, AdaptationConfig(epsilon=np.inf, epoch_length=200, stabilization=3), l_hat=1)
    assert res.epochs == 3 and not res.timed_out
    assert res.reservoir.frozen.all() and np.all(res.reservoir.m == 1)


def test_pretrain_invariants_and_trace():
    r = _reservoir(8, seed=3)
    u, v = _drive(3000)
    cfg = AdaptationConfig(epoch_length=300, max_epochs=8, l_max=3)
    res = pretrain(r, u, v, cfg)
    assert 1 <= res.l_hat <= 3
    m = res.reservoir.m
    assert np.all(m >= 1) and np.array_equal(res.reservoir.a, 2.0 / (1.0 + m))
    lines = res.trace_csv().splitlines()
    assert lines[0] == "epoch,unit,te_bits,m_i,frozen"
    assert len(lines) == 1 + res.epochs * 8
    # once frozen a unit's m never changes again
    for i in range(8):
        rows = [t for t in res.trace if t["unit"] == i]
        first = next((k for k, t in enumerate(rows) if t["frozen"]), None)
        if first is not None:
            assert {t["m_i"] for t in rows[first:]} == {rows[first]["m_i"]}
            assert all(t["frozen"] for t in rows[first:])


def test_pretrain_deterministic():
    u, v = _drive(2000)
    cfg = AdaptationConfig(epoch_length=250, max_epochs=5, l_max=2)
    a = pretrain(_reservoir(6, seed=4), u, v, cfg)
    b = pretrain(_reservoir(6, seed=4), u, v, cfg)
    assert a.trace_csv() == b.trace_csv() and np.array_equal(a.reservoir.m, b.reservoir.m)


@pytest.mark.filterwarnings("ignore::resorg.info.DiscretizationWarning")
def test_decoupled_units_do_not_drift():
    # input-decoupled, recurrence-free units sit at zero; their TE stays at the floor
    n = 6
    r = AdaptiveReservoir(np.zeros((n, n)), np.zeros(n), np.ones(n, dtype=np.int64), np.zeros(n, bool))
    u, v = _drive(12_000, seed=9)
    cfg = AdaptationConfig(epsilon=0.05, epoch_length=1000, max_epochs=10, stabilization=20)
    res = pretrain(r, u, v, cfg, l_hat=2)
    assert res.epochs == 10 and np.all(res.reservoir.m == 1)


@pytest.mark.filterwarnings("ignore::resorg.info.DiscretizationWarning")
def test_decoupled_unit_in_coupled_network():
    r = _reservoir(6, seed=5)
    w_in = r.w_in.copy()
    w_in[0] = 0.0
    w = r.w.copy()
    w[0, :] = 0.0
    r = replace(r, w=w, w_in=w_in)
    u, v = _drive(12_000, seed=10)
    cfg = AdaptationConfig(epsilon=0.05, epoch_length=1000, max_epochs=10, stabilization=20)
    res = pretrain(r, u, v, cfg, l_hat=2)
    assert res.reservoir.m[0] == 1


def test_unit_transfer_entropies_shape():
    r = _reservoir(5)
    u, _ = _drive(600)
    xs, ys = adaptive_run(r, u)
    te = unit_transfer_entropies(xs, ys, 2)
    assert te.shape == (5,) and np.all(te >= 0)
