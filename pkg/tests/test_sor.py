from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resorg.experiments import sor_pattern_run
from resorg.sor import (
    Schedule,
    SorParams,
    SorState,
    bmu,
    classification_errors,
    hierarchy_states,
    near_square_grid,
    neighborhood,
    sor_init,
    sor_learn_step,
    sor_run,
    sor_step,
    sor_train,
    stack_hierarchy,
)


def test_schedule():
    s = Schedule(0.5, 0.05, 100)
    assert s(0) == 0.5 and s(100) == pytest.approx(0.05) and s(500) == pytest.approx(0.05)
    assert s(50) == pytest.approx(0.5 * 0.1**0.5)
    assert Schedule(0.0, 0.0, 10)(3) == 0.0
    with pytest.raises(ValueError):
        Schedule(0.1, 0.2, 10)
    with pytest.raises(ValueError):
        Schedule(0.1, 0.01, 0)


def test_params_validation_and_grid():
    assert near_square_grid(10) == (3, 4)
    p = SorParams(6, grid=(2, 3))
    d = p.grid_distances()
    assert d[0, 5] == 3 and d[1, 4] == 1
    for kw in ({"alpha": -1}, {"gamma": 0.0}, {"gamma": 1.5}, {"rule": "kmeans"}, {"grid": (1, 2)}):
        with pytest.raises(ValueError):
            SorParams(4, **kw)


def test_step_zero_distance_unit():
    p = SorParams(3, 2, alpha=5, beta=5)
    s = sor_init(p)
    s = replace(s, x=s.v[:, 1].copy())
    out = sor_step(s, p, s.v_in[:, 1])
    assert out.x[1] == pytest.approx(1.0)


def test_step_gamma_and_zero_scales(rng):
    p = SorParams(4, 1, alpha=2, beta=3, gamma=1.0)
    s = replace(sor_init(p), x=rng.uniform(size=4))
    u = np.array([0.3])
    out = sor_step(s, p, u)
    expected = np.exp(-2 * np.sum((s.v_in - u[:, None]) ** 2, 0) - 3 * np.sum((s.v - s.x[:, None]) ** 2, 0))
    assert np.array_equal(out.x, expected)
    flat = SorParams(4, 1, alpha=0, beta=0)
    assert np.all(sor_step(sor_init(flat), flat, u).x == 1.0)
    leaky = replace(p, gamma=0.25)
    assert np.allclose(sor_step(s, leaky, u).x, 0.75 * s.x + 0.25 * expected)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000), gamma=st.floats(0.01, 1.0), alpha=st.floats(0, 50))
def test_activations_in_unit_interval(seed, gamma, alpha):
    p = SorParams(6, 2, alpha=alpha, beta=1.0, gamma=gamma, seed=seed)
    s = sor_init(p)
    g = np.random.default_rng(seed)
    for u in g.uniform(-1, 2, (30, 2)):
        s = sor_step(s, p, u)
        assert np.all((s.x >= 0) & (s.x <= 1))


def test_step_dimension_error():
    p = SorParams(3, 2)
    with pytest.raises(ValueError):
        sor_step(sor_init(p), p, [0.1])


def test_bmu():
    st_ = SorState(np.zeros((1, 3)), np.zeros((3, 3)), np.array([0.1, 0.9, 0.3]))
    assert bmu(st_) == 1
    assert bmu(replace(st_, x=np.full(3, 0.4))) == 0
    with pytest.raises(ValueError):
        bmu(replace(st_, x=np.array([0.1, np.nan, 0.2])))


def test_learning_zero_rate():
    p = SorParams(4, 1, eta=Schedule(0.0, 0.0, 10))
    s = sor_step(sor_init(p), p, [0.5])
    out = sor_learn_step(s, p, [0.5], 0)
    assert np.array_equal(out.v_in, s.v_in) and np.array_equal(out.v, s.v)


@pytest.mark.parametrize("rule", ["som", "neural_gas"])
def test_bmu_moves_fraction_eta(rule):
    p = SorParams(9, 2, rule=rule, eta=Schedule(0.2, 0.2, 10), seed=3)
    s = sor_step(sor_init(p), p, [0.3, 0.7])
    b = bmu(s)
    assert neighborhood(s, p, 0)[b] == 1.0
    out = sor_learn_step(s, p, [0.3, 0.7], 0)
    target = np.concatenate([[0.3, 0.7], s.x])
    before = np.concatenate([s.v_in[:, b], s.v[:, b]])
    after = np.concatenate([out.v_in[:, b], out.v[:, b]])
    assert np.allclose(after, before + 0.2 * (target - before))


def test_neural_gas_ranks():
    p = SorParams(4, 1, rule="neural_gas", neighborhood=Schedule(1.0, 1.0, 10))
    s = replace(sor_init(p), x=np.array([0.2, 0.9, 0.5, 0.1]))
    assert np.allclose(neighborhood(s, p, 0), np.exp(-np.array([2, 0, 1, 3])))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000), rule=st.sampled_from(["som", "neural_gas"]), n=st.integers(0, 50))
def test_learning_contracts_toward_target(seed, rule, n):
    p = SorParams(6, 2, rule=rule, eta=Schedule(0.9, 0.05, 40), seed=seed)
    g = np.random.default_rng(seed)
    u = g.uniform(size=2)
    s = sor_step(replace(sor_init(p), x=g.uniform(size=6)), p, u)
    out = sor_learn_step(s, p, u, n)
    target = np.concatenate([u, s.x])[:, None]
    before = np.linalg.norm(np.vstack([s.v_in, s.v]) - target, axis=0)
    after = np.linalg.norm(np.vstack([out.v_in, out.v]) - target, axis=0)
    assert np.all(after <= before + 1e-12)


def test_som_equals_neural_gas_single_unit():
    u = np.random.default_rng(0).uniform(size=(40, 1))
    a = sor_train(u, SorParams(1, 1, grid=(1, 1), rule="som", seed=2))
    b = sor_train(u, SorParams(1, 1, grid=(1, 1), rule="neural_gas", seed=2))
    assert np.array_equal(a.v_in, b.v_in) and np.array_equal(a.v, b.v)


def test_train_empty_and_deterministic():
    p = SorParams(5, 1, seed=4)
    assert np.array_equal(sor_train(np.zeros((0, 1)), p).v_in, sor_init(p).v_in)
    u = np.random.default_rng(1).uniform(size=(200, 1))
    a, b = sor_train(u, p), sor_train(u, p)
    assert np.array_equal(a.v_in, b.v_in) and np.array_equal(a.v, b.v)


def test_neural_gas_converges_on_constant_input():
    p = SorParams(8, 2, rule="neural_gas", eta=Schedule(0.5, 0.01, 2000),
                  neighborhood=Schedule(2.0, 0.1, 2000), seed=5)
    c = np.array([0.8, 0.15])
    s = sor_train(np.tile(c, (2000, 1)), p)
    # fixed point of the rule: the winning column equals the input
    assert np.min(np.linalg.norm(s.v_in - c[:, None], axis=0)) < 0.05


def test_state_json_round_trip():
    s = sor_train(np.random.default_rng(0).uniform(size=(50, 2)), SorParams(4, 2))
    t = SorState.from_json(s.to_json())
    assert np.array_equal(t.v_in, s.v_in) and np.array_equal(t.v, s.v) and np.array_equal(t.x, s.x)


def test_hierarchy_single_layer_matches_train():
    u = np.random.default_rng(2).uniform(size=(100, 1))
    p = SorParams(5, 1, seed=1)
    (only,) = stack_hierarchy([p], u, 100)
    ref = sor_train(u, p)
    assert np.array_equal(only.v_in, ref.v_in) and np.array_equal(only.v, ref.v)


def test_hierarchy_zero_steps_untrained():
    u = np.random.default_rng(2).uniform(size=(30, 1))
    layers = [SorParams(4, 1, seed=1), SorParams(3, 4, seed=2)]
    trained = stack_hierarchy(layers, u, 0)
    for p, s in zip(layers, trained):
        assert np.array_equal(s.v_in, sor_init(p).v_in) and np.array_equal(s.v, sor_init(p).v)
    assert hierarchy_states(layers, trained, u).shape == (30, 3)


def test_hierarchy_dimension_chain():
    with pytest.raises(ValueError):
        stack_hierarchy([SorParams(4, 1), SorParams(3, 5)], np.zeros((10, 1)), 5)
    with pytest.raises(ValueError):
        stack_hierarchy([SorParams(4, 2)], np.zeros((10, 1)), 5)
    with pytest.raises(ValueError):
        stack_hierarchy([], np.zeros((10, 1)), 5)


def test_sor_run_frozen():
    p = SorParams(4, 1, seed=0)
    s = sor_init(p)
    states, last = sor_run(s, p, np.linspace(0, 1, 20)[:, None])
    assert states.shape == (20, 4) and np.array_equal(last.v_in, s.v_in)


def test_classification_errors_perfect_and_balanced():
    labels = np.array([0, 1] * 50)
    states = np.eye(2)[labels]
    assert classification_errors(states, labels, 60) == (0.0, 0.0)
    const = np.ones((100, 1))
    err, bal = classification_errors(const, np.r_[np.zeros(90, int), np.ones(10, int)], 50)
    assert bal == pytest.approx(0.5)


def test_ample_training_beats_tiny_training():
    ample, tiny = [], []
    for seed in range(10):
        row, _ = sor_pattern_run({}, seed)
        ample.append(row["ample_error"])
        tiny.append(row["tiny_error"])
    assert all(a <= t for a, t in zip(ample, tiny))
    assert np.mean(ample) < np.mean(tiny)
