"""Self-organizing reservoirs of radial-basis units (SOM / NeuralGas training).

Unit ``i`` responds to how close the current input and previous state are to
its weight vectors::

    x~_i(n) = exp(-alpha |v_in_i - u(n)|^2 - beta |v_i - x(n-1)|^2)
    x(n)    = (1 - gamma) x(n-1) + gamma x~(n)

and training moves the concatenated vector ``[v_in_i; v_i]`` toward
``[u(n); x(n)]`` with gain ``eta(n) h(i, n)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence

import numpy as np

from .reservoir import StateTrajectory, predict, train_readout
from .timeseries import SeriesLike, as_array


@dataclass(frozen=True)
class Schedule:
    """Exponential interpolation from ``initial`` to ``final`` over ``horizon`` steps."""

    initial: float
    final: float
    horizon: int

    def __post_init__(self):
        if self.initial < 0 or self.final < 0:
            raise ValueError("schedule values must be nonnegative")
        if self.final > self.initial:
            raise ValueError("schedules must be non-increasing")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    def __call__(self, n: int) -> float:
        if self.initial == 0:
            return 0.0
        frac = min(max(n, 0), self.horizon) / self.horizon
        if self.final == 0:
            return self.initial if frac < 1 else 0.0
        return self.initial * (self.final / self.initial) ** frac


def near_square_grid(n: int) -> tuple[int, int]:
    rows = max(1, int(math.floor(math.sqrt(n))))
    return rows, -(-n // rows)


@dataclass(frozen=True)
class SorParams:
    n_units: int
    input_dim: int = 1
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    grid: Optional[tuple[int, int]] = None
    eta: Schedule = Schedule(0.1, 0.01, 1000)
    neighborhood: Schedule = Schedule(2.0, 0.1, 1000)
    rule: Literal["som", "neural_gas"] = "som"
    seed: int = 0

    def __post_init__(self):
        if self.n_units < 1 or self.input_dim < 1:
            raise ValueError("n_units and input_dim must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.rule not in ("som", "neural_gas"):
            raise ValueError(f"unknown rule {self.rule!r}")
        grid = self.grid or near_square_grid(self.n_units)
        if grid[0] * grid[1] < self.n_units:
            raise ValueError(f"grid {grid} has fewer cells than {self.n_units} units")
        object.__setattr__(self, "grid", tuple(grid))

    def grid_distances(self) -> np.ndarray:
        """Manhattan distances between unit positions (row-major on the grid)."""
        cols = self.grid[1]
        idx = np.arange(self.n_units)
        pos = np.column_stack([idx // cols, idx % cols])
        return np.abs(pos[:, None, :] - pos[None, :, :]).sum(axis=2)


@dataclass(frozen=True)
class SorState:
    """Column ``i`` of ``v_in`` (N_u x N_x) and ``v`` (N_x x N_x) belongs to unit ``i``."""

    v_in: np.ndarray
    v: np.ndarray
    x: np.ndarray

    def to_json(self) -> str:
        return json.dumps(
            {"format_version": 1, "v_in": self.v_in.tolist(), "v": self.v.tolist(),
             "x": self.x.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "SorState":
        doc = json.loads(text)
        return cls(np.array(doc["v_in"]), np.array(doc["v"]), np.array(doc["x"]))


def sor_init(p: SorParams) -> SorState:
    rng = np.random.default_rng(p.seed)
    v_in = rng.uniform(0.0, 1.0, (p.input_dim, p.n_units))
    v = rng.uniform(0.0, 1.0, (p.n_units, p.n_units))
    return SorState(v_in, v, np.zeros(p.n_units))


def sor_step(s: SorState, p: SorParams, u) -> SorState:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (s.v_in.shape[0],):
        raise ValueError(f"input has shape {u.shape}, expected ({s.v_in.shape[0]},)")
    d_in = np.sum((s.v_in - u[:, None]) ** 2, axis=0)
    d_rec = np.sum((s.v - s.x[:, None]) ** 2, axis=0)
    x_tilde = np.exp(-p.alpha * d_in - p.beta * d_rec)
    x = x_tilde if p.gamma == 1.0 else (1.0 - p.gamma) * s.x + p.gamma * x_tilde
    return replace(s, x=x)


def bmu(s: SorState) -> int:
    """Index of the most active unit (lowest index on ties)."""
    if s.x.size == 0:
        raise ValueError("empty state")
    if np.any(np.isnan(s.x)):
        raise ValueError("state contains NaN")
    return int(np.argmax(s.x))


def neighborhood(s: SorState, p: SorParams, n: int, grid_dist: Optional[np.ndarray] = None) -> np.ndarray:
    b = p.neighborhood(n)
    if p.rule == "som":
        d = (grid_dist if grid_dist is not None else p.grid_distances())[bmu(s)]
        if b == 0:
            return (d == 0).astype(float)
        return np.exp(-(d.astype(float) ** 2) / b**2)
    order = np.argsort(-s.x, kind="stable")
    rank = np.empty(len(order))
    rank[order] = np.arange(len(order))
    if b == 0:
        return (rank == 0).astype(float)
    return np.exp(-rank / b)


def sor_learn_step(
    s: SorState, p: SorParams, u, n: int, grid_dist: Optional[np.ndarray] = None
) -> SorState:
    """Move every ``[v_in_i; v_i]`` toward ``[u(n); x(n)]`` by ``eta(n) h(i, n)``.

    ``s.x`` must already be the post-leak state of step ``n``.
    """
    gain = p.eta(n) * neighborhood(s, p, n, grid_dist)
    if not gain.any():
        return s
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v_in = s.v_in + gain[None, :] * (u[:, None] - s.v_in)
    v = s.v + gain[None, :] * (s.x[:, None] - s.v)
    return replace(s, v_in=v_in, v=v)


def sor_train(inputs: SeriesLike, p: SorParams, state: Optional[SorState] = None) -> SorState:
    """Unsupervised training: ``sor_step`` then ``sor_learn_step`` for every input."""
    u = as_array(inputs).astype(float)
    s = state if state is not None else sor_init(p)
    dist = p.grid_distances() if p.rule == "som" else None
    for n in range(len(u)):
        s = sor_step(s, p, u[n])
        s = sor_learn_step(s, p, u[n], n, dist)
    return s


def sor_run(s: SorState, p: SorParams, inputs: SeriesLike) -> tuple[np.ndarray, SorState]:
    """Drive a frozen SOR; returns the (T, N_x) activation sequence and final state."""
    u = as_array(inputs).astype(float)
    states = np.empty((len(u), s.x.size))
    for n in range(len(u)):
        s = sor_step(s, p, u[n])
        states[n] = s.x
    return states, s


def stack_hierarchy(
    layers: Sequence[SorParams], inputs: SeriesLike, per_layer_steps: int
) -> list[SorState]:
    """Layer-by-layer training; each layer's activations feed the next.

    Layer ``i`` trains on the first ``per_layer_steps`` samples of its input
    stream, then is frozen and run over the whole stream to produce the next
    layer's input.
    """
    if not layers:
        raise ValueError("need at least one layer")
    u = as_array(inputs).astype(float)
    if layers[0].input_dim != u.shape[1]:
        raise ValueError(
            f"layer 0 expects input_dim {layers[0].input_dim}, inputs have {u.shape[1]}"
        )
    for i in range(1, len(layers)):
        if layers[i].input_dim != layers[i - 1].n_units:
            raise ValueError(
                f"layer {i} input_dim {layers[i].input_dim} != layer {i - 1} n_units "
                f"{layers[i - 1].n_units}"
            )
    trained = []
    stream = u
    for i, p in enumerate(layers):
        s = sor_train(stream[:per_layer_steps], p)
        trained.append(s)
        if i + 1 < len(layers):
            stream, _ = sor_run(replace(s, x=np.zeros_like(s.x)), p, stream)
    return trained


def hierarchy_states(
    layers: Sequence[SorParams], trained: Sequence[SorState], inputs: SeriesLike
) -> np.ndarray:
    """Top-layer activations of a frozen hierarchy, each layer started from rest."""
    stream = as_array(inputs).astype(float)
    for p, s in zip(layers, trained):
        stream, _ = sor_run(replace(s, x=np.zeros_like(s.x)), p, stream)
    return stream


def classification_errors(
    states: np.ndarray, labels: np.ndarray, n_train: int, ridge_lambda: float = 1e-4
) -> tuple[float, float]:
    """Plain and class-balanced test error of a one-vs-all linear readout.

    The readout is fit on the first ``n_train`` rows and decoded by argmax on
    the rest.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not 0 < n_train < len(states):
        raise ValueError("n_train must leave both a training and a test part")
    n_classes = int(labels.max()) + 1
    onehot = np.eye(n_classes)[labels]
    ro = train_readout(StateTrajectory(states[:n_train], 0), onehot[:n_train], ridge_lambda)
    pred = np.argmax(predict(ro, StateTrajectory(states[n_train:], 0)).values, axis=1)
    t = labels[n_train:]
    per_class = [np.mean(pred[t == k] != k) for k in range(n_classes) if np.any(t == k)]
    return float(np.mean(pred != t)), float(np.mean(per_class))
