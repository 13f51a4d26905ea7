"""Seeded generators for benchmark inputs and targets.

Every generator is a pure function of its arguments: the same parameters and
seed give bit-identical output.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .timeseries import TimeSeries

TASK_KINDS = ("mackey_glass", "coupled_maps", "counting", "iid_uniform", "pattern_detection")


class ClampWarning(UserWarning):
    pass


def gen_mackey_glass(
    length: int,
    tau: float = 17,
    a: float = 0.2,
    b: float = 0.1,
    n: float = 10,
    dt: float = 1.0,
    subsample: int = 1,
    seed: int = 0,
    discard: int = 1000,
) -> TimeSeries:
    """Mackey-Glass series ``dx/dt = a x(t-tau) / (1 + x(t-tau)^n) - b x(t)``.

    Fixed-step RK4; the delayed term at half steps is the mean of its two grid
    neighbours. The history is the constant 1.2 plus a small seeded jitter and
    the first ``discard`` output samples are dropped.
    """
    ratio = tau / dt
    lag = int(round(ratio))
    if abs(ratio - lag) > 1e-9 or lag < 1:
        raise ValueError(f"tau/dt must be a positive integer, got {ratio}")
    if length < 1 or subsample < 1:
        raise ValueError("length and subsample must be positive")
    rng = np.random.default_rng(seed)
    total = (length + discard) * subsample
    x = np.empty(lag + total + 1)
    x[: lag + 1] = 1.2 + 0.01 * rng.uniform(-1.0, 1.0, lag + 1)

    def rhs(xt, xd):
        return a * xd / (1.0 + xd**n) - b * xt

    for i in range(lag, lag + total):
        xd0 = x[i - lag]
        xd1 = x[i - lag + 1]
        xdm = 0.5 * (xd0 + xd1)
        k1 = rhs(x[i], xd0)
        k2 = rhs(x[i] + 0.5 * dt * k1, xdm)
        k3 = rhs(x[i] + 0.5 * dt * k2, xdm)
        k4 = rhs(x[i] + dt * k3, xd1)
        x[i + 1] = x[i] + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    out = x[lag + 1 :][::subsample][discard:]
    return TimeSeries(out[:length], ("mackey_glass",))


def coupled_map(z, omega: float):
    """``omega * z + (1 - omega) * 4 z (1 - z)``; maps [0, 1] into itself for omega in [0, 1]."""
    return omega * z + (1.0 - omega) * 4.0 * z * (1.0 - z)


def gen_coupled_maps(
    length: int, e: float, omega: float = 0.0, seed: int = 0, discard: int = 100
) -> tuple[TimeSeries, TimeSeries]:
    """Unidirectionally coupled maps (driver X, response Y).

    ``x' = g(x)`` and ``y' = (1 - e) g(y) + e g(x)``. Values leaving [0, 1]
    are clamped with a ``ClampWarning``.
    """
    if not 0.0 <= e <= 1.0:
        raise ValueError(f"coupling e must be in [0, 1], got {e}")
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(0.05, 0.95, 2)
    xs = np.empty(length + discard)
    ys = np.empty(length + discard)
    clamped = 0
    for t in range(length + discard):
        gx = coupled_map(x, omega)
        x, y = gx, (1.0 - e) * coupled_map(y, omega) + e * gx
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            clamped += 1
            x, y = min(max(x, 0.0), 1.0), min(max(y, 0.0), 1.0)
        xs[t], ys[t] = x, y
    if clamped:
        warnings.warn(f"coupled maps left [0, 1] {clamped} times; clamped", ClampWarning)
    return TimeSeries(xs[discard:], ("x",)), TimeSeries(ys[discard:], ("y",))


def gen_iid_uniform(
    length: int, dim: int = 1, lo: float = -1.0, hi: float = 1.0, seed: int = 0
) -> TimeSeries:
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    rng = np.random.default_rng(seed)
    return TimeSeries(rng.uniform(lo, hi, (length, dim)))


def gen_pattern_detection(
    length: int,
    pattern_length: int,
    n_patterns: int,
    noise: float = 0.0,
    seed: int = 0,
    dim: int = 1,
    return_labels: bool = False,
):
    """Stream of randomly chosen fixed patterns plus Gaussian noise.

    Pattern 0 is the distinguished one: the target is 1 on its final step and 0
    elsewhere. Pattern entries are uniform in [0, 1]. With ``return_labels``
    the per-step pattern index is returned as a third element.
    """
    if pattern_length < 2:
        raise ValueError("pattern_length must be >= 2")
    if n_patterns < 1:
        raise ValueError("n_patterns must be >= 1")
    rng = np.random.default_rng(seed)
    patterns = rng.uniform(0.0, 1.0, (n_patterns, pattern_length, dim))
    n_words = -(-length // pattern_length)
    choice = rng.integers(0, n_patterns, n_words)
    stream = patterns[choice].reshape(-1, dim)[:length]
    labels = np.repeat(choice, pattern_length)[:length]
    target = np.zeros(length, dtype=np.int64)
    ends = np.arange(pattern_length - 1, length, pattern_length)
    target[ends] = (labels[ends] == 0).astype(np.int64)
    if noise > 0:
        stream = stream + noise * rng.standard_normal(stream.shape)
    inputs = TimeSeries(stream)
    tgt = TimeSeries(target, ("target",))
    if return_labels:
        return inputs, tgt, labels
    return inputs, tgt


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    length: int
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}; expected one of {TASK_KINDS}")
        if self.length <= 0:
            raise ValueError("length must be positive")


def generate(spec: TaskSpec):
    """Dispatch a :class:`TaskSpec` to its generator."""
    p = dict(spec.params)
    if spec.kind == "mackey_glass":
        return gen_mackey_glass(spec.length, seed=spec.seed, **p)
    if spec.kind == "coupled_maps":
        return gen_coupled_maps(spec.length, seed=spec.seed, **p)
    if spec.kind == "iid_uniform":
        return gen_iid_uniform(spec.length, seed=spec.seed, **p)
    if spec.kind == "pattern_detection":
        return gen_pattern_detection(spec.length, seed=spec.seed, **p)
    from .sorn import CountingTask, counting_task_generate

    task = CountingTask(**p)
    return counting_task_generate(task, spec.length, spec.seed)
