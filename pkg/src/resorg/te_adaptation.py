"""Transfer-entropy-guided adaptation of per-unit memory in a leaky reservoir.

Each unit ``i`` mixes its recurrent drive with its own previous output using
the decay factor ``a_i = 2 / (1 + m_i)``::

    x(k+1) = diag(a) W y(k) + (I - diag(a)) y(k) + w_in u(k)
    y(k+1) = tanh(x(k+1))

Pre-training first picks the input history length ``l_hat`` at which the
transfer entropy from input to target stops growing, then adjusts each
``m_i`` epoch by epoch according to the change of the unit's own transfer
entropy ``T_{x_i -> y_i}(1, l_hat)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .info import DiscretizationSpec, EmbeddingSpec, discretize, transfer_entropy
from .reservoir import Reservoir, ridge_solve
from .timeseries import SeriesLike, as_array


@dataclass(frozen=True)
class AdaptiveReservoir:
    w: np.ndarray
    w_in: np.ndarray
    m: np.ndarray
    frozen: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.int64)
        if np.any(m < 1):
            raise ValueError("memory lengths must be >= 1")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "w_in", np.asarray(self.w_in, dtype=float).ravel())
        object.__setattr__(self, "frozen", np.asarray(self.frozen, dtype=bool))

    @property
    def a(self) -> np.ndarray:
        return 2.0 / (1.0 + self.m)

    @property
    def n_units(self) -> int:
        return len(self.m)

    @classmethod
    def from_reservoir(cls, r: Reservoir) -> "AdaptiveReservoir":
        if r.input_dim != 1:
            raise ValueError("adaptive reservoirs take a scalar input")
        n = r.n_units
        return cls(np.array(r.w_res), r.w_in[:, 0].copy(), np.ones(n, dtype=np.int64),
                   np.zeros(n, dtype=bool))


@dataclass(frozen=True)
class AdaptationConfig:
    epsilon: float = 0.01
    epoch_length: int = 1000
    max_epochs: int = 50
    k: int = 1
    bins: int = 8
    stabilization: int = 3
    l_max: int = 10

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.epoch_length < 10:
            raise ValueError("epoch_length too short for transfer entropy estimation")
        if self.max_epochs < 0 or self.stabilization < 1 or self.l_max < 1:
            raise ValueError("max_epochs >= 0, stabilization >= 1 and l_max >= 1 required")
        if self.k != 1:
            raise ValueError("the target history length is fixed at k = 1")


def adaptive_step(r: AdaptiveReservoir, y: np.ndarray, u: float) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    if y.shape != (r.n_units,):
        raise ValueError(f"output vector has shape {y.shape}, expected ({r.n_units},)")
    a = r.a
    x = a * (r.w @ y) + (1.0 - a) * y + r.w_in * float(u)
    return x, np.tanh(x)


def adaptive_run(
    r: AdaptiveReservoir, inputs: SeriesLike, y0: Optional[np.ndarray] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Activations ``x`` and outputs ``y`` (both T x N); row t follows input t."""
    u = as_array(inputs).astype(float)[:, 0]
    y = np.zeros(r.n_units) if y0 is None else np.asarray(y0, dtype=float)
    a = r.a
    wa = a[:, None] * r.w
    keep = 1.0 - a
    xs = np.empty((len(u), r.n_units))
    ys = np.empty_like(xs)
    for t in range(len(u)):
        x = wa @ y + keep * y + r.w_in * u[t]
        y = np.tanh(x)
        xs[t] = x
        ys[t] = y
    return xs, ys


def _symbols(v: np.ndarray, bins: int) -> np.ndarray:
    v = np.asarray(v)
    if np.issubdtype(v.dtype, np.integer):
        return v.astype(np.int64)
    return discretize(v.astype(float), DiscretizationSpec("equal_width", bins))


@dataclass(frozen=True)
class HistorySelection:
    l_hat: int
    te_curve: np.ndarray
    plateau_found: bool


def plateau_index(curve: np.ndarray, epsilon: float) -> tuple[int, bool]:
    """Smallest 1-based ``h`` with ``curve[h+1] <= curve[h] + epsilon``.

    ``curve[0]`` holds the value at history length 1. Without a plateau the
    last length is returned with ``False``.
    """
    for h in range(1, len(curve)):
        if curve[h] <= curve[h - 1] + epsilon:
            return h, True
    return len(curve), False


def select_input_history(
    u: SeriesLike, v: SeriesLike, epsilon: float = 0.01, l_max: int = 10, bins: int = 8
) -> HistorySelection:
    """Input history length beyond which ``T_{u->v}(1, l)`` gains at most ``epsilon``.

    Scans ``l = 1 .. l_max + 1`` so that a plateau at ``l_max`` can be seen.
    Real-valued series are discretized into ``bins`` equal-width bins.
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    us = _symbols(as_array(u)[:, 0], bins)
    vs = _symbols(as_array(v)[:, 0], bins)
    if len(us) != len(vs):
        raise ValueError("u and v must be aligned")
    if EmbeddingSpec(1, l_max + 1).n_samples(len(us)) < 1:
        raise ValueError(f"series of length {len(us)} too short for l_max={l_max}")
    curve = np.array(
        [transfer_entropy(us, vs, EmbeddingSpec(1, l)).value for l in range(1, l_max + 2)]
    )
    l_hat, found = plateau_index(curve, epsilon)
    if not found:
        l_hat = l_max
    return HistorySelection(min(l_hat, l_max), curve[:l_max], found)


def unit_transfer_entropies(
    xs: np.ndarray, ys: np.ndarray, l_hat: int, bins: int = 8
) -> np.ndarray:
    """``T_{x_i -> y_i}(1, l_hat)`` per unit, each series binned over its observed range."""
    spec = EmbeddingSpec(1, l_hat)
    te = np.empty(xs.shape[1])
    for i in range(xs.shape[1]):
        te[i] = transfer_entropy(_symbols(xs[:, i], bins), _symbols(ys[:, i], bins), spec).value
    return te


def adapt_epoch(
    r: AdaptiveReservoir,
    te: np.ndarray,
    previous_te: Optional[np.ndarray],
    epsilon: float,
) -> AdaptiveReservoir:
    """Grow ``m_i`` when a unit's transfer entropy rose by more than ``epsilon``,
    shrink it (not below 1) when it fell by more than ``epsilon``. Frozen units
    and the first epoch (no previous value) leave ``m`` unchanged."""
    if previous_te is None:
        return r
    te = np.asarray(te, dtype=float)
    previous_te = np.asarray(previous_te, dtype=float)
    m = r.m.copy()
    active = ~r.frozen
    up = active & (te > previous_te + epsilon)
    down = active & (te < previous_te - epsilon)
    m[up] += 1
    m[down] = np.maximum(1, m[down] - 1)
    return replace(r, m=m)


@dataclass
class PretrainResult:
    reservoir: AdaptiveReservoir
    l_hat: int
    te_curve: np.ndarray
    epochs: int
    timed_out: bool
    trace: list[dict] = field(default_factory=list)

    def trace_csv(self) -> str:
        lines = ["epoch,unit,te_bits,m_i,frozen"]
        for row in self.trace:
            lines.append(
                f"{row['epoch']},{row['unit']},{row['te_bits']!r},{row['m_i']},{int(row['frozen'])}"
            )
        return "\n".join(lines) + "\n"


def pretrain(
    r: AdaptiveReservoir,
    input: SeriesLike,
    target: SeriesLike,
    cfg: AdaptationConfig = AdaptationConfig(),
    l_hat: Optional[int] = None,
) -> PretrainResult:
    """Adapt memory lengths until every unit has been stable for ``cfg.stabilization`` epochs.

    Epochs take consecutive ``epoch_length`` blocks of ``input`` (wrapping
    around), with the reservoir state carried across epochs; the first epoch
    drops ``epoch_length // 10`` warm-up samples from estimation. Units whose
    ``m_i`` stayed unchanged for ``stabilization`` consecutive epochs are frozen.
    """
    u = as_array(input).astype(float)[:, 0]
    v = as_array(target).astype(float)[:, 0]
    if len(u) != len(v):
        raise ValueError("input and target must be aligned")
    if l_hat is None:
        sel = select_input_history(u, v, cfg.epsilon, cfg.l_max, cfg.bins)
        l_hat, curve = sel.l_hat, sel.te_curve
    else:
        curve = np.zeros(0)

    ell = cfg.epoch_length
    warm = ell // 10
    r = replace(r, frozen=np.zeros(r.n_units, dtype=bool))
    stable = np.zeros(r.n_units, dtype=np.int64)
    y = np.zeros(r.n_units)
    prev_te = None
    trace: list[dict] = []
    epoch = 0
    while epoch < cfg.max_epochs and not r.frozen.all():
        idx = (np.arange(epoch * ell, (epoch + 1) * ell)) % len(u)
        xs, ys = adaptive_run(r, u[idx][:, None], y)
        y = ys[-1]
        start = warm if epoch == 0 else 0
        te = unit_transfer_entropies(xs[start:], ys[start:], l_hat, cfg.bins)
        old_m = r.m
        r = adapt_epoch(r, te, prev_te, cfg.epsilon)
        unchanged = r.m == old_m
        stable = np.where(unchanged, stable + 1, 0)
        r = replace(r, frozen=r.frozen | (stable >= cfg.stabilization))
        for i in range(r.n_units):
            trace.append({"epoch": epoch, "unit": i, "te_bits": float(te[i]),
                          "m_i": int(r.m[i]), "frozen": bool(r.frozen[i])})
        prev_te = te
        epoch += 1
    timed_out = not r.frozen.all()
    return PretrainResult(r, l_hat, curve, epoch, timed_out, trace)


def prediction_mse(
    r: AdaptiveReservoir,
    input: SeriesLike,
    target: SeriesLike,
    n_train: int,
    washout: int = 100,
    ridge_lambda: float = 1e-6,
) -> float:
    """Held-out MSE of a ridge readout on ``[y; 1; u]`` (train on ``[washout, n_train)``)."""
    u = as_array(input).astype(float)[:, 0]
    v = as_array(target).astype(float)[:, 0]
    if len(u) != len(v):
        raise ValueError("input and target must be aligned")
    if not washout < n_train < len(u):
        raise ValueError("need washout < n_train < series length")
    _, ys = adaptive_run(r, u[:, None])
    feats = np.column_stack([ys, np.ones(len(u)), u])
    w, _ = ridge_solve(feats[washout:n_train], v[washout:n_train, None], ridge_lambda)
    pred = feats[n_train:] @ w
    return float(np.mean((pred[:, 0] - v[n_train:]) ** 2))


@dataclass(frozen=True)
class AdaptationComparison:
    mse_adapted: float
    mse_static: float
    pretrain: PretrainResult

    def as_row(self) -> dict:
        m = self.pretrain.reservoir.m
        return {
            "mse_adapted": self.mse_adapted,
            "mse_static": self.mse_static,
            "adapted_wins": int(self.mse_adapted <= self.mse_static),
            "l_hat": self.pretrain.l_hat,
            "epochs": self.pretrain.epochs,
            "timed_out": int(self.pretrain.timed_out),
            "mean_m": float(m.mean()),
            "max_m": int(m.max()),
        }


def compare_adaptation(
    r: AdaptiveReservoir,
    input: SeriesLike,
    target: SeriesLike,
    n_train: int,
    cfg: AdaptationConfig = AdaptationConfig(),
    ridge_lambda: float = 1e-6,
) -> AdaptationComparison:
    """Same reservoir with and without pre-training on the first ``n_train`` samples."""
    u = as_array(input).astype(float)
    v = as_array(target).astype(float)
    pre = pretrain(r, u[:n_train], v[:n_train], cfg)
    static = replace(r, m=np.ones(r.n_units, dtype=np.int64))
    return AdaptationComparison(
        prediction_mse(pre.reservoir, u, v, n_train, ridge_lambda=ridge_lambda),
        prediction_mse(static, u, v, n_train, ridge_lambda=ridge_lambda),
        pre,
    )
