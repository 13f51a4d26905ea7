"""Echo state network reservoirs, ridge readouts, memory capacity and fading memory.

The state update is the leaky form of the standard ESN map::

    x' = (1 - leak) * x + leak * f(W_res @ x + W_in @ u)

which reduces to ``x' = f(W_res @ x + W_in @ u)`` for ``leak = 1``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Literal, Optional

import numpy as np

from .reports import MeasureReport
from .timeseries import SeriesLike, TimeSeries, as_array

FORMAT_VERSION = 1
DEFAULT_WASHOUT = 100
_MAX_REDRAWS = 100

Nonlinearity = Literal["tanh", "linear"]


class ReservoirConstructionError(RuntimeError):
    """Raised when a reservoir cannot be built from its parameters."""


@dataclass(frozen=True)
class ReservoirParams:
    n_units: int
    input_dim: int = 1
    spectral_radius: float = 0.95
    input_scaling: float = 1.0
    connection_density: float = 1.0
    nonlinearity: Nonlinearity = "tanh"
    leak_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_units < 1:
            raise ValueError(f"n_units must be >= 1, got {self.n_units}")
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.spectral_radius < 0:
            raise ValueError(f"spectral_radius must be >= 0, got {self.spectral_radius}")
        if not 0 < self.connection_density <= 1:
            raise ValueError(
                f"connection_density must be in (0, 1], got {self.connection_density}"
            )
        if not 0 < self.leak_rate <= 1:
            raise ValueError(f"leak_rate must be in (0, 1], got {self.leak_rate}")
        if self.nonlinearity not in ("tanh", "linear"):
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")


@dataclass(frozen=True)
class Reservoir:
    w_in: np.ndarray
    w_res: np.ndarray
    params: ReservoirParams

    def __post_init__(self):
        w_in = np.array(self.w_in, dtype=float)
        w_res = np.array(self.w_res, dtype=float)
        if w_in.ndim == 1:
            w_in = w_in[:, None]
        n = w_res.shape[0]
        if w_res.shape != (n, n):
            raise ValueError(f"w_res must be square, got {w_res.shape}")
        if w_in.shape[0] != n:
            raise ValueError(f"w_in has {w_in.shape[0]} rows for {n} units")
        w_in.flags.writeable = False
        w_res.flags.writeable = False
        object.__setattr__(self, "w_in", w_in)
        object.__setattr__(self, "w_res", w_res)

    @property
    def n_units(self) -> int:
        return self.w_res.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_in.shape[1]

    @classmethod
    def from_matrices(
        cls,
        w_in,
        w_res,
        nonlinearity: Nonlinearity = "tanh",
        leak_rate: float = 1.0,
    ) -> "Reservoir":
        """Wrap hand-made matrices; the recorded spectral radius is measured."""
        w_res = np.asarray(w_res, dtype=float)
        w_in = np.asarray(w_in, dtype=float)
        if w_in.ndim == 1:
            w_in = w_in[:, None]
        params = ReservoirParams(
            n_units=w_res.shape[0],
            input_dim=w_in.shape[1],
            spectral_radius=spectral_radius(w_res),
            input_scaling=float(np.max(np.abs(w_in))) if w_in.size else 0.0,
            connection_density=max(np.count_nonzero(w_res) / w_res.size, 1e-12)
            if w_res.size
            else 1.0,
            nonlinearity=nonlinearity,
            leak_rate=leak_rate,
            seed=0,
        )
        return cls(w_in, w_res, params)

    def activation(self, z: np.ndarray) -> np.ndarray:
        return np.tanh(z) if self.params.nonlinearity == "tanh" else z

    def to_json(self) -> str:
        return json.dumps(
            {
                "format_version": FORMAT_VERSION,
                "params": asdict(self.params),
                "w_in": self.w_in.tolist(),
                "w_res": self.w_res.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Reservoir":
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {doc.get('format_version')!r}")
        return cls(
            np.array(doc["w_in"], dtype=float),
            np.array(doc["w_res"], dtype=float),
            ReservoirParams(**doc["params"]),
        )


@dataclass(frozen=True)
class StateTrajectory:
    """Row ``t`` is the state after consuming input ``t``.

    The first ``washout`` rows are kept; consumers skip them.
    """

    states: np.ndarray
    washout: int = 0

    def __post_init__(self):
        if self.states.ndim != 2:
            raise ValueError("states must be a (T, n_units) matrix")
        if not 0 <= self.washout < max(len(self.states), 1):
            raise ValueError(
                f"washout {self.washout} must be < trajectory length {len(self.states)}"
            )

    def __len__(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class Readout:
    """Linear map from the feature vector ``[state; 1; input?]`` to outputs."""

    w_out: np.ndarray
    ridge_lambda: float
    uses_input: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.w_out.shape[1]


def spectral_radius(w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(w))))


def build_reservoir(params: ReservoirParams) -> Reservoir:
    """Draw a sparse random reservoir scaled to ``params.spectral_radius``.

    Recurrent weights are nonzero with probability ``connection_density`` and
    uniform in [-1, 1]; input weights are dense uniform in
    [-input_scaling, input_scaling]. The same seed yields bit-identical matrices.
    """
    rng = np.random.default_rng(params.seed)
    n = params.n_units
    w_in = rng.uniform(-params.input_scaling, params.input_scaling, (n, params.input_dim))

    if params.spectral_radius == 0:
        return Reservoir(w_in, np.zeros((n, n)), params)

    for _ in range(_MAX_REDRAWS):
        mask = rng.random((n, n)) < params.connection_density
        w_res = np.where(mask, rng.uniform(-1.0, 1.0, (n, n)), 0.0)
        try:
            rho = spectral_radius(w_res)
        except np.linalg.LinAlgError as exc:
            raise ReservoirConstructionError(f"eigenvalue computation failed: {exc}") from exc
        # nilpotent draws (rho == 0) cannot be rescaled either
        if rho > 1e-12:
            return Reservoir(w_in, w_res * (params.spectral_radius / rho), params)
    raise ReservoirConstructionError(
        f"{_MAX_REDRAWS} consecutive draws had zero spectral radius "
        f"(n_units={n}, density={params.connection_density})"
    )


def step(r: Reservoir, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.shape != (r.n_units,):
        raise ValueError(f"state has shape {x.shape}, expected ({r.n_units},)")
    if u.shape != (r.input_dim,):
        raise ValueError(f"input has shape {u.shape}, expected ({r.input_dim},)")
    pre = r.w_res @ x + r.w_in @ u
    leak = r.params.leak_rate
    if leak == 1.0:
        return r.activation(pre)
    return (1.0 - leak) * x + leak * r.activation(pre)


def run(
    r: Reservoir,
    inputs: SeriesLike,
    x0: Optional[np.ndarray] = None,
    washout: int = 0,
) -> StateTrajectory:
    u = as_array(inputs).astype(float)
    if len(u) == 0:
        raise ValueError("cannot run a reservoir on an empty input")
    if u.shape[1] != r.input_dim:
        raise ValueError(f"input has {u.shape[1]} channels, reservoir expects {r.input_dim}")
    if washout >= len(u):
        raise ValueError(f"washout {washout} must be < input length {len(u)}")
    x = np.zeros(r.n_units) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (r.n_units,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({r.n_units},)")

    drive = u @ r.w_in.T
    w = r.w_res
    leak = r.params.leak_rate
    tanh = r.params.nonlinearity == "tanh"
    states = np.empty((len(u), r.n_units))
    for t in range(len(u)):
        pre = w @ x + drive[t]
        new = np.tanh(pre) if tanh else pre
        x = new if leak == 1.0 else (1.0 - leak) * x + leak * new
        states[t] = x
    return StateTrajectory(states, washout)


def ridge_solve(features: np.ndarray, targets: np.ndarray, ridge_lambda: float):
    """Minimize ||targets - features @ W||^2 + lambda ||W||^2 by SVD least squares.

    Returns ``(W, rank)`` with ``W`` of shape (n_features, n_targets); ``rank``
    is the numerical rank of the (possibly augmented) design.
    """
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be nonnegative")
    p = features.shape[1]
    if ridge_lambda > 0:
        a = np.vstack([features, np.sqrt(ridge_lambda) * np.eye(p)])
        b = np.vstack([targets, np.zeros((p, targets.shape[1]))])
    else:
        a, b = features, targets
    w, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    return w, int(rank)


def _features(
    states: np.ndarray, uses_input: bool, inputs: Optional[np.ndarray]
) -> np.ndarray:
    cols = [states, np.ones((len(states), 1))]
    if uses_input:
        if inputs is None:
            raise ValueError("uses_input requires inputs")
        if len(inputs) != len(states):
            raise ValueError("inputs and trajectory lengths differ")
        cols.append(inputs)
    return np.hstack(cols)


def train_readout(
    traj: StateTrajectory,
    targets: SeriesLike,
    ridge_lambda: float = 0.0,
    uses_input: bool = False,
    inputs: Optional[SeriesLike] = None,
) -> Readout:
    """Fit ``w_out`` on the non-washout rows by (ridge) least squares.

    With ``ridge_lambda == 0`` a rank-deficient design yields the minimum-norm
    solution and ``metadata["rank_deficient"]`` is set.
    """
    y = as_array(targets).astype(float)
    if len(y) != len(traj):
        raise ValueError(f"{len(y)} targets for a trajectory of length {len(traj)}")
    u = as_array(inputs).astype(float) if inputs is not None else None
    phi = _features(traj.states, uses_input, u)[traj.washout :]
    w, rank = ridge_solve(phi, y[traj.washout :], ridge_lambda)
    meta = {
        "n_samples": len(phi),
        "rank": rank,
        "rank_deficient": bool(ridge_lambda == 0 and rank < phi.shape[1]),
    }
    return Readout(w.T, float(ridge_lambda), uses_input, meta)


def predict(
    ro: Readout, traj: StateTrajectory, inputs: Optional[SeriesLike] = None
) -> TimeSeries:
    u = as_array(inputs).astype(float) if inputs is not None else None
    expected = traj.states.shape[1] + 1 + (u.shape[1] if ro.uses_input and u is not None else 0)
    if ro.uses_input and u is None:
        raise ValueError("readout was trained with inputs; pass them to predict")
    if expected != ro.n_features:
        raise ValueError(
            f"feature layout mismatch: readout has {ro.n_features} columns, got {expected}"
        )
    phi = _features(traj.states, ro.uses_input, u)
    return TimeSeries(phi @ ro.w_out.T)


def squared_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise cov^2 / (var * var); zero where either variance is zero.

    A variance below ``(1e-12 * max|column|)^2`` counts as zero, so a constant
    column with rounding noise still scores 0.
    """
    floor_a = (1e-12 * np.abs(a).max(axis=0)) ** 2
    floor_b = (1e-12 * np.abs(b).max(axis=0)) ** 2
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    cov = (a * b).mean(axis=0)
    va = (a * a).mean(axis=0)
    vb = (b * b).mean(axis=0)
    denom = va * vb
    out = np.zeros_like(cov)
    ok = (va > floor_a) & (vb > floor_b)
    out[ok] = cov[ok] ** 2 / denom[ok]
    return out


def delayed_copies(v: np.ndarray, delays) -> np.ndarray:
    """Columns ``v(t - k)`` for each delay, zero before the series starts."""
    v = np.asarray(v, dtype=float).ravel()
    out = np.zeros((len(v), len(delays)))
    for j, k in enumerate(delays):
        out[k:, j] = v[: len(v) - k] if k else v
    return out


def memory_capacity(
    r: Reservoir,
    input: SeriesLike,
    k_max: int,
    ridge_lambda: float = 1e-8,
    washout: int = DEFAULT_WASHOUT,
    include_input: bool = True,
) -> MeasureReport:
    """Short-term memory capacity with held-out evaluation.

    For each delay ``k`` a readout on ``[v(t); x(t); 1]`` (``[x(t); 1]`` when
    ``include_input`` is false) is fit to ``v(t-k)``
    on the first half of the post-washout run and scored on the second half by
    squared correlation, clamped to [0, 1]. Inputs before the run are taken as 0,
    so each ``MC_k`` does not depend on ``k_max``.
    """
    v = as_array(input).astype(float)
    if v.shape[1] != 1:
        raise ValueError("memory_capacity needs a scalar input")
    if r.input_dim != 1:
        raise ValueError("memory_capacity needs a reservoir with one input channel")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    usable = len(v) - washout
    if k_max >= usable:
        raise ValueError(f"k_max={k_max} must be < usable length {usable}")
    if usable < 20 * k_max:
        warnings.warn(
            f"only {usable} post-washout samples for k_max={k_max}; "
            f"at least {20 * k_max} recommended",
            stacklevel=2,
        )

    traj = run(r, v, washout=washout)
    delays = list(range(1, k_max + 1))
    targets = delayed_copies(v[:, 0], delays)[washout:]
    cols = [v[washout:]] if include_input else []
    phi = np.hstack(cols + [traj.states[washout:], np.ones((usable, 1))])
    half = usable // 2
    w, _ = ridge_solve(phi[:half], targets[:half], ridge_lambda)
    pred = phi[half:] @ w
    mc_k = np.clip(squared_correlation(targets[half:], pred), 0.0, 1.0)

    return MeasureReport(
        "memory_capacity",
        scalars={"MC": float(mc_k.sum())},
        curves={"MC_k": mc_k},
        metadata={
            "k_max": k_max,
            "ridge_lambda": ridge_lambda,
            "washout": washout,
            "include_input": include_input,
            "train_samples": half,
            "test_samples": usable - half,
            "input": describe_input(v[:, 0]),
        },
    )


def describe_input(v: np.ndarray) -> dict:
    v = np.asarray(v, dtype=float).ravel()
    return {
        "length": int(len(v)),
        "mean": float(v.mean()),
        "std": float(v.std()),
        "min": float(v.min()),
        "max": float(v.max()),
    }


@dataclass(frozen=True)
class FadingMemoryReport:
    distances: np.ndarray
    converged: bool
    tolerance: float

    @property
    def final_distance(self) -> float:
        return float(self.distances[-1])

    @property
    def first_converged_step(self) -> Optional[int]:
        below = np.flatnonzero(self.distances < self.tolerance)
        return int(below[0]) if below.size else None


def fading_memory_check(
    r: Reservoir,
    input: SeriesLike,
    x0a: np.ndarray,
    x0b: np.ndarray,
    horizon: Optional[int] = None,
    tolerance: float = 1e-6,
) -> FadingMemoryReport:
    """Drive two copies from different initial states with the same input."""
    u = as_array(input)
    if horizon is not None:
        u = u[:horizon]
    a = run(r, u, x0a).states
    b = run(r, u, x0b).states
    d = np.linalg.norm(a - b, axis=1)
    return FadingMemoryReport(d, bool(d[-1] < tolerance), tolerance)
