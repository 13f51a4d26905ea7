"""Learning-theoretic and dynamical measures of reservoir quality."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import eval_legendre

from .reports import curve_csv, to_jsonable
from .reservoir import (
    DEFAULT_WASHOUT,
    Reservoir,
    describe_input,
    ridge_solve,
    run,
    spectral_radius,
)
from .timeseries import SeriesLike, as_array

# ---------------------------------------------------------------------------
# separation / generalization rank


@dataclass(frozen=True)
class RankReport:
    shape: tuple[int, int]
    rank: int
    singular_values: np.ndarray
    tolerance: float
    vc_interval: Optional[tuple[int, int]] = None

    @property
    def n_streams(self) -> int:
        return self.shape[1]

    def to_dict(self) -> dict:
        return to_jsonable(
            {
                "shape": self.shape,
                "rank": self.rank,
                "singular_values": self.singular_values,
                "tolerance": self.tolerance,
                "vc_interval": self.vc_interval,
            }
        )


def numerical_rank(m: np.ndarray, rtol: float = 1e-12) -> RankReport:
    """Rank as the count of singular values above ``max(n, m) * s_max * rtol``."""
    s = np.linalg.svd(m, compute_uv=False)
    tol = max(m.shape) * (s[0] if s.size else 0.0) * rtol
    rank = int(np.sum(s > tol)) if s.size and s[0] > 0 else 0
    return RankReport(tuple(m.shape), rank, s, float(tol))


def state_matrix(r: Reservoir, streams: Sequence[SeriesLike], t0: int) -> np.ndarray:
    """Columns are the states reached from the zero state after ``t0`` inputs."""
    arrays = [as_array(s) for s in streams]
    if not arrays:
        raise ValueError("need at least one input stream")
    if len({len(a) for a in arrays}) != 1:
        raise ValueError("input streams must have equal lengths")
    if t0 < 1 or t0 > len(arrays[0]):
        raise ValueError(f"t0={t0} must be in [1, {len(arrays[0])}]")
    return np.column_stack([run(r, a[:t0]).states[-1] for a in arrays])


def separation_rank(
    r: Reservoir, input_streams: Sequence[SeriesLike], t0: int, rtol: float = 1e-12
) -> RankReport:
    return numerical_rank(state_matrix(r, input_streams, t0), rtol)


def generalization_rank(
    r: Reservoir, universe_streams: Sequence[SeriesLike], t0: int, rtol: float = 1e-12
) -> RankReport:
    """Rank over an input universe; the VC-dimension lies in ``[rank, rank + 1]``."""
    rep = numerical_rank(state_matrix(r, universe_streams, t0), rtol)
    return RankReport(rep.shape, rep.rank, rep.singular_values, rep.tolerance,
                      (rep.rank, rep.rank + 1))


def quality_score(sep: RankReport, gen: RankReport) -> float:
    """Normalized separation rank minus normalized generalization rank."""
    return sep.rank / sep.n_streams - gen.rank / gen.n_streams


# ---------------------------------------------------------------------------
# information processing capacity


@dataclass(frozen=True)
class BasisFunction:
    """Product of Legendre polynomials; ``terms`` holds ``(delay, degree)`` pairs."""

    terms: tuple[tuple[int, int], ...]

    def __post_init__(self):
        terms = tuple(sorted((int(d), int(g)) for d, g in self.terms))
        if not terms:
            raise ValueError("a basis function needs at least one term")
        delays = [d for d, _ in terms]
        if len(set(delays)) != len(delays):
            raise ValueError("delays within one basis function must be distinct")
        if any(d < 0 or g < 1 for d, g in terms):
            raise ValueError("delays must be >= 0 and degrees >= 1")
        object.__setattr__(self, "terms", terms)

    @property
    def degree(self) -> int:
        return sum(g for _, g in self.terms)

    @property
    def max_delay(self) -> int:
        return max(d for d, _ in self.terms)

    def __str__(self) -> str:
        return "*".join(f"P{g}(u[t-{d}])" for d, g in self.terms)

    def evaluate(self, u: np.ndarray, rows: np.ndarray) -> np.ndarray:
        out = np.ones(len(rows))
        for d, g in self.terms:
            out *= eval_legendre(g, u[rows - d])
        return out


def legendre_basis(
    max_degree: int, delays: Sequence[int], min_degree: int = 1
) -> list[BasisFunction]:
    """All products over distinct delays with total degree in ``[min_degree, max_degree]``."""
    delays = sorted(set(int(d) for d in delays))
    out = []

    def extend(start: int, terms: list, total: int):
        if total >= min_degree:
            out.append(BasisFunction(tuple(terms)))
        for i in range(start, len(delays)):
            for g in range(1, max_degree - total + 1):
                extend(i + 1, terms + [(delays[i], g)], total + g)

    extend(0, [], 0)
    return sorted(out, key=lambda f: (f.degree, f.terms))


@dataclass
class IpcReport:
    capacities: dict[str, float]
    total: float
    basis: list[str]
    input: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def total_of_degree(self, degree: int, functions: Sequence[BasisFunction]) -> float:
        return float(sum(self.capacities[str(f)] for f in functions if f.degree == degree))

    def to_dict(self) -> dict:
        return to_jsonable(
            {
                "capacities": self.capacities,
                "total": self.total,
                "basis": self.basis,
                "input": self.input,
                "metadata": self.metadata,
            }
        )

    def to_csv(self) -> str:
        return curve_csv("function", "capacity", self.capacities.keys(), self.capacities.values())


def ipc(
    r: Reservoir,
    input: SeriesLike,
    basis: Sequence[BasisFunction],
    ridge_lambda: float = 1e-8,
    washout: int = DEFAULT_WASHOUT,
) -> IpcReport:
    """Capacity ``1 - MSE / <z^2>`` of a state-only linear readout per basis function.

    The readout sees the state ``x(t)`` only (no bias, no raw input), is fit
    on the first half of the usable run and scored on the second half;
    capacities are clamped to [0, 1].
    """
    basis = list(basis)
    if not basis:
        raise ValueError("basis must not be empty")
    u = as_array(input).astype(float)
    if u.shape[1] != 1 or r.input_dim != 1:
        raise ValueError("ipc needs a scalar input and a single-input reservoir")
    u = u[:, 0]
    if np.any(np.abs(u) >= 1):
        raise ValueError("ipc input must lie in the open interval (-1, 1)")

    start = max(washout, max(f.max_delay for f in basis))
    if len(u) - start < 4:
        raise ValueError("input too short for the requested washout and delays")
    states = run(r, u).states
    rows = np.arange(start, len(u))
    z = np.column_stack([f.evaluate(u, rows) for f in basis])
    # states only, no bias: the Legendre targets are zero-mean under the input law
    phi = states[rows]
    half = len(rows) // 2
    w, _ = ridge_solve(phi[:half], z[:half], ridge_lambda)
    err = z[half:] - phi[half:] @ w
    power = np.mean(z[half:] ** 2, axis=0)
    cap = np.where(power > 0, 1.0 - np.mean(err**2, axis=0) / np.where(power > 0, power, 1), 0.0)
    cap = np.clip(cap, 0.0, 1.0)
    names = [str(f) for f in basis]
    return IpcReport(
        dict(zip(names, cap.tolist())),
        float(cap.sum()),
        names,
        describe_input(u),
        {"ridge_lambda": ridge_lambda, "washout": washout, "train_samples": half,
         "test_samples": len(rows) - half},
    )


# ---------------------------------------------------------------------------
# Fisher memory curve


@dataclass(frozen=True)
class FmcReport:
    J: np.ndarray
    noise_variance: float
    covariance_condition: float

    def to_dict(self) -> dict:
        return to_jsonable(
            {"J": self.J, "noise_variance": self.noise_variance,
             "covariance_condition": self.covariance_condition}
        )

    def to_csv(self) -> str:
        return curve_csv("k", "J", range(len(self.J)), self.J)


def stationary_noise_covariance(w: np.ndarray, noise: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Solve ``C = W C W^T + Q`` by the doubling fixed-point iteration."""
    c = np.array(noise, dtype=float)
    a = np.array(w, dtype=float)
    for _ in range(200):
        c_next = c + a @ c @ a.T
        a = a @ a
        if np.max(np.abs(c_next - c)) <= tol * np.max(np.abs(c_next)):
            return c_next
        c = c_next
    raise RuntimeError("noise covariance iteration did not converge")


def fisher_memory_curve(r: Reservoir, noise_variance: float, k_max: int) -> FmcReport:
    """Diagonal Fisher memory curve ``J(k)`` of a noisy linear reservoir.

    For ``x(t) = W x(t-1) + w_in v(t) + z(t)`` with ``z ~ N(0, eps I)``,
    ``J(k) = (W^k w_in)^T C^{-1} (W^k w_in)`` where ``C`` is the stationary
    noise covariance. Leaky reservoirs use their effective linear map.
    """
    if r.params.nonlinearity != "linear":
        raise ValueError("fisher_memory_curve needs a linear reservoir")
    if r.input_dim != 1:
        raise ValueError("fisher_memory_curve needs a scalar input channel")
    if noise_variance <= 0:
        raise ValueError("noise_variance must be positive")
    a = r.params.leak_rate
    n = r.n_units
    w = (1 - a) * np.eye(n) + a * r.w_res
    w_in = a * r.w_in[:, 0]
    if spectral_radius(w) >= 1:
        raise ValueError("spectral radius >= 1: no stationary noise covariance")

    c = stationary_noise_covariance(w, (a * a * noise_variance) * np.eye(n))
    factor = cho_factor(c)
    j = np.empty(k_max + 1)
    q = w_in.copy()
    for k in range(k_max + 1):
        j[k] = q @ cho_solve(factor, q)
        q = w @ q
    return FmcReport(np.maximum(j, 0.0), float(noise_variance), float(np.linalg.cond(c)))


# ---------------------------------------------------------------------------
# perturbation exponent


@dataclass(frozen=True)
class CriticalityReport:
    exponent: float
    perturbation: float
    regime: str
    tolerance: float
    per_trial: np.ndarray
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return to_jsonable(
            {"exponent": self.exponent, "perturbation": self.perturbation,
             "regime": self.regime, "tolerance": self.tolerance,
             "per_trial": self.per_trial, "flags": self.flags}
        )


def classify_regime(exponent: float, tolerance: float = 0.01) -> str:
    if exponent < -tolerance:
        return "stable"
    if exponent > tolerance:
        return "unstable"
    return "critical"


def criticality_estimate(
    r: Reservoir,
    input: SeriesLike,
    perturbation: float = 1e-8,
    horizon: int = 1000,
    trials: int = 10,
    tolerance: float = 0.01,
    washout: int = 0,
) -> CriticalityReport:
    """Average log growth rate of a renormalized state perturbation.

    Trial ``j`` perturbs coordinate ``j mod n_units`` of a copy of the state
    reached after ``washout`` inputs; both copies then see the same
    ``horizon`` inputs, and the difference is rescaled to ``perturbation``
    after every step. A difference that collapses to exactly zero gives the
    sentinel ``-inf`` with the ``"underflow"`` flag.
    """
    if horizon < 10:
        raise ValueError("horizon must be >= 10")
    if perturbation <= 0:
        raise ValueError("perturbation must be positive")
    u = as_array(input).astype(float)
    if len(u) < washout + horizon:
        raise ValueError(f"input needs {washout + horizon} steps, got {len(u)}")
    n = r.n_units
    x = run(r, u[:washout]).states[-1] if washout else np.zeros(n)
    cols = np.arange(trials) % n
    xb = x[:, None] + perturbation * np.eye(n)[:, cols]

    drive = u[washout : washout + horizon] @ r.w_in.T
    leak = r.params.leak_rate
    log_growth = np.zeros(trials)
    dead = np.zeros(trials, dtype=bool)
    for t in range(horizon):
        x_new = r.activation(r.w_res @ x + drive[t])
        xb_new = r.activation(r.w_res @ xb + drive[t][:, None])
        if leak != 1.0:
            x_new = (1 - leak) * x + leak * x_new
            xb_new = (1 - leak) * xb + leak * xb_new
        x = x_new
        d = xb_new - x[:, None]
        norms = np.linalg.norm(d, axis=0)
        dead |= norms == 0
        safe = np.where(norms > 0, norms, 1.0)
        log_growth += np.where(norms > 0, np.log(safe / perturbation), 0.0)
        xb = x[:, None] + d * (perturbation / safe)

    per_trial = np.where(dead, -np.inf, log_growth / horizon)
    flags: tuple[str, ...] = ()
    if dead.any():
        flags = ("underflow",)
        exponent = -math.inf
    else:
        exponent = float(np.mean(per_trial))
    return CriticalityReport(
        exponent, perturbation, classify_regime(exponent, tolerance), tolerance, per_trial, flags
    )
