"""Self-organizing recurrent network (SORN) of binary threshold units.

Excitatory units ``x`` and inhibitory units ``y`` update as::

    R_i   = sum_j W_ee[i, j] x_j - sum_k W_ei[i, k] y_k - T_e[i]
    x'_i  = Theta(R_i + v_i)
    y'_j  = Theta(sum_i W_ie[j, i] x_i - T_i[j])

with ``Theta(z) = 1`` iff ``z > 0``. Three plasticity rules act on the
excitatory population: STDP on existing EE synapses, row-wise synaptic
normalization of ``W_ee`` and intrinsic plasticity of the thresholds ``T_e``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .reservoir import ridge_solve
from .timeseries import TimeSeries

_MAX_ROW_REDRAWS = 1000


@dataclass(frozen=True)
class SornParams:
    n_excitatory: int = 100
    n_inhibitory: Optional[int] = None
    eta_stdp: float = 0.001
    eta_ip: float = 0.001
    target_rate: float = 0.1
    te_max: float = 0.5
    ti_max: float = 1.0
    lambda_ee: float = 10.0
    input_fraction: float = 0.1
    input_strength: float = 1.0
    inhibitory_uses_new_x: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_excitatory < 2:
            raise ValueError("n_excitatory must be >= 2")
        if self.n_inhibitory is None:
            object.__setattr__(self, "n_inhibitory", max(1, round(0.2 * self.n_excitatory)))
        if self.n_inhibitory < 1:
            raise ValueError("n_inhibitory must be >= 1")
        if not 0 < self.target_rate < 1:
            raise ValueError("target_rate must be in (0, 1)")
        if self.te_max <= 0 or self.ti_max <= 0:
            raise ValueError("threshold ranges must be positive")
        if not 0 < self.lambda_ee < self.n_excitatory:
            raise ValueError("lambda_ee must be in (0, n_excitatory)")
        if self.eta_stdp < 0 or self.eta_ip < 0:
            raise ValueError("learning rates must be nonnegative")


@dataclass(frozen=True)
class SornState:
    params: SornParams
    w_ee: np.ndarray
    w_ei: np.ndarray
    w_ie: np.ndarray
    mask_ee: np.ndarray
    t_e: np.ndarray
    t_i: np.ndarray
    x: np.ndarray
    y: np.ndarray
    x_prev: np.ndarray
    flags: tuple[str, ...] = ()

    @property
    def n_excitatory(self) -> int:
        return len(self.x)


def _row_normalize(w: np.ndarray) -> np.ndarray:
    return w / w.sum(axis=1, keepdims=True)


def sorn_init(params: SornParams) -> SornState:
    """Random sparse EE weights (no self-connections), dense EI/IE, all rows summing to 1."""
    rng = np.random.default_rng(params.seed)
    ne, ni = params.n_excitatory, params.n_inhibitory
    p = params.lambda_ee / (ne - 1)
    mask = rng.random((ne, ne)) < p
    np.fill_diagonal(mask, False)
    for i in range(ne):
        tries = 0
        while not mask[i].any():
            tries += 1
            if tries > _MAX_ROW_REDRAWS:
                raise RuntimeError(f"could not draw incoming connections for unit {i}")
            row = rng.random(ne) < p
            row[i] = False
            mask[i] = row
    w_ee = _row_normalize(np.where(mask, rng.random((ne, ne)), 0.0))
    w_ei = _row_normalize(rng.random((ne, ni)))
    w_ie = _row_normalize(rng.random((ni, ne)))
    # thresholds in (0, max]
    t_e = params.te_max * (1.0 - rng.random(ne))
    t_i = params.ti_max * (1.0 - rng.random(ni))
    zeros_e = np.zeros(ne, dtype=np.int8)
    return SornState(
        params, w_ee, w_ei, w_ie, mask, t_e, t_i,
        zeros_e, np.zeros(ni, dtype=np.int8), zeros_e.copy(),
    )


def sorn_step(s: SornState, drive: np.ndarray) -> SornState:
    """One network update; the inhibitory layer sees ``x(t)`` unless configured otherwise."""
    drive = np.asarray(drive, dtype=float)
    if drive.shape != s.x.shape:
        raise ValueError(f"drive has shape {drive.shape}, expected {s.x.shape}")
    r = s.w_ee @ s.x - s.w_ei @ s.y - s.t_e
    x_new = (r + drive > 0).astype(np.int8)
    x_inh = x_new if s.params.inhibitory_uses_new_x else s.x
    y_new = (s.w_ie @ x_inh - s.t_i > 0).astype(np.int8)
    return replace(s, x=x_new, y=y_new, x_prev=s.x)


def stdp_update(s: SornState) -> SornState:
    """``dW_ij = eta (x_i(t) x_j(t-1) - x_i(t-1) x_j(t))`` on existing synapses, clipped at 0."""
    x = s.x.astype(float)
    xp = s.x_prev.astype(float)
    dw = s.params.eta_stdp * (np.outer(x, xp) - np.outer(xp, x))
    w = np.where(s.mask_ee, np.maximum(s.w_ee + dw, 0.0), 0.0)
    return replace(s, w_ee=w)


def synaptic_normalization(s: SornState) -> SornState:
    """Rescale each row of ``W_ee`` to unit sum; all-zero rows are left as is and flagged."""
    sums = s.w_ee.sum(axis=1, keepdims=True)
    zero = sums[:, 0] <= 0
    w = s.w_ee / np.where(sums > 0, sums, 1.0)
    flags = s.flags
    if zero.any() and "zero_row" not in flags:
        flags = flags + ("zero_row",)
    return replace(s, w_ee=w, flags=flags)


def ip_update(s: SornState) -> SornState:
    """``T_e <- T_e + eta_ip (x - H_IP)``; thresholds are not clipped."""
    t_e = s.t_e + s.params.eta_ip * (s.x - s.params.target_rate)
    return replace(s, t_e=t_e)


@dataclass(frozen=True)
class Plasticity:
    stdp: bool = True
    sn: bool = True
    ip: bool = True

    @classmethod
    def none(cls) -> "Plasticity":
        return cls(False, False, False)


def plastic_step(s: SornState, drive: np.ndarray, rules: Plasticity) -> SornState:
    """Network step followed by the enabled rules in the order STDP, SN, IP."""
    s = sorn_step(s, drive)
    if rules.stdp:
        s = stdp_update(s)
    if rules.sn:
        s = synaptic_normalization(s)
    if rules.ip:
        s = ip_update(s)
    return s


# ---------------------------------------------------------------------------
# counting task


@dataclass(frozen=True)
class CountingTask:
    """Two words ``first + middle * n + last``; the next symbol is the target.

    The default alphabet is A..F (symbols 0..5) with words ``A B^n C`` and
    ``D E^n F``.
    """

    n: int
    words: tuple[tuple[int, int, int], ...] = ((0, 1, 2), (3, 4, 5))
    alphabet: str = "ABCDEF"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if len({w[0] for w in self.words}) != len(self.words):
            raise ValueError("first symbols of the words must differ")
        object.__setattr__(self, "words", tuple(tuple(w) for w in self.words))

    @property
    def n_symbols(self) -> int:
        return len(self.alphabet)

    @property
    def word_length(self) -> int:
        return self.n + 2

    def word(self, index: int) -> list[int]:
        first, middle, last = self.words[index]
        return [first] + [middle] * self.n + [last]

    def word_string(self, index: int) -> str:
        return "".join(self.alphabet[c] for c in self.word(index))

    @property
    def max_accuracy(self) -> float:
        """Best achievable next-symbol accuracy with equiprobable words."""
        return 1.0 - (1.0 - 1.0 / len(self.words)) / self.word_length


def counting_symbols(task: CountingTask, n_words: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Symbol stream of ``n_words`` random words and the next-symbol targets."""
    rng = np.random.default_rng(seed)
    choice = rng.integers(0, len(task.words), n_words + 1)
    words = np.array([task.word(i) for i in range(len(task.words))])
    stream = words[choice].ravel()
    steps = n_words * task.word_length
    return stream[:steps], stream[1 : steps + 1]


def counting_task_generate(
    task: CountingTask, n_words: int, seed: int
) -> tuple[TimeSeries, np.ndarray]:
    """One-hot input series and next-symbol target sequence."""
    symbols, target = counting_symbols(task, n_words, seed)
    onehot = np.eye(task.n_symbols, dtype=np.int64)[symbols]
    return TimeSeries(onehot, tuple(task.alphabet)), target


def input_projection(params: SornParams, n_symbols: int) -> np.ndarray:
    """Binary (N^E, n_symbols) map sending each symbol to its own unit subset.

    Subsets have ``input_fraction * N^E`` units and are disjoint while units last.
    """
    rng = np.random.default_rng([params.seed, 0x5EED])
    ne = params.n_excitatory
    size = max(1, int(round(params.input_fraction * ne)))
    order = rng.permutation(ne)
    proj = np.zeros((ne, n_symbols))
    for s in range(n_symbols):
        start = (s * size) % ne
        idx = order[np.arange(start, start + size) % ne]
        proj[idx, s] = 1.0
    return proj


# ---------------------------------------------------------------------------
# experiments


def run_network(
    s: SornState,
    drives: np.ndarray,
    rules: Plasticity = Plasticity.none(),
    record: bool = True,
):
    """Fold ``plastic_step`` over a (T, N^E) drive matrix; returns (state, raster)."""
    raster = np.empty((len(drives), s.n_excitatory), dtype=np.int8) if record else None
    for t in range(len(drives)):
        s = plastic_step(s, drives[t], rules)
        if record:
            raster[t] = s.x
    return s, raster


def decode(scores: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row-wise argmax with uniformly random tie-breaking."""
    best = scores.max(axis=1, keepdims=True)
    ties = np.isclose(scores, best, rtol=0, atol=1e-12)
    noise = rng.random(scores.shape)
    return np.argmax(np.where(ties, noise, -1.0), axis=1)


@dataclass
class SornPerformance:
    accuracy: float
    normalized_performance: float
    max_accuracy: float
    mean_rate: float
    flags: tuple[str, ...] = ()
    readout: Optional[np.ndarray] = field(default=None, repr=False)

    def as_row(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "normalized_performance": self.normalized_performance,
            "max_accuracy": self.max_accuracy,
            "mean_rate": self.mean_rate,
        }


@dataclass(frozen=True)
class Phases:
    plastic_steps: int = 50_000
    readout_steps: int = 5_000
    test_steps: int = 5_000


def sorn_train_and_eval(
    params: SornParams,
    task: CountingTask,
    plasticity: Plasticity = Plasticity(),
    phases: Phases = Phases(),
    ridge_lambda: float = 1e-3,
    train_readout: bool = True,
) -> SornPerformance:
    """Self-organize, fit a next-symbol readout on ``x``, and score it.

    Phase 1 runs ``plastic_steps`` with the enabled rules; phases 2 and 3 run
    the frozen network to fit a linear readout (one-hot targets, argmax
    decoding) and to measure test accuracy. Normalized performance divides by
    the best achievable accuracy. With ``train_readout=False`` the readout
    weights stay zero, which gives chance-level guessing.
    """
    for name in ("plastic_steps", "readout_steps", "test_steps"):
        if getattr(phases, name) < 0:
            raise ValueError(f"{name} must be >= 0")
    if phases.test_steps < 1 or (train_readout and phases.readout_steps < 1):
        raise ValueError("readout and test phases need at least one step")

    total = phases.plastic_steps + phases.readout_steps + phases.test_steps
    n_words = -(-total // task.word_length)
    symbols, targets = counting_symbols(task, n_words, params.seed + 1)
    proj = input_projection(params, task.n_symbols) * params.input_strength
    drives = proj.T[symbols[:total]]
    targets = targets[:total]

    s = sorn_init(params)
    p1 = phases.plastic_steps
    s, _ = run_network(s, drives[:p1], plasticity, record=False)
    s, raster = run_network(s, drives[p1:], Plasticity.none())

    feats = np.hstack([raster, np.ones((len(raster), 1))]).astype(float)
    onehot = np.eye(task.n_symbols)[targets[p1:]]
    n_fit = phases.readout_steps
    if train_readout:
        w, _ = ridge_solve(feats[:n_fit], onehot[:n_fit], ridge_lambda)
    else:
        w = np.zeros((feats.shape[1], task.n_symbols))
    rng = np.random.default_rng([params.seed, 0xDEC0DE])
    pred = decode(feats[n_fit:] @ w, rng)
    acc = float(np.mean(pred == targets[p1 + n_fit :]))
    mean_rate = float(raster.mean())
    flags = s.flags
    if raster.sum() == 0:
        flags = flags + ("silent",)
    return SornPerformance(acc, acc / task.max_accuracy, task.max_accuracy, mean_rate, flags, w)


@dataclass
class ActivityStats:
    rates: np.ndarray
    mean_rate: float
    rate_std: float
    mean_correlation: float
    raster: np.ndarray = field(repr=False)


def mean_pairwise_correlation(raster: np.ndarray) -> float:
    """Average off-diagonal Pearson correlation over units that are not constant."""
    active = raster.std(axis=0) > 0
    if active.sum() < 2:
        return float("nan")
    c = np.corrcoef(raster[:, active].T.astype(float))
    off = c[~np.eye(len(c), dtype=bool)]
    return float(np.mean(off))


def activity_statistics(raster: np.ndarray) -> ActivityStats:
    rates = raster.mean(axis=0)
    return ActivityStats(
        rates, float(rates.mean()), float(rates.std()), mean_pairwise_correlation(raster), raster
    )


def sorn_activity(
    params: SornParams,
    plasticity: Plasticity,
    steps: int,
    record_last: int,
    task: Optional[CountingTask] = None,
) -> ActivityStats:
    """Run a driven SORN and summarize the final ``record_last`` steps of activity."""
    task = task or CountingTask(n=4)
    n_words = -(-steps // task.word_length)
    symbols, _ = counting_symbols(task, n_words, params.seed + 1)
    drives = (input_projection(params, task.n_symbols) * params.input_strength).T[symbols[:steps]]
    s = sorn_init(params)
    s, _ = run_network(s, drives[: steps - record_last], plasticity, record=False)
    s, raster = run_network(s, drives[steps - record_last :], plasticity)
    return activity_statistics(raster)


def raster_csv(raster: np.ndarray, units: Optional[Sequence[int]] = None) -> str:
    units = list(range(raster.shape[1])) if units is None else list(units)
    lines = [",".join(["t"] + [f"u{u}" for u in units])]
    for t, row in enumerate(raster[:, units]):
        lines.append(",".join([str(t)] + [str(int(v)) for v in row]))
    return "\n".join(lines) + "\n"
