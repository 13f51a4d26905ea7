"""Plug-in (histogram) information estimators over embedded symbol sequences.

All quantities are in bits. Estimators take either one symbol sequence or a
list of independent realizations; embedded samples never straddle two
realizations, and their counts are pooled into one table.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Union

import numpy as np
from scipy.stats import rankdata

LOW_SAMPLE_THRESHOLD = 10.0

Symbols = Union[np.ndarray, Sequence[int], Sequence[np.ndarray]]


class DiscretizationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EmbeddingSpec:
    """History lengths of the target (``k``) and source (``l``) and the lag to
    the predicted value (``delay``)."""

    k: int = 1
    l: int = 1
    delay: int = 1

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.l < 1:
            raise ValueError("l must be >= 1")
        if self.delay < 1:
            raise ValueError("delay must be >= 1")

    def n_samples(self, length: int) -> int:
        return length - max(self.k, self.l) - self.delay + 1


@dataclass(frozen=True)
class DiscretizationSpec:
    scheme: Literal["equal_width", "equal_frequency", "none"] = "equal_width"
    bins: int = 8
    range: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.scheme not in ("equal_width", "equal_frequency", "none"):
            raise ValueError(f"unknown discretization scheme {self.scheme!r}")
        if self.scheme != "none" and self.bins < 2:
            raise ValueError("bins must be >= 2 for continuous inputs")


DEFAULT_DISCRETIZATION = DiscretizationSpec("equal_width", 8)


def discretize(x, spec: DiscretizationSpec = DEFAULT_DISCRETIZATION) -> np.ndarray:
    """Map a real sequence to integer symbols ``0 .. bins-1``.

    Equal-width bins span ``spec.range`` (default: observed min/max) and a value
    on the upper edge falls in the last bin. Equal-frequency bins assign ties
    to the same bin. A constant series maps to all zeros with a warning.
    """
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("discretize expects a single channel")
    if spec.scheme == "none":
        if not np.issubdtype(x.dtype, np.integer):
            if not np.all(np.equal(np.mod(x, 1), 0)):
                raise ValueError("scheme 'none' requires integer symbols")
        return x.astype(np.int64)
    x = x.astype(float)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot discretize non-finite values")
    if len(x) == 0:
        return np.zeros(0, dtype=np.int64)

    if spec.scheme == "equal_width":
        lo, hi = spec.range if spec.range is not None else (x.min(), x.max())
        if hi <= lo:
            warnings.warn("constant series: all symbols set to 0", DiscretizationWarning)
            return np.zeros(len(x), dtype=np.int64)
        sym = np.floor((x - lo) / (hi - lo) * spec.bins).astype(np.int64)
        return np.clip(sym, 0, spec.bins - 1)

    if np.all(x == x[0]):
        warnings.warn("constant series: all symbols set to 0", DiscretizationWarning)
        return np.zeros(len(x), dtype=np.int64)
    ranks = rankdata(x, method="min") - 1
    return (ranks * spec.bins // len(x)).astype(np.int64)


def symbolize(x, spec: Optional[DiscretizationSpec] = None) -> np.ndarray:
    """Integer arrays pass through; real arrays are discretized (8 equal-width bins by default)."""
    x = np.asarray(x)
    if spec is None:
        if np.issubdtype(x.dtype, np.integer) or x.dtype == bool:
            return x.astype(np.int64)
        spec = DEFAULT_DISCRETIZATION
    return discretize(x, spec)


def _row_codes(data: np.ndarray) -> Optional[np.ndarray]:
    """Mixed-radix int64 code per row, order-preserving; None on overflow."""
    lo = data.min(axis=0)
    radix = data.max(axis=0) - lo + 1
    if np.sum(np.log2(radix.astype(float))) >= 62:
        return None
    codes = np.zeros(len(data), dtype=np.int64)
    for j in range(data.shape[1]):
        codes = codes * radix[j] + (data[:, j] - lo[j])
    return codes


@dataclass(frozen=True)
class ProbabilityTable:
    """Joint counts over observed symbol tuples (one row of ``symbols`` per cell)."""

    symbols: np.ndarray
    counts: np.ndarray
    labels: tuple[str, ...] = ()

    @classmethod
    def from_columns(cls, *columns: np.ndarray, labels: Sequence[str] = ()) -> "ProbabilityTable":
        data = np.column_stack([np.asarray(c, dtype=np.int64) for c in columns])
        if len(data) == 0:
            raise ValueError("cannot build a probability table from zero samples")
        codes = _row_codes(data)
        if codes is None:
            cells, counts = np.unique(data, axis=0, return_counts=True)
        else:
            _, first, counts = np.unique(codes, return_index=True, return_counts=True)
            cells = data[first]
        labels = tuple(labels) or tuple(f"v{i}" for i in range(data.shape[1]))
        return cls(cells, counts, labels)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def occupied(self) -> int:
        return len(self.counts)

    def marginal(self, dims: Sequence[int]) -> "ProbabilityTable":
        dims = list(dims)
        cells, inverse = np.unique(self.symbols[:, dims], axis=0, return_inverse=True)
        counts = np.bincount(inverse.ravel(), weights=self.counts, minlength=len(cells))
        return ProbabilityTable(
            cells, counts.astype(np.int64), tuple(self.labels[d] for d in dims)
        )


def entropy(p: ProbabilityTable, bias_correction: Optional[str] = None) -> float:
    """Plug-in Shannon entropy in bits; ``bias_correction="miller_madow"`` adds
    ``(occupied - 1) / (2 N ln 2)``."""
    probs = p.probabilities
    probs = probs[probs > 0]
    h = float(-np.sum(probs * np.log2(probs)))
    if bias_correction is None:
        return h
    if bias_correction == "miller_madow":
        return h + (p.occupied - 1) / (2.0 * p.total * np.log(2))
    raise ValueError(f"unknown bias correction {bias_correction!r}")


@dataclass
class InfoEstimate:
    value: float
    k: Optional[int] = None
    l: Optional[int] = None
    bins: Optional[int] = None
    samples: int = 0
    flags: tuple[str, ...] = ()
    note: str = ""
    extra: dict = field(default_factory=dict)

    def __float__(self) -> float:
        return float(self.value)

    @property
    def low_confidence(self) -> bool:
        return "low_confidence" in self.flags

    def to_dict(self) -> dict:
        doc = {
            "value_bits": float(self.value),
            "k": self.k,
            "l": self.l,
            "bins": self.bins,
            "samples": int(self.samples),
            "flags": list(self.flags),
        }
        if self.note:
            doc["note"] = self.note
        doc.update({key: float(v) for key, v in self.extra.items()})
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _realizations(x: Symbols) -> list[np.ndarray]:
    if isinstance(x, np.ndarray) and x.ndim == 1:
        return [x.astype(np.int64)]
    if isinstance(x, np.ndarray) and x.ndim == 2:
        if x.shape[1] == 1:
            return [x[:, 0].astype(np.int64)]
        return [row.astype(np.int64) for row in x]
    items = list(x)
    if items and np.ndim(items[0]) == 1:
        return [np.asarray(r, dtype=np.int64) for r in items]
    return [np.asarray(items, dtype=np.int64)]


def _paired(*seqs: Symbols) -> list[list[np.ndarray]]:
    reals = [_realizations(s) for s in seqs]
    n = len(reals[0])
    if any(len(r) != n for r in reals):
        raise ValueError("sequences have different numbers of realizations")
    for parts in zip(*reals):
        if len({len(p) for p in parts}) != 1:
            raise ValueError("aligned sequences must have equal lengths")
    return reals


def _block(seq: np.ndarray, length: int, ends: np.ndarray) -> np.ndarray:
    """Rows ``seq[e - length + 1 .. e]`` for each end index ``e`` (oldest first)."""
    if length == 0:
        return np.zeros((len(ends), 0), dtype=np.int64)
    offsets = np.arange(-length + 1, 1)
    return seq[ends[:, None] + offsets[None, :]]


def _cmi(x: np.ndarray, y: np.ndarray, z: np.ndarray, bias_correction=None) -> float:
    """I(X; Y | Z) for column blocks of embedded samples, in bits."""

    def h(*blocks):
        cols = [b for b in blocks if b.shape[1]]
        if not cols:
            return 0.0
        return entropy(ProbabilityTable.from_columns(*np.hstack(cols).T), bias_correction)

    # grouped so a constant X cancels exactly
    return (h(x, z) - h(z)) - (h(x, y, z) - h(y, z))


def _occupied(*blocks: np.ndarray) -> int:
    return ProbabilityTable.from_columns(*np.hstack(blocks).T).occupied


def _flags(samples: int, occupied: int) -> tuple[str, ...]:
    if samples / max(occupied, 1) < LOW_SAMPLE_THRESHOLD:
        return ("low_confidence",)
    return ()


def mutual_information(x: Symbols, y: Symbols, bias_correction: Optional[str] = None) -> InfoEstimate:
    """I(X;Y) = H(X) + H(Y) - H(X,Y) from one joint plug-in table."""
    xs, ys = _realizations(x), _realizations(y)
    if len(xs) != len(ys) or any(len(a) != len(b) for a, b in zip(xs, ys)):
        raise ValueError("mutual_information needs sequences of equal length")
    joint = ProbabilityTable.from_columns(np.concatenate(xs), np.concatenate(ys), labels=("x", "y"))
    value = (
        entropy(joint.marginal([0]), bias_correction)
        + entropy(joint.marginal([1]), bias_correction)
        - entropy(joint, bias_correction)
    )
    return InfoEstimate(
        value,
        samples=joint.total,
        flags=_flags(joint.total, joint.occupied),
        note=bias_correction or "",
    )


def _embed_next(seqs: list[np.ndarray], k: int, delay: int = 1):
    """Stack (k-block ending at n, value at n + delay) over realizations."""
    pasts, nexts = [], []
    for s in seqs:
        ends = np.arange(k - 1, len(s) - delay) if k else np.arange(0, len(s) - delay)
        if len(ends) <= 0:
            continue
        pasts.append(_block(s, k, ends))
        nexts.append(s[ends + delay][:, None])
    if not pasts:
        raise ValueError(f"sequence too short for history length {k}")
    return np.vstack(pasts), np.vstack(nexts)


def active_information_storage(
    x: Symbols,
    k: int,
    bias_correction: Optional[str] = None,
    normalize: bool = False,
) -> InfoEstimate:
    """A(X, k) = I(X^(k); X'): information the k-step past holds about the next value.

    With ``normalize`` the estimate also carries ``normalized`` = A / H(X^(k), X').
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    past, nxt = _embed_next(_realizations(x), k)
    value = _cmi(past, nxt, np.zeros((len(past), 0), dtype=np.int64), bias_correction)
    occ = _occupied(past, nxt)
    extra = {}
    if normalize:
        hj = entropy(ProbabilityTable.from_columns(*np.hstack([past, nxt]).T))
        extra["normalized"] = value / hj if hj > 0 else 0.0
    return InfoEstimate(
        value, k=k, samples=len(past), flags=_flags(len(past), occ),
        note=bias_correction or "", extra=extra,
    )


def input_conditioned_ais(
    x: Symbols, u: Symbols, k: int, bias_correction: Optional[str] = None
) -> InfoEstimate:
    """A^U_X(k) = I(X^(k); X' | U'): storage with the current input conditioned out.

    Equals the average of ``log2 p(x_{n+1} | x_n^(k), u_{n+1}) / p(x_{n+1} | u_{n+1})``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    xs, us = _paired(x, u)
    pasts, nexts, inputs = [], [], []
    for xr, ur in zip(xs, us):
        ends = np.arange(k - 1, len(xr) - 1)
        if len(ends) == 0:
            continue
        pasts.append(_block(xr, k, ends))
        nexts.append(xr[ends + 1][:, None])
        inputs.append(ur[ends + 1][:, None])
    if not pasts:
        raise ValueError(f"sequence too short for history length {k}")
    past, nxt, cur_u = np.vstack(pasts), np.vstack(nexts), np.vstack(inputs)
    value = _cmi(past, nxt, cur_u, bias_correction)
    return InfoEstimate(
        value, k=k, samples=len(past),
        flags=_flags(len(past), _occupied(past, nxt, cur_u)), note=bias_correction or "",
    )


def embed_transfer(x: Symbols, y: Symbols, spec: EmbeddingSpec):
    """Embedded (source l-block, target k-block, target next) sample blocks.

    Both blocks end at ``n`` and the next target value is ``y[n + delay]``.
    """
    xs, ys = _paired(x, y)
    src, tgt, nxt = [], [], []
    span = max(spec.k, spec.l)
    for xr, yr in zip(xs, ys):
        if spec.n_samples(len(xr)) <= 0:
            continue
        ends = np.arange(span - 1, len(xr) - spec.delay)
        src.append(_block(xr, spec.l, ends))
        tgt.append(_block(yr, spec.k, ends))
        nxt.append(yr[ends + spec.delay][:, None])
    if not src:
        raise ValueError(
            f"series too short for embedding k={spec.k}, l={spec.l}, delay={spec.delay}"
        )
    return np.vstack(src), np.vstack(tgt), np.vstack(nxt)


def transfer_entropy(
    x: Symbols,
    y: Symbols,
    spec: EmbeddingSpec = EmbeddingSpec(),
    bias_correction: Optional[str] = None,
) -> InfoEstimate:
    """T_{X->Y}^{(k,l)} = I(X^(l); Y' | Y^(k)) from plug-in tables."""
    src, tgt, nxt = embed_transfer(x, y, spec)
    value = _cmi(src, nxt, tgt, bias_correction)
    return InfoEstimate(
        value, k=spec.k, l=spec.l, samples=len(src),
        flags=_flags(len(src), _occupied(src, tgt, nxt)), note=bias_correction or "",
    )
