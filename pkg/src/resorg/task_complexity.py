"""Task difficulty from an (input X, desired output Y) pair.

Two profiles are reported side by side and never combined: how much of the
next output the output's own past predicts, ``A_Y(k)``, and how much the
input history adds on top of that, ``T_{X->Y}(k*, l)``. Both use the plateau
rule from :func:`resorg.te_adaptation.plateau_index`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .info import (
    DiscretizationSpec,
    EmbeddingSpec,
    active_information_storage,
    symbolize,
    transfer_entropy,
)
from .reports import curve_csv, to_jsonable
from .te_adaptation import plateau_index
from .timeseries import SeriesLike, as_array

DEFAULT_EPSILON = 0.01


def _symbols(v: SeriesLike, bins: int) -> np.ndarray:
    a = as_array(v)
    if a.shape[1] != 1:
        raise ValueError("task complexity takes scalar series")
    return symbolize(a[:, 0], None if bins == 8 else DiscretizationSpec("equal_width", bins))


@dataclass(frozen=True)
class MemoryProfile:
    curve: np.ndarray
    k_star: int
    plateau_found: bool
    normalized: Optional[np.ndarray] = None


@dataclass(frozen=True)
class InputProfile:
    curve: np.ndarray
    l_star: int
    plateau_found: bool
    k_star: int

    @property
    def te_at_l_star(self) -> float:
        return float(self.curve[self.l_star - 1])


def output_memory_profile(
    y: SeriesLike,
    k_max: int = 10,
    epsilon: float = DEFAULT_EPSILON,
    bins: int = 8,
    normalize: bool = False,
) -> MemoryProfile:
    """``A_Y(k)`` for ``k = 1..k_max`` and the smallest ``k`` after which it gains at most ``epsilon``.

    ``k_star`` falls back to ``k_max`` when the curve never plateaus.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    ys = _symbols(y, bins)
    if len(ys) <= k_max:
        raise ValueError(f"series of length {len(ys)} too short for k_max={k_max}")
    ests = [active_information_storage(ys, k, normalize=normalize) for k in range(1, k_max + 1)]
    curve = np.array([e.value for e in ests])
    k_star, found = plateau_index(curve, epsilon)
    norm = np.array([e.extra["normalized"] for e in ests]) if normalize else None
    return MemoryProfile(curve, k_star, found, norm)


def input_contribution_profile(
    x: SeriesLike,
    y: SeriesLike,
    k_star: int,
    l_max: int = 10,
    epsilon: float = DEFAULT_EPSILON,
    bins: int = 8,
) -> InputProfile:
    """``T_{X->Y}(k_star, l)`` for ``l = 1..l_max`` with ``l_star`` chosen by the plateau rule."""
    if l_max < 1 or k_star < 1:
        raise ValueError("k_star and l_max must be >= 1")
    xs, ys = _symbols(x, bins), _symbols(y, bins)
    if len(xs) != len(ys):
        raise ValueError("x and y must be aligned")
    if EmbeddingSpec(k_star, l_max).n_samples(len(ys)) < 1:
        raise ValueError(f"series of length {len(ys)} too short for k={k_star}, l_max={l_max}")
    curve = np.array(
        [transfer_entropy(xs, ys, EmbeddingSpec(k_star, l)).value for l in range(1, l_max + 1)]
    )
    l_star, found = plateau_index(curve, epsilon)
    return InputProfile(curve, l_star, found, k_star)


@dataclass
class TaskComplexityReport:
    memory: MemoryProfile
    input: Optional[InputProfile]
    epsilon: float
    bins: int
    samples: int
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "A_Y": self.memory.curve,
            "k_star": self.memory.k_star,
            "epsilon": self.epsilon,
            "bins": self.bins,
            "samples": self.samples,
            "flags": self.flags,
        }
        if self.memory.normalized is not None:
            d["A_Y_normalized"] = self.memory.normalized
        if self.input is not None:
            d["T_XY"] = self.input.curve
            d["l_star"] = self.input.l_star
            d["T_XY_at_l_star"] = self.input.te_at_l_star
        return to_jsonable(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def curves_csv(self) -> dict[str, str]:
        out = {"A_Y": curve_csv("k", "A_Y_bits", range(1, len(self.memory.curve) + 1),
                                self.memory.curve)}
        if self.input is not None:
            out["T_XY"] = curve_csv("l", "T_bits", range(1, len(self.input.curve) + 1),
                                    self.input.curve)
        return out


def task_complexity(
    y: SeriesLike,
    x: Optional[SeriesLike] = None,
    k_max: int = 10,
    l_max: int = 10,
    epsilon: float = DEFAULT_EPSILON,
    bins: int = 8,
    normalize: bool = False,
) -> TaskComplexityReport:
    mem = output_memory_profile(y, k_max, epsilon, bins, normalize)
    flags = [] if mem.plateau_found else ["no_plateau_k"]
    inp = None
    if x is not None:
        inp = input_contribution_profile(x, y, mem.k_star, l_max, epsilon, bins)
        if not inp.plateau_found:
            flags.append("no_plateau_l")
    return TaskComplexityReport(mem, inp, epsilon, bins, len(as_array(y)), flags)
