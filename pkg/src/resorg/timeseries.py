"""Uniformly sampled multichannel sequences and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class TimeSeries:
    """A (T, channels) array with channel labels.

    Scalar series are stored with a single column; ``values`` is always 2-D.
    """

    values: np.ndarray
    channels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError(f"time series must be 1-D or 2-D, got shape {values.shape}")
        channels = tuple(self.channels) or tuple(f"c{i}" for i in range(values.shape[1]))
        if len(channels) != values.shape[1]:
            raise ValueError(
                f"{len(channels)} channel labels for {values.shape[1]} columns"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channels", channels)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def channel(self, name_or_index: Union[str, int]) -> np.ndarray:
        if isinstance(name_or_index, str):
            name_or_index = self.channels.index(name_or_index)
        return self.values[:, name_or_index]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.channels)
        integral = np.issubdtype(self.values.dtype, np.integer)
        for row in self.values:
            writer.writerow([str(int(v)) if integral else repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text, *, from_text: bool = False) -> "TimeSeries":
        text = path_or_text if from_text else Path(path_or_text).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty CSV")
        header, body = rows[0], rows[1:]
        if not body:
            return cls(np.zeros((0, len(header))), tuple(header))
        try:
            values = np.array([[int(v) for v in r] for r in body], dtype=np.int64)
        except ValueError:
            values = np.array([[float(v) for v in r] for r in body], dtype=float)
        return cls(values, tuple(header))


SeriesLike = Union[TimeSeries, np.ndarray, Sequence[float]]


def as_array(x: SeriesLike) -> np.ndarray:
    """Return the (T, d) value array of a series or array-like."""
    if isinstance(x, TimeSeries):
        return x.values
    arr = np.asarray(x)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"expected a 1-D or 2-D series, got shape {arr.shape}")
    return arr
