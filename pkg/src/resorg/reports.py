"""Serializable result containers shared by the measures."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays and tuples into JSON types.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def curve_csv(x_name: str, y_name: str, xs, ys) -> str:
    lines = [f"{x_name},{y_name}"]
    for x, y in zip(xs, ys):
        lines.append(f"{x},{float(y)!r}")
    return "\n".join(lines) + "\n"


@dataclass
class MeasureReport:
    """Named scalars and curves produced by a measure, plus metadata."""

    name: str
    scalars: dict[str, float] = field(default_factory=dict)
    curves: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key):
        if key in self.scalars:
            return self.scalars[key]
        return self.curves[key]

    def to_dict(self) -> dict:
        return to_jsonable(
            {
                "name": self.name,
                "scalars": self.scalars,
                "curves": self.curves,
                "metadata": self.metadata,
            }
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    def curve_csv(self, curve: str, index_name: str = "k", start: int = 1) -> str:
        ys = np.asarray(self.curves[curve])
        return curve_csv(index_name, curve, range(start, start + len(ys)), ys)
