"""Flat parameter vector with a named layer map.

Trainers, aggregators, and serializers all exchange model parameters in
this one shape: a float64 vector plus (start, stop) spans that partition
it. Span names are stable strings ("encoder_w", "head_w", ...) so a
strategy that only touches the last layer can address it without knowing
the architecture.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

__all__ = ["ModelState"]


@dataclass
class ModelState:
    params: np.ndarray
    layer_map: dict[str, tuple[int, int]]
    arch: dict = field(default_factory=dict)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if self.params.ndim != 1:
            raise DimensionError("params must be a flat vector")
        if not np.all(np.isfinite(self.params)):
            raise ValueError("params contain non-finite values")
        covered = sorted(self.layer_map.values())
        pos = 0
        for start, stop in covered:
            if start != pos or stop < start:
                raise ValueError("layer spans must partition the parameter vector")
            pos = stop
        if pos != self.params.size:
            raise ValueError("layer spans must cover the whole parameter vector")

    def span(self, name: str) -> np.ndarray:
        start, stop = self.layer_map[name]
        return self.params[start:stop]

    def span_size(self, names: tuple[str, ...] | list[str]) -> int:
        return sum(stop - start for name in names for start, stop in [self.layer_map[name]])

    def copy(self) -> "ModelState":
        return ModelState(self.params.copy(), dict(self.layer_map), dict(self.arch))
