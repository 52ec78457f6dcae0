"""Per-dimension min-max scaling to [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Scaler:
    x_min: np.ndarray
    x_max: np.ndarray
    y_min: float
    y_max: float

    def __post_init__(self):
        self.x_min = np.asarray(self.x_min, dtype=float)
        self.x_max = np.asarray(self.x_max, dtype=float)
        self.y_min, self.y_max = float(self.y_min), float(self.y_max)
        if self.x_min.shape != self.x_max.shape or np.any(self.x_max <= self.x_min) or self.y_max <= self.y_min:
            raise ValueError("scaler bounds need max > min in every dimension")

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray) -> "Scaler":
        """Bounds from data. A constant column gets a unit-width range around
        its value so the scaler stays invertible."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
        lo, hi = x.min(axis=0), x.max(axis=0)
        flat = hi <= lo
        pad = np.where(np.abs(lo) > 0, 0.5 * np.abs(lo), 0.5)
        lo, hi = np.where(flat, lo - pad, lo), np.where(flat, hi + pad, hi)
        y_lo, y_hi = float(y.min()), float(y.max())
        if y_hi <= y_lo:
            d = 0.5 * abs(y_lo) if y_lo != 0 else 0.5
            y_lo, y_hi = y_lo - d, y_hi + d
        return cls(lo, hi, y_lo, y_hi)

    @property
    def n_features(self) -> int:
        return self.x_min.shape[0]

    def scale_x(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.x_min) / (self.x_max - self.x_min) - 1.0

    def unscale_x(self, s):
        return self.x_min + 0.5 * (np.asarray(s, dtype=float) + 1.0) * (self.x_max - self.x_min)

    def scale_y(self, y):
        return 2.0 * (np.asarray(y, dtype=float) - self.y_min) / (self.y_max - self.y_min) - 1.0

    def unscale_y(self, s):
        return self.y_min + 0.5 * (np.asarray(s, dtype=float) + 1.0) * (self.y_max - self.y_min)

    def clamp_x(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Clip inputs to the fitted range; also return the mask of clipped entries."""
        x = np.asarray(x, dtype=float)
        clipped = (x < self.x_min) | (x > self.x_max)
        return np.clip(x, self.x_min, self.x_max), clipped
