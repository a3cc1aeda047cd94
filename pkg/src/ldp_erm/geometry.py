"""Feasible sets used by the optimizers: boxes and Euclidean balls."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoxConstraint:
    """Axis-aligned box ``[lo, hi]^p``."""

    lo: float
    hi: float
    dim: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty box: lo={self.lo}, hi={self.hi}")

    def project(self, w: np.ndarray) -> np.ndarray:
        return np.clip(w, self.lo, self.hi)

    def contains(self, w: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(w >= self.lo - tol) and np.all(w <= self.hi + tol))

    @property
    def radius(self) -> float:
        # half-diameter in the Euclidean norm
        return 0.5 * (self.hi - self.lo) * float(np.sqrt(self.dim))

    def center(self) -> np.ndarray:
        return np.full(self.dim, 0.5 * (self.lo + self.hi))


@dataclass(frozen=True)
class BallConstraint:
    """Euclidean ball of a given center and radius."""

    center_point: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @classmethod
    def origin(cls, dim: int, radius: float = 1.0) -> "BallConstraint":
        return cls(center_point=(0.0,) * dim, radius=radius)

    @property
    def dim(self) -> int:
        return len(self.center_point)

    def center(self) -> np.ndarray:
        return np.asarray(self.center_point, dtype=float)

    def project(self, w: np.ndarray) -> np.ndarray:
        c = self.center()
        d = w - c
        nrm = float(np.linalg.norm(d))
        if nrm <= self.radius:
            return np.asarray(w, dtype=float)
        return c + d * (self.radius / nrm)

    def contains(self, w: np.ndarray, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(np.asarray(w) - self.center())) <= self.radius + tol
