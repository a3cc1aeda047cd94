"""Accelerated stochastic approximation over a Euclidean ball.

The solver consumes one noisy gradient per iteration and nothing else (no
function values), which is exactly the interface the private gradient
oracles provide. It is a dual-averaging style accelerated scheme with the
step schedule indexed by an exponent ``p``: p = 1 covers non-smooth
objectives, p = 2 smooth ones. Noise enters only through the scale
``sigma`` used by the schedule; the iterates themselves are deterministic
given the gradient stream.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError
from .geometry import BallConstraint

GradientOracle = Callable[[np.ndarray, np.random.Generator], np.ndarray]


@dataclass(frozen=True)
class SigmSchedule:
    """Step-size schedule of the accelerated solver.

    sigma       upper bound on the gradient-noise standard deviation
    radius      radius bound R on the optimum (and prox scale)
    smoothness  gradient Lipschitz constant of the objective (0 if unknown)
    p_exponent  schedule exponent; 1 for non-smooth, 2 for smooth objectives

    The derived sequences are alpha_i = (1/a)((i+p)/p)^(p-1),
    beta_i = smoothness + (b sigma / R)(i+p+1)^((2p-1)/2), B_i = a alpha_i^2,
    A_k = sum_{i<=k} alpha_i (from i = 0), eta_i = alpha_{i+1}/B_{i+1},
    with a = 2^((p-1)/2) and b = 2^((5-2p)/4) p^((1-2p)/2). At p = 1 they
    collapse to alpha_i = B_i = eta_i = 1 and A_k = k + 1.
    """

    sigma: float
    radius: float
    smoothness: float = 0.0
    p_exponent: int = 1

    def __post_init__(self):
        if self.sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if not self.radius > 0:
            raise ParameterError(f"radius must be positive, got {self.radius}")
        if self.smoothness < 0:
            raise ParameterError(
                f"smoothness must be >= 0, got {self.smoothness}")
        if self.p_exponent < 1:
            raise ParameterError(
                f"exponent p must be >= 1, got {self.p_exponent}")
        if self.sigma == 0 and self.smoothness == 0:
            raise ParameterError(
                "schedule needs sigma > 0 or smoothness > 0 to set step sizes")

    @property
    def a_const(self) -> float:
        return 2.0 ** ((self.p_exponent - 1) / 2.0)

    @property
    def b_const(self) -> float:
        p = self.p_exponent
        return 2.0 ** ((5.0 - 2.0 * p) / 4.0) * p ** ((1.0 - 2.0 * p) / 2.0)

    def alpha(self, i: int) -> float:
        p = self.p_exponent
        return ((i + p) / p) ** (p - 1) / self.a_const

    def beta(self, i: int) -> float:
        p = self.p_exponent
        growth = (i + p + 1) ** ((2.0 * p - 1.0) / 2.0)
        return self.smoothness + self.b_const * self.sigma / self.radius * growth

    def big_b(self, i: int) -> float:
        return self.a_const * self.alpha(i) ** 2

    def eta(self, i: int) -> float:
        return self.alpha(i + 1) / self.big_b(i + 1)


def sigm_run(oracle: GradientOracle, constraint: BallConstraint,
             schedule: SigmSchedule, iters: int, rng: np.random.Generator,
             trace: Optional[list] = None) -> np.ndarray:
    """Run the accelerated scheme for ``iters`` gradient queries.

    Each iteration evaluates the oracle once at the current extrapolation
    point and updates three coupled sequences; the dual-averaging point z
    and the prox point both reduce to closed-form ball projections, so every
    iterate stays feasible. Returns the final averaged iterate. If ``trace``
    is a list, the averaged iterate after each step is appended to it.
    """
    if iters < 1:
        raise ParameterError(f"need at least one iteration, got {iters}")
    y = constraint.center()
    x = y.copy()
    grad_sum = schedule.alpha(1) * np.asarray(oracle(x, rng), dtype=float)
    a_running = schedule.alpha(0) + schedule.alpha(1)
    for k in range(1, iters):
        beta_k = schedule.beta(k)
        alpha_next = schedule.alpha(k + 1)
        b_next = schedule.big_b(k + 1)
        eta = alpha_next / b_next
        z = constraint.project(-grad_sum / beta_k)
        x = eta * z + (1.0 - eta) * y
        grad = np.asarray(oracle(x, rng), dtype=float)
        x_hat = constraint.project(z - (alpha_next / beta_k) * grad)
        w = eta * x_hat + (1.0 - eta) * y
        a_running += alpha_next
        y = ((a_running - b_next) / a_running) * y + (b_next / a_running) * w
        grad_sum += alpha_next * grad
        if trace is not None:
            trace.append(y.copy())
    return y
