"""Non-interactive private ERM over the unit cube via released loss grids.

Two protocols share the same shape: every player contributes privatized
evaluations of the loss on a uniform grid of parameter points, the server
averages them into grid estimates, fits the iterated Bernstein surrogate,
and minimizes it over the constraint set.

* ``alg2_run``: each player sends one Laplace-noised real per grid point,
  with the budget split evenly across the grid (basic composition).
* ``alg3_run``: players are partitioned across grid points by a seeded
  shuffle and each sends a single bit against shared public randomness.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.stats import qmc

from .errors import (ClippingWarning, ConfigurationError, EstimationError,
                     ParameterError, SampleSizeWarning)
from .geometry import BallConstraint, BoxConstraint
from .polyapprox import (BernsteinOperatorSpec, iterated_basis_weights,
                         iterated_bernstein_eval)
from .primitives import (PrivacyBudget, PublicRandomness, Transcript,
                         ldp_avg_1d, onebit_decode, onebit_encode_many)
from .rng import TAG_BITS, TAG_PARTITION, derived_rng

# loss(theta, rows) -> per-row loss values in [0, 1]
GridLoss = Callable[[np.ndarray, np.ndarray], np.ndarray]

Constraint = Union[BoxConstraint, BallConstraint]

_ONEBIT_EPS_MAX = math.log(2.0)


@dataclass(frozen=True)
class CubeDataset:
    """Player records as rows of an (n, d) array with entries in [0, 1]."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ParameterError(
                f"dataset must be a non-empty 2-d array, got shape {rows.shape}")
        if rows.min() < -1e-12 or rows.max() > 1.0 + 1e-12:
            raise ParameterError("dataset entries must lie in [0, 1]")
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class GridProtocolConfig:
    spec: BernsteinOperatorSpec
    budget: PrivacyBudget
    constraint: Optional[Constraint] = None
    grid_cap: int = 200_000

    def feasible_set(self) -> Constraint:
        if self.constraint is not None:
            return self.constraint
        return BoxConstraint(0.0, 1.0, self.spec.p)


@dataclass(frozen=True)
class GridRelease:
    """Server-side output of a grid protocol run."""

    model: "BernsteinModel"
    w_priv: np.ndarray
    grid_estimates: np.ndarray
    clipped: int


def grid_points(k: int, p: int, cap: int = 200_000) -> np.ndarray:
    """The uniform grid {0, 1/k, ..., 1}^p in lexicographic order, (G, p)."""
    size = (k + 1) ** p
    if size > cap:
        max_k = int(round(cap ** (1.0 / p))) - 1
        raise ConfigurationError(
            f"grid needs (k+1)^p = {size} points, above the cap {cap}; at "
            f"p = {p} the largest supported k is {max_k} — lower k (cost "
            f"per player grows with the grid while accuracy needs n to grow "
            f"like the grid squared) or raise grid_cap"
        )
    axes = [np.arange(k + 1) / k] * p
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(size, p)


def recommended_k(n: int, p: int, h: int, epsilon: float,
                  beta: float = 0.05) -> int:
    """Heuristic grid order balancing bias and noise.

    Implements the shape k = (sqrt(p n) eps / (2^{(h+1)p} sqrt(log 1/beta)))
    ^{1/(h+p)} with the derivative constant treated as 1; treat the result
    as a starting point, not a guarantee.
    """
    if n < 1 or p < 1 or h < 1:
        raise ParameterError("n, p, h must all be >= 1")
    if not (epsilon > 0 and 0 < beta < 1):
        raise ParameterError("need epsilon > 0 and beta in (0, 1)")
    raw = (math.sqrt(p * n) * epsilon
           / (2.0 ** ((h + 1) * p) * math.sqrt(math.log(1.0 / beta))))
    return max(1, round(raw ** (1.0 / (h + p))))


@dataclass(frozen=True)
class BernsteinModel:
    """Iterated Bernstein surrogate fitted to released grid values."""

    spec: BernsteinOperatorSpec
    grid_values: np.ndarray

    def __post_init__(self):
        expect = (self.spec.k + 1,) * self.spec.p
        if self.grid_values.shape != expect:
            raise ParameterError(
                f"grid shape {self.grid_values.shape}, expected {expect}")

    def value(self, y) -> float:
        return iterated_bernstein_eval(self.grid_values, self.spec, y)

    def __call__(self, y) -> float:
        return self.value(y)

    def grad(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        k, h, p = self.spec.k, self.spec.h, self.spec.p
        ws = [iterated_basis_weights(k, h, float(y[j])) for j in range(p)]
        dws = [iterated_basis_weights(k, h, float(y[j]), derivative=True)
               for j in range(p)]
        out = np.empty(p)
        for axis in range(p):
            cur = self.grid_values
            for j in range(p):
                vec = dws[j] if j == axis else ws[j]
                cur = np.tensordot(vec, cur, axes=(0, 0))
            out[axis] = float(cur)
        return out


def minimize_model(model: BernsteinModel, constraint: Constraint,
                   starts: int = 32, gd_iters: int = 120) -> np.ndarray:
    """Minimize the surrogate over a box or ball inside [0,1]^p.

    Projected gradient descent with backtracking from a low-discrepancy set
    of starts, followed by coordinate line-search sweeps around the best
    point. The surrogate is generally non-convex, so this is a best-effort
    global search; it always returns a feasible point.
    """
    p = model.spec.p
    sob = qmc.Sobol(d=p, scramble=False)
    raw = sob.random(max(2, 1 << max(1, (starts - 1).bit_length())))[:starts]
    cands = [constraint.project(r) for r in raw]
    cands.append(np.asarray(constraint.center(), dtype=float))

    best_x, best_f = None, math.inf
    for start in cands:
        x = np.asarray(start, dtype=float)
        f = model.value(x)
        step = 0.25
        for _ in range(gd_iters):
            g = model.grad(x)
            x_new = constraint.project(x - step * g)
            f_new = model.value(x_new)
            if f_new < f - 1e-15:
                x, f = x_new, f_new
                step = min(step * 1.25, 1.0)
            else:
                step *= 0.5
                if step < 1e-7:
                    break
        if f < best_f:
            best_x, best_f = x, f

    # coordinate refinement around the champion
    x = best_x
    for width in (0.05, 0.005):
        for axis in range(p):
            offsets = np.linspace(-width, width, 41)
            for t in offsets:
                cand = x.copy()
                cand[axis] += t
                cand = constraint.project(cand)
                f_cand = model.value(cand)
                if f_cand < best_f:
                    best_x, best_f = cand, f_cand
            x = best_x
    return best_x


def _clipped_losses(loss: GridLoss, theta: np.ndarray,
                    rows: np.ndarray) -> tuple:
    vals = np.asarray(loss(theta, rows), dtype=float)
    if vals.shape != (rows.shape[0],):
        raise ParameterError(
            f"loss returned shape {vals.shape}, expected ({rows.shape[0]},)")
    outside = int(np.count_nonzero((vals < -1e-9) | (vals > 1.0 + 1e-9)))
    return np.clip(vals, 0.0, 1.0), outside


def _warn_clipped(clipped: int, n_evals: int):
    if clipped:
        warnings.warn(
            f"{clipped} of {n_evals} loss evaluations fell outside [0, 1] "
            f"and were clipped; the privacy guarantee still holds but the "
            f"loss violates its range contract",
            ClippingWarning, stacklevel=3)


def alg2_run(data: CubeDataset, loss: GridLoss, cfg: GridProtocolConfig,
             rng: np.random.Generator,
             transcript: Optional[Transcript] = None) -> GridRelease:
    """Laplace-per-grid-point protocol.

    Every player reports each grid evaluation through the scalar private
    mean with per-point budget eps / (k+1)^p, so the per-player total is
    exactly the configured budget by basic composition.
    """
    spec = cfg.spec
    grid = grid_points(spec.k, spec.p, cfg.grid_cap)
    per_point = cfg.budget.split(len(grid))
    estimates = np.empty(len(grid))
    clipped = 0
    for gi in range(len(grid)):
        vals, outside = _clipped_losses(loss, grid[gi], data.rows)
        clipped += outside
        estimates[gi] = ldp_avg_1d(vals, 1.0, per_point, rng)
    if transcript is not None:
        # one message per player holding all grid evaluations
        transcript.add_bulk(data.n, reals_per=float(len(grid)))
    _warn_clipped(clipped, len(grid) * data.n)
    model = BernsteinModel(spec, estimates.reshape((spec.k + 1,) * spec.p))
    w_priv = minimize_model(model, cfg.feasible_set())
    return GridRelease(model=model, w_priv=w_priv,
                       grid_estimates=estimates, clipped=clipped)


def alg3_run(data: CubeDataset, loss: GridLoss, cfg: GridProtocolConfig,
             seed: int,
             transcript: Optional[Transcript] = None) -> GridRelease:
    """One-bit protocol: partition players across grid points.

    Takes an integer seed rather than a generator because the run needs
    named reproducible sub-streams: the partition shuffle, the public
    Laplace draws (regenerable by anyone from the seed), and the private
    bit flips. Each player sends exactly one bit.
    """
    spec = cfg.spec
    eps = cfg.budget.epsilon
    if not 0 < eps <= _ONEBIT_EPS_MAX:
        raise ParameterError(
            f"one-bit protocol requires 0 < eps <= ln 2, got {eps}")
    grid = grid_points(spec.k, spec.p, cfg.grid_cap)
    n, gsize = data.n, len(grid)
    if n < spec.p * gsize * math.log(spec.k + 1):
        warnings.warn(
            f"n = {n} is below p(k+1)^p log(k+1) ≈ "
            f"{spec.p * gsize * math.log(spec.k + 1):.0f}; decoded grid "
            f"values may be dominated by partition noise",
            SampleSizeWarning, stacklevel=2)

    cells = None
    for attempt in (0, 1):
        perm = derived_rng(seed, TAG_PARTITION, attempt).permutation(n)
        parts = np.array_split(perm, gsize)
        if all(len(c) > 0 for c in parts):
            cells = parts
            break
    if cells is None:
        raise EstimationError(
            f"empty decoding cell with n = {n} players over {gsize} grid "
            f"points, even after re-randomizing (partition seed {seed}); "
            f"the run needs n >= (k+1)^p")

    public = PublicRandomness(seed=seed, scale=1.0 / eps, n=n)
    ys = public.materialize()
    values = np.empty(n)
    clipped = 0
    for gi, cell in enumerate(cells):
        vals, outside = _clipped_losses(loss, grid[gi], data.rows[cell])
        values[cell] = vals
        clipped += outside
    _warn_clipped(clipped, n)

    bits, _ = onebit_encode_many(values, ys, eps, derived_rng(seed, TAG_BITS),
                                 transcript)
    estimates = np.array([onebit_decode(bits[cell], ys[cell])
                          for cell in cells])
    model = BernsteinModel(spec, estimates.reshape((spec.k + 1,) * spec.p))
    w_priv = minimize_model(model, cfg.feasible_set())
    return GridRelease(model=model, w_priv=w_priv,
                       grid_estimates=estimates, clipped=clipped)
