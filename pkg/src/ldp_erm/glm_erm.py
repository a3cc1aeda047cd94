"""Non-interactive private ERM for losses of an inner product.

Players Gaussian-noise many replicas of their record and send them once;
the server turns each message into an unbiased sample of a polynomial
surrogate gradient (a Bernstein form of the smoothed loss derivative
evaluated via products over fresh replicas) and feeds the samples to the
accelerated solver.

Two gradient paths exist: a dedicated hinge path whose coefficients come
from the smoothed hinge derivative, and a general path for any convex
1-Lipschitz scalar loss, which additionally draws kink locations from the
loss's subgradient mixture per replica.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError, ProtocolError
from .geometry import BallConstraint
from .polyapprox import (SmoothedPlus, SubgradientSampler,
                         bernstein_deriv_coeffs, hbeta_deriv, hinge_sampler,
                         sample_q_many)
from .primitives import BITS_PER_REAL, PrivacyBudget, Transcript
from .sigm import SigmSchedule, sigm_run

# --- data and configuration ---------------------------------------------------


@dataclass(frozen=True)
class BallDataset:
    """Labelled records with ||x_i|| <= 1 and |y_i| <= 1."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ParameterError(
                f"features must be a non-empty 2-d array, got {x.shape}")
        if y.shape != (x.shape[0],):
            raise ParameterError(
                f"labels shape {y.shape} does not match {x.shape[0]} rows")
        norms = np.linalg.norm(x, axis=1)
        if norms.max() > 1.0 + 1e-9:
            raise ParameterError(
                f"feature norms must be <= 1, max is {norms.max():.6f}")
        if np.abs(y).max() > 1.0 + 1e-9:
            raise ParameterError("labels must lie in [-1, 1]")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ReplicaMessage:
    """One player's message: a head replica plus d(d+1) body replicas."""

    head_x: np.ndarray
    head_y: float
    body_x: np.ndarray
    body_y: np.ndarray

    @property
    def body_count(self) -> int:
        return self.body_y.shape[0]


def replica_noise_stds(budget: PrivacyBudget, d: int) -> tuple:
    """(head, body) Gaussian stds making the whole message private.

    The two scales bake basic composition over the d(d+1)+1 replicas into
    the calibration: head std = sqrt(32 log(1.25/delta))/eps and body std =
    sqrt(8 log(1.25/delta)) d(d+1)/eps.
    """
    if budget.noiseless:
        return 0.0, 0.0
    if budget.delta <= 0.0:
        raise ParameterError(
            "replica encoding uses the Gaussian mechanism and needs delta > 0")
    log_term = math.log(1.25 / budget.delta)
    head = math.sqrt(32.0 * log_term) / budget.epsilon
    body = math.sqrt(8.0 * log_term) * d * (d + 1) / budget.epsilon
    return head, body


def glm_player_encode(record: tuple, budget: PrivacyBudget, d: int,
                      rng: np.random.Generator,
                      transcript: Optional[Transcript] = None) -> ReplicaMessage:
    """Encode one record (x, y) into d(d+1)+1 independently noised replicas."""
    if d < 1:
        raise ParameterError(f"degree d must be >= 1, got {d}")
    x, y = record
    x = np.asarray(x, dtype=float)
    y = float(y)
    head_std, body_std = replica_noise_stds(budget, d)
    m = d * (d + 1)
    dim = x.shape[0]
    if head_std == 0.0:
        msg = ReplicaMessage(head_x=x.copy(), head_y=y,
                             body_x=np.tile(x, (m, 1)),
                             body_y=np.full(m, y))
    else:
        msg = ReplicaMessage(
            head_x=x + rng.normal(0.0, head_std, dim),
            head_y=y + float(rng.normal(0.0, head_std)),
            body_x=x + rng.normal(0.0, body_std, (m, dim)),
            body_y=y + rng.normal(0.0, body_std, m),
        )
    if transcript is not None:
        reals = (m + 1) * (dim + 1)
        transcript.add_bulk(1, reals * BITS_PER_REAL, reals)
    return msg


@dataclass(frozen=True)
class GradientOracleConfig:
    """Degree, smoothing, and coefficient data of one gradient path."""

    d: int
    beta_smoothing: float
    flavor: str  # "hinge" or "general-linear"
    coeffs: np.ndarray
    sampler: Optional[SubgradientSampler] = None

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError(f"degree d must be >= 1, got {self.d}")
        if self.flavor not in ("hinge", "general-linear"):
            raise ParameterError(f"unknown flavor {self.flavor!r}")
        if len(self.coeffs) != self.d + 1:
            raise ParameterError(
                f"need d+1 = {self.d + 1} coefficients, got {len(self.coeffs)}")
        if self.flavor == "general-linear" and self.sampler is None:
            raise ParameterError(
                "general-linear flavor needs a subgradient sampler")


def hinge_oracle_config(d: int, beta: float) -> GradientOracleConfig:
    """Coefficients c_j = (smoothed hinge)'(j/d) for the dedicated path."""
    coeffs = bernstein_deriv_coeffs(SmoothedPlus(beta).deriv, d)
    return GradientOracleConfig(d=d, beta_smoothing=beta, flavor="hinge",
                                coeffs=coeffs)


def general_linear_oracle_config(d: int, beta: float,
                                 sampler: SubgradientSampler) -> GradientOracleConfig:
    """Coefficients c_j = (smoothed step)'(j/d - 1/2) for the general path.

    The half-shift centers the smoothed indicator so that the product
    arguments u - s + 1/2 land on the Bernstein domain around the kink; it
    also makes the hinge-through-this-path collapse onto the dedicated
    hinge coefficients exactly (the smoothed step at v - 1/2 equals the
    smoothed hinge derivative at v plus one).
    """
    coeffs = bernstein_deriv_coeffs(
        lambda v: hbeta_deriv(beta, v - 0.5), d)
    return GradientOracleConfig(d=d, beta_smoothing=beta,
                                flavor="general-linear", coeffs=coeffs,
                                sampler=sampler)


# --- gradient samples ----------------------------------------------------------


@lru_cache(maxsize=32)
def _binom_row(d: int) -> np.ndarray:
    return np.array([math.comb(d, j) for j in range(d + 1)], dtype=float)


def _check_replicas(message: ReplicaMessage, d: int):
    expect = d * (d + 1)
    if message.body_count != expect:
        raise ProtocolError(
            f"message carries {message.body_count} body replicas, the "
            f"degree-{d} oracle needs exactly {expect}")


def _block_products(args: np.ndarray, d: int) -> float:
    """sum_j C(d,j) * prod(first j of block j) * prod(1 - rest of block j).

    Block j is the slice [j*d, (j+1)*d); its first j entries enter the
    rising product and the remaining d-j the falling one, so every replica
    is consumed by exactly one factor.
    """
    binom = _binom_row(d)
    total = 0.0
    for j in range(d + 1):
        block = args[j * d:(j + 1) * d]
        total += binom[j] * np.prod(block[:j]) * np.prod(1.0 - block[j:])
    return total


def _block_products_weighted(args: np.ndarray, coeffs: np.ndarray,
                             d: int) -> float:
    binom = _binom_row(d)
    total = 0.0
    for j in range(d + 1):
        block = args[j * d:(j + 1) * d]
        total += coeffs[j] * binom[j] * np.prod(block[:j]) * np.prod(1.0 - block[j:])
    return total


def hinge_gradient_sample(w: np.ndarray, message: ReplicaMessage,
                          cfg: GradientOracleConfig,
                          rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """One gradient sample for the hinge surrogate; consumes no randomness.

    Because every replica carries independent noise and appears in exactly
    one product factor, the expectation over the noise of the returned
    vector is the Bernstein-form surrogate gradient P_d(y<w,x>) * y * x.
    """
    if cfg.flavor != "hinge":
        raise ParameterError("config is not for the hinge path")
    _check_replicas(message, cfg.d)
    u = message.body_y * (message.body_x @ np.asarray(w, dtype=float))
    total = _block_products_weighted(u, cfg.coeffs, cfg.d)
    return total * message.head_y * message.head_x


def general_linear_gradient_sample(w: np.ndarray, message: ReplicaMessage,
                                   cfg: GradientOracleConfig,
                                   rng: np.random.Generator) -> np.ndarray:
    """One gradient sample for an arbitrary convex 1-Lipschitz scalar loss.

    Draws one kink location per replica from the loss's subgradient
    mixture, forms shifted product arguments u_k - s_k + 1/2, and scales by
    the derivative range: G = [(f'(1)-f'(-1)) * sum_j c_j C(d,j) t_j r_j +
    (f'(1)+f'(-1))/2 - (f'(1)-f'(-1))/2] * y_0 * x_0. For an affine loss
    (degenerate mixture) the product term drops and the midpoint slope
    multiplies the head direction alone.
    """
    if cfg.flavor != "general-linear":
        raise ParameterError("config is not for the general-linear path")
    _check_replicas(message, cfg.d)
    sampler = cfg.sampler
    spread = sampler.upper - sampler.lower
    midpoint = 0.5 * (sampler.upper + sampler.lower)
    if sampler.degenerate:
        return midpoint * message.head_y * message.head_x
    s = sample_q_many(sampler, message.body_count, rng)
    u = message.body_y * (message.body_x @ np.asarray(w, dtype=float))
    args = u - s + 0.5
    total = _block_products_weighted(args, cfg.coeffs, cfg.d)
    scalar = spread * total + (midpoint - 0.5 * spread)
    return scalar * message.head_y * message.head_x


# --- full protocol -------------------------------------------------------------


@dataclass(frozen=True)
class LossFlavor:
    """A scalar loss with the pieces both the oracle and reporting need.

    ``scalar_loss`` and ``scalar_subgrad`` act on the margin y<w,x> and
    must be vectorized; ``sampler`` is required for the general path only.
    """

    name: str
    scalar_loss: Callable
    scalar_subgrad: Callable
    sampler: Optional[SubgradientSampler] = None


def hinge_flavor() -> LossFlavor:
    return LossFlavor(
        name="hinge",
        scalar_loss=lambda t: np.maximum(0.0, 0.5 - np.asarray(t, dtype=float)),
        scalar_subgrad=lambda t: np.where(np.asarray(t, dtype=float) < 0.5,
                                          -1.0, 0.0),
    )


def hinge_via_general_flavor() -> LossFlavor:
    base = hinge_flavor()
    return LossFlavor(name="general-linear", scalar_loss=base.scalar_loss,
                      scalar_subgrad=base.scalar_subgrad,
                      sampler=hinge_sampler())


@dataclass(frozen=True)
class GlmRunReport:
    w_priv: np.ndarray
    err_empirical: float
    baseline_err: float
    excess: float
    d: int
    d_theory: int
    beta: float
    sigma: float
    iters: int
    reals_per_player: int
    flavor: str


def empirical_risk(data: BallDataset, flavor: LossFlavor,
                   w: np.ndarray) -> float:
    margins = data.labels * (data.features @ np.asarray(w, dtype=float))
    return float(np.mean(flavor.scalar_loss(margins)))


def _encode_population(data: BallDataset, budget: PrivacyBudget, d: int,
                       rng: np.random.Generator,
                       transcript: Optional[Transcript]) -> tuple:
    """Vectorized encoding of every player; one message each."""
    n, dim = data.n, data.dim
    m = d * (d + 1)
    head_std, body_std = replica_noise_stds(budget, d)
    if head_std == 0.0:
        head_x = data.features.copy()
        head_y = data.labels.copy()
        body_x = np.repeat(data.features[:, None, :], m, axis=1)
        body_y = np.repeat(data.labels[:, None], m, axis=1)
    else:
        head_x = data.features + rng.normal(0.0, head_std, (n, dim))
        head_y = data.labels + rng.normal(0.0, head_std, n)
        body_x = data.features[:, None, :] + rng.normal(0.0, body_std,
                                                        (n, m, dim))
        body_y = data.labels[:, None] + rng.normal(0.0, body_std, (n, m))
    if transcript is not None:
        reals = (m + 1) * (dim + 1)
        transcript.add_bulk(n, reals * BITS_PER_REAL, reals)
    return head_x, head_y, body_x, body_y


def _pilot_sigma(sample_grad: Callable, dim: int, n: int,
                 rng: np.random.Generator, probes: int = 8,
                 per_probe: int = 8) -> float:
    """Crude gradient-noise scale: spread of samples at a few probe points."""
    worst = 0.0
    for _ in range(probes):
        v = rng.standard_normal(dim)
        w = v / max(1.0, np.linalg.norm(v))
        grads = np.stack([sample_grad(w, int(rng.integers(n)), rng)
                          for _ in range(per_probe)])
        centered = grads - grads.mean(axis=0)
        worst = max(worst, float(np.sqrt(np.mean(np.sum(centered ** 2,
                                                        axis=1)))))
    return worst


def glm_erm_run(data: BallDataset, flavor: LossFlavor, target_alpha: float,
                budget: PrivacyBudget, rng: np.random.Generator,
                d_cap: int = 8, iters: Optional[int] = None,
                sigma_safety: float = 4.0,
                baseline_w: Optional[np.ndarray] = None,
                transcript: Optional[Transcript] = None) -> GlmRunReport:
    """Full protocol: encode every player once, then optimize.

    The smoothing level and degree follow the accuracy target (beta =
    alpha/4, d = 2/(beta^2 alpha)) except that d is capped — the
    theoretical degree explodes cubically in 1/alpha and the report carries
    both values. The solver runs for n steps (overridable) on uniformly
    resampled player messages; resampling is sound because messages are
    sent exactly once and reused only server-side. The gradient-noise scale
    fed to the schedule is a pilot estimate inflated by ``sigma_safety``;
    conservative scales cost a constant factor in rate but keep early
    iterates from wandering when the replica products are heavy-tailed.
    """
    if not 0.0 < target_alpha <= 1.0:
        raise ParameterError(
            f"target_alpha must lie in (0, 1], got {target_alpha}")
    beta = target_alpha / 4.0
    d_theory = max(1, math.ceil(2.0 / (beta ** 2 * target_alpha)))
    d = min(d_theory, d_cap)

    if flavor.name == "hinge":
        cfg = hinge_oracle_config(d, beta)
    else:
        if flavor.sampler is None:
            raise ParameterError("general-linear flavor needs a sampler")
        cfg = general_linear_oracle_config(d, beta, flavor.sampler)

    head_x, head_y, body_x, body_y = _encode_population(
        data, budget, d, rng, transcript)

    def message(i: int) -> ReplicaMessage:
        return ReplicaMessage(head_x=head_x[i], head_y=float(head_y[i]),
                              body_x=body_x[i], body_y=body_y[i])

    def sample_grad(w, i, r):
        if cfg.flavor == "hinge":
            return hinge_gradient_sample(w, message(i), cfg, r)
        return general_linear_gradient_sample(w, message(i), cfg, r)

    n, dim = data.n, data.dim
    sigma_hat = _pilot_sigma(sample_grad, dim, n, rng)
    sigma = sigma_safety * sigma_hat
    constraint = BallConstraint.origin(dim, 1.0)
    schedule = SigmSchedule(sigma=sigma, radius=1.0,
                            smoothness=1.0 / beta, p_exponent=1)

    def oracle(w, r):
        return sample_grad(w, int(r.integers(n)), r)

    steps = iters if iters is not None else n
    w_priv = sigm_run(oracle, constraint, schedule, steps, rng)

    err = empirical_risk(data, flavor, w_priv)
    if baseline_w is None:
        from .baselines import glm_baseline
        baseline_w, _ = glm_baseline(data, flavor)
    base_err = empirical_risk(data, flavor, baseline_w)
    m = d * (d + 1)
    return GlmRunReport(
        w_priv=w_priv, err_empirical=err, baseline_err=base_err,
        excess=err - base_err, d=d, d_theory=d_theory, beta=beta,
        sigma=sigma, iters=steps,
        reals_per_player=(m + 1) * (dim + 1), flavor=flavor.name)
