"""Synthetic dataset families for the experiment harness.

Every family is deterministic given its seed and produces data already
satisfying the constraint-set contracts of its consumer (cube entries in
[0,1], ball norms <= 1, bits in {0,1}).
"""

import math

import numpy as np

from .bernstein_erm import CubeDataset
from .errors import ConfigurationError, ParameterError
from .glm_erm import BallDataset
from .query_release import BinaryDataset, BoxDataset
from .rng import TAG_DATASET, derived_rng

FAMILIES = ("uniform-cube", "gaussian-ball-clipped", "separable-two-class",
            "bernoulli-bits")


def separable_two_class(n: int, dim: int, margin: float,
                        rng: np.random.Generator) -> BallDataset:
    """Labelled points y(m*u + xi) with xi orthogonal to u and +-xi paired.

    Every point satisfies y<u, x> = margin, so a margin-m separator exists
    by construction. The pairing of xi with -xi makes the empirical hinge
    optimum exactly max(0, 1/2 - margin), attained at u: by convexity the
    loss averaged over a pair is at least the loss at the pair's mean
    argument, which the ball constraint keeps at or above 1/2 - margin.
    """
    if not 0.0 < margin < 1.0:
        raise ParameterError(f"margin must lie in (0, 1), got {margin}")
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    spread = math.sqrt(1.0 - margin ** 2)
    xi = np.zeros((n, dim))
    for pair in range(n // 2):
        zeta = rng.standard_normal(dim)
        zeta -= (zeta @ u) * u
        nrm = np.linalg.norm(zeta)
        if nrm > 1e-12:
            zeta *= rng.uniform(0.0, spread) / nrm
        else:
            zeta[:] = 0.0
        xi[2 * pair] = zeta
        xi[2 * pair + 1] = -zeta
    labels = rng.choice([-1.0, 1.0], size=n)
    features = labels[:, None] * (margin * u[None, :] + xi)
    return BallDataset(features=features, labels=labels)


def generate_dataset(spec: dict, seed: int):
    """Build the dataset a config names; unknown families are rejected."""
    family = spec.get("family")
    if family == "file":
        return _load_file(spec)
    if family not in FAMILIES:
        raise ConfigurationError(
            f"unknown dataset family {family!r}; known: {', '.join(FAMILIES)}")
    try:
        n = int(spec["n"])
        dim = int(spec.get("dim", 1))
    except KeyError as missing:
        raise ConfigurationError(f"dataset spec is missing {missing}") from None
    rng = derived_rng(seed, TAG_DATASET)
    if family == "uniform-cube":
        return CubeDataset(rng.random((n, dim)))
    if family == "gaussian-ball-clipped":
        sigma = float(spec.get("sigma", 0.5))
        x = rng.normal(0.0, sigma, (n, dim))
        norms = np.linalg.norm(x, axis=1)
        x *= np.minimum(1.0, 1.0 / np.maximum(norms, 1e-300))[:, None]
        return BoxDataset(x)
    if family == "separable-two-class":
        margin = float(spec.get("margin", 0.2))
        return separable_two_class(n, dim, margin, rng)
    q = float(spec.get("q", 0.5))
    if not 0.0 <= q <= 1.0:
        raise ConfigurationError(f"bit probability must be in [0, 1], got {q}")
    return BinaryDataset((rng.random((n, dim)) < q).astype(np.int64))


def _load_file(spec: dict):
    path = spec.get("path")
    kind = spec.get("kind", "cube")
    if path is None:
        raise ConfigurationError("file dataset spec needs a 'path'")
    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    if kind == "cube":
        return CubeDataset(rows)
    if kind == "box":
        return BoxDataset(rows)
    if kind == "binary":
        return BinaryDataset(rows.astype(np.int64))
    if kind == "ball":
        if rows.shape[1] < 2:
            raise ConfigurationError(
                "ball dataset files need feature columns plus a label column")
        return BallDataset(features=rows[:, :-1], labels=rows[:, -1])
    raise ConfigurationError(f"unknown dataset kind {kind!r}")
