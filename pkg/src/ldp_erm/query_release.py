"""Non-interactive private release of query classes.

Two mechanisms, one shape: every player expands their record into a bounded
coefficient/basis vector, the server privately averages the vectors once,
and afterwards any query in the class is answered offline by evaluating or
dotting the released table — no further player contact.

* Marginals: monotone k-way disjunctions over bit vectors. The record is
  expanded through a low-degree polynomial that approximates OR on counts,
  composed with the sum of selected bits and re-expanded into multinomial
  coefficients.
* Smooth queries: records in [-1,1]^p are expanded in a tensor Chebyshev
  basis; each smooth query is answered by its own tensor Chebyshev
  coefficients against the same released table.
"""

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft

from .errors import (ConfigurationError, ParameterError, QueryClassError,
                     SampleSizeWarning)
from .polyapprox import OrPolynomial, build_or_polynomial, chebyshev_eval
from .primitives import BITS_PER_REAL, PrivacyBudget, Transcript

# --- datasets -------------------------------------------------------------------


@dataclass(frozen=True)
class BinaryDataset:
    """Rows of bits, one player per row."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ParameterError(
                f"dataset must be a non-empty 2-d array, got {rows.shape}")
        if not np.isin(rows, (0, 1)).all():
            raise ParameterError("entries must be bits")
        object.__setattr__(self, "rows", rows.astype(np.int64))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class BoxDataset:
    """Rows in [-1, 1]^p, one player per row."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ParameterError(
                f"dataset must be a non-empty 2-d array, got {rows.shape}")
        if np.abs(rows).max() > 1.0 + 1e-12:
            raise ParameterError("entries must lie in [-1, 1]")
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class QueryAnswer:
    """A released answer: the raw estimate plus the reported (clamped) one."""

    raw: float
    value: float


# --- marginals ---------------------------------------------------------------


@lru_cache(maxsize=32)
def _multi_indices(p: int, deg: int) -> np.ndarray:
    """All exponent vectors in N^p with total degree <= deg, fixed order."""
    out = []

    def rec(prefix, remaining):
        if len(prefix) == p:
            out.append(prefix)
            return
        for a in range(remaining + 1):
            rec(prefix + (a,), remaining - a)

    rec((), deg)
    return np.array(out, dtype=np.int64)


def _multinomial_factors(alphas: np.ndarray) -> np.ndarray:
    """|alpha|! / prod(alpha_j!) for each exponent vector."""
    totals = alphas.sum(axis=1)
    out = np.empty(len(alphas))
    for i, (alpha, tot) in enumerate(zip(alphas, totals)):
        denom = 1
        for a in alpha:
            denom *= math.factorial(int(a))
        out[i] = math.factorial(int(tot)) / denom
    return out


def _support_masks(alphas: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(alphas.shape[1], dtype=np.int64)
    return ((alphas > 0) * weights).sum(axis=1)


@dataclass(frozen=True, eq=False)
class MarginalCoefficientTable:
    """Released multinomial coefficients of the averaged record expansions."""

    values: np.ndarray
    alphas: np.ndarray
    p: int
    k: int
    t_k: int
    gamma: float
    bound: float  # per-coordinate magnitude bound used for the noise

    @property
    def dimension(self) -> int:
        return len(self.values)


def _expansion_pieces(p: int, orpoly: OrPolynomial, dim_cap: int):
    dim = math.comb(p + orpoly.degree, orpoly.degree)
    if dim > dim_cap:
        raise ConfigurationError(
            f"marginal expansion needs C({p}+{orpoly.degree},{orpoly.degree}) "
            f"= {dim} coefficients, above the cap {dim_cap}")
    alphas = _multi_indices(p, orpoly.degree)
    factors = _multinomial_factors(alphas)
    per_alpha = orpoly.coeffs[alphas.sum(axis=1)] * factors
    return alphas, per_alpha


def marginals_player_expand(row: np.ndarray, orpoly: OrPolynomial,
                            dim_cap: int = 200_000) -> np.ndarray:
    """Coefficient vector of p_k(sum_j y_j row_j) as a polynomial in y.

    By the multinomial theorem the y^alpha coefficient is
    a_{|alpha|} * |alpha|!/prod(alpha_j!) when supp(alpha) is inside the
    row's support and 0 otherwise, where a_m are the monomial coefficients
    of the count polynomial.
    """
    row = np.asarray(row)
    p = row.shape[0]
    alphas, per_alpha = _expansion_pieces(p, orpoly, dim_cap)
    row_mask = int(((row > 0) * (1 << np.arange(p, dtype=np.int64))).sum())
    amask = _support_masks(alphas)
    inside = (amask & ~row_mask) == 0
    return np.where(inside, per_alpha, 0.0)


def evaluate_expansion(coeffs: np.ndarray, alphas: np.ndarray,
                       y: np.ndarray) -> float:
    """Evaluate a multinomial coefficient vector at an arbitrary point."""
    y = np.asarray(y, dtype=float)
    powers = np.prod(y[None, :] ** alphas, axis=1)
    return float(coeffs @ powers)


def coefficient_bound(orpoly: OrPolynomial, p: int,
                      dim_cap: int = 200_000) -> float:
    """Largest possible |coefficient| over any record — a public quantity."""
    _, per_alpha = _expansion_pieces(p, orpoly, dim_cap)
    return float(np.max(np.abs(per_alpha)))


def _guarantee_n_floor(p: int, k: int, gamma: float, epsilon: float,
                       fail_prob: float = 0.05) -> float:
    # shape of the accuracy guarantee's sample-size requirement with its
    # unspecified constants set to 1
    growth = p ** (math.sqrt(k) * math.log(1.0 / gamma))
    log_term = math.log(1.0 / fail_prob)
    return max(growth * log_term / (epsilon ** 2 * gamma ** 2),
               log_term / epsilon ** 2,
               growth * log_term)


def _private_column_means(values: np.ndarray, bound: float,
                          budget: PrivacyBudget,
                          rng: np.random.Generator) -> np.ndarray:
    """Laplace-noised per-column means of an (n, D) matrix in [0, bound]."""
    if values.min() < -1e-9 or values.max() > bound + 1e-9:
        raise ParameterError(
            f"values outside [0, {bound}] cannot be averaged at this bound")
    if budget.noiseless:
        return values.mean(axis=0)
    noisy = values + rng.laplace(0.0, bound / budget.epsilon, values.shape)
    return noisy.mean(axis=0)


def marginals_release(data: BinaryDataset, k: int, gamma: float,
                      budget: PrivacyBudget, rng: np.random.Generator,
                      dim_cap: int = 200_000, split_budget: bool = False,
                      transcript: Optional[Transcript] = None) -> MarginalCoefficientTable:
    """Privately average the players' expansion vectors.

    Each player sends their whole coefficient vector once; every coordinate
    is averaged with Laplace noise calibrated to the constructed
    polynomial's true maximum coefficient magnitude (a public quantity),
    not the loose asymptotic bound. By default each coordinate is noised at
    the full budget (the vector release analyzed as a single mechanism);
    ``split_budget=True`` instead divides the budget across the vector for
    a conservative composed guarantee.
    """
    if not 1 <= k <= data.dim:
        raise ParameterError(f"need 1 <= k <= p, got k={k}, p={data.dim}")
    orpoly = build_or_polynomial(k, gamma)
    p = data.dim
    alphas, per_alpha = _expansion_pieces(p, orpoly, dim_cap)
    dim = len(alphas)
    floor = _guarantee_n_floor(p, k, gamma, budget.epsilon)
    if data.n < floor:
        warnings.warn(
            f"n = {data.n} is below the accuracy guarantee's sample-size "
            f"shape (~{floor:.2e}); released answers may be noisy",
            SampleSizeWarning, stacklevel=2)

    amask = _support_masks(alphas)
    weights = 1 << np.arange(p, dtype=np.int64)
    row_masks = (data.rows * weights).sum(axis=1)
    inside = (amask[None, :] & ~row_masks[:, None]) == 0
    matrix = np.where(inside, per_alpha[None, :], 0.0)

    b = float(np.max(np.abs(per_alpha)))
    sub_budget = budget.split(dim) if split_budget else budget
    means = _private_column_means(matrix + b, 2.0 * b, sub_budget, rng) - b
    if transcript is not None:
        transcript.add_bulk(data.n, dim * BITS_PER_REAL, dim)
    return MarginalCoefficientTable(values=means, alphas=alphas, p=p, k=k,
                                    t_k=orpoly.degree, gamma=gamma, bound=b)


def marginals_answer(table: MarginalCoefficientTable,
                     y: np.ndarray) -> QueryAnswer:
    """Answer one disjunction query from the released table.

    For a bit vector y the monomial y^alpha is 1 exactly when supp(alpha)
    is inside supp(y), so the answer is a masked coefficient sum. Queries
    with more than k selected attributes are outside the class the
    polynomial was built for and are rejected.
    """
    y = np.asarray(y)
    if y.shape != (table.p,):
        raise ParameterError(f"query has shape {y.shape}, expected ({table.p},)")
    support = int(np.count_nonzero(y))
    if support > table.k:
        raise QueryClassError(
            f"query selects {support} attributes but the release only "
            f"covers up to k = {table.k}")
    weights = 1 << np.arange(table.p, dtype=np.int64)
    ymask = int(((y > 0) * weights).sum())
    amask = _support_masks(table.alphas)
    raw = float(table.values[(amask & ~ymask) == 0].sum())
    return QueryAnswer(raw=raw, value=float(np.clip(raw, 0.0, 1.0)))


def disjunction_truth(data: BinaryDataset, y: np.ndarray) -> float:
    """Exact fraction of rows with at least one selected bit set."""
    y = np.asarray(y)
    sel = np.flatnonzero(y)
    if len(sel) == 0:
        return 0.0
    return float(np.mean(data.rows[:, sel].any(axis=1)))


# --- smooth queries ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CosineCoefficientTable:
    """Released tensor Chebyshev basis averages, indexed by {0..t-1}^p."""

    values: np.ndarray
    p: int
    t: int

    @property
    def dimension(self) -> int:
        return len(self.values)


def _check_basis_cap(t: int, p: int, cap: int) -> int:
    if t < 1:
        raise ParameterError(f"degree bound t must be >= 1, got {t}")
    dim = t ** p
    if dim > cap:
        raise ConfigurationError(
            f"basis needs t^p = {dim} entries, above the cap {cap}")
    return dim


def _basis_matrix(rows: np.ndarray, t: int, cap: int) -> np.ndarray:
    """(n, t^p) matrix of products of per-axis Chebyshev values."""
    n, p = rows.shape
    _check_basis_cap(t, p, cap)
    cur = np.ones((n, 1))
    for j in range(p):
        vj = np.stack([chebyshev_eval(r, rows[:, j]) for r in range(t)],
                      axis=1)
        cur = (cur[:, :, None] * vj[:, None, :]).reshape(n, -1)
    return cur


def smooth_player_basis(row: np.ndarray, t: int,
                        cap: int = 200_000) -> np.ndarray:
    """One player's basis vector: products T_{v_1}(x_1)...T_{v_p}(x_p)."""
    row = np.atleast_1d(np.asarray(row, dtype=float))
    return _basis_matrix(row[None, :], t, cap)[0]


def smooth_query_coefficients(f: Callable, t: int, p: int,
                              cap: int = 200_000) -> np.ndarray:
    """Tensor Chebyshev coefficients of f by nested cosine quadrature.

    Evaluates f on the p-fold grid of the t first-kind Chebyshev nodes per
    axis and applies a type-II cosine transform along every axis; exact for
    polynomials of per-axis degree below t, and near-minimax for smooth f.
    Returns the flattened (C-order) coefficient vector aligned with the
    released basis table.
    """
    dim = _check_basis_cap(t, p, cap)
    nodes = np.cos(np.pi * (np.arange(t) + 0.5) / t)
    mesh = np.meshgrid(*([nodes] * p), indexing="ij")
    pts = np.stack(mesh, axis=-1).reshape(-1, p)
    vals = np.asarray(f(pts), dtype=float)
    if vals.shape != (dim,):
        vals = np.array([float(f(pt)) for pt in pts])
    grid = vals.reshape((t,) * p)
    coef = scipy.fft.dctn(grid, type=2) / (t ** p)
    for axis in range(p):
        sl = [slice(None)] * p
        sl[axis] = 0
        coef[tuple(sl)] /= 2.0
    return coef.reshape(-1)


def smooth_release(data: BoxDataset, t: int, budget: PrivacyBudget,
                   rng: np.random.Generator, cap: int = 200_000,
                   transcript: Optional[Transcript] = None) -> CosineCoefficientTable:
    """Privately average every player's basis vector (one message each).

    Basis values live in [-1, 1]; they are shifted to [0, 1] for the
    averaging primitive and shifted back, which leaves the noise scale
    matching a sensitivity-1 release per coordinate at the full budget.
    """
    basis = _basis_matrix(data.rows, t, cap)
    means01 = _private_column_means((basis + 1.0) / 2.0, 1.0, budget, rng)
    if transcript is not None:
        dim = basis.shape[1]
        transcript.add_bulk(data.n, dim * BITS_PER_REAL, dim)
    return CosineCoefficientTable(values=2.0 * means01 - 1.0, p=data.dim, t=t)


def answer_smooth_query(table: CosineCoefficientTable,
                        f: Callable, cap: int = 200_000) -> QueryAnswer:
    """Answer one smooth query offline from the released table."""
    coeffs = smooth_query_coefficients(f, table.t, table.p, cap)
    raw = float(table.values @ coeffs)
    return QueryAnswer(raw=raw, value=raw)


def smooth_release_and_answer(data: BoxDataset, t: int,
                              budget: PrivacyBudget,
                              queries: Sequence[Callable],
                              rng: np.random.Generator,
                              cap: int = 200_000,
                              transcript: Optional[Transcript] = None):
    """One private release, then every query answered from it."""
    table = smooth_release(data, t, budget, rng, cap, transcript)
    return table, [answer_smooth_query(table, f, cap) for f in queries]


def recommended_t(n: int, p: int, h: int, epsilon: float) -> int:
    """Heuristic per-axis degree bound (sqrt(n) eps)^(2/(5p+2h))."""
    if n < 1 or p < 1 or h < 1 or not epsilon > 0:
        raise ParameterError("need n, p, h >= 1 and epsilon > 0")
    return max(1, round((math.sqrt(n) * epsilon) ** (2.0 / (5 * p + 2 * h))))


# --- release files --------------------------------------------------------------


def write_release_csv(path, mechanism: str, table, epsilon: float, n: int,
                      seed: int):
    """Header (mechanism, p, order, gamma, epsilon, n, seed) + coefficients."""
    if isinstance(table, MarginalCoefficientTable):
        order, gamma = table.k, table.gamma
    else:
        order, gamma = table.t, ""
    lines = ["mechanism,p,order,gamma,epsilon,n,seed",
             f"{mechanism},{table.p},{order},{gamma},{epsilon},{n},{seed}",
             "index,coefficient"]
    lines += [f"{i},{v!r}" for i, v in enumerate(table.values)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_answers_csv(path, answers: Sequence[tuple]):
    """Rows of (query_id, QueryAnswer) as query_id,answer,raw_answer."""
    lines = ["query_id,answer,raw_answer"]
    lines += [f"{qid},{ans.value!r},{ans.raw!r}" for qid, ans in answers]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
