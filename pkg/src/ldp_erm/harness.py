"""Experiment orchestration: configs, sweeps, trials, and CSV reports.

A run is a mechanism name plus a dataset spec, fixed parameters, optional
sweep grids, and a trial count. Every (sweep cell, trial) pair executes
independently on its own derived RNG stream, so results are identical no
matter how many workers execute them or in which order. Reports are plain
CSV with one fixed superset schema across mechanisms; wall-clock numbers go
to a separate log so the CSVs stay byte-reproducible.
"""

import itertools
import json
import os
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import __version__
from .bernstein_erm import (CubeDataset, GridProtocolConfig, alg2_run,
                            alg3_run)
from .errors import ConfigurationError
from .geometry import BoxConstraint
from .glm_erm import glm_erm_run, hinge_flavor, hinge_via_general_flavor
from .polyapprox import BernsteinOperatorSpec
from .primitives import PrivacyBudget, Transcript, ldp_avg_1d
from .query_release import (BinaryDataset, BoxDataset, disjunction_truth,
                            marginals_answer, marginals_release,
                            smooth_release_and_answer)
from .datasets import generate_dataset
from .rng import TAG_TRIAL, derived_rng, derived_seed

MECHANISMS = ("bernstein", "onebit", "hinge", "general-linear", "marginals",
              "smooth-queries", "avg-bench")

REPORT_COLUMNS = [
    "trial", "mechanism", "family", "n", "p", "k", "h", "d", "t", "beta",
    "gamma", "epsilon", "delta", "mode", "flavor", "err_empirical",
    "baseline_err", "max_query_error", "bits_per_player",
    "reals_per_player", "seed", "status", "error",
]

TRANSCRIPT_COLUMNS = ["trial", "mechanism", "n", "messages",
                      "bits_per_player", "reals_per_player"]

_FAMILY_FOR = {
    "bernstein": ("uniform-cube", "file"),
    "onebit": ("uniform-cube", "file"),
    "hinge": ("separable-two-class", "file"),
    "general-linear": ("separable-two-class", "file"),
    "marginals": ("bernoulli-bits", "file"),
    "smooth-queries": ("gaussian-ball-clipped", "uniform-cube", "file"),
    "avg-bench": ("uniform-cube", "file"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    mechanism: str
    dataset: dict
    params: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    trials: int = 20
    seed: int = 0
    out: Optional[str] = None
    workers: Optional[int] = None

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ConfigurationError(
                f"unknown mechanism {self.mechanism!r}; known: "
                f"{', '.join(MECHANISMS)}")
        if self.trials < 0:
            raise ConfigurationError(f"trials must be >= 0, got {self.trials}")
        family = self.dataset.get("family")
        allowed = _FAMILY_FOR[self.mechanism]
        if family not in allowed:
            raise ConfigurationError(
                f"mechanism {self.mechanism!r} expects a dataset family in "
                f"{allowed}, got {family!r}")


def load_config(path: str, mechanism: Optional[str] = None) -> ExperimentConfig:
    """Read a config (or a previous run's manifest — same shape) from JSON."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    known = {"mechanism", "dataset", "params", "sweep", "trials", "seed",
             "out", "workers"}
    fields = {k: v for k, v in raw.items() if k in known}
    if mechanism is not None:
        fields["mechanism"] = mechanism
    if "mechanism" not in fields:
        raise ConfigurationError("config does not name a mechanism")
    if "dataset" not in fields:
        raise ConfigurationError("config does not define a dataset")
    return ExperimentConfig(**fields)


def apply_set_overrides(cfg: ExperimentConfig, sets) -> ExperimentConfig:
    """Apply dotted key=value overrides, e.g. params.epsilon=0.5."""
    mut = {"dataset": dict(cfg.dataset), "params": dict(cfg.params),
           "sweep": dict(cfg.sweep)}
    for item in sets or ():
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        key, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        head, _, tail = key.partition(".")
        if head in mut and tail:
            mut[head][tail] = value
        elif head in ("trials", "seed"):
            mut[head] = int(value)
        elif head in ("out", "mechanism"):
            mut[head] = str(value)
        elif head == "workers":
            mut[head] = int(value)
        else:
            raise ConfigurationError(f"cannot override {key!r}")
    return replace(cfg, **mut)


# --- grid-mechanism losses -----------------------------------------------------

GRID_LOSSES = ("quadratic", "quartic", "flat")


def make_grid_loss(name: str):
    if name == "quadratic":
        return lambda theta, rows: ((rows - theta) ** 2).mean(axis=1)
    if name == "quartic":
        return lambda theta, rows: ((rows - theta) ** 4).mean(axis=1)
    if name == "flat":
        return lambda theta, rows: np.full(rows.shape[0], 0.5)
    raise ConfigurationError(
        f"unknown grid loss {name!r}; known: {', '.join(GRID_LOSSES)}")


def _coordinate_objectives(name: str, rows: np.ndarray):
    """Per-coordinate polynomial objectives from data moments.

    Both named losses are separable across coordinates and polynomial in
    theta, so the empirical objective is exact in the coordinate-wise
    moments and costs O(1) per evaluation afterwards.
    """
    m1 = rows.mean(axis=0)
    m2 = (rows ** 2).mean(axis=0)
    if name == "quadratic":
        def gj(theta_j, j):
            return theta_j ** 2 - 2.0 * theta_j * m1[j] + m2[j]
        return gj
    m3 = (rows ** 3).mean(axis=0)
    m4 = (rows ** 4).mean(axis=0)

    def gj(theta_j, j):
        return (theta_j ** 4 - 4.0 * theta_j ** 3 * m1[j]
                + 6.0 * theta_j ** 2 * m2[j] - 4.0 * theta_j * m3[j] + m4[j])
    return gj


def grid_loss_excess(name: str, data: CubeDataset, w: np.ndarray) -> float:
    """Excess empirical risk of w against the separable exact optimum."""
    if name == "flat":
        return 0.0
    gj = _coordinate_objectives(name, data.rows)
    p = data.dim
    axis = np.linspace(0.0, 1.0, 100_001)
    value = 0.0
    best = 0.0
    for j in range(p):
        value += float(gj(float(w[j]), j))
        best += float(np.min(gj(axis, j)))
    return (value - best) / p


# --- per-trial executors --------------------------------------------------------


def _float(x) -> float:
    return float(x)


def _trial_bernstein(cfg: ExperimentConfig, params: dict, seed: int,
                     onebit: bool) -> tuple:
    data = generate_dataset(params["dataset"], derived_seed(seed, 1))
    if not isinstance(data, CubeDataset):
        raise ConfigurationError("grid mechanisms need cube data")
    loss_name = params.get("loss", "quadratic")
    loss = make_grid_loss(loss_name)
    k, h = int(params.get("k", 8)), int(params.get("h", 1))
    spec = BernsteinOperatorSpec(k=k, h=h, p=data.dim)
    epsilon = _float(params.get("epsilon", 1.0))
    budget = PrivacyBudget(epsilon=epsilon)
    gcfg = GridProtocolConfig(
        spec=spec, budget=budget,
        constraint=BoxConstraint(0.0, 1.0, data.dim),
        grid_cap=int(params.get("grid_cap", 200_000)))
    transcript = Transcript()
    if onebit:
        release = alg3_run(data, loss, gcfg, derived_seed(seed, 2),
                           transcript=transcript)
        mode = "onebit"
    else:
        release = alg2_run(data, loss, gcfg, derived_rng(seed, 2),
                           transcript=transcript)
        mode = "laplace"
    err = grid_loss_excess(loss_name, data, release.w_priv)
    row = {"n": data.n, "p": data.dim, "k": k, "h": h, "epsilon": epsilon,
           "mode": mode, "err_empirical": err,
           "bits_per_player": transcript.bits_per_player()}
    return row, transcript


def _trial_glm(cfg: ExperimentConfig, params: dict, seed: int,
               general: bool) -> tuple:
    data = generate_dataset(params["dataset"], derived_seed(seed, 1))
    flavor = hinge_via_general_flavor() if general else hinge_flavor()
    epsilon = _float(params.get("epsilon", 1.0))
    delta = _float(params.get("delta", 1e-5))
    budget = PrivacyBudget(epsilon=epsilon, delta=delta)
    transcript = Transcript()
    report = glm_erm_run(
        data, flavor,
        target_alpha=_float(params.get("target_alpha", 1.0)),
        budget=budget, rng=derived_rng(seed, 2),
        d_cap=int(params.get("d_cap", 8)),
        iters=params.get("iters"),
        sigma_safety=_float(params.get("sigma_safety", 4.0)),
        transcript=transcript)
    row = {"n": data.n, "p": data.dim, "d": report.d, "beta": report.beta,
           "epsilon": epsilon, "delta": delta, "flavor": report.flavor,
           "err_empirical": report.err_empirical,
           "baseline_err": report.baseline_err,
           "reals_per_player": report.reals_per_player}
    return row, transcript


def _all_disjunction_queries(p: int, k: int):
    for size in range(0, k + 1):
        for support in itertools.combinations(range(p), size):
            y = np.zeros(p, dtype=np.int64)
            y[list(support)] = 1
            yield y


def _trial_marginals(cfg: ExperimentConfig, params: dict, seed: int) -> tuple:
    data = generate_dataset(params["dataset"], derived_seed(seed, 1))
    if not isinstance(data, BinaryDataset):
        raise ConfigurationError("marginals need binary data")
    k = int(params.get("k", 2))
    gamma = _float(params.get("gamma", 0.05))
    epsilon = _float(params.get("epsilon", 1.0))
    budget = PrivacyBudget(epsilon=epsilon)
    transcript = Transcript()
    table = marginals_release(
        data, k, gamma, budget, derived_rng(seed, 2),
        split_budget=bool(params.get("split_budget", False)),
        transcript=transcript)
    worst = 0.0
    for y in _all_disjunction_queries(data.dim, k):
        ans = marginals_answer(table, y)
        worst = max(worst, abs(ans.value - disjunction_truth(data, y)))
    row = {"n": data.n, "p": data.dim, "k": k, "gamma": gamma,
           "epsilon": epsilon, "max_query_error": worst,
           "reals_per_player": table.dimension}
    return row, transcript


def _gaussian_kernel(center: np.ndarray, bandwidth: float):
    def f(pts):
        pts = np.asarray(pts, dtype=float)
        diff = pts - center
        return np.exp(-np.sum(diff * diff, axis=-1) / (2.0 * bandwidth ** 2))
    return f


def _trial_smooth(cfg: ExperimentConfig, params: dict, seed: int) -> tuple:
    data = generate_dataset(params["dataset"], derived_seed(seed, 1))
    if isinstance(data, CubeDataset):
        data = BoxDataset(data.rows)  # cube entries are inside the box
    if not isinstance(data, BoxDataset):
        raise ConfigurationError("smooth queries need box data")
    t = int(params.get("t", 8))
    epsilon = _float(params.get("epsilon", 1.0))
    budget = PrivacyBudget(epsilon=epsilon)
    center = np.asarray(params.get("center", [0.25] * data.dim), dtype=float)
    bandwidths = [
        _float(b) for b in params.get("bandwidths", [1.0, 0.5])]
    queries = [_gaussian_kernel(center, b) for b in bandwidths]
    transcript = Transcript()
    _, answers = smooth_release_and_answer(
        data, t, budget, queries, derived_rng(seed, 2),
        transcript=transcript)
    worst = 0.0
    for f, ans in zip(queries, answers):
        truth = float(np.mean(f(data.rows)))
        worst = max(worst, abs(ans.value - truth))
    row = {"n": data.n, "p": data.dim, "t": t, "epsilon": epsilon,
           "max_query_error": worst, "reals_per_player": t ** data.dim}
    return row, transcript


def _trial_avg_bench(cfg: ExperimentConfig, params: dict, seed: int) -> tuple:
    data = generate_dataset(params["dataset"], derived_seed(seed, 1))
    if not isinstance(data, CubeDataset) or data.dim != 1:
        raise ConfigurationError("avg-bench needs 1-d cube data")
    values = data.rows[:, 0]
    epsilon = _float(params.get("epsilon", 1.0))
    budget = PrivacyBudget(epsilon=epsilon)
    transcript = Transcript()
    a = ldp_avg_1d(values, 1.0, budget, derived_rng(seed, 2),
                   transcript=transcript)
    row = {"n": data.n, "p": 1, "epsilon": epsilon,
           "err_empirical": abs(a - float(values.mean())),
           "bits_per_player": transcript.bits_per_player()}
    return row, transcript


def run_trial(cfg: ExperimentConfig, cell_params: dict, cell_index: int,
              trial: int) -> tuple:
    """Execute one (cell, trial) on its own derived stream; never raises."""
    seed = derived_seed(cfg.seed, TAG_TRIAL, cell_index, trial)
    params = dict(cell_params)
    params["dataset"] = params.pop("_dataset")
    started = time.perf_counter()
    base = {c: "" for c in REPORT_COLUMNS}
    base.update(trial=trial, mechanism=cfg.mechanism,
                family=params["dataset"].get("family", ""), seed=seed,
                status="ok", error="")
    try:
        if cfg.mechanism in ("bernstein", "onebit"):
            row, transcript = _trial_bernstein(cfg, params, seed,
                                               cfg.mechanism == "onebit")
        elif cfg.mechanism in ("hinge", "general-linear"):
            row, transcript = _trial_glm(cfg, params, seed,
                                         cfg.mechanism == "general-linear")
        elif cfg.mechanism == "marginals":
            row, transcript = _trial_marginals(cfg, params, seed)
        elif cfg.mechanism == "smooth-queries":
            row, transcript = _trial_smooth(cfg, params, seed)
        else:
            row, transcript = _trial_avg_bench(cfg, params, seed)
        base.update(row)
        trow = {"trial": trial, "mechanism": cfg.mechanism, "n": row.get("n", ""),
                "messages": transcript.n_messages,
                "bits_per_player": transcript.bits_per_player(),
                "reals_per_player": transcript.reals_per_player()}
    except Exception as exc:  # recorded per-row; the sweep continues
        base.update(status=type(exc).__name__,
                    error=str(exc).replace(",", ";").replace("\n", " "))
        trow = {"trial": trial, "mechanism": cfg.mechanism, "n": "",
                "messages": "", "bits_per_player": "", "reals_per_player": ""}
    elapsed = time.perf_counter() - started
    return cell_index, trial, base, trow, elapsed


def _expand_sweep(cfg: ExperimentConfig):
    """Cartesian product of sweep lists merged over params/dataset."""
    keys = sorted(cfg.sweep)
    grids = []
    for key in keys:
        values = cfg.sweep[key]
        if not isinstance(values, (list, tuple)):
            raise ConfigurationError(f"sweep entry {key!r} must be a list")
        grids.append(list(values))
    cells = []
    for combo in itertools.product(*grids) if keys else [()]:
        params = dict(cfg.params)
        dataset = dict(cfg.dataset)
        for key, value in zip(keys, combo):
            if key in ("n", "dim", "margin", "q", "sigma"):
                dataset[key] = value
            else:
                params[key] = value
        params["_dataset"] = dataset
        cells.append(params)
    return cells


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_cell(row.get(c, "")) for c in columns))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


@dataclass(frozen=True)
class RunResult:
    out_dir: str
    rows: list
    failures: int
    report_path: str
    transcript_path: str
    manifest_path: str


def default_workers() -> int:
    env = os.environ.get("LDP_ERM_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(
                f"LDP_ERM_WORKERS must be an integer, got {env!r}") from None
    return 1


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Execute all sweep cells x trials and write the run artifacts.

    Trials run on independent derived streams keyed by (cell, trial), so
    worker count and scheduling order cannot change any number. Failures
    are recorded per row and the run keeps going.
    """
    out_dir = cfg.out or os.path.join("runs", cfg.mechanism)
    os.makedirs(out_dir, exist_ok=True)
    cells = _expand_sweep(cfg)
    tasks = [(cfg, cell, ci, trial)
             for ci, cell in enumerate(cells)
             for trial in range(cfg.trials)]
    workers = cfg.workers if cfg.workers is not None else default_workers()
    results = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_trial, *task) for task in tasks]
            results = [f.result() for f in futures]
    else:
        results = [run_trial(*task) for task in tasks]
    results.sort(key=lambda r: (r[0], r[1]))

    rows = [r[2] for r in results]
    trows = [r[3] for r in results]
    report_path = os.path.join(out_dir, "report.csv")
    transcript_path = os.path.join(out_dir, "transcript_summary.csv")
    manifest_path = os.path.join(out_dir, "manifest.json")
    _write_csv(report_path, REPORT_COLUMNS, rows)
    _write_csv(transcript_path, TRANSCRIPT_COLUMNS, trows)
    manifest = {
        "mechanism": cfg.mechanism, "dataset": cfg.dataset,
        "params": cfg.params, "sweep": cfg.sweep, "trials": cfg.trials,
        "seed": cfg.seed, "out": cfg.out, "workers": cfg.workers,
        "package_version": __version__, "git_describe": _git_describe(),
    }
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "timing.log"), "w", encoding="utf-8") as fh:
        total = 0.0
        for ci, trial, _, _, elapsed in results:
            fh.write(f"cell={ci} trial={trial} seconds={elapsed:.3f}\n")
            total += elapsed
        fh.write(f"total seconds={total:.3f}\n")
    failures = sum(1 for row in rows if row["status"] != "ok")
    return RunResult(out_dir=out_dir, rows=rows, failures=failures,
                     report_path=report_path, transcript_path=transcript_path,
                     manifest_path=manifest_path)
