"""Synthetic low-rank tensors, noisy sampling and completion experiment grids."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from . import maxqnorm
from .expander_graphs import random_biregular, random_regular
from .hypergraph import build_quasi_hypergraph, build_walk_hypergraph
from .solver import SolverConfig, coordinate_descent
from .tensor_core import FactorSet, Observations, evaluate_at

log = logging.getLogger(__name__)

HELDOUT_SAMPLES = 10**6

_TAGS = {"graph": 1, "truth": 2, "noise": 3, "solver": 4, "heldout": 5}


def derive_seed(master: int, tag: str, *parts: int) -> int:
    """Independent integer seed for a named stream of a grid cell."""
    ss = np.random.SeedSequence([int(master), _TAGS[tag], *(int(p) for p in parts)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def cp_inner(f: FactorSet, g: FactorSet) -> float:
    """``<evaluate(f), evaluate(g)>`` from factor Gram matrices (no densifying)."""
    G = np.ones((f.rank, g.rank))
    for U, V in zip(f, g):
        G *= U.T @ V
    return float(G.sum())


def cp_norm(f: FactorSet) -> float:
    return math.sqrt(max(cp_inner(f, f), 0.0))


def cp_difference(f: FactorSet, g: FactorSet) -> FactorSet:
    """Factors of ``evaluate(f) - evaluate(g)``."""
    facs = [np.hstack([U, V]) for U, V in zip(f, g)]
    facs[0][:, f.rank:] *= -1.0
    return FactorSet(tuple(facs))


def generalization_error(estimate: FactorSet, truth: FactorSet) -> float:
    """``||T_hat - T||_F / ||T||_F`` over all entries, computed exactly from factors."""
    return cp_norm(cp_difference(estimate, truth)) / cp_norm(truth)


def heldout_error(estimate: FactorSet, truth: FactorSet, exclude=None,
                  samples: int = HELDOUT_SAMPLES, seed: int = 0):
    """Relative error estimated on uniformly drawn unobserved entries.

    Returns ``(estimate, standard_error)``; the standard error is the delta-method
    error of the ratio estimator.
    """
    rng = np.random.default_rng(seed)
    dims = truth.dims
    idx = np.column_stack([rng.integers(0, n, size=samples) for n in dims])
    if exclude is not None and len(exclude):
        seen = np.ravel_multi_index(np.asarray(exclude).T, dims)
        keep = ~np.isin(np.ravel_multi_index(idx.T, dims), seen)
        idx = idx[keep]
    a = (evaluate_at(estimate, idx) - evaluate_at(truth, idx)) ** 2
    b = evaluate_at(truth, idx) ** 2
    ratio = a.mean() / b.mean()
    m = a.size
    cov = np.cov(np.vstack([a, b]))
    var = (cov[0, 0] - 2 * ratio * cov[0, 1] + ratio**2 * cov[1, 1]) / (m * b.mean() ** 2)
    err = math.sqrt(ratio)
    se = math.sqrt(max(var, 0.0)) / (2 * err) if err > 0 else 0.0
    return err, se


def gen_synthetic(dims, t: int | None = None, r: int = 3, seed: int = 0) -> FactorSet:
    """Random rank-``r`` CP truth with Unif[-1, 1] factors and entry RMS exactly 1.

    ``dims`` is either an int ``n`` (with ``t``) or a sequence of sizes. The
    rescaling is a single scalar applied to the first factor, computed from
    the exact Frobenius norm.
    """
    if isinstance(dims, (int, np.integer)):
        if t is None:
            raise ValueError("t is required when dims is an integer")
        dims = (int(dims),) * t
    dims = tuple(int(n) for n in dims)
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    rng = np.random.default_rng(seed)
    facs = [rng.uniform(-1.0, 1.0, size=(n, r)) for n in dims]
    f = FactorSet(tuple(facs))
    rms = cp_norm(f) / math.sqrt(math.prod(dims))
    facs[0] = facs[0] / rms
    return FactorSet(tuple(facs))


def sample_observations(truth, edges, noise_level: float = 0.0, seed: int = 0) -> Observations:
    """Observe ``truth`` on ``edges`` with bounded additive noise.

    Noise is Unif[-a, a] with ``a = sqrt(3) * noise_level`` and is rescaled if
    its empirical RMS exceeds ``noise_level``, so the RMS budget holds exactly.
    ``truth`` is a FactorSet or a dense array / DenseTensor.
    """
    edges = np.asarray(getattr(edges, "edges", edges), dtype=np.int64)
    if isinstance(truth, FactorSet):
        dims = truth.dims
        vals = evaluate_at(truth, edges)
    else:
        arr = np.asarray(getattr(truth, "values", truth))
        dims = arr.shape
        vals = arr[tuple(edges.T)]
    if noise_level > 0:
        rng = np.random.default_rng(seed)
        nu = rng.uniform(-1.0, 1.0, size=vals.size) * math.sqrt(3) * noise_level
        rms = math.sqrt(float(np.mean(nu**2)))
        if rms > noise_level:
            nu *= noise_level / rms
        vals = vals + nu
    return Observations(dims, edges, vals)


@dataclass
class ExperimentSpec:
    """Grid definition. ``chain`` (if set) replaces the regular ``n``/``d`` construction:
    ``{"dims": [n_1, ..., n_t], "degrees": [[d_1, d_2], ...]}``."""

    n: int = 40
    t: int = 3
    r_truth: int = 3
    d: list = field(default_factory=lambda: [11])
    r_fit: list = field(default_factory=lambda: [16])
    seeds: list = field(default_factory=lambda: [0])
    delta_coeff: float = 0.05
    noise_level: float = 0.0
    solver: dict = field(default_factory=dict)
    chain: dict | None = None
    output: str | None = None

    def __post_init__(self):
        if isinstance(self.d, int):
            self.d = [self.d]
        if isinstance(self.r_fit, int):
            self.r_fit = [self.r_fit]
        if isinstance(self.seeds, int):
            self.seeds = [self.seeds]
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if min(self.n, self.t, self.r_truth, *self.d, *self.r_fit) < 1:
            raise ValueError("sizes, degrees and ranks must be positive")
        if self.t < 2:
            raise ValueError("t must be >= 2")
        if self.delta_coeff < 0 or self.noise_level < 0:
            raise ValueError("delta_coeff and noise_level must be >= 0")
        unknown = set(self.solver) - {f.name for f in fields(SolverConfig)}
        if unknown:
            raise ValueError(f"unknown solver overrides: {sorted(unknown)}")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        data = json.loads(text)
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**data)

    def cells(self):
        """Grid cells in deterministic order: ``(index, d, r_fit, seed)``."""
        ds = [None] if self.chain else self.d
        for k, (d, rf, s) in enumerate(itertools.product(ds, self.r_fit, self.seeds)):
            yield k, d, rf, s


RESULT_COLUMNS = (
    "n", "t", "d", "r_fit", "seed", "num_edges", "lambda", "gen_error", "mse",
    "maxq_ub_truth", "maxq_ub_est", "thm_rhs", "noise_level", "delta_rms",
    "iters", "converged", "final_resid", "seconds", "error",
)


@dataclass
class ResultRow:
    n: str
    t: int
    d: str
    r_fit: int
    seed: int
    num_edges: int = 0
    lam: float = float("nan")
    gen_error: float = float("nan")
    mse: float = float("nan")
    maxq_ub_truth: float = float("nan")
    maxq_ub_est: float = float("nan")
    thm_rhs: float = float("nan")
    noise_level: float = 0.0
    delta_rms: float = 0.0
    iters: int = 0
    converged: bool = False
    final_resid: float = float("nan")
    seconds: float = 0.0
    error: str = ""
    regular: bool = True

    def as_csv(self) -> list:
        def num(x):
            return repr(float(x))
        return [self.n, self.t, self.d, self.r_fit, self.seed, self.num_edges, num(self.lam),
                num(self.gen_error), num(self.mse), num(self.maxq_ub_truth),
                num(self.maxq_ub_est), num(self.thm_rhs), num(self.noise_level),
                num(self.delta_rms), self.iters, int(self.converged), num(self.final_resid),
                f"{self.seconds:.3f}", self.error]


def verify_error_bound(row: ResultRow) -> bool:
    """Check ``MSE <= thm_rhs`` (+ ``4 delta^2`` for noisy runs).

    ``thm_rhs`` already holds the regular or chain spectral bound evaluated at
    the truth's certified max-qnorm upper bound.
    """
    if row.error:
        return False
    extra = 4.0 * row.delta_rms**2 if row.noise_level > 0 else 0.0
    return row.mse <= row.thm_rhs + extra


def _build_hypergraph(spec: ExperimentSpec, d, seed: int):
    if spec.chain:
        dims = [int(x) for x in spec.chain["dims"]]
        degs = [tuple(int(x) for x in p) for p in spec.chain["degrees"]]
        if len(degs) != len(dims) - 1 or len(dims) != spec.t:
            raise ValueError("chain spec must have t dims and t-1 degree pairs")
        links = [
            random_biregular(dims[i], dims[i + 1], d1, d2,
                             derive_seed(seed, "graph", i, dims[i], d1, d2))
            for i, (d1, d2) in enumerate(degs)
        ]
        return build_quasi_hypergraph(links)
    G = random_regular(spec.n, d, derive_seed(seed, "graph", spec.n, d))
    return build_walk_hypergraph(G, spec.t)


def run_cell(spec: ExperimentSpec, d, r_fit: int, seed: int, trace_out: list | None = None) -> ResultRow:
    """Graph -> hypergraph -> sample -> solve -> error for one grid cell."""
    regular = not spec.chain
    dims_label = "x".join(str(x) for x in spec.chain["dims"]) if spec.chain else str(spec.n)
    d_label = (";".join(f"{a},{b}" for a, b in spec.chain["degrees"]) if spec.chain else str(d))
    row = ResultRow(n=dims_label, t=spec.t, d=d_label, r_fit=r_fit, seed=seed,
                    noise_level=spec.noise_level, delta_rms=spec.delta_coeff, regular=regular)
    start = time.perf_counter()
    try:
        H = _build_hypergraph(spec, d, seed)
        dims = H.dims
        truth = gen_synthetic(dims, r=spec.r_truth, seed=derive_seed(seed, "truth", *dims, spec.r_truth))
        edges = H.edges()
        obs = sample_observations(truth, edges, spec.noise_level,
                                  derive_seed(seed, "noise", *dims, r_fit, 0 if d is None else d))
        cfg = SolverConfig(**{
            "r_fit": r_fit,
            "delta": spec.delta_coeff * math.sqrt(len(edges)),
            "seed": derive_seed(seed, "solver", r_fit, 0 if d is None else d),
            **spec.solver,
        })
        est, trace = coordinate_descent(obs, cfg)
        if trace_out is not None:
            trace_out.append(trace)
        row.num_edges = len(edges)
        row.gen_error = generalization_error(est, truth)
        row.mse = row.gen_error**2 * cp_inner(truth, truth) / math.prod(dims)
        row.maxq_ub_truth = maxqnorm.maxqnorm_upper(truth)
        row.maxq_ub_est = maxqnorm.maxqnorm_upper(est)
        if regular:
            row.lam = H.base.lambda2
            row.thm_rhs = maxqnorm.error_bound_rhs(spec.t, row.maxq_ub_truth, row.lam, d)
        else:
            lams = [g.lambda2 for g in H.chain]
            row.lam = max(lams)
            row.thm_rhs = maxqnorm.error_bound_rhs_quasi(row.maxq_ub_truth, lams, H.degree_params)
        row.iters = len(trace)
        row.converged = trace.converged
        row.final_resid = trace.resid_norm[-1]
    except Exception as exc:  # recorded per cell, the grid keeps going
        log.warning("cell d=%s r_fit=%s seed=%s failed: %s", d, r_fit, seed, exc)
        row.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    row.seconds = time.perf_counter() - start
    return row


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list:
    """Run every grid cell (optionally in worker processes); rows follow cell order."""
    tasks = [(spec, d, rf, s) for _, d, rf, s in spec.cells()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_args, tasks))
    else:
        rows = [_run_cell_args(task) for task in tasks]
    if spec.output:
        write_results(rows, spec.output)
        write_summary(summarize(rows), str(spec.output) + ".summary.csv")
    return rows


def summarize(rows: Sequence[ResultRow]) -> list:
    """Mean and standard error of the generalization error per ``(d, r_fit)``."""
    groups: dict = {}
    for row in rows:
        groups.setdefault((row.d, row.r_fit), []).append(row)
    out = []
    for (d, rf), members in groups.items():
        errs = np.array([m.gen_error for m in members if not m.error])
        mean = float(errs.mean()) if errs.size else float("nan")
        se = float(errs.std(ddof=1) / math.sqrt(errs.size)) if errs.size > 1 else 0.0
        out.append({"d": d, "r_fit": rf, "runs": errs.size,
                    "failed": len(members) - errs.size, "mean_gen_error": mean,
                    "se_gen_error": se})
    return out


def write_results(rows: Sequence[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for row in rows:
            w.writerow(row.as_csv())


def write_summary(summary: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["d", "r_fit", "runs", "failed", "mean_gen_error", "se_gen_error"]
        w.writerow(cols)
        for s in summary:
            w.writerow([s[c] if not isinstance(s[c], float) else repr(s[c]) for c in cols])


def sample_complexity_report(t: int, r: int, eps: float, num_edges: int | None = None,
                             n: int | None = None) -> dict:
    """The r- and eps-dependent factor of the O(n r^(2(t-1)(t^2-t-1)) / eps^(2(t-1)))
    sample-size bound, next to the number of samples actually used."""
    factor = maxqnorm.sample_complexity_factor(t, r, eps)
    report = {"t": t, "r": r, "eps": eps, "factor": factor,
              "r_exponent": 2 * (t - 1) * (t * t - t - 1), "eps_exponent": -2 * (t - 1),
              "note": "big-O constant omitted"}
    if n is not None:
        report["n_times_factor"] = n * factor
    if num_edges is not None:
        report["num_edges_used"] = num_edges
    return report
