"""Relaxed max-qnorm tensor completion by coordinate descent.

The objective over CP factors ``U_1, ..., U_t`` is::

    C = 1/2 (kappa (1 - mu)^2 + beta mu^2) ||M * (X - Z)||^2
        + prod_i ||U_i||_{2,inf} + frob_reg * sum_i ||U_i||_F^2

where ``X`` is the CP tensor and ``mu`` eliminates the residual slack variable
in closed form. Each factor block is updated by an accelerated proximal
gradient solve; the block's nonsmooth part is ``c_i ||U_i||_{2,inf}`` with
``c_i`` the product of the other factors' 2-to-inf norms.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .tensor_core import FactorSet, Observations, evaluate_at, mode_selector, two_inf_norm

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when the cost becomes non-finite."""


@dataclass
class SolverConfig:
    r_fit: int = 16
    kappa: float = 100.0
    beta: float = 1.0
    delta: float = 0.0
    frob_reg: float = 0.01
    outer_iters: int = 250
    inner_iters: int = 50
    inner_tol: float = 1e-7
    outer_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.r_fit < 1:
            raise ValueError(f"r_fit must be >= 1, got {self.r_fit}")
        if not self.kappa > 0 or not self.beta > 0:
            raise ValueError("kappa and beta must be positive")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.frob_reg < 0:
            raise ValueError(f"frob_reg must be >= 0, got {self.frob_reg}")
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise ValueError("iteration limits must be >= 1")

    @property
    def mu_max(self) -> float:
        return 1.0 / (1.0 + self.beta / self.kappa)

    @classmethod
    def from_text(cls, text: str) -> "SolverConfig":
        """Parse ``key = value`` lines; unknown keys are rejected."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in types:
                raise ValueError(f"line {lineno}: unknown config key {key!r}")
            kwargs[key] = int(value) if types[key] in (int, "int") else float(value)
        return cls(**kwargs)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())


@dataclass
class SolverTrace:
    """Per-outer-iteration diagnostics."""

    cost: list = field(default_factory=list)
    resid_norm: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    maxq_ub: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    converged: bool = False

    def __len__(self):
        return len(self.cost)

    def append(self, cost, resid_norm, mu, maxq_ub, seconds):
        self.cost.append(cost)
        self.resid_norm.append(resid_norm)
        self.mu.append(mu)
        self.maxq_ub.append(maxq_ub)
        self.seconds.append(seconds)

    COLUMNS = ("iter", "cost", "resid_norm", "mu", "maxq_ub", "seconds")

    def rows(self):
        for i in range(len(self)):
            yield (i + 1, self.cost[i], self.resid_norm[i], self.mu[i],
                   self.maxq_ub[i], self.seconds[i])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in self.rows():
                w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def mu(residual_norm: float, cfg: SolverConfig) -> float:
    """Closed-form slack scaling: the residual slack is ``mu * M * (X - Z)``."""
    if residual_norm <= (1.0 + cfg.beta / cfg.kappa) * cfg.delta:
        return cfg.mu_max
    return cfg.delta / residual_norm


def data_weight(m: float, cfg: SolverConfig) -> float:
    return 0.5 * (cfg.kappa * (1.0 - m) ** 2 + cfg.beta * m * m)


def _residual(f: FactorSet, obs: Observations) -> np.ndarray:
    return evaluate_at(f, obs.edges) - obs.values


def projected_cost(f: FactorSet, obs: Observations, cfg: SolverConfig) -> float:
    """Relaxed cost with the slack variable projected out; never densifies."""
    r = _residual(f, obs)
    rn2 = float(r @ r)
    m = mu(math.sqrt(rn2), cfg)
    penalty = math.prod(two_inf_norm(U) for U in f)
    frob = cfg.frob_reg * sum(float(np.sum(U * U)) for U in f)
    return data_weight(m, cfg) * rn2 + penalty + frob


def factor_gradient(f: FactorSet, obs: Observations, cfg: SolverConfig, mode: int) -> np.ndarray:
    """Gradient of the smooth part with respect to factor ``mode``.

    ``(1 - mu) kappa * MTTKRP(M * (X - Z)) + 2 frob_reg U``; this is the exact
    gradient of the projected cost (no derivative of ``mu`` is needed).
    """
    r = _residual(f, obs)
    m = mu(float(np.linalg.norm(r)), cfg)
    prod = _other_rows(f, obs.edges, mode)
    sel = mode_selector(obs.edges, mode, f.dims[mode])
    return (1.0 - m) * cfg.kappa * (sel @ (r[:, None] * prod)) + 2 * cfg.frob_reg * f[mode]


def _other_rows(f: FactorSet, edges, mode: int) -> np.ndarray:
    prod = np.ones((edges.shape[0], f.rank))
    for j, U in enumerate(f):
        if j != mode:
            prod *= U[edges[:, j]]
    return prod


def project_l21_ball(X, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{W : sum_i ||w_i|| <= radius}``.

    The shrinkage level is bracketed by bisection on
    ``omega(lam) = sum_i max(||x_i|| - lam, 0) - radius`` and then solved
    exactly on the bracketed linear piece.
    """
    X = np.asarray(X, dtype=np.float64)
    norms = np.sqrt(np.sum(X * X, axis=1))
    if norms.sum() <= radius:
        return X.copy()
    if radius <= 0:
        return np.zeros_like(X)
    lo, hi = 0.0, float(norms.max())
    scale = hi
    while hi - lo > 1e-10 * scale:
        mid = 0.5 * (lo + hi)
        if np.maximum(norms - mid, 0.0).sum() > radius:
            lo = mid
        else:
            hi = mid
    active = norms > lo
    lam = (norms[active].sum() - radius) / active.sum()
    # guard against the bracket straddling a breakpoint
    active = norms > lam
    lam = (norms[active].sum() - radius) / active.sum()
    shrink = np.zeros_like(norms)
    shrink[active] = 1.0 - lam / norms[active]
    return X * shrink[:, None]


def prox_two_inf(X, s: float) -> np.ndarray:
    """``argmin_Y 1/2 ||Y - X||_F^2 + s ||Y||_{2,inf}`` via the Moreau decomposition."""
    X = np.asarray(X, dtype=np.float64)
    if s < 0:
        raise ValueError(f"prox scale must be >= 0, got {s}")
    if s == 0:
        return X.copy()
    return X - project_l21_ball(X, s)


class _Block:
    """Smooth part of the cost restricted to one factor block."""

    def __init__(self, f: FactorSet, obs: Observations, cfg: SolverConfig, mode: int,
                 selector=None):
        self.cfg = cfg
        self.mode = mode
        self.idx = obs.edges[:, mode]
        self.values = obs.values
        self.other = _other_rows(f, obs.edges, mode)
        self.sel = selector if selector is not None else mode_selector(obs.edges, mode, f.dims[mode])
        self.c = math.prod(two_inf_norm(U) for j, U in enumerate(f) if j != mode)
        self.const_frob = cfg.frob_reg * sum(
            float(np.sum(U * U)) for j, U in enumerate(f) if j != mode
        )

    def residual(self, U):
        return np.einsum("ij,ij->i", U[self.idx], self.other) - self.values

    def value(self, U) -> float:
        r = self.residual(U)
        rn2 = float(r @ r)
        m = mu(math.sqrt(rn2), self.cfg)
        return data_weight(m, self.cfg) * rn2 + self.cfg.frob_reg * float(np.sum(U * U))

    def value_grad(self, U):
        r = self.residual(U)
        rn2 = float(r @ r)
        m = mu(math.sqrt(rn2), self.cfg)
        val = data_weight(m, self.cfg) * rn2 + self.cfg.frob_reg * float(np.sum(U * U))
        grad = (1.0 - m) * self.cfg.kappa * (self.sel @ (r[:, None] * self.other))
        return val, grad + 2 * self.cfg.frob_reg * U

    def total(self, smooth_val, U) -> float:
        return smooth_val + self.c * two_inf_norm(U) + self.const_frob


def apg_solve_factor(f: FactorSet, mode: int, obs: Observations, cfg: SolverConfig,
                     step: float = 1.0, selector=None):
    """Accelerated proximal gradient on block ``mode`` with the others fixed.

    Backtracking halves the step until the quadratic upper model holds;
    momentum restarts whenever the cost would increase, so the block cost is
    nonincreasing. Returns ``(U, step)`` where ``step`` is the last accepted
    step size (useful as a warm start).
    """
    blk = _Block(f, obs, cfg, mode, selector)
    x = np.array(f[mode], dtype=np.float64)
    fx = blk.value(x)
    Fx = blk.total(fx, x)
    if not math.isfinite(Fx):
        raise SolverError(f"non-finite cost {Fx} at start of block {mode}")
    y = x
    tk = 1.0
    for _ in range(cfg.inner_iters):
        fy, gy = blk.value_grad(y)
        while True:
            z = prox_two_inf(y - step * gy, step * blk.c)
            fz = blk.value(z)
            diff = z - y
            model = fy + float(np.sum(gy * diff)) + float(np.sum(diff * diff)) / (2 * step)
            if fz <= model + 1e-12 * max(1.0, abs(fy)):
                break
            step *= 0.5
            if step < 1e-30:
                raise SolverError(f"line search failed in block {mode}")
        Fz = blk.total(fz, z)
        if not math.isfinite(Fz):
            raise SolverError(f"non-finite cost {Fz} in block {mode}")
        if Fz > Fx:
            if y is x:
                break
            y, tk = x, 1.0
            continue
        tk1 = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        y = z + ((tk - 1.0) / tk1) * (z - x)
        x, tk = z, tk1
        rel = (Fx - Fz) / max(abs(Fx), 1e-300)
        Fx = Fz
        step *= 1.5
        if rel < cfg.inner_tol:
            break
    return x, step


def rescale_columns(f: FactorSet) -> FactorSet:
    """Equalize column norms across factors, preserving each rank-1 term.

    Column ``l`` of every factor is scaled to the geometric mean of the ``t``
    column norms; columns with a zero norm in any factor are left unchanged.
    """
    norms = np.stack([np.linalg.norm(U, axis=0) for U in f])
    ok = (norms > 0).all(axis=0)
    target = np.ones(f.rank)
    target[ok] = np.exp(np.log(norms[:, ok]).mean(axis=0))
    facs = []
    for U, nrm in zip(f, norms):
        scale = np.ones(f.rank)
        scale[ok] = target[ok] / nrm[ok]
        facs.append(U * scale)
    return FactorSet(tuple(facs))


def initial_factors(obs: Observations, cfg: SolverConfig) -> FactorSet:
    """Uniform[-1, 1] factors scaled so the masked RMS matches the observations."""
    rng = np.random.default_rng(cfg.seed)
    f = FactorSet(tuple(rng.uniform(-1.0, 1.0, size=(n, cfg.r_fit)) for n in obs.dims))
    rms_z = float(np.sqrt(np.mean(obs.values**2)))
    rms_x = float(np.sqrt(np.mean(evaluate_at(f, obs.edges) ** 2)))
    if rms_z > 0 and rms_x > 0:
        s = (rms_z / rms_x) ** (1.0 / len(obs.dims))
        f = FactorSet(tuple(U * s for U in f))
    return f


def coordinate_descent(obs: Observations, cfg: SolverConfig, init: FactorSet | None = None,
                       callback=None):
    """Minimize the relaxed cost; returns ``(factors, trace)``.

    Sweeps the modes in order, rescales columns after the first sweep, and stops
    when the relative cost change drops below ``outer_tol`` or after
    ``outer_iters`` sweeps (reported through ``trace.converged``).
    ``callback(it, factors)`` is invoked after each sweep.
    """
    if len(obs) == 0:
        raise ValueError("empty observation mask")
    f = init if init is not None else initial_factors(obs, cfg)
    if f.dims != obs.dims:
        raise ValueError(f"initial factor dims {f.dims} != observation dims {obs.dims}")
    selectors = [mode_selector(obs.edges, i, n) for i, n in enumerate(obs.dims)]
    steps = [1.0] * len(obs.dims)
    trace = SolverTrace()
    start = time.perf_counter()
    prev = projected_cost(f, obs, cfg)
    for it in range(cfg.outer_iters):
        for i in range(f.order):
            U, steps[i] = apg_solve_factor(f, i, obs, cfg, step=steps[i], selector=selectors[i])
            f = f.replace(i, U)
        if it == 0:
            f = rescale_columns(f)
        r = _residual(f, obs)
        rn = float(np.linalg.norm(r))
        cost = projected_cost(f, obs, cfg)
        trace.append(cost, rn, mu(rn, cfg), math.prod(two_inf_norm(U) for U in f),
                     time.perf_counter() - start)
        if callback is not None:
            callback(it, f)
        if not math.isfinite(cost):
            raise SolverError(f"non-finite cost at outer iteration {it + 1}")
        if it > 0 and abs(prev - cost) <= cfg.outer_tol * max(abs(prev), 1e-300):
            trace.converged = True
            break
        prev = cost
    log.debug("coordinate descent: %d iterations, converged=%s", len(trace), trace.converged)
    return f, trace
