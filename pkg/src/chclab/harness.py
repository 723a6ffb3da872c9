"""Convergence-study driver: sweeps, error tables, log-log rate fits.

Errors are computed exactly wherever the quantity is a deterministic
functional of the noise law (weight tables), and by Monte Carlo with common
random numbers where a spline solver is involved.  Coupling the compared
schemes through identical increments makes their difference, not their
individual variance, the quantity that is sampled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Callable, Sequence

import numpy as np

from . import canvas, fem
from .noise import NoiseGrid, sample_noise, sample_seed
from .spectral import SpectralField, decay_rates, time_discrete_trajectory
from .splines import SplineSpace

__all__ = [
    "StudyConfig",
    "ErrorRow",
    "ErrorTable",
    "fit_loglog",
    "mc_estimator",
    "det_time_study",
    "det_space_study",
    "canvas_study",
    "tdr_study",
    "sdr_study",
    "total_study",
]


def fit_loglog(params: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of ``log(values)`` against ``log(params)``.

    Returns ``(slope, slope_stderr)``; the stderr is zero for an exact power
    law.  Values must be positive and at least two points are needed.
    """
    x = np.log(np.asarray(params, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points to fit a rate")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    if x.size == 2:
        return float(slope), 0.0
    var = float(np.sum(resid**2)) / (x.size - 2) / float(np.sum((x - x.mean()) ** 2))
    return float(slope), math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class ErrorRow:
    param: float
    error: float
    method: str
    provenance: str  # "exact" or "mc"
    mc_stderr: float | None = None


@dataclass(frozen=True)
class ErrorTable:
    """Sweep results plus the fitted log-log rate.

    The rate is ``nan`` when fewer than three rows are usable or any error is
    nonpositive (degenerate zero-noise sweeps).
    """

    rows: tuple[ErrorRow, ...]
    fitted_rate: float
    rate_ci: float

    @classmethod
    def build(cls, params, errors, method: str, provenance: str, stderrs=None) -> "ErrorTable":
        stderrs = [None] * len(params) if stderrs is None else list(stderrs)
        order = np.argsort(np.asarray(params, dtype=float))
        rows = tuple(
            ErrorRow(float(params[i]), float(errors[i]), method, provenance,
                     None if stderrs[i] is None else float(stderrs[i]))
            for i in order
        )
        if provenance == "mc" and any(r.mc_stderr is None for r in rows):
            raise ValueError("Monte Carlo rows must carry a standard error")
        if len(rows) >= 3 and all(r.error > 0.0 for r in rows):
            rate, ci = fit_loglog([r.param for r in rows], [r.error for r in rows])
        else:
            rate, ci = float("nan"), float("nan")
        return cls(rows=rows, fitted_rate=rate, rate_ci=ci)

    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.rows])

    def params(self) -> np.ndarray:
        return np.array([r.param for r in self.rows])


_SWEEP = tuple[int, ...]


@dataclass(frozen=True)
class StudyConfig:
    """All dials of the study suite; defaults are the desk-scale settings."""

    T: float = 1.0
    mu: float = 0.0
    degree: int = 3
    seed: int = 1234
    samples: int = 1000
    k_cut: int = 4096
    out_dir: str = "results"
    threads: int = 0
    w0_mode: int = 1
    grid_slabs: int = 16
    grid_modes: int = 16
    det_time_steps: _SWEEP = (64, 128, 256, 512, 1024)
    det_space_steps: int = 4096
    det_space_elements: _SWEEP = (8, 16, 32, 64)
    canvas_modes_sweep: _SWEEP = (8, 16, 32, 64, 128)
    canvas_slabs_fixed: int = 4096
    canvas_slabs_sweep: _SWEEP = (16, 32, 64, 128, 256, 512, 1024, 2048, 4096)
    canvas_modes_fixed: int = 128
    tdr_steps: _SWEEP = (64, 128, 256, 512, 1024, 2048)
    sdr_steps: int = 64
    sdr_elements: _SWEEP = (8, 16, 32, 64)
    sample_elements: int = 64
    sample_steps: int = 128
    sample_points: int = 129
    sample_times: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)

    def __post_init__(self):
        for name in ("det_time_steps", "det_space_elements", "canvas_modes_sweep",
                     "canvas_slabs_sweep", "tdr_steps", "sdr_elements"):
            vals = getattr(self, name)
            object.__setattr__(self, name, tuple(int(v) for v in vals))
            if any(v <= 0 for v in getattr(self, name)):
                raise ValueError(f"{name} entries must be positive")
        object.__setattr__(self, "sample_times", tuple(float(v) for v in self.sample_times))

    @classmethod
    def from_mapping(cls, data: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise KeyError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def override(self, **kwargs) -> "StudyConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def det_time_study(cfg: StudyConfig) -> ErrorTable:
    """Discrete-in-time L2 error of the modified IMEX stepper vs the exact flow.

    Both sides are closed-form mode recurrences, so each sweep point costs a
    few vectorized operations.
    """
    _require_sweep(cfg.det_time_steps)
    w0 = SpectralField.single_mode(cfg.w0_mode)
    _, kappa = decay_rates(w0.n_modes, cfg.mu)
    errs = []
    for n_steps in cfg.det_time_steps:
        dtau = cfg.T / n_steps
        traj = time_discrete_trajectory(w0, n_steps, cfg.mu, cfg.T)
        times = dtau * np.arange(n_steps + 1)
        exact = np.exp(-np.multiply.outer(times, kappa)) * w0.coeffs
        errs.append(math.sqrt(dtau * float(np.sum((traj[1:] - exact[1:]) ** 2))))
    params = [cfg.T / n for n in cfg.det_time_steps]
    return ErrorTable.build(params, errs, "det-time", "exact")


def det_space_study(cfg: StudyConfig) -> ErrorTable:
    """Discrete-in-time L2 gap between the spline stepper and its exact-in-space
    counterpart at a fixed fine time step, swept over the mesh."""
    _require_sweep(cfg.det_space_elements)
    w0 = SpectralField.single_mode(cfg.w0_mode)
    n_steps = cfg.det_space_steps
    dtau = cfg.T / n_steps
    td = time_discrete_trajectory(w0, n_steps, cfg.mu, cfg.T)
    errs = []
    for nel in cfg.det_space_elements:
        space = SplineSpace(nel, cfg.degree)
        run = fem.imex_deterministic_run(space, w0, n_steps, cfg.mu, cfg.T)
        meter = fem.ModeErrorMeter(space, w0.n_modes)
        err_sq = meter.error_sq(run[1:].T, td[1:].T)
        errs.append(math.sqrt(dtau * float(np.sum(err_sq))))
    params = [1.0 / nel for nel in cfg.det_space_elements]
    return ErrorTable.build(params, errs, "det-space", "exact")


def canvas_study(cfg: StudyConfig) -> tuple[ErrorTable, ErrorTable]:
    """Noise-representation error, split into its two sweeps.

    The mode sweep isolates the spectral-truncation component (the slab part
    is mode-count independent up to saturation and would mask it); the slab
    sweep reports the full error, whose truncation floor is negligible at the
    fixed large mode count.
    """
    trunc_errs = []
    for modes in cfg.canvas_modes_sweep:
        grid = NoiseGrid(cfg.T, cfg.canvas_slabs_fixed, modes)
        err = canvas.canvas_error(grid, cfg.T, cfg.mu, cfg.k_cut)
        trunc_errs.append(math.sqrt(err.truncation_sq))
    modes_table = ErrorTable.build(list(cfg.canvas_modes_sweep), trunc_errs,
                                   "canvas-truncation", "exact")
    total_errs = []
    for slabs in cfg.canvas_slabs_sweep:
        grid = NoiseGrid(cfg.T, slabs, cfg.canvas_modes_fixed)
        total_errs.append(canvas.canvas_error(grid, cfg.T, cfg.mu, cfg.k_cut).rms)
    dt_table = ErrorTable.build([cfg.T / s for s in cfg.canvas_slabs_sweep], total_errs,
                                "canvas-total", "exact")
    return modes_table, dt_table


def tdr_study(cfg: StudyConfig) -> ErrorTable:
    """Worst-over-steps exact time-discretization error across a step sweep."""
    _require_sweep(cfg.tdr_steps)
    grid = NoiseGrid(cfg.T, cfg.grid_slabs, cfg.grid_modes)
    errs = [float(np.max(canvas.time_discretization_profile(grid, n, cfg.mu)))
            for n in cfg.tdr_steps]
    params = [cfg.T / n for n in cfg.tdr_steps]
    return ErrorTable.build(params, errs, "tdr", "exact")


def _sample_stack(cfg: StudyConfig, grid: NoiseGrid, n_samples: int) -> np.ndarray:
    """Increment matrices for all samples; seeds depend only on (seed, index)."""
    out = np.empty((n_samples, grid.n_slabs, grid.n_modes))
    def fill(s):
        out[s] = sample_noise(grid, sample_seed(cfg.seed, s)).increments
    _map_indices(fill, n_samples, cfg.threads)
    return out


def sdr_study(cfg: StudyConfig) -> ErrorTable:
    """Monte Carlo space-discretization error across a mesh sweep.

    For every sample the spline run and the exact-in-space stepper share the
    same increment matrix, and the same samples drive every mesh, so the
    sweep is coupled through common random numbers.  Reports the worst step.
    """
    _require_sweep(cfg.sdr_elements)
    if cfg.samples < 100:
        raise ValueError("refusing Monte Carlo with fewer than 100 samples")
    grid = NoiseGrid(cfg.T, cfg.grid_slabs, cfg.grid_modes)
    n_steps = cfg.sdr_steps
    stack = _sample_stack(cfg, grid, cfg.samples)
    spec_traj = _spectral_batch(grid, stack, n_steps, cfg.mu)  # (n_steps+1, modes, S)
    params, errs, stderrs = [], [], []
    for nel in cfg.sdr_elements:
        space = SplineSpace(nel, cfg.degree)
        forms = fem.assemble_forms(space)
        dtau = cfg.T / n_steps
        factor = (forms.mass + dtau * forms.bending).factor()
        explicit = forms.mass + (dtau * cfg.mu) * forms.grad
        loads = fem.stochastic_loads_batch(space, grid, stack, n_steps)
        meter = fem.ModeErrorMeter(space, grid.n_modes)
        u = np.zeros((space.dim, cfg.samples))
        gap_sq = np.zeros((n_steps + 1, cfg.samples))
        for m in range(1, n_steps + 1):
            u = factor.solve(explicit.matvec(u) + loads[m - 1])
            gap_sq[m] = meter.error_sq(u, spec_traj[m])
        means = gap_sq.mean(axis=1)
        worst = int(np.argmax(means))
        rms = math.sqrt(means[worst])
        se_mean = float(np.std(gap_sq[worst], ddof=1)) / math.sqrt(cfg.samples)
        params.append(1.0 / nel)
        errs.append(rms)
        stderrs.append(se_mean / (2.0 * rms) if rms > 0 else 0.0)
    return ErrorTable.build(params, errs, "sdr", "mc", stderrs)


def _spectral_batch(grid: NoiseGrid, stack: np.ndarray, n_steps: int, mu: float) -> np.ndarray:
    """IMEX mode recurrence for a stack of samples; (n_steps+1, modes, samples)."""
    from .noise import overlap_matrix

    lam, _ = decay_rates(grid.n_modes, mu)
    lam2 = lam * lam
    num = 1.0 + (grid.T / n_steps) * mu * lam2
    den = 1.0 + (grid.T / n_steps) * lam2 * lam2
    ov = overlap_matrix(grid, n_steps)
    b = np.einsum("mn,sni->msi", ov, stack) * (-(lam / grid.dt))[None, :, None]
    out = np.zeros((n_steps + 1, grid.n_modes, stack.shape[0]))
    for m in range(1, n_steps + 1):
        out[m] = (num[:, None] * out[m - 1] + b[m - 1]) / den[:, None]
    return out


def total_study(cfg: StudyConfig) -> dict:
    """Time and space error components plus their summed bound.

    The bound is the sum of the components at the finest sweep points and by
    construction is never below either one.
    """
    tdr = tdr_study(cfg)
    sdr = sdr_study(cfg)
    tdr_best = tdr.rows[0].error
    sdr_best = sdr.rows[0].error
    return {
        "tdr": tdr,
        "sdr": sdr,
        "tdr_component": tdr_best,
        "sdr_component": sdr_best,
        "total_bound": tdr_best + sdr_best,
    }


def mc_estimator(value_fn: Callable[[tuple[int, int]], float], samples: int, seed: int,
                 threads: int = 0) -> tuple[float, float]:
    """Mean of a squared-norm functional over independent sample streams.

    ``value_fn`` receives the per-sample seed (a pure function of the study
    seed and the sample index) and returns one squared L2 norm.  Returns the
    sample mean and its standard error.
    """
    if samples < 100:
        raise ValueError("refusing Monte Carlo with fewer than 100 samples")
    vals = np.empty(samples)
    def fill(s):
        vals[s] = value_fn(sample_seed(seed, s))
    _map_indices(fill, samples, threads)
    mean = float(vals.mean())
    return mean, float(np.std(vals, ddof=1)) / math.sqrt(samples)


def _map_indices(fn, count: int, threads: int) -> None:
    """Run ``fn(i)`` for every index, optionally on a thread pool.

    Each call writes only its own slot, so the result is identical for any
    thread count.
    """
    if threads == 1 or count < 2:
        for i in range(count):
            fn(i)
        return
    workers = threads if threads > 0 else None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(fn, range(count)))


def _require_sweep(values) -> None:
    if len(values) < 3:
        raise ValueError("sweep needs at least three points for a rate fit")
