"""Sampling and slab algebra of the finite-dimensional driving noise.

One realization of the forcing is an ``n_slabs x n_modes`` matrix of
independent N(0, dt) increments: entry ``(n, i)`` is the integral of white
noise against the i-th cosine mode over the n-th time slab.  The matrix is
the entire randomness of a sample; everything downstream is a deterministic
function of it.  On each slab the forcing applied to the equation is the
spatial derivative of the cosine expansion, i.e. a sine expansion with
coefficients ``-(lam_i / dt) * R[n, i]``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralField, decay_rates

__all__ = [
    "NoiseGrid",
    "NoiseMatrix",
    "seed_sequence",
    "sample_seed",
    "sample_noise",
    "slab_overlap",
    "overlap_matrix",
    "forcing_coefficients",
    "evaluate_noise",
    "projection_identity",
    "ProjectionIdentity",
    "save_noise",
    "load_noise",
]


@dataclass(frozen=True)
class NoiseGrid:
    """Time horizon split into ``n_slabs`` equal slabs, ``n_modes`` cosine modes."""

    T: float
    n_slabs: int
    n_modes: int

    def __post_init__(self):
        if self.T <= 0.0:
            raise ValueError("horizon T must be positive")
        if self.n_slabs < 1:
            raise ValueError("need at least one slab")
        if self.n_modes < 0:
            raise ValueError("mode count must be nonnegative")

    @property
    def dt(self) -> float:
        return self.T / self.n_slabs

    def slab_bounds(self, n: int) -> tuple[float, float]:
        """Bounds of slab ``n`` (1-based)."""
        if not 1 <= n <= self.n_slabs:
            raise ValueError(f"slab index {n} out of range 1..{self.n_slabs}")
        return (n - 1) * self.dt, n * self.dt


@dataclass(frozen=True)
class NoiseMatrix:
    """One sampled noise realization; immutable after construction."""

    grid: NoiseGrid
    increments: np.ndarray = field(repr=False)
    seed: tuple[int, ...]

    def __post_init__(self):
        r = np.asarray(self.increments, dtype=float)
        if r.shape != (self.grid.n_slabs, self.grid.n_modes):
            raise ValueError(
                f"increment matrix shape {r.shape} does not match grid "
                f"({self.grid.n_slabs}, {self.grid.n_modes})"
            )
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "increments", r)
        object.__setattr__(self, "seed", tuple(int(w) for w in self.seed))


def seed_sequence(seed) -> np.random.SeedSequence:
    """Normalize an int, a tuple of ints, or a SeedSequence to a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (int, np.integer)):
        return np.random.SeedSequence(int(seed))
    return np.random.SeedSequence(tuple(int(w) for w in seed))


def sample_seed(study_seed: int, index: int) -> tuple[int, int]:
    """Per-sample seed for Monte Carlo: depends only on the study seed and index.

    Common-random-number coupling relies on this: the same ``(study_seed, index)``
    pair drives every resolution in a sweep.
    """
    return (int(study_seed), int(index))


def _seed_words(seed) -> tuple[int, ...]:
    if isinstance(seed, np.random.SeedSequence):
        ent = seed.entropy
        words = tuple(ent) if isinstance(ent, (tuple, list)) else (int(ent),)
        return words + tuple(seed.spawn_key)
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(w) for w in seed)


def sample_noise(grid: NoiseGrid, seed) -> NoiseMatrix:
    """Draw the full increment matrix from a counter-based generator.

    The same seed and grid always reproduce the matrix bit for bit, and
    distinct seeds give independent streams, so samples can be generated in
    parallel and replayed individually.
    """
    rng = np.random.Generator(np.random.Philox(seed_sequence(seed)))
    r = rng.standard_normal((grid.n_slabs, grid.n_modes)) * math.sqrt(grid.dt)
    return NoiseMatrix(grid=grid, increments=r, seed=_seed_words(seed))


def slab_overlap(grid: NoiseGrid, a: float, b: float) -> list[tuple[int, float]]:
    """Slabs meeting ``(a, b)`` with their overlap lengths (1-based indices).

    Only positive overlaps are listed; the lengths always sum to ``b - a``.
    """
    if not a < b:
        raise ValueError(f"interval must satisfy a < b, got ({a}, {b})")
    if a < 0.0 or b > grid.T * (1.0 + 1e-12):
        raise ValueError(f"interval ({a}, {b}) not inside [0, {grid.T}]")
    dt = grid.dt
    first = max(1, int(math.floor(a / dt)) + 1)
    last = min(grid.n_slabs, int(math.ceil(b / dt)))
    out = []
    for n in range(first, last + 1):
        lo, hi = (n - 1) * dt, n * dt
        length = min(b, hi) - max(a, lo)
        if length > 0.0:
            out.append((n, length))
    return out


def overlap_matrix(grid: NoiseGrid, n_steps: int, T: float | None = None) -> np.ndarray:
    """Overlap lengths between stepper intervals and noise slabs.

    Entry ``(m-1, n-1)`` is the length of the intersection of the m-th stepper
    interval (horizon ``T`` split into ``n_steps``) with the n-th noise slab.
    The two grids need not be aligned.
    """
    T = grid.T if T is None else T
    dtau = T / n_steps
    out = np.zeros((n_steps, grid.n_slabs))
    for m in range(1, n_steps + 1):
        for n, length in slab_overlap(grid, (m - 1) * dtau, min(m * dtau, grid.T)):
            out[m - 1, n - 1] = length
    return out


def forcing_coefficients(noise: NoiseMatrix, slab: int) -> SpectralField:
    """Sine coefficients of the forcing (the x-derivative of the noise) on a slab.

    Differentiating the cosine modes flips them to sines and multiplies by
    ``-lam_i``; the slab average contributes ``1/dt``.
    """
    grid = noise.grid
    if not 1 <= slab <= grid.n_slabs:
        raise ValueError(f"slab index {slab} out of range 1..{grid.n_slabs}")
    lam, _ = decay_rates(grid.n_modes, 0.0)
    return SpectralField(-(lam / grid.dt) * noise.increments[slab - 1])


def evaluate_noise(noise: NoiseMatrix, t: float, x) -> float | np.ndarray:
    """Pointwise value of the noise field (cosine summation); debugging aid only.

    The solvers never need this: they consume the coefficient matrix directly.
    """
    grid = noise.grid
    if not 0.0 <= t <= grid.T:
        raise ValueError("time outside horizon")
    n = min(int(math.floor(t / grid.dt)), grid.n_slabs - 1)
    lam, _ = decay_rates(grid.n_modes, 0.0)
    xs = np.asarray(x, dtype=float)
    vals = math.sqrt(2.0) * np.cos(np.multiply.outer(xs, lam)) @ noise.increments[n] / grid.dt
    if np.isscalar(x) or xs.ndim == 0:
        return float(vals)
    return vals


@dataclass(frozen=True)
class ProjectionIdentity:
    """Both sides of the stochastic-integral representation, per sample."""

    lhs: float
    rhs: float
    projected: bool


def projection_identity(g, noise: NoiseMatrix) -> ProjectionIdentity:
    """Check the representation of the stochastic integral on a test function.

    ``g`` is either a coefficient matrix ``a[n-1, i-1]`` over slab-indicator /
    cosine-mode products (in-span case) or a callable ``g(t, x)`` which is then
    projected onto that span by quadrature (recorded via ``projected=True``).
    ``lhs`` integrates the projection against the underlying increments;
    ``rhs`` pairs the original function with the sampled noise field.  The two
    agree up to roundoff for every sample.
    """
    grid = noise.grid
    projected = callable(g)
    a = _project_callable(g, grid) if projected else np.asarray(g, dtype=float)
    if a.shape != noise.increments.shape:
        raise ValueError("coefficient matrix shape does not match the noise grid")
    lhs = float(np.sum(a * noise.increments))
    # independent route: assemble the noise field coefficients, then pair with g
    w_field = noise.increments / grid.dt
    rhs = float(np.sum(w_field * a) * grid.dt)
    return ProjectionIdentity(lhs=lhs, rhs=rhs, projected=projected)


def _project_callable(g, grid: NoiseGrid, n_panels: int = 64, n_gauss: int = 10) -> np.ndarray:
    """Span coefficients of ``g`` by Gauss quadrature in time and space."""
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    mid, half = (edges[:-1] + edges[1:]) / 2.0, np.diff(edges) / 2.0
    xs = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wx = (half[:, None] * wg[None, :]).ravel()
    lam, _ = decay_rates(grid.n_modes, 0.0)
    cos_block = math.sqrt(2.0) * np.cos(np.multiply.outer(xs, lam)) * wx[:, None]
    a = np.zeros((grid.n_slabs, grid.n_modes))
    for n in range(1, grid.n_slabs + 1):
        lo, hi = grid.slab_bounds(n)
        tmid, thalf = (lo + hi) / 2.0, (hi - lo) / 2.0
        ts = tmid + thalf * xg
        wt = thalf * wg
        for t, w in zip(ts, wt):
            gv = np.asarray(g(t, xs), dtype=float)
            a[n - 1] += w * (gv @ cos_block)
    return a / grid.dt


_MAGIC = b"CHCNOISE"


def save_noise(noise: NoiseMatrix, path) -> None:
    """Binary dump: header (horizon, slab/mode counts, seed words), then
    the increment matrix row-major."""
    words = noise.seed
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IdQQI", 1, noise.grid.T, noise.grid.n_slabs, noise.grid.n_modes, len(words)))
        for w in words:
            fh.write(struct.pack("<q", w))
        fh.write(np.ascontiguousarray(noise.increments, dtype="<f8").tobytes())


def load_noise(path) -> NoiseMatrix:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path}: not a noise dump")
        version, T, n_slabs, n_modes, n_words = struct.unpack("<IdQQI", fh.read(32))
        if version != 1:
            raise ValueError(f"{path}: unsupported dump version {version}")
        words = tuple(struct.unpack("<q", fh.read(8))[0] for _ in range(n_words))
        grid = NoiseGrid(T=T, n_slabs=int(n_slabs), n_modes=int(n_modes))
        body = fh.read(int(n_slabs) * int(n_modes) * 8)
        r = np.frombuffer(body, dtype="<f8").reshape(int(n_slabs), int(n_modes))
    return NoiseMatrix(grid=grid, increments=r, seed=words)
