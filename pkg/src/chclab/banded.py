"""Symmetric banded matrices with direct factorizations.

The spline Gram matrices have bandwidth at most the polynomial degree, so a
packed lower-band layout (``band[k, j]`` holds entry ``(j+k, j)``) makes every
solve linear in the matrix order.  Positive definite systems go through
LAPACK's banded Cholesky; the indefinite systems arising from the fully
implicit comparison scheme fall back to an unpivoted banded LDLt whose
diagonal exposes the inertia.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

__all__ = ["BandedSymMatrix", "BandedFactor"]


class BandedSymMatrix:
    """Symmetric matrix in packed lower-band storage."""

    def __init__(self, band: np.ndarray):
        band = np.asarray(band, dtype=float)
        if band.ndim != 2:
            raise ValueError("band storage must be two-dimensional")
        self.band = band

    @classmethod
    def zeros(cls, order: int, bandwidth: int) -> "BandedSymMatrix":
        return cls(np.zeros((bandwidth + 1, order)))

    @property
    def order(self) -> int:
        return self.band.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.band.shape[0] - 1

    def add(self, i: int, j: int, value: float) -> None:
        """Accumulate into entry (i, j); only the lower triangle is stored."""
        if i < j:
            i, j = j, i
        if i - j > self.bandwidth:
            raise ValueError(f"entry ({i}, {j}) outside bandwidth {self.bandwidth}")
        self.band[i - j, j] += value

    def entry(self, i: int, j: int) -> float:
        if i < j:
            i, j = j, i
        if i - j > self.bandwidth:
            return 0.0
        return float(self.band[i - j, j])

    def to_dense(self) -> np.ndarray:
        n, bw = self.order, self.bandwidth
        a = np.zeros((n, n))
        for k in range(bw + 1):
            d = self.band[k, : n - k]
            a[np.arange(n - k) + k, np.arange(n - k)] = d
            if k:
                a[np.arange(n - k), np.arange(n - k) + k] = d
        return a

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Product with a vector or with columns of a matrix."""
        x = np.asarray(x, dtype=float)
        n, bw = self.order, self.bandwidth
        y = self.band[0, :].reshape(-1, *([1] * (x.ndim - 1))) * x
        for k in range(1, bw + 1):
            d = self.band[k, : n - k].reshape(-1, *([1] * (x.ndim - 1)))
            y[k:] += d * x[: n - k]
            y[: n - k] += d * x[k:]
        return y

    def quadratic_form(self, x: np.ndarray) -> float:
        return float(np.asarray(x) @ self.matvec(np.asarray(x)))

    def copy(self) -> "BandedSymMatrix":
        return BandedSymMatrix(self.band.copy())

    def __add__(self, other: "BandedSymMatrix") -> "BandedSymMatrix":
        return BandedSymMatrix(self.band + other.band)

    def __sub__(self, other: "BandedSymMatrix") -> "BandedSymMatrix":
        return BandedSymMatrix(self.band - other.band)

    def __mul__(self, scalar: float) -> "BandedSymMatrix":
        return BandedSymMatrix(self.band * float(scalar))

    __rmul__ = __mul__

    def factor(self) -> "BandedFactor":
        return BandedFactor(self)


class BandedFactor:
    """Direct factorization of a :class:`BandedSymMatrix`.

    Tries banded Cholesky first; on failure performs an unpivoted banded LDLt
    in packed storage.  ``is_spd`` reports whether all pivots were positive,
    and ``diag`` holds the LDLt pivots (``None`` on the Cholesky path).
    Factorization fails only for (numerically) singular matrices.
    """

    def __init__(self, matrix: BandedSymMatrix):
        self.order = matrix.order
        self.bandwidth = matrix.bandwidth
        self._cho = None
        self._ldl = None
        try:
            self._cho = cholesky_banded(matrix.band, lower=True)
            self.is_spd = True
            self.diag = None
        except np.linalg.LinAlgError:
            self._ldl = _ldlt_banded(matrix.band)
            self.diag = self._ldl[0]
            self.is_spd = bool(np.all(self.diag > 0.0))

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve against a vector or against columns of a matrix."""
        b = np.asarray(b, dtype=float)
        if self._cho is not None:
            return cho_solve_banded((self._cho, True), b)
        return _ldlt_solve(self._ldl, b)


def _ldlt_banded(band: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unpivoted LDLt of a symmetric band; returns (pivots, unit-lower band)."""
    bw = band.shape[0] - 1
    n = band.shape[1]
    low = band.copy()
    d = np.empty(n)
    scale = np.max(np.abs(band)) or 1.0
    for j in range(n):
        lo = max(0, j - bw)
        ks = np.arange(lo, j)
        ljk = low[j - ks, ks]
        d[j] = low[0, j] - np.sum(ljk * ljk * d[ks])
        if abs(d[j]) <= 1e-14 * scale:
            raise np.linalg.LinAlgError(f"zero pivot at column {j}: matrix is singular")
        hi = min(j + bw + 1, n)
        for i in range(j + 1, hi):
            kk = np.arange(max(lo, i - bw), j)
            s = low[i - j, j] - np.sum(low[i - kk, kk] * low[j - kk, kk] * d[kk])
            low[i - j, j] = s / d[j]
    return d, low


def _ldlt_solve(ldl: tuple[np.ndarray, np.ndarray], b: np.ndarray) -> np.ndarray:
    d, low = ldl
    n = d.size
    bw = low.shape[0] - 1
    x = np.array(b, dtype=float, copy=True)
    for i in range(1, n):
        lo = max(0, i - bw)
        x[i] -= low[i - np.arange(lo, i), np.arange(lo, i)] @ x[lo:i]
    x /= d.reshape(-1, *([1] * (x.ndim - 1)))
    for j in range(n - 2, -1, -1):
        hi = min(j + bw + 1, n)
        x[j] -= low[np.arange(j + 1, hi) - j, j] @ x[j + 1 : hi]
    return x
