"""Uniform C^(r-1) spline spaces on (0, 1) with zero endpoint values.

The basis is the classical B-spline family of degree r on an open uniform
knot vector, with the first and last functions (the only ones not vanishing
at an endpoint) removed.  That enforces exactly the two value constraints and
nothing else; endpoint derivatives stay free.  Interior knots are simple, so
the functions are C^(r-1), which for r >= 2 puts the space inside
H^2 intersect H^1_0.  A basis function overlaps at most degree+1 elements,
so all Gram matrices have bandwidth <= degree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SplineSpace", "FemField"]


def _open_uniform_knots(n_elements: int, degree: int) -> np.ndarray:
    interior = np.arange(1, n_elements) / n_elements
    return np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])


def _basis_derivatives(knots: np.ndarray, degree: int, span: int, x: float, n_ders: int) -> np.ndarray:
    """Nonzero B-spline values and derivatives at ``x`` (de Boor recursion).

    ``span`` indexes the knot interval ``[knots[span], knots[span+1])``
    containing ``x``.  Returns an array of shape ``(n_ders+1, degree+1)``;
    column ``j`` belongs to global basis function ``span - degree + j``.
    """
    p = degree
    ndu = np.empty((p + 1, p + 1))
    ndu[0, 0] = 1.0
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    ders = np.zeros((n_ders + 1, p + 1))
    ders[0, :] = ndu[:, p]
    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, n_ders + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, n_ders + 1):
        ders[k, :] *= fac
        fac *= p - k
    return ders


class SplineSpace:
    """C^(r-1) splines of degree r on a uniform mesh, zero at both endpoints."""

    def __init__(self, n_elements: int, degree: int):
        if degree not in (2, 3):
            raise ValueError(f"degree must be 2 or 3, got {degree}")
        if n_elements < 2:
            raise ValueError("need at least two elements")
        self.n_elements = n_elements
        self.degree = degree
        self.h = 1.0 / n_elements
        self.knots = _open_uniform_knots(n_elements, degree)
        # open knots give n_elements + degree functions; two carry the endpoint values
        self.dim = n_elements + degree - 2

    def __repr__(self):
        return f"SplineSpace(n_elements={self.n_elements}, degree={self.degree})"

    def element_of(self, x: float, side: str = "auto") -> int:
        """Element index containing ``x``; at an interior breakpoint, ``side``
        picks the left or right polynomial piece."""
        if not 0.0 <= x <= 1.0:
            raise ValueError("point outside [0, 1]")
        e = int(np.floor(x * self.n_elements))
        e = min(e, self.n_elements - 1)
        if side == "left" and e > 0 and x <= e * self.h:
            e -= 1
        return e

    def element_dofs(self, element: int) -> np.ndarray:
        """Constrained dof indices active on an element; -1 marks the two
        removed endpoint functions."""
        funs = np.arange(element, element + self.degree + 1)
        dofs = funs - 1
        dofs[funs == 0] = -1
        dofs[funs == self.n_elements + self.degree - 1] = -1
        return dofs

    def local_basis(self, element: int, x: float, n_ders: int = 2) -> np.ndarray:
        """Values/derivatives of the degree+1 splines alive on ``element``."""
        span = element + self.degree
        return _basis_derivatives(self.knots, self.degree, span, x, n_ders)

    def evaluate(self, dofs: np.ndarray, x, deriv: int = 0, side: str = "auto"):
        """Evaluate a coefficient vector (or stacked columns) at points ``x``."""
        dofs = np.asarray(dofs, dtype=float)
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(xs.shape + dofs.shape[1:])
        for idx, xi in np.ndenumerate(xs):
            e = self.element_of(float(xi), side=side)
            ders = self.local_basis(e, float(xi), n_ders=deriv)
            active = self.element_dofs(e)
            for loc, dof in enumerate(active):
                if dof >= 0:
                    out[idx] += ders[deriv, loc] * dofs[dof]
        if np.isscalar(x) or np.asarray(x).ndim == 0:
            return out[0] if out.ndim else float(out)
        return out

    def quadrature(self, n_points: int) -> tuple[np.ndarray, np.ndarray]:
        """Gauss points and weights on every element, each shaped
        ``(n_elements, n_points)``."""
        xg, wg = np.polynomial.legendre.leggauss(n_points)
        mids = (np.arange(self.n_elements) + 0.5) * self.h
        pts = mids[:, None] + 0.5 * self.h * xg[None, :]
        wts = np.broadcast_to(0.5 * self.h * wg, pts.shape)
        return pts, wts

    def evaluation_matrix(self, x, deriv: int = 0) -> np.ndarray:
        """Dense matrix mapping dof vectors to values at the given points."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((xs.size, self.dim))
        for row, xi in enumerate(xs.ravel()):
            e = self.element_of(float(xi))
            ders = self.local_basis(e, float(xi), n_ders=deriv)
            for loc, dof in enumerate(self.element_dofs(e)):
                if dof >= 0:
                    out[row, dof] = ders[deriv, loc]
        return out


@dataclass(frozen=True)
class FemField:
    """A member of a spline space, held as its coefficient vector."""

    space: SplineSpace
    dofs: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.dofs, dtype=float)
        if d.shape != (self.space.dim,):
            raise ValueError(f"expected {self.space.dim} coefficients, got {d.shape}")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "dofs", d)

    def evaluate(self, x, deriv: int = 0, side: str = "auto"):
        return self.space.evaluate(self.dofs, x, deriv=deriv, side=side)
