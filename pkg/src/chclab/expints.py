"""Stable closed-form integrals of exponential kernels.

Every exact second-moment formula in this package reduces to integrals of
``exp(-kappa*s)`` over time slabs.  The decay rate ``kappa`` may be positive,
zero (critical mode) or negative (growing mode), so the naive expressions
``(1 - exp(-z))/z`` and friends are evaluated here in forms that stay
accurate through ``z = 0`` and do not cancel for small ``z``.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["phi1", "slab_deficit", "geom_sum_exp"]

# Taylor coefficients of g(z) = z*(1+e^-z) + 2*expm1(-z) = sum (-1)^(k+1) (k-2) z^k / k!
_G_COEFFS = [(-1.0) ** (k + 1) * (k - 2) / math.factorial(k) for k in range(3, 14)]


def phi1(z):
    """Return ``(1 - exp(-z))/z`` elementwise, with the limit 1 at ``z = 0``.

    ``dt * phi1(kappa*dt)`` is the integral of ``exp(-kappa*s)`` over ``[0, dt]``.
    """
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0.0
    out[nz] = -np.expm1(-z[nz]) / z[nz]
    if out.ndim == 0:
        return float(out)
    return out


def slab_deficit(z):
    """Return ``phi1(2z) - phi1(z)**2`` elementwise, which is nonnegative.

    ``dt * slab_deficit(kappa*dt)`` is the squared L2(0, dt) distance between
    ``exp(-kappa*s)`` and its mean value on ``[0, dt]`` (Cauchy-Schwarz makes it
    nonnegative).  Direct subtraction cancels to zero quadratically, so the
    difference is rearranged as ``(1 - E) * g(z) / (2 z^2)`` with
    ``g(z) = z*(1+E) + 2*expm1(-z)`` and ``E = exp(-z)``; ``g`` itself is summed
    as a series for small ``z`` where its leading terms cancel.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 0.25
    zs = z[small]
    # p = g(z)/z^2 = sum_k c_k z^(k-2), leading term z/6; then
    # psi = (1-E)*g/(2 z^2) = phi1(z) * z * p / 2, finite through z = 0.
    p = np.zeros_like(zs)
    for c in reversed(_G_COEFFS):
        p = zs * (c + p)
    out[small] = phi1(zs) * zs * p / 2.0
    zb = z[~small]
    gb = zb * (1.0 + np.exp(-zb)) + 2.0 * np.expm1(-zb)
    out[~small] = -np.expm1(-zb) * gb / (2.0 * zb * zb)
    if out.ndim == 0:
        return float(out)
    return out


def geom_sum_exp(d, count):
    """Return ``sum_{j=0}^{count-1} exp(-j*d)`` elementwise in ``d``.

    Evaluated as ``expm1(-count*d)/expm1(-d)``, which is exact through the
    ``d = 0`` limit ``count`` and valid for growing terms (``d < 0``).
    """
    d = np.asarray(d, dtype=float)
    if count == 0:
        return np.zeros_like(d) if d.ndim else 0.0
    out = np.full_like(d, float(count))
    nz = d != 0.0
    out[nz] = np.expm1(-count * d[nz]) / np.expm1(-d[nz])
    if out.ndim == 0:
        return float(out)
    return out
