"""Localized Gaussian convolution kernel with compact support.

The kernel is a Gaussian of width eps multiplied by a fixed radial cutoff
that equals 1 inside radius 1/2 and vanishes outside radius 1, renormalized
to unit integral. Closed-form gradient and Hessian are provided; evaluation
is vectorized over point batches.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

__all__ = ["SmoothingKernel", "make_kernel"]


def _smoothstep5(u):
    """Quintic smoothstep on [0,1] with vanishing first and second end derivatives."""
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smoothstep5_d1(u):
    return 30.0 * u * u * (1.0 - u) ** 2


def _smoothstep5_d2(u):
    return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)


def cutoff_profile(r):
    """Radial cutoff: 1 for r <= 1/2, 0 for r >= 1, quintic blend between."""
    r = np.asarray(r, dtype=float)
    u = np.clip(2.0 * r - 1.0, 0.0, 1.0)
    return 1.0 - _smoothstep5(u)


def cutoff_profile_d1(r):
    r = np.asarray(r, dtype=float)
    inside = (r > 0.5) & (r < 1.0)
    u = np.clip(2.0 * r - 1.0, 0.0, 1.0)
    return np.where(inside, -2.0 * _smoothstep5_d1(u), 0.0)


def cutoff_profile_d2(r):
    r = np.asarray(r, dtype=float)
    inside = (r > 0.5) & (r < 1.0)
    u = np.clip(2.0 * r - 1.0, 0.0, 1.0)
    return np.where(inside, -4.0 * _smoothstep5_d2(u), 0.0)


class SmoothingKernel:
    """Truncated, renormalized Gaussian kernel of width ``eps`` in ``dim`` dimensions.

    Attributes: ``eps``, ``dim``, ``c_eps`` (normalization), and the fixed
    radial cutoff profile. Immutable after construction.
    """

    def __init__(self, eps: float, dim: int):
        if not (0.0 < eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        if dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        self.eps = float(eps)
        self.dim = int(dim)
        self._norm = (2.0 * math.pi * self.eps**2) ** (-self.dim / 2.0)
        self.c_eps = 1.0 / self._raw_integral()

    # -- normalization ---------------------------------------------------

    def _raw_integral(self) -> float:
        """Integral of cutoff(|x|) * Gaussian(x) over R^dim.

        Ball of radius 1/2 is handled in closed form; the cut shell [1/2, 1]
        by adaptive quadrature.
        """
        e = self.eps
        if self.dim == 2:
            inner = 1.0 - math.exp(-1.0 / (8.0 * e * e))

            def shell(r):
                return (
                    2.0
                    * math.pi
                    * r
                    * float(cutoff_profile(r))
                    * self._norm
                    * math.exp(-(r * r) / (2.0 * e * e))
                )
        else:
            inner = math.erf(1.0 / (2.0 * math.sqrt(2.0) * e)) - math.sqrt(
                2.0 / math.pi
            ) * (0.5 / e) * math.exp(-1.0 / (8.0 * e * e))

            def shell(r):
                return (
                    4.0
                    * math.pi
                    * r
                    * r
                    * float(cutoff_profile(r))
                    * self._norm
                    * math.exp(-(r * r) / (2.0 * e * e))
                )

        outer, _ = quad(shell, 0.5, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200)
        return inner + outer

    # -- evaluation -------------------------------------------------------

    def value(self, x):
        """Kernel value at x; vectorized over a trailing-(dim) point batch."""
        X = np.asarray(x, dtype=float)
        r = np.linalg.norm(X, axis=-1)
        g = self._norm * np.exp(-(r * r) / (2.0 * self.eps**2))
        out = self.c_eps * cutoff_profile(r) * g
        return np.where(r < 1.0, out, 0.0)

    def grad(self, x):
        """Closed-form kernel gradient; zero outside the unit ball."""
        X = np.asarray(x, dtype=float)
        r = np.linalg.norm(X, axis=-1)
        g = self._norm * np.exp(-(r * r) / (2.0 * self.eps**2))
        psi = cutoff_profile(r)
        dpsi = cutoff_profile_d1(r)
        # radial derivative of c * psi(r) * g(r)
        fr = self.c_eps * (dpsi * g + psi * g * (-r / self.eps**2))
        rsafe = np.maximum(r, 1e-300)
        coef = np.where(r < 1.0, fr / rsafe, 0.0)
        return coef[..., None] * X

    def hess(self, x):
        """Closed-form kernel Hessian; zero outside the unit ball."""
        X = np.asarray(x, dtype=float)
        r = np.linalg.norm(X, axis=-1)
        e2 = self.eps**2
        g = self._norm * np.exp(-(r * r) / (2.0 * e2))
        psi = cutoff_profile(r)
        d1 = cutoff_profile_d1(r)
        d2 = cutoff_profile_d2(r)
        gp = -r / e2 * g
        gpp = (r * r / (e2 * e2) - 1.0 / e2) * g
        fr = self.c_eps * (d1 * g + psi * gp)
        frr = self.c_eps * (d2 * g + 2.0 * d1 * gp + psi * gpp)
        rsafe = np.maximum(r, 1e-300)
        xhat = X / rsafe[..., None]
        eye = np.eye(X.shape[-1])
        outer = xhat[..., :, None] * xhat[..., None, :]
        H = frr[..., None, None] * outer + (fr / rsafe)[..., None, None] * (eye - outer)
        # at the origin the cutoff is identically 1: Hessian of the pure Gaussian
        H0 = -self.c_eps * g[..., None, None] / e2 * eye
        small = (r < 1e-8)[..., None, None]
        H = np.where(small, H0, H)
        return np.where((r < 1.0)[..., None, None], H, 0.0)

    def trunc_radius(self, rel_tol: float = 1e-16) -> float:
        """Radius beyond which the Gaussian factor falls below rel_tol."""
        return min(1.0, self.eps * math.sqrt(-2.0 * math.log(rel_tol)))

    def __repr__(self):
        return f"SmoothingKernel(eps={self.eps}, dim={self.dim}, c_eps={self.c_eps:.12g})"


def make_kernel(eps: float, dim: int) -> SmoothingKernel:
    """Construct the kernel, computing the normalization by radial quadrature."""
    return SmoothingKernel(eps, dim)
