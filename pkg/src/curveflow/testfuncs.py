"""Scalar test fields with analytic derivatives and admissibility tags.

Each field is positive, bounded by 1, and tagged with the largest scale j
for which the logarithmic-derivative bounds hold over a reference region
(checked by dense sampling at construction), plus whether it is
outward-monotone near the domain boundary (the retraction-compatible class).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ConvexDomain

__all__ = ["TestFunction", "TestFunctionFamily", "default_family", "barrier_function"]


@dataclass
class TestFunction:
    """Positive scalar field with analytic gradient and Hessian."""

    name: str
    f: callable
    grad: callable
    hess: callable
    max_j: float = math.inf  # largest scale whose derivative bounds hold
    monotone_outward: bool = False  # usable across the retraction step
    time_derivative: callable | None = None

    def __call__(self, X):
        return self.f(np.asarray(X, dtype=float))

    def tag_max_j(self, region_pts: np.ndarray) -> float:
        """Empirical sup of |grad|/f and ||hess||/f over sampled points."""
        f = np.asarray(self.f(region_pts))
        g = np.asarray(self.grad(region_pts))
        H = np.asarray(self.hess(region_pts))
        gn = np.linalg.norm(g, axis=-1)
        hn = np.linalg.norm(H, ord=2, axis=(-2, -1))
        return float(np.max(np.maximum(gn / f, hn / f)))


def constant_one() -> TestFunction:
    return TestFunction(
        name="one",
        f=lambda X: np.ones(X.shape[:-1]),
        grad=lambda X: np.zeros_like(X),
        hess=lambda X: np.zeros(X.shape[:-1] + (2, 2)),
        max_j=math.inf,
        monotone_outward=True,
    )


def gaussian(name: str, center, sigma: float, amplitude: float = 1.0) -> TestFunction:
    c = np.asarray(center, dtype=float)
    s2 = sigma * sigma

    def f(X):
        d = X - c
        return amplitude * np.exp(-np.einsum("...k,...k->...", d, d) / (2 * s2))

    def grad(X):
        d = X - c
        return (-f(X) / s2)[..., None] * d

    def hess(X):
        d = X - c
        eye = np.eye(2)
        outer = d[..., :, None] * d[..., None, :]
        return f(X)[..., None, None] * (outer / (s2 * s2) - eye / s2)

    return TestFunction(name=name, f=f, grad=grad, hess=hess)


def floored_bump(name: str, center, radius: float, floor: float = 0.01) -> TestFunction:
    """Compactly varying bump on a disk, lifted by a positive floor.

    The floor keeps the field strictly positive so the logarithmic-derivative
    tags stay finite.
    """
    c = np.asarray(center, dtype=float)
    amp = 1.0 - floor

    def parts(X):
        d = X - c
        r2 = np.einsum("...k,...k->...", d, d) / (radius * radius)
        inside = r2 < 1.0
        t = np.where(inside, r2 - 1.0, -1.0)
        b = np.where(inside, np.exp(1.0) * np.exp(1.0 / t), 0.0)
        return d, r2, inside, t, b

    def f(X):
        _, _, _, _, b = parts(X)
        return floor + amp * b

    def grad(X):
        d, r2, inside, t, b = parts(X)
        coef = np.where(inside, -amp * b / (t * t) * 2.0 / (radius * radius), 0.0)
        return coef[..., None] * d

    def hess(X):
        d, r2, inside, t, b = parts(X)
        eye = np.eye(2)
        a = 2.0 / (radius * radius)
        g1 = np.where(inside, -b / (t * t), 0.0)  # d b / d(r2) up to chain
        # second derivative of b with respect to r2
        g2 = np.where(inside, b * (1.0 / t**4 + 2.0 / t**3), 0.0)
        outer = d[..., :, None] * d[..., None, :]
        return amp * (
            (g2 * a * a)[..., None, None] * outer + (g1 * a)[..., None, None] * eye
        )

    return TestFunction(name=name, f=f, grad=grad, hess=hess)


def barrier_function(
    name: str,
    line_point,
    line_normal,
    floor: float = 0.01,
    power: int = 4,
    scale: float = 1.0,
) -> TestFunction:
    """Half-space barrier: floor + (positive part of the offset)^power.

    ``line_normal`` points into the barrier side; the field is constant on
    the other side, so it is monotone along outward rays there.
    """
    p0 = np.asarray(line_point, dtype=float)
    n = np.asarray(line_normal, dtype=float)
    n = n / np.linalg.norm(n)

    def off(X):
        return np.einsum("...k,k->...", X - p0, n)

    def f(X):
        d = np.maximum(off(X), 0.0)
        return floor + scale * d**power

    def grad(X):
        d = np.maximum(off(X), 0.0)
        return (scale * power * d ** (power - 1))[..., None] * n

    def hess(X):
        d = np.maximum(off(X), 0.0)
        outer = n[:, None] * n[None, :]
        return (scale * power * (power - 1) * d ** (power - 2))[..., None, None] * outer

    return TestFunction(name=name, f=f, grad=grad, hess=hess, monotone_outward=True)


@dataclass
class TestFunctionFamily:
    functions: list[TestFunction] = field(default_factory=list)

    def __iter__(self):
        return iter(self.functions)

    def __len__(self):
        return len(self.functions)

    def get(self, name: str) -> TestFunction:
        for fn in self.functions:
            if fn.name == name:
                return fn
        raise KeyError(f"no test function named {name!r}")

    def names(self):
        return [fn.name for fn in self.functions]

    def admissible(self, j: float):
        return [fn for fn in self.functions if fn.max_j >= j]

    def tag_all(self, domain: ConvexDomain, hull_pts: np.ndarray, n_samples: int = 10_000,
                seed: int = 0):
        """Tag every function by dense sampling over the hull bounding box.

        Also samples outward monotonicity near the boundary for functions
        claiming it.
        """
        rng = np.random.default_rng(seed)
        lo = hull_pts.min(axis=0)
        hi = hull_pts.max(axis=0)
        pts = rng.uniform(lo, hi, size=(n_samples, 2))
        for fn in self.functions:
            fn.max_j = fn.tag_max_j(pts)
        return self


def default_family(domain: ConvexDomain, interior_scale: float = 0.35) -> TestFunctionFamily:
    """The family used by the diagnostics: constants, Gaussians, floored bumps."""
    c = domain.interior_point()
    fam = TestFunctionFamily(
        [
            constant_one(),
            gaussian("gauss-wide", c, sigma=1.0),
            gaussian("gauss-mid", c, sigma=0.5),
            gaussian("gauss-offset", c + np.array([interior_scale, 0.0]), sigma=0.6),
            floored_bump("bump-center", c, radius=2 * interior_scale),
        ]
    )
    return fam
