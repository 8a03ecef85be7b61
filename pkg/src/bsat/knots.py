"""Curvature-adaptive knot placement.

Interior knots are placed by integrating a derivative-based feature function
over the sample grid (trapezoidal rule), clipping the per-interval masses
against the mean mass, and inverting the normalized cumulative distribution
at equally spaced quantiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .splines import KnotVector

# Relative derivative floor keeping the feature strictly positive; the
# absolute backstop covers exactly-flat windows where mean(|dy|) == 0.
FEATURE_FLOOR_REL = 1e-6
FEATURE_FLOOR_ABS = 1e-12


@dataclass(frozen=True)
class MassProfile:
    """Per-interval curvature masses and the CDF used for knot inversion."""

    feature: np.ndarray
    masses: np.ndarray
    clipped_masses: np.ndarray
    mean_mass: float
    cdf: np.ndarray
    midpoints: np.ndarray


def feature_function(y, grid, p: int, yeh_exponent: bool = False) -> np.ndarray:
    """Per-sample knot-density feature ``(|y^(p)| + eta)^(1/p)``.

    The p-th derivative is estimated by repeated numerical gradients
    (central differences inside, one-sided at the boundaries).
    ``yeh_exponent=True`` switches to the original ``2/p`` exponent; it
    exists for comparisons only.
    """
    y = np.asarray(y, dtype=np.float64)
    xi = np.asarray(grid, dtype=np.float64)
    if p < 1:
        raise ValueError("feature function requires degree >= 1")
    if y.shape != xi.shape or y.ndim != 1:
        raise ValueError("window and grid must be 1-D arrays of equal length")
    if y.size < p + 2:
        raise ValueError(f"window of {y.size} samples is too short for degree {p}")
    # On a uniform grid, scalar spacing keeps the gradient of a constant
    # exactly zero (the nonuniform-spacing formula leaves float noise that
    # would swamp the feature floor).
    steps = np.diff(xi)
    if np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
        spacing: float | np.ndarray = float((xi[-1] - xi[0]) / (xi.size - 1))
    else:
        spacing = xi
    dy = y
    for _ in range(p):
        dy = np.gradient(dy, spacing)
    eta = max(FEATURE_FLOOR_REL * float(np.mean(np.abs(dy))), FEATURE_FLOOR_ABS)
    exponent = (2.0 if yeh_exponent else 1.0) / p
    return (np.abs(dy) + eta) ** exponent


def interval_masses(feature, grid) -> np.ndarray:
    """Trapezoidal mass of the feature over each grid interval."""
    f = np.asarray(feature, dtype=np.float64)
    xi = np.asarray(grid, dtype=np.float64)
    if f.shape != xi.shape or f.size < 2:
        raise ValueError("feature and grid must match and hold at least 2 samples")
    return 0.5 * (f[1:] + f[:-1]) * np.diff(xi)


def clip_masses(masses, g: float, k_int: int) -> tuple[np.ndarray, float]:
    """Cap each mass at ``g`` times the mean mass per interior knot."""
    w = np.asarray(masses, dtype=np.float64)
    if g <= 0:
        raise ValueError("clip factor must be positive")
    if k_int < 1:
        raise ValueError("token budget leaves no interior knots for this degree")
    mean_mass = float(np.sum(w)) / k_int
    return np.minimum(w, g * mean_mass), mean_mass


def mass_profile(grid, y, p: int, n: int, g: float) -> MassProfile:
    """Assemble the feature, masses and inversion CDF for a window."""
    xi = np.asarray(grid, dtype=np.float64)
    f = feature_function(y, xi, p)
    w = interval_masses(f, xi)
    k_int = (n + p + 1) - 2 * (p + 1)
    clipped, mean_mass = clip_masses(w, g, k_int)
    cdf = np.concatenate(([0.0], np.cumsum(clipped)))
    cdf /= cdf[-1]
    midpoints = np.concatenate(([xi[0]], 0.5 * (xi[:-1] + xi[1:])))
    return MassProfile(
        feature=f,
        masses=w,
        clipped_masses=clipped,
        mean_mass=mean_mass,
        cdf=cdf,
        midpoints=midpoints,
    )


def place_knots(grid, y, p: int, n: int, g: float) -> KnotVector:
    """Clamped knot vector with ``n - p - 1`` adaptively placed interior knots."""
    xi = np.asarray(grid, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not p + 1 < n < y.size:
        raise ValueError(
            f"basis count {n} must satisfy degree+1 < n < window length ({p + 1} < n < {y.size})"
        )
    profile = mass_profile(xi, y, p, n, g)
    k_int = n - p - 1
    quantiles = np.linspace(0.0, 1.0, k_int + 2)[1:-1]
    interior = np.interp(quantiles, profile.cdf, profile.midpoints)
    interior = _separate_duplicates(interior, xi)
    tau = np.concatenate((np.full(p + 1, xi[0]), interior, np.full(p + 1, xi[-1])))
    return KnotVector(tau=tau, degree=p)


def _separate_duplicates(interior: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Split coincident interior knots apart by one grid spacing.

    Coincidence requires the inversion CDF to have flat spans, which the
    positive feature floor rules out up to float collapse; this is a guard,
    not a hot path.
    """
    if interior.size < 2 or np.all(np.diff(interior) > 0):
        return interior
    h = float(np.min(np.diff(grid)))
    out = interior.copy()
    for j in range(1, out.size):
        if out[j] <= out[j - 1]:
            out[j] = out[j - 1] + h
    # Keep everything strictly inside the domain; walk back from the right
    # if the forward pass pushed knots past the end.
    hi = float(grid[-1])
    for j in range(out.size - 1, -1, -1):
        cap = hi - (out.size - j) * h * 1e-3
        if out[j] > cap:
            out[j] = cap
        else:
            break
    return out
