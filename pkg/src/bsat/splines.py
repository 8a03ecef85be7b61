"""B-spline basis evaluation on clamped knot vectors.

Basis functions follow the Cox-de Boor recursion with the usual 0/0 -> 0
convention. The production path evaluates only the ``degree + 1`` functions
that are nonzero at a point (knot-span algorithm); a naive recursive
evaluator is kept for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KnotVector:
    """Clamped, non-decreasing knot sequence for degree-``degree`` splines.

    The sequence carries ``basis_count = len(tau) - (degree + 1)`` basis
    functions and spans the parameter domain ``[tau[degree], tau[basis_count]]``.
    """

    tau: np.ndarray
    degree: int

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=np.float64)
        object.__setattr__(self, "tau", tau)
        p = self.degree
        if p < 0:
            raise ValueError("degree must be non-negative")
        if tau.ndim != 1:
            raise ValueError("knots must be one-dimensional")
        n = tau.size - (p + 1)
        if n <= p + 1:
            raise ValueError(
                f"degenerate knot vector: basis count {n} must exceed degree+1 = {p + 1}"
            )
        if np.any(np.diff(tau) < 0):
            raise ValueError("knots must be non-decreasing")
        if np.any(tau[: p + 1] != tau[0]) or np.any(tau[-(p + 1):] != tau[-1]):
            raise ValueError("knot vector must be clamped (degree+1 equal knots at each end)")

    @property
    def basis_count(self) -> int:
        return self.tau.size - (self.degree + 1)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.tau[self.degree]), float(self.tau[self.basis_count])


@dataclass(frozen=True)
class BasisMatrix:
    """Dense basis evaluation ``values[l, i] = N_i(eval_points[l])``."""

    values: np.ndarray
    eval_points: np.ndarray


def cox_de_boor(tau, i: int, p: int, xi: float) -> float:
    """Naive Cox-de Boor recursion on a raw knot array (0/0 terms are 0).

    Reference implementation; no clamping or domain checks. Degree-0 terms
    use the half-open interval ``[tau[i], tau[i+1])``.
    """
    tau = np.asarray(tau, dtype=np.float64)
    if p == 0:
        return 1.0 if tau[i] <= xi < tau[i + 1] else 0.0
    left = 0.0
    if tau[i + p] != tau[i]:
        left = (xi - tau[i]) / (tau[i + p] - tau[i]) * cox_de_boor(tau, i, p - 1, xi)
    right = 0.0
    if tau[i + p + 1] != tau[i + 1]:
        right = (tau[i + p + 1] - xi) / (tau[i + p + 1] - tau[i + 1]) * cox_de_boor(
            tau, i + 1, p - 1, xi
        )
    return left + right


def _check_domain(knots: KnotVector, xi: np.ndarray) -> None:
    lo, hi = knots.domain
    if np.any(xi < lo) or np.any(xi > hi):
        raise ValueError(f"parameter value outside spline domain [{lo}, {hi}]")


def find_span(knots: KnotVector, xi: float) -> int:
    """Index ``s`` with ``tau[s] <= xi < tau[s+1]`` (closed at the right end)."""
    spans = _find_spans(knots, np.asarray([xi], dtype=np.float64))
    return int(spans[0])


def _find_spans(knots: KnotVector, xi: np.ndarray) -> np.ndarray:
    p, n = knots.degree, knots.basis_count
    spans = np.searchsorted(knots.tau, xi, side="right") - 1
    # xi == tau[n] falls past the clamped tail; fold it into the last span so
    # the final basis evaluates to its limit value 1 there.
    return np.clip(spans, p, n - 1)


def _basis_funs(knots: KnotVector, spans: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Nonzero basis values at each point: row l holds N_{spans[l]-p .. spans[l]}."""
    tau, p = knots.tau, knots.degree
    m = xi.shape[0]
    values = np.zeros((m, p + 1))
    values[:, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = xi - tau[spans + 1 - j]
        right[:, j] = tau[spans + j] - xi
        saved = np.zeros(m)
        for r in range(j):
            # Denominator spans at least the (positive-width) current knot span.
            temp = values[:, r] / (right[:, r + 1] + left[:, j - r])
            values[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        values[:, j] = saved
    return values


def basis_value(i: int, p: int, xi: float, knots: KnotVector) -> float:
    """Evaluate the ``i``-th degree-``p`` basis function at ``xi``."""
    if p != knots.degree:
        raise ValueError(f"degree {p} does not match knot vector degree {knots.degree}")
    n = knots.basis_count
    if not 0 <= i < n:
        raise IndexError(f"basis index {i} out of range [0, {n})")
    pt = np.asarray([xi], dtype=np.float64)
    _check_domain(knots, pt)
    span = _find_spans(knots, pt)
    if not span[0] - p <= i <= span[0]:
        return 0.0
    row = _basis_funs(knots, span, pt)[0]
    return float(row[i - (span[0] - p)])


def basis_matrix(grid, knots: KnotVector) -> BasisMatrix:
    """Evaluate every basis function on a parameter grid."""
    xi = np.asarray(grid, dtype=np.float64)
    if xi.ndim != 1 or xi.size == 0:
        raise ValueError("grid must be a non-empty 1-D array")
    _check_domain(knots, xi)
    p, n = knots.degree, knots.basis_count
    spans = _find_spans(knots, xi)
    active = _basis_funs(knots, spans, xi)
    values = np.zeros((xi.size, n))
    cols = spans[:, None] - p + np.arange(p + 1)[None, :]
    values[np.arange(xi.size)[:, None], cols] = active
    return BasisMatrix(values=values, eval_points=xi)


def eval_curve(coeffs, knots: KnotVector, xi) -> float | np.ndarray:
    """Evaluate the spline curve sum_i coeffs[i] * N_i(xi).

    Only the ``degree + 1`` active terms per point contribute.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    if c.shape != (knots.basis_count,):
        raise ValueError(
            f"expected {knots.basis_count} coefficients, got {c.shape}"
        )
    pts = np.asarray(xi, dtype=np.float64)
    scalar = pts.ndim == 0
    pts = np.atleast_1d(pts)
    _check_domain(knots, pts)
    p = knots.degree
    spans = _find_spans(knots, pts)
    active = _basis_funs(knots, spans, pts)
    cols = spans[:, None] - p + np.arange(p + 1)[None, :]
    out = np.einsum("lj,lj->l", active, c[cols])
    return float(out[0]) if scalar else out


def support_interval(i: int, knots: KnotVector) -> tuple[float, float]:
    """Support ``[tau[i], tau[i+p+1])`` of the ``i``-th basis function."""
    if not 0 <= i < knots.basis_count:
        raise IndexError(f"basis index {i} out of range [0, {knots.basis_count})")
    return float(knots.tau[i]), float(knots.tau[i + knots.degree + 1])
