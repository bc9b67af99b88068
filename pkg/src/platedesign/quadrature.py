"""Quadrature rules on the reference triangle and the unit interval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadRule:
    """Barycentric quadrature rule on a triangle.

    ``points`` has shape (Q, 3) with rows summing to one; ``weights`` has shape
    (Q,) and sums to one, so physical integrals are |T| * sum_q w_q f(x_q).
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        if not np.allclose(self.points.sum(axis=1), 1.0, atol=1e-14):
            raise ValueError("barycentric coordinates must sum to 1")
        if not np.isclose(self.weights.sum(), 1.0, atol=1e-14):
            raise ValueError("weights must sum to 1")

    @property
    def n_points(self) -> int:
        return self.weights.size

    def physical_points(self, verts: np.ndarray) -> np.ndarray:
        """Map to physical coordinates; verts (..., 3, 2) -> (..., Q, 2)."""
        return np.einsum("qi,...ij->...qj", self.points, verts)


def _orbits(*groups):
    pts, wts = [], []
    for w, bary in groups:
        a, b, c = bary
        if a == b == c:
            perms = [(a, b, c)]
        elif b == c:
            perms = [(a, b, b), (b, a, b), (b, b, a)]
        else:
            perms = [
                (a, b, c), (a, c, b), (b, a, c),
                (b, c, a), (c, a, b), (c, b, a),
            ]
        for p in perms:
            pts.append(p)
            wts.append(w)
    return np.array(pts, dtype=float), np.array(wts, dtype=float)


def triangle_rule_degree6() -> QuadRule:
    """The 12-point rule exact for bivariate polynomials of total degree 6."""
    pts, wts = _orbits(
        (0.050844906370207, (0.873821971016996, 0.063089014491502, 0.063089014491502)),
        (0.116786275726379, (0.501426509658179, 0.249286745170910, 0.249286745170910)),
        (0.082851075618374, (0.053145049844816, 0.310352451033785, 0.636502499121399)),
    )
    return QuadRule(points=pts, weights=wts / wts.sum(), degree=6)


def gauss_legendre_01(n: int):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def triangle_rule_tensor(n: int = 8) -> QuadRule:
    """Collapsed tensor-product rule (Duffy), exact to degree ~2n-2.

    Used as a high-order reference rule; not the assembly rule.
    """
    x, wx = gauss_legendre_01(n)
    y, wy = gauss_legendre_01(n)
    X, Y = np.meshgrid(x, y, indexing="ij")
    WX, WY = np.meshgrid(wx, wy, indexing="ij")
    # map unit square -> triangle: (u, v) -> (u, v(1-u)), jacobian (1-u)
    l2 = X.ravel()
    l3 = (Y * (1 - X)).ravel()
    l1 = 1.0 - l2 - l3
    w = (WX * WY * (1 - X)).ravel()
    pts = np.stack([l1, l2, l3], axis=1)
    # weights normalized to sum 1 (reference triangle area factor handled by |T|)
    return QuadRule(points=pts, weights=2.0 * w / (2.0 * w).sum(), degree=2 * n - 2)


def reference_monomial_integral(i: int, j: int) -> float:
    """Exact integral of x^i y^j over the unit reference triangle."""
    from math import factorial

    return factorial(i) * factorial(j) / factorial(i + j + 2)
