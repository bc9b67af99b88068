"""Cylindrical plate reduction on (0, 1): state solve, profile curve, compliance.

The deformation of a clamped, cylindrically deforming plate is encoded by the
phase angle of its profile curve.  For a hardness average B and a downward
load of magnitude c with moment arm (1 - t), the phase solves

    (B K')' = c (1 - t) cos K,   K(0) = 0,  K'(1) = 0,

discretized with continuous piecewise-linear elements and a 3-point Gauss rule
per cell, and solved by damped Newton with load continuation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, InvalidProfile, NonConvergence

_GAUSS3_X = np.array([0.5 - np.sqrt(0.15), 0.5, 0.5 + np.sqrt(0.15)])
_GAUSS3_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


@dataclass(frozen=True)
class Grid1D:
    """Nodes 0 = t_0 < ... < t_n = 1."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("need at least two nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError("grid must span exactly [0, 1]")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")

    @classmethod
    def uniform(cls, n_cells: int) -> "Grid1D":
        if n_cells < 1:
            raise ValueError("n_cells must be positive")
        return cls(np.linspace(0.0, 1.0, n_cells + 1))

    @property
    def n_cells(self) -> int:
        return self.nodes.size - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])


@dataclass
class MaterialProfile1D:
    """Per-cell averaged hardness with box bounds a < b."""

    grid: Grid1D
    values: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells,):
            raise InvalidProfile("need one hardness value per cell")
        if not (self.a > 0 and self.b > self.a):
            raise InvalidProfile("bounds must satisfy 0 < a < b")
        if np.any(self.values < self.a - 1e-12) or np.any(self.values > self.b + 1e-12):
            raise InvalidProfile("hardness values must lie in [a, b]")

    @classmethod
    def constant(cls, grid: Grid1D, value: float, a=None, b=None) -> "MaterialProfile1D":
        return cls.from_values(grid, np.full(grid.n_cells, float(value)), a, b)

    @classmethod
    def from_values(cls, grid: Grid1D, values, a=None, b=None) -> "MaterialProfile1D":
        values = np.asarray(values, dtype=float)
        a = float(values.min()) if a is None else a
        if b is None:
            b = float(values.max())
            if b <= a:
                b = a + 1.0
        return cls(grid, values, a, b)


@dataclass
class LoadSpec1D:
    """Vertical load of magnitude c with per-node moment-arm profile.

    The default arm (1 - t) corresponds to a uniform downward force.
    """

    magnitude: float
    arm: np.ndarray | None = None

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("load magnitude must be >= 0")

    def arm_values(self, grid: Grid1D) -> np.ndarray:
        if self.arm is None:
            return 1.0 - grid.nodes
        arm = np.asarray(self.arm, dtype=float)
        if arm.shape != grid.nodes.shape:
            raise ValueError("arm profile must be nodal")
        return arm


@dataclass
class PhaseSolution1D:
    grid: Grid1D
    phase: np.ndarray  # nodal phase angle, radians
    converged: bool
    newton_iters: int
    residual_norm: float
    load: LoadSpec1D = field(repr=False, default=None)


@dataclass
class ProfileCurve:
    points: np.ndarray   # (n+1, 2): (x1, x3)
    normals: np.ndarray  # (n+1, 2): (-sin K, cos K)

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())


def _interp_nodal(values, xg):
    """Evaluate a nodal P1 field at the 3 Gauss points of each cell.

    values: (n+1,); returns (n_cells, 3).
    """
    v0 = values[:-1, None]
    v1 = values[1:, None]
    return v0 * (1 - xg) + v1 * xg


def _assemble_residual_jac(grid, Bbar, c, arm, K, want_jac=True):
    """Residual of int B K' phi' + c int arm(t) cos(K) phi over hat functions."""
    h = grid.h
    n = grid.n_cells
    Kp = np.diff(K) / h
    xg = _GAUSS3_X[None, :]
    armg = _interp_nodal(arm, xg)
    Kg = _interp_nodal(K, xg)
    cosg = np.cos(Kg)
    w = _GAUSS3_W[None, :] * h[:, None]

    res = np.zeros(n + 1)
    flux = Bbar * Kp
    np.add.at(res, np.arange(n), -flux)
    np.add.at(res, np.arange(1, n + 1), flux)
    # load term: phi weights (1-x) on the left node, x on the right node
    f0 = (w * armg * cosg * (1 - xg)).sum(axis=1)
    f1 = (w * armg * cosg * xg).sum(axis=1)
    np.add.at(res, np.arange(n), c * f0)
    np.add.at(res, np.arange(1, n + 1), c * f1)

    if not want_jac:
        return res, None
    sing = np.sin(Kg)
    # d/dK of the load term: -c * arm * sin(K) * phi_j phi_i
    m00 = -(w * armg * sing * (1 - xg) ** 2).sum(axis=1)
    m01 = -(w * armg * sing * (1 - xg) * xg).sum(axis=1)
    m11 = -(w * armg * sing * xg ** 2).sum(axis=1)
    s = Bbar / h
    diag = np.zeros(n + 1)
    diag[:-1] += s + c * m00
    diag[1:] += s + c * m11
    off = -s + c * m01
    return res, (diag, off)


def _solve_tridiag_dirichlet0(diag, off, rhs):
    """Solve the symmetric tridiagonal system with row/col 0 eliminated."""
    n = diag.size - 1
    ab = np.zeros((3, n))
    ab[0, 1:] = off[1:]
    ab[1, :] = diag[1:]
    ab[2, :-1] = off[1:]
    return solve_banded((1, 1), ab, rhs[1:])


def solve_state_1d(profile: MaterialProfile1D, load: LoadSpec1D, tol: float = 1e-10,
                   max_iters: int = 60) -> PhaseSolution1D:
    """Solve the cylindrical state equation for the phase.

    Damped Newton from K = 0 with geometric load continuation keeps the
    iteration on the minimiser branch with phase in (-pi/2, 0] for c > 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = profile.grid
    Bbar = profile.values
    c = load.magnitude
    arm = load.arm_values(grid)
    K = np.zeros(grid.nodes.size)
    if c == 0.0:
        return PhaseSolution1D(grid, K, True, 0, 0.0, load)

    # continuation ramp: geometric, factor <= 2, ending exactly at c
    n_steps = max(1, int(np.ceil(np.log2(max(c / 2.0, 1.0)))) + 1)
    ramp = c * (2.0 ** -np.arange(n_steps - 1, -1, -1))
    total_iters = 0
    for c_step in ramp:
        res, jac = _assemble_residual_jac(grid, Bbar, c_step, arm, K)
        rnorm = np.linalg.norm(res[1:])
        it = 0
        while rnorm > tol:
            it += 1
            total_iters += 1
            if it > max_iters:
                raise NonConvergence(
                    f"state Newton stalled at residual {rnorm:.3e} (c = {c_step:g})",
                    best=PhaseSolution1D(grid, K, False, total_iters, rnorm, load))
            diag, off = jac
            dK = _solve_tridiag_dirichlet0(diag, off, -res)
            step = 1.0
            while step >= 2 ** -20:
                K_try = K.copy()
                K_try[1:] += step * dK
                res_try, jac_try = _assemble_residual_jac(grid, Bbar, c_step, arm, K_try)
                rn_try = np.linalg.norm(res_try[1:])
                if rn_try <= (1.0 - 0.25 * step) * rnorm or rn_try <= tol:
                    K, res, jac, rnorm = K_try, res_try, jac_try, rn_try
                    break
                step *= 0.5
            else:
                raise NonConvergence(
                    f"state Newton line search failed at residual {rnorm:.3e}",
                    best=PhaseSolution1D(grid, K, False, total_iters, rnorm, load))
    # polish: a couple of undamped steps push the residual to roundoff level,
    # which keeps scale invariance tests meaningful
    for _ in range(2):
        if rnorm == 0.0:
            break
        diag, off = jac
        dK = _solve_tridiag_dirichlet0(diag, off, -res)
        K_try = K.copy()
        K_try[1:] += dK
        res_try, jac_try = _assemble_residual_jac(grid, Bbar, c, arm, K_try)
        rn_try = np.linalg.norm(res_try[1:])
        if rn_try < rnorm:
            K, res, jac, rnorm = K_try, res_try, jac_try, rn_try
        else:
            break
    return PhaseSolution1D(grid, K, True, total_iters, float(rnorm), load)


def phase_to_curve(sol: PhaseSolution1D) -> ProfileCurve:
    """Profile curve from the clamped end, one exact-arclength step per cell.

    Each increment is h * (cos K_mid, sin K_mid) with the midpoint phase, so
    consecutive points are exactly one cell width apart (the profile polyline
    is isometric to machine precision).
    """
    if not sol.converged:
        raise NonConvergence("phase solution did not converge", best=sol)
    K = sol.phase
    h = sol.grid.h
    Kmid = 0.5 * (K[:-1] + K[1:])
    steps = np.stack([h * np.cos(Kmid), h * np.sin(Kmid)], axis=1)
    pts = np.vstack([[0.0, 0.0], np.cumsum(steps, axis=0)])
    normals = np.stack([-np.sin(K), np.cos(K)], axis=1)
    return ProfileCurve(points=pts, normals=normals)


def compliance_1d(sol: PhaseSolution1D) -> float:
    """int (1-t) |sin K| by the assembly quadrature; requires K in (-pi, 0]."""
    if not sol.converged:
        raise NonConvergence("phase solution did not converge", best=sol)
    K = sol.phase
    if np.any(K > 1e-12) or np.any(K <= -np.pi):
        raise DomainError("phase left the admissible range (-pi, 0]")
    grid = sol.grid
    xg = _GAUSS3_X[None, :]
    Kg = _interp_nodal(K, xg)
    arm = sol.load.arm_values(grid) if sol.load is not None else 1.0 - grid.nodes
    armg = _interp_nodal(arm, xg)
    w = _GAUSS3_W[None, :] * grid.h[:, None]
    return float((w * armg * np.abs(np.sin(Kg))).sum())


def material_cost(theta_cells: np.ndarray, grid: Grid1D) -> float:
    """Exact integral of a per-cell design fraction."""
    return float(np.dot(np.asarray(theta_cells, dtype=float), grid.h))


def total_cost_1d(design, load: LoadSpec1D, c_l: float, tol: float = 1e-10) -> float:
    """Compliance of the induced hardness plus c_l * int theta.

    `design` is a RelaxedDesign (see design1d); exposed here because the cost
    belongs to the state model.
    """
    if c_l < 0:
        raise ValueError("c_l must be >= 0")
    sol = solve_state_1d(design.profile(), load, tol)
    return compliance_1d(sol) + c_l * material_cost(design.theta, design.grid)
