"""Adjoint equation of the 1D model, design gradient, KKT residual, landmarks.

The adjoint of the compliance satisfies

    (B P')' = arm(t) cos K - c arm(t) P sin K,   P(0) = 0,  P'(1) = 0,

and the compliance part of the design derivative has density -K'P' with
respect to the hardness average.  The derivative with respect to the material
fraction theta picks up the chain-rule factor (b - a); the KKT thresholds are
evaluated with the correspondingly rescaled material cost.  Set
``paper_convention=True`` to drop the factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularSystem
from .grid1d import (_GAUSS3_W, _GAUSS3_X, Grid1D, LoadSpec1D, MaterialProfile1D,
                     PhaseSolution1D, _interp_nodal, _solve_tridiag_dirichlet0)


@dataclass
class AdjointSolution1D:
    grid: Grid1D
    P: np.ndarray          # nodal adjoint values
    p: np.ndarray          # nodal B*P' (cell values averaged to nodes)
    p_cells: np.ndarray    # cellwise B*P'
    tau: float             # where c*P crosses cot K (1.0 when no crossing)
    tau0: float | None     # zero of p in (0, tau); None when tau == 1
    residual_norm: float


def _cells_to_nodes(vals: np.ndarray) -> np.ndarray:
    out = np.empty(vals.size + 1)
    out[0] = vals[0]
    out[-1] = vals[-1]
    out[1:-1] = 0.5 * (vals[:-1] + vals[1:])
    return out


def _detect_tau(grid: Grid1D, P: np.ndarray, K: np.ndarray, c: float) -> float:
    """First crossing of c*P below cot K, scanning interior nodes."""
    t = grid.nodes
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = c * P - np.cos(K) / np.sin(K)
    psi[0] = np.inf  # cot K(0) = -inf, so c P - cot K starts positive
    psi = np.where(np.isfinite(psi), psi, np.inf)
    below = np.flatnonzero(psi[1:] <= 0.0) + 1
    if below.size == 0:
        return 1.0
    i = below[0]
    # linear interpolation between node i-1 (psi > 0) and node i
    a, b = psi[i - 1], psi[i]
    if not np.isfinite(a) or a <= 0:
        return float(t[i])
    s = a / (a - b) if a != b else 0.5
    return float(t[i - 1] + s * (t[i] - t[i - 1]))


def _detect_tau0(grid: Grid1D, p: np.ndarray, tau: float) -> float | None:
    if tau >= 1.0:
        return None
    t = grid.nodes
    inside = t < tau
    sign_change = np.flatnonzero((p[:-1] < 0) & (p[1:] >= 0) & inside[:-1])
    if sign_change.size == 0:
        return None
    i = sign_change[0]
    a, b = p[i], p[i + 1]
    s = a / (a - b) if a != b else 0.5
    return float(t[i] + s * (t[i + 1] - t[i]))


def solve_adjoint_1d(profile: MaterialProfile1D, state: PhaseSolution1D,
                     load: LoadSpec1D, tol: float = 1e-10) -> AdjointSolution1D:
    """Linear Galerkin solve of the adjoint with the state's Jacobian matrix."""
    if not state.converged:
        raise ValueError("state must be converged")
    grid = profile.grid
    if grid.nodes.shape != state.grid.nodes.shape or np.any(grid.nodes != state.grid.nodes):
        raise ValueError("profile and state live on different grids")
    K = state.phase
    c = load.magnitude
    arm = load.arm_values(grid)
    h = grid.h
    n = grid.n_cells
    xg = _GAUSS3_X[None, :]
    armg = _interp_nodal(arm, xg)
    Kg = _interp_nodal(K, xg)
    w = _GAUSS3_W[None, :] * h[:, None]

    # system matrix: Jacobian of the state residual at K (symmetric tridiagonal)
    sing = np.sin(Kg)
    m00 = -(w * armg * sing * (1 - xg) ** 2).sum(axis=1)
    m01 = -(w * armg * sing * (1 - xg) * xg).sum(axis=1)
    m11 = -(w * armg * sing * xg ** 2).sum(axis=1)
    s = profile.values / h
    diag = np.zeros(n + 1)
    diag[:-1] += s + c * m00
    diag[1:] += s + c * m11
    off = -s + c * m01

    # right-hand side: -d(compliance)/dK, i.e. -int arm cos K phi_i
    cosg = np.cos(Kg)
    L = np.zeros(n + 1)
    np.add.at(L, np.arange(n), -(w * armg * cosg * (1 - xg)).sum(axis=1))
    np.add.at(L, np.arange(1, n + 1), -(w * armg * cosg * xg).sum(axis=1))

    try:
        P_int = _solve_tridiag_dirichlet0(diag, off, L)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises ValueError
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(P_int)):
        raise SingularSystem("adjoint system produced non-finite values")
    P = np.concatenate([[0.0], P_int])

    # residual check (tridiagonal multiply)
    res = np.zeros(n + 1)
    res += diag * P
    res[:-1] += off * P[1:]
    res[1:] += off * P[:-1]
    rnorm = float(np.linalg.norm(res[1:] - L[1:]))
    if rnorm > max(tol, 1e-8 * max(1.0, float(np.abs(L).max()))):
        raise SingularSystem(f"adjoint residual {rnorm:.3e} exceeds tolerance")

    p_cells = profile.values * np.diff(P) / h
    p = _cells_to_nodes(p_cells)
    tau = _detect_tau(grid, P, K, c) if c > 0 else 1.0
    tau0 = _detect_tau0(grid, p, tau)
    return AdjointSolution1D(grid, P, p, p_cells, tau, tau0, rnorm)


def design_gradient_1d(design, state: PhaseSolution1D, adj: AdjointSolution1D,
                       c_l: float, paper_convention: bool = False) -> np.ndarray:
    """Per-cell gradient density of the total cost with respect to theta.

    g = -(b - a) K' P' + c_l, validated against finite differences of
    total_cost_1d.  With paper_convention the (b - a) factor is dropped.
    """
    grid = design.grid
    h = grid.h
    Kp = np.diff(state.phase) / h
    Pp = np.diff(adj.P) / h
    factor = 1.0 if paper_convention else (design.b - design.a)
    return -factor * Kp * Pp + c_l


def kkt_residual_1d(design, state: PhaseSolution1D, adj: AdjointSolution1D,
                    c_l: float, paper_convention: bool = False,
                    plateau_tol: float = 1e-9) -> float:
    """Maximal pointwise violation of the three-branch optimality condition.

    On {theta=0}: kp <= cl' a^2; on {theta=1}: kp >= cl' b^2; in between
    kp = cl' B^2, where kp = B^2 K'P' and cl' = c_l / (b - a) unless
    paper_convention is set.
    """
    grid = design.grid
    theta = design.theta
    a, b = design.a, design.b
    B = design.hardness()
    h = grid.h
    kp = B * B * (np.diff(state.phase) / h) * (np.diff(adj.P) / h)
    clp = c_l if paper_convention else c_l / (b - a)
    viol = np.empty_like(kp)
    lo = theta <= plateau_tol
    hi = theta >= 1.0 - plateau_tol
    mid = ~(lo | hi)
    viol[lo] = np.maximum(kp[lo] - clp * a * a, 0.0)
    viol[hi] = np.maximum(clp * b * b - kp[hi], 0.0)
    viol[mid] = np.abs(kp[mid] - clp * B[mid] ** 2)
    return float(viol.max()) if viol.size else 0.0


def kp_cells(design, state: PhaseSolution1D, adj: AdjointSolution1D) -> np.ndarray:
    """Cellwise product (B K')(B P'), the quantity steering the optimal design."""
    B = design.hardness()
    h = design.grid.h
    return B * B * (np.diff(state.phase) / h) * (np.diff(adj.P) / h)
