"""Relaxed 1D design optimization, baseline designs, and comparison study."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .adjoint1d import design_gradient_1d, kkt_residual_1d, kp_cells, solve_adjoint_1d
from .errors import MalformedProfile, NonConvergence
from .grid1d import (Grid1D, LoadSpec1D, MaterialProfile1D, compliance_1d,
                     material_cost, solve_state_1d, total_cost_1d)


@dataclass
class RelaxedDesign:
    """Per-cell hard-material fraction in [0, 1] with hardness B = (1-t)a + t b."""

    grid: Grid1D
    theta: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        self.theta = np.ascontiguousarray(self.theta, dtype=float)
        if self.theta.shape != (self.grid.n_cells,):
            raise ValueError("theta must have one value per cell")
        if np.any(self.theta < -1e-12) or np.any(self.theta > 1 + 1e-12):
            raise ValueError("theta must lie in [0, 1]")
        if not (self.a > 0 and self.b > self.a):
            raise ValueError("bounds must satisfy 0 < a < b")

    @classmethod
    def constant(cls, grid: Grid1D, theta: float, a: float, b: float) -> "RelaxedDesign":
        return cls(grid, np.full(grid.n_cells, float(theta)), a, b)

    def hardness(self) -> np.ndarray:
        return (1.0 - self.theta) * self.a + self.theta * self.b

    def profile(self) -> MaterialProfile1D:
        return MaterialProfile1D(self.grid, self.hardness(), self.a, self.b)

    def with_theta(self, theta) -> "RelaxedDesign":
        return replace(self, theta=np.asarray(theta, dtype=float))


@dataclass
class DesignStructure:
    """Hard plateau / strictly decreasing transition / soft plateau layout."""

    all_soft: bool
    t0: float
    t1: float
    monotone_violation: float


@dataclass(frozen=True)
class BaselineDesign:
    """The three reference layouts of hard material with area fraction V."""

    kind: str  # "I", "II" or "III"
    V: float
    a: float
    b: float

    def __post_init__(self):
        if self.kind not in ("I", "II", "III"):
            raise ValueError("kind must be one of I, II, III")
        if not 0.0 < self.V < 1.0:
            raise ValueError("V must lie in (0, 1)")


def averaged_profile(design: BaselineDesign, grid: Grid1D) -> MaterialProfile1D:
    """Width-averaged hardness of a baseline design, exact per cell.

    I: hard layer (0, V) at the clamp; II: hard strip along the plate,
    constant average V b + (1 - V) a; III: hard square of side sqrt(V) at the
    clamp, average sqrt(V) b + (1 - sqrt(V)) a on (0, sqrt(V)).
    """
    a, b, V = design.a, design.b, design.V
    t0, t1 = grid.nodes[:-1], grid.nodes[1:]
    h = grid.h
    if design.kind == "II":
        vals = np.full(grid.n_cells, V * b + (1 - V) * a)
    else:
        if design.kind == "I":
            cut, hard_avg = V, b
        else:
            cut = np.sqrt(V)
            hard_avg = cut * b + (1 - cut) * a
        frac = np.clip((np.minimum(t1, cut) - t0) / h, 0.0, 1.0)
        vals = frac * hard_avg + (1 - frac) * a
    return MaterialProfile1D(grid, vals, a, b)


def compare_designs(V: float, loads, a: float, b: float, grid: Grid1D,
                    tol: float = 1e-10):
    """Compliance of designs I/II/III per load; returns (rows, crossovers).

    Each row is a dict with the load, three compliances and the best design.
    Crossovers list the loads at which the best design changes.
    """
    profiles = {k: averaged_profile(BaselineDesign(k, V, a, b), grid)
                for k in ("I", "II", "III")}
    rows = []
    for c in loads:
        load = LoadSpec1D(float(c))
        row = {"load": float(c)}
        for k, prof in profiles.items():
            row[f"compliance_{k}"] = compliance_1d(solve_state_1d(prof, load, tol))
        row["best"] = min(("I", "II", "III"), key=lambda k: row[f"compliance_{k}"])
        rows.append(row)
    crossovers = [rows[i]["load"] for i in range(1, len(rows))
                  if rows[i]["best"] != rows[i - 1]["best"]]
    return rows, crossovers


def _solve_pair(design: RelaxedDesign, load: LoadSpec1D, tol: float):
    prof = design.profile()
    state = solve_state_1d(prof, load, tol)
    adj = solve_adjoint_1d(prof, state, load, tol)
    return state, adj


def optimize_projected_gradient(init: RelaxedDesign, load: LoadSpec1D, c_l: float,
                                max_iters: int = 500, tol: float = 1e-8,
                                state_tol: float = 1e-11):
    """Projected gradient with Armijo backtracking on theta in [0,1]^n.

    Stops when the projected-gradient norm falls below tol.  Raises
    NonConvergence with the best iterate attached after max_iters.
    """
    design = init
    grid = design.grid
    h = grid.h
    cost = total_cost_1d(design, load, c_l, state_tol)
    step0 = 1.0
    for _ in range(max_iters):
        state, adj = _solve_pair(design, load, state_tol)
        g = design_gradient_1d(design, state, adj, c_l)
        # projected gradient (density scaled by cell measure for the norm)
        proj = np.clip(design.theta - g, 0.0, 1.0) - design.theta
        pg_norm = float(np.sqrt(np.sum(proj * proj * h)))
        if pg_norm <= tol:
            return design
        step = step0
        accepted = False
        while step >= 2 ** -30:
            theta_try = np.clip(design.theta - step * g, 0.0, 1.0)
            d = theta_try - design.theta
            decrease = float(np.sum(g * d * h))
            try_design = design.with_theta(theta_try)
            cost_try = total_cost_1d(try_design, load, c_l, state_tol)
            if cost_try <= cost + 1e-4 * decrease + 1e-15:
                design, cost = try_design, cost_try
                # generous growth identifies active bounds where the gradient
                # is tiny (free-end cells); Armijo still safeguards
                step0 = min(step * 4.0, 1e12)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # gradient direction yields no decrease: stationary within roundoff
            return design
    raise NonConvergence(f"projected gradient: {max_iters} iterations, "
                         f"projected norm {pg_norm:.3e}", best=design)


def optimize_fixed_point(load: LoadSpec1D, c_l: float, a: float, b: float,
                         grid: Grid1D, tol: float = 1e-6, max_iters: int = 600,
                         init: RelaxedDesign | None = None,
                         state_tol: float = 1e-11):
    """Damped fixed point B <- clamp(sqrt(kp / cl'), a, b) from the optimality
    condition; falls back to projected gradient if it stalls.

    Returns (design, info) with info["method"] in {fixed_point, projected_gradient}.
    """
    if c_l <= 0:
        raise ValueError("fixed point iteration needs c_l > 0")
    design = init if init is not None else RelaxedDesign.constant(grid, 0.5, a, b)
    clp = c_l / (b - a)
    relax = 0.5
    cost_prev = np.inf
    best = (np.inf, design)
    for it in range(max_iters):
        state, adj = _solve_pair(design, load, state_tol)
        res = kkt_residual_1d(design, state, adj, c_l)
        cost = compliance_1d(state) + c_l * material_cost(design.theta, grid)
        if cost < best[0]:
            best = (cost, design)
        if res <= tol:
            return design, {"method": "fixed_point", "iters": it, "kkt_residual": res}
        kp = kp_cells(design, state, adj)
        B_new = np.clip(np.sqrt(np.maximum(kp, 0.0) / clp), a, b)
        theta_new = (B_new - a) / (b - a)
        if cost > cost_prev + 1e-14:
            relax = max(relax * 0.5, 0.02)
        cost_prev = cost
        design = design.with_theta(design.theta + relax * (theta_new - design.theta))
    # stall: hand over to the projected gradient from the best iterate
    try:
        design = optimize_projected_gradient(best[1], load, c_l,
                                             max_iters=800, tol=1e-10,
                                             state_tol=state_tol)
    except NonConvergence as exc:
        design = exc.best
    state, adj = _solve_pair(design, load, state_tol)
    res = kkt_residual_1d(design, state, adj, c_l)
    if res > tol:
        raise NonConvergence(f"fixed point + fallback reached KKT residual {res:.3e}",
                             best=design)
    return design, {"method": "projected_gradient", "iters": max_iters,
                    "kkt_residual": res}


def extract_structure(design: RelaxedDesign, tol_plateau: float = 1e-3) -> DesignStructure:
    """Locate the hard prefix, the decreasing transition and the soft suffix."""
    theta = design.theta
    mids = design.grid.midpoints
    if np.all(theta <= tol_plateau):
        return DesignStructure(True, 0.0, 0.0, 0.0)
    hard = theta >= 1.0 - tol_plateau
    soft = theta <= tol_plateau
    # right end of the leading hard plateau
    if hard[0]:
        i0 = np.argmin(hard) if not hard.all() else theta.size
        t0 = float(design.grid.nodes[i0])
    else:
        t0 = 0.0
    # left end of the trailing soft plateau
    if not soft[-1]:
        if np.all(hard):
            return DesignStructure(False, 1.0, 1.0, 0.0)
        raise MalformedProfile("design has no soft suffix but is not all hard")
    rev_soft = soft[::-1]
    run_len = theta.size if rev_soft.all() else int(np.argmin(rev_soft))
    i1 = theta.size - run_len  # first cell of the soft suffix
    t1 = float(design.grid.nodes[i1])
    inside = (mids > t0) & (mids < t1)
    th_in = theta[inside]
    violation = float(np.max(np.diff(th_in))) if th_in.size > 1 else 0.0
    return DesignStructure(False, t0, t1, max(violation, 0.0))


def threshold_cl(load: LoadSpec1D, a: float, b: float, grid: Grid1D,
                 tol_plateau: float = 1e-4, rel_tol: float = 5e-3) -> float:
    """Smallest material cost at which the optimal design is all soft.

    Bisection on c_l over runs of the fixed-point optimizer.  When the adjoint
    landmark tau equals 1 this matches (b - a) ||kp||_inf / a^2 evaluated at
    theta = 0 (the closed-form optimality threshold) within a few percent.
    """
    if load.magnitude == 0:
        return 0.0
    base = RelaxedDesign.constant(grid, 0.0, a, b)
    state, adj = _solve_pair(base, load, 1e-11)
    kp0 = float(np.max(np.abs(kp_cells(base, state, adj))))
    guess = (b - a) * kp0 / (a * a)

    def all_soft(c_l: float) -> bool:
        design, _ = optimize_fixed_point(load, c_l, a, b, grid, tol=1e-6,
                                         init=RelaxedDesign.constant(grid, 0.2, a, b))
        return bool(np.all(design.theta <= tol_plateau))

    lo, hi = 0.25 * guess, 2.0 * guess
    while not all_soft(hi):
        lo, hi = hi, 2.0 * hi
    while all_soft(lo):
        hi, lo = lo, 0.5 * lo
        if lo < 1e-12 * guess:
            return 0.0
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if all_soft(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
