import numpy as np
import pytest

from platedesign import (Grid1D, LoadSpec1D, MaterialProfile1D, RelaxedDesign,
                         design_gradient_1d, kkt_residual_1d, kp_cells,
                         solve_adjoint_1d, solve_state_1d, total_cost_1d)
from platedesign.grid1d import _GAUSS3_W, _GAUSS3_X, _interp_nodal


def solve_pair(profile, load, tol=1e-11):
    st = solve_state_1d(profile, load, tol)
    return st, solve_adjoint_1d(profile, st, load)


def random_design(rng, grid, a=1.0, b=100.0, smooth=False):
    n = grid.n_cells
    if smooth:
        t = grid.midpoints
        theta = 0.5 + 0.4 * np.sin(2 * np.pi * (rng.random() + t * rng.integers(1, 4)))
    else:
        theta = rng.random(n)
    return RelaxedDesign(grid, np.clip(theta, 0, 1), a, b)


class TestAdjointSolve:
    def test_zero_load_closed_form(self):
        grid = Grid1D.uniform(128)
        prof = MaterialProfile1D.constant(grid, 1.0)
        load = LoadSpec1D(0.0)
        st = solve_state_1d(prof, load, 1e-12)
        adj = solve_adjoint_1d(prof, st, load)
        # (P')' = (1-t), P(0)=0, P'(1)=0  =>  P = ((1-t)^3 - 1)/6
        P_exact = ((1.0 - grid.nodes) ** 3 - 1.0) / 6.0
        assert np.max(np.abs(adj.P - P_exact)) < 1e-10

    def test_adjoint_negative_interior(self):
        grid = Grid1D.uniform(512)
        st, adj = solve_pair(MaterialProfile1D.constant(grid, 1.0), LoadSpec1D(1.0))
        assert np.all(adj.P[1:] < 0)

    def test_single_interior_switch_at_high_load(self):
        grid = Grid1D.uniform(1024)
        st, adj = solve_pair(MaterialProfile1D.constant(grid, 1.0), LoadSpec1D(20.0))
        assert adj.tau < 1.0
        assert adj.tau0 is not None and 0 < adj.tau0 < adj.tau
        # flux vanishes at the free end and changes sign exactly once inside
        assert abs(adj.p[-1]) < 5e-7
        signs = np.sign(adj.p[1:-1])
        changes = np.count_nonzero(np.diff(signs) != 0)
        assert changes == 1

    def test_lemma_sign_structure_random_designs(self):
        rng = np.random.default_rng(11)
        grid = Grid1D.uniform(512)
        for k in range(20):
            design = random_design(rng, grid)
            load = LoadSpec1D(float(rng.uniform(0.5, 25.0)))
            st, adj = solve_pair(design.profile(), load, tol=1e-10)
            assert np.all(adj.P[1:] < 0)
            p = adj.p
            t = grid.nodes
            inc = t[:-1] < adj.tau - 1e-9
            dec = t[1:] > adj.tau + 1e-9
            dp = np.diff(p)
            assert np.all(dp[inc] > -1e-10)
            assert np.all(dp[dec] < 1e-10)
            if adj.tau < 1.0:
                inside = (t > 1e-9) & (t < adj.tau)
                pin = p[inside]
                # single zero tau0: negative before, positive after
                assert adj.tau0 is not None
                assert np.all(pin[t[inside] < adj.tau0 - 1e-6] < 0)
                assert np.all(pin[t[inside] > adj.tau0 + 1e-6] > 0)

    def test_kp_monotone_before_tau(self):
        rng = np.random.default_rng(5)
        grid = Grid1D.uniform(512)
        for _ in range(5):
            design = random_design(rng, grid, smooth=True)
            load = LoadSpec1D(3.0)
            st, adj = solve_pair(design.profile(), load)
            kp = kp_cells(design, st, adj)
            mids = grid.midpoints
            before = mids < adj.tau - 1e-6
            assert np.all(np.diff(kp[before]) <= 1e-10)


class TestAdjointConsistency:
    def test_two_way_assembly(self):
        # Solve the linearized state for a random hardness perturbation and
        # assemble int beta K'P' from both equation pairings.
        rng = np.random.default_rng(2)
        grid = Grid1D.uniform(256)
        design = random_design(rng, grid)
        prof = design.profile()
        load = LoadSpec1D(2.0)
        st, adj = solve_pair(prof, load)
        K, P = st.phase, adj.P
        h, c = grid.h, load.magnitude
        beta = rng.standard_normal(grid.n_cells)

        from platedesign.grid1d import _assemble_residual_jac, _solve_tridiag_dirichlet0
        arm = load.arm_values(grid)
        _, (diag, off) = _assemble_residual_jac(grid, prof.values, c, arm, K)
        # rhs of the linearized state: -(beta K')' tested with hats
        Kp = np.diff(K) / h
        rhs = np.zeros(grid.n_cells + 1)
        np.add.at(rhs, np.arange(grid.n_cells), beta * Kp)
        np.add.at(rhs, np.arange(1, grid.n_cells + 1), -beta * Kp)
        dK = np.concatenate([[0.0], _solve_tridiag_dirichlet0(diag, off, rhs)])

        # way 1: direct quantity int beta K' P'
        Pp = np.diff(P) / h
        direct = float(np.sum(beta * Kp * Pp * h))
        # way 2: compliance variation int arm cos K dK by assembly quadrature
        xg = _GAUSS3_X[None, :]
        w = _GAUSS3_W[None, :] * h[:, None]
        val = (w * _interp_nodal(arm, xg) * np.cos(_interp_nodal(K, xg))
               * _interp_nodal(dK, xg)).sum()
        assert abs(direct - val) < 1e-10 * max(1.0, abs(direct))


class TestDesignGradient:
    def test_zero_load_gradient_is_material_cost(self):
        grid = Grid1D.uniform(64)
        design = RelaxedDesign.constant(grid, 0.4, 1.0, 100.0)
        load = LoadSpec1D(0.0)
        st, adj = solve_pair(design.profile(), load)
        g = design_gradient_1d(design, st, adj, c_l=0.7)
        assert np.allclose(g, 0.7, atol=1e-14)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        grid = Grid1D.uniform(256)
        load = LoadSpec1D(1.0)
        c_l = 0.01
        theta0 = rng.random(grid.n_cells)
        design = RelaxedDesign(grid, theta0, 1.0, 100.0)
        st, adj = solve_pair(design.profile(), load)
        g = design_gradient_1d(design, st, adj, c_l)
        idx = rng.choice(grid.n_cells, 40, replace=False)
        fd = np.zeros(idx.size)
        for j, i in enumerate(idx):
            e = np.zeros(grid.n_cells)
            e[i] = 1e-6
            up = total_cost_1d(design.with_theta(theta0 + e), load, c_l, 1e-12)
            dn = total_cost_1d(design.with_theta(theta0 - e), load, c_l, 1e-12)
            fd[j] = (up - dn) / 2e-6 / grid.h[i]
        assert np.linalg.norm(fd - g[idx]) / np.linalg.norm(fd) < 1e-5

    def test_cl_shift(self):
        rng = np.random.default_rng(4)
        grid = Grid1D.uniform(64)
        design = random_design(rng, grid)
        load = LoadSpec1D(2.0)
        st, adj = solve_pair(design.profile(), load)
        g1 = design_gradient_1d(design, st, adj, c_l=0.0)
        g2 = design_gradient_1d(design, st, adj, c_l=0.3)
        assert np.allclose(g2 - g1, 0.3, atol=1e-14)


class TestKktResidual:
    def test_all_soft_above_threshold(self):
        grid = Grid1D.uniform(256)
        design = RelaxedDesign.constant(grid, 0.0, 1.0, 100.0)
        load = LoadSpec1D(1.0)
        st, adj = solve_pair(design.profile(), load)
        kp_max = float(np.max(kp_cells(design, st, adj)))
        c_l = 1.5 * (design.b - design.a) * kp_max  # above the a^2-threshold
        assert kkt_residual_1d(design, st, adj, c_l) == 0.0

    def test_all_hard_zero_material_cost(self):
        grid = Grid1D.uniform(256)
        design = RelaxedDesign.constant(grid, 1.0, 1.0, 100.0)
        load = LoadSpec1D(5.0)
        st, adj = solve_pair(design.profile(), load)
        assert kkt_residual_1d(design, st, adj, c_l=0.0) == 0.0
