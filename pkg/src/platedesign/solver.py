"""Sparse symmetric-indefinite KKT solves sized to the machine.

Small systems go through SuperLU in float64 with a fill-reducing ordering.
Large systems (the finest uniform plate levels) exceed memory in float64, so
they are ordered by a geometric nested dissection on the node graph, factored
in float32, and the solution is recovered to float64 accuracy by iterative
refinement against the double-precision matrix.  Diagonal equilibration keeps
the refinement contraction well below one.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import SingularKKT

LARGE_SYSTEM_N = 300_000


def nested_dissection_order(rows, cols, xy, leaf_size: int = 64) -> np.ndarray:
    """Geometric nested dissection ordering of a planar graph.

    rows/cols: symmetric adjacency (one direction suffices); xy: coordinates.
    Returns the elimination order (old ids in elimination sequence).
    """
    n = xy.shape[0]
    adj_r = np.concatenate([rows, cols])
    adj_c = np.concatenate([cols, rows])
    A = sp.csr_matrix((np.ones(adj_r.size, dtype=bool), (adj_r, adj_c)), shape=(n, n))
    order = np.empty(n, dtype=np.int64)
    pos = 0
    side = np.zeros(n, dtype=np.int8)
    stack = [np.arange(n)]
    out_stack = []
    # iterative post-order: children first, separator last
    while stack:
        nodes = stack.pop()
        if isinstance(nodes, tuple):  # separator marker
            sep = nodes[0]
            order[pos:pos + sep.size] = sep
            pos += sep.size
            continue
        if nodes.size <= leaf_size:
            order[pos:pos + nodes.size] = nodes
            pos += nodes.size
            continue
        pts = xy[nodes]
        d = 0 if np.ptp(pts[:, 0]) >= np.ptp(pts[:, 1]) else 1
        med = np.median(pts[:, d])
        left_mask = pts[:, d] < med
        if left_mask.sum() == 0 or left_mask.sum() == nodes.size:
            order[pos:pos + nodes.size] = nodes
            pos += nodes.size
            continue
        side[nodes[left_mask]] = 1
        side[nodes[~left_mask]] = 2
        nbr = A[nodes[left_mask]].indices
        sep_ids = np.unique(nbr[side[nbr] == 2])
        side[nodes] = 0
        sep_mask = np.zeros(n, dtype=bool)
        sep_mask[sep_ids] = True
        L = nodes[left_mask]
        R = nodes[~left_mask & ~sep_mask[nodes]]
        S = nodes[~left_mask & sep_mask[nodes]]
        stack.append((S,))
        stack.append(R)
        stack.append(L)
    assert pos == n
    return order


class KktSolver:
    """Factor a sparse KKT (or SPD-ish) system once, solve many right sides."""

    def __init__(self, K: sp.spmatrix, perm: np.ndarray | None = None,
                 force_mixed: bool | None = None):
        """perm lists the dof ids in elimination order (e.g. from nested
        dissection); None selects SuperLU's own fill-reducing ordering."""
        K = K.tocsc()
        n = K.shape[0]
        self.n = n
        mixed = (n > LARGE_SYSTEM_N) if force_mixed is None else force_mixed

        # symmetric equilibration
        d = np.abs(K).max(axis=1).toarray().ravel()
        d[d == 0] = 1.0
        self.scale = 1.0 / np.sqrt(d)
        S = sp.diags(self.scale)
        Ks = (S @ K @ S).tocsc()
        self.perm = np.asarray(perm, dtype=np.int64) if perm is not None else None

        if self.perm is not None:
            Kp = Ks[self.perm][:, self.perm].tocsc()
            permc = "NATURAL"
        else:
            Kp = Ks
            permc = "MMD_AT_PLUS_A"

        self.mixed = mixed
        self._K64 = Ks.tocsr() if mixed else None
        try:
            if mixed:
                self.lu = sla.splu(Kp.astype(np.float32), permc_spec=permc,
                                   diag_pivot_thresh=0.01,
                                   options=dict(SymmetricMode=True))
            else:
                self.lu = sla.splu(Kp, permc_spec=permc, diag_pivot_thresh=0.1,
                                   options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise SingularKKT(f"sparse factorization failed: {exc}") from exc

    def _apply_lu(self, r):
        rp = r[self.perm] if self.perm is not None else r
        if self.mixed:
            xp = self.lu.solve(rp.astype(np.float32)).astype(np.float64)
        else:
            xp = self.lu.solve(rp)
        if self.perm is not None:
            out = np.empty_like(xp)
            out[self.perm] = xp
            return out
        return xp

    def solve(self, rhs: np.ndarray, rtol: float = 1e-12, max_refine: int = 40) -> np.ndarray:
        b = rhs * self.scale
        x = self._apply_lu(b)
        if self.mixed:
            bnorm = np.linalg.norm(b)
            if bnorm == 0:
                return np.zeros_like(b)
            prev = np.inf
            for _ in range(max_refine):
                r = b - self._K64 @ x
                rn = np.linalg.norm(r) / bnorm
                if rn < rtol:
                    break
                if rn > 0.9 * prev:  # stagnation
                    break
                prev = rn
                x = x + self._apply_lu(r)
            else:
                rn = np.linalg.norm(b - self._K64 @ x) / bnorm
            if rn > 1e-8:
                raise SingularKKT(f"iterative refinement stalled at {rn:.2e}")
        if not np.all(np.isfinite(x)):
            raise SingularKKT("factorization produced non-finite values")
        return x * self.scale
