"""Reduced-cubic plate element with nodal value/gradient dofs.

Each scalar field carries (value, d1, d2) per node.  On a triangle the local
function is the cubic interpolant reduced by the center-of-mass condition; a
discrete gradient maps the nine local dofs to a quadratic vector field whose
normal component is linear on every edge.  Second derivatives are those of the
discrete gradient.  All element operators are built numerically per element in
a shifted/scaled local frame and vectorized over elements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateTriangle
from .mesh2d import TriMesh
from .quadrature import QuadRule, triangle_rule_degree6

# monomial exponents of P3 in local coordinates
_EXPS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
         (3, 0), (2, 1), (1, 2), (0, 3)]


def _mono_rows(pts):
    """Monomial values at pts (..., 2) -> (..., 10)."""
    x, y = pts[..., 0], pts[..., 1]
    return np.stack([x ** i * y ** j for i, j in _EXPS], axis=-1)


def _mono_grad_rows(pts):
    """Monomial gradients at pts (..., 2) -> (..., 10, 2)."""
    x, y = pts[..., 0], pts[..., 1]
    cols = []
    for i, j in _EXPS:
        gx = i * x ** max(i - 1, 0) * y ** j if i else np.zeros_like(x)
        gy = j * x ** i * y ** max(j - 1, 0) if j else np.zeros_like(x)
        cols.append(np.stack([gx, gy], axis=-1))
    return np.stack(cols, axis=-2)


def _p2_shape(bary):
    """P2 shape values at barycentric points (Q, 3) -> (Q, 6).

    Node order: vertices 0,1,2 then edge midpoints (01), (12), (20).
    """
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    return np.stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ], axis=1)


class DktOperators:
    """Per-mesh element operator cache for the reduced-cubic space."""

    def __init__(self, mesh: TriMesh, quad: QuadRule | None = None):
        self.mesh = mesh
        self.quad = quad if quad is not None else triangle_rule_degree6()
        tri = mesh.triangles
        verts = mesh.tri_coords()  # (m, 3, 2)
        m = mesh.n_triangles
        area = mesh.areas()
        if np.any(area <= 0):
            raise DegenerateTriangle("mesh has degenerate elements")
        self.area = area
        centroid = verts.mean(axis=1)
        scale = np.sqrt(area)
        self.centroid, self.scale = centroid, scale
        loc = (verts - centroid[:, None, :]) / scale[:, None, None]  # (m,3,2)

        # interpolation system M c = R d  (rows: v0,g0x,g0y, v1,..., center)
        M = np.zeros((m, 10, 10))
        vals = _mono_rows(loc)            # (m,3,10)
        grads = _mono_grad_rows(loc)      # (m,3,10,2)
        for i in range(3):
            M[:, 3 * i, :] = vals[:, i]
            M[:, 3 * i + 1, :] = grads[:, i, :, 0] / scale[:, None]
            M[:, 3 * i + 2, :] = grads[:, i, :, 1] / scale[:, None]
        M[:, 9, :] = _mono_rows(np.zeros((m, 2)))
        R = np.zeros((m, 10, 9))
        R[:, :9, :] = np.eye(9)
        d_c = centroid[:, None, :] - verts  # (m,3,2) = p_T - p_i
        for i in range(3):
            R[:, 9, 3 * i] = 1.0 / 3.0
            R[:, 9, 3 * i + 1] = d_c[:, i, 0] / 3.0
            R[:, 9, 3 * i + 2] = d_c[:, i, 1] / 3.0
        try:
            self.coefs = np.linalg.solve(M, R)  # (m,10,9)
        except np.linalg.LinAlgError as exc:
            raise DegenerateTriangle(f"singular element interpolation: {exc}") from exc

        # quadrature points, local coordinates
        qp = self.quad.physical_points(verts)           # (m,Q,2)
        self.qp = qp
        qloc = (qp - centroid[:, None, :]) / scale[:, None, None]
        Q = self.quad.n_points

        # value and gradient maps of the cubic at quadrature points
        self.val_qp = _mono_rows(qloc) @ self.coefs                     # (m,Q,9)
        g = np.einsum("mqcd,mcn->mqdn", _mono_grad_rows(qloc), self.coefs)
        self.grad_qp = g / scale[:, None, None, None]                   # (m,Q,2,9)

        # gradient of the cubic at edge midpoints (for the discrete gradient)
        mid = 0.5 * (verts + np.roll(verts, -1, axis=1))                # (m,3,2)
        mloc = (mid - centroid[:, None, :]) / scale[:, None, None]
        gm = np.einsum("mecd,mcn->medn", _mono_grad_rows(mloc), self.coefs)
        grad_mid = gm / scale[:, None, None, None]                      # (m,3,2,9)

        # discrete gradient: 12 theta dofs (vertex pairs then midpoint pairs)
        T = np.zeros((m, 12, 9))
        for i in range(3):
            T[:, 2 * i, 3 * i + 1] = 1.0
            T[:, 2 * i + 1, 3 * i + 2] = 1.0
        edge = np.roll(verts, -1, axis=1) - verts                       # (m,3,2)
        elen = np.linalg.norm(edge, axis=2)
        that = edge / elen[:, :, None]
        nhat = np.stack([-that[:, :, 1], that[:, :, 0]], axis=2)
        for e in range(3):
            i, j = e, (e + 1) % 3
            t, nrm = that[:, e], nhat[:, e]
            # tangential part interpolates the cubic's midpoint gradient
            tang = np.einsum("md,mdn->mn", t, grad_mid[:, e])           # (m,9)
            row_t = t[:, :, None] * tang[:, None, :]                    # (m,2,9)
            # normal part is the endpoint average (makes theta.n edge-linear)
            avg = np.zeros((m, 2, 9))
            for (v, w_) in ((i, 0.5), (j, 0.5)):
                avg[:, 0, 3 * v + 1] += w_
                avg[:, 1, 3 * v + 2] += w_
            ndot = np.einsum("md,mdn->mn", nrm, avg)
            row_n = nrm[:, :, None] * ndot[:, None, :]
            T[:, 6 + 2 * e, :] = row_t[:, 0] + row_n[:, 0]
            T[:, 6 + 2 * e + 1, :] = row_t[:, 1] + row_n[:, 1]
        self.t_dg = T

        # P2 gradients at quadrature points (for grad of the discrete gradient)
        lam_grad = self._barycentric_gradients(verts)                   # (m,3,2)
        bary = self.quad.points                                        # (Q,3)
        dN = np.zeros((m, Q, 6, 2))
        for i in range(3):
            dN[:, :, i, :] = (4 * bary[None, :, i, None] - 1) * lam_grad[:, None, i, :]
        pairs = ((0, 1), (1, 2), (2, 0))
        for k, (i, j) in enumerate(pairs):
            dN[:, :, 3 + k, :] = 4 * (bary[None, :, j, None] * lam_grad[:, None, i, :]
                                      + bary[None, :, i, None] * lam_grad[:, None, j, :])
        self.p2_val = _p2_shape(bary)                                   # (Q,6)

        # hess map: local scalar dofs -> (d1 th1, d2 th1, d1 th2, d2 th2) at qp
        C = np.zeros((m, Q, 4, 12))
        C[:, :, 0, 0::2] = dN[:, :, :, 0]
        C[:, :, 1, 0::2] = dN[:, :, :, 1]
        C[:, :, 2, 1::2] = dN[:, :, :, 0]
        C[:, :, 3, 1::2] = dN[:, :, :, 1]
        self.hess_qp = np.einsum("mqck,mkn->mqcn", C, T)                # (m,Q,4,9)
        # theta values at qp (quadratic interpolation of the gradient field)
        th = np.zeros((m, Q, 2, 12))
        th[:, :, 0, 0::2] = self.p2_val[None, :, :]
        th[:, :, 1, 1::2] = self.p2_val[None, :, :]
        self.theta_qp = np.einsum("mqck,mkn->mqcn", th, T)              # (m,Q,2,9)

        self.wq = self.quad.weights[None, :] * area[:, None]            # (m,Q)
        self.bary_qp = bary

    @staticmethod
    def _barycentric_gradients(verts):
        e1 = verts[:, 2] - verts[:, 1]
        e2 = verts[:, 0] - verts[:, 2]
        e0 = verts[:, 1] - verts[:, 0]
        twoA = (e0[:, 0] * (-e2[:, 1]) - e0[:, 1] * (-e2[:, 0]))
        g = np.stack([
            np.stack([-e1[:, 1], e1[:, 0]], axis=1),
            np.stack([-e2[:, 1], e2[:, 0]], axis=1),
            np.stack([-e0[:, 1], e0[:, 0]], axis=1),
        ], axis=1)
        return g / twoA[:, None, None]

    # -- dof gathering ------------------------------------------------------

    def local_dofs(self, dofs: np.ndarray) -> np.ndarray:
        """(N,3) scalar or (N,3,3) vector dofs -> (m, [comp,] 9) local arrays."""
        tri = self.mesh.triangles
        if dofs.ndim == 2:
            return dofs[tri].reshape(self.mesh.n_triangles, 9)
        loc = dofs[tri]  # (m,3,comp,3)
        return np.transpose(loc, (0, 2, 1, 3)).reshape(self.mesh.n_triangles, 3, 9)

    def value_at_qp(self, dofs):
        loc = self.local_dofs(dofs)
        return np.einsum("mqn,m...n->mq...", self.val_qp, loc)

    def gradient_at_qp(self, dofs):
        """Exact cubic gradient; scalar -> (m,Q,2), vector -> (m,Q,comp,2)."""
        loc = self.local_dofs(dofs)
        if loc.ndim == 2:
            return np.einsum("mqdn,mn->mqd", self.grad_qp, loc)
        return np.einsum("mqdn,mcn->mqcd", self.grad_qp, loc)

    def theta_at_qp(self, dofs):
        """Discrete-gradient (P2) interpolant of the gradient at qp."""
        loc = self.local_dofs(dofs)
        if loc.ndim == 2:
            return np.einsum("mqdn,mn->mqd", self.theta_qp, loc)
        return np.einsum("mqdn,mcn->mqcd", self.theta_qp, loc)

    def hessian_at_qp(self, dofs):
        """Grad of the discrete gradient; scalar -> (m,Q,2,2), vector adds comp.

        Index order: [alpha, beta] = d_beta theta_alpha.
        """
        loc = self.local_dofs(dofs)
        if loc.ndim == 2:
            h = np.einsum("mqcn,mn->mqc", self.hess_qp, loc)
            return h.reshape(*h.shape[:-1], 2, 2)
        h = np.einsum("mqkn,mcn->mqck", self.hess_qp, loc)
        return h.reshape(*h.shape[:-1], 2, 2)

    def evaluate(self, dofs, elements, points):
        """Evaluate value and gradient of a dof field at arbitrary points.

        elements: (P,) element ids; points: (P,2) physical coordinates.
        Returns (values, gradients) with component axes matching dofs.
        """
        loc = self.local_dofs(dofs)[elements]          # (P,[comp,]9)
        ploc = (points - self.centroid[elements]) / self.scale[elements, None]
        rows = _mono_rows(ploc)                        # (P,10)
        grows = _mono_grad_rows(ploc)                  # (P,10,2)
        coe = self.coefs[elements]                     # (P,10,9)
        vmap = np.einsum("pc,pcn->pn", rows, coe)
        gmap = np.einsum("pcd,pcn->pdn", grows, coe) / self.scale[elements, None, None]
        if loc.ndim == 2:
            return (np.einsum("pn,pn->p", vmap, loc),
                    np.einsum("pdn,pn->pd", gmap, loc))
        return (np.einsum("pn,pkn->pk", vmap, loc),
                np.einsum("pdn,pkn->pkd", gmap, loc))


@dataclass
class DktScalarFn:
    mesh: TriMesh
    dofs: np.ndarray  # (N, 3): value, d1, d2

    def __post_init__(self):
        self.dofs = np.asarray(self.dofs, dtype=float)
        assert self.dofs.shape == (self.mesh.n_vertices, 3)


@dataclass
class DktVectorFn:
    """Three-component displacement in the reduced-cubic space."""

    mesh: TriMesh
    dofs: np.ndarray  # (N, 3 comps, 3): value, d1, d2

    def __post_init__(self):
        self.dofs = np.asarray(self.dofs, dtype=float)
        assert self.dofs.shape == (self.mesh.n_vertices, 3, 3)

    @classmethod
    def zero(cls, mesh: TriMesh) -> "DktVectorFn":
        return cls(mesh, np.zeros((mesh.n_vertices, 3, 3)))

    @classmethod
    def interpolate(cls, mesh: TriMesh, fn, grad_fn) -> "DktVectorFn":
        """Nodal interpolation of an analytic map fn: (x,y) -> R^3 with
        gradient grad_fn: (x,y) -> (3,2)."""
        dofs = np.zeros((mesh.n_vertices, 3, 3))
        for n, (x, y) in enumerate(mesh.vertices):
            dofs[n, :, 0] = fn(x, y)
            dofs[n, :, 1:] = np.asarray(grad_fn(x, y), dtype=float)
        return cls(mesh, dofs)

    def flat(self) -> np.ndarray:
        """Component-major flat vector: index = comp*3N + node*3 + der."""
        return self.dofs.transpose(1, 0, 2).reshape(-1)

    @classmethod
    def from_flat(cls, mesh: TriMesh, vec: np.ndarray) -> "DktVectorFn":
        N = mesh.n_vertices
        return cls(mesh, vec.reshape(3, N, 3).transpose(1, 0, 2))


# -- field sampling helpers -----------------------------------------------


def field_at_qp(ops: DktOperators, field, vector=False):
    """Normalize a material/force field spec to per-quadrature-point values.

    Accepts a constant, nodal array ((N,) or (N,3)), callable of (x, y), or an
    explicit per-qp array.
    """
    m, Q = ops.mesh.n_triangles, ops.quad.n_points
    qp = ops.qp
    if callable(field):
        flat = qp.reshape(-1, 2)
        vals = np.asarray([field(x, y) for x, y in flat], dtype=float)
        return vals.reshape(m, Q, 3) if vector else vals.reshape(m, Q)
    arr = np.asarray(field, dtype=float)
    if not vector:
        if arr.ndim == 0:
            return np.full((m, Q), float(arr))
        if arr.shape == (ops.mesh.n_vertices,):
            nodal = arr[ops.mesh.triangles]          # (m,3)
            return np.einsum("qi,mi->mq", ops.bary_qp, nodal)
        if arr.shape == (m, Q):
            return arr
    else:
        if arr.shape == (3,):
            return np.broadcast_to(arr, (m, Q, 3)).copy()
        if arr.shape == (ops.mesh.n_vertices, 3):
            nodal = arr[ops.mesh.triangles]          # (m,3,3)
            return np.einsum("qi,mic->mqc", ops.bary_qp, nodal)
        if arr.shape == (m, Q, 3):
            return arr
    raise ValueError(f"cannot interpret field of shape {arr.shape}")


# -- energies ---------------------------------------------------------------


def assemble_bending_stiffness(ops: DktOperators, B_qp: np.ndarray,
                               energy_scale: float = 1.0) -> sp.csr_matrix:
    """Scalar-component stiffness S with E_h = sum_c d_c^T S d_c."""
    mesh = ops.mesh
    w = ops.wq * B_qp * energy_scale
    Sloc = np.einsum("mq,mqcn,mqck->mnk", w, ops.hess_qp, ops.hess_qp)
    tri = mesh.triangles
    dof = (3 * tri[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 9)
    rows = np.repeat(dof, 9, axis=1).ravel()
    cols = np.tile(dof, (1, 9)).ravel()
    n = 3 * mesh.n_vertices
    S = sp.coo_matrix((Sloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return S


def assemble_force_vector(ops: DktOperators, f_qp: np.ndarray) -> np.ndarray:
    """Flat load vector F with F_h[w] = F . w_flat (component-major)."""
    mesh = ops.mesh
    w = ops.wq
    Floc = np.einsum("mq,mqc,mqn->mcn", w, f_qp, ops.val_qp)  # (m,3,9)
    tri = mesh.triangles
    dof = (3 * tri[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 9)
    N3 = 3 * mesh.n_vertices
    F = np.zeros(3 * N3)
    for c in range(3):
        np.add.at(F, c * N3 + dof.ravel(),
                  np.repeat(Floc[:, c, :], 1, axis=0).ravel())
    return F


def bending_energy(B_field, w: DktVectorFn, ops: DktOperators | None = None,
                   energy_scale: float = 1.0) -> float:
    """Sum over elements of |T| sum_q w_q B(x_q) ||grad of discrete grad||^2."""
    ops = ops if ops is not None else DktOperators(w.mesh)
    B_qp = field_at_qp(ops, B_field)
    h = ops.hessian_at_qp(w.dofs)  # (m,Q,3,2,2)
    dens = np.einsum("mqcab,mqcab->mq", h, h)
    return float(energy_scale * np.sum(ops.wq * B_qp * dens))


def force_energy(f_field, w: DktVectorFn, ops: DktOperators | None = None) -> float:
    """Discrete load potential sum |T| w_q f(x_q) . w(x_q)."""
    ops = ops if ops is not None else DktOperators(w.mesh)
    f_qp = field_at_qp(ops, f_field, vector=True)
    vals = ops.value_at_qp(w.dofs)  # (m,Q,3)
    return float(np.sum(ops.wq[:, :, None] * f_qp * vals))


# -- isometry and curvature diagnostics -------------------------------------


def isometry_residual(w: DktVectorFn) -> np.ndarray:
    """Nodal constraint values (G11, G12, G22) from the gradient dofs."""
    g = w.dofs[:, :, 1:]  # (N, comp, 2)
    u1 = g[:, :, 0] + np.array([1.0, 0.0, 0.0])
    u2 = g[:, :, 1] + np.array([0.0, 1.0, 0.0])
    G11 = np.einsum("nc,nc->n", u1, u1) - 1.0
    G22 = np.einsum("nc,nc->n", u2, u2) - 1.0
    G12 = np.einsum("nc,nc->n", u1, u2)
    return np.stack([G11, G12, G22], axis=1)


def _metric_defect_qp(ops: DktOperators, w: DktVectorFn):
    g = ops.gradient_at_qp(w.dofs)  # (m,Q,3,2)
    Du = g.copy()
    Du[:, :, 0, 0] += 1.0
    Du[:, :, 1, 1] += 1.0
    E = np.einsum("mqca,mqcb->mqab", Du, Du)
    E[:, :, 0, 0] -= 1.0
    E[:, :, 1, 1] -= 1.0
    return Du, E


def isometry_error_per_triangle(w: DktVectorFn, ops: DktOperators | None = None,
                                squared: bool = True) -> np.ndarray:
    """Per-element integral of |Du^T Du - I|^2 (or unsquared Frobenius norm)."""
    ops = ops if ops is not None else DktOperators(w.mesh)
    _, E = _metric_defect_qp(ops, w)
    norm2 = np.einsum("mqab,mqab->mq", E, E)
    dens = norm2 if squared else np.sqrt(norm2)
    return np.einsum("mq,mq->m", ops.wq, dens)


def isometry_error_l1(w: DktVectorFn, ops: DktOperators | None = None) -> float:
    ops = ops if ops is not None else DktOperators(w.mesh)
    return float(np.sum(isometry_error_per_triangle(w, ops, squared=False)))


def normals_at_qp(ops: DktOperators, w: DktVectorFn):
    Du, _ = _metric_defect_qp(ops, w)
    n = np.cross(Du[:, :, :, 0], Du[:, :, :, 1])
    return n / np.linalg.norm(n, axis=2)[:, :, None]


def gauss_curvature_qp(ops: DktOperators, w: DktVectorFn):
    """det of the normal-projected second derivative at quadrature points."""
    n = normals_at_qp(ops, w)
    h = ops.hessian_at_qp(w.dofs)  # (m,Q,3,2,2)
    A = np.einsum("mqc,mqcab->mqab", n, h)
    return A[:, :, 0, 0] * A[:, :, 1, 1] - A[:, :, 0, 1] * A[:, :, 1, 0]


def gauss_curvature_l1(state_or_w, ops: DktOperators | None = None) -> float:
    """Integral of |discrete Gauss curvature|."""
    w = getattr(state_or_w, "w", state_or_w)
    ops = ops if ops is not None else DktOperators(w.mesh)
    kappa = gauss_curvature_qp(ops, w)
    return float(np.sum(ops.wq * np.abs(kappa)))


def detect_affine_region(state_or_w, threshold: float = 1e-9,
                         ops: DktOperators | None = None) -> np.ndarray:
    """Elements whose quadrature-point normal variance is below threshold."""
    w = getattr(state_or_w, "w", state_or_w)
    ops = ops if ops is not None else DktOperators(w.mesh)
    n = normals_at_qp(ops, w)
    mean = n.mean(axis=1)
    var = np.mean(np.sum((n - mean[:, None, :]) ** 2, axis=2), axis=1)
    return np.flatnonzero(var < threshold)


def gauss_map_samples(state_or_w) -> np.ndarray:
    """Per-vertex unit normals of the deformed configuration."""
    w = getattr(state_or_w, "w", state_or_w)
    g = w.dofs[:, :, 1:]
    t1 = g[:, :, 0] + np.array([1.0, 0.0, 0.0])
    t2 = g[:, :, 1] + np.array([0.0, 1.0, 0.0])
    n = np.cross(t1, t2)
    return n / np.linalg.norm(n, axis=1)[:, None]


def eoc_table(errors, hs=None):
    """EOC_k = log2(e_k / e_{k+1}) per column of `errors`.

    errors: sequence of per-level dicts or a (levels, k) array; returns a dict
    with 'eoc' array (levels-1, k).
    """
    E = np.asarray(errors, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        eoc = np.log2(E[:-1] / E[1:])
    return eoc
