"""Triangulations: structured generation, tagging, longest-edge bisection, marking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTriangle


@dataclass
class ProlongationData:
    """How the nodes of a refined mesh relate to its parent mesh.

    ``n_old`` leading nodes are carried over unchanged.  Each new node i
    (global id n_old + i) is the midpoint of the segment ``edge_nodes[i]``
    (ids in the *refined* numbering, so they may be earlier new nodes) and
    lies inside the closure of the parent triangles ``host_tris[i]`` (one or
    two root-parent indices, -1 padding).
    """

    n_old: int
    edge_nodes: np.ndarray  # (n_new, 2)
    host_tris: np.ndarray   # (n_new, 2), -1 = absent


class TriMesh:
    """Conforming triangle mesh with Dirichlet-tagged nodes.

    vertices: (n, 2) float; triangles: (m, 3) int, counterclockwise;
    dirichlet_mask: (n,) bool.
    """

    def __init__(self, vertices, triangles, dirichlet_mask=None, validate=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if dirichlet_mask is None:
            dirichlet_mask = np.zeros(len(self.vertices), dtype=bool)
        self.dirichlet_mask = np.asarray(dirichlet_mask, dtype=bool)
        self.prolongation: ProlongationData | None = None
        self._cache = {}
        if validate:
            self.validate()

    # -- basic quantities ------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.dirichlet_mask)

    def tri_coords(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape (m, 3, 2)."""
        return self.vertices[self.triangles]

    def areas(self) -> np.ndarray:
        if "areas" not in self._cache:
            c = self.tri_coords()
            d1 = c[:, 1] - c[:, 0]
            d2 = c[:, 2] - c[:, 0]
            self._cache["areas"] = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        return self._cache["areas"]

    def edge_lengths(self) -> np.ndarray:
        """Length of local edge k = (v_k, v_{k+1}) per triangle, shape (m, 3)."""
        c = self.tri_coords()
        out = np.empty((self.n_triangles, 3))
        for k in range(3):
            out[:, k] = np.linalg.norm(c[:, (k + 1) % 3] - c[:, k], axis=1)
        return out

    def refinement_edges(self) -> np.ndarray:
        """Local index of the longest edge per triangle (ties: lowest index)."""
        return np.argmax(self.edge_lengths(), axis=1)

    def edge_triangle_map(self):
        """dict (a, b) sorted vertex pair -> list of adjacent triangle ids."""
        if "edge_map" not in self._cache:
            m = {}
            for t, (a, b, c) in enumerate(self.triangles):
                for u, v in ((a, b), (b, c), (c, a)):
                    key = (u, v) if u < v else (v, u)
                    m.setdefault(key, []).append(t)
            self._cache["edge_map"] = m
        return self._cache["edge_map"]

    def boundary_edges(self):
        return [e for e, ts in self.edge_triangle_map().items() if len(ts) == 1]

    def min_angle(self) -> float:
        c = self.tri_coords()
        angles = []
        for k in range(3):
            u = c[:, (k + 1) % 3] - c[:, k]
            v = c[:, (k + 2) % 3] - c[:, k]
            cosang = np.einsum("ij,ij->i", u, v) / (
                np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
            )
            angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return float(np.min(angles))

    def validate(self):
        if self.triangles.size and self.triangles.max() >= self.n_vertices:
            raise DegenerateTriangle("triangle references a missing vertex")
        a = self.areas()
        if np.any(a <= 0):
            bad = np.flatnonzero(a <= 0)
            raise DegenerateTriangle(f"non-positive area in triangles {bad[:10]}")
        for e, ts in self.edge_triangle_map().items():
            if len(ts) > 2:
                raise DegenerateTriangle(f"edge {e} shared by {len(ts)} triangles")

    def is_conforming(self) -> bool:
        return all(len(ts) <= 2 for ts in self.edge_triangle_map().values())

    # -- tagging and transforms -------------------------------------------

    def with_dirichlet(self, predicate) -> "TriMesh":
        """New mesh with Dirichlet nodes tagged where predicate(x, y) holds."""
        mask = np.array([bool(predicate(x, y)) for x, y in self.vertices])
        return TriMesh(self.vertices, self.triangles, mask, validate=False)

    def translated(self, dx: float, dy: float) -> "TriMesh":
        v = self.vertices + np.array([dx, dy])
        out = TriMesh(v, self.triangles, self.dirichlet_mask, validate=False)
        out.prolongation = self.prolongation
        return out

    # -- P1 helpers --------------------------------------------------------

    def p1_gradients(self, values: np.ndarray) -> np.ndarray:
        """Per-triangle gradient of a nodal (P1) field; (m, 2) or (m, 2, k)."""
        c = self.tri_coords()
        v = np.asarray(values, dtype=float)[self.triangles]  # (m, 3, ...)
        # gradient of barycentric lambdas
        e1 = c[:, 2] - c[:, 1]
        e2 = c[:, 0] - c[:, 2]
        e0 = c[:, 1] - c[:, 0]
        twoA = 2.0 * self.areas()
        # grad lambda_i = rot90(opposite edge)/2A with rot90 (x,y)->(-y,x)
        g = np.stack(
            [
                np.stack([-e1[:, 1], e1[:, 0]], axis=1),
                np.stack([-e2[:, 1], e2[:, 0]], axis=1),
                np.stack([-e0[:, 1], e0[:, 0]], axis=1),
            ],
            axis=1,
        ) / twoA[:, None, None]
        return np.einsum("mid,mi...->md...", g, v)


# -- structured generators ----------------------------------------------------


def structured_rect(nx, ny, length=1.0, width=1.0, clamp_side="left") -> TriMesh:
    """Structured mesh of (0, length) x (-width/2, width/2).

    Vertex set is symmetric about x2 = 0; for even ny the diagonal pattern is
    mirrored across the midline so the triangle set is symmetric as well.
    clamp_side in {left, right, top, bottom, left_right, none} tags Dirichlet
    nodes on that part of the boundary.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx, ny must be >= 1")
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(-width / 2.0, width / 2.0, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cell_center_y = 0.5 * (ys[j] + ys[j + 1])
            mirrored = (ny % 2 == 0) and cell_center_y > 0
            if not mirrored:
                tris.append([v00, v10, v11])
                tris.append([v00, v11, v01])
            else:
                tris.append([v00, v10, v01])
                tris.append([v10, v11, v01])
    tris = np.array(tris, dtype=np.int64)

    eps = 1e-12
    preds = {
        "left": lambda x, y: x < eps,
        "right": lambda x, y: x > length - eps,
        "bottom": lambda x, y: y < -width / 2 + eps,
        "top": lambda x, y: y > width / 2 - eps,
        "left_right": lambda x, y: x < eps or x > length - eps,
        "none": lambda x, y: False,
    }
    if clamp_side not in preds:
        raise ValueError(f"unknown clamp_side {clamp_side!r}")
    pred = preds[clamp_side]
    mask = np.array([pred(x, y) for x, y in verts])
    return TriMesh(verts, tris, mask)


def structured_disc(n_refine: int = 3) -> TriMesh:
    """Unit-disc mesh: a 6-triangle hexagon fan uniformly bisected, with new
    boundary nodes pushed onto the circle after every sweep."""
    ang = np.arange(6) * np.pi / 3.0
    verts = np.vstack([[0.0, 0.0], np.stack([np.cos(ang), np.sin(ang)], axis=1)])
    tris = np.array([[0, 1 + k, 1 + (k + 1) % 6] for k in range(6)], dtype=np.int64)
    mesh = TriMesh(verts, tris)
    for _ in range(2 * n_refine):
        mesh = bisect(mesh, np.arange(mesh.n_triangles))
        bnd = np.unique(np.array(mesh.boundary_edges(), dtype=np.int64).ravel())
        new_bnd = bnd[bnd >= mesh.prolongation.n_old]
        r = np.linalg.norm(mesh.vertices[new_bnd], axis=1)
        mesh.vertices[new_bnd] /= r[:, None]
        mesh._cache.clear()
    mesh.validate()
    return mesh


# -- longest-edge bisection ----------------------------------------------------


def bisect(mesh: TriMesh, marked) -> TriMesh:
    """Bisect the marked triangles at their longest edges.

    Conformity closure: triangles left with a hanging node are bisected (at
    their own longest edge) in further passes until the mesh is conforming.
    Returns a new mesh carrying ProlongationData; the input is untouched.
    """
    marked = np.atleast_1d(np.asarray(marked))
    if marked.dtype == bool:
        marked = np.flatnonzero(marked)
    if marked.size == 0:
        out = TriMesh(mesh.vertices.copy(), mesh.triangles.copy(),
                      mesh.dirichlet_mask.copy(), validate=False)
        out.prolongation = ProlongationData(
            n_old=mesh.n_vertices,
            edge_nodes=np.zeros((0, 2), dtype=np.int64),
            host_tris=np.zeros((0, 2), dtype=np.int64),
        )
        return out

    verts = [tuple(v) for v in mesh.vertices]
    diri = list(mesh.dirichlet_mask)
    tris = [list(t) for t in mesh.triangles]
    roots = list(range(len(tris)))
    alive = [True] * len(tris)
    mid_of_edge = {}
    new_edge_nodes, new_hosts = [], []
    n_old = len(verts)

    def longest_local_edge(t):
        a, b, c = tris[t]
        pa, pb, pc = verts[a], verts[b], verts[c]
        l0 = (pb[0] - pa[0]) ** 2 + (pb[1] - pa[1]) ** 2
        l1 = (pc[0] - pb[0]) ** 2 + (pc[1] - pb[1]) ** 2
        l2 = (pa[0] - pc[0]) ** 2 + (pa[1] - pc[1]) ** 2
        ls = (l0, l1, l2)
        return max(range(3), key=lambda k: (ls[k], -k))

    to_split = sorted(set(int(t) for t in marked))
    guard = 0
    while to_split:
        guard += 1
        if guard > 200:
            raise RuntimeError("bisection closure did not terminate")
        # adjacency of the current (partially refined) mesh
        edge_map = {}
        for t, ok in enumerate(alive):
            if not ok:
                continue
            a, b, c = tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                key = (u, v) if u < v else (v, u)
                edge_map.setdefault(key, []).append(t)
        for t in to_split:
            if not alive[t]:
                continue
            k = longest_local_edge(t)
            a, b, c = tris[t][k], tris[t][(k + 1) % 3], tris[t][(k + 2) % 3]
            key = (a, b) if a < b else (b, a)
            if key not in mid_of_edge:
                pa, pb = verts[a], verts[b]
                verts.append(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0))
                adj = edge_map.get(key, [t])
                is_bnd = len(adj) == 1
                diri.append(bool(is_bnd and diri[a] and diri[b]))
                mid_of_edge[key] = len(verts) - 1
                hosts = sorted({roots[x] for x in adj})
                new_edge_nodes.append((a, b))
                new_hosts.append((hosts[0], hosts[1] if len(hosts) > 1 else -1))
            m = mid_of_edge[key]
            alive[t] = False
            tris.append([a, m, c]); roots.append(roots[t]); alive.append(True)
            tris.append([m, b, c]); roots.append(roots[t]); alive.append(True)
        # closure: any alive triangle with a split edge must be bisected
        to_split = []
        for t, ok in enumerate(alive):
            if not ok:
                continue
            a, b, c = tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                key = (u, v) if u < v else (v, u)
                if key in mid_of_edge:
                    to_split.append(t)
                    break

    keep = [t for t, ok in enumerate(alive) if ok]
    out = TriMesh(
        np.array(verts), np.array([tris[t] for t in keep], dtype=np.int64),
        np.array(diri, dtype=bool),
    )
    out.prolongation = ProlongationData(
        n_old=n_old,
        edge_nodes=np.array(new_edge_nodes, dtype=np.int64).reshape(-1, 2),
        host_tris=np.array(new_hosts, dtype=np.int64).reshape(-1, 2),
    )
    return out


def uniform_refine(mesh: TriMesh, times: int = 1):
    """Halve h uniformly `times` times (two full bisection sweeps per halving).

    Returns (mesh, [ProlongationData...]) with one entry per bisection sweep.
    """
    prols = []
    for _ in range(2 * times):
        mesh = bisect(mesh, np.arange(mesh.n_triangles))
        prols.append(mesh.prolongation)
    return mesh, prols


# -- marking ------------------------------------------------------------------


@dataclass
class MarkingReport:
    marked: np.ndarray
    criterion: str
    values: np.ndarray | None = field(default=None, repr=False)


def mark_phase_gradient(mesh: TriMesh, v: np.ndarray, threshold: float = 0.5) -> MarkingReport:
    """Mark triangles whose mean squared P1 phase gradient exceeds threshold."""
    g = mesh.p1_gradients(np.asarray(v, dtype=float))
    val = np.einsum("md,md->m", g, g)
    return MarkingReport(marked=np.flatnonzero(val > threshold),
                         criterion="phase_gradient", values=val)


def mark_isometry_error(mesh: TriMesh, u, fraction: float = 0.25) -> MarkingReport:
    """Mark the top `fraction` of triangles by squared isometry defect.

    `u` is a DktVectorFn displacement; ties break toward lower triangle index.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    from .dkt import isometry_error_per_triangle

    err = isometry_error_per_triangle(u, squared=True)
    n_mark = int(np.ceil(fraction * mesh.n_triangles))
    order = np.lexsort((np.arange(mesh.n_triangles), -err))
    return MarkingReport(marked=np.sort(order[:n_mark]),
                         criterion="isometry_error", values=err)


def union_marks(*reports: MarkingReport) -> MarkingReport:
    marked = np.unique(np.concatenate([r.marked for r in reports])) if reports else np.array([], dtype=np.int64)
    return MarkingReport(marked=marked, criterion="union")
