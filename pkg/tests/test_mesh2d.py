import numpy as np
import pytest

from platedesign import (TriMesh, bisect, mark_phase_gradient, structured_disc,
                         structured_rect, uniform_refine, union_marks)
from platedesign.errors import DegenerateTriangle


class TestStructuredRect:
    def test_unit_cell(self):
        mesh = structured_rect(1, 1, 1.0, 1.0, "left")
        assert mesh.n_triangles == 2
        assert mesh.n_vertices == 4
        assert mesh.dirichlet_nodes.size == 2
        assert np.all(mesh.areas() > 0)

    def test_vertex_reflection_symmetry(self):
        mesh = structured_rect(2, 2, 1.0, 1.0, "left")
        assert mesh.n_triangles == 8
        reflected = mesh.vertices * np.array([1.0, -1.0])
        # reflected vertex set is a permutation of the original
        orig = {tuple(np.round(v, 12)) for v in mesh.vertices}
        refl = {tuple(np.round(v, 12)) for v in reflected}
        assert orig == refl

    def test_triangle_pattern_symmetry_even_ny(self):
        mesh = structured_rect(4, 4, 1.0, 1.0, "left")
        # mirrored triangle set: reflect every triangle, compare as sets of
        # frozen vertex-coordinate triples
        def tri_keys(verts, tris, flip):
            keys = set()
            for t in tris:
                pts = verts[t] * (np.array([1.0, -1.0]) if flip else 1.0)
                keys.add(frozenset(tuple(np.round(p, 12)) for p in pts))
            return keys
        assert tri_keys(mesh.vertices, mesh.triangles, False) == \
               tri_keys(mesh.vertices, mesh.triangles, True)

    def test_paper_h_ladder(self):
        # h = sqrt(2)/32 halves under uniform refinement
        mesh = structured_rect(32, 32, 1.0, 1.0, "left")
        hs = [mesh.edge_lengths().max()]
        m = mesh
        for _ in range(2):
            m, _ = uniform_refine(m, 1)
            hs.append(m.edge_lengths().max())
        assert abs(hs[0] - 0.0441942) < 1e-6
        assert abs(hs[1] - 0.0220971) < 1e-6
        assert abs(hs[2] - 0.0110485) < 1e-6

    def test_clamp_sides(self):
        mesh = structured_rect(3, 2, 2.0, 1.0, "right")
        assert np.all(np.isclose(mesh.vertices[mesh.dirichlet_nodes, 0], 2.0))


class TestBisect:
    def test_empty_marking_identity(self):
        mesh = structured_rect(2, 2)
        out = bisect(mesh, np.array([], dtype=int))
        assert out.n_triangles == mesh.n_triangles
        assert out.n_vertices == mesh.n_vertices

    def test_full_marking_doubles(self):
        mesh = structured_rect(1, 1)
        out = bisect(mesh, np.arange(2))
        assert out.n_triangles == 4
        assert out.is_conforming()

    def test_repeated_full_marking_counts(self):
        mesh = structured_rect(2, 2)
        m = mesh
        for k in range(1, 5):
            m = bisect(m, np.arange(m.n_triangles))
            assert m.n_triangles == mesh.n_triangles * 2 ** k
            assert m.is_conforming()
            assert np.all(m.areas() > 0)

    def test_closure_conformity_on_partial_marking(self):
        rng = np.random.default_rng(0)
        mesh = structured_rect(4, 4)
        for _ in range(4):
            marked = rng.choice(mesh.n_triangles, size=max(1, mesh.n_triangles // 5),
                                replace=False)
            mesh = bisect(mesh, marked)
            assert mesh.is_conforming()
            assert np.all(mesh.areas() > 0)

    def test_min_angle_bound(self):
        rng = np.random.default_rng(1)
        mesh = structured_rect(2, 2)
        coarse_angle = mesh.min_angle()
        for _ in range(6):
            marked = rng.choice(mesh.n_triangles, size=mesh.n_triangles // 3 + 1,
                                replace=False)
            mesh = bisect(mesh, marked)
        assert mesh.min_angle() >= coarse_angle / 2 - 1e-9

    def test_dirichlet_inheritance(self):
        mesh = structured_rect(2, 2, clamp_side="left")
        ref, _ = uniform_refine(mesh, 2)
        # every refined Dirichlet node still lies on the clamped edge, and the
        # clamped edge has the right number of nodes
        d = ref.dirichlet_nodes
        assert np.all(ref.vertices[d, 0] < 1e-12)
        on_left = np.flatnonzero(ref.vertices[:, 0] < 1e-12)
        assert set(on_left) == set(d)

    def test_prolongation_metadata(self):
        mesh = structured_rect(2, 2)
        out = bisect(mesh, np.arange(mesh.n_triangles))
        prol = out.prolongation
        assert prol.n_old == mesh.n_vertices
        assert prol.edge_nodes.shape[0] == out.n_vertices - mesh.n_vertices
        # each new node is the midpoint of its recorded edge
        for i, (a, b) in enumerate(prol.edge_nodes):
            mid = 0.5 * (out.vertices[a] + out.vertices[b])
            assert np.allclose(out.vertices[prol.n_old + i], mid, atol=1e-14)


class TestDisc:
    def test_disc_mesh(self):
        mesh = structured_disc(2)
        assert mesh.is_conforming()
        assert np.all(mesh.areas() > 0)
        r = np.linalg.norm(mesh.vertices, axis=1)
        assert r.max() <= 1.0 + 1e-12
        # boundary nodes on the unit circle
        bnd = np.unique(np.array(mesh.boundary_edges()).ravel())
        assert np.allclose(np.linalg.norm(mesh.vertices[bnd], axis=1), 1.0, atol=1e-12)
        # area approximates pi from below
        assert 2.8 < mesh.areas().sum() < np.pi


class TestMarking:
    def test_constant_field_no_marks(self):
        mesh = structured_rect(3, 3)
        rep = mark_phase_gradient(mesh, np.full(mesh.n_vertices, 0.3))
        assert rep.marked.size == 0

    def test_linear_field_all_marked(self):
        mesh = structured_rect(3, 3)
        rep = mark_phase_gradient(mesh, mesh.vertices[:, 0].copy())
        assert rep.marked.size == mesh.n_triangles

    def test_half_slope_not_marked(self):
        mesh = structured_rect(3, 3)
        rep = mark_phase_gradient(mesh, 0.5 * mesh.vertices[:, 0])
        assert rep.marked.size == 0

    def test_union(self):
        mesh = structured_rect(2, 2)
        a = mark_phase_gradient(mesh, mesh.vertices[:, 0].copy())
        b = mark_phase_gradient(mesh, np.zeros(mesh.n_vertices))
        u = union_marks(a, b)
        assert set(u.marked) == set(a.marked)


class TestValidation:
    def test_negative_area_rejected(self):
        verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(DegenerateTriangle):
            TriMesh(verts, np.array([[0, 2, 1]]))  # clockwise

    def test_p1_gradient(self):
        mesh = structured_rect(3, 2, 2.0, 1.0)
        v = 3.0 * mesh.vertices[:, 0] - 2.0 * mesh.vertices[:, 1] + 1.0
        g = mesh.p1_gradients(v)
        assert np.allclose(g, [3.0, -2.0], atol=1e-12)
