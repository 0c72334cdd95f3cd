import numpy as np
import pytest

from lavdm_kit import (
    FrameField,
    PointCloud,
    align_connection,
    align_connections,
    build_connection_field,
    frame_field,
    ground_truth_frame,
    local_pca_frame,
    local_pca_frame_knn,
    orthogonal_polar,
    sample_surface,
    sphere,
    klein_bottle,
)
from lavdm_kit.errors import LavdmError, TooFewNeighbors
from lavdm_kit.transport import (
    ambient_to_tangent,
    great_circle_arc,
    tangent_to_ambient,
    transport_components,
)


def rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def random_orthonormal_frames(n, p, q, rng):
    frames = np.empty((n, p, q))
    for i in range(n):
        Q, _ = np.linalg.qr(rng.standard_normal((p, q)))
        frames[i] = Q
    return frames


class TestLocalPca:
    def test_planar_cloud(self):
        rng = np.random.default_rng(0)
        pts = np.column_stack([rng.standard_normal((50, 2)), np.zeros(50)])
        F = local_pca_frame(PointCloud(pts), 0, radius=10.0, d=2)
        assert np.max(np.abs(F[2, :])) < 1e-10
        np.testing.assert_allclose(F.T @ F, np.eye(2), atol=1e-12)

    def test_sphere_tangent_accuracy(self):
        cloud = sample_surface(sphere(), 5000, "area", seed=1)
        i = 17
        F = local_pca_frame(cloud, i, radius=0.1, d=2)
        truth = ground_truth_frame(sphere(), cloud.params[i, 0], cloud.params[i, 1])
        # largest principal angle between the two 2-planes
        s = np.linalg.svd(F.T @ truth, compute_uv=False)
        angle = np.arccos(np.clip(s[-1], -1, 1))
        assert angle < 0.05

    def test_too_few_neighbors(self):
        pts = np.array([[0.0, 0, 0], [10.0, 0, 0], [0, 10.0, 0], [0, 0, 10.0]])
        with pytest.raises(TooFewNeighbors):
            local_pca_frame(PointCloud(pts), 0, radius=1.0, d=2)

    def test_knn_variant_matches_radius_on_dense_cloud(self):
        rng = np.random.default_rng(2)
        pts = np.column_stack([rng.uniform(-1, 1, (200, 2)), np.zeros(200)])
        cloud = PointCloud(pts)
        F1 = local_pca_frame_knn(cloud, 5, k=30, d=2)
        assert np.max(np.abs(F1[2, :])) < 1e-10


class TestAlignConnection:
    def test_identity(self):
        rng = np.random.default_rng(3)
        F = random_orthonormal_frames(1, 4, 2, rng)[0]
        np.testing.assert_allclose(align_connection(F, F), np.eye(2), atol=1e-12)

    @pytest.mark.parametrize("R", [rotation(0.7), rotation(2.0) @ np.diag([1.0, -1.0])])
    def test_exact_rotation_recovered(self, R):
        rng = np.random.default_rng(4)
        F = random_orthonormal_frames(1, 5, 2, rng)[0]
        np.testing.assert_allclose(align_connection(F, F @ R), R, atol=1e-12)

    def test_transpose_symmetry(self):
        rng = np.random.default_rng(5)
        Fi, Fj = random_orthonormal_frames(2, 6, 2, rng)
        np.testing.assert_allclose(
            align_connection(Fj, Fi), align_connection(Fi, Fj).T, atol=1e-14
        )

    def test_orthogonal_and_unit_determinant(self):
        rng = np.random.default_rng(6)
        FA = random_orthonormal_frames(40, 3, 2, rng)
        FB = random_orthonormal_frames(40, 3, 2, rng)
        oms = align_connections(FA, FB)
        gram = np.einsum("nij,nik->njk", oms, oms)
        np.testing.assert_allclose(gram, np.broadcast_to(np.eye(2), gram.shape), atol=1e-8)
        dets = np.linalg.det(oms)
        assert np.all(np.abs(np.abs(dets) - 1.0) < 1e-6)

    def test_conjugation_equivariance(self):
        rng = np.random.default_rng(7)
        Fi, Fj = random_orthonormal_frames(2, 5, 2, rng)
        R = rotation(1.234)
        lhs = align_connection(Fi @ R, Fj @ R)
        rhs = R.T @ align_connection(Fi, Fj) @ R
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_polar_closed_form_matches_svd(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            M = rng.standard_normal((2, 2))
            U, _, Vt = np.linalg.svd(M)
            np.testing.assert_allclose(orthogonal_polar(M), U @ Vt, atol=1e-12)

    def test_sphere_alignment_approximates_transport(self):
        # two nearby equatorial points: frame alignment vs the transport ODE
        chart = sphere()
        a_par = (np.pi / 2, 0.0)
        b_par = (np.pi / 2 - 0.006, 0.008)
        Fa = ground_truth_frame(chart, *a_par)
        Fb = ground_truth_frame(chart, *b_par)
        omega = align_connection(Fa, Fb)

        pa = chart.point(*a_par)
        pb = chart.point(*b_par)
        curve = great_circle_arc(pb, pa)
        cols = []
        for j in range(2):
            vt, vp = ambient_to_tangent(b_par[0], b_par[1], Fb[:, j])
            wt, wp = transport_components(curve, vt, vp, steps=2000)
            cols.append(Fa.T @ tangent_to_ambient(a_par[0], a_par[1], wt, wp))
        omega_ode = np.column_stack(cols)
        assert np.linalg.norm(omega - omega_ode, ord=2) < 0.02


class TestFrameField:
    def test_validates_orthonormality(self):
        bad = np.ones((2, 3, 2))
        with pytest.raises(LavdmError):
            FrameField(bad, "truth")

    def test_gauge(self):
        rng = np.random.default_rng(9)
        ff = FrameField(random_orthonormal_frames(5, 4, 2, rng), "truth")
        rots = np.stack([rotation(a) for a in rng.uniform(0, 2 * np.pi, 5)])
        gauged = ff.gauge(rots)
        np.testing.assert_allclose(gauged.frames[2], ff.frames[2] @ rots[2], atol=1e-14)

    def test_build_connection_field_identity_edges(self):
        cloud = sample_surface(sphere(), 30, "area", seed=10)
        ff = frame_field(cloud, "truth")
        edges = np.column_stack([np.arange(30), np.arange(30)])
        conn = build_connection_field(cloud, cloud, ff, ff, edges)
        for key, omega in conn.items():
            np.testing.assert_allclose(omega, np.eye(2), atol=1e-12)

    def test_build_connection_field_transpose_symmetry(self):
        cloud = sample_surface(sphere(), 25, "area", seed=11)
        ff = frame_field(cloud, "truth")
        edges = []
        for i in range(25):
            for j in range(25):
                if i != j:
                    edges.append((i, j))
        conn = build_connection_field(cloud, cloud, ff, ff, np.array(edges))
        for (i, j) in [(0, 1), (3, 17), (20, 4)]:
            np.testing.assert_allclose(conn[(i, j)], conn[(j, i)].T, atol=1e-13)

    def test_klein_pca_connections_orthogonal(self):
        cloud = sample_surface(klein_bottle(), 500, "area", seed=12)
        # radius tuned so every point sees >= 30 neighbors
        ff = frame_field(cloud, "pca", d=2, pca_radius=1.0)
        rng = np.random.default_rng(0)
        edges = np.column_stack([rng.integers(0, 500, 300), rng.integers(0, 500, 300)])
        conn = build_connection_field(cloud, cloud, ff, ff, edges)
        for omega in conn.values():
            np.testing.assert_allclose(omega.T @ omega, np.eye(2), atol=1e-8)
