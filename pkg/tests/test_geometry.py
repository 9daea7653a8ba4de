"""Marching cubes, meshes, normal nets, and the implicit occupancy field."""

import numpy as np
import pytest
import torch

from monohuman.errors import EmptyMesh, ShapeMismatch
from monohuman.geometry.features import (
    FeatureEncoder,
    PixelFeatureMap,
    bilinear_sample,
    build_input_stack,
    encode_features,
)
from monohuman.geometry.implicit import (
    ImplicitField,
    build_field,
    occupancy_coarse,
    occupancy_fine,
    point_embedding,
)
from monohuman.geometry.marching import grid_coordinates, marching_cubes
from monohuman.geometry.mesh import (
    TriangleMesh,
    euler_characteristic,
    face_components,
    is_watertight,
    largest_watertight_component,
    voxelize_mesh,
)
from monohuman.geometry.normals import (
    angular_error_deg,
    apply_normal_net,
    build_normal_estimator,
    train_normal_net,
)
from monohuman.geometry.training import (
    GeoTrainConfig,
    field_grid_values,
    load_geo_checkpoint,
    save_geo_checkpoint,
    train_geometry,
)
from monohuman.hallucinator.data import load_view
from monohuman.synthcorpus.camera import CameraModel

torch.set_num_threads(1)


def _sphere_grid(resolution: int, radius: float = 0.6, center=(0.0, 0.0, 0.0)):
    c = grid_coordinates(resolution)
    xs, ys, zs = np.meshgrid(c, c, c, indexing="ij")
    d = np.sqrt((xs - center[0]) ** 2 + (ys - center[1]) ** 2 + (zs - center[2]) ** 2)
    # occupancy-style field: >0.5 inside
    return 0.5 + (radius - d)


class TestMarchingCubes:
    def test_grid_coordinates(self):
        c = grid_coordinates(5)
        np.testing.assert_allclose(c, [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_single_interior_point_closed(self):
        values = np.zeros((4, 4, 4))
        values[1, 2, 1] = 1.0
        mesh = marching_cubes(values, level=0.5)
        assert is_watertight(mesh)
        assert euler_characteristic(mesh) == 2
        assert mesh.signed_volume() > 0
        # The surface stays within the cells touching the hot lattice point.
        c = grid_coordinates(4)
        assert np.all(np.abs(mesh.vertices[:, 0] - c[1]) <= (c[1] - c[0]) + 1e-9)

    def test_sphere_watertight_and_accurate(self):
        mesh = marching_cubes(_sphere_grid(24), level=0.5)
        assert is_watertight(mesh)
        assert euler_characteristic(mesh) == 2
        radial = np.linalg.norm(mesh.vertices, axis=1)
        cell = 2.0 / 23
        assert np.abs(radial - 0.6).max() <= cell * np.sqrt(3)
        # volume within a few percent of the analytic ball
        vol = mesh.signed_volume()
        assert vol == pytest.approx(4.0 / 3.0 * np.pi * 0.6**3, rel=0.05)

    def test_two_spheres_two_components(self):
        a = _sphere_grid(24, radius=0.3, center=(-0.55, 0, 0))
        b = _sphere_grid(24, radius=0.3, center=(0.55, 0, 0))
        mesh = marching_cubes(np.maximum(a, b), level=0.5)
        labels = face_components(mesh)
        assert len(np.unique(labels)) == 2
        big, closed = largest_watertight_component(mesh)
        assert closed and is_watertight(big)

    def test_inverted_field_same_surface_normalized_orientation(self):
        # Complementing the field swaps inside and outside but leaves the
        # level set in place; orientation is normalized so the extracted
        # mesh always has non-negative total signed volume.
        mesh = marching_cubes(_sphere_grid(16), level=0.5)
        inv = marching_cubes(1.0 - _sphere_grid(16), level=0.5)
        assert inv.signed_volume() > 0
        assert abs(inv.signed_volume() - mesh.signed_volume()) < 1e-9
        assert np.allclose(np.sort(inv.vertices, axis=0), np.sort(mesh.vertices, axis=0), atol=1e-12)

    def test_empty_level_set_raises(self):
        with pytest.raises(EmptyMesh):
            marching_cubes(np.zeros((8, 8, 8)), level=0.5)
        with pytest.raises(EmptyMesh):
            marching_cubes(np.ones((8, 8, 8)), level=0.5)

    def test_bad_grid_shapes(self):
        with pytest.raises(ShapeMismatch):
            marching_cubes(np.zeros((4, 4)))
        with pytest.raises(ShapeMismatch):
            marching_cubes(np.zeros((4, 4, 5)))

    def test_level_crossing_positions_interpolate(self):
        # 1D crossing along z between lattice neighbors: t = va / (va - vb)
        values = np.zeros((2, 2, 2))
        values[:, :, 1] = 0.75  # crossing of level 0.5 at t = 2/3
        mesh = marching_cubes(values, level=0.5)
        np.testing.assert_allclose(mesh.vertices[:, 2], -1.0 + 2.0 * (2.0 / 3.0), atol=1e-12)


class TestMesh:
    def test_ply_roundtrip(self, tmp_path):
        mesh = marching_cubes(_sphere_grid(12), level=0.5)
        mesh.vertex_colors = np.tile([0.25, 0.5, 0.75], (mesh.num_vertices, 1))
        path = tmp_path / "m.ply"
        mesh.save_ply(path)
        back = TriangleMesh.load_ply(path)
        np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-6)
        np.testing.assert_array_equal(back.faces, mesh.faces)
        np.testing.assert_allclose(back.vertex_colors, mesh.vertex_colors, atol=1.0 / 255.0)

    def test_empty_mesh_refuses_save(self, tmp_path):
        with pytest.raises(EmptyMesh):
            TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3))).save_ply(tmp_path / "e.ply")

    def test_vertex_normals_point_outward_on_sphere(self):
        mesh = marching_cubes(_sphere_grid(20), level=0.5)
        vn = mesh.compute_vertex_normals()
        radial = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
        dots = (vn * radial).sum(axis=1)
        assert dots.min() > 0.8

    def test_voxelize_matches_ball_volume(self):
        mesh = marching_cubes(_sphere_grid(24), level=0.5)
        inside = voxelize_mesh(mesh, 32)
        assert inside.shape == (32, 32, 32)
        cell_vol = (2.0 / 31) ** 3
        vol = inside.sum() * cell_vol
        assert vol == pytest.approx(4.0 / 3.0 * np.pi * 0.6**3, rel=0.08)


class TestNormals:
    def test_apply_normal_net_masking_and_unit_norm(self):
        est = build_normal_estimator(0, base=4)
        img = np.zeros((32, 32, 3), dtype=np.float32)
        img[8:24, 8:24] = 0.7
        out = apply_normal_net(est.front, img)
        sil = img.max(axis=2) > 0.06
        assert np.all(out[~sil] == 0.0)
        norms = np.linalg.norm(out[sil], axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-3)

    def test_angular_error_oracle(self):
        h = w = 8
        mask = np.ones((h, w), dtype=bool)
        a = np.zeros((h, w, 3))
        a[..., 2] = 1.0
        assert angular_error_deg(a, a, mask) == pytest.approx(0.0, abs=1e-4)
        deg = 30.0
        rad = np.deg2rad(deg)
        b = np.zeros((h, w, 3))
        b[..., 1] = np.sin(rad)
        b[..., 2] = np.cos(rad)
        assert angular_error_deg(a, b, mask) == pytest.approx(deg, abs=1e-3)

    def test_train_normal_net_overfits_one_sample(self):
        est = build_normal_estimator(1, base=8)
        rng = np.random.default_rng(0)
        img = rng.random((32, 32, 3)).astype(np.float32)
        gt = np.zeros((32, 32, 3), dtype=np.float32)
        gt[..., 2] = 1.0
        mask = np.ones((32, 32), dtype=np.float32)
        history = train_normal_net(est.front, [(img, gt, mask)], steps=120, lr=1e-3, seed=0)
        assert history[-1] < 0.25 * history[0]


class TestPixelFeatures:
    def test_input_stack_layout(self):
        rgb = np.random.default_rng(0).random((16, 16, 3)).astype(np.float32)
        nf = np.random.default_rng(1).random((16, 16, 3)).astype(np.float32)
        nb = np.random.default_rng(2).random((16, 16, 3)).astype(np.float32)
        stack = build_input_stack(rgb, nf, nb)
        assert stack.shape == (1, 9, 16, 16)
        np.testing.assert_allclose(stack[0, :3].numpy().transpose(1, 2, 0), rgb)
        np.testing.assert_allclose(stack[0, 3:6].numpy().transpose(1, 2, 0), nf)
        with pytest.raises(ShapeMismatch):
            build_input_stack(rgb, nf[:8], nb)

    def test_bilinear_sample_oracle(self):
        grid = torch.arange(12, dtype=torch.float32).reshape(1, 3, 4)
        fmap = PixelFeatureMap(grid, "coarse", (4, 3))
        # integer coordinates hit lattice values exactly
        out = bilinear_sample(fmap, torch.tensor([0.0, 2.0]), torch.tensor([0.0, 1.0]))
        np.testing.assert_allclose(out.numpy().ravel(), [0.0, 6.0])
        # halfway between four cells averages them
        out = bilinear_sample(fmap, torch.tensor([0.5]), torch.tensor([0.5]))
        assert out.item() == pytest.approx((0 + 1 + 4 + 5) / 4.0)
        # clamping beyond the edge
        out = bilinear_sample(fmap, torch.tensor([99.0]), torch.tensor([-99.0]))
        assert out.item() == pytest.approx(3.0)

    def test_encode_features_resolutions(self):
        torch.manual_seed(0)
        enc_c, enc_f = FeatureEncoder(8, mid=4), FeatureEncoder(4, mid=4)
        stack = torch.rand(1, 9, 32, 32)
        fc, ff = encode_features(enc_c, enc_f, stack)
        assert fc.resolution == "coarse" and ff.resolution == "fine"
        assert fc.image_size == (32, 32) and ff.image_size == (32, 32)
        assert fc.grid.shape[1:] == (16, 16)
        assert ff.grid.shape[1:] == (32, 32)


class TestImplicitField:
    @pytest.fixture()
    def setup(self):
        torch.manual_seed(0)
        enc_c, enc_f = FeatureEncoder(32, mid=4), FeatureEncoder(16, mid=4)
        fld = build_field(0)
        stack = torch.rand(1, 9, 32, 32)
        fc, ff = encode_features(enc_c, enc_f, stack)
        cam = CameraModel(yaw=0.1, scale=12.0, image_size=(32, 32))
        pts = np.random.default_rng(0).uniform(-1, 1, size=(64, 3))
        return fld, fc, ff, cam, pts

    def test_probability_ranges(self, setup):
        fld, fc, ff, cam, pts = setup
        with torch.no_grad():
            pc = occupancy_coarse(fld, fc, pts, cam)
            pf = occupancy_fine(fld, ff, fc, pts, cam)
        for p in (pc, pf):
            assert p.shape == (64,)
            assert p.min() >= 0.0 and p.max() <= 1.0

    def test_frozen_embedding_reproduces_fine(self, setup):
        fld, fc, ff, cam, pts = setup
        with torch.no_grad():
            emb = point_embedding(fld, fc, pts, cam)
            direct = occupancy_fine(fld, ff, fc, pts, cam)
            reused = occupancy_fine(fld, ff, fc, pts, cam, embedding=emb)
        torch.testing.assert_close(direct, reused, rtol=0.0, atol=0.0)

    def test_lambda_perturbation_moves_both_heads(self, setup):
        fld, fc, ff, cam, pts = setup
        with torch.no_grad():
            pc0 = occupancy_coarse(fld, fc, pts, cam)
            pf0 = occupancy_fine(fld, ff, fc, pts, cam)
            for p in fld.lambda_net.parameters():
                p.add_(0.05 * torch.randn_like(p))
            pc1 = occupancy_coarse(fld, fc, pts, cam)
            pf1 = occupancy_fine(fld, ff, fc, pts, cam)
        assert (pc0 - pc1).abs().max() > 1e-6
        assert (pf0 - pf1).abs().max() > 1e-6

    def test_heads_are_independent_of_each_other(self, setup):
        fld, fc, ff, cam, pts = setup
        with torch.no_grad():
            pc0 = occupancy_coarse(fld, fc, pts, cam)
            for p in fld.fine_head.parameters():
                p.add_(0.5)
            pc1 = occupancy_coarse(fld, fc, pts, cam)
        torch.testing.assert_close(pc0, pc1, rtol=0.0, atol=0.0)


@pytest.fixture(scope="module")
def tiny_geo(tiny_target):
    config = GeoTrainConfig(
        normal_steps=40,
        epochs_coarse=2,
        epochs_joint=2,
        points_per_step=256,
        normal_base=8,
        feature_mid=8,
        back_input="front",
        seed=0,
    )
    return train_geometry(tiny_target, None, config), config


class TestGeometryTraining:
    def test_training_histories_recorded(self, tiny_geo):
        geo, config = tiny_geo
        assert len(geo.meta["occupancy_loss"]) == 4
        assert all(np.isfinite(row[1]) for row in geo.meta["occupancy_loss"])
        assert len(geo.meta["normal_loss_front"]) > 0

    def test_field_grid_values_shape_and_chunk_equivalence(self, tiny_geo, tiny_target):
        geo, _ = tiny_geo
        rec = tiny_target.records("test")[0]
        front = load_view(tiny_target, rec, "front")
        vals_a = field_grid_values(geo, front.rgb, front.rgb, front.camera, 16, chunk=64)
        vals_b = field_grid_values(geo, front.rgb, front.rgb, front.camera, 16, chunk=100000)
        assert vals_a.shape == (16, 16, 16)
        assert vals_a.min() >= 0.0 and vals_a.max() <= 1.0
        np.testing.assert_allclose(vals_a, vals_b, atol=1e-6)

    def test_checkpoint_roundtrip_preserves_field(self, tiny_geo, tiny_target, tmp_path):
        geo, _ = tiny_geo
        path = str(tmp_path / "geo.ckpt")
        save_geo_checkpoint(path, geo)
        back = load_geo_checkpoint(path)
        assert back.config == geo.config
        rec = tiny_target.records("test")[0]
        front = load_view(tiny_target, rec, "front")
        vals_a = field_grid_values(geo, front.rgb, front.rgb, front.camera, 12)
        vals_b = field_grid_values(back, front.rgb, front.rgb, front.camera, 12)
        np.testing.assert_allclose(vals_a, vals_b, atol=1e-6)

    def test_training_deterministic(self, tiny_target, tiny_geo):
        geo, config = tiny_geo
        again = train_geometry(tiny_target, None, config)
        for mod_a, mod_b in (
            (geo.field, again.field),
            (geo.enc_coarse, again.enc_coarse),
            (geo.est.front, again.est.front),
        ):
            for (ka, va), (kb, vb) in zip(
                sorted(mod_a.state_dict().items()), sorted(mod_b.state_dict().items())
            ):
                assert ka == kb
                assert torch.equal(va, vb), f"parameter {ka} differs between reruns"
