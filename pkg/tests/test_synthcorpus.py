"""Body SDF, cameras, renderer, and corpus generation."""

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monohuman.errors import ConfigError
from monohuman.synthcorpus.body import (
    KEYPOINT_FLIP,
    KEYPOINT_NAMES,
    POSE_ANGLES,
    SEGMENT_FLIP,
    SEGMENTS,
    HumanoidScene,
    body_capsules,
    body_sdf,
    body_sdf_gradient,
    capsule_sdf,
    default_shape,
    keypoint_positions,
    nearest_segment,
    scene_bounds,
    smooth_min,
)
from monohuman.synthcorpus.camera import (
    CameraModel,
    back_camera,
    from_camera_space,
    project,
    project_to_view,
    rot_y,
    to_camera_space,
)
from monohuman.synthcorpus.corpus import CorpusConfig, DatasetManifest, generate_corpus
from monohuman.synthcorpus.patterns import PatternSpec, TextureSpec, surface_color
from monohuman.synthcorpus.render import render_view
from monohuman.synthcorpus.sampling import sample_occupancy_points


def _plain_scene(seed: int = 0) -> HumanoidScene:
    radii, lengths = default_shape()
    texture = TextureSpec(
        regions={
            "shirt": PatternSpec("solid", ((0.2, 0.3, 0.8),)),
            "pants": PatternSpec("solid", ((0.3, 0.3, 0.3),)),
            "skin": PatternSpec("solid", ((0.8, 0.6, 0.5),)),
            "head": PatternSpec("solid", ((0.8, 0.6, 0.5),)),
        }
    )
    pose = np.zeros(len(POSE_ANGLES))
    return HumanoidScene(pose=pose, radii=radii, lengths=lengths, texture=texture, seed=seed, scene_id="plain")


class TestBodySdf:
    def test_capsule_sdf_degenerate_is_sphere(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=3)
        p = rng.normal(size=(100, 3))
        got = capsule_sdf(p, a, a.copy(), 0.3)
        want = np.linalg.norm(p - a, axis=-1) - 0.3
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_capsule_sdf_matches_dense_segment_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            a, b = rng.normal(size=3), rng.normal(size=3)
            r = float(rng.uniform(0.05, 0.4))
            p = rng.normal(size=(50, 3))
            # Oracle: min distance over a dense sampling of the segment.
            t = np.linspace(0.0, 1.0, 20001)
            seg = a[None] + t[:, None] * (b - a)[None]
            dists = np.linalg.norm(p[:, None, :] - seg[None], axis=-1).min(axis=1) - r
            np.testing.assert_allclose(capsule_sdf(p, a, b, r), dists, atol=1e-6)

    @given(st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=10))
    @settings(max_examples=100, deadline=None)
    def test_smooth_min_bounds(self, values):
        d = np.array(values)
        k = 16.0
        s = smooth_min(d[None], k=k)[0]
        assert s <= d.min() + 1e-12
        assert s >= d.min() - np.log(len(values)) / k - 1e-12

    def test_body_sdf_lipschitz(self):
        scene = _plain_scene()
        rng = np.random.default_rng(2)
        p = rng.uniform(-1.2, 1.2, size=(1000, 3))
        delta = rng.normal(size=(1000, 3))
        delta *= rng.uniform(1e-4, 0.2, size=(1000, 1)) / np.linalg.norm(delta, axis=1, keepdims=True)
        diff = np.abs(body_sdf(scene, p + delta) - body_sdf(scene, p))
        assert np.all(diff <= (1.0 + 1e-9) * np.linalg.norm(delta, axis=1))

    def test_body_sdf_gradient_norm_at_most_one(self):
        scene = _plain_scene()
        rng = np.random.default_rng(3)
        p = rng.uniform(-1.0, 1.0, size=(500, 3))
        norms = np.linalg.norm(body_sdf_gradient(scene, p), axis=-1)
        assert np.all(norms <= 1.0 + 1e-6)

    def test_neutral_pose_mirror_symmetry(self):
        scene = _plain_scene()
        rng = np.random.default_rng(4)
        p = rng.uniform(-1.0, 1.0, size=(400, 3))
        q = p.copy()
        q[:, 0] *= -1.0
        np.testing.assert_allclose(body_sdf(scene, p), body_sdf(scene, q), atol=1e-12)

    def test_nearest_segment_mirror_maps_through_flip_table(self):
        scene = _plain_scene()
        rng = np.random.default_rng(5)
        p = rng.uniform(-0.9, 0.9, size=(300, 3))
        # Stay away from ties between mirrored segments.
        keep = np.abs(p[:, 0]) > 0.05
        p = p[keep]
        q = p.copy()
        q[:, 0] *= -1.0
        left = nearest_segment(scene, p)
        right = nearest_segment(scene, q)
        np.testing.assert_array_equal(np.asarray(SEGMENT_FLIP)[left], right)

    def test_flip_tables_are_involutions(self):
        for table, n in ((SEGMENT_FLIP, len(SEGMENTS)), (KEYPOINT_FLIP, len(KEYPOINT_NAMES))):
            perm = np.asarray(table)
            assert sorted(perm.tolist()) == list(range(n))
            np.testing.assert_array_equal(perm[perm], np.arange(n))

    def test_keypoints_inside_bounds(self):
        scene = _plain_scene()
        lo, hi = scene_bounds(scene)
        kp = keypoint_positions(scene)
        assert kp.shape == (len(KEYPOINT_NAMES), 3)
        assert np.all(kp >= lo - 1e-9) and np.all(kp <= hi + 1e-9)

    def test_capsules_inside_scene_bounds(self):
        scene = _plain_scene()
        a, b, r = body_capsules(scene)
        lo, hi = scene_bounds(scene, margin=0.0)
        pts = np.concatenate([a, b])
        rad = np.concatenate([r, r])[:, None]
        assert np.all(pts - rad >= lo - 1e-9) and np.all(pts + rad <= hi + 1e-9)


class TestCamera:
    def test_camera_space_roundtrip(self):
        cam = CameraModel(yaw=0.7, scale=50.0, image_size=(64, 48), center=(0.1, -0.2, 0.3))
        rng = np.random.default_rng(6)
        x = rng.normal(size=(200, 3))
        np.testing.assert_allclose(from_camera_space(cam, to_camera_space(cam, x)), x, atol=1e-12)

    def test_depth_convention_larger_is_nearer(self):
        cam = CameraModel(yaw=0.0, scale=50.0, image_size=(64, 64))
        near = np.array([[0.0, 0.0, 0.5]])
        far = np.array([[0.0, 0.0, -0.5]])
        assert project(cam, near)[2][0] > project(cam, far)[2][0]

    def test_pixel_center_convention(self):
        cam = CameraModel(yaw=0.0, scale=32.0, image_size=(64, 64))
        u, v, _ = project(cam, np.array([[0.0, 0.0, 0.0]]))
        assert u[0] == pytest.approx(32.0)
        assert v[0] == pytest.approx(32.0)
        # +x moves right (u grows), +y moves up (v shrinks)
        u2, v2, _ = project(cam, np.array([[0.5, 0.25, 0.0]]))
        assert u2[0] == pytest.approx(48.0)
        assert v2[0] == pytest.approx(24.0)

    def test_back_camera_opposes(self):
        cam = CameraModel(yaw=0.3, scale=40.0, image_size=(32, 32), center=(0.0, 0.1, 0.0))
        back = back_camera(cam)
        assert back.yaw == pytest.approx(cam.yaw + np.pi)
        x = np.random.default_rng(7).normal(size=(50, 3))
        d_front = project(cam, x)[2]
        d_back = project(back, x)[2]
        # Depth relative to center negates when viewed from the other side.
        cz = to_camera_space(cam, np.asarray(cam.center)[None])[0, 2]
        np.testing.assert_allclose(d_front - cz, -(d_back - cz), atol=1e-9)

    def test_project_to_view_mirrors_u(self):
        cam = CameraModel(yaw=1.1, scale=40.0, image_size=(48, 48))
        x = np.random.default_rng(8).normal(size=(50, 3))
        u, v, d = project(cam, x)
        uf, vf, df = project_to_view(cam, x, flipped=True)
        np.testing.assert_allclose(uf, 48 - u, atol=1e-12)
        np.testing.assert_allclose(vf, v, atol=1e-12)
        np.testing.assert_allclose(df, d, atol=1e-12)

    def test_rot_y_orthonormal(self):
        m = rot_y(0.83)
        np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(m) == pytest.approx(1.0)

    def test_invalid_cameras_rejected(self):
        with pytest.raises(ConfigError):
            CameraModel(yaw=0.0, scale=-1.0, image_size=(32, 32))
        with pytest.raises(ConfigError):
            CameraModel(yaw=0.0, scale=10.0, image_size=(0, 32))
        with pytest.raises(ConfigError):
            CameraModel(yaw=0.0, scale=10.0, image_size=(32, 32), kind="pinhole")


@pytest.fixture(scope="module")
def plain_render():
    scene = _plain_scene()
    cam = CameraModel(yaw=0.2, scale=26.0, image_size=(64, 64))
    return scene, cam, render_view(scene, cam, "front")


class TestRenderer:

    def test_channels_consistent(self, plain_render):
        _, _, s = plain_render
        assert s.rgb.shape == (64, 64, 3) and s.rgb.dtype == np.float32
        assert s.silhouette.dtype == bool
        np.testing.assert_array_equal(s.silhouette, s.part_seg > 0)
        # Background is exactly black / zero-normal.
        assert np.all(s.rgb[~s.silhouette] == 0.0)
        assert np.all(s.normal_map[~s.silhouette] == 0.0)
        norms = np.linalg.norm(s.normal_map[s.silhouette], axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-3)

    def test_visible_normals_face_viewer(self, plain_render):
        _, _, s = plain_render
        # Camera looks along -z, so camera-space normals of first hits
        # cannot point away from the viewer (grazing hits allowed at ~0).
        assert np.all(s.normal_map[s.silhouette][:, 2] > -0.05)

    def test_hit_colors_match_dense_ray_march(self, plain_render):
        scene, cam, s = plain_render
        # Pixels whose 3x3 part-segment neighborhood is uniform: away from
        # region boundaries, where a hit-epsilon of depth cannot change the
        # sampled color.
        seg = s.part_seg
        interior = np.zeros_like(s.silhouette)
        for i in range(1, 63):
            for j in range(1, 63):
                patch = seg[i - 1 : i + 2, j - 1 : j + 2]
                interior[i, j] = seg[i, j] > 0 and np.all(patch == seg[i, j])
        ii, jj = np.nonzero(interior)
        pick = np.random.default_rng(9).choice(len(ii), size=150, replace=False)
        ii, jj = ii[pick], jj[pick]
        colors = s.rgb[ii, jj]
        want = []
        for i, j in zip(ii, jj):
            xc = (j + 0.5 - 32.0) / cam.scale
            yc = (32.0 - (i + 0.5)) / cam.scale
            z = np.linspace(1.5, -1.5, 4000)
            pts = from_camera_space(cam, np.stack([np.full_like(z, xc), np.full_like(z, yc), z], axis=1))
            d = body_sdf(scene, pts)
            hit = np.argmax(d < 1e-3)
            want.append(np.asarray(surface_color(scene, pts[hit])).reshape(3))
        np.testing.assert_allclose(colors, np.array(want, dtype=np.float32), atol=0.02)

    def test_back_view_is_mirrored_and_aligned(self, plain_render):
        scene, cam, front = plain_render
        back = render_view(scene, cam, "back")
        # Orthographic silhouettes from opposite sides mirror onto each other.
        inter = np.logical_and(front.silhouette, back.silhouette).sum()
        union = np.logical_or(front.silhouette, back.silhouette).sum()
        assert inter / union > 0.97
        # The back sample keeps the traced (yaw + pi) camera.
        assert back.camera.yaw == pytest.approx(cam.yaw + np.pi)
        # Mirrored normals stay unit length and face the back camera.
        norms = np.linalg.norm(back.normal_map[back.silhouette], axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-3)

    def test_keypoints_land_on_projections(self, plain_render):
        scene, cam, s = plain_render
        ku, kv, _ = project(cam, keypoint_positions(scene))
        np.testing.assert_allclose(s.keypoints[:, 1], ku, atol=1e-4)
        np.testing.assert_allclose(s.keypoints[:, 2], kv, atol=1e-4)

    def test_unknown_view_tag_rejected(self, plain_render):
        scene, cam, _ = plain_render
        with pytest.raises(ConfigError):
            render_view(scene, cam, "side")


class TestOccupancySampling:
    def test_labels_match_sdf_sign(self):
        scene = _plain_scene()
        rng = np.random.default_rng(10)
        pts, labels = sample_occupancy_points(scene, 500, 200, 0.05, rng)
        assert pts.shape == (700, 3) and labels.shape == (700,)
        np.testing.assert_array_equal(labels.astype(bool), body_sdf(scene, pts) < 0)
        # Both classes present and roughly balanced among surface samples.
        assert 0.2 < labels.mean() < 0.8


class TestCorpus:
    def test_manifest_roundtrip_and_validate(self, tiny_target):
        m = DatasetManifest.load(tiny_target.root)
        m.validate()
        assert m.kind == "target"
        assert m.data == tiny_target.data

    def test_scene_level_split(self, tiny_source, tiny_target):
        for manifest in (tiny_source, tiny_target):
            by_scene = {}
            for rec in manifest.records():
                by_scene.setdefault(rec["scene_id"], set()).add(rec["split"])
            assert all(len(s) == 1 for s in by_scene.values())
            splits = {next(iter(s)) for s in by_scene.values()}
            assert splits == {"train", "test"}

    def test_target_records_have_both_views_and_yaws(self, tiny_target):
        for rec in tiny_target.records():
            assert rec["front"] is not None and rec["back"] is not None
            assert rec["yaw_deg"] in (0.0, 180.0)

    def test_stored_occupancy_matches_sdf(self, tiny_target):
        rec = tiny_target.records("train")[0]
        scene = tiny_target.scene(rec["scene_id"])
        pts, labels = tiny_target.load_occupancy(rec["scene_id"])
        np.testing.assert_array_equal(labels.astype(bool), body_sdf(scene, pts) < 0)

    def test_generation_deterministic_and_worker_invariant(self, tmp_path):
        config = CorpusConfig(
            kind="target",
            n_scenes=2,
            seed=33,
            image_size=32,
            target_yaws_deg=(0,),
            occ_surface=50,
            occ_uniform=20,
        )
        m1 = generate_corpus(config, tmp_path / "a", workers=1)
        m2 = generate_corpus(config, tmp_path / "b", workers=2)
        j1 = json.dumps(m1.data, sort_keys=True)
        j2 = json.dumps(m2.data, sort_keys=True)
        assert j1 == j2
        for rel in self._all_files(m1):
            b1 = (tmp_path / "a" / rel).read_bytes()
            b2 = (tmp_path / "b" / rel).read_bytes()
            assert b1 == b2, f"file {rel} differs between generations"

    @staticmethod
    def _all_files(manifest: DatasetManifest) -> list[str]:
        rels = []
        for rec in manifest.records():
            for view_name in ("front", "back", "pair"):
                view = rec.get(view_name)
                if view:
                    rels.extend(view[k] for k in ("rgb", "seg", "normal", "keypoints"))
        for entry in manifest.scenes.values():
            if entry["occupancy"]:
                rels.extend(entry["occupancy"].values())
        return rels

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            CorpusConfig(kind="both", n_scenes=2)
        with pytest.raises(ConfigError):
            CorpusConfig(kind="source", n_scenes=0)
        with pytest.raises(ConfigError):
            CorpusConfig(kind="target", n_scenes=2, target_yaws_deg=())
        with pytest.raises(ConfigError):
            CorpusConfig(kind="source", n_scenes=2, split_fraction=1.5)

    def test_config_dict_roundtrip(self):
        config = CorpusConfig(kind="target", n_scenes=3, seed=9, target_yaws_deg=(0, 90))
        assert CorpusConfig.from_dict(config.to_dict()) == config
