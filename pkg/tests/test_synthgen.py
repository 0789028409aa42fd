import numpy as np
import pytest

from dado.attention import normalize_unit
from dado.depth_layers import depth_histogram
from dado.map_store import Box, read_pfm, scan_manifest
from dado.synthgen import (
    PortableRng,
    SceneObject,
    SceneSpec,
    generate_scene,
    generate_suite,
    subseed,
)
from dado.validation import ContractError

from oracles import splitmix64_reference


class TestPortableRng:
    def test_matches_pure_int_reference(self):
        for seed in (0, 1, 42, 2**63 + 11):
            mine = PortableRng(seed).raw(16).tolist()
            assert mine == splitmix64_reference(seed, 16)

    def test_uniforms_in_unit_interval(self):
        u = PortableRng(9).uniforms(1000)
        assert u.min() >= 0.0 and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.05

    def test_normals_moments(self):
        z = PortableRng(3).normals(4000)
        assert abs(z.mean()) < 0.06
        assert abs(z.std() - 1.0) < 0.06

    def test_streams_are_reproducible(self):
        a = PortableRng(123)
        b = PortableRng(123)
        assert np.array_equal(a.normals(11), b.normals(11))

    def test_subseed_derivation(self):
        assert subseed(5, 0) != subseed(5, 1)
        assert subseed(5, 3) == subseed(5, 3)


def _one_rect_spec(noise=0.0, seed=1):
    return SceneSpec(
        seed=seed, width=40, height=30,
        objects=[SceneObject("rect", Box(10, 8, 26, 22), depth_plane=0.8)],
        background_depth=0.0, noise_sigma=noise,
    )


class TestGenerateScene:
    def test_single_rect_two_histogram_modes(self):
        depth, heads, gt = generate_scene(_one_rect_spec())
        hist = depth_histogram(normalize_unit(depth), bins=16)
        assert int((hist.counts > 0).sum()) == 2  # background + object plane
        assert gt.boxes == [Box(10, 8, 26, 22)]

    def test_zero_objects_pure_noise(self):
        spec = SceneSpec(seed=2, width=16, height=16, objects=[],
                         background_depth=0.1, noise_sigma=0.05)
        depth, heads, gt = generate_scene(spec)
        assert gt.boxes == []
        assert all(h.shape == (16, 16) for h in heads)
        assert any(h.std() > 0 for h in heads)  # noise present

    def test_deterministic_bytes(self):
        spec = SceneSpec(
            seed=42, width=48, height=32,
            objects=[
                SceneObject("rect", Box(2, 2, 14, 12), 0.5),
                SceneObject("ellipse", Box(20, 4, 36, 20), 0.75),
                SceneObject("rect", Box(30, 22, 44, 30), 1.0),
            ],
            noise_sigma=0.03,
        )
        d1, h1, _ = generate_scene(spec)
        d2, h2, _ = generate_scene(spec)
        assert d1.tobytes() == d2.tobytes()
        assert all(a.tobytes() == b.tobytes() for a, b in zip(h1, h2))

    def test_attention_confined_to_silhouette(self):
        depth, heads, _ = generate_scene(_one_rect_spec())
        combined = np.maximum.reduce(heads)
        outside = np.ones((30, 40), bool)
        outside[8:22, 10:26] = False
        assert not combined[outside].any()
        assert combined[14, 18] > 0.5

    def test_occluded_region_is_attention_silent_for_far_object(self):
        spec = SceneSpec(
            seed=3, width=40, height=40,
            objects=[
                SceneObject("rect", Box(5, 5, 35, 35), 0.4),   # far, head 0
                SceneObject("rect", Box(15, 15, 25, 25), 0.8),  # near, head 1
            ],
        )
        depth, heads, _ = generate_scene(spec)
        assert not heads[0][15:25, 15:25].any()  # far blob clipped by occluder
        assert heads[1][18:22, 18:22].all()
        assert np.all(depth[15:25, 15:25] == np.float32(0.8))

    def test_depth_plane_separation_enforced(self):
        with pytest.raises(ContractError, match="closer than"):
            SceneSpec(
                seed=1, width=20, height=20,
                objects=[
                    SceneObject("rect", Box(0, 0, 5, 5), 0.50),
                    SceneObject("rect", Box(10, 10, 15, 15), 0.51),
                ],
            )

    def test_same_plane_overlap_warns(self):
        with pytest.warns(UserWarning, match="unlikely to separate"):
            SceneSpec(
                seed=1, width=20, height=20,
                objects=[
                    SceneObject("rect", Box(0, 0, 10, 10), 0.5),
                    SceneObject("rect", Box(5, 5, 15, 15), 0.5),
                ],
            )

    def test_out_of_bounds_object_rejected(self):
        with pytest.raises(ContractError, match="outside"):
            SceneSpec(seed=1, width=20, height=20,
                      objects=[SceneObject("rect", Box(10, 10, 30, 15), 0.5)])


class TestGenerateSuite:
    def test_files_per_stem(self, tmp_path):
        manifest = generate_suite(5, seed=1, out_dir=tmp_path)
        assert manifest["scenes"] == 5
        entries, skipped = scan_manifest(tmp_path)
        assert not skipped
        assert [e.stem for e in entries] == [f"scene_{i:04d}" for i in range(5)]
        for e in entries:
            assert len(e.head_paths) == 6
            assert e.ann_path is not None

    def test_same_seed_identical_directory(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        generate_suite(4, seed=9, out_dir=a)
        generate_suite(4, seed=9, out_dir=b)
        for pa in sorted(a.iterdir()):
            assert (b / pa.name).read_bytes() == pa.read_bytes()

    def test_different_seed_differs(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        generate_suite(2, seed=1, out_dir=a, noise_sigma=0.01)
        generate_suite(2, seed=2, out_dir=b, noise_sigma=0.01)
        diff = [
            pa.name
            for pa in sorted(a.iterdir())
            if (b / pa.name).read_bytes() != pa.read_bytes()
        ]
        assert diff

    def test_occlusion_pair_present(self, tmp_path):
        generate_suite(5, seed=1, out_dir=tmp_path)
        entries, _ = scan_manifest(tmp_path)
        from dado.map_store import load_record

        found = False
        for e in entries:
            gt = load_record(e).annotation
            for i, a in enumerate(gt.boxes):
                for b in gt.boxes[i + 1:]:
                    inside = (a.xmin <= b.xmin and b.xmax <= a.xmax
                              and a.ymin <= b.ymin and b.ymax <= a.ymax)
                    if inside or (b.xmin <= a.xmin and a.xmax <= b.xmax
                                  and b.ymin <= a.ymin and a.ymax <= b.ymax):
                        found = True
        assert found, "expected at least one occlusion pair in 5 scenes"

    def test_depth_values_in_unit_range_without_noise(self, tmp_path):
        generate_suite(3, seed=4, out_dir=tmp_path)
        entries, _ = scan_manifest(tmp_path)
        for e in entries:
            d = read_pfm(e.depth_path)
            assert d.min() >= 0.0 and d.max() <= 1.0
