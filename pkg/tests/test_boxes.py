import math

import numpy as np
import pytest

from dado.boxes import (
    Detection,
    DetectionSet,
    connected_components,
    extract_detections,
    iou,
    morph_clean,
    score_box,
    soft_nms,
)
from dado.fusion import CombinedLayer
from dado.map_store import Box
from dado.validation import ContractError

from oracles import flood_fill_components, iou_rasterized, morph_clean_loop, soft_nms_reference

ON = 255.0


def _binary(shape, on_regions):
    arr = np.zeros(shape, np.float32)
    for (y0, y1, x0, x1) in on_regions:
        arr[y0:y1, x0:x1] = ON
    return arr


class TestMorphClean:
    def test_isolated_pixel_removed(self):
        arr = np.zeros((9, 9), np.float32)
        arr[4, 4] = ON
        assert not morph_clean(arr, 3).any()

    def test_hole_filled_square_preserved(self):
        arr = np.full((10, 10), ON, np.float32)
        arr[5, 5] = 0.0
        out = morph_clean(arr, 3)
        assert out.all()

    def test_kernel_one_identity(self):
        rng = np.random.default_rng(1)
        arr = (rng.random((8, 8)) > 0.5).astype(np.float32) * ON
        assert np.array_equal(morph_clean(arr, 1), arr)

    def test_random_matches_minmax_filter_composition(self):
        rng = np.random.default_rng(19)
        for _ in range(10):
            arr = (rng.random((14, 11)) > 0.55).astype(np.float32) * ON
            assert np.array_equal(morph_clean(arr, 3), morph_clean_loop(arr, 3))

    def test_even_kernel_rejected(self):
        with pytest.raises(ContractError):
            morph_clean(np.zeros((3, 3), np.float32), 2)

    def test_open_close_order(self):
        arr = np.full((10, 10), ON, np.float32)
        arr[5, 5] = 0.0
        # opening first leaves the hole alone; closing then fills it
        out = morph_clean(arr, 3, order="open-close")
        assert out.all()
        speck = np.zeros((9, 9), np.float32)
        speck[4, 4] = ON
        assert not morph_clean(speck, 3, order="open-close").any()
        with pytest.raises(ContractError):
            morph_clean(arr, 3, order="sideways")


class TestConnectedComponents:
    def test_two_disjoint_squares(self):
        arr = _binary((20, 20), [(2, 7, 2, 7), (10, 15, 12, 17)])
        comps = connected_components(arr)
        assert [c[0] for c in comps] == [Box(2, 2, 7, 7), Box(12, 10, 17, 15)]
        assert all(m.sum() == 25 for _, m in comps)

    def test_diagonal_pixels_are_one_component(self):
        arr = np.zeros((4, 4), np.float32)
        arr[0, 0] = arr[1, 1] = arr[2, 2] = ON
        comps = connected_components(arr)
        assert len(comps) == 1
        assert comps[0][0] == Box(0, 0, 3, 3)

    def test_min_area_filter(self):
        arr = _binary((20, 20), [(0, 1, 0, 1), (5, 15, 5, 15)])
        comps = connected_components(arr, min_area_frac=0.01)  # 4 px floor
        assert len(comps) == 1
        assert comps[0][0] == Box(5, 5, 15, 15)

    def test_random_blobs_match_flood_fill(self):
        rng = np.random.default_rng(37)
        for _ in range(8):
            arr = (rng.random((18, 15)) > 0.7).astype(np.float32) * ON
            mine = [
                (b.xmin, b.ymin, b.xmax, b.ymax, int(m.sum()))
                for b, m in connected_components(arr)
            ]
            theirs = [
                (xmin, ymin, xmax, ymax, area)
                for (xmin, ymin, xmax, ymax, area) in flood_fill_components(arr)
            ]
            assert mine == theirs

    def test_boxes_are_tight(self):
        rng = np.random.default_rng(41)
        arr = (rng.random((16, 16)) > 0.6).astype(np.float32) * ON
        for box, mask in connected_components(arr):
            ys, xs = np.nonzero(mask)
            assert (xs.min(), ys.min(), xs.max() + 1, ys.max() + 1) == (
                box.xmin, box.ymin, box.xmax, box.ymax,
            )


class TestScoreBox:
    def test_constant_component(self):
        raw = np.full((5, 5), 0.25, np.float32)
        mask = np.zeros((5, 5), bool)
        mask[1:3, 1:3] = True
        assert score_box(raw, mask) == pytest.approx(0.25)

    def test_mixed_component_mean(self):
        raw = np.zeros((2, 2), np.float32)
        raw[0] = 0.2
        raw[1] = 0.4
        assert score_box(raw, np.ones((2, 2), bool)) == pytest.approx(0.3)

    def test_score_scales_linearly_with_weights(self):
        rng = np.random.default_rng(3)
        raw = rng.random((6, 6)).astype(np.float32)
        mask = rng.random((6, 6)) > 0.5
        assert score_box(raw * 2.0, mask) == pytest.approx(2 * score_box(raw, mask))

    def test_empty_mask_rejected(self):
        with pytest.raises(ContractError):
            score_box(np.ones((2, 2), np.float32), np.zeros((2, 2), bool))


class TestIou:
    def test_identical(self):
        b = Box(3, 4, 9, 11)
        assert iou(b, b) == 1.0

    def test_half_overlap_thirds(self):
        assert iou(Box(0, 0, 10, 10), Box(5, 0, 15, 10)) == pytest.approx(1 / 3)

    def test_disjoint(self):
        assert iou(Box(0, 0, 2, 2), Box(5, 5, 8, 8)) == 0.0

    def test_random_pairs_match_pixel_counting(self):
        rng = np.random.default_rng(47)
        for _ in range(30):
            ax = sorted(rng.integers(0, 30, 2).tolist())
            ay = sorted(rng.integers(0, 30, 2).tolist())
            bx = sorted(rng.integers(0, 30, 2).tolist())
            by = sorted(rng.integers(0, 30, 2).tolist())
            a = Box(ax[0], ay[0], ax[1] + 1, ay[1] + 1)
            b = Box(bx[0], by[0], bx[1] + 1, by[1] + 1)
            assert iou(a, b) == pytest.approx(iou_rasterized(a, b, grid=32), abs=1e-12)

    def test_symmetry(self):
        a, b = Box(0, 0, 4, 4), Box(2, 2, 10, 9)
        assert iou(a, b) == iou(b, a)


class TestSoftNms:
    def test_single_detection_unchanged(self):
        ds = DetectionSet("s", [Detection(Box(0, 0, 5, 5), 0.7)])
        out = soft_nms(ds)
        assert out.detections[0].score == 0.7

    def test_identical_boxes_gaussian_decay(self):
        ds = DetectionSet(
            "s",
            [Detection(Box(0, 0, 5, 5), 0.9), Detection(Box(0, 0, 5, 5), 0.8)],
        )
        out = soft_nms(ds, sigma=0.5)
        assert out.detections[0].score == 0.9
        assert out.detections[1].score == pytest.approx(0.8 * math.exp(-2.0), rel=1e-12)

    def test_disjoint_boxes_unchanged(self):
        ds = DetectionSet(
            "s",
            [
                Detection(Box(0, 0, 5, 5), 0.9),
                Detection(Box(10, 10, 15, 15), 0.4),
                Detection(Box(20, 0, 28, 4), 0.6),
            ],
        )
        out = soft_nms(ds)
        assert [d.score for d in out.detections] == [0.9, 0.6, 0.4]

    def test_floor_removes_collapsed_scores(self):
        ds = DetectionSet(
            "s",
            [Detection(Box(0, 0, 5, 5), 0.9), Detection(Box(0, 0, 5, 5), 0.002)],
        )
        out = soft_nms(ds, sigma=0.5, score_floor=0.001)
        assert len(out.detections) == 1

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(59)
        for _ in range(40):
            n = int(rng.integers(1, 15))
            dets = []
            for _ in range(n):
                x = sorted(rng.integers(0, 40, 2).tolist())
                y = sorted(rng.integers(0, 40, 2).tolist())
                dets.append(
                    Detection(Box(x[0], y[0], x[1] + 1, y[1] + 1),
                              float(rng.random()))
                )
            mine = soft_nms(DetectionSet("s", dets), sigma=0.5, score_floor=0.001)
            ref = soft_nms_reference(
                [(d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax) for d in dets],
                [d.score for d in dets], sigma=0.5, floor=0.001,
            )
            assert len(mine.detections) == len(ref)
            for d, (box, score) in zip(mine.detections, ref):
                assert (d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax) == box
                assert d.score == pytest.approx(score, rel=1e-9, abs=1e-12)

    def test_never_increases_scores_and_keeps_top1(self):
        rng = np.random.default_rng(61)
        dets = [
            Detection(Box(i, 0, i + 10, 10), float(s))
            for i, s in enumerate(rng.random(8))
        ]
        before = {
            (d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax): d.score for d in dets
        }
        top = max(dets, key=lambda d: d.score)
        out = soft_nms(DetectionSet("s", dets))
        assert out.detections[0].box == top.box
        assert out.detections[0].score == top.score
        for d in out.detections:
            key = (d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax)
            assert d.score <= before[key] + 1e-12


class TestExtractDetections:
    def _layer(self, binary, raw, index=0):
        return CombinedLayer(
            raw=np.asarray(raw, np.float32),
            tau=0.0,
            binary=np.asarray(binary, np.float32),
            layer_index=index,
        )

    def test_single_blob_single_detection(self):
        binary = _binary((20, 20), [(4, 12, 5, 13)])
        raw = np.where(binary > 0, 0.6, 0.0).astype(np.float32)
        ds = extract_detections([self._layer(binary, raw)], stem="img")
        assert len(ds.detections) == 1
        d = ds.detections[0]
        assert d.box == Box(5, 4, 13, 12)
        assert d.score == pytest.approx(0.6)
        assert d.component_area == 64

    def test_duplicate_across_layers_decays_by_gaussian(self):
        binary = _binary((24, 24), [(3, 13, 3, 13)])
        raw_a = np.where(binary > 0, 0.8, 0.0).astype(np.float32)
        raw_b = np.where(binary > 0, 0.5, 0.0).astype(np.float32)
        ds = extract_detections(
            [self._layer(binary, raw_a, 0), self._layer(binary, raw_b, 1)],
            stem="img", nms_sigma=0.5,
        )
        assert len(ds.detections) == 2
        assert ds.detections[0].score == pytest.approx(0.8)
        # same box in both layers: IoU 1, survivor decayed by e^{-1/sigma}
        assert ds.detections[1].score == pytest.approx(0.5 * math.exp(-2.0), rel=1e-9)

    def test_empty_layers_give_empty_set(self):
        ds = extract_detections(
            [self._layer(np.zeros((8, 8)), np.zeros((8, 8)))], stem="img"
        )
        assert ds.detections == []

    def test_speckle_removed_by_kernel(self):
        binary = _binary((30, 30), [(5, 15, 5, 15)])
        binary[20, 20] = ON  # 1-px speckle
        raw = np.where(binary > 0, 0.5, 0.0).astype(np.float32)
        ds = extract_detections([self._layer(binary, raw)], stem="img", kernel=3)
        assert len(ds.detections) == 1
        assert ds.detections[0].box == Box(5, 5, 15, 15)

    def test_deterministic(self):
        rng = np.random.default_rng(67)
        binary = (rng.random((25, 25)) > 0.6).astype(np.float32) * ON
        raw = rng.random((25, 25)).astype(np.float32)
        a = extract_detections([self._layer(binary, raw)], stem="img")
        b = extract_detections([self._layer(binary.copy(), raw.copy())], stem="img")
        assert [(d.box, d.score) for d in a.detections] == [
            (d.box, d.score) for d in b.detections
        ]
