import math

import numpy as np
import pytest

from core.errors import ShapeError
from network.metrics import binarize, dice, foreground_iou, hausdorff, hausdorff95, image_diagonal, miou


def brute_force_hausdorff(pred: np.ndarray, gt: np.ndarray) -> float:
    p = [tuple(x) for x in np.argwhere(pred)]
    g = [tuple(x) for x in np.argwhere(gt)]

    def directed(a, b):
        worst = 0.0
        for ay, ax in a:
            best = min(math.sqrt((ay - by) ** 2 + (ax - bx) ** 2) for by, bx in b)
            worst = max(worst, best)
        return worst

    return max(directed(p, g), directed(g, p))


def random_pair(rng, max_size: int = 16):
    shape = tuple(int(s) for s in rng.integers(2, max_size + 1, size=2))
    pred = rng.uniform(size=shape) < rng.uniform(0.1, 0.7)
    gt = rng.uniform(size=shape) < rng.uniform(0.1, 0.7)
    pred.flat[0] = True
    gt.flat[-1] = True
    return pred.astype(np.uint8), gt.astype(np.uint8)


def counting_scores(pred: np.ndarray, gt: np.ndarray):
    tp = fp = fn = tn = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    fg = tp / (tp + fp + fn) if tp + fp + fn else 1.0
    bg = tn / (tn + fp + fn) if tn + fp + fn else 1.0
    overlap = 2.0 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 1.0
    return overlap, 0.5 * (fg + bg)


class TestOverlap:

    def test_left_half_against_full_frame(self):
        pred = np.zeros((4, 4), dtype=np.uint8)
        pred[:, :2] = 1
        gt = np.ones((4, 4), dtype=np.uint8)
        assert dice(pred, gt) == pytest.approx(2.0 / 3.0, rel=1e-15)
        assert foreground_iou(pred, gt) == 0.5
        assert miou(pred, gt) == 0.25

    def test_identical_and_disjoint(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        a[:2] = 1
        assert dice(a, a) == 1.0 and miou(a, a) == 1.0
        assert dice(a, 1 - a) == 0.0

    def test_both_empty(self):
        empty = np.zeros((3, 3), dtype=np.uint8)
        assert dice(empty, empty) == 1.0
        assert miou(empty, empty) == 1.0

    def test_dice_iou_identity_and_symmetry(self, rng):
        for _ in range(500):
            pred, gt = random_pair(rng)
            iou = foreground_iou(pred, gt)
            assert dice(pred, gt) == pytest.approx(2.0 * iou / (1.0 + iou), abs=1e-12)
            assert dice(pred, gt) == dice(gt, pred)

    def test_matches_pixel_counting(self, rng):
        for _ in range(500):
            pred, gt = random_pair(rng)
            assert (dice(pred, gt), miou(pred, gt)) == counting_scores(pred, gt)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dice(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_binarize_threshold(self):
        np.testing.assert_array_equal(binarize(np.array([0.2, 0.5, 0.51])), [0, 0, 1])


class TestHausdorff:

    def test_three_four_five(self):
        pred = np.zeros((5, 5), dtype=np.uint8)
        gt = np.zeros((5, 5), dtype=np.uint8)
        pred[0, 0] = 1
        gt[3, 4] = 1
        assert hausdorff(pred, gt) == (5.0, False)

    def test_identical(self, rng):
        pred, _ = random_pair(rng)
        assert hausdorff(pred, pred)[0] == 0.0

    def test_matches_brute_force(self, rng):
        for _ in range(500):
            pred, gt = random_pair(rng)
            distance, sentinel = hausdorff(pred, gt)
            assert not sentinel
            assert distance == pytest.approx(brute_force_hausdorff(pred, gt), abs=1e-12)
            assert distance == pytest.approx(hausdorff(gt, pred)[0], abs=1e-12)

    def test_translation_invariant(self, rng):
        pred, gt = random_pair(rng, max_size=8)
        padded_pred = np.pad(pred, ((3, 0), (2, 0)))
        padded_gt = np.pad(gt, ((3, 0), (2, 0)))
        assert hausdorff(padded_pred, padded_gt)[0] == pytest.approx(hausdorff(pred, gt)[0], abs=1e-12)

    def test_empty_mask_sentinel(self):
        empty = np.zeros((3, 4), dtype=np.uint8)
        full = np.ones((3, 4), dtype=np.uint8)
        assert hausdorff(empty, full) == (5.0, True)
        assert hausdorff95(full, empty) == (5.0, True)
        assert image_diagonal((1, 1, 3, 4)) == 5.0

    def test_hd95_bounded_by_hd(self, rng):
        for _ in range(50):
            pred, gt = random_pair(rng)
            assert hausdorff95(pred, gt)[0] <= hausdorff(pred, gt)[0] + 1e-12

    def test_spacing_scales_distance(self):
        pred = np.zeros((5, 5), dtype=np.uint8)
        gt = np.zeros((5, 5), dtype=np.uint8)
        pred[0, 0] = 1
        gt[3, 4] = 1
        assert hausdorff(pred, gt, spacing=0.5)[0] == 2.5
