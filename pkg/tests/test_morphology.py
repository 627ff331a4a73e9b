import numpy as np
import pytest
from scipy import ndimage

from fracseg import (
    BinaryMask2D,
    Image2D,
    binary_erosion,
    fill_holes,
    remove_small_objects,
    sample_interior_mask,
)
from fracseg.morphology import disk_element


def naive_erosion(mask: np.ndarray, radius: int) -> np.ndarray:
    """Set-difference oracle: keep p iff the whole disk around p is true."""
    h, w = mask.shape
    offsets = [
        (dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if dy * dy + dx * dx <= radius * radius
    ]
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            out[y, x] = all(
                0 <= y + dy < h and 0 <= x + dx < w and mask[y + dy, x + dx] for dy, dx in offsets
            )
    return out


def border_flood_fill(mask: np.ndarray) -> np.ndarray:
    """Background pixels reachable from the image border (4-connected)."""
    h, w = mask.shape
    reached = np.zeros_like(mask)
    stack = [(y, x) for y in range(h) for x in (0, w - 1) if not mask[y, x]]
    stack += [(y, x) for x in range(w) for y in (0, h - 1) if not mask[y, x]]
    while stack:
        y, x = stack.pop()
        if reached[y, x] or mask[y, x]:
            continue
        reached[y, x] = True
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and not mask[ny, nx] and not reached[ny, nx]:
                stack.append((ny, nx))
    return reached


class TestRemoveSmallObjects:
    def test_size_filter(self):
        mask = np.zeros((30, 30), bool)
        mask[2:7, 2:3] = True  # 5 px
        mask[15:20, 10:20] = True  # 50 px
        out = remove_small_objects(BinaryMask2D(mask), min_size=10)
        assert not out.data[2:7, 2:3].any()
        assert out.data[15:20, 10:20].all()

    def test_min_size_one_is_identity(self, rng):
        mask = rng.random((20, 20)) > 0.7
        out = remove_small_objects(BinaryMask2D(mask), min_size=1)
        assert np.array_equal(out.data, mask)

    def test_diagonal_chain_connectivity(self):
        mask = np.zeros((16, 16), bool)
        for i in range(12):
            mask[i, i] = True
        conn4 = remove_small_objects(BinaryMask2D(mask), min_size=10, connectivity=4)
        conn8 = remove_small_objects(BinaryMask2D(mask), min_size=10, connectivity=8)
        assert not conn4.data.any()
        assert np.array_equal(conn8.data, mask)

    def test_idempotent(self, rng):
        mask = BinaryMask2D(rng.random((40, 40)) > 0.6)
        once = remove_small_objects(mask, min_size=8)
        twice = remove_small_objects(once, min_size=8)
        assert np.array_equal(once.data, twice.data)

    def test_bad_min_size(self):
        with pytest.raises(ValueError):
            remove_small_objects(BinaryMask2D(np.ones((3, 3), bool)), min_size=0)


class TestBinaryErosion:
    def test_all_true_radius_one(self):
        out = binary_erosion(BinaryMask2D(np.ones((10, 10), bool)), radius=1)
        expected = np.zeros((10, 10), bool)
        expected[1:-1, 1:-1] = True
        assert np.array_equal(out.data, expected)

    def test_single_pixel_vanishes(self):
        mask = np.zeros((9, 9), bool)
        mask[4, 4] = True
        assert not binary_erosion(BinaryMask2D(mask), radius=1).data.any()

    def test_square_shrinks_by_radius(self):
        mask = np.zeros((20, 20), bool)
        mask[5:15, 5:15] = True
        out = binary_erosion(BinaryMask2D(mask), radius=2)
        expected = np.zeros((20, 20), bool)
        expected[7:13, 7:13] = True
        assert np.array_equal(out.data, expected)

    def test_matches_naive_oracle(self, rng):
        mask = rng.random((18, 18)) > 0.35
        for radius in (1, 2):
            out = binary_erosion(BinaryMask2D(mask), radius=radius)
            assert np.array_equal(out.data, naive_erosion(mask, radius))

    def test_anti_extensive(self, rng):
        mask = rng.random((25, 25)) > 0.4
        out = binary_erosion(BinaryMask2D(mask), radius=1)
        assert not (out.data & ~mask).any()

    def test_disk_element(self):
        d = disk_element(2)
        assert d.shape == (5, 5)
        assert d[2, 0] and d[0, 2] and d[1, 1]
        assert not d[0, 0]


class TestFillHoles:
    def test_ring_becomes_disk(self):
        yy, xx = np.mgrid[0:31, 0:31]
        r2 = (xx - 15) ** 2 + (yy - 15) ** 2
        ring = (r2 <= 12**2) & (r2 >= 8**2)
        out = fill_holes(BinaryMask2D(ring))
        assert np.array_equal(out.data, r2 <= 12**2)

    def test_no_holes_identity(self, rng):
        mask = np.zeros((20, 20), bool)
        mask[3:8, 3:8] = True
        out = fill_holes(BinaryMask2D(mask))
        assert np.array_equal(out.data, mask)

    def test_nested_rings_fill_to_outer_disk(self):
        yy, xx = np.mgrid[0:41, 0:41]
        r2 = (xx - 20) ** 2 + (yy - 20) ** 2
        rings = ((r2 <= 18**2) & (r2 >= 15**2)) | ((r2 <= 9**2) & (r2 >= 6**2))
        out = fill_holes(BinaryMask2D(rings))
        assert np.array_equal(out.data, r2 <= 18**2)

    def test_extensive_and_idempotent(self, rng):
        mask = rng.random((24, 24)) > 0.55
        once = fill_holes(BinaryMask2D(mask))
        assert (once.data | mask).sum() == once.data.sum()  # output superset
        twice = fill_holes(once)
        assert np.array_equal(once.data, twice.data)

    def test_matches_border_flood_oracle(self, rng):
        for seed in range(4):
            mask = np.random.default_rng(seed).random((15, 15)) > 0.5
            filled = fill_holes(BinaryMask2D(mask)).data
            # pixels not reachable from the border become true
            expected = mask | ~(mask | border_flood_fill(mask))
            assert np.array_equal(filled, expected)


class TestSampleInterior:
    def test_bright_disk_shrinks_by_radius(self):
        yy, xx = np.mgrid[0:64, 0:64]
        disk = (xx - 32) ** 2 + (yy - 32) ** 2 <= 20**2
        img = Image2D(np.where(disk, 0.8, 0.1))
        out = sample_interior_mask(img, erosion_radius=3)
        assert np.array_equal(out.data, naive_erosion(disk, 3))

    def test_all_bright_degenerate(self):
        with pytest.raises(ValueError, match="degenerate histogram"):
            sample_interior_mask(Image2D(np.full((16, 16), 0.9)), erosion_radius=1)

    def test_fractured_disk_fills_contiguous(self):
        yy, xx = np.mgrid[0:64, 0:64]
        disk = (xx - 32) ** 2 + (yy - 32) ** 2 <= 22**2
        img_data = np.where(disk, 0.8, 0.1)
        img_data[30:34, 20:45] = 0.1  # dark fracture strictly inside
        out = sample_interior_mask(Image2D(img_data), erosion_radius=2)
        assert out.data[31, 32]  # fracture interior included after filling
        _, n = ndimage.label(out.data)
        assert n == 1
