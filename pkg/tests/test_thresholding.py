import numpy as np
import pytest

from fracseg import (
    BinaryMask2D,
    Histogram,
    Image2D,
    compute_histogram,
    fill_exterior,
    local_threshold,
    otsu_threshold,
)
from fracseg.thresholding import LocalThresholdParams


def otsu_oracle(bins) -> int:
    """Plain-loop exhaustive search over all 255 splits."""
    best_k, best_v = None, -1.0
    total = float(sum(bins))
    s_total = float(sum(i * b for i, b in enumerate(bins)))
    w0 = 0.0
    s0 = 0.0
    for k in range(255):
        w0 += float(bins[k])
        s0 += float(k * bins[k])
        w1 = total - w0
        if w0 <= 0 or w1 <= 0:
            continue
        s1 = s_total - s0
        numer = s0 * w1 - s1 * w0
        v = numer * numer / (w0 * w1)
        if v > best_v:
            best_v, best_k = v, k
    return best_k


class TestLocalThreshold:
    def test_constant_image_dark_is_empty(self):
        img = Image2D(np.full((32, 32), 0.6))
        mask = local_threshold(img, LocalThresholdParams(window_sigma=4.0, offset=0.05))
        assert not mask.data.any()

    def test_dark_line_phantom(self):
        data = np.full((64, 64), 0.8)
        data[30:33, :] = 0.2
        mask = local_threshold(Image2D(data), LocalThresholdParams(window_sigma=8.0, offset=0.1))
        assert mask.data[30:33, :].all()
        assert not mask.data[:28, :].any() and not mask.data[35:, :].any()

    def test_additive_shift_invariance(self, rng):
        data = rng.random((48, 48))
        params = LocalThresholdParams(window_sigma=6.0, offset=0.03)
        base = local_threshold(Image2D(data), params)
        shifted = local_threshold(Image2D(data + 0.25), params)
        assert np.array_equal(base.data, shifted.data)

    def test_bright_polarity(self):
        # T = smooth - offset for both polarities; a strict bright
        # threshold therefore takes a negative offset.
        data = np.full((64, 64), 0.2)
        data[30:33, :] = 0.9
        mask = local_threshold(
            Image2D(data), LocalThresholdParams(window_sigma=8.0, offset=-0.1, polarity="bright")
        )
        assert mask.data[30:33, :].all()
        assert not mask.data[:28, :].any()

    def test_bad_params(self):
        with pytest.raises(ValueError):
            LocalThresholdParams(window_sigma=0.0)
        with pytest.raises(ValueError):
            LocalThresholdParams(polarity="up")


def _hist(bins) -> Histogram:
    arr = np.zeros(256, dtype=np.int64)
    for k, v in bins.items():
        arr[k] = v
    return Histogram(bins=arr, total=int(arr.sum()))


class TestOtsu:
    def test_equal_spikes_tie_breaks_to_smallest(self):
        assert otsu_threshold(_hist({10: 500, 200: 500})) == 10

    def test_gaussian_pair_matches_oracle(self):
        gen = np.random.default_rng(11)
        samples = np.concatenate(
            [gen.normal(60, 10, 4000).round(), gen.normal(190, 10, 4000).round()]
        ).clip(0, 255).astype(int)
        bins = np.bincount(samples, minlength=256)
        h = Histogram(bins=bins, total=int(bins.sum()))
        k = otsu_threshold(h)
        oracle = otsu_oracle(bins)
        assert abs(k - oracle) <= 2
        assert k == oracle

    def test_mass_only_at_extremes(self):
        assert otsu_threshold(_hist({0: 70, 255: 30})) == 0

    def test_degenerate_single_bin(self):
        with pytest.raises(ValueError, match="degenerate histogram"):
            otsu_threshold(_hist({42: 1000}))

    def test_matches_oracle_on_random_histograms(self):
        gen = np.random.default_rng(99)
        for _ in range(200):
            occupied = gen.integers(2, 40)
            bins = np.zeros(256, dtype=np.int64)
            idx = gen.choice(256, size=occupied, replace=False)
            bins[idx] = gen.integers(1, 10000, size=occupied)
            h = Histogram(bins=bins, total=int(bins.sum()))
            assert otsu_threshold(h) == otsu_oracle(bins)

    def test_histogram_from_image(self, rng):
        img = Image2D(rng.random((64, 64)))
        h = compute_histogram(img)
        assert otsu_threshold(h) == otsu_oracle(h.bins)


class TestFillExterior:
    def test_all_interior_unchanged(self, rng):
        data = rng.random((20, 20))
        out = fill_exterior(Image2D(data), BinaryMask2D(np.ones((20, 20), bool)), fill=0.3)
        assert np.array_equal(out.data, data)

    def test_no_interior_constant(self, rng):
        out = fill_exterior(
            Image2D(rng.random((20, 20))), BinaryMask2D(np.zeros((20, 20), bool)), fill=0.7
        )
        assert np.array_equal(out.data, np.full((20, 20), 0.7))

    def test_auto_uses_reference_mean(self):
        yy, xx = np.mgrid[0:40, 0:40]
        interior = BinaryMask2D((xx - 20) ** 2 + (yy - 20) ** 2 < 15**2)
        data = np.full((40, 40), 0.2)
        data[18:23, 18:23] = 0.63
        reference = np.zeros((40, 40), bool)
        reference[18:23, 18:23] = True
        out = fill_exterior(Image2D(data), interior, fill="auto", reference=BinaryMask2D(reference))
        assert np.allclose(out.data[~interior.data], 0.63)
        assert np.array_equal(out.data[interior.data], data[interior.data])

    def test_auto_with_empty_reference(self):
        img = Image2D(np.zeros((8, 8)))
        interior = BinaryMask2D(np.ones((8, 8), bool))
        with pytest.raises(ValueError, match="reference"):
            fill_exterior(img, interior, fill="auto", reference=BinaryMask2D(np.zeros((8, 8), bool)))

    def test_interior_never_modified(self, rng):
        for seed in range(5):
            gen = np.random.default_rng(seed)
            data = gen.random((16, 16))
            interior = gen.random((16, 16)) > 0.5
            out = fill_exterior(Image2D(data), BinaryMask2D(interior), fill=0.1)
            assert np.array_equal(out.data[interior], data[interior])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="match"):
            fill_exterior(Image2D(np.zeros((4, 4))), BinaryMask2D(np.zeros((5, 4), bool)), fill=0.1)
