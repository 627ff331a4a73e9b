import numpy as np
import pytest

from fracseg import (
    BinaryMask2D,
    Image2D,
    MaskStack,
    StackIOError,
    VolumeStack,
    read_mask_stack,
    read_stack,
    write_mask_stack,
    write_stack,
)
from fracseg.stackio import read_packed_masks, write_packed_masks


def _stack(rng, n=3, shape=(16, 20)):
    return VolumeStack(slices=[Image2D(rng.random(shape)) for _ in range(n)])


def test_uint16_round_trip(tmp_path, rng):
    stack = _stack(rng)
    write_stack(stack, tmp_path / "s", dtype="uint16")
    back = read_stack(tmp_path / "s")
    assert len(back) == 3
    for a, b in zip(stack, back):
        assert np.abs(a.data - b.data).max() <= 0.5 / 65535.0 + 1e-12


def test_uint8_round_trip(tmp_path, rng):
    stack = _stack(rng)
    write_stack(stack, tmp_path / "s", dtype="uint8")
    back = read_stack(tmp_path / "s")
    for a, b in zip(stack, back):
        assert np.abs(a.data - b.data).max() <= 0.5 / 255.0 + 1e-12


def test_float32_round_trip(tmp_path, rng):
    stack = _stack(rng)
    write_stack(stack, tmp_path / "s", dtype="float32")
    back = read_stack(tmp_path / "s")
    for a, b in zip(stack, back):
        assert np.abs(a.data - b.data).max() <= 1e-7


def test_lexicographic_slice_order(tmp_path):
    stack = VolumeStack(slices=[Image2D(np.full((4, 4), i / 10.0)) for i in range(12)])
    write_stack(stack, tmp_path / "s", dtype="float32")
    back = read_stack(tmp_path / "s")
    values = [float(s.data[0, 0]) for s in back]
    assert values == sorted(values)
    assert np.allclose(values, [i / 10.0 for i in range(12)], atol=1e-7)


def test_mask_stack_round_trip(tmp_path, rng):
    masks = MaskStack(masks=[BinaryMask2D(rng.random((9, 13)) > 0.6) for _ in range(4)])
    write_mask_stack(masks, tmp_path / "m")
    back = read_mask_stack(tmp_path / "m")
    for a, b in zip(masks, back):
        assert np.array_equal(a.data, b.data)


def test_packed_mask_round_trip(tmp_path, rng):
    masks = MaskStack(masks=[BinaryMask2D(rng.random((11, 7)) > 0.5) for _ in range(5)])
    hdr, raw = write_packed_masks(masks, tmp_path / "vol", voxel_size=2.0)
    assert hdr.exists() and raw.exists()
    text = hdr.read_text()
    assert "width: 7" in text and "height: 11" in text and "depth: 5" in text
    back, voxel = read_packed_masks(tmp_path / "vol")
    assert voxel == 2.0
    for a, b in zip(masks, back):
        assert np.array_equal(a.data, b.data)


def test_missing_directory_reports_path(tmp_path):
    with pytest.raises(StackIOError, match="nope"):
        read_stack(tmp_path / "nope")


def test_empty_directory(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(StackIOError, match="no TIFF files"):
        read_stack(tmp_path / "empty")


def test_corrupt_slice_reports_path_and_index(tmp_path, rng):
    stack_dir = tmp_path / "s"
    write_stack(_stack(rng, n=2), stack_dir)
    victim = sorted(stack_dir.iterdir())[1]
    victim.write_text("this is not a TIFF")
    with pytest.raises(StackIOError) as err:
        read_stack(stack_dir)
    assert "slice=1" in str(err.value)
    assert victim.name in str(err.value)


def test_inconsistent_shapes(tmp_path, rng):
    d = tmp_path / "s"
    d.mkdir()
    from fracseg import write_image

    write_image(Image2D(rng.random((8, 8))), d / "a.tif")
    write_image(Image2D(rng.random((9, 8))), d / "b.tif")
    with pytest.raises(StackIOError, match="inconsistent"):
        read_stack(d)
