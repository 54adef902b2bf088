import numpy as np
import pytest

from codial.data import (DatasetFormatError, SyntheticShapesSpec, gen_synthetic, generate_shapes, load_dataset,
                         read_header, write_dataset)
from codial.evaluation import ProbeConfig, adaptive_avg_pool, linear_probe

SMALL = dict(per_class=12)


def test_regeneration_is_byte_identical(tmp_path):
    a = gen_synthetic(SyntheticShapesSpec(**SMALL), tmp_path / "a")
    b = gen_synthetic(SyntheticShapesSpec(**SMALL), tmp_path / "b")
    for split in ("train", "test"):
        assert a[split].read_bytes() == b[split].read_bytes()


def test_per_class_counts(tmp_path):
    paths = gen_synthetic(SyntheticShapesSpec(per_class=15), tmp_path)
    ytr = load_dataset(paths["train"])[1]
    yte = load_dataset(paths["test"])[1]
    assert np.array_equal(np.bincount(ytr) + np.bincount(yte), [15] * 4)
    assert np.array_equal(np.bincount(yte), [3] * 4)


def test_round_trip_quantization(tmp_path, rng):
    imgs = rng.random((5, 6, 7, 3))
    write_dataset(tmp_path / "d.cdld", imgs, [0, 1, 2, 1, 0], 3)
    back, labels = load_dataset(tmp_path / "d.cdld")
    assert back.shape == imgs.shape and np.array_equal(labels, [0, 1, 2, 1, 0])
    assert np.max(np.abs(back - imgs)) <= 0.5 / 255 + 1e-7


def test_header_only(tmp_path, rng):
    write_dataset(tmp_path / "d.cdld", rng.random((4, 5, 5, 1)), [0, 0, 1, 1], 2)
    h = read_header(tmp_path / "d.cdld")
    assert (h.count, h.height, h.width, h.channels, h.class_count) == (4, 5, 5, 1, 2)
    assert h.file_size == (tmp_path / "d.cdld").stat().st_size


def test_truncation_and_bad_magic(tmp_path, rng):
    write_dataset(tmp_path / "d.cdld", rng.random((4, 5, 5, 3)), [0, 0, 1, 1], 2)
    raw = (tmp_path / "d.cdld").read_bytes()
    (tmp_path / "t.cdld").write_bytes(raw[:-10])
    with pytest.raises(DatasetFormatError, match="byte"):
        load_dataset(tmp_path / "t.cdld")
    (tmp_path / "t.cdld").write_bytes(raw[:12])
    with pytest.raises(DatasetFormatError, match="header"):
        load_dataset(tmp_path / "t.cdld")
    (tmp_path / "t.cdld").write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(DatasetFormatError, match="magic"):
        load_dataset(tmp_path / "t.cdld")


def test_write_rejects_bad_labels(tmp_path, rng):
    with pytest.raises(ValueError):
        write_dataset(tmp_path / "d.cdld", rng.random((2, 4, 4, 3)), [0, 5], 3)


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        gen_synthetic(SyntheticShapesSpec(**SMALL), blocker / "sub")


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticShapesSpec(radius=(4.0, 8.0))
    with pytest.raises(ValueError):
        SyntheticShapesSpec(classes=("disk", "hexagon"))


def test_raw_pixel_probe_is_easy(tmp_path):
    paths = gen_synthetic(SyntheticShapesSpec(), tmp_path)
    (x, y), (xt, yt) = load_dataset(paths["train"]), load_dataset(paths["test"])
    f = lambda a: adaptive_avg_pool(a, 16).reshape(len(a), -1)
    assert linear_probe(f(x), y, f(xt), yt, ProbeConfig(epochs=500)).test_acc >= 0.8


def test_images_in_range():
    imgs, labels = generate_shapes(SyntheticShapesSpec(per_class=3))
    assert imgs.dtype == np.float32 and imgs.min() >= 0 and imgs.max() <= 1
    assert imgs.shape == (12, 64, 64, 3) and list(labels) == [0] * 3 + [1] * 3 + [2] * 3 + [3] * 3
