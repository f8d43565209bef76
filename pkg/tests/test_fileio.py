import numpy as np
import pytest

from levelset import (
    BinaryMask,
    DimensionError,
    FeatureField,
    FieldFormatError,
    ScalarField,
    Tsdf,
)
from levelset.fileio import (
    read_energy_csv,
    read_feature_field,
    read_field_array,
    read_gray_image,
    read_mask_png,
    read_scalar_field,
    write_energy_csv,
    write_field_file,
    write_gray_png,
    write_mask_png,
)


def test_field_file_round_trip_is_bit_lossless(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.uniform(-1, 1, (3, 5, 7))
    arr[0, 0, 0] = 1e-308
    arr[0, 0, 1] = -1e308
    arr[0, 0, 2] = -0.0
    path = tmp_path / "field.lsf"
    write_field_file(path, FeatureField(arr))
    back = read_field_array(path)
    assert back.shape == (3, 5, 7)
    assert arr.tobytes() == back.tobytes()


def test_field_file_scalar_and_tsdf_views(tmp_path):
    rng = np.random.default_rng(1)
    field = ScalarField(rng.uniform(-1, 1, (4, 6)))
    path = tmp_path / "scalar.lsf"
    write_field_file(path, field)
    assert np.array_equal(read_scalar_field(path).data, field.data)
    tsdf = Tsdf(field, 2.0)
    write_field_file(path, tsdf)
    assert np.array_equal(read_scalar_field(path).data, field.data)
    ff = read_feature_field(path)
    assert ff.channels == 1


def test_field_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.lsf"
    path.write_bytes(b"nope")
    with pytest.raises(FieldFormatError):
        read_field_array(path)
    path.write_bytes(b"XXXX" + bytes(14))
    with pytest.raises(FieldFormatError):
        read_field_array(path)
    good = tmp_path / "good.lsf"
    write_field_file(good, ScalarField(np.zeros((2, 2))))
    blob = good.read_bytes()
    (tmp_path / "short.lsf").write_bytes(blob[:-8])
    with pytest.raises(FieldFormatError):
        read_field_array(tmp_path / "short.lsf")
    bad_version = blob[:4] + b"\x09\x00" + blob[6:]
    (tmp_path / "ver.lsf").write_bytes(bad_version)
    with pytest.raises(FieldFormatError):
        read_field_array(tmp_path / "ver.lsf")


def test_read_scalar_rejects_multichannel(tmp_path):
    path = tmp_path / "multi.lsf"
    write_field_file(path, FeatureField(np.zeros((2, 3, 3))))
    with pytest.raises(DimensionError):
        read_scalar_field(path)


def test_mask_png_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    mask = BinaryMask((rng.uniform(size=(9, 13)) < 0.5).astype(np.uint8))
    path = tmp_path / "mask.png"
    write_mask_png(path, mask)
    assert np.array_equal(read_mask_png(path).data, mask.data)


def test_gray_png_round_trip_quantized(tmp_path):
    rng = np.random.default_rng(3)
    field = ScalarField(rng.uniform(0, 1, (8, 8)))
    path = tmp_path / "img.png"
    write_gray_png(path, field)
    back = read_gray_image(path)
    assert back.shape == field.shape
    assert np.abs(back.data - field.data).max() <= 0.5 / 255.0 + 1e-12


def test_energy_csv_round_trip(tmp_path):
    energies = [3.14159, 2.5, 0.125]
    path = tmp_path / "energies.csv"
    write_energy_csv(path, energies)
    text = path.read_text()
    assert text.splitlines()[0] == "step,energy"
    assert read_energy_csv(path) == energies
    (tmp_path / "junk.csv").write_text("nope\n")
    with pytest.raises(FieldFormatError):
        read_energy_csv(tmp_path / "junk.csv")
