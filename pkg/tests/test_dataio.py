import gzip
import struct
from decimal import ROUND_HALF_EVEN, Decimal

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phaseref.core import make_rng
from phaseref.dataio import (
    IdxFormatError,
    IdxLengthError,
    PgmFormatError,
    format_mse,
    load_images,
    load_reference,
    parse_idx_images,
    read_measurement,
    read_pgm,
    write_idx_images,
    write_metrics_csv,
    write_measurement,
    write_pgm,
)
from phaseref.measurement import Measurement, measure

TINY_IDX = bytes([0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 255, 128, 0])


def struct_decode(blob):
    # independent decoder built only on struct
    magic, n, r, c = struct.unpack(">IIII", blob[:16])
    assert magic == 0x00000803
    px = struct.unpack(f">{n * r * c}B", blob[16:16 + n * r * c])
    return [[[px[k * r * c + i * c + j] / 255 for j in range(c)] for i in range(r)] for k in range(n)]


def test_idx_tiny_example():
    ds = parse_idx_images(TINY_IDX)
    assert (ds.count, ds.rows, ds.cols) == (1, 2, 2)
    np.testing.assert_array_equal(ds.items[0], [[0.0, 1.0], [128 / 255, 0.0]])
    np.testing.assert_array_equal(ds.items, struct_decode(TINY_IDX))


def test_idx_gzip_and_trailing_bytes():
    np.testing.assert_array_equal(parse_idx_images(gzip.compress(TINY_IDX)).items,
                                  parse_idx_images(TINY_IDX).items)
    assert parse_idx_images(TINY_IDX + b"\x07\x07").count == 1


def test_idx_write_round_trip(tmp_path):
    imgs = make_rng(0).integers(0, 256, (3, 5, 4), dtype=np.uint8)
    for name in ("a.idx", "a.idx.gz"):
        write_idx_images(imgs, tmp_path / name)
        blob = (tmp_path / name).read_bytes()
        raw = gzip.decompress(blob) if name.endswith(".gz") else blob
        np.testing.assert_array_equal(load_images(tmp_path / name), struct_decode(raw))
        np.testing.assert_array_equal(np.rint(load_images(tmp_path / name) * 255), imgs)


@pytest.mark.parametrize("blob, err", [
    (bytes([0, 0, 8, 1, 0, 0, 0, 1, 1]), IdxFormatError),  # label file
    (bytes([0, 0, 9, 3]) + bytes(12), IdxFormatError),
    (b"", IdxLengthError),
    (bytes([0, 0, 8, 3, 0, 0]), IdxLengthError),
    (TINY_IDX[:-1], IdxLengthError),
    (b"\x1f\x8bjunk", IdxFormatError),
])
def test_idx_malformed(blob, err):
    with pytest.raises(err):
        parse_idx_images(blob)


def test_idx_truncation_message_reports_sizes():
    with pytest.raises(IdxLengthError, match="expected 4 bytes, got 3"):
        parse_idx_images(TINY_IDX[:-1])


@given(st.binary(max_size=64))
def test_idx_parser_is_total(blob):
    try:
        ds = parse_idx_images(blob)
    except (IdxFormatError, IdxLengthError):
        return
    assert ds.items.shape == (ds.count, ds.rows, ds.cols)


def test_pgm_round_trip(tmp_path):
    img = make_rng(1).random((6, 6))
    write_pgm(img, tmp_path / "a.pgm")
    back = read_pgm(tmp_path / "a.pgm")
    assert np.max(np.abs(back - img)) <= 1 / (2 * 65535) + 1e-15
    write_pgm(img, tmp_path / "b.pgm", maxval=255)
    assert np.max(np.abs(read_pgm(tmp_path / "b.pgm") - img)) <= 1 / 510 + 1e-15


def test_pgm_zero_image_and_comments(tmp_path):
    write_pgm(np.zeros((3, 3)), tmp_path / "z.pgm")
    assert (tmp_path / "z.pgm").read_bytes().endswith(bytes(18))
    np.testing.assert_array_equal(read_pgm(tmp_path / "z.pgm"), np.zeros((3, 3)))
    (tmp_path / "c.pgm").write_bytes(b"P5\n# a comment\n2 1\n# another\n255\n\x00\xff")
    np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), [[0.0, 1.0]])


@pytest.mark.parametrize("blob", [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\nx 2\n255\n", b"P5\n"])
def test_pgm_rejects(tmp_path, blob):
    (tmp_path / "bad.pgm").write_bytes(blob)
    with pytest.raises(PgmFormatError):
        read_pgm(tmp_path / "bad.pgm")


def test_pgm_directory_is_sorted(tmp_path):
    write_pgm(np.full((2, 2), 1.0), tmp_path / "b.pgm")
    write_pgm(np.zeros((2, 2)), tmp_path / "a.pgm")
    stack = load_images(tmp_path)
    assert stack.shape == (2, 2, 2) and stack[0].max() == 0 and stack[1].min() == 1
    with pytest.raises(FileNotFoundError):
        load_images(tmp_path / "missing")


def test_metrics_csv(tmp_path):
    write_metrics_csv([], tmp_path / "empty.csv")
    assert (tmp_path / "empty.csv").read_text() == \
        "dataset,method,oversampling,mse_mean,mse_stddev,n_images,seed\n"
    row = dict(dataset="mnist", method="simple", oversampling=2, mse_mean=0.0007614999,
               mse_stddev=0.0, n_images=1, seed=0)
    write_metrics_csv([row], tmp_path / "one.csv")
    lines = (tmp_path / "one.csv").read_text().splitlines()
    assert lines[1] == "mnist,simple,2,0.0007615,0,1,0"


@given(st.floats(1e-30, 1.0))
def test_format_mse_six_significant_digits(v):
    exact = Decimal(v)
    q = Decimal(1).scaleb(exact.adjusted() - 5)
    expected = exact.quantize(q, rounding=ROUND_HALF_EVEN)
    assert Decimal(format_mse(v)) == expected


def test_measurement_container_round_trip(tmp_path):
    y = measure(make_rng(2).random((5, 5)), None, 2)
    write_measurement(y, tmp_path / "y.bin")
    blob = (tmp_path / "y.bin").read_bytes()
    assert blob[:8] == b"PRMEAS01" and struct.unpack("<II", blob[8:16]) == (10, 2)
    assert len(blob) == 16 + 100 * 8
    back = read_measurement(tmp_path / "y.bin")
    assert back.oversampling == 2 and back.data.tobytes() == y.data.tobytes()
    (tmp_path / "bad.bin").write_bytes(blob[:-8])
    with pytest.raises(ValueError):
        read_measurement(tmp_path / "bad.bin")


def test_load_reference_sources(tmp_path):
    u = make_rng(3).random((4, 4))
    np.savez(tmp_path / "checkpoint.npz", reference=u)
    np.testing.assert_array_equal(load_reference(tmp_path), u)
    np.testing.assert_array_equal(load_reference(tmp_path / "checkpoint.npz"), u)
    write_pgm(u, tmp_path / "u.pgm")
    assert np.max(np.abs(load_reference(tmp_path / "u.pgm") - u)) < 1e-5
    with pytest.raises(FileNotFoundError):
        load_reference(tmp_path / "nope.pgm")
    with pytest.raises(ValueError):
        Measurement(np.ones((3, 3)), 2)
