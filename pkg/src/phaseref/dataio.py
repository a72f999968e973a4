"""File formats: IDX image sets, binary PGM, PNG export, CSV tables and the
measurement container.

Measurement container layout (all little-endian)::

    bytes 0..7    magic  b"PRMEAS01"
    bytes 8..11   uint32 side D
    bytes 12..15  uint32 oversampling s
    bytes 16..    D*D float64 magnitudes, row-major
"""
from __future__ import annotations

import csv
import gzip
import io
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import as_image
from .measurement import Measurement

__all__ = [
    "IdxFormatError",
    "IdxLengthError",
    "PgmFormatError",
    "IdxDataset",
    "parse_idx_images",
    "write_idx_images",
    "load_idx_images",
    "write_pgm",
    "read_pgm",
    "load_pgm_dir",
    "load_images",
    "write_png",
    "METRIC_FIELDS",
    "format_mse",
    "write_metrics_csv",
    "write_history_csv",
    "write_measurement",
    "read_measurement",
    "load_reference",
]

IDX_UBYTE_RANK3 = b"\x00\x00\x08\x03"
GZIP_MAGIC = b"\x1f\x8b"
MEAS_MAGIC = b"PRMEAS01"


class IdxFormatError(ValueError):
    pass


class IdxLengthError(ValueError):
    pass


class PgmFormatError(ValueError):
    pass


@dataclass(frozen=True)
class IdxDataset:
    count: int
    rows: int
    cols: int
    items: np.ndarray  # (count, rows, cols) float64 in [0, 1]


def parse_idx_images(data: bytes) -> IdxDataset:
    """Decode an unsigned-byte rank-3 IDX stream (optionally gzipped)."""
    data = bytes(data)
    if data[:2] == GZIP_MAGIC:
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError, zlib.error) as exc:
            raise IdxFormatError(f"corrupt gzip stream: {exc}") from exc
    if len(data) < 4:
        raise IdxLengthError(f"IDX header needs 16 bytes, got {len(data)}")
    if data[:4] != IDX_UBYTE_RANK3:
        raise IdxFormatError(
            f"expected IDX magic 00 00 08 03 (ubyte, rank 3), got {data[:4].hex(' ')}"
        )
    if len(data) < 16:
        raise IdxLengthError(f"IDX header needs 16 bytes, got {len(data)}")
    count, rows, cols = struct.unpack(">III", data[4:16])
    expected = count * rows * cols
    actual = len(data) - 16
    if actual < expected:
        raise IdxLengthError(f"IDX payload truncated: expected {expected} bytes, got {actual}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=expected, offset=16)
    items = pixels.reshape(count, rows, cols).astype(np.float64) / 255.0
    return IdxDataset(count, rows, cols, items)


def write_idx_images(images: np.ndarray, path: str | Path) -> None:
    """Write uint8 images ``(count, rows, cols)``; ``.gz`` paths are gzipped."""
    images = np.asarray(images)
    if images.ndim != 3 or images.dtype != np.uint8:
        raise ValueError("expected a uint8 array of shape (count, rows, cols)")
    blob = IDX_UBYTE_RANK3 + struct.pack(">III", *images.shape) + images.tobytes()
    path = Path(path)
    if path.suffix == ".gz":
        blob = gzip.compress(blob, mtime=0)
    path.write_bytes(blob)


def load_idx_images(path: str | Path) -> IdxDataset:
    return parse_idx_images(Path(path).read_bytes())


def write_pgm(img, path: str | Path, maxval: int = 65535) -> None:
    """Binary P5 PGM. Values are clipped to [0, 1] and rounded to ``maxval``."""
    if maxval not in (255, 65535):
        raise ValueError(f"maxval must be 255 or 65535, got {maxval}")
    img = as_image(img)
    if img.ndim != 2:
        raise ValueError("write_pgm takes a single 2D image")
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    payload = q.astype(">u2" if maxval > 255 else np.uint8).tobytes()
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + payload)


def _pgm_tokens(data: bytes, n: int):
    """First ``n`` whitespace-separated header tokens, skipping # comments."""
    tokens, i = [], 0
    while len(tokens) < n:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i >= len(data):
            raise PgmFormatError("truncated PGM header")
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        tokens.append(data[i:j])
        i = j
    # exactly one whitespace byte separates the header from the raster
    return tokens, i + 1


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise PgmFormatError(f"{path}: only binary PGM (P5) is supported, got {data[:2]!r}")
    tokens, start = _pgm_tokens(data[2:], 3)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise PgmFormatError(f"{path}: malformed PGM header {tokens!r}") from exc
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise PgmFormatError(f"{path}: invalid PGM geometry {w}x{h} maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    raster = data[2 + start:]
    need = w * h * dtype.itemsize
    if len(raster) < need:
        raise PgmFormatError(f"{path}: raster truncated, expected {need} bytes, got {len(raster)}")
    img = np.frombuffer(raster, dtype=dtype, count=w * h).reshape(h, w)
    return img.astype(np.float64) / maxval


def load_pgm_dir(path: str | Path) -> np.ndarray:
    files = sorted(Path(path).glob("*.pgm"))
    if not files:
        raise FileNotFoundError(f"no .pgm files in {path}")
    return np.stack([read_pgm(f) for f in files])


def load_images(path: str | Path) -> np.ndarray:
    """A directory of PGMs, a single PGM, or an IDX file (gzipped or not)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file or directory: {path}")
    if path.is_dir():
        return load_pgm_dir(path)
    if path.suffix == ".pgm":
        return read_pgm(path)[None]
    return load_idx_images(path).items


def write_png(img, path: str | Path) -> None:
    from PIL import Image

    img = as_image(img)
    q = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    Image.fromarray(q, mode="L").save(path)


METRIC_FIELDS = ("dataset", "method", "oversampling", "mse_mean", "mse_stddev", "n_images", "seed")


def format_mse(v: float) -> str:
    """Six significant digits."""
    return f"{v:.6g}"


def write_metrics_csv(rows: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for r in rows:
            w.writerow([
                r["dataset"],
                r["method"],
                int(r["oversampling"]),
                format_mse(r["mse_mean"]),
                format_mse(r["mse_stddev"]),
                int(r["n_images"]),
                int(r["seed"]),
            ])


def write_history_csv(history: Sequence, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("step", "train_mse", "val_mse"))
        for rec in history:
            w.writerow((rec.step, repr(rec.train_mse), "" if rec.val_mse is None else repr(rec.val_mse)))


def write_measurement(y: Measurement, path: str | Path) -> None:
    if y.data.ndim != 2:
        raise ValueError("only single measurements can be written")
    buf = io.BytesIO()
    buf.write(MEAS_MAGIC)
    buf.write(struct.pack("<II", y.side, y.oversampling))
    buf.write(y.data.astype("<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def read_measurement(path: str | Path) -> Measurement:
    data = Path(path).read_bytes()
    if data[:8] != MEAS_MAGIC:
        raise ValueError(f"{path}: not a measurement file (magic {data[:8]!r})")
    side, s = struct.unpack("<II", data[8:16])
    need = side * side * 8
    if len(data) - 16 != need:
        raise ValueError(f"{path}: expected {need} payload bytes, got {len(data) - 16}")
    grid = np.frombuffer(data, dtype="<f8", offset=16).reshape(side, side).astype(np.float64)
    return Measurement(grid, s)


def load_reference(path: str | Path) -> np.ndarray:
    """Reference from a PGM, a checkpoint ``.npz`` or a checkpoint directory."""
    path = Path(path)
    if path.is_dir():
        path = path / "checkpoint.npz"
    if not path.exists():
        raise FileNotFoundError(f"no such reference file: {path}")
    if path.suffix == ".npz":
        with np.load(path) as z:
            return as_image(z["reference"], name=str(path), unit=True)
    return as_image(read_pgm(path), name=str(path), unit=True)
