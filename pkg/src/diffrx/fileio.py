"""Binary file formats used by the experiment harness.

Two formats live here.  The tensor container is a minimal named-section
layout for checkpoints: the magic bytes ``LTNS1`` followed by zero or
more sections, each a u16 name length, the UTF-8 name, a u32 rank,
rank u32 dims, and the row-major float32 payload (all integers little
endian).  Images travel as binary PGM (``P5``) with maxval 255 or 65535,
mapped to [0, 1] floats on load and quantized back on save.
"""

from __future__ import annotations

import struct
from os import PathLike

import numpy as np

from .errors import InvalidInputError, PgmFormatError, TensorFormatError

_MAGIC = b"LTNS1"


def save_tensor(path: str | PathLike, sections: dict[str, np.ndarray]) -> None:
    """Write named arrays as a tensor container.

    Arrays are stored as float32, so non-float32 inputs are rounded once
    here and the file then round-trips bit-exactly.  Section order is
    the dict's insertion order.
    """
    blobs = [_MAGIC]
    for name, arr in sections.items():
        encoded = name.encode("utf-8")
        if not 0 < len(encoded) <= 0xFFFF:
            raise InvalidInputError(f"section name {name!r} must pack into a u16 length")
        data = np.ascontiguousarray(arr, dtype="<f4")
        if data.size and not np.all(np.isfinite(data)):
            raise InvalidInputError(f"section {name!r} holds non-finite values")
        blobs.append(struct.pack("<H", len(encoded)))
        blobs.append(encoded)
        blobs.append(struct.pack("<I", data.ndim))
        blobs.append(struct.pack(f"<{data.ndim}I", *data.shape))
        blobs.append(data.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(blobs))


def load_tensor(path: str | PathLike) -> dict[str, np.ndarray]:
    """Read a tensor container back into a dict of float32 arrays.

    Raises:
        TensorFormatError: on a bad magic, a truncated section (the
            error names the section), or duplicate section names.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[: len(_MAGIC)] != _MAGIC:
        raise TensorFormatError(f"bad magic {buf[:len(_MAGIC)]!r}, expected {_MAGIC!r}")
    pos = len(_MAGIC)
    out: dict[str, np.ndarray] = {}

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise TensorFormatError(f"container truncated while reading {what}")
        chunk = buf[pos : pos + n]
        pos += n
        return chunk

    while pos < len(buf):
        (name_len,) = struct.unpack("<H", take(2, "a section name length"))
        try:
            name = take(name_len, "a section name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TensorFormatError(f"section name is not UTF-8: {exc}") from exc
        (rank,) = struct.unpack("<I", take(4, f"rank of section {name!r}"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, f"dims of section {name!r}"))
        count = 1
        for d in dims:
            count *= d
        payload = take(4 * count, f"payload of section {name!r} (expected {count} floats)")
        if name in out:
            raise TensorFormatError(f"duplicate section name {name!r}")
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    return out


def _next_pgm_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Scan past whitespace and # comments to the next header token."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise PgmFormatError("header ended before width, height, and maxval were read")
    return buf[start:pos], pos


def load_pgm(path: str | PathLike) -> np.ndarray:
    """Read a binary PGM image as a [height, width] array of [0, 1] floats.

    Only the raw ``P5`` variant with maxval 255 or 65535 is understood;
    16-bit samples are big endian per the format. ASCII ``P2`` files are
    rejected.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    token, pos = _next_pgm_token(buf, 0)
    if token != b"P5":
        raise PgmFormatError(f"unsupported PGM variant {token!r}, only binary P5 is read")
    fields = []
    for what in ("width", "height", "maxval"):
        token, pos = _next_pgm_token(buf, pos)
        if not token.isdigit():
            raise PgmFormatError(f"malformed {what} token {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PgmFormatError(f"degenerate image size {width}x{height}")
    if maxval not in (255, 65535):
        raise PgmFormatError(f"maxval must be 255 or 65535, got {maxval}")
    pos += 1  # the single whitespace byte separating header and raster
    dtype = np.dtype(np.uint8) if maxval == 255 else np.dtype(">u2")
    expect = width * height * dtype.itemsize
    raster = buf[pos : pos + expect]
    if len(raster) < expect:
        raise PgmFormatError(
            f"raster truncated: expected {expect} bytes, found {len(raster)}"
        )
    pixels = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return pixels.astype(np.float64) / maxval


def save_pgm(path: str | PathLike, image: np.ndarray, maxval: int = 255) -> None:
    """Quantize a [0, 1] image to the maxval grid and write binary PGM.

    Values are clipped to [0, 1] and rounded to the nearest level, so a
    save/load round trip is exact for images already on the grid.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise InvalidInputError(f"image must be a non-empty 2-D array, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise InvalidInputError("image holds non-finite values")
    if maxval not in (255, 65535):
        raise InvalidInputError(f"maxval must be 255 or 65535, got {maxval}")
    levels = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    dtype = np.uint8 if maxval == 255 else np.dtype(">u2")
    height, width = img.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(levels.astype(dtype).tobytes())
