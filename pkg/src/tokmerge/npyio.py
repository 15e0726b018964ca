"""NPY v1.0 subset reader/writer: '<f4'/'<f8', C order, 1-4 dims.

The format is parsed and emitted by hand so the byte layout is pinned:
magic \\x93NUMPY, version 1.0, a little-endian u16 header length, then a
dict literal header padded with spaces so the whole preamble is a
multiple of 64 bytes, then the raw little-endian payload. Files written
here load with any standard reader and vice versa; f8 round-trips are
bitwise. f4 input is widened to f8 on read.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import InvalidShape, NotNpy, PayloadTruncated, UnsupportedDtype, UnsupportedLayout

_MAGIC = b"\x93NUMPY"
_ITEMSIZE = {"<f4": 4, "<f8": 8}


def read_npy(path) -> np.ndarray:
    """Read a supported NPY file as float64 (C order)."""
    with open(path, "rb") as fh:
        preamble = fh.read(8)
        if len(preamble) < 8 or preamble[:6] != _MAGIC:
            raise NotNpy(f"{path}: missing NPY magic")
        major, minor = preamble[6], preamble[7]
        if (major, minor) != (1, 0):
            raise NotNpy(f"{path}: unsupported NPY version {major}.{minor}")
        raw_len = fh.read(2)
        if len(raw_len) != 2:
            raise NotNpy(f"{path}: truncated header length")
        header_len = int.from_bytes(raw_len, "little")
        header_bytes = fh.read(header_len)
        if len(header_bytes) != header_len:
            raise NotNpy(f"{path}: truncated header")
        try:
            header = ast.literal_eval(header_bytes.decode("latin1"))
        except (ValueError, SyntaxError) as exc:
            raise NotNpy(f"{path}: unparseable header") from exc
        if not isinstance(header, dict) or not {"descr", "fortran_order", "shape"} <= set(header):
            raise NotNpy(f"{path}: header missing required keys")
        descr = header["descr"]
        if descr not in _ITEMSIZE:
            raise UnsupportedDtype(f"{path}: dtype {descr!r} not in ('<f4', '<f8')")
        if header["fortran_order"]:
            raise UnsupportedLayout(f"{path}: fortran_order files are not supported")
        shape = header["shape"]
        if not isinstance(shape, tuple) or not 1 <= len(shape) <= 4 or not all(
            isinstance(d, int) and d >= 0 for d in shape
        ):
            raise InvalidShape(f"{path}: shape must have 1-4 dims, got {shape!r}")
        expected = _ITEMSIZE[descr] * int(np.prod(shape, dtype=np.int64)) if shape else 0
        payload = fh.read()
        if len(payload) != expected:
            raise PayloadTruncated(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype=descr).reshape(shape)
    return np.ascontiguousarray(arr, dtype=np.float64)


def write_npy(arr, path, dtype: str = "<f8") -> None:
    """Write an array as NPY v1.0; read_npy(write_npy(a)) is bitwise for f8."""
    if dtype not in _ITEMSIZE:
        raise UnsupportedDtype(f"dtype {dtype!r} not in ('<f4', '<f8')")
    a = np.asarray(arr, dtype=np.float64)
    if not 1 <= a.ndim <= 4:
        raise InvalidShape(f"arrays must have 1-4 dims, got shape {a.shape}")
    payload = np.ascontiguousarray(a.astype(dtype)).tobytes()
    header = f"{{'descr': {dtype!r}, 'fortran_order': False, 'shape': {a.shape!r}, }}"
    # pad with spaces (newline-terminated) so the preamble is a multiple of 64
    base = len(_MAGIC) + 2 + 2
    pad = 64 - (base + len(header) + 1) % 64
    if pad == 64:
        pad = 0
    header = header + " " * pad + "\n"
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bytes((1, 0)))
        fh.write(len(header).to_bytes(2, "little"))
        fh.write(header.encode("latin1"))
        fh.write(payload)
