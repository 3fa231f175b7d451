"""Minimal reader/writer for the npy v1.0 container.

Only the subset used by the published motion files is supported: version
1.0 headers, C-order arrays, little-endian float32/float64 payloads.
Anything else is rejected with FormatError rather than silently coerced.
"""

from __future__ import annotations

import ast
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"\x93NUMPY"
_ALLOWED_DESCRS = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def read_array(path: str | Path) -> np.ndarray:
    """Parse a v1.0 npy file into a C-order float array."""
    raw = Path(path).read_bytes()
    if len(raw) < 10 or raw[:6] != MAGIC:
        raise FormatError(f"{path}: bad magic, not an npy file")
    major, minor = raw[6], raw[7]
    if (major, minor) != (1, 0):
        raise FormatError(f"{path}: unsupported npy version {major}.{minor} (only 1.0)")
    header_len = int.from_bytes(raw[8:10], "little")
    header_end = 10 + header_len
    if len(raw) < header_end:
        raise FormatError(f"{path}: truncated header")
    try:
        header = ast.literal_eval(raw[10:header_end].decode("ascii").strip())
    except (ValueError, SyntaxError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: unparseable npy header: {exc}") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"{path}: malformed npy header dict")
    descr = header["descr"]
    if descr not in _ALLOWED_DESCRS:
        raise FormatError(f"{path}: unsupported dtype {descr!r} (need <f4 or <f8)")
    if header["fortran_order"]:
        raise FormatError(f"{path}: fortran-order arrays are not supported")
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(d, int) and d >= 0 for d in shape):
        raise FormatError(f"{path}: malformed shape {shape!r}")
    dtype = _ALLOWED_DESCRS[descr]
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    payload = raw[header_end:]
    if len(payload) != count * dtype.itemsize:
        raise FormatError(
            f"{path}: payload size {len(payload)} does not match shape {shape} of {descr}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def write_array(path: str | Path, arr: np.ndarray) -> None:
    """Write a C-order little-endian float array as npy v1.0."""
    arr = np.ascontiguousarray(arr)
    if arr.dtype == np.float32:
        descr = "<f4"
    elif arr.dtype == np.float64:
        descr = "<f8"
    else:
        raise FormatError(f"refusing to write dtype {arr.dtype}; use float32/float64")
    shape = arr.shape
    shape_repr = "(" + ", ".join(str(d) for d in shape) + ("," if len(shape) == 1 else "") + ")"
    header = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_repr}, }}"
    # pad so that magic+version+len+header is a multiple of 64, newline-terminated
    unpadded = len(MAGIC) + 2 + 2 + len(header) + 1
    header = header + " " * (-unpadded % 64) + "\n"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes((1, 0)))
        fh.write(len(header).to_bytes(2, "little"))
        fh.write(header.encode("ascii"))
        fh.write(arr.tobytes(order="C"))
