"""Small shared helpers."""

import struct

from .errors import FormatError

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: str | bytes) -> int:
    """64-bit FNV-1a hash. Strings are hashed as UTF-8."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def write_header(handle, magic: bytes, fmt: str, *values) -> None:
    """Write a little-endian header: 4-byte magic followed by ``struct`` fields."""
    handle.write(magic)
    handle.write(struct.pack("<" + fmt, *values))


def read_header(handle, magic: bytes, fmt: str) -> tuple:
    """Read and check a header written by :func:`write_header`."""
    found = handle.read(4)
    if found != magic:
        raise FormatError(f"Expected magic {magic!r}, found {found!r}")
    size = struct.calcsize("<" + fmt)
    raw = handle.read(size)
    if len(raw) != size:
        raise FormatError(f"Truncated {magic.decode()} header")
    return struct.unpack("<" + fmt, raw)


__all__ = ["fnv1a_64", "write_header", "read_header"]
