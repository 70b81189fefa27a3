"""Little-endian binary container helpers shared by the on-disk formats.

All file formats in this package (trial stores, image sets, weight files)
use the same conventions: a 4-byte ASCII magic, a u8 version, fixed-width
little-endian integers and IEEE-754 32-bit floats. Read errors carry the
byte offset at which the problem was detected.
"""
from __future__ import annotations

import struct

import numpy as np


class FileFormatError(Exception):
    """Base class for container read errors."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class BadMagicError(FileFormatError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(FileFormatError):
    """File declares a container version this reader does not understand."""


class TruncatedFileError(FileFormatError):
    """File ended before a complete record could be read."""


class ByteReader:
    """Sequential reader over an in-memory byte string with offset tracking."""

    def __init__(self, data: bytes):
        self._data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self._data):
            raise TruncatedFileError(
                f"expected {n} more bytes, file has {len(self._data) - self.offset}",
                self.offset,
            )
        chunk = self._data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def expect_magic(self, magic: bytes) -> None:
        at = self.offset
        got = self.take(len(magic))
        if got != magic:
            raise BadMagicError(f"bad magic {got!r}, expected {magic!r}", at)

    def expect_version(self, version: int) -> None:
        at = self.offset
        got = self.u8()
        if got != version:
            raise VersionMismatchError(f"unsupported version {got}, expected {version}", at)

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f32(self) -> float:
        return struct.unpack("<f", self.take(4))[0]

    def f32_array(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").astype(np.float32)

    def i16_array(self, count: int) -> np.ndarray:
        raw = self.take(2 * count)
        return np.frombuffer(raw, dtype="<i2").astype(np.int16)

    def u16_array(self, count: int) -> np.ndarray:
        raw = self.take(2 * count)
        return np.frombuffer(raw, dtype="<u2").astype(np.uint16)

    def u32_array(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<u4").astype(np.uint32)

    def utf8(self) -> str:
        """Read a u16 length-prefixed UTF-8 string."""
        n = self.u16()
        return self.take(n).decode("utf-8")

    def done(self) -> bool:
        return self.offset == len(self._data)


def pack_u8(v: int) -> bytes:
    return struct.pack("<B", v)


def pack_u16(v: int) -> bytes:
    return struct.pack("<H", v)


def pack_u32(v: int) -> bytes:
    return struct.pack("<I", v)


def pack_f32(v: float) -> bytes:
    return struct.pack("<f", v)


def pack_f32_array(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def pack_i16_array(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<i2").tobytes()


def pack_u16_array(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<u2").tobytes()


def pack_u32_array(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<u4").tobytes()


def pack_utf8(s: str) -> bytes:
    raw = s.encode("utf-8")
    return pack_u16(len(raw)) + raw
