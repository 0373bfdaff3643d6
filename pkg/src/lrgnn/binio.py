"""Little-endian binary reading shared by the dataset and model formats."""

from __future__ import annotations

import struct

import numpy as np


class FormatError(RuntimeError):
    """A binary file does not match its declared layout."""


class ByteReader:
    """Cursor over a byte buffer that fails loudly on truncation."""

    def __init__(self, buf: bytes, path, error_cls=FormatError):
        self.buf = buf
        self.off = 0
        self.path = path
        self.error_cls = error_cls

    def take(self, nbytes: int, what: str) -> bytes:
        if self.off + nbytes > len(self.buf):
            raise self.error_cls(f"{self.path}: truncated while reading {what}")
        chunk = self.buf[self.off : self.off + nbytes]
        self.off += nbytes
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def f32(self, count: int, what: str) -> np.ndarray:
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)

    def done(self) -> None:
        if self.off != len(self.buf):
            raise self.error_cls(f"{self.path}: {len(self.buf) - self.off} trailing bytes")
