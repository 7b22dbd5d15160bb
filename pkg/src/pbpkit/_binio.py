"""Little-endian record helpers and atomic file writes.

Every binary record starts with a 4-byte ASCII magic followed by a single
format-version byte.
"""
from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import FormatError

VERSION = 1

_U32 = struct.Struct("<I")


def header(magic: bytes) -> bytes:
    return magic + bytes([VERSION])


def u32(*values: int) -> bytes:
    return b"".join(_U32.pack(int(v)) for v in values)


class Reader:
    """Sequential cursor over a bytes buffer."""

    def __init__(self, buf: bytes, offset: int = 0):
        self.buf = memoryview(buf)
        self.pos = offset

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(
                f"truncated record: need {n} bytes at offset {self.pos}, "
                f"have {len(self.buf) - self.pos}"
            )
        out = bytes(self.buf[self.pos:self.pos + n])
        self.pos += n
        return out

    def expect_header(self, magic: bytes) -> None:
        got = self.take(4)
        if got != magic:
            raise FormatError(f"bad magic {got!r}, expected {magic!r}")
        version = self.take(1)[0]
        if version != VERSION:
            raise FormatError(f"unsupported {magic.decode()} version {version}")

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u32_array(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * n), dtype="<u4").astype(np.int64)

    def f32_array(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * n), dtype="<f4").astype(np.float32)

    def at_end(self) -> bool:
        return self.pos == len(self.buf)


def atomic_write(path, data: bytes | str) -> None:
    """Write ``data`` to ``path`` via a temp file in the same directory and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
