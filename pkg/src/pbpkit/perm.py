"""Permutations stored as gather index arrays.

A :class:`Permutation` ``p`` acts on a vector by gathering::

    apply(p, v)[i] == v[p.idx[i]]

which is the action of the 0/1 matrix ``P`` with ``P[i, p.idx[i]] = 1``.
The index array of ``"cab"`` relative to ``"abc"`` is therefore ``[2, 0, 1]``.
Scatter stores ``out[p.idx[i]] = v[i]`` are expressed as
``apply(inverse(p), v)``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import _binio
from .errors import DimensionError, FormatError, PermutationError

MAGIC = b"PBPP"


class Permutation:
    """An immutable bijection on ``{0, ..., n-1}``.

    Construction validates the bijection; the stored array is read-only.
    """

    __slots__ = ("_idx",)

    def __init__(self, idx: Sequence[int] | np.ndarray):
        arr = np.array(idx, dtype=np.int64, copy=True).reshape(-1)
        n = arr.size
        if n == 0:
            raise PermutationError("permutation length must be at least 1")
        if arr.min() < 0 or arr.max() >= n:
            raise PermutationError(f"index out of range for length {n}")
        seen = np.zeros(n, dtype=bool)
        seen[arr] = True
        if not seen.all():
            raise PermutationError("index array is not a bijection (repeated value)")
        arr.setflags(write=False)
        self._idx = arr

    @property
    def idx(self) -> np.ndarray:
        return self._idx

    def __len__(self) -> int:
        return self._idx.size

    @property
    def n(self) -> int:
        return self._idx.size

    def is_identity(self) -> bool:
        return bool(np.array_equal(self._idx, np.arange(self.n)))

    def matrix(self, dtype=np.float32) -> np.ndarray:
        """Explicit 0/1 matrix with ``P[i, idx[i]] = 1``."""
        m = np.zeros((self.n, self.n), dtype=dtype)
        m[np.arange(self.n), self._idx] = 1
        return m

    def tolist(self) -> list[int]:
        return self._idx.tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return bool(np.array_equal(self._idx, other._idx))

    def __hash__(self) -> int:
        return hash(self._idx.tobytes())

    def __repr__(self) -> str:
        if self.n <= 16:
            return f"Permutation({self.tolist()})"
        return f"Permutation(n={self.n})"

    def __reduce__(self):
        return (Permutation, (self._idx.copy(),))


def identity(n: int) -> Permutation:
    if n < 1:
        raise PermutationError("identity needs n >= 1")
    return Permutation(np.arange(n))


def random_permutation(n: int, rng: np.random.Generator | int | None = None) -> Permutation:
    """Uniformly random permutation of length ``n`` from a seeded generator."""
    rng = np.random.default_rng(rng)
    return Permutation(rng.permutation(n))


def apply(p: Permutation, v):
    """Gather ``v`` through ``p``: ``out[i] = v[p.idx[i]]``.

    Works on numpy arrays (indexed along axis 0), and on strings and other
    sequences, which come back as the same kind of object.
    """
    if len(v) != p.n:
        raise DimensionError(f"vector length {len(v)} != permutation length {p.n}")
    if isinstance(v, np.ndarray):
        return v[p.idx]
    if isinstance(v, str):
        return "".join(v[i] for i in p.idx)
    out = [v[i] for i in p.idx]
    return type(v)(out) if isinstance(v, tuple) else out


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Permutation equal to applying ``q`` first, then ``p``.

    ``apply(compose(p, q), v) == apply(p, apply(q, v))``, i.e.
    ``result.idx[i] = q.idx[p.idx[i]]``.
    """
    if p.n != q.n:
        raise DimensionError(f"cannot compose lengths {p.n} and {q.n}")
    return Permutation(q.idx[p.idx])


def inverse(p: Permutation) -> Permutation:
    inv = np.empty(p.n, dtype=np.int64)
    inv[p.idx] = np.arange(p.n)
    return Permutation(inv)


# -- PBPP records ------------------------------------------------------------

def to_bytes(p: Permutation) -> bytes:
    return _binio.header(MAGIC) + _binio.u32(p.n) + p.idx.astype("<u4").tobytes()


def read_record(reader: _binio.Reader) -> Permutation:
    reader.expect_header(MAGIC)
    n = reader.u32()
    return Permutation(reader.u32_array(n))


def from_bytes(buf: bytes) -> Permutation:
    reader = _binio.Reader(buf)
    p = read_record(reader)
    if not reader.at_end():
        raise FormatError("trailing bytes after PBPP record")
    return p


def save(p: Permutation, path) -> None:
    _binio.atomic_write(path, to_bytes(p))


def load(path) -> Permutation:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
