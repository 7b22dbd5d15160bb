"""Block patterns and their packed coefficient storage.

Three physical orderings are supported, named with the rightmost axis
changing fastest:

* ``BRC`` (block, row, column): row-major inside each block.
* ``BCR`` (block, column, row): column-major inside each block.
* ``CBR`` (column, block, row): column ``c`` of every block stored together.

For ``nb`` uniform ``Br x Bc`` blocks the word offset of coefficient
``(b, r, c)`` is::

    BRC: b*Br*Bc + r*Bc + c
    BCR: b*Br*Bc + c*Br + r
    CBR: c*(nb*Br) + b*Br + r

Non-uniform patterns use BRC/BCR per block after a prefix sum of block areas.
CBR is only defined for uniform patterns.

The block kernel accumulates each output row over ascending column index
with a single float32 accumulator, so results are bit-identical whatever
layout holds the coefficients.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _binio
from .errors import DimensionError, FormatError, PatternError

MAGIC = b"PBPB"


class Layout(enum.IntEnum):
    BRC = 0
    BCR = 1
    CBR = 2

    @classmethod
    def parse(cls, value) -> "Layout":
        if isinstance(value, Layout):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise PatternError(f"unknown layout {value!r}") from None
        return cls(int(value))


@dataclass(frozen=True)
class Block:
    row_start: int
    col_start: int
    rows: int
    cols: int

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def row_slice(self) -> slice:
        return slice(self.row_start, self.row_start + self.rows)

    @property
    def col_slice(self) -> slice:
        return slice(self.col_start, self.col_start + self.cols)


class BlockPattern:
    """Ordered set of dense sub-blocks of an ``n_rows x n_cols`` matrix.

    List order is storage order. Blocks may share rows (their outputs are
    then summed) but may not overlap as rectangles.
    """

    def __init__(self, n_rows: int, n_cols: int, blocks: Sequence[Block]):
        if n_rows < 1 or n_cols < 1:
            raise PatternError("matrix dimensions must be positive")
        blocks = tuple(Block(*map(int, (b.row_start, b.col_start, b.rows, b.cols)))
                       for b in blocks)
        if not blocks:
            raise PatternError("a block pattern needs at least one block")
        for k, b in enumerate(blocks):
            if b.rows < 1 or b.cols < 1:
                raise PatternError(f"block {k} has empty extent {b.rows}x{b.cols}")
            if (b.row_start < 0 or b.col_start < 0
                    or b.row_start + b.rows > n_rows or b.col_start + b.cols > n_cols):
                raise PatternError(f"block {k} {b} exceeds {n_rows}x{n_cols}")
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.blocks = blocks
        self._check_overlap()
        sizes = np.array([b.size for b in blocks], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.offsets.setflags(write=False)

    def _check_overlap(self) -> None:
        a = np.array([(b.row_start, b.col_start, b.rows, b.cols) for b in self.blocks])
        r0, c0 = a[:, 0], a[:, 1]
        r1, c1 = r0 + a[:, 2], c0 + a[:, 3]
        hit = ((r0[:, None] < r1[None, :]) & (r0[None, :] < r1[:, None])
               & (c0[:, None] < c1[None, :]) & (c0[None, :] < c1[:, None]))
        np.fill_diagonal(hit, False)
        if hit.any():
            i, j = np.argwhere(hit)[0]
            raise PatternError(f"blocks {i} and {j} overlap")

    @classmethod
    def diagonal(cls, n_rows: int, n_cols: int, n_blocks: int) -> "BlockPattern":
        """``n_blocks`` equal blocks along the main diagonal."""
        if n_blocks < 1 or n_rows % n_blocks or n_cols % n_blocks:
            raise PatternError(
                f"{n_rows}x{n_cols} is not divisible into {n_blocks} diagonal blocks")
        br, bc = n_rows // n_blocks, n_cols // n_blocks
        return cls(n_rows, n_cols, [Block(k * br, k * bc, br, bc) for k in range(n_blocks)])

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def uniform(self) -> bool:
        first = self.blocks[0]
        return all(b.rows == first.rows and b.cols == first.cols for b in self.blocks)

    @property
    def rows_disjoint(self) -> bool:
        covered = np.zeros(self.n_rows, dtype=np.int64)
        for b in self.blocks:
            covered[b.row_slice] += 1
        return bool(covered.max() <= 1)

    @property
    def area(self) -> int:
        return int(self.offsets[-1])

    def fill_in(self) -> float:
        return self.area / (self.n_rows * self.n_cols)

    def mask(self) -> np.ndarray:
        """Boolean ``n_rows x n_cols`` mask of positions inside some block."""
        m = np.zeros((self.n_rows, self.n_cols), dtype=bool)
        for b in self.blocks:
            m[b.row_slice, b.col_slice] = True
        return m

    def embed(self, blocks_dense: Sequence[np.ndarray]) -> np.ndarray:
        """Dense float32 matrix with each block written at its position."""
        self._check_dense(blocks_dense)
        m = np.zeros((self.n_rows, self.n_cols), dtype=np.float32)
        for b, x in zip(self.blocks, blocks_dense):
            m[b.row_slice, b.col_slice] = x
        return m

    def extract(self, dense: np.ndarray) -> list[np.ndarray]:
        dense = np.asarray(dense)
        if dense.shape != (self.n_rows, self.n_cols):
            raise DimensionError(f"matrix shape {dense.shape} != pattern "
                                 f"{(self.n_rows, self.n_cols)}")
        return [np.array(dense[b.row_slice, b.col_slice], dtype=np.float32)
                for b in self.blocks]

    def _check_dense(self, blocks_dense) -> None:
        if len(blocks_dense) != self.n_blocks:
            raise DimensionError(
                f"got {len(blocks_dense)} block arrays for {self.n_blocks} blocks")
        for k, (b, x) in enumerate(zip(self.blocks, blocks_dense)):
            if np.shape(x) != (b.rows, b.cols):
                raise DimensionError(
                    f"block {k} array has shape {np.shape(x)}, expected {(b.rows, b.cols)}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockPattern):
            return NotImplemented
        return (self.n_rows, self.n_cols, self.blocks) == (other.n_rows, other.n_cols,
                                                           other.blocks)

    def __repr__(self) -> str:
        return (f"BlockPattern({self.n_rows}x{self.n_cols}, {self.n_blocks} blocks, "
                f"fill_in={self.fill_in():.4g})")


def offset(pattern: BlockPattern, layout: Layout, b: int, r: int, c: int) -> int:
    """Word offset of coefficient ``(b, r, c)`` in packed storage."""
    layout = Layout.parse(layout)
    blk = pattern.blocks[b]
    if layout is Layout.CBR:
        if not pattern.uniform:
            raise PatternError("CBR layout requires uniformly sized blocks")
        return c * (pattern.n_blocks * blk.rows) + b * blk.rows + r
    base = int(pattern.offsets[b])
    if layout is Layout.BRC:
        return base + r * blk.cols + c
    return base + c * blk.rows + r


class PackedBlocks:
    """Block coefficients laid out in one flat float32 array."""

    def __init__(self, pattern: BlockPattern, layout: Layout, data: np.ndarray):
        layout = Layout.parse(layout)
        if layout is Layout.CBR and not pattern.uniform:
            raise PatternError("CBR layout requires uniformly sized blocks")
        data = np.array(data, dtype=np.float32, copy=True).reshape(-1)
        if data.size != pattern.area:
            raise DimensionError(f"data length {data.size} != pattern area {pattern.area}")
        data.setflags(write=False)
        self.pattern = pattern
        self.layout = layout
        self.data = data

    def block_view(self, b: int) -> np.ndarray:
        """Logical ``rows x cols`` view of block ``b`` (no copy)."""
        blk = self.pattern.blocks[b]
        if self.layout is Layout.CBR:
            nb = self.pattern.n_blocks
            return self.data.reshape(blk.cols, nb, blk.rows)[:, b, :].T
        lo, hi = self.pattern.offsets[b], self.pattern.offsets[b + 1]
        chunk = self.data[lo:hi]
        if self.layout is Layout.BRC:
            return chunk.reshape(blk.rows, blk.cols)
        return chunk.reshape(blk.cols, blk.rows).T

    def stacked_columns(self) -> np.ndarray:
        """For uniform patterns, a ``(cols, nb, rows)`` view: ``[c, b, r] = M_b[r, c]``."""
        p = self.pattern
        if not p.uniform:
            raise PatternError("stacked view requires uniformly sized blocks")
        nb, br, bc = p.n_blocks, p.blocks[0].rows, p.blocks[0].cols
        if self.layout is Layout.CBR:
            return self.data.reshape(bc, nb, br)
        if self.layout is Layout.BCR:
            return self.data.reshape(nb, bc, br).transpose(1, 0, 2)
        return self.data.reshape(nb, br, bc).transpose(2, 0, 1)

    def with_layout(self, layout: Layout) -> "PackedBlocks":
        return pack(unpack(self), self.pattern, layout)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PackedBlocks):
            return NotImplemented
        return (self.layout == other.layout and self.pattern == other.pattern
                and np.array_equal(self.data, other.data))

    def __repr__(self) -> str:
        return f"PackedBlocks({self.pattern!r}, layout={self.layout.name})"


def pack(blocks_dense: Sequence[np.ndarray], pattern: BlockPattern,
         layout: Layout | str) -> PackedBlocks:
    """Lay out per-block row-major arrays into flat storage for ``layout``."""
    layout = Layout.parse(layout)
    pattern._check_dense(blocks_dense)
    if layout is Layout.CBR:
        if not pattern.uniform:
            raise PatternError("CBR layout requires uniformly sized blocks")
        stack = np.stack([np.asarray(x, dtype=np.float32) for x in blocks_dense])
        data = stack.transpose(2, 0, 1).reshape(-1)  # (c, b, r)
    else:
        parts = []
        for x in blocks_dense:
            x = np.asarray(x, dtype=np.float32)
            parts.append((x if layout is Layout.BRC else x.T).reshape(-1))
        data = np.concatenate(parts)
    return PackedBlocks(pattern, layout, data)


def unpack(packed: PackedBlocks) -> list[np.ndarray]:
    return [np.array(packed.block_view(b)) for b in range(packed.pattern.n_blocks)]


def _accumulate(cols: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Sum ``cols[c] * x[c]`` over ascending ``c`` with one float32 accumulator.

    ``cols`` has shape ``(n_cols, ...)`` and ``x`` shape ``(n_cols, ...)``
    broadcastable against ``cols[c]``.
    """
    acc = np.zeros(cols.shape[1:], dtype=np.float32)
    tmp = np.empty_like(acc)
    for c in range(cols.shape[0]):
        np.multiply(cols[c], x[c], out=tmp)
        acc += tmp
    return acc


def block_matvec(packed: PackedBlocks, x_slices: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Multiply each block by its input slice.

    Returns ``y_b[r] = sum_c M_b[r, c] * x_b[c]`` for every block ``b``,
    summed in ascending ``c``.
    """
    pattern = packed.pattern
    if len(x_slices) != pattern.n_blocks:
        raise DimensionError(f"got {len(x_slices)} slices for {pattern.n_blocks} blocks")
    xs = []
    for k, (blk, x) in enumerate(zip(pattern.blocks, x_slices)):
        x = np.asarray(x, dtype=np.float32)
        if x.shape != (blk.cols,):
            raise DimensionError(f"slice {k} has shape {x.shape}, expected ({blk.cols},)")
        xs.append(x)
    if pattern.uniform:
        ys = uniform_block_matvec(packed, np.stack(xs))
        return list(ys)
    return [_accumulate(packed.block_view(b).T, xs[b]) for b in range(pattern.n_blocks)]


def uniform_block_matvec(packed: PackedBlocks, x_stack: np.ndarray) -> np.ndarray:
    """Batched kernel for uniform patterns: ``x_stack`` is ``(nb, cols)``, result ``(nb, rows)``."""
    cols = packed.stacked_columns()  # (c, b, r)
    return _accumulate(cols, x_stack.T[:, :, None])


# -- PBPB records ------------------------------------------------------------

def to_bytes(packed: PackedBlocks) -> bytes:
    p = packed.pattern
    parts = [_binio.header(MAGIC), bytes([int(packed.layout)]),
             _binio.u32(p.n_rows, p.n_cols, p.n_blocks)]
    for b in p.blocks:
        parts.append(_binio.u32(b.row_start, b.col_start, b.rows, b.cols))
    parts.append(packed.data.astype("<f4").tobytes())
    return b"".join(parts)


def read_record(reader: _binio.Reader) -> PackedBlocks:
    reader.expect_header(MAGIC)
    tag = reader.u8()
    if tag > 2:
        raise FormatError(f"unknown layout tag {tag}")
    n_rows, n_cols, nb = reader.u32(), reader.u32(), reader.u32()
    blocks = [Block(*reader.u32_array(4).tolist()) for _ in range(nb)]
    pattern = BlockPattern(n_rows, n_cols, blocks)
    data = reader.f32_array(pattern.area)
    return PackedBlocks(pattern, Layout(tag), data)


def from_bytes(buf: bytes) -> PackedBlocks:
    reader = _binio.Reader(buf)
    packed = read_record(reader)
    if not reader.at_end():
        raise FormatError("trailing bytes after PBPB record")
    return packed


def save(packed: PackedBlocks, path) -> None:
    _binio.atomic_write(path, to_bytes(packed))


def load(path) -> PackedBlocks:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
