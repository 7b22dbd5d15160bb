"""Permutation-block-permutation matrices.

A :class:`PbpMatrix` represents ``M_sparse = P_row @ M_block @ P_col`` where
``P_row``/``P_col`` are the 0/1 matrices of gather permutations and
``M_block`` is the dense embedding of a :class:`~pbpkit.blocksparse.BlockPattern`.
Entry-wise::

    M_sparse[i, j] = M_block[p_row.idx[i], inverse(p_col).idx[j]]

``matvec`` evaluates ``P_row @ (M_block @ (P_col @ a))`` in three stages:
per-block gather of the input through ``p_col``, the block kernel, and a
scatter of each block's rows to ``inverse(p_row)`` positions. Blocks that
share output rows are accumulated in storage order.
"""
from __future__ import annotations

import numpy as np

from . import _binio, blocksparse, perm
from .blocksparse import BlockPattern, Layout, PackedBlocks
from .errors import DimensionError, FormatError, StrayNonzero
from .perm import Permutation

MAGIC = b"PBPX"


class PbpMatrix:
    """Immutable ``(p_row, packed, p_col)`` triple."""

    def __init__(self, p_row: Permutation, packed: PackedBlocks, p_col: Permutation):
        pattern = packed.pattern
        if p_row.n != pattern.n_rows or p_col.n != pattern.n_cols:
            raise DimensionError(
                f"pivots of length ({p_row.n}, {p_col.n}) do not fit a "
                f"{pattern.n_rows}x{pattern.n_cols} pattern")
        self.p_row = p_row
        self.packed = packed
        self.p_col = p_col
        # static scatter addresses: block row k lands on output inverse(p_row)[k]
        self.row_scatter = perm.inverse(p_row).idx
        self._col_gather = [p_col.idx[b.col_slice] for b in pattern.blocks]
        self._row_dest = [self.row_scatter[b.row_slice] for b in pattern.blocks]
        self._fast = pattern.uniform and pattern.rows_disjoint
        if self._fast:
            self._gather_all = np.stack(self._col_gather)
            self._dest_all = np.concatenate(self._row_dest)

    @property
    def pattern(self) -> BlockPattern:
        return self.packed.pattern

    @property
    def layout(self) -> Layout:
        return self.packed.layout

    @property
    def shape(self) -> tuple[int, int]:
        return (self.pattern.n_rows, self.pattern.n_cols)

    def with_layout(self, layout) -> "PbpMatrix":
        return PbpMatrix(self.p_row, self.packed.with_layout(layout), self.p_col)

    def with_pivots(self, p_row: Permutation | None = None,
                    p_col: Permutation | None = None) -> "PbpMatrix":
        return PbpMatrix(self.p_row if p_row is None else p_row, self.packed,
                         self.p_col if p_col is None else p_col)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PbpMatrix):
            return NotImplemented
        return (self.p_row == other.p_row and self.p_col == other.p_col
                and self.packed == other.packed)

    def __repr__(self) -> str:
        return (f"PbpMatrix({self.shape[0]}x{self.shape[1]}, "
                f"{self.pattern.n_blocks} blocks, layout={self.layout.name}, "
                f"fill_in={fill_in(self):.4g})")


def block_matrix(m: PbpMatrix) -> np.ndarray:
    """Dense ``M_block`` (blocks embedded in zeros)."""
    return m.pattern.embed(blocksparse.unpack(m.packed))


def to_dense(m: PbpMatrix) -> np.ndarray:
    mb = block_matrix(m)
    return mb[m.p_row.idx][:, perm.inverse(m.p_col).idx]


def from_masked(dense, p_row: Permutation, p_col: Permutation,
                pattern: BlockPattern, layout=Layout.BRC) -> PbpMatrix:
    """Recover the PBP form of ``dense`` for known pivots and pattern.

    Raises :class:`StrayNonzero` if any nonzero would fall outside the blocks.
    """
    dense = np.asarray(dense, dtype=np.float32)
    if dense.ndim != 2 or dense.shape != (pattern.n_rows, pattern.n_cols):
        raise DimensionError(f"matrix shape {dense.shape} does not match pattern "
                             f"{(pattern.n_rows, pattern.n_cols)}")
    if p_row.n != pattern.n_rows or p_col.n != pattern.n_cols:
        raise DimensionError("pivot lengths do not match the matrix")
    row_src = perm.inverse(p_row).idx
    mb = dense[row_src][:, p_col.idx]
    stray = (mb != 0) & ~pattern.mask()
    if stray.any():
        k, l = np.argwhere(stray)[0]
        raise StrayNonzero(int(row_src[k]), int(p_col.idx[l]), float(mb[k, l]))
    packed = blocksparse.pack(pattern.extract(mb), pattern, layout)
    return PbpMatrix(p_row, packed, p_col)


def matvec(m: PbpMatrix, a_in) -> np.ndarray:
    a_in = np.asarray(a_in, dtype=np.float32)
    n_rows, n_cols = m.shape
    if a_in.shape != (n_cols,):
        raise DimensionError(f"input has shape {a_in.shape}, expected ({n_cols},)")
    out = np.zeros(n_rows, dtype=np.float32)
    if m._fast:
        ys = blocksparse.uniform_block_matvec(m.packed, a_in[m._gather_all])
        out[m._dest_all] += ys.reshape(-1)
        return out
    ys = blocksparse.block_matvec(m.packed, [a_in[g] for g in m._col_gather])
    for dest, y in zip(m._row_dest, ys):
        out[dest] += y
    return out


def fill_in(m: PbpMatrix) -> float:
    return m.pattern.fill_in()


def nonzero_slots(m: PbpMatrix) -> int:
    return m.pattern.area


# -- PBPX container ----------------------------------------------------------

def to_bytes(m: PbpMatrix) -> bytes:
    return (_binio.header(MAGIC) + perm.to_bytes(m.p_row)
            + blocksparse.to_bytes(m.packed) + perm.to_bytes(m.p_col))


def from_bytes(buf: bytes) -> PbpMatrix:
    reader = _binio.Reader(buf)
    reader.expect_header(MAGIC)
    p_row = perm.read_record(reader)
    packed = blocksparse.read_record(reader)
    p_col = perm.read_record(reader)
    if not reader.at_end():
        raise FormatError("trailing bytes after PBPX container")
    return PbpMatrix(p_row, packed, p_col)


def save(m: PbpMatrix, path) -> None:
    _binio.atomic_write(path, to_bytes(m))


def load(path) -> PbpMatrix:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
