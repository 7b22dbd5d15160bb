"""Random instance generators and independent oracles for the test suite.

The oracles deliberately avoid the library's index arithmetic: permutations
are used only through their explicit 0/1 matrices, and dense products are
formed with plain matrix multiplication.
"""
import itertools

import numpy as np

from pbpkit import blocksparse, perm
from pbpkit.blocksparse import Block, BlockPattern, Layout
from pbpkit.pbp import PbpMatrix


def random_pattern(rng, n_rows, n_cols, uniform=False):
    """Non-overlapping blocks; general patterns may share rows across blocks."""
    if uniform:
        br = int(rng.integers(1, n_rows + 1))
        bc = int(rng.integers(1, n_cols + 1))
        slots = [(i * br, j * bc) for i in range(n_rows // br) for j in range(n_cols // bc)]
        k = int(rng.integers(1, len(slots) + 1))
        chosen = rng.choice(len(slots), size=k, replace=False)
        blocks = [Block(slots[s][0], slots[s][1], br, bc) for s in chosen]
        return BlockPattern(n_rows, n_cols, blocks)
    blocks = []
    cuts = np.sort(rng.choice(np.arange(1, n_rows), size=min(n_rows - 1, int(rng.integers(0, 4))),
                              replace=False)) if n_rows > 1 else np.array([], int)
    bands = np.concatenate([[0], cuts, [n_rows]]).astype(int)
    for r0, r1 in zip(bands[:-1], bands[1:]):
        ccuts = np.sort(rng.choice(np.arange(1, n_cols), size=min(n_cols - 1, int(rng.integers(0, 3))),
                                   replace=False)) if n_cols > 1 else np.array([], int)
        segs = np.concatenate([[0], ccuts, [n_cols]]).astype(int)
        for c0, c1 in zip(segs[:-1], segs[1:]):
            if rng.random() < 0.6:
                blocks.append(Block(int(r0), int(c0), int(r1 - r0), int(c1 - c0)))
    if not blocks:
        blocks.append(Block(0, 0, n_rows, n_cols))
    order = rng.permutation(len(blocks))
    return BlockPattern(n_rows, n_cols, [blocks[k] for k in order])


def random_blocks(rng, pattern):
    return [rng.standard_normal((b.rows, b.cols)).astype(np.float32) for b in pattern.blocks]


def random_pbp(rng, max_n=128, layout=None, uniform=None, shape=None):
    n_rows, n_cols = shape if shape else (int(rng.integers(1, max_n + 1)),
                                          int(rng.integers(1, max_n + 1)))
    if layout is None:
        layout = Layout(int(rng.integers(3)))
    layout = Layout.parse(layout)
    if uniform is None:
        uniform = layout is Layout.CBR or rng.random() < 0.5
    pattern = random_pattern(rng, n_rows, n_cols, uniform=uniform)
    packed = blocksparse.pack(random_blocks(rng, pattern), pattern, layout)
    return PbpMatrix(perm.random_permutation(n_rows, rng), packed,
                     perm.random_permutation(n_cols, rng))


def block_dense(m):
    """Dense M_block from logical block arrays."""
    out = np.zeros(m.shape, dtype=np.float32)
    for b, x in zip(m.pattern.blocks, blocksparse.unpack(m.packed)):
        out[b.row_start:b.row_start + b.rows, b.col_start:b.col_start + b.cols] = x
    return out


def dense_oracle(m):
    """M_sparse as the explicit product P_row @ M_block @ P_col."""
    return m.p_row.matrix() @ block_dense(m) @ m.p_col.matrix()


def ordered_dense_matvec(m, dense, a):
    """``dense @ a`` summed in block storage order, ascending block column within a block.

    Output row of block row ``k`` and input column of block column ``l`` are
    read off the permutation matrices, so only ``dense`` supplies values.
    """
    P_row, P_col = m.p_row.matrix(), m.p_col.matrix()
    out_of_k = np.argmax(P_row, axis=0)   # P_row[i, k] == 1
    in_of_l = np.argmax(P_col, axis=1)    # P_col[l, j] == 1
    a = np.asarray(a, dtype=np.float32)
    out = np.zeros(dense.shape[0], dtype=np.float32)
    for blk in m.pattern.blocks:
        rows = out_of_k[blk.row_start:blk.row_start + blk.rows]
        acc = np.zeros(blk.rows, dtype=np.float32)
        for l in range(blk.col_start, blk.col_start + blk.cols):
            j = in_of_l[l]
            acc = acc + dense[rows, j] * a[j]
        out[rows] = out[rows] + acc
    return out


def brute_force_two_block_mass(W):
    """Best mass on two diagonal blocks over every row and column permutation."""
    A = np.abs(np.asarray(W, dtype=np.float64))
    nr, nc = A.shape
    hr, hc = nr // 2, nc // 2
    best = 0.0
    for rp in itertools.permutations(range(nr)):
        Ar = A[list(rp)]
        for cp in itertools.permutations(range(nc)):
            M = Ar[:, list(cp)]
            best = max(best, M[:hr, :hc].sum() + M[hr:, hc:].sum())
    return best


def permuted_two_block_mass(W, p_row, p_col):
    """Mass of the two diagonal blocks of P_row^T W P_col^T."""
    M = p_row.matrix(np.float64).T @ np.abs(np.asarray(W, np.float64)) @ p_col.matrix(np.float64).T
    hr, hc = M.shape[0] // 2, M.shape[1] // 2
    return M[:hr, :hc].sum() + M[hr:, hc:].sum()
