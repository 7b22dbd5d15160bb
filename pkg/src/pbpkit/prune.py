"""Turning dense weight matrices into PBP form.

Two procedures are provided:

* feed-forward: fix pivots and a block pattern up front and mask the
  weights (:func:`feed_forward_mask`, :func:`feed_forward`);
* feed-back: search for pivots that keep as much absolute weight mass as
  possible on the diagonal blocks, halving every block per level
  (:func:`greedy_bisect`, :func:`recursive_bisect`).

The greedy search works on the block-coordinate orderings of rows and
columns. Positions ``[0, n/2)`` form the upper half, the rest the lower
half; a row and a column contribute ``|W[i, j]|`` when they sit in the
same half. Proposals swap one upper-half and one lower-half row (or
column), chosen uniformly from the seeded generator, after which the other
axis is re-split optimally for the new assignment. A proposal is accepted
only if the block mass strictly increases. The search stops after
``budget`` consecutive rejected proposals.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _binio, perm
from .blocksparse import Block, BlockPattern, Layout
from .errors import DimensionError, FormatError, PatternError
from .pbp import PbpMatrix, from_masked
from .perm import Permutation

DENSE_MAGIC = b"PBPD"
DEFAULT_BUDGET = 2000


@dataclass
class PruneReport:
    objective_initial: float
    objective_final: float
    retained_mass_fraction: float
    accepted_moves: int
    trace: list[float] = field(default_factory=list, repr=False)

    def to_dict(self, include_trace: bool = False) -> dict:
        d = asdict(self)
        if not include_trace:
            d.pop("trace")
        return d

    def to_json(self, **extra) -> str:
        return json.dumps({**self.to_dict(), **extra}, indent=2, sort_keys=True)


@dataclass(frozen=True)
class BisectionTree:
    """Diagonal block boundaries after each halving level."""

    n_rows: int
    n_cols: int
    levels: int

    def __post_init__(self):
        k = 1 << self.levels
        if self.levels < 0 or self.n_rows % k or self.n_cols % k:
            raise PatternError(
                f"{self.n_rows}x{self.n_cols} is not divisible by 2^{self.levels}")

    def splits(self, level: int) -> list[Block]:
        return list(BlockPattern.diagonal(self.n_rows, self.n_cols, 1 << level).blocks)

    def pattern(self) -> BlockPattern:
        return BlockPattern.diagonal(self.n_rows, self.n_cols, 1 << self.levels)


def _check_shape(W, p_row, p_col, pattern=None):
    W = np.asarray(W)
    if W.ndim != 2:
        raise DimensionError("weights must be a 2-D matrix")
    if p_row.n != W.shape[0] or p_col.n != W.shape[1]:
        raise DimensionError(f"pivots ({p_row.n}, {p_col.n}) do not match {W.shape}")
    if pattern is not None and (pattern.n_rows, pattern.n_cols) != W.shape:
        raise DimensionError(f"pattern {pattern.n_rows}x{pattern.n_cols} != {W.shape}")
    return W


def feed_forward_mask(n_rows: int, n_cols: int, pattern: BlockPattern,
                      p_row: Permutation, p_col: Permutation) -> np.ndarray:
    """Positions of a dense ``n_rows x n_cols`` matrix that land inside a block."""
    if (pattern.n_rows, pattern.n_cols) != (n_rows, n_cols):
        raise DimensionError(f"pattern {pattern.n_rows}x{pattern.n_cols} != "
                             f"{n_rows}x{n_cols}")
    if p_row.n != n_rows or p_col.n != n_cols:
        raise DimensionError("pivot lengths do not match the matrix")
    return pattern.mask()[p_row.idx][:, perm.inverse(p_col).idx]


def block_mass(W, p_row: Permutation, p_col: Permutation, pattern: BlockPattern) -> float:
    W = _check_shape(W, p_row, p_col, pattern)
    mask = feed_forward_mask(W.shape[0], W.shape[1], pattern, p_row, p_col)
    return float(np.abs(W.astype(np.float64))[mask].sum())


def random_pivots(n_rows: int, n_cols: int, seed=None) -> tuple[Permutation, Permutation]:
    rng = np.random.default_rng(seed)
    return perm.random_permutation(n_rows, rng), perm.random_permutation(n_cols, rng)


def feed_forward(W, pattern: BlockPattern, seed=None, layout=Layout.BRC,
                 pivots: tuple[Permutation, Permutation] | None = None,
                 ) -> tuple[PbpMatrix, PruneReport]:
    """Mask ``W`` to a fixed pattern under pivots chosen before training.

    Pivots default to seeded uniform-random permutations; identity pivots
    must be passed explicitly through ``pivots``.
    """
    W = np.asarray(W, dtype=np.float32)
    p_row, p_col = random_pivots(*W.shape, seed) if pivots is None else pivots
    mask = feed_forward_mask(W.shape[0], W.shape[1], pattern, p_row, p_col)
    total = float(np.abs(W.astype(np.float64)).sum())
    kept = float(np.abs(W.astype(np.float64))[mask].sum())
    m = from_masked(np.where(mask, W, np.float32(0)), p_row, p_col, pattern, layout)
    frac = kept / total if total else 1.0
    return m, PruneReport(kept, kept, frac, 0, [kept])


def _orders_to_pivots(row_order, col_order) -> tuple[Permutation, Permutation]:
    # M_block[k, l] = W[row_order[k], col_order[l]]
    return perm.inverse(Permutation(row_order)), Permutation(col_order)


def two_block_pattern(n_rows: int, n_cols: int) -> BlockPattern:
    return BlockPattern.diagonal(n_rows, n_cols, 2)


def _rebalance(S: np.ndarray, half: int) -> tuple[np.ndarray, float]:
    """Best balanced split of one axis given per-item masses toward each half.

    ``S[k, h]`` is the mass item ``k`` contributes when placed in half ``h``.
    Returns the side of every item (``half`` items on side 0) and the total.
    """
    gain = S[:, 0] - S[:, 1]
    # sort is stable, so ties resolve by index
    top = np.argsort(-gain, kind="stable")[:half]
    side = np.ones(S.shape[0], dtype=np.int64)
    side[top] = 0
    return side, float(S[:, 1].sum() + gain[top].sum())


def greedy_bisect(W, seed=None, budget: int = DEFAULT_BUDGET,
                  start: tuple[Permutation, Permutation] | None = None,
                  ) -> tuple[Permutation, Permutation, PruneReport]:
    """Hill-climb pivots that maximize mass on two diagonal blocks.

    Each proposal swaps a random upper-half/lower-half pair on one axis and
    then re-splits the other axis optimally for the new assignment. It is
    accepted only if the block mass strictly increases. The search ends
    after ``budget`` consecutive rejections, or earlier once every distinct
    swap has been rejected since the last accepted move.

    Args:
        W: dense matrix with even numbers of rows and columns.
        seed: seed for the random starting pivots and the proposal stream.
        budget: number of consecutive non-improving proposals before stopping.
        start: optional starting ``(p_row, p_col)``; random when omitted.

    Returns:
        ``(p_row, p_col, report)`` where ``report.trace`` holds the objective
        at the start and after each accepted move.
    """
    A = np.abs(np.asarray(W, dtype=np.float64))
    if A.ndim != 2:
        raise DimensionError("weights must be a 2-D matrix")
    nr, nc = A.shape
    if nr % 2 or nc % 2:
        raise PatternError(f"greedy bisection needs even dimensions, got {nr}x{nc}")
    rng = np.random.default_rng(seed)
    if start is None:
        row_order = rng.permutation(nr)
        col_order = rng.permutation(nc)
    else:
        p_row, p_col = start
        _check_shape(A, p_row, p_col)
        row_order = perm.inverse(p_row).idx
        col_order = p_col.idx
    hr, hc = nr // 2, nc // 2
    total = float(A.sum())

    row_side = np.empty(nr, dtype=np.int64)
    row_side[row_order] = np.arange(nr) >= hr
    col_side = np.empty(nc, dtype=np.int64)
    col_side[col_order] = np.arange(nc) >= hc

    def half_masses():
        # R[i, h]: mass of row i over columns in half h; C likewise for columns
        R = np.stack([A[:, col_side == 0].sum(1), A[:, col_side == 1].sum(1)], axis=1)
        C = np.stack([A[row_side == 0].sum(0), A[row_side == 1].sum(0)], axis=1)
        return R, C

    R, C = half_masses()
    objective = float(R[np.arange(nr), row_side].sum())
    initial = objective
    trace = [objective]
    eps = 1e-12 * max(total, 1.0)
    neighbourhood = hr * hr + hc * hc
    accepted = 0
    rejected: set = set()
    streak = 0
    while streak < budget and len(rejected) < neighbourhood:
        on_rows = rng.random() < nr / (nr + nc)
        side = row_side if on_rows else col_side
        half = hr if on_rows else hc
        upper, lower = np.flatnonzero(side == 0), np.flatnonzero(side == 1)
        a, b = int(rng.integers(half)), int(rng.integers(half))
        i, j = upper[a], lower[b]
        if on_rows:
            moved = C.copy()
            moved[:, 0] += A[j] - A[i]
            moved[:, 1] += A[i] - A[j]
            other_side, value = _rebalance(moved, hc)
        else:
            moved = R.copy()
            moved[:, 0] += A[:, j] - A[:, i]
            moved[:, 1] += A[:, i] - A[:, j]
            other_side, value = _rebalance(moved, hr)
        if value > objective + eps:
            side[i], side[j] = 1, 0
            if on_rows:
                col_side = other_side
            else:
                row_side = other_side
            R, C = half_masses()
            objective = value
            trace.append(objective)
            accepted += 1
            streak = 0
            rejected.clear()
        else:
            streak += 1
            rejected.add((on_rows, a, b))

    row_order = np.concatenate([np.flatnonzero(row_side == 0), np.flatnonzero(row_side == 1)])
    col_order = np.concatenate([np.flatnonzero(col_side == 0), np.flatnonzero(col_side == 1)])
    p_row, p_col = _orders_to_pivots(row_order, col_order)
    final = block_mass(A, p_row, p_col, two_block_pattern(nr, nc))
    trace[-1] = final
    frac = final / total if total else 1.0
    return p_row, p_col, PruneReport(initial, final, frac, accepted, trace)


def recursive_bisect(W, levels: int, seed=None, budget: int = DEFAULT_BUDGET,
                     layout=Layout.BRC) -> tuple[PbpMatrix, PruneReport]:
    """Bisect every diagonal block ``levels`` times and delete off-block weights.

    Each level splits every current diagonal block with :func:`greedy_bisect`
    (blocks handled in index order, each with its own child seed) and
    composes the local pivots into the global ones. The result has ``2^levels``
    diagonal blocks and fill-in ``2^-levels``.

    The report's initial objective is the block mass at the random starting
    pivots of the final level; with ``levels == 0`` nothing is pruned.
    """
    W = np.asarray(W, dtype=np.float32)
    if W.ndim != 2:
        raise DimensionError("weights must be a 2-D matrix")
    nr, nc = W.shape
    tree = BisectionTree(nr, nc, levels)
    A = np.abs(W.astype(np.float64))
    total = float(A.sum())
    row_order = np.arange(nr)
    col_order = np.arange(nc)
    accepted = 0
    initial = total
    trace: list[float] = [total]
    seeds = np.random.SeedSequence(seed).spawn(max(levels, 1))

    for level in range(levels):
        children = seeds[level].spawn(1 << level)
        level_initial = 0.0
        level_final = 0.0
        for blk, child in zip(tree.splits(level), children):
            rs = row_order[blk.row_slice]
            cs = col_order[blk.col_slice]
            sub = A[np.ix_(rs, cs)]
            p_row, p_col, rep = greedy_bisect(sub, seed=child, budget=budget)
            row_order[blk.row_slice] = rs[perm.inverse(p_row).idx]
            col_order[blk.col_slice] = cs[p_col.idx]
            accepted += rep.accepted_moves
            level_initial += rep.objective_initial
            level_final += rep.objective_final
        initial = level_initial
        trace.append(level_final)

    p_row, p_col = _orders_to_pivots(row_order, col_order)
    pattern = tree.pattern()
    mask = feed_forward_mask(nr, nc, pattern, p_row, p_col)
    m = from_masked(np.where(mask, W, np.float32(0)), p_row, p_col, pattern, layout)
    final = float(A[mask].sum())
    trace[-1] = final
    frac = final / total if total else 1.0
    return m, PruneReport(initial, final, frac, accepted, trace)


# -- PBPD dense matrices -----------------------------------------------------

def dense_to_bytes(W) -> bytes:
    W = np.asarray(W, dtype=np.float32)
    if W.ndim != 2:
        raise DimensionError("PBPD stores 2-D matrices")
    return (_binio.header(DENSE_MAGIC) + _binio.u32(*W.shape)
            + np.ascontiguousarray(W).astype("<f4").tobytes())


def dense_from_bytes(buf: bytes) -> np.ndarray:
    reader = _binio.Reader(buf)
    reader.expect_header(DENSE_MAGIC)
    nr, nc = reader.u32(), reader.u32()
    W = reader.f32_array(nr * nc).reshape(nr, nc)
    if not reader.at_end():
        raise FormatError("trailing bytes after PBPD record")
    return W


def save_dense(W, path) -> None:
    _binio.atomic_write(path, dense_to_bytes(W))


def load_dense(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return dense_from_bytes(fh.read())
