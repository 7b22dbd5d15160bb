import numpy as np
import pytest

from helpers import random_blocks, random_pattern
from pbpkit import blocksparse as bs
from pbpkit.blocksparse import Block, BlockPattern, Layout
from pbpkit.errors import DimensionError, FormatError, PatternError

TWO_BY_TWO = [np.array([[1, 2], [3, 4]], np.float32), np.array([[5, 6], [7, 8]], np.float32)]
PAIR = BlockPattern(4, 4, [Block(0, 0, 2, 2), Block(2, 2, 2, 2)])


@pytest.mark.parametrize("layout, expected", [
    (Layout.BRC, [1, 2, 3, 4, 5, 6, 7, 8]),
    (Layout.BCR, [1, 3, 2, 4, 5, 7, 6, 8]),
    (Layout.CBR, [1, 3, 5, 7, 2, 4, 6, 8]),
])
def test_pack_hand_values(layout, expected):
    assert bs.pack(TWO_BY_TWO, PAIR, layout).data.tolist() == expected


@pytest.mark.parametrize("layout", list(Layout))
def test_offsets_match_formula(layout, rng):
    pattern = BlockPattern(12, 15, [Block(0, 0, 3, 5), Block(3, 10, 3, 5), Block(9, 5, 3, 5)])
    blocks = random_blocks(rng, pattern)
    packed = bs.pack(blocks, pattern, layout)
    nb, br, bc = 3, 3, 5
    for b in range(nb):
        for r in range(br):
            for c in range(bc):
                want = {Layout.BRC: b * br * bc + r * bc + c,
                        Layout.BCR: b * br * bc + c * br + r,
                        Layout.CBR: c * (nb * br) + b * br + r}[layout]
                assert bs.offset(pattern, layout, b, r, c) == want
                assert packed.data[want] == blocks[b][r, c]


def test_nonuniform_offsets_use_prefix_sum():
    pattern = BlockPattern(5, 5, [Block(0, 0, 2, 3), Block(2, 3, 3, 2)])
    assert bs.offset(pattern, "brc", 1, 0, 0) == 6
    assert bs.offset(pattern, "brc", 1, 1, 1) == 6 + 1 * 2 + 1
    assert bs.offset(pattern, "bcr", 1, 1, 1) == 6 + 1 * 3 + 1


@pytest.mark.parametrize("layout", list(Layout))
def test_unpack_round_trip_and_degenerate(layout):
    out = bs.unpack(bs.pack(TWO_BY_TWO, PAIR, layout))
    assert all(np.array_equal(a, b) for a, b in zip(out, TWO_BY_TWO))
    one = BlockPattern(1, 1, [Block(0, 0, 1, 1)])
    assert bs.unpack(bs.pack([np.array([[42.0]])], one, layout))[0].tolist() == [[42.0]]


def test_random_round_trip_500(rng):
    for _ in range(500):
        layout = Layout(int(rng.integers(3)))
        pattern = random_pattern(rng, int(rng.integers(1, 40)), int(rng.integers(1, 40)),
                                 uniform=layout is Layout.CBR or rng.random() < 0.5)
        blocks = random_blocks(rng, pattern)
        back = bs.unpack(bs.pack(blocks, pattern, layout))
        assert all(np.array_equal(a, b) for a, b in zip(back, blocks))


def test_cbr_needs_uniform():
    pattern = BlockPattern(5, 5, [Block(0, 0, 2, 3), Block(2, 3, 3, 2)])
    blocks = [np.zeros((2, 3)), np.zeros((3, 2))]
    with pytest.raises(PatternError):
        bs.pack(blocks, pattern, "cbr")


def test_pack_shape_mismatch():
    with pytest.raises(DimensionError):
        bs.pack([np.zeros((2, 2)), np.zeros((2, 3))], PAIR, "brc")
    with pytest.raises(DimensionError):
        bs.pack([np.zeros((2, 2))], PAIR, "brc")


@pytest.mark.parametrize("blocks", [
    [Block(0, 0, 3, 3), Block(2, 2, 2, 2)],
    [Block(0, 0, 0, 2)],
    [Block(0, 3, 2, 2)],
])
def test_invalid_patterns(blocks):
    with pytest.raises(PatternError):
        BlockPattern(4, 4, blocks)


def test_pattern_flags():
    shared = BlockPattern(4, 4, [Block(0, 0, 2, 2), Block(0, 2, 2, 2)])
    assert shared.uniform and not shared.rows_disjoint
    assert PAIR.rows_disjoint
    assert not BlockPattern(5, 5, [Block(0, 0, 2, 3), Block(2, 3, 3, 2)]).uniform


def test_block_matvec_identity_and_zero():
    eye = BlockPattern(2, 2, [Block(0, 0, 2, 2)])
    packed = bs.pack([np.eye(2, dtype=np.float32)], eye, "brc")
    assert bs.block_matvec(packed, [np.array([3.0, 4.0])])[0].tolist() == [3.0, 4.0]
    zero = bs.pack([np.zeros((2, 2)), np.zeros((2, 2))], PAIR, "cbr")
    ys = bs.block_matvec(zero, [np.array([1.0, -2.0]), np.array([5.0, 7.0])])
    assert all(not y.any() for y in ys)


def test_block_matvec_slice_mismatch():
    packed = bs.pack(TWO_BY_TWO, PAIR, "brc")
    with pytest.raises(DimensionError):
        bs.block_matvec(packed, [np.zeros(2), np.zeros(3)])
    with pytest.raises(DimensionError):
        bs.block_matvec(packed, [np.zeros(2)])


def _sequential(block, x):
    acc = np.zeros(block.shape[0], np.float32)
    for c in range(block.shape[1]):
        acc = acc + block[:, c] * np.float32(x[c])
    return acc


def test_cross_layout_bit_identical_500(rng):
    for _ in range(500):
        pattern = random_pattern(rng, int(rng.integers(1, 48)), int(rng.integers(1, 48)),
                                 uniform=True)
        blocks = random_blocks(rng, pattern)
        xs = [rng.standard_normal(b.cols).astype(np.float32) for b in pattern.blocks]
        outs = [bs.block_matvec(bs.pack(blocks, pattern, L), xs) for L in Layout]
        for other in outs[1:]:
            assert all(np.array_equal(a, b) for a, b in zip(outs[0], other))
        assert all(np.array_equal(y, _sequential(m, x))
                   for y, m, x in zip(outs[0], blocks, xs))


def test_nonuniform_matches_sequential(rng):
    for _ in range(200):
        pattern = random_pattern(rng, int(rng.integers(1, 40)), int(rng.integers(1, 40)))
        blocks = random_blocks(rng, pattern)
        xs = [rng.standard_normal(b.cols).astype(np.float32) for b in pattern.blocks]
        for L in (Layout.BRC, Layout.BCR):
            ys = bs.block_matvec(bs.pack(blocks, pattern, L), xs)
            assert all(np.array_equal(y, _sequential(m, x)) for y, m, x in zip(ys, blocks, xs))


def test_dense_embedding_oracle(rng):
    for _ in range(100):
        pattern = random_pattern(rng, int(rng.integers(1, 40)), int(rng.integers(1, 40)))
        blocks = random_blocks(rng, pattern)
        dense = pattern.embed(blocks)
        x = rng.standard_normal(pattern.n_cols).astype(np.float32)
        ys = bs.block_matvec(bs.pack(blocks, pattern, "bcr"),
                             [x[b.col_slice] for b in pattern.blocks])
        out = np.zeros(pattern.n_rows, np.float32)
        for b, y in zip(pattern.blocks, ys):
            out[b.row_slice] += y
        np.testing.assert_allclose(out, dense.astype(np.float64) @ x, rtol=1e-4, atol=1e-4)


def test_pbpb_layout_and_round_trip():
    packed = bs.pack(TWO_BY_TWO, PAIR, "bcr")
    buf = bs.to_bytes(packed)
    assert buf[:6] == b"PBPB\x01\x01"
    assert len(buf) == 6 + 12 + 2 * 16 + 8 * 4
    assert bs.from_bytes(buf) == packed
    with pytest.raises(FormatError):
        bs.from_bytes(buf[:-1])
    with pytest.raises(FormatError):
        bs.from_bytes(buf[:5] + b"\x09" + buf[6:])
