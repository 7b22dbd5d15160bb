"""Idealized SIMT memory-coalescing model for the block kernel.

Threads are numbered ``b * rows + r`` (one thread group per block, one
thread per block row) and grouped into warps of consecutive threads. On
cycle ``c`` thread ``(b, r)`` loads the coefficient ``(b, r, c)`` from packed
storage. Each warp's word addresses on a cycle are merged into aligned
transactions; efficiency is requested bytes over transferred bytes.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .blocksparse import BlockPattern, Layout
from .errors import PatternError

# nvprof gld/gst efficiency (%) on Jetson TX1 for the 512 / 6.25% case
REFERENCE_EFFICIENCY = {
    "gemv2N": (100.0, 100.0),
    "csrMv": (99.32, 12.5),
    "brc": (12.52, 100.0),
    "bcr": (98.1, 100.0),
    "cbr": (98.7, 100.0),
}

STORE_KINDS = ("dense_rowstore", "csr_scatter", "pbp_groupstore")


@dataclass(frozen=True)
class WarpModel:
    warp_size: int = 32
    transaction_bytes: int = 32
    word_bytes: int = 4

    def __post_init__(self):
        if self.warp_size < 1:
            raise ValueError("warp_size must be at least 1")
        if self.word_bytes < 1 or self.transaction_bytes % self.word_bytes:
            raise ValueError("transaction_bytes must be a multiple of word_bytes")

    @property
    def words_per_transaction(self) -> int:
        return self.transaction_bytes // self.word_bytes


@dataclass(frozen=True)
class EfficiencyReport:
    load_efficiency: float
    store_efficiency: float
    transactions: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def coalesce(words: np.ndarray, warp_of: np.ndarray, model: WarpModel) -> tuple[int, int]:
    """Merge word addresses issued in one cycle into per-warp transactions.

    Returns ``(bytes_requested, transactions)``. Several threads hitting the
    same transaction cost it once.
    """
    segments = words // model.words_per_transaction
    keys = np.unique(np.stack([warp_of, segments]), axis=1)
    return words.size * model.word_bytes, keys.shape[1]


def _efficiency(requested: int, transactions: int, model: WarpModel) -> float:
    return 100.0 * requested / (transactions * model.transaction_bytes)


def load_addresses(layout: Layout, pattern: BlockPattern, cycle: int) -> np.ndarray:
    """Word addresses read by every thread (in thread order) on ``cycle``."""
    if not pattern.uniform:
        raise PatternError("the coalescing model needs uniformly sized blocks")
    layout = Layout.parse(layout)
    nb, br, bc = pattern.n_blocks, pattern.blocks[0].rows, pattern.blocks[0].cols
    b, r = np.divmod(np.arange(nb * br), br)
    if layout is Layout.BRC:
        return b * br * bc + r * bc + cycle
    if layout is Layout.BCR:
        return b * br * bc + cycle * br + r
    return cycle * (nb * br) + b * br + r


def load_efficiency(layout, pattern: BlockPattern,
                    model: WarpModel = WarpModel()) -> EfficiencyReport:
    layout = Layout.parse(layout)
    if not pattern.uniform:
        raise PatternError("the coalescing model needs uniformly sized blocks")
    n_threads = pattern.n_blocks * pattern.blocks[0].rows
    warp_of = np.arange(n_threads) // model.warp_size
    requested = transactions = 0
    for c in range(pattern.blocks[0].cols):
        req, tx = coalesce(load_addresses(layout, pattern, c), warp_of, model)
        requested += req
        transactions += tx
    store = store_efficiency("pbp_groupstore", pattern.n_rows, model)
    return EfficiencyReport(_efficiency(requested, transactions, model), store, transactions)


def store_addresses(kind: str, width: int, model: WarpModel) -> np.ndarray:
    t = np.arange(width)
    if kind in ("dense_rowstore", "pbp_groupstore"):
        return t
    if kind == "csr_scatter":
        # every output word sits alone in its own transaction
        return t * model.words_per_transaction
    raise ValueError(f"unknown store kind {kind!r}; expected one of {STORE_KINDS}")


def store_efficiency(kind: str, width: int, model: WarpModel = WarpModel()) -> float:
    if width < 1:
        raise ValueError("width must be at least 1")
    words = store_addresses(kind, width, model)
    req, tx = coalesce(words, np.arange(width) // model.warp_size, model)
    return _efficiency(req, tx, model)


def reference_comparison(size: int = 512, fill_in: float = 0.0625,
                      model: WarpModel = WarpModel()) -> list[dict]:
    """Modeled vs reference efficiencies for square diagonal blocks of ``size * fill_in``."""
    nb = round(1 / fill_in)
    pattern = BlockPattern.diagonal(size, size, nb)
    dense = BlockPattern.diagonal(size, size, 1)
    rows = []
    modeled = {
        # column-major dense gemv reads one contiguous column per cycle
        "gemv2N": (load_efficiency(Layout.BCR, dense, model).load_efficiency,
                   store_efficiency("dense_rowstore", size, model)),
        "csrMv": (None, store_efficiency("csr_scatter", size, model)),
    }
    for layout in Layout:
        rep = load_efficiency(layout, pattern, model)
        modeled[layout.name.lower()] = (rep.load_efficiency, rep.store_efficiency)
    for kernel, (gld_ref, gst_ref) in REFERENCE_EFFICIENCY.items():
        gld, gst = modeled[kernel]
        rows.append({"kernel": kernel, "gld_model": gld, "gld_reference": gld_ref,
                     "gst_model": gst, "gst_reference": gst_ref})
    return rows


def format_table(rows: list[dict]) -> str:
    fmt = "{:>8} {:>10} {:>10} {:>10} {:>10}"
    lines = [fmt.format("kernel", "gld_model", "gld_ref", "gst_model", "gst_ref")]
    for row in rows:
        cells = ["-" if v is None else f"{v:.2f}" for v in
                 (row["gld_model"], row["gld_reference"], row["gst_model"], row["gst_reference"])]
        lines.append(fmt.format(row["kernel"], *cells))
    return "\n".join(lines)
