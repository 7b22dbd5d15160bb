"""Latency sweep of PBP matvec against dense and CSR baselines.

Timings are wall-clock on the host CPU and purely informational; the
machine-independent quantity is the FLOP count, ``2 * nonzero slots``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import pbp, perm
from .blocksparse import BlockPattern, Layout, pack
from .errors import PatternError, PbpError
from .pbp import PbpMatrix

log = logging.getLogger(__name__)

DEFAULT_SIZES = (64, 128, 256, 512, 1024, 2048, 4096)
DEFAULT_FILL_INS = (0.03125, 0.0625, 0.125, 0.25)

CSV_COLUMNS = ("size", "fill_in", "layout", "pbp_ns", "dense_ns", "sparse_ns",
               "speedup_vs_dense", "speedup_vs_sparse", "flops",
               "pbp_median_ns", "dense_median_ns", "sparse_median_ns", "comparable")


class VerificationError(PbpError):
    """PBP output disagrees with the dense baseline before timing."""


@dataclass
class BenchConfig:
    sizes: tuple = DEFAULT_SIZES
    fill_ins: tuple = DEFAULT_FILL_INS
    layouts: tuple = tuple(Layout)
    repetitions: int = 2500
    warmup: int = 100
    seed: int = 0
    rtol: float = 1e-5
    parallel: bool = False

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        self.fill_ins = tuple(float(f) for f in self.fill_ins)
        self.layouts = tuple(Layout.parse(x) for x in self.layouts)
        for size in self.sizes:
            for f in self.fill_ins:
                block_width(size, f)

    @classmethod
    def from_json(cls, text: str) -> "BenchConfig":
        doc = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def block_width(size: int, fill_in: float) -> int:
    """Width of the identical square diagonal blocks realizing ``fill_in``."""
    if not 0 < fill_in <= 1:
        raise PatternError(f"fill-in {fill_in} outside (0, 1]")
    width = size * fill_in
    if width != int(width) or int(width) < 1 or size % int(width):
        raise PatternError(f"size {size} with fill-in {fill_in} is not realizable "
                           "as identical square diagonal blocks")
    return int(width)


def make_synthetic(size: int, fill_in: float, layout=Layout.CBR, seed=0) -> PbpMatrix:
    width = block_width(size, fill_in)
    rng = np.random.default_rng(seed)
    pattern = BlockPattern.diagonal(size, size, size // width)
    blocks = [rng.standard_normal((width, width), dtype=np.float32)
              for _ in range(pattern.n_blocks)]
    p_row = perm.random_permutation(size, rng)
    p_col = perm.random_permutation(size, rng)
    return PbpMatrix(p_row, pack(blocks, pattern, layout), p_col)


class CsrMatrix:
    """Row-pointer / column-index storage with a vectorized matvec."""

    def __init__(self, dense):
        dense = np.asarray(dense, dtype=np.float32)
        rows, cols = np.nonzero(dense)
        self.shape = dense.shape
        self.data = dense[rows, cols]
        self.indices = cols
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=dense.shape[0]))])
        starts = self.indptr[:-1]
        self._nonempty = np.flatnonzero(self.indptr[1:] > starts)
        self._starts = starts[self._nonempty]

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    def matvec(self, x) -> np.ndarray:
        out = np.zeros(self.shape[0], dtype=np.float32)
        if self.nnz:
            prod = self.data * x[self.indices]
            out[self._nonempty] = np.add.reduceat(prod, self._starts)
        return out


@dataclass
class BenchResult:
    size: int
    fill_in: float
    layout: str
    pbp_ns: float
    dense_ns: float
    sparse_ns: float
    speedup_vs_dense: float
    speedup_vs_sparse: float
    flops: int
    pbp_median_ns: float
    dense_median_ns: float
    sparse_median_ns: float
    comparable: bool = True
    samples: dict = field(default_factory=dict, repr=False)


def _time(fn, x, repetitions: int, warmup: int) -> np.ndarray:
    for _ in range(warmup):
        fn(x)
    out = np.empty(repetitions, dtype=np.float64)
    clock = time.perf_counter_ns
    for k in range(repetitions):
        t0 = clock()
        fn(x)
        out[k] = clock() - t0
    return out


def verify_cell(m: PbpMatrix, dense: np.ndarray, csr: CsrMatrix, x: np.ndarray,
                rtol: float) -> None:
    ref = dense @ x
    scale = max(float(np.abs(ref).max()), np.finfo(np.float32).tiny)
    for name, y in (("pbp", pbp.matvec(m, x)), ("csr", csr.matvec(x))):
        err = float(np.abs(y - ref).max()) / scale
        if not err <= rtol:
            raise VerificationError(
                f"{name} output deviates from dense by {err:.3g} (relative) "
                f"for {m!r}")
    first = pbp.matvec(m, x)
    if not np.array_equal(first, pbp.matvec(m, x)):
        raise VerificationError("PBP matvec is not deterministic across calls")


def run_cell(size: int, fill_in: float, layout: Layout, cfg: BenchConfig,
             comparable: bool = True) -> BenchResult:
    seed = np.random.SeedSequence([cfg.seed, size, int(round(fill_in * 2**20))])
    m_seed, x_seed = seed.spawn(2)
    m = make_synthetic(size, fill_in, layout, m_seed)
    dense = np.ascontiguousarray(pbp.to_dense(m))
    csr = CsrMatrix(dense)
    x = np.random.default_rng(x_seed).standard_normal(size, dtype=np.float32)
    verify_cell(m, dense, csr, x, cfg.rtol)

    t_pbp = _time(lambda v: pbp.matvec(m, v), x, cfg.repetitions, cfg.warmup)
    t_dense = _time(lambda v: dense @ v, x, cfg.repetitions, cfg.warmup)
    t_csr = _time(csr.matvec, x, cfg.repetitions, cfg.warmup)
    mean = lambda t: float(t.mean())  # noqa: E731
    med = lambda t: float(np.median(t))  # noqa: E731
    return BenchResult(
        size=size, fill_in=fill_in, layout=layout.name.lower(),
        pbp_ns=mean(t_pbp), dense_ns=mean(t_dense), sparse_ns=mean(t_csr),
        speedup_vs_dense=mean(t_dense) / mean(t_pbp),
        speedup_vs_sparse=mean(t_csr) / mean(t_pbp),
        flops=2 * pbp.nonzero_slots(m),
        pbp_median_ns=med(t_pbp), dense_median_ns=med(t_dense), sparse_median_ns=med(t_csr),
        comparable=comparable,
    )


def _worker_cap() -> int:
    env = os.environ.get("PBP_THREADS")
    cap = os.cpu_count() or 1
    if env:
        cap = max(1, min(cap, int(env)))
    return cap


def run_sweep(cfg: BenchConfig) -> list[BenchResult]:
    """Run every (size, fill-in, layout) cell; results in grid order.

    A cell whose numerical gate fails raises :class:`VerificationError`
    naming the cell.
    """
    cells = [(s, f, lay) for s in cfg.sizes for f in cfg.fill_ins for lay in cfg.layouts]

    def one(cell):
        s, f, lay = cell
        log.info("bench cell size=%d fill_in=%g layout=%s", s, f, lay.name)
        try:
            return run_cell(s, f, lay, cfg, comparable=not cfg.parallel)
        except VerificationError as exc:
            raise VerificationError(f"cell (size={s}, fill_in={f}, layout={lay.name}): {exc}") from exc

    if cfg.parallel and _worker_cap() > 1:
        with ThreadPoolExecutor(max_workers=_worker_cap()) as pool:
            return list(pool.map(one, cells))
    return [one(c) for c in cells]


def to_csv(results: list[BenchResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        d = asdict(r)
        w.writerow([d[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def latency_inversions(results: list[BenchResult], min_size: int = 512) -> dict:
    """Count, per (size, layout), fill-in steps where median PBP latency went down as fill-in rose."""
    series: dict = {}
    for r in results:
        if r.size >= min_size:
            series.setdefault((r.size, r.layout), []).append((r.fill_in, r.pbp_median_ns))
    out = {}
    for key, pts in series.items():
        pts.sort()
        lat = [t for _, t in pts]
        out[key] = sum(1 for a, b in zip(lat, lat[1:]) if b <= a)
    return out


def plot_sweep(results: list[BenchResult], path) -> None:
    """Median PBP latency against fill-in, one line per (size, layout)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 5))
    series: dict = {}
    for r in results:
        series.setdefault((r.size, r.layout), []).append((r.fill_in, r.pbp_median_ns))
    for (size, layout), pts in sorted(series.items()):
        pts.sort()
        ax.plot([100 * f for f, _ in pts], [t / 1e3 for _, t in pts], marker="o",
                label=f"{size} {layout}")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("fill-in (%)")
    ax.set_ylabel("median PBP matvec latency (us)")
    ax.set_title("PBP matvec latency on host CPU (informational)")
    ax.legend(fontsize=6, ncol=3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
