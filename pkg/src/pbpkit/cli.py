"""``pbp`` command-line entry point.

Commands::

    pbp gen ROWS COLS --seed S --out W.pbpd
    pbp prune W.pbpd --levels L --mode feedback|feedforward --layout cbr --out M.pbpx
    pbp pack IN --layout bcr --out M.pbpx
    pbp run GRAPH.json INPUT [--out Y.json]
    pbp fuse GRAPH.json --out OPT.json
    pbp simulate --layout brc --size 512 --fill-in 0.0625
    pbp bench --sizes 512 1024 --fill-ins 0.0625 0.125 --reps 100 --out sweep.csv

Every command validates its inputs before writing anything; all writes go
through a temp file and a rename. Exit status is 0 on success, 1 on a
validation or I/O error and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import _binio, bench, graphopt, pbp, perm, prune, simgpu
from .blocksparse import BlockPattern, Layout
from .errors import PbpError

log = logging.getLogger("pbpkit")

LAYOUTS = ("brc", "bcr", "cbr")


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return n


def _report_path(out: str) -> str:
    return os.path.splitext(out)[0] + ".report.json"


def _relabel_path(out: str) -> str:
    return os.path.splitext(out)[0] + ".relabel.json"


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    W = rng.standard_normal((args.rows, args.cols), dtype=np.float32)
    prune.save_dense(W, args.out)
    return 0


def cmd_prune(args) -> int:
    W = prune.load_dense(args.input)
    layout = Layout.parse(args.layout)
    if args.mode == "feedback":
        m, report = prune.recursive_bisect(W, args.levels, seed=args.seed,
                                           budget=args.budget, layout=layout)
    else:
        pattern = BlockPattern.diagonal(W.shape[0], W.shape[1], 1 << args.levels)
        pivots = None
        if args.identity_pivots:
            if not args.allow_identity:
                raise PbpError("identity pivots are refused for feed-forward pruning; "
                               "pass --allow-identity to override")
            pivots = (perm.identity(W.shape[0]), perm.identity(W.shape[1]))
        m, report = prune.feed_forward(W, pattern, seed=args.seed, layout=layout,
                                       pivots=pivots)
    mask = prune.feed_forward_mask(*W.shape, m.pattern, m.p_row, m.p_col)
    check = pbp.from_masked(np.where(mask, W, np.float32(0)), m.p_row, m.p_col,
                            m.pattern, layout)
    if check != m:
        raise PbpError("internal error: pruned matrix does not round-trip")
    report_json = report.to_json(fill_in=pbp.fill_in(m), mode=args.mode,
                                 levels=args.levels, layout=layout.name.lower())
    pbp.save(m, args.out)
    _binio.atomic_write(_report_path(args.out), report_json + "\n")
    print(report_json)
    return 0


def cmd_pack(args) -> int:
    with open(args.input, "rb") as fh:
        buf = fh.read()
    layout = Layout.parse(args.layout)
    if buf[:4] == pbp.MAGIC:
        m = pbp.from_bytes(buf).with_layout(layout)
    elif buf[:4] == prune.DENSE_MAGIC:
        W = prune.dense_from_bytes(buf)
        p_row = perm.load(args.p_row) if args.p_row else perm.identity(W.shape[0])
        p_col = perm.load(args.p_col) if args.p_col else perm.identity(W.shape[1])
        pattern = BlockPattern.diagonal(W.shape[0], W.shape[1], args.blocks)
        m = pbp.from_masked(W, p_row, p_col, pattern, layout)
    else:
        raise PbpError(f"{args.input}: not a PBPX or PBPD file")
    pbp.save(m, args.out)
    return 0


def _read_vector(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] == prune.DENSE_MAGIC:
        return prune.dense_from_bytes(buf).reshape(-1)
    doc = json.loads(buf.decode())
    if isinstance(doc, dict):
        doc = doc.get("output", doc.get("input"))
    return np.asarray(doc, dtype=np.float32).reshape(-1)


def cmd_run(args) -> int:
    g = graphopt.load_graph(args.graph)
    x = _read_vector(args.input)
    y, record = graphopt.execute(g, x)
    doc = json.dumps({"output": [float(v) for v in y], "relabel": record.perm.tolist()})
    if args.out:
        _binio.atomic_write(args.out, json.dumps({"output": [float(v) for v in y]}) + "\n")
        _binio.atomic_write(_relabel_path(args.out), graphopt.relabel_to_json(record) + "\n")
    print(doc)
    return 0


def cmd_fuse(args) -> int:
    g = graphopt.load_graph(args.graph)
    opt, record = graphopt.optimize(g, eliminate_output=not args.keep_output_perm)
    graphopt.save_graph(opt, args.out)
    _binio.atomic_write(_relabel_path(args.out), graphopt.relabel_to_json(record) + "\n")
    flags = graphopt.check_identity_fusion(g)
    print(json.dumps({"pairs": [[list(p), ok] for p, ok in flags],
                      "relabel_identity": record.perm.is_identity()}))
    return 0


def cmd_simulate(args) -> int:
    model = simgpu.WarpModel(args.warp_size, args.transaction_bytes, args.word_bytes)
    width = bench.block_width(args.size, args.fill_in)
    pattern = BlockPattern.diagonal(args.size, args.size, args.size // width)
    report = simgpu.load_efficiency(args.layout, pattern, model)
    table = simgpu.reference_comparison(args.size, args.fill_in, model)
    out = {"layout": args.layout, "size": args.size, "fill_in": args.fill_in,
           "report": json.loads(report.to_json()), "comparison": table}
    text = json.dumps(out, indent=2)
    if args.out:
        _binio.atomic_write(args.out, text + "\n")
    print(text)
    print(simgpu.format_table(table), file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    if args.config:
        with open(args.config) as fh:
            cfg = bench.BenchConfig.from_json(fh.read())
    else:
        cfg = bench.BenchConfig()
    overrides = {k: getattr(args, k) for k in
                 ("sizes", "fill_ins", "layouts", "repetitions", "warmup", "seed")
                 if getattr(args, k) is not None}
    if args.parallel:
        overrides["parallel"] = True
    cfg = bench.BenchConfig(**{**cfg.__dict__, **overrides})
    results = bench.run_sweep(cfg)
    text = bench.to_csv(results)
    if args.out:
        _binio.atomic_write(args.out, text)
        if args.plot:
            bench.plot_sweep(results, args.plot)
    sys.stdout.write(text)
    print("# timings are informational (host CPU)", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pbp", description="PBP block-sparse toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a standard-normal dense matrix (PBPD)")
    p.add_argument("rows", type=_positive)
    p.add_argument("cols", type=_positive)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("prune", help="prune a PBPD matrix into PBPX form")
    p.add_argument("input")
    p.add_argument("--levels", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("feedback", "feedforward"), default="feedback")
    p.add_argument("--layout", choices=LAYOUTS, default="brc")
    p.add_argument("--budget", type=_positive, default=prune.DEFAULT_BUDGET)
    p.add_argument("--identity-pivots", action="store_true",
                   help="feed-forward with identity pivots (needs --allow-identity)")
    p.add_argument("--allow-identity", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("pack", help="re-layout a PBPX or pack a masked PBPD")
    p.add_argument("input")
    p.add_argument("--layout", choices=LAYOUTS, default="brc")
    p.add_argument("--p-row")
    p.add_argument("--p-col")
    p.add_argument("--blocks", type=_positive, default=1,
                   help="number of diagonal blocks when packing a PBPD")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("run", help="execute a layer graph on an input vector")
    p.add_argument("graph")
    p.add_argument("input", help="JSON number array or 1-row PBPD file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fuse", help="apply cross-layer permutation rewrites")
    p.add_argument("graph")
    p.add_argument("--keep-output-perm", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("simulate", help="coalescing model against reference GPU measurements")
    p.add_argument("--layout", choices=LAYOUTS, default="cbr")
    p.add_argument("--size", type=_positive, default=512)
    p.add_argument("--fill-in", type=float, default=0.0625)
    p.add_argument("--warp-size", type=_positive, default=32)
    p.add_argument("--transaction-bytes", type=_positive, default=32)
    p.add_argument("--word-bytes", type=_positive, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="size x fill-in latency sweep (CSV)")
    p.add_argument("--config", help="JSON file with BenchConfig fields")
    p.add_argument("--sizes", type=_positive, nargs="+")
    p.add_argument("--fill-in", "--fill-ins", dest="fill_ins", type=float, nargs="+")
    p.add_argument("--layout", "--layouts", dest="layouts", choices=LAYOUTS, nargs="+")
    p.add_argument("--reps", dest="repetitions", type=_positive)
    p.add_argument("--warmup", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--plot", help="PNG path for the latency plot (with --out)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PbpError, OSError, ValueError) as exc:
        print(f"pbp {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
