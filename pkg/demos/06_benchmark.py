"""A small latency sweep; pass a PNG path to also plot it."""
import sys

from pbpkit import bench

cfg = bench.BenchConfig(sizes=(256, 512, 1024), fill_ins=(0.03125, 0.0625, 0.125, 0.25),
                        layouts=("cbr",), repetitions=50, warmup=5)
results = bench.run_sweep(cfg)
print(f"{'size':>5} {'fill':>7} {'pbp us':>8} {'dense us':>9} {'csr us':>8} {'flops':>9}")
for r in results:
    print(f"{r.size:5d} {r.fill_in:7.4f} {r.pbp_median_ns / 1e3:8.1f} "
          f"{r.dense_median_ns / 1e3:9.1f} {r.sparse_median_ns / 1e3:8.1f} {r.flops:9d}")
print("inversions per series:", bench.latency_inversions(results))
if len(sys.argv) > 1:
    bench.plot_sweep(results, sys.argv[1])
    print("plot written to", sys.argv[1])
