"""Modeled load/store efficiency of the three layouts."""
from pbpkit import simgpu
from pbpkit.blocksparse import BlockPattern, Layout

# 512x512 with 16 diagonal blocks of 32x32 (6.25% fill-in)
pattern = BlockPattern.diagonal(512, 512, 16)
for layout in Layout:
    rep = simgpu.load_efficiency(layout, pattern)
    print(f"{layout.name}: load {rep.load_efficiency:6.2f}%  "
          f"store {rep.store_efficiency:6.2f}%  transactions {rep.transactions}")

print()
print(simgpu.format_table(simgpu.reference_comparison(512, 0.0625)))

# a narrower warp changes nothing for BRC: each thread still owns its own segment
small = simgpu.WarpModel(warp_size=8)
print("\nBRC with 8-thread warps:", simgpu.load_efficiency("brc", pattern, small).load_efficiency)
