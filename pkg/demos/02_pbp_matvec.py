"""A PBP matrix-vector product against its dense equivalent."""
import numpy as np

from pbpkit import pbp, perm
from pbpkit.blocksparse import BlockPattern, Layout, pack
from pbpkit.pbp import PbpMatrix

rng = np.random.default_rng(1)
n, nb = 16, 4
pattern = BlockPattern.diagonal(n, n, nb)
blocks = [rng.standard_normal((n // nb, n // nb)).astype(np.float32) for _ in range(nb)]
m = PbpMatrix(perm.random_permutation(n, rng), pack(blocks, pattern, Layout.CBR),
              perm.random_permutation(n, rng))

dense = pbp.to_dense(m)
print(f"fill-in {pbp.fill_in(m):.3f}, nonzero slots {pbp.nonzero_slots(m)} of {n * n}")
print("sparsity pattern of the dense view:")
for row in dense != 0:
    print("".join("#" if x else "." for x in row))

x = rng.standard_normal(n).astype(np.float32)
y = pbp.matvec(m, x)
print("max |matvec - dense @ x| =", float(np.abs(y - dense @ x).max()))

# every layout gives bit-identical results
same = all(np.array_equal(pbp.matvec(m.with_layout(lay), x), y) for lay in Layout)
print("bit-identical across layouts:", same)

# the masked dense matrix recovers the same PBP matrix
print("from_masked round trip:", pbp.from_masked(dense, m.p_row, m.p_col, pattern, "cbr") == m)
