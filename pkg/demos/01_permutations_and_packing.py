"""Permutations as index arrays and the three packed block layouts."""
import numpy as np

from pbpkit import blocksparse, perm
from pbpkit.blocksparse import BlockPattern, Layout

rng = np.random.default_rng(0)

# A permutation is a gather: apply(p, v)[i] == v[p.idx[i]]
p = perm.random_permutation(6, rng)
v = np.arange(6) * 10
print("p        ", p.idx)
print("apply    ", perm.apply(p, v))
print("matrix@v ", (p.matrix() @ v).astype(int))

q = perm.random_permutation(6, rng)
pq = perm.compose(p, q)
print("compose == matrix product:", np.array_equal(pq.matrix(), p.matrix() @ q.matrix()))
print("inverse undoes apply:", np.array_equal(perm.apply(perm.inverse(p), perm.apply(p, v)), v))

# Two 2x3 diagonal blocks in a 4x6 block matrix
pattern = BlockPattern.diagonal(4, 6, 2)
blocks = [np.arange(6, dtype=np.float32).reshape(2, 3) + 10 * k for k in range(2)]
for layout in Layout:
    packed = blocksparse.pack(blocks, pattern, layout)
    print(f"{layout.name}:", packed.data.astype(int))

# round trip through any layout restores the logical blocks
packed = blocksparse.pack(blocks, pattern, "cbr")
print("unpack ok:", all(np.array_equal(a, b) for a, b in zip(blocksparse.unpack(packed), blocks)))
