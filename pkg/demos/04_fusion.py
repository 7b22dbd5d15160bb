"""Folding permutations across layers and relabeling the output."""
import numpy as np

from pbpkit import graphopt, perm
from pbpkit.blocksparse import BlockPattern, pack
from pbpkit.pbp import PbpMatrix

rng = np.random.default_rng(3)


def layer(n_out, n_in, nb):
    pattern = BlockPattern.diagonal(n_out, n_in, nb)
    blocks = [rng.standard_normal((b.rows, b.cols)).astype(np.float32) for b in pattern.blocks]
    return PbpMatrix(perm.random_permutation(n_out, rng), pack(blocks, pattern, "cbr"),
                     perm.random_permutation(n_in, rng))


widths = [32, 64, 64, 10]
mats = [layer(widths[k + 1], widths[k], 2) for k in range(3)]
biases = [rng.standard_normal(w).astype(np.float32) for w in widths[1:]]
g = graphopt.chain(mats, biases, final_softmax=True)
print("fusable pairs:", graphopt.fusable_pairs(g))

opt, record = graphopt.optimize(g)
for k, node in enumerate(opt.nodes):
    if isinstance(node, graphopt.PbpLayer):
        print(f"node {k}: row perm identity={node.matrix.p_row.is_identity()}")

x = rng.standard_normal(32).astype(np.float32)
y = graphopt.execute(g, x)[0]
y_opt, rec = graphopt.execute(opt, x)
print("max |restored - original| =", float(np.abs(rec.restore(y_opt) - y).max()))
print("same argmax:", int(np.argmax(y)) == int(np.argmax(rec.restore(y_opt))))

# a consumer whose column pivot undoes the producer's row pivot fuses to identity
a = mats[1].with_pivots(p_col=perm.inverse(mats[0].p_row))
print("identity fusion:", graphopt.check_identity_fusion(graphopt.chain([mats[0], a])))
