"""Feed-forward vs feed-back pruning of a dense weight matrix."""
import numpy as np

from pbpkit import pbp, prune
from pbpkit.blocksparse import BlockPattern

rng = np.random.default_rng(2)
n = 64
# hide a 4-block structure behind random row/column shuffles
W = 0.1 * rng.standard_normal((n, n)).astype(np.float32)
for k in range(4):
    W[16 * k:16 * (k + 1), 16 * k:16 * (k + 1)] += rng.standard_normal((16, 16))
W = W[rng.permutation(n)][:, rng.permutation(n)]

pattern = BlockPattern.diagonal(n, n, 4)
m_ff, rep_ff = prune.feed_forward(W, pattern, seed=0)
m_fb, rep_fb = prune.recursive_bisect(W, levels=2, seed=0)

print(f"fill-in after two levels: {pbp.fill_in(m_fb)}")
print(f"feed-forward (random pivots) keeps {rep_ff.retained_mass_fraction:.1%} of |W|")
print(f"feed-back (greedy bisection) keeps {rep_fb.retained_mass_fraction:.1%} of |W|")
print(f"greedy accepted {rep_fb.accepted_moves} moves")

# one bisection step on a small matrix
small = rng.standard_normal((8, 8))
p_row, p_col, rep = prune.greedy_bisect(small, seed=1)
print(f"8x8 bisection: mass {rep.objective_initial:.2f} -> {rep.objective_final:.2f}")
