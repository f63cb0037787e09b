"""Counter-based Brownian paths and the common-path coupling.

Every path is keyed by (experiment seed, path index), so any path can be
regenerated on its own, in any order, on any worker.  Coarse levels are
read off the finest path, never redrawn.
"""
import numpy as np

from emlab.rng_paths import PathSeed, aggregate, generate_batch, generate_tableau, restrict

finest = 2**10
tab = generate_tableau(PathSeed(2024, 17), d=1, finest_n=finest, T=1.0)
print("finest steps:", tab.steps, " W_1 =", tab.path[-1, 0])

# Path 17 again, this time as column 3 of a batch: bit-identical
batch = generate_batch(2024, [3, 9, 11, 17], 1, finest, 1.0)
print("batch column equals the standalone path:", np.array_equal(batch[:, 3], tab.path))

# Restriction to coarser levels is plain subsampling of the same path
for m in (4, 16, 64):
    coarse = restrict(tab, m)
    print(f"level {m:3d}: {coarse.shape[0] - 1:3d} steps, W_1 = {coarse[-1, 0]:+.15f}")

# Block sums of the fine increments give the same coarse increments (up to rounding)
gap = np.max(np.abs(np.cumsum(aggregate(tab, 16), axis=0) - restrict(tab, 16)[1:]))
print("aggregate vs restrict, max gap:", gap)

# A quick look at the law: W_1 over 20000 paths
W1 = generate_batch(7, range(20000), 1, 64, 1.0)[-1, :, 0]
print(f"W_1 sample mean {W1.mean():+.4f}, variance {W1.var():.4f}  (expect 0, 1)")
