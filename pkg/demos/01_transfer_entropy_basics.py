"""Transfer entropy on a pair of coupled series.

A target that copies half of yesterday's source should carry more
information flowing from the source than back towards it.
"""

import numpy as np

from spillnet import conditional_entropy, symbolize, te_estimate

rng = np.random.default_rng(0)
n = 1000
y = rng.standard_normal(n)
z = np.empty(n)
z[0] = rng.standard_normal()
z[1:] = 0.5 * y[:-1] + rng.standard_normal(n - 1)

# three quantile states per series
sy, sz = symbolize(y), symbolize(z)
print("state counts (source):", sy.counts())
print("thresholds (source):", np.round(sy.thresholds, 4))

fwd = te_estimate(sy, sz)
back = te_estimate(sz, sy)
print(f"TE(Y -> Z) = {fwd.te_bits:.4f} bits, normalised {fwd.te_normalized:.4f}")
print(f"TE(Z -> Y) = {back.te_bits:.4f} bits, normalised {back.te_normalized:.4f}")

# longer target histories never raise the conditional entropy
for k in (1, 2, 3):
    print(f"H(z_t+1 | k={k} past states) = {conditional_entropy(sz.symbols, k, start=3):.4f} bits")
