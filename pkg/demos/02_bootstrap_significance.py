"""Is an estimated transfer entropy larger than chance?

The source is resampled from its own fitted Markov chain, which keeps its
persistence but breaks any link to the target.  The p-value is the share
of resampled estimates at least as large as the observed one.
"""

import numpy as np

from spillnet import symbolize, te_pvalue

rng = np.random.default_rng(1)
n = 500

y = rng.standard_normal(n)
z = np.empty(n)
z[0] = 0.0
z[1:] = 0.4 * y[:-1] + rng.standard_normal(n - 1)
coupled = te_pvalue(symbolize(y), symbolize(z), n_boot=300, rng=rng)
print(f"coupled pair:     TE {coupled.te_observed:.4f} bits, bootstrap mean "
      f"{coupled.boot_mean:.4f}, p = {coupled.p_value:.3f}")

a, b = symbolize(rng.standard_normal(n)), symbolize(rng.standard_normal(n))
indep = te_pvalue(a, b, n_boot=300, rng=rng)
print(f"independent pair: TE {indep.te_observed:.4f} bits, bootstrap mean "
      f"{indep.boot_mean:.4f}, p = {indep.p_value:.3f}")

# under independence about 10% of pairs fall below alpha = 0.10
hits = [te_pvalue(rng.integers(1, 4, n), rng.integers(1, 4, n), n_boot=100, rng=rng).p_value < 0.10
        for _ in range(100)]
print(f"rejection rate over 100 independent pairs: {np.mean(hits):.2f}")
