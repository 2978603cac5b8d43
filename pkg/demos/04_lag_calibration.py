"""Choosing the history length.

Conditional entropy of symbolised AR(1) data falls with history length.
With short samples the drop is mostly overfitting, so longer histories look
better than they are.  Large samples show the true curve, which is flat
beyond one lag for a first-order process.
"""

from spillnet import calibrate_lags

cal = calibrate_lags(max_lag=6, seed=0)
print("sample size | " + "  ".join(f"lag {lag}" for lag in cal.lags))
for n, row in zip(cal.sample_sizes, cal.ce_surface):
    print(f"{n:>11} | " + "  ".join(f"{v:.3f}" for v in row))
print(f"recommended lag at n={cal.reference_size}: {cal.recommended_lag}")
