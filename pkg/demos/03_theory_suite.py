"""Run the Monte-Carlo verification suite.

Covers the closed-form population MMD of the Gaussian surrogate, the
second-order shift and its patch-vs-global amplification, finite-sample
concentration with the real/fake separation ordering, and the finite-optimal-K
signal-to-noise law under defect dilution.

By default runs a reduced budget (about 15 seconds); pass --full for the
acceptance-scale budgets (about a minute).
"""

import sys
import time

from mdmf import run_all_checks

full = "--full" in sys.argv[1:]
t0 = time.time()
if full:
    report = run_all_checks(seed=0)
else:
    report = run_all_checks(seed=0, mc_samples=30_000, concentration_trials=1000,
                            snr_images=100, snr_resamples=80, shift_patches=300_000)
print(report.format_table())
print(f"\n{'full' if full else 'reduced'} budget: {time.time() - t0:.1f}s")
sys.exit(0 if report.passed else 1)
