"""Watch the adaptive agent localize the change point in one trial.

The source emits 12 photons; the first 4 are |H> and the rest are the
rotated state with squared overlap 0.604.  After every measurement the
agent's posterior over "the change happened at position k" is printed as a
bar per hypothesis.
"""

import numpy as np

from qchange.strategies import SourceConfig, bi_run

config = SourceConfig(n=12, k=5, c_squared=0.604)
rng = np.random.default_rng(7)
record = bi_run(config, rng, seed=7)

print(f"true change position k = {config.k}, overlap c^2 = {config.c_squared}")
print(f"outcome string: {''.join(map(str, record.outcomes))}")
print()

for prior in record.prior_history:
    step = prior.step
    label = "start   " if step == 1 else f"after {step - 1:2d}"
    bars = " ".join(f"{'#' * int(round(20 * eta)):<6.6s}" for eta in prior.eta)
    print(f"{label}  {bars}")

print()
print("positions:" + "".join(f" {k:<6d}" for k in range(1, config.n + 1)))
print(f"\nguess = {record.guess}  ({'correct' if record.success else 'wrong'})")
