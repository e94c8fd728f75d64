"""How the adaptive advantage scales with the number of photons.

At a strongly overlapping working point (c^2 = 0.883) both strategies get
worse as the block grows -- there are more hypotheses to tell apart -- but
the adaptive-minus-fixed gap barely moves.
"""

from qchange.experiments import sweep_n

c2 = 0.883
n_values = (5, 10, 20, 40, 80)
table = sweep_n(n_values, c2, trials=8000, master_seed=31)
rows = {(r.axis, r.strategy): r for r in table.rows}

print(f"c^2 = {c2}, 8000 trials per length")
print()
print("  n     BL mean    BI mean    BI - BL")
for n in n_values:
    bl = rows[(float(n), "BL")]
    bi = rows[(float(n), "BI")]
    gap = rows[(float(n), "BI_minus_BL")]
    print(f"{n:4d}    {bl.mean:.4f}     {bi.mean:.4f}     "
          f"{gap.mean:+.4f} +- {gap.std_error:.4f}")

gaps = [rows[(float(n), "BI_minus_BL")].mean for n in n_values]
print()
print(f"gap spread across lengths: {max(gaps) - min(gaps):.4f}")
