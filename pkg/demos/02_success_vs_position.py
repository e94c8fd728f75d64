"""Success probability as a function of where the change happens.

At n=20 and c^2=0.604 the adaptive strategy sits near 0.58 for interior
positions but climbs above 0.7 when the change is at the very start or the
very end of the block, where one hypothesis side has overwhelming evidence.
The fixed-basis strategy stays flat at 1 - c^2 until the trivial last slot.
"""

from qchange.experiments import sweep_k

n, c2 = 20, 0.604
table = sweep_k(n, c2, trials_per_k=4000, master_seed=11)
rows = {(r.axis, r.strategy): r for r in table.rows}

print(f"n = {n}, c^2 = {c2}, 4000 trials per position")
print()
print(" k    BL mean    BI mean    global-bound")
for k in range(1, n + 1):
    bl = rows[(float(k), "BL")]
    bi = rows[(float(k), "BI")]
    srm = rows[(float(k), "SRM")]
    marker = "  <- endpoint" if k in (1, n) else ""
    print(f"{k:2d}    {bl.mean:.4f}     {bi.mean:.4f}     {srm.mean:.4f}{marker}")

bulk = [rows[(float(k), "BI")].mean for k in range(3, n - 1)]
print()
print(f"BI bulk (k=3..{n - 2}) average: {sum(bulk) / len(bulk):.4f}")
print(f"BI endpoints: k=1 {rows[(1.0, 'BI')].mean:.4f}, k={n} {rows[(float(n), 'BI')].mean:.4f}")
