"""
When does a flash cache pay for itself?
=======================================

theta is the fraction of the database that must fit in the flash cache for
the cache to be cheaper than adding more disks. It depends on how much extra
throughput (delta) is wanted and on the access cost of flash relative to disk.
"""

import numpy as np

from facecache.analysis import BreakEvenParams, break_even_theta, params_from_profiles, theta_for_exponent

deltas = np.array([0.1, 0.25, 0.5, 1.0, 2.0])

for name, disk in (("single disk", "disk1"), ("8-disk RAID", "raid8")):
    p = params_from_profiles(1.0, flash="mlc", disk=disk)
    print(f"{name}: exponent {p.exponent:.4f}")
    print("   ", [round(break_even_theta(params_from_profiles(d, disk=disk)), 4) for d in deltas])

# the flash/disk ratio is all that matters, so the exponent can be given directly
print("exponent 1.006:", np.round([theta_for_exponent(d, 1.006) for d in deltas], 4))
print("exponent 1.025:", np.round([theta_for_exponent(d, 1.025) for d in deltas], 4))

# a slower flash device pushes the break-even point up
for cf in (0.01, 0.1, 0.3):
    print(f"c_flash/c_disk = {cf}:", round(break_even_theta(BreakEvenParams(1.0, 1.0, cf)), 4))
