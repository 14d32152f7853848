"""
Bigger flash cache, which policy gains?
=======================================

Five flash sizes, four replacement policies. LC is the LRU-2 baseline that
overwrites pages in place; the other three append to a FIFO queue.
Takes about half a minute.
"""

from dataclasses import replace

import numpy as np

from facecache.engine import EngineConfig
from facecache.workload import WorkloadSpec, run

db = 16384
spec = WorkloadSpec(op_count=20000, write_fraction=0.3, skew=0.99, hot_region=0.25, db_pages=db, seed=1)
base = EngineConfig(db_pages=db, dram_frames=128, scan_depth=16)

sizes = (np.array([0.05, 0.1, 0.15, 0.2, 0.3]) * db).astype(int)
policies = ["lc", "gsc", "face", "gr"]

hit = np.zeros((len(policies), len(sizes)))
tput = np.zeros_like(hit)
for i, p in enumerate(policies):
    for j, n in enumerate(sizes):
        r = run(spec, replace(base, policy=p, flash_frames=int(n)))
        hit[i, j] = r.flash_hit_rate
        tput[i, j] = r.sim_tput

np.set_printoptions(precision=3, suppress=True)
print("flash frames:", sizes)
print("hit rate")
for p, row in zip(policies, hit):
    print(f"  {p:5s}", row)
print("ops/s")
for p, row in zip(policies, tput):
    print(f"  {p:5s}", row.round())

# LC hits more often, yet stalls: every hit and every write is a random flash
# I/O, and the device runs out of IOPS. The FIFO variants write in big
# sequential chunks and keep climbing.
print("LC last-step gain:  %.1f%%" % (100 * (tput[0, -1] / tput[0, -2] - 1)))
print("GSC last-step gain: %.1f%%" % (100 * (tput[1, -1] / tput[1, -2] - 1)))
