"""
Pulling the plug
================

Run a workload, kill the engine in the middle, reopen the files and see how
much of the cache survived. Pages updated since the last checkpoint would be
redone by the database; most of them can be read back from flash.
"""

import tempfile

from facecache.engine import Engine, EngineConfig
from facecache.recovery import crash, restart
from facecache.workload import WorkloadSpec, apply_op, generate_trace

cfg = EngineConfig(db_pages=4096, dram_frames=64, flash_frames=1024, segment_capacity=128)
spec = WorkloadSpec(op_count=8000, write_fraction=0.3, skew=0.99, hot_region=0.25, db_pages=4096, seed=5)

work = tempfile.mkdtemp()
e = Engine(cfg, work, checked=True)
written = set()
for n, op in enumerate(generate_trace(spec)):
    if n == 5000:
        e.db_checkpoint()
        written.clear()
    apply_op(e, op)
    if op.kind == "W":
        written.add(op.page)

image = crash(e)
e, stats = restart(image, checked=True)
print("segments read:", stats.segments_read, " entries loaded:", stats.entries_loaded)
print("frames parsed to rebuild lost entries:", stats.pages_scanned, "(at most", 2 * cfg.segment_capacity, ")")

# which redo pages would come straight from flash?
in_flash = sum(e.flash.valid_meta(p) is not None for p in written)
print(f"redo set {len(written)} pages, {in_flash} of them in flash")

# and they come back at the right version
for p in written:
    e.read(p)
print("all reads fresh")
e.close()
