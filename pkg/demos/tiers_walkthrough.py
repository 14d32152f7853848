"""
Following a page through the tiers
==================================

A toy store: four DRAM frames, eight flash frames, a 32-page database.
Watch where a dirty page goes when DRAM pushes it out.
"""

import tempfile

from facecache import Engine, EngineConfig

work = tempfile.mkdtemp()
e = Engine(EngineConfig(db_pages=32, dram_frames=4, flash_frames=8, scan_depth=2, page_size=256), work)

# write page 7, then read four other pages so 7 falls off the DRAM tail
lsn = e.write(7)
for p in (1, 2, 3, 4):
    e.read(p)

print("in DRAM:", list(e.dram.frames))
print("flash queue (page, lsn, dirty, valid):")
for m in e.flash.live():
    print("   ", m.page_id, m.lsn, m.dirty, m.valid)

# the disk still has the old version, flash holds the new one
print("disk lsn of page 7:", e.disk.read(7).page_lsn, " latest:", lsn)

# reading it again comes back from flash, not disk
before = e.stats.flash_hits
e.read(7)
print("flash hit on re-read:", e.stats.flash_hits - before == 1)

# update it in DRAM and push it out again: a second version goes to the rear
# and the first one is marked invalid
e.write(7)
for p in (5, 6, 8, 9):
    e.read(p)
print([(m.page_id, m.lsn, m.valid) for m in e.flash.live() if m.page_id == 7])

e.close()
