import copy
import random

import pytest

from facecache.devices import Device, Kind
from facecache.dram import DramBuffer, DramFrame, Source
from facecache.engine import Engine, EngineConfig
from facecache.flash import EmptyQueue, FlashConfig, extents
from facecache.page import PageImage

from conftest import SMALL_PAGE
from reference import Ref, engine_dram_state, engine_flash_state


def pg(pid, lsn):
    return PageImage(pid, lsn, bytes(SMALL_PAGE - 16))


def frame(pid, lsn, dirty=False, fdirty=False):
    return DramFrame(pg(pid, lsn), dirty, fdirty)


def state(fc):
    return [(m.page_id, m.lsn, m.dirty, m.valid) for m in fc.live()]


# -- admission guard -----------------------------------------------------

def test_clean_duplicate_is_discarded_without_io(make_flash):
    fc = make_flash()
    fc.admit(frame(1, 5))
    writes = len(fc.image.write_log)
    out = fc.admit(frame(1, 5))
    assert out.freed == 0 and not out.flushed
    assert len(fc.image.write_log) == writes
    assert state(fc) == [(1, 5, False, True)]


def test_fdirty_page_supersedes_cached_version(make_flash):
    fc = make_flash()
    fc.admit(frame(1, 5))
    fc.admit(frame(1, 6, dirty=True, fdirty=True))
    assert state(fc) == [(1, 5, False, False), (1, 6, True, True)]
    meta, page = fc.lookup(1)
    assert page.page_lsn == 6 and meta.referenced


def test_uncached_clean_page_is_enqueued(make_flash):
    fc = make_flash()
    fc.admit(frame(3, 0))
    assert state(fc) == [(3, 0, False, True)]


def test_dirty_but_not_fdirty_duplicate_is_skipped(make_flash):
    # fetched from flash while flash-dirty, never updated: flash already has it
    fc = make_flash()
    fc.admit(frame(2, 9, dirty=True, fdirty=True))
    fc.admit(frame(2, 9, dirty=True, fdirty=False))
    assert state(fc) == [(2, 9, True, True)]


def test_invalidate_is_metadata_only(make_flash):
    fc = make_flash()
    fc.admit(frame(4, 1))
    before = fc.acc.report().as_dict()
    fc.invalidate(4)
    fc.invalidate(99)
    assert fc.acc.report().as_dict() == before
    assert fc.lookup(4) is None
    assert 4 not in fc.valid


# -- flash eviction rule --------------------------------------------------

@pytest.mark.parametrize("dirty,valid,flushes", [(True, True, 1), (True, False, 0), (False, True, 0),
                                                 (False, False, 0)])
def test_evict_basic_flushes_only_dirty_valid(make_flash, dirty, valid, flushes):
    fc = make_flash()
    fc.admit(frame(1, 3, dirty=dirty, fdirty=dirty))
    if not valid:
        fc.invalidate(1)
    out = fc.evict_basic()
    assert out.freed == 1
    assert len(out.flushed) == flushes
    if flushes:
        assert out.flushed[0].page_lsn == 3
        assert fc.acc.pages(Device.FLASH, Kind.SEQ_READ) == 1
    assert fc.occupancy == 0


def test_evict_empty_queue(make_flash):
    fc = make_flash()
    for evict in (fc.evict_basic, fc.evict_group_replacement, fc.evict_group_second_chance):
        with pytest.raises(EmptyQueue):
            evict()


def test_replacement_runs_when_full(make_flash):
    fc = make_flash(capacity=3)
    for i in range(3):
        fc.admit(frame(i, i + 1, dirty=True, fdirty=True))
    out = fc.admit(frame(9, 10))
    assert [p.page_id for p in out.flushed] == [0]
    assert [s[0] for s in state(fc)] == [1, 2, 9]


def test_superseded_version_in_replacement_batch_is_not_flushed(make_flash):
    fc = make_flash(capacity=2)
    fc.admit(frame(1, 1, dirty=True, fdirty=True))
    fc.admit(frame(2, 2, dirty=True, fdirty=True))
    out = fc.admit(frame(1, 3, dirty=True, fdirty=True))
    assert out.flushed == []
    assert state(fc) == [(2, 2, True, True), (1, 3, True, True)]


# -- group replacement ----------------------------------------------------

def test_group_replacement_batch(make_flash):
    fc = make_flash(capacity=64, replacement="gr", scan_depth=64)
    rng = random.Random(0)
    dirty_pages = set(rng.sample(range(64), 10))
    for i in range(64):
        fc.admit(frame(i, i + 1, dirty=i in dirty_pages, fdirty=i in dirty_pages))
    out = fc.evict_group_replacement()
    assert out.freed == 64
    assert sorted(p.page_id for p in out.flushed) == sorted(dirty_pages)
    assert fc.acc.counters[(Device.FLASH, Kind.SEQ_READ)].ops == 1


def test_group_replacement_across_wrap_is_two_extents(make_flash):
    fc = make_flash(capacity=8, replacement="gr", scan_depth=4)
    for i in range(6):
        fc.admit(frame(i, i + 1))
    for _ in range(6):
        fc.evict_basic()
    for i in range(6, 10):
        fc.admit(frame(i, i + 1, dirty=True, fdirty=True))  # slots 6, 7, 0, 1
    fc.acc.reset()
    out = fc.evict_group_replacement()
    assert [p.page_id for p in out.flushed] == [6, 7, 8, 9]
    ctr = fc.acc.counters[(Device.FLASH, Kind.SEQ_READ)]
    assert ctr.ops == 2 and ctr.bytes == 4 * SMALL_PAGE
    assert extents([6, 7, 0, 1]) == [2, 2]


def _random_fill(fc, rng, n, pages=12):
    lsn = 0
    for _ in range(n):
        lsn += 1
        d = rng.random() < 0.5
        pid = rng.randrange(pages)
        if rng.random() < 0.3 and pid in fc.valid:
            fc.lookup(pid)
        fc.admit(frame(pid, lsn, dirty=d, fdirty=d))


def test_group_replacement_equals_repeated_basic_evictions(make_flash):
    rng = random.Random(1)
    for trial in range(100):
        cap = rng.randint(2, 24)
        depth = rng.randint(1, cap)
        seed = rng.random()
        a = make_flash(capacity=cap, replacement="gr", scan_depth=depth)
        b = make_flash(capacity=cap, replacement="face", scan_depth=depth)
        _random_fill(a, random.Random(seed), rng.randint(1, 3 * cap))
        _random_fill(b, random.Random(seed), 0)
        # make b an exact copy of a's queue, then evict both ways
        b.slots = copy.deepcopy(a.slots)
        b.front, b.rear, b.occupancy = a.front, a.rear, a.occupancy
        b.versions = copy.deepcopy(a.versions)
        b.valid = dict(a.valid)
        b.image = a.image
        out_a = a.evict_group_replacement()
        flushed_b = []
        for _ in range(min(depth, b.occupancy)):
            flushed_b += b.evict_basic().flushed
        assert state(a) == state(b)
        assert (a.front, a.rear, a.occupancy) == (b.front, b.rear, b.occupancy)
        assert [p.page_id for p in out_a.flushed] == [p.page_id for p in flushed_b]
        assert out_a.freed >= 1


# -- group second chance -------------------------------------------------

def test_gsc_without_references_matches_gr(make_flash):
    a = make_flash(capacity=16, replacement="gsc", scan_depth=8)
    b = make_flash(capacity=16, replacement="gr", scan_depth=8)
    for fc in (a, b):
        for i in range(16):
            fc.admit(frame(i, i + 1, dirty=i % 3 == 0, fdirty=i % 3 == 0))
    oa, ob = a.evict_group_second_chance(), b.evict_group_replacement()
    assert state(a) == state(b)
    assert oa.freed == ob.freed == 8
    assert [p.page_id for p in oa.flushed] == [p.page_id for p in ob.flushed]


def test_gsc_all_referenced_forces_front_out(make_flash):
    fc = make_flash(capacity=64, replacement="gsc", scan_depth=64)
    for i in range(64):
        fc.admit(frame(i, i + 1, dirty=True, fdirty=True))
    for i in range(64):
        fc.lookup(i)
    out = fc.evict_group_second_chance()
    assert out.freed == 1
    assert [p.page_id for p in out.flushed] == [0]
    live = fc.live()
    assert [m.page_id for m in live] == list(range(1, 64))
    assert not any(m.referenced for m in live)
    assert fc.acc.counters[(Device.FLASH, Kind.SEQ_WRITE)].ops == 64 + 1  # 64 admits + one batch


def test_gsc_mixed_batch_pulls_from_dram(make_flash):
    fc = make_flash(capacity=64, replacement="gsc", scan_depth=64)
    for i in range(64):
        fc.admit(frame(i, i + 1))
    for i in range(20):
        fc.lookup(i * 3)
    dram = DramBuffer(100)
    for pid in range(1000, 1060):  # 60 resident pages, MRU is 1059
        dram.install(pg(pid, 0), Source.DISK)
    fc.acc.reset()
    out = fc.evict_group_second_chance(dram, reserve=0)
    assert out.freed == 44
    assert [f.page_id for f in out.pulled] == list(range(1000, 1044))
    assert fc.occupancy == 64
    assert fc.acc.counters[(Device.FLASH, Kind.SEQ_WRITE)].ops == 1  # one batch write
    assert fc.acc.pages(Device.FLASH, Kind.SEQ_WRITE) == 64


def test_gsc_short_dram_gives_short_batch(make_flash):
    fc = make_flash(capacity=8, replacement="gsc", scan_depth=8)
    for i in range(8):
        fc.admit(frame(i, i + 1))
    dram = DramBuffer(8)
    for pid in (100, 101, 102):
        dram.install(pg(pid, 0), Source.DISK)
    out = fc.evict_group_second_chance(dram, reserve=1)
    assert [f.page_id for f in out.pulled] == [100, 101]  # MRU page stays put
    assert fc.occupancy == 2


def test_gsc_never_reenqueues_invalid_frames(make_flash):
    fc = make_flash(capacity=8, replacement="gsc", scan_depth=8)
    for i in range(8):
        fc.admit(frame(i, i + 1))
        fc.lookup(i)
    fc.invalidate(3)
    out = fc.evict_group_second_chance()
    assert 3 not in [m.page_id for m in fc.live()]
    assert out.freed >= 1


# -- write-through ---------------------------------------------------------

def test_write_through_dirty_frame(make_flash):
    fc = make_flash(sync="writethrough", capacity=2)
    out = fc.admit(frame(1, 4, dirty=True, fdirty=True))
    assert [p.page_id for p in out.writes] == [1]
    assert state(fc) == [(1, 4, False, True)]
    fc.admit(frame(2, 5))
    out = fc.admit(frame(3, 6))
    assert out.flushed == []


def test_admit_dirty_only_and_clean_only(make_flash):
    fc = make_flash(admit="dirty")
    fc.admit(frame(1, 1))
    assert state(fc) == []
    fc.admit(frame(2, 2, True, True))
    assert state(fc) == [(2, 2, True, True)]
    fc = make_flash(admit="clean")
    fc.admit(frame(1, 1))
    fc.admit(frame(1, 3, True, True))
    assert state(fc) == [(1, 1, False, False)]


def test_config_validation():
    with pytest.raises(ValueError):
        FlashConfig(4, scan_depth=5)
    with pytest.raises(ValueError):
        FlashConfig(4, scan_depth=0)
    with pytest.raises(ValueError):
        FlashConfig(0)


# -- admission and eviction rules, end to end -----------------------------------------------

def small_engine(tmp_path, **kw):
    cfg = dict(db_pages=64, dram_frames=2, flash_frames=4, policy="face", page_size=SMALL_PAGE,
               segment_capacity=8, scan_depth=2)
    cfg.update(kw)
    return Engine(EngineConfig(**cfg), tmp_path, checked=True)


def test_algorithm_cases_through_engine(tmp_path):
    e = small_engine(tmp_path)
    # fetch from disk: dirty = fdirty = false
    e.read(1)
    f = e.dram.peek(1)
    assert (f.dirty, f.fdirty) == (False, False)
    # update: dirty = fdirty = true
    e.write(1)
    assert (f.dirty, f.fdirty) == (True, True)
    # DRAM eviction of an fdirty page: enqueued, dirty in flash
    e.read(2)
    e.read(3)
    m = e.flash.valid_meta(1)
    assert m is not None and m.dirty
    # fetch from flash: fdirty = false, dirty carried over
    e.read(1)
    f = e.dram.peek(1)
    assert (f.dirty, f.fdirty) == (True, False)
    assert e.stats.flash_hits == 1
    # evicting it again, not fdirty and still cached: skipped
    enq = e.flash.enqueues
    e.read(4)
    e.read(5)
    assert 1 not in e.dram
    assert e.flash.enqueues == enq + 1  # page 3 went in, page 1 was skipped
    # flash eviction of dirty valid page writes it to disk
    for p in range(10, 20):
        e.read(p)
    assert e.disk.read(1).page_lsn == 1


def test_checkpoint_goes_to_flash_not_disk(tmp_path):
    e = small_engine(tmp_path, dram_frames=10, flash_frames=16)
    for p in range(10):
        e.write(p)
    disk_writes = e.stats.disk_writes
    assert e.db_checkpoint() == 10
    assert e.stats.disk_writes == disk_writes == 0
    assert e.acc.pages(Device.DISK, Kind.RAND_WRITE) == 0
    assert all(not f.fdirty and f.dirty for f in e.dram.frames.values())
    assert e.db_checkpoint() == 10  # still dirty, but nothing new to enqueue
    assert e.flash.enqueues == 10


# -- randomized equivalence with the naive reference model ----------------

def _random_run(tmp_path, seed):
    rng = random.Random(seed)
    mode = rng.choice(["face", "gr", "gsc"])
    sync = rng.choice(["writeback", "writeback", "writethrough"])
    dram = rng.randint(1, 6)
    flash = rng.randint(1, 32)
    depth = rng.randint(1, flash)
    pages = rng.randint(2, 40)
    e = Engine(EngineConfig(db_pages=pages, dram_frames=dram, flash_frames=flash, policy=mode, sync=sync,
                            scan_depth=depth, page_size=SMALL_PAGE, segment_capacity=16),
               tmp_path / str(seed), checked=True)
    ref = Ref(dram, flash, mode, sync, depth)
    try:
        for step in range(500):
            r = rng.random()
            pid = rng.randrange(pages)
            if r < 0.02:
                e.db_checkpoint()
                ref.checkpoint()
            elif r < 0.4:
                assert e.write(pid) == ref.write(pid)
            else:
                assert e.read(pid).page_lsn == ref.read(pid)
            assert engine_dram_state(e) == ref.dram_state(), (seed, step)
            assert engine_flash_state(e) == ref.flash_state(), (seed, step)
        for pid in range(pages):
            assert e.disk.read(pid).page_lsn == ref.disk.get(pid, 0)
        e.flash.check_all()
        log = e.flash.image.write_log
        assert all(b == (a + 1) % flash for a, b in zip(log, log[1:]))
    finally:
        e.close()


@pytest.mark.parametrize("block", range(2))
def test_engine_matches_reference_model(tmp_path, block):
    # the acceptance suite covers seeds 0-999; these add a fresh sample
    for seed in range(1000 + block * 100, 1100 + block * 100):
        _random_run(tmp_path, seed)
