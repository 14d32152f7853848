"""On-media metadata for the flash cache: 24-byte directory entries collected
into fixed-capacity segments, plus a double-buffered superblock.

``flash.meta`` layout (little-endian)::

    [0, 512)        superblock slot 0
    [512, 1024)     superblock slot 1
    [4096, ...)     segment ring, ``n_segment_slots`` slots of
                    ``segment_bytes`` each; segment ``k`` lives in slot
                    ``k % n_segment_slots``

Entry ``e`` (the ``e``-th frame ever enqueued) belongs to segment
``e // segment_capacity`` and occupies flash slot ``e % capacity_frames``.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass

from .devices import CostAccumulator, Device, Kind

ENTRY = struct.Struct("<QIIQ")
ENTRY_SIZE = ENTRY.size  # 24
DEFAULT_SEGMENT_CAPACITY = 64_000

SB_MAGIC = 0xFACE_CACE
SB_SLOT = 512
SB_BODY = struct.Struct("<IIQIIIIQQQQQ")
SEGMENT_BASE = 4096


class CorruptSuperBlock(RuntimeError):
    pass


@dataclass(frozen=True)
class MetadataEntry:
    page_id: int
    frame_index: int
    dirty: bool
    lsn: int

    def pack(self) -> bytes:
        return ENTRY.pack(self.page_id, self.frame_index, 1 if self.dirty else 0, self.lsn)

    @classmethod
    def unpack(cls, buf: bytes, offset: int = 0) -> MetadataEntry:
        page_id, frame, flags, lsn = ENTRY.unpack_from(buf, offset)
        return cls(page_id, frame, bool(flags & 1), lsn)


@dataclass
class SuperBlock:
    seq: int
    page_size: int
    capacity_frames: int
    scan_depth: int
    segment_capacity: int
    front: int
    rear: int
    occupancy: int
    enqueued: int  # total frames ever enqueued
    durable_entries: int  # entries [0, durable_entries) are on media

    @property
    def segment_count(self) -> int:
        return -(-self.durable_entries // self.segment_capacity)

    @property
    def horizon(self) -> int:
        """Flash slot just past the last durable directory entry."""
        return self.durable_entries % self.capacity_frames

    def pack(self) -> bytes:
        body = SB_BODY.pack(
            SB_MAGIC, self.page_size, self.seq, self.capacity_frames, self.scan_depth,
            self.segment_capacity, 0, self.front, self.rear, self.occupancy,
            self.enqueued, self.durable_entries,
        )
        crc = zlib.crc32(body)
        return (body + struct.pack("<I", crc)).ljust(SB_SLOT, b"\0")

    @classmethod
    def unpack(cls, buf: bytes) -> SuperBlock | None:
        body = buf[: SB_BODY.size]
        (crc,) = struct.unpack_from("<I", buf, SB_BODY.size)
        if zlib.crc32(body) != crc:
            return None
        (magic, page_size, seq, cap, depth, seg_cap, _, front, rear, occ, enq, durable) = SB_BODY.unpack(body)
        if magic != SB_MAGIC:
            return None
        return cls(seq, page_size, cap, depth, seg_cap, front, rear, occ, enq, durable)


def segment_bytes(segment_capacity: int, page_size: int) -> int:
    raw = segment_capacity * ENTRY_SIZE
    return -(-raw // page_size) * page_size


def n_segment_slots(capacity_frames: int, segment_capacity: int) -> int:
    return -(-capacity_frames // segment_capacity) + 3


def read_superblock(fd: int) -> SuperBlock:
    best = None
    for slot in (0, 1):
        sb = SuperBlock.unpack(os.pread(fd, SB_SLOT, slot * SB_SLOT))
        if sb is not None and (best is None or sb.seq > best.seq):
            best = sb
    if best is None:
        raise CorruptSuperBlock("no valid superblock slot")
    return best


@dataclass
class InFlight:
    seq_no: int
    entries: list
    completes_at: int  # entry count at which the write is modeled as finished


class MetadataDirectory:
    """In-memory current segment plus the persisted segment ring.

    A full segment is handed to a modeled background flush and keeps being
    "in flight" for ``flush_lag`` further appends; new entries keep going into
    the fresh current segment meanwhile.
    """

    def __init__(self, path, capacity_frames: int, page_size: int, scan_depth: int,
                 segment_capacity: int = DEFAULT_SEGMENT_CAPACITY, acc: CostAccumulator | None = None,
                 flush_lag: int | None = None, create: bool = True):
        self.path = os.fspath(path)
        self.capacity_frames = capacity_frames
        self.page_size = page_size
        self.scan_depth = scan_depth
        self.segment_capacity = segment_capacity
        self.acc = acc
        self.flush_lag = max(1, segment_capacity // 4) if flush_lag is None else flush_lag
        self.segment_bytes = segment_bytes(segment_capacity, page_size)
        self.n_slots = n_segment_slots(capacity_frames, segment_capacity)
        flags = os.O_RDWR | (os.O_CREAT | os.O_TRUNC if create else 0)
        self.fd = os.open(self.path, flags, 0o644)
        self.appended = 0  # == frames enqueued so far
        self.current: list[MetadataEntry] = []
        self.flushing: InFlight | None = None
        self.durable_entries = 0
        self.sb_seq = 0
        self.flushes = 0
        self.flushed_bytes = 0
        self.pointers = (0, 0, 0)
        if create:
            self.write_superblock()

    # -- appends ---------------------------------------------------------

    def append(self, entry: MetadataEntry) -> bool:
        """Append one entry; return True if this append issued a segment flush."""
        self.current.append(entry)
        self.appended += 1
        if self.flushing is not None and self.appended >= self.flushing.completes_at:
            self._complete_flush()
        if len(self.current) == self.segment_capacity:
            if self.flushing is not None:
                self._complete_flush()
            seq_no = (self.appended - 1) // self.segment_capacity
            self.flushing = InFlight(seq_no, self.current, self.appended + self.flush_lag)
            self.current = []
            self.flushes += 1
            self.flushed_bytes += self.segment_bytes
            if self.acc is not None:
                self.acc.add(Device.FLASH, Kind.SEQ_WRITE, self.segment_bytes)
            return True
        return False

    def _write_segment(self, seq_no: int, entries: list) -> None:
        buf = b"".join(e.pack() for e in entries)
        slot = seq_no % self.n_slots
        os.pwrite(self.fd, buf, SEGMENT_BASE + slot * self.segment_bytes)

    def _complete_flush(self) -> None:
        f = self.flushing
        self.flushing = None
        self._write_segment(f.seq_no, f.entries)
        self.durable_entries = f.seq_no * self.segment_capacity + len(f.entries)
        self.write_superblock()

    def settle(self) -> None:
        """Finish any in-flight segment flush."""
        if self.flushing is not None:
            self._complete_flush()

    # -- superblock ------------------------------------------------------

    def set_pointers(self, front: int, rear: int, occupancy: int) -> None:
        self.pointers = (front, rear, occupancy)
        self.write_superblock()

    def superblock(self) -> SuperBlock:
        front, rear, occ = self.pointers
        return SuperBlock(
            self.sb_seq, self.page_size, self.capacity_frames, self.scan_depth,
            self.segment_capacity, front, rear, occ, self.appended, self.durable_entries,
        )

    def write_superblock(self) -> None:
        self.sb_seq += 1
        os.pwrite(self.fd, self.superblock().pack(), (self.sb_seq % 2) * SB_SLOT)

    # -- shutdown / crash ------------------------------------------------

    def shutdown(self) -> None:
        """Clean shutdown: persist everything, including the partial segment."""
        self.settle()
        if self.current:
            seq_no = self.appended // self.segment_capacity
            self._write_segment(seq_no, self.current)
            if self.acc is not None:
                self.acc.add(Device.FLASH, Kind.SEQ_WRITE, self.segment_bytes)
        self.durable_entries = self.appended
        self.write_superblock()

    def crash(self, inflight_outcome: str = "absent") -> None:
        """Drop memory state; resolve an in-flight flush as ``persisted``,
        ``torn`` (a prefix of the entries reaches media, the superblock does
        not advance) or ``absent``."""
        f = self.flushing
        if f is not None:
            if inflight_outcome == "persisted":
                self._complete_flush()
            elif inflight_outcome == "torn":
                self._write_segment(f.seq_no, f.entries[: len(f.entries) // 2])
            elif inflight_outcome != "absent":
                raise ValueError(inflight_outcome)
        self.flushing = None
        self.current = []
        self.close()

    def close(self) -> None:
        if self.fd >= 0:
            os.close(self.fd)
            self.fd = -1

    # -- reading back ----------------------------------------------------

    def read_segment(self, fd: int, seq_no: int, count: int) -> list[MetadataEntry]:
        slot = seq_no % self.n_slots
        buf = os.pread(fd, self.segment_bytes, SEGMENT_BASE + slot * self.segment_bytes)
        return [MetadataEntry.unpack(buf, i * ENTRY_SIZE) for i in range(count)]

    def entries_in_memory(self) -> list[MetadataEntry]:
        pending = self.flushing.entries if self.flushing is not None else []
        return list(pending) + list(self.current)
