"""Device cost model: per-device latency parameters and busy-time accounting.

Random operations are charged by 4KB-equivalent op count against the device's
IOPS rating, sequential ones by bytes against its bandwidth (MB = 10**6 bytes).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class Device(Enum):
    FLASH = "flash"
    DISK = "disk"


class Kind(Enum):
    RAND_READ = "rand_read"
    RAND_WRITE = "rand_write"
    SEQ_READ = "seq_read"
    SEQ_WRITE = "seq_write"


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    rand_read_iops: float
    rand_write_iops: float
    seq_read_bw: float  # MB/s
    seq_write_bw: float  # MB/s

    def __post_init__(self):
        for v in (self.rand_read_iops, self.rand_write_iops, self.seq_read_bw, self.seq_write_bw):
            if not v > 0:
                raise ValueError(f"{self.name}: device parameters must be positive")

    def scaled(self, factor: float) -> DeviceProfile:
        """Profile of an array ``factor`` times as fast (IOPS and bandwidth)."""
        return replace(
            self,
            name=f"{self.name}x{factor:g}",
            rand_read_iops=self.rand_read_iops * factor,
            rand_write_iops=self.rand_write_iops * factor,
            seq_read_bw=self.seq_read_bw * factor,
            seq_write_bw=self.seq_write_bw * factor,
        )

    def page_time(self, kind: Kind) -> float:
        """Seconds for one random 4KB operation of the given kind."""
        if kind is Kind.RAND_READ:
            return 1.0 / self.rand_read_iops
        if kind is Kind.RAND_WRITE:
            return 1.0 / self.rand_write_iops
        raise ValueError("page_time is defined for random kinds only")


MLC = DeviceProfile("mlc", 28495, 6314, 251.33, 242.80)
SLC = DeviceProfile("slc", 38427, 5057, 259.2, 195.25)
DISK1 = DeviceProfile("disk1", 409, 343, 156, 154)
RAID8 = DeviceProfile("raid8", 2598, 2502, 848, 843)

PROFILES = {p.name: p for p in (MLC, SLC, DISK1, RAID8)}
FLASH_PROFILES = ("mlc", "slc")
DISK_PROFILES = ("disk1", "raid8")

IOPS_UNIT = 4096


@dataclass(frozen=True)
class IoCharge:
    device: Device
    kind: Kind
    bytes: int

    def __post_init__(self):
        if self.bytes <= 0:
            raise ValueError("an I/O charge must move a positive number of bytes")


def charge_cost(c: IoCharge, profile: DeviceProfile, page_size: int) -> float:
    if c.kind in (Kind.RAND_READ, Kind.RAND_WRITE):
        if c.bytes % page_size:
            raise ValueError("random charges must be whole pages")
        return (c.bytes / page_size) * profile.page_time(c.kind)
    bw = profile.seq_read_bw if c.kind is Kind.SEQ_READ else profile.seq_write_bw
    return c.bytes / (bw * 1e6)


@dataclass
class Counter:
    ops: int = 0
    bytes: int = 0
    busy: float = 0.0


@dataclass
class CostAccumulator:
    """Accumulated device usage.

    ``overlap=True`` treats the two devices as working in parallel, so the
    simulated clock is the busier device's busy time. ``overlap=False`` is the
    fully serialized clock (sum of all charges).
    """

    flash: DeviceProfile = MLC
    disk: DeviceProfile = RAID8
    page_size: int = 4096
    overlap: bool = True
    counters: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.counters:
            self.counters = {(d, k): Counter() for d in Device for k in Kind}

    def profile(self, device: Device) -> DeviceProfile:
        return self.flash if device is Device.FLASH else self.disk

    def charge(self, c: IoCharge) -> float:
        cost = charge_cost(c, self.profile(c.device), self.page_size)
        ctr = self.counters[(c.device, c.kind)]
        ctr.ops += 1
        ctr.bytes += c.bytes
        ctr.busy += cost
        return cost

    def add(self, device: Device, kind: Kind, nbytes: int) -> float:
        return self.charge(IoCharge(device, kind, nbytes))

    def busy(self, device: Device) -> float:
        return sum(self.counters[(device, k)].busy for k in Kind)

    def serial_time(self) -> float:
        return self.busy(Device.FLASH) + self.busy(Device.DISK)

    @property
    def clock(self) -> float:
        if self.overlap:
            return max(self.busy(Device.FLASH), self.busy(Device.DISK))
        return self.serial_time()

    def ops4k(self, device: Device) -> float:
        """4KB-equivalent operations issued to a device."""
        return sum(self.counters[(device, k)].bytes for k in Kind) / IOPS_UNIT

    def pages(self, device: Device, kind: Kind) -> int:
        return self.counters[(device, kind)].bytes // self.page_size

    def utilization(self, device: Device) -> float:
        clock = self.clock
        return self.busy(device) / clock if clock > 0 else 0.0

    def iops(self, device: Device) -> float:
        clock = self.clock
        return self.ops4k(device) / clock if clock > 0 else 0.0

    def reset(self) -> None:
        for ctr in self.counters.values():
            ctr.ops = ctr.bytes = 0
            ctr.busy = 0.0

    def report(self) -> StatsRecord:
        fields = {"sim_time": self.clock, "serial_time": self.serial_time()}
        for d in Device:
            for k in Kind:
                ctr = self.counters[(d, k)]
                fields[f"{d.value}_{k.value}_ops"] = ctr.ops
                fields[f"{d.value}_{k.value}_bytes"] = ctr.bytes
            fields[f"{d.value}_busy"] = self.busy(d)
            fields[f"{d.value}_util"] = self.utilization(d)
            fields[f"{d.value}_iops4k"] = self.iops(d)
        return StatsRecord(fields)


@dataclass
class StatsRecord:
    fields: dict

    def __getitem__(self, key):
        return self.fields[key]

    def as_dict(self) -> dict:
        return dict(self.fields)
