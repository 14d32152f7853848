"""Cost-effectiveness arithmetic and the more-DRAM-versus-more-flash harness."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

from .devices import PROFILES, DeviceProfile, Kind
from .engine import EngineConfig


class DegenerateCosts(ValueError):
    pass


@dataclass(frozen=True)
class BreakEvenParams:
    delta: float
    c_disk: float
    c_flash: float
    alpha: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.alpha <= 0 or self.b <= 0:
            raise ValueError("alpha and b must be positive")
        if not self.c_flash > 0:
            raise DegenerateCosts("c_flash must be positive")
        if not self.c_disk > self.c_flash:
            raise DegenerateCosts("break-even needs c_disk > c_flash")

    @property
    def exponent(self) -> float:
        return self.c_disk / (self.c_disk - self.c_flash)


def break_even_theta(p: BreakEvenParams) -> float:
    """Flash growth fraction that buys the same miss-time saving as growing
    DRAM by ``p.delta``.

    A hit-rate gain of a*log(1+x) saves c_disk per DRAM hit but only
    c_disk - c_flash per flash hit, so the two break even when
    (1+theta) = (1+delta) ** (c_disk / (c_disk - c_flash)).
    """
    # expm1/log1p keep the relative error tiny when delta is small
    return math.expm1(p.exponent * math.log1p(p.delta))


def theta_for_exponent(delta: float, exponent: float) -> float:
    if exponent < 1:
        raise DegenerateCosts("exponent below 1 means flash is slower than disk")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return math.expm1(exponent * math.log1p(delta))


def hit_rate_model(alpha: float, b: float, size: float) -> float:
    """Hit-rate gain predicted by the log model when the buffer grows from b to size."""
    if not size >= b > 0:
        raise ValueError("need size >= b > 0")
    return alpha * math.log(size / b)


def fit_alpha(sizes, hit_rates) -> tuple[float, float]:
    """Least-squares fit of hit = alpha*log(size) + c; returns (alpha, c)."""
    import numpy as np

    x = np.log(np.asarray(sizes, dtype=float))
    y = np.asarray(hit_rates, dtype=float)
    alpha, c = np.polyfit(x, y, 1)
    return float(alpha), float(c)


def access_cost(profile: DeviceProfile, read_weight: float = 1.0) -> float:
    """Per-page access time for a read/write mix (read_weight=1 is read-only)."""
    if not 0.0 <= read_weight <= 1.0:
        raise ValueError("read_weight must lie in [0, 1]")
    return read_weight * profile.page_time(Kind.RAND_READ) + (1 - read_weight) * profile.page_time(Kind.RAND_WRITE)


def params_from_profiles(delta: float, flash: str = "mlc", disk: str = "disk1",
                         read_weight: float = 1.0) -> BreakEvenParams:
    return BreakEvenParams(delta, access_cost(PROFILES[disk], read_weight),
                           access_cost(PROFILES[flash], read_weight))


# -- more DRAM or more flash ------------------------------------------------

@dataclass
class SweepRow:
    k: int
    dram_tpm: float
    flash_tpm: float


def dram_vs_flash_sweep(spec, base: EngineConfig, steps: int, dram_unit: int,
                        price_ratio: int = 10, workdir=None) -> list[SweepRow]:
    """For k = 1..steps, compare adding k*dram_unit DRAM frames (no flash)
    against adding k*dram_unit*price_ratio flash frames under FaCE+GSC.

    Throughput is reported in operations per simulated minute.
    """
    from .workload import run

    rows = []
    for k in range(1, steps + 1):
        dram_cfg = replace(base, policy="none", flash_frames=0, dram_frames=base.dram_frames + k * dram_unit)
        flash_cfg = replace(base, policy="gsc", flash_frames=k * dram_unit * price_ratio)
        d = run(spec, dram_cfg, workdir=workdir)
        f = run(spec, flash_cfg, workdir=workdir)
        rows.append(SweepRow(k, 60.0 * d.sim_tput, 60.0 * f.sim_tput))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "dram_tpm", "flash_tpm"])
    for r in rows:
        w.writerow([r.k, repr(r.dram_tpm), repr(r.flash_tpm)])
    return buf.getvalue()
