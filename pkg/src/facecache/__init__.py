"""Tiered page store with a multi-version FIFO flash cache between a DRAM
buffer and disk, plus a trace-driven simulator and device cost model."""

from .devices import DISK1, MLC, PROFILES, RAID8, SLC, CostAccumulator, DeviceProfile, IoCharge
from .dram import DramBuffer, DramFrame, Source
from .engine import Engine, EngineConfig, FreshnessViolation
from .flash import Admit, FlashCache, FlashConfig, Replacement, SyncPolicy
from .page import PageImage, deserialize_page, serialize_page
from .recovery import crash, recover_dirty_pages, restart
from .workload import RunResult, WorkloadSpec, generate_trace, run, run_crash_experiment
from .analysis import BreakEvenParams, break_even_theta, dram_vs_flash_sweep, theta_for_exponent

__version__ = "0.1.0"
