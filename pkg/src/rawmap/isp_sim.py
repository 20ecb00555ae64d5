"""Deterministic analytical cost model for the in-storage pipeline.

Replays an OperationTrace onto a parameterized SSD + internal-DRAM +
accelerator-unit model and reports per-step latency, energy, and data
movement for four placements:

  MARS           all hops internal, compute on in-storage units
  MARS-External  same compute, but every stage's inputs cross the
                 external host link, and index/input leave the SSD once
  MARS-BitSerial arithmetic executed bit-serially (x16 cycles for 16-bit
                 add/compare, x256 for multiply/divide), op energy scaled
  MS-SmartSSD    sorter/merger traffic crosses a 3 GB/s accelerator link

Latency composes closed-form: compute = ops*cycles/(freq*units), data
movement = bytes/bandwidth, flash reads striped round-robin across
channels.  No queueing or contention is modeled.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

from .trace import STEP_UNIT, STEPS, OperationTrace, StepTrace

SYSTEMS = ["MARS", "MARS-External", "MARS-BitSerial", "MS-SmartSSD"]

BIT_SERIAL_CYCLE_SCALE = {"add": 16, "compare": 16, "multiply": 256, "divide": 256}


class SimError(Exception):
    pass


@dataclass(frozen=True)
class SsdConfig:
    channels: int = 8
    chips_per_channel: int = 8
    t_dma: float = 16e-6
    t_read_page: float = 22.5e-6
    flash_channel_bw: float = 1e9          # bytes/s
    external_link_bw: float = 1.2e9        # PCIe lane
    accel_link_bw: float = 3e9             # SmartSSD SSD<->FPGA link
    internal_bw: float = 19.2e9            # controller<->DRAM aggregate
    page_size: int = 16384
    t_prog_page: float = 561e-6            # flash program; stand-in constant

    def __post_init__(self):
        if min(self.channels, self.chips_per_channel, self.page_size) < 1:
            raise SimError("ssd config: counts must be positive")
        if min(self.t_dma, self.t_read_page, self.flash_channel_bw,
               self.external_link_bw, self.accel_link_bw,
               self.internal_bw) <= 0:
            raise SimError("ssd config: timings/bandwidths must be positive")


@dataclass(frozen=True)
class DramConfig:
    capacity_bytes: int = 4_000_000_000  # decimal GB: 0.65 * 4 GB = 2.6 GB regions
    banks: int = 16
    subarrays: int = 512
    rows_per_subarray: int = 256
    row_bytes: int = 2048
    # fraction of capacity usable for a resident index region; 0.65 of
    # 4 GiB gives the 2.6 GiB region size used for partitioning
    index_fraction: float = 0.65

    def __post_init__(self):
        if self.capacity_bytes < 1 or not (0 < self.index_fraction <= 1):
            raise SimError("dram config: invalid capacity or fraction")
        cells = self.banks * self.subarrays * self.rows_per_subarray * self.row_bytes
        if not (self.capacity_bytes / 2 <= cells):
            raise SimError("dram config: geometry does not cover capacity")

    @property
    def region_bytes(self) -> int:
        return int(self.capacity_bytes * self.index_fraction)


@dataclass(frozen=True)
class UnitConfig:
    arithmetic_units: int = 256
    arithmetic_freq: float = 164e6
    cycles_per_op: dict = field(default_factory=lambda: {
        "add": 1, "compare": 1, "multiply": 4, "divide": 16})
    querying_units: int = 512
    t_row_activate: float = 45e-9
    rows_per_query: int = 16
    t_key_stage: float = 45e-9   # staging one query key into a region pass
    sorter_units: int = 8
    sorter_freq: float = 1e9

    def __post_init__(self):
        if min(self.arithmetic_freq, self.sorter_freq) <= 0:
            raise SimError("unit config: frequencies must be positive")
        if min(self.arithmetic_units, self.querying_units, self.sorter_units) < 1:
            raise SimError("unit config: unit counts must be positive")


# Energy constants are stand-ins, not measured values: acceptance logic
# asserts only orderings and linearity, never absolute joules.
@dataclass(frozen=True)
class EnergyConfig:
    pj_per_op: dict = field(default_factory=lambda: {
        "add": 1.0, "compare": 1.0, "multiply": 4.0, "divide": 16.0,
        "lookup": 50.0, "sort_cycle": 2.0})
    pj_per_byte_hop: dict = field(default_factory=lambda: {
        "internal": 5.0, "flash": 15.0, "accel_link": 25.0, "external": 150.0})
    bit_serial_op_factor: float = 0.25

    def __post_init__(self):
        if any(v < 0 for v in self.pj_per_op.values()):
            raise SimError("energy config: negative per-op energy")
        if any(v < 0 for v in self.pj_per_byte_hop.values()):
            raise SimError("energy config: negative per-byte energy")


@dataclass(frozen=True)
class HardwareConfig:
    ssd: SsdConfig = field(default_factory=SsdConfig)
    dram: DramConfig = field(default_factory=DramConfig)
    units: UnitConfig = field(default_factory=UnitConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)


# ---------------------------------------------------------------------------
# Elementary timing
# ---------------------------------------------------------------------------

def io_time(nbytes: float, bandwidth: float) -> float:
    if nbytes < 0:
        raise SimError("negative byte count")
    if bandwidth <= 0:
        raise SimError("bandwidth must be positive")
    return nbytes / bandwidth


def flash_read_time(nbytes: int, ssd: SsdConfig) -> float:
    """Round-robin striped page reads.

    Per channel with p pages queued:
        t_dma + t_read_page + (p - 1) * max(t_read_page, t_transfer) + t_transfer
    where t_transfer = page_size / flash_channel_bw; page reads pipeline
    with channel transfers after the first page, and the DMA setup is
    paid once per channel queue.  Total is the max over channels.
    """
    if nbytes == 0:
        return 0.0
    pages = math.ceil(nbytes / ssd.page_size)
    per_channel = pages // ssd.channels
    remainder = pages % ssd.channels
    busiest = per_channel + (1 if remainder else 0)
    t_transfer = ssd.page_size / ssd.flash_channel_bw
    return (ssd.t_dma + ssd.t_read_page
            + (busiest - 1) * max(ssd.t_read_page, t_transfer) + t_transfer)


def flash_write_time(nbytes: int, ssd: SsdConfig) -> float:
    if nbytes == 0:
        return 0.0
    pages = math.ceil(nbytes / ssd.page_size)
    busiest = math.ceil(pages / ssd.channels)
    t_transfer = ssd.page_size / ssd.flash_channel_bw
    return ssd.t_dma + busiest * (ssd.t_prog_page + t_transfer)


# ---------------------------------------------------------------------------
# Step compute latency
# ---------------------------------------------------------------------------

def _arithmetic_time(st: StepTrace, units: UnitConfig, bit_serial: bool) -> float:
    cycles = 0
    for op, count in st.ops.items():
        if op not in units.cycles_per_op:
            raise SimError(f"op class {op!r} not executable on arithmetic units")
        per_op = units.cycles_per_op[op]
        if bit_serial:
            per_op *= BIT_SERIAL_CYCLE_SCALE[op]
        cycles += count * per_op
    if cycles == 0:
        return 0.0
    used = min(units.arithmetic_units, max(1, st.total_ops()))
    return cycles / (units.arithmetic_freq * used)


def _query_time(lookups: int, partitions: int, units: UnitConfig) -> float:
    """Query compute for one region pass.

    Every pass re-stages the full key set into the querying subarrays
    (t_key_stage per key); the row sweeps for the lookups owned by this
    region (lookups/partitions of them) cost rows_per_query activations
    each.  Work spreads over the querying units.
    """
    if lookups == 0:
        return 0.0
    used = min(units.querying_units, lookups)
    stage = lookups * units.t_key_stage / used
    sweep = (lookups / partitions) * units.rows_per_query * units.t_row_activate / used
    return stage + sweep


def _sorter_time(st: StepTrace, units: UnitConfig) -> float:
    cycles = st.ops.get("sort_cycle", 0)
    if cycles == 0:
        return 0.0
    used = min(units.sorter_units, 8)
    return cycles / (units.sorter_freq * used)


def partitioned_query(index_size_bytes: int, dram: DramConfig,
                      lookups: int, hw: "HardwareConfig",
                      load_bw_extra: float | None = None) -> float:
    """Total time for querying an index loaded region-by-region into DRAM.

    partitions = ceil(index_size / region_bytes); the load of region i+1
    overlaps the querying of region i:

        total = load(region_1) + sum_i max(query(region_i), load(region_{i+1}))

    with load(region_{P+1}) = 0.  Region loads come from flash; when
    load_bw_extra is set (external placement) each load additionally
    crosses that link.
    """
    if index_size_bytes == 0:
        return _query_time(lookups, 1, hw.units)
    region = dram.region_bytes
    partitions = math.ceil(index_size_bytes / region)
    sizes = [min(region, index_size_bytes - i * region) for i in range(partitions)]

    def load(sz: int) -> float:
        t = flash_read_time(sz, hw.ssd)
        if load_bw_extra is not None:
            t += io_time(sz, load_bw_extra)
        return t

    q = _query_time(lookups, partitions, hw.units)
    total = load(sizes[0])
    for i in range(partitions):
        nxt = load(sizes[i + 1]) if i + 1 < partitions else 0.0
        total += max(q, nxt)
    return total


def n_partitions(index_size_bytes: int, dram: DramConfig) -> int:
    if index_size_bytes <= 0:
        return 1
    return math.ceil(index_size_bytes / dram.region_bytes)


# ---------------------------------------------------------------------------
# Full simulation
# ---------------------------------------------------------------------------

@dataclass
class StepCost:
    step: str
    latency_s: float
    energy_j: float
    bytes_moved: int
    hop: str


@dataclass
class CostReport:
    system: str
    steps: list[StepCost]

    @property
    def total_latency_s(self) -> float:
        return sum(s.latency_s for s in self.steps)

    @property
    def total_energy_j(self) -> float:
        return sum(s.energy_j for s in self.steps)

    @property
    def total_bytes_moved(self) -> int:
        return sum(s.bytes_moved for s in self.steps)

    def compute_latency_s(self) -> float:
        """Compute-only portion (pipeline steps, movement excluded)."""
        return sum(s.latency_s for s in self.steps if s.hop == "compute")

    def write_tsv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("step\tsystem\tlatency_s\tenergy_j\tbytes_moved\n")
            for s in self.steps:
                fh.write(f"{s.step}\t{self.system}\t{s.latency_s:.9e}\t"
                         f"{s.energy_j:.9e}\t{s.bytes_moved}\n")
            fh.write(f"total\t{self.system}\t{self.total_latency_s:.9e}\t"
                     f"{self.total_energy_j:.9e}\t{self.total_bytes_moved}\n")

    def summary(self) -> str:
        return (f"{self.system}: {self.total_latency_s:.6f} s, "
                f"{self.total_energy_j:.6e} J, "
                f"{self.total_bytes_moved} bytes moved")


def _op_energy(st: StepTrace, energy: EnergyConfig, bit_serial: bool) -> float:
    factor = energy.bit_serial_op_factor if bit_serial else 1.0
    pj = 0.0
    for op, count in st.ops.items():
        scale = factor if op in BIT_SERIAL_CYCLE_SCALE else 1.0
        pj += count * energy.pj_per_op[op] * scale
    return pj * 1e-12


def simulate(trace: OperationTrace, system: str,
             hw: HardwareConfig | None = None) -> CostReport:
    if system not in SYSTEMS:
        raise SimError(f"unknown system {system!r}; expected one of {SYSTEMS}")
    hw = hw or HardwareConfig()
    trace.validate()
    external = system == "MARS-External"
    bit_serial = system == "MARS-BitSerial"
    smartssd = system == "MS-SmartSSD"
    e_byte = hw.energy.pj_per_byte_hop
    steps: list[StepCost] = []

    # one-time input staging: raw signals come off flash; on the external
    # placement they additionally leave the SSD over the host link
    t_in = flash_read_time(trace.input_bytes, hw.ssd)
    e_in = trace.input_bytes * e_byte["flash"] * 1e-12
    if external:
        t_in += io_time(trace.input_bytes, hw.ssd.external_link_bw)
        e_in += trace.input_bytes * e_byte["external"] * 1e-12
    steps.append(StepCost("load_input", t_in, e_in, trace.input_bytes, "flash"))

    if external and trace.index_size_bytes:
        t_idx = (flash_read_time(trace.index_size_bytes, hw.ssd)
                 + io_time(trace.index_size_bytes, hw.ssd.external_link_bw))
        e_idx = trace.index_size_bytes * (e_byte["flash"] + e_byte["external"]) * 1e-12
        steps.append(StepCost("load_index", t_idx, e_idx,
                              trace.index_size_bytes, "external"))

    for s in STEPS:
        st = trace.steps[s]
        unit = STEP_UNIT[s]

        # compute
        if unit == "arithmetic":
            t_compute = _arithmetic_time(st, hw.units, bit_serial)
            e_compute = _op_energy(st, hw.energy, bit_serial)
        elif unit == "querying":
            lookups = st.ops.get("lookup", 0)
            if external:
                # index already shipped to the host: no in-storage
                # partitioning, single-region query compute
                t_compute = _query_time(lookups, 1, hw.units)
            else:
                t_compute = partitioned_query(
                    trace.index_size_bytes, hw.dram, lookups, hw)
            e_compute = (lookups * hw.energy.pj_per_op["lookup"] * 1e-12
                         + (0 if external else trace.index_size_bytes
                            * e_byte["flash"] * 1e-12))
        else:
            t_compute = _sorter_time(st, hw.units)
            e_compute = _op_energy(st, hw.energy, bit_serial)
        steps.append(StepCost(s, t_compute, e_compute, 0, "compute"))

        # movement: deliver the step's inputs over the placement's hop
        if external:
            hop, bw = "external", hw.ssd.external_link_bw
            moved = st.bytes_in
        elif smartssd and s == "3h":
            hop, bw = "accel_link", hw.ssd.accel_link_bw
            moved = st.bytes_in + st.bytes_out  # round trip to the FPGA
        else:
            hop, bw = "internal", hw.ssd.internal_bw
            moved = st.bytes_in
        t_move = io_time(moved, bw)
        e_move = moved * e_byte[hop] * 1e-12
        steps.append(StepCost(f"{s}:move", t_move, e_move, moved, hop))

    return CostReport(system=system, steps=steps)


def energy_total(trace: OperationTrace, system: str,
                 hw: HardwareConfig | None = None) -> float:
    return simulate(trace, system, hw).total_energy_j


# ---------------------------------------------------------------------------
# Dual-mode FTL bookkeeping
# ---------------------------------------------------------------------------

@dataclass
class FtlState:
    mode: str = "conventional"
    metadata_flushed: bool = False
    result_bytes_written: int = 0


def mode_switch(state: FtlState, command: str, result_bytes: int = 0,
                ssd: SsdConfig | None = None) -> tuple[FtlState, float]:
    """Apply an accelerator-mode switch command; returns (state, latency).

    Init: conventional -> accelerator, flushing FTL metadata.
    Write: accelerator -> conventional, persisting result bytes to flash.
    """
    ssd = ssd or SsdConfig()
    if command == "MARS_Init":
        if state.mode != "conventional":
            raise SimError("already in accelerator mode")
        return FtlState(mode="accelerator", metadata_flushed=True,
                        result_bytes_written=state.result_bytes_written), 0.0
    if command == "MARS_Write":
        if state.mode != "accelerator":
            raise SimError("not in accelerator mode")
        latency = flash_write_time(result_bytes, ssd)
        return FtlState(mode="conventional", metadata_flushed=True,
                        result_bytes_written=state.result_bytes_written
                        + result_bytes), latency
    raise SimError(f"unknown command {command!r}")


# ---------------------------------------------------------------------------
# Config file (INI sections [ssd] / [dram] / [units] / [energy])
# ---------------------------------------------------------------------------

def write_config(hw: HardwareConfig, path) -> None:
    cp = configparser.ConfigParser()
    cp["ssd"] = {
        "channels": str(hw.ssd.channels),
        "chips_per_channel": str(hw.ssd.chips_per_channel),
        "t_dma": repr(hw.ssd.t_dma),
        "t_read_page": repr(hw.ssd.t_read_page),
        "flash_channel_bw": repr(hw.ssd.flash_channel_bw),
        "external_link_bw": repr(hw.ssd.external_link_bw),
        "accel_link_bw": repr(hw.ssd.accel_link_bw),
        "internal_bw": repr(hw.ssd.internal_bw),
        "page_size": str(hw.ssd.page_size),
        "t_prog_page": repr(hw.ssd.t_prog_page),
    }
    cp["dram"] = {
        "capacity_bytes": str(hw.dram.capacity_bytes),
        "banks": str(hw.dram.banks),
        "subarrays": str(hw.dram.subarrays),
        "rows_per_subarray": str(hw.dram.rows_per_subarray),
        "row_bytes": str(hw.dram.row_bytes),
        "index_fraction": repr(hw.dram.index_fraction),
    }
    cp["units"] = {
        "arithmetic_units": str(hw.units.arithmetic_units),
        "arithmetic_freq": repr(hw.units.arithmetic_freq),
        "cycles_add": str(hw.units.cycles_per_op["add"]),
        "cycles_compare": str(hw.units.cycles_per_op["compare"]),
        "cycles_multiply": str(hw.units.cycles_per_op["multiply"]),
        "cycles_divide": str(hw.units.cycles_per_op["divide"]),
        "querying_units": str(hw.units.querying_units),
        "t_row_activate": repr(hw.units.t_row_activate),
        "rows_per_query": str(hw.units.rows_per_query),
        "t_key_stage": repr(hw.units.t_key_stage),
        "sorter_units": str(hw.units.sorter_units),
        "sorter_freq": repr(hw.units.sorter_freq),
    }
    # stand-in constants, not measured values
    cp["energy"] = {
        **{f"pj_op_{k}": repr(v) for k, v in hw.energy.pj_per_op.items()},
        **{f"pj_byte_{k}": repr(v) for k, v in hw.energy.pj_per_byte_hop.items()},
        "bit_serial_op_factor": repr(hw.energy.bit_serial_op_factor),
    }
    with open(path, "w") as fh:
        fh.write("# hardware model configuration\n")
        fh.write("# [energy] values are parameterized stand-ins, not measurements\n")
        cp.write(fh)


def load_config(path) -> HardwareConfig:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise SimError(f"cannot read hardware config {path}")
    d = HardwareConfig()
    ssd = replace(
        d.ssd,
        channels=cp.getint("ssd", "channels", fallback=d.ssd.channels),
        chips_per_channel=cp.getint("ssd", "chips_per_channel",
                                    fallback=d.ssd.chips_per_channel),
        t_dma=cp.getfloat("ssd", "t_dma", fallback=d.ssd.t_dma),
        t_read_page=cp.getfloat("ssd", "t_read_page", fallback=d.ssd.t_read_page),
        flash_channel_bw=cp.getfloat("ssd", "flash_channel_bw",
                                     fallback=d.ssd.flash_channel_bw),
        external_link_bw=cp.getfloat("ssd", "external_link_bw",
                                     fallback=d.ssd.external_link_bw),
        accel_link_bw=cp.getfloat("ssd", "accel_link_bw",
                                  fallback=d.ssd.accel_link_bw),
        internal_bw=cp.getfloat("ssd", "internal_bw", fallback=d.ssd.internal_bw),
        page_size=cp.getint("ssd", "page_size", fallback=d.ssd.page_size),
        t_prog_page=cp.getfloat("ssd", "t_prog_page", fallback=d.ssd.t_prog_page),
    )
    dram = replace(
        d.dram,
        capacity_bytes=cp.getint("dram", "capacity_bytes",
                                 fallback=d.dram.capacity_bytes),
        banks=cp.getint("dram", "banks", fallback=d.dram.banks),
        subarrays=cp.getint("dram", "subarrays", fallback=d.dram.subarrays),
        rows_per_subarray=cp.getint("dram", "rows_per_subarray",
                                    fallback=d.dram.rows_per_subarray),
        row_bytes=cp.getint("dram", "row_bytes", fallback=d.dram.row_bytes),
        index_fraction=cp.getfloat("dram", "index_fraction",
                                   fallback=d.dram.index_fraction),
    )
    cycles = dict(d.units.cycles_per_op)
    for op in cycles:
        cycles[op] = cp.getint("units", f"cycles_{op}", fallback=cycles[op])
    units = replace(
        d.units,
        arithmetic_units=cp.getint("units", "arithmetic_units",
                                   fallback=d.units.arithmetic_units),
        arithmetic_freq=cp.getfloat("units", "arithmetic_freq",
                                    fallback=d.units.arithmetic_freq),
        cycles_per_op=cycles,
        querying_units=cp.getint("units", "querying_units",
                                 fallback=d.units.querying_units),
        t_row_activate=cp.getfloat("units", "t_row_activate",
                                   fallback=d.units.t_row_activate),
        rows_per_query=cp.getint("units", "rows_per_query",
                                 fallback=d.units.rows_per_query),
        t_key_stage=cp.getfloat("units", "t_key_stage",
                                fallback=d.units.t_key_stage),
        sorter_units=cp.getint("units", "sorter_units",
                               fallback=d.units.sorter_units),
        sorter_freq=cp.getfloat("units", "sorter_freq",
                                fallback=d.units.sorter_freq),
    )
    pj_op = {k: cp.getfloat("energy", f"pj_op_{k}", fallback=v)
             for k, v in d.energy.pj_per_op.items()}
    pj_byte = {k: cp.getfloat("energy", f"pj_byte_{k}", fallback=v)
               for k, v in d.energy.pj_per_byte_hop.items()}
    energy = EnergyConfig(
        pj_per_op=pj_op, pj_per_byte_hop=pj_byte,
        bit_serial_op_factor=cp.getfloat(
            "energy", "bit_serial_op_factor",
            fallback=d.energy.bit_serial_op_factor))
    return HardwareConfig(ssd=ssd, dram=dram, units=units, energy=energy)
