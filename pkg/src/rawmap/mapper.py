"""Online mapping: seeding, filtering, voting, sorting, and DP chaining.

A read's quantized events are hashed into seeds, over-frequent seeds are
dropped, index hits become anchors, anchors vote inside overlapping
reference windows, survivors are sorted by the hardware sort stage, and a
gap-penalized dynamic program picks the best colinear chain.  Every step
logs op counts and byte volumes into an OperationTrace for the cost
simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import sortnet
from .event_pipeline import EventSequence, FixedPointFormat, signal_to_events
from .reference_index import ReferenceIndex, query, seed_hashes
from .signal_model import RawSignal
from .trace import OperationTrace

SAMPLE_BYTES = 2   # 16-bit fixed-point sample
EVENT_BYTES = 4    # mean code + length
SEED_BYTES = 8     # 32-bit hash + 32-bit read position
ANCHOR_BYTES = 8   # two 32-bit positions
CHAIN_RECORD_BYTES = 16


class MapperError(Exception):
    pass


@dataclass(frozen=True)
class Anchor:
    read_pos: int
    ref_pos: int


@dataclass(frozen=True)
class FilterParams:
    thresh_freq: int
    thresh_voting: int
    voting_window: int

    def __post_init__(self):
        if self.thresh_freq < 1 or self.thresh_voting < 1 or self.voting_window < 2:
            raise MapperError("filter parameters must be >= 1 (window >= 2)")


# best-accuracy/performance tuples from the design-space exploration
SMALL_GENOME_FILTERS = FilterParams(thresh_freq=2000, thresh_voting=5,
                                    voting_window=256)
LARGE_GENOME_FILTERS = FilterParams(thresh_freq=20000, thresh_voting=2,
                                    voting_window=256)
LARGE_GENOME_CUTOVER = 50_000_000  # bases


def filters_for_genome(reference_length: int) -> FilterParams:
    if reference_length >= LARGE_GENOME_CUTOVER:
        return LARGE_GENOME_FILTERS
    return SMALL_GENOME_FILTERS


@dataclass
class Chain:
    anchors: list[Anchor]
    score: float
    ref_start: int
    ref_end: int


@dataclass
class MappingResult:
    read_id: str
    status: str                      # "mapped" | "unmapped"
    ref_pos: int = -1
    ref_end: int = -1
    score: float = 0.0
    n_anchors_considered: int = 0
    n_chain_anchors: int = 0
    read_len_events: int = 0
    trace: OperationTrace = field(default_factory=OperationTrace)


@dataclass
class MapParams:
    n_events_per_seed: int = 5
    bucket_bits: int = 5
    detect_window: int = 4
    threshold_t: float = 2.5
    fmt: FixedPointFormat = field(default_factory=FixedPointFormat)
    filters: Optional[FilterParams] = None   # None: auto by genome size
    filters_enabled: bool = True
    max_gap: int = 500
    max_skip: int = 25
    events_to_bases: float = 1.0
    min_score: Optional[float] = None        # None: 3 * seed weight
    arithmetic: str = "fixed"                # "fixed" | "float"

    def resolved_filters(self, reference_length: int) -> FilterParams:
        return self.filters or filters_for_genome(reference_length)


# ---------------------------------------------------------------------------
# Seeding and filtering
# ---------------------------------------------------------------------------

def generate_seeds(events: EventSequence, n_events_per_seed: int
                   ) -> list[tuple[int, int]]:
    """One (read_pos, hash) per sliding window of n consecutive events."""
    codes = events.bucket_codes()
    if codes.size < n_events_per_seed:
        raise MapperError(
            f"read {events.read_id!r}: {codes.size} events < seed span")
    hashes = seed_hashes(codes, n_events_per_seed, events.params.bucket_bits)
    return [(i, int(h)) for i, h in enumerate(hashes)]


def frequency_filter(index: ReferenceIndex, seeds: list[tuple[int, int]],
                     thresh_freq: int) -> list[tuple[int, int]]:
    """Drop seeds whose hash occurs more than thresh_freq times in the
    reference.  Seeds absent from the index are kept (they yield no hits)."""
    return [(pos, h) for pos, h in seeds
            if index.freq.get(h, 0) <= thresh_freq]


def collect_anchors(index: ReferenceIndex, seeds: list[tuple[int, int]]
                    ) -> list[Anchor]:
    anchors: list[Anchor] = []
    for read_pos, h in seeds:
        for ref_pos in query(index, h):
            anchors.append(Anchor(read_pos=read_pos, ref_pos=ref_pos))
    return anchors


def seed_and_vote(anchors: list[Anchor], reference_length: int,
                  params: FilterParams) -> list[Anchor]:
    """Window-voting filter over overlapping, half-stride reference windows.

    An anchor votes in each window containing its ref_pos (one or two);
    votes from the same read_pos count once per window, so one repetitive
    seed cannot validate a region by itself.  Anchors survive iff at
    least one of their windows reaches thresh_voting votes.
    """
    if not anchors:
        return []
    stride = params.voting_window // 2
    votes: dict[int, set[int]] = {}
    for a in anchors:
        j0 = a.ref_pos // stride
        for j in (j0 - 1, j0):
            if j >= 0:
                votes.setdefault(j, set()).add(a.read_pos)
    alive = {j for j, readers in votes.items()
             if len(readers) >= params.thresh_voting}
    out = []
    for a in anchors:
        j0 = a.ref_pos // stride
        if j0 in alive or (j0 - 1) in alive:
            out.append(a)
    return out


# ---------------------------------------------------------------------------
# Chaining
# ---------------------------------------------------------------------------

def chain(anchors: list[Anchor], max_gap: int = 500, max_skip: int = 25,
          weight: int = 5, events_to_bases: float = 1.0,
          arithmetic: str = "fixed",
          fmt: FixedPointFormat | None = None) -> tuple[Chain, int]:
    """Best colinear chain by gap-penalized DP over (ref_pos, read_pos)-
    sorted anchors.

    gap_cost(i, j) = |(ref_i - ref_j) - (read_i - read_j) * events_to_bases|
    using additions and comparisons only; at most max_skip predecessors
    are scanned per anchor.  Returns the chain and the number of DP inner
    iterations (for the cost trace).  Empty input yields an empty chain.
    """
    fmt = fmt or FixedPointFormat()
    n = len(anchors)
    if n == 0:
        return Chain(anchors=[], score=0.0, ref_start=-1, ref_end=-1), 0
    for prev, cur in zip(anchors[:-1], anchors[1:]):
        if (cur.ref_pos, cur.read_pos) < (prev.ref_pos, prev.read_pos):
            raise MapperError("anchors not sorted by (ref_pos, read_pos)")
    if n > 10 ** 6:
        raise MapperError("too many anchors for one read")

    one = 1 << fmt.fractional_bits if arithmetic == "fixed" else 1.0
    w = weight * one
    f = [w] * n
    parent = [-1] * n
    ref_start = [a.ref_pos for a in anchors]
    length = [1] * n
    iterations = 0
    for i in range(n):
        ai = anchors[i]
        best = 0
        best_j = -1
        lo = max(0, i - max_skip)
        for j in range(i - 1, lo - 1, -1):
            aj = anchors[j]
            iterations += 1
            dr = ai.ref_pos - aj.ref_pos
            dq = ai.read_pos - aj.read_pos
            if dr <= 0 or dq <= 0 or dr > max_gap or dq > max_gap:
                continue
            gap = abs(dr * one - dq * events_to_bases * one)
            if arithmetic == "fixed":
                gap = int(round(gap))
            cand = f[j] - gap
            if cand > best or (cand == best and best_j >= 0 and (
                    (ref_start[j], -length[j]) <
                    (ref_start[best_j], -length[best_j]))):
                best = cand
                best_j = j
        if best > 0 and best_j >= 0:
            f[i] = w + best
            parent[i] = best_j
            ref_start[i] = ref_start[best_j]
            length[i] = length[best_j] + 1

    best_i = 0
    for i in range(1, n):
        key_i = (-f[i], ref_start[i], -length[i])
        key_b = (-f[best_i], ref_start[best_i], -length[best_i])
        if key_i < key_b:
            best_i = i
    chosen: list[Anchor] = []
    i = best_i
    while i >= 0:
        chosen.append(anchors[i])
        i = parent[i]
    chosen.reverse()
    score = f[best_i] / one if arithmetic == "fixed" else f[best_i]
    return Chain(anchors=chosen, score=float(score),
                 ref_start=chosen[0].ref_pos,
                 ref_end=chosen[-1].ref_pos), iterations


# ---------------------------------------------------------------------------
# Full per-read pipeline
# ---------------------------------------------------------------------------

def map_read(raw: RawSignal, index: ReferenceIndex,
             params: MapParams | None = None) -> MappingResult:
    params = params or MapParams()
    filters = params.resolved_filters(index.reference_length)
    trace = OperationTrace(n_reads=1)
    n_samples = int(raw.samples.size)
    trace.input_bytes = n_samples * SAMPLE_BYTES
    trace.index_size_bytes = index.size_bytes

    def fail(reason: str) -> MappingResult:
        return MappingResult(read_id=raw.read_id, status="unmapped",
                             trace=trace)

    # 1a/1b: event detection and quantization
    try:
        events = signal_to_events(
            raw, bucket_bits=index.quant.bucket_bits, fmt=params.fmt,
            window=params.detect_window, threshold_t=params.threshold_t,
            arithmetic=params.arithmetic)
    except Exception:
        return fail("signal too short or degenerate")
    n_events = len(events)
    st = trace.steps["1a"]
    st.bytes_in = n_samples * SAMPLE_BYTES
    st.bytes_out = n_events * EVENT_BYTES
    st.add_op("add", 6 * n_samples)
    st.add_op("multiply", 2 * n_samples)
    st.add_op("divide", n_samples)
    st.add_op("compare", 2 * n_samples)
    st = trace.steps["1b"]
    st.bytes_in = n_events * EVENT_BYTES
    st.bytes_out = n_events * EVENT_BYTES
    st.add_op("add", n_events)
    st.add_op("multiply", n_events)
    st.add_op("divide", n_events)
    st.add_op("compare", 2 * n_events)

    # 2c: seed generation
    if n_events < params.n_events_per_seed:
        _fill_empty_tail(trace, "2c")
        return fail("read shorter than seed span")
    seeds = generate_seeds(events, params.n_events_per_seed)
    st = trace.steps["2c"]
    st.bytes_in = n_events * EVENT_BYTES
    st.bytes_out = len(seeds) * SEED_BYTES
    st.add_op("add", params.n_events_per_seed * len(seeds))
    st.add_op("multiply", 2 * len(seeds))

    # 2d: frequency filter
    if params.filters_enabled:
        kept = frequency_filter(index, seeds, filters.thresh_freq)
    else:
        kept = seeds
    st = trace.steps["2d"]
    st.bytes_in = len(seeds) * SEED_BYTES
    st.bytes_out = len(kept) * SEED_BYTES
    st.add_op("compare", len(seeds))

    # 2e: index query
    anchors = collect_anchors(index, kept)
    st = trace.steps["2e"]
    st.bytes_in = len(kept) * SEED_BYTES
    st.bytes_out = len(anchors) * ANCHOR_BYTES
    st.add_op("lookup", len(kept))

    # 2f: seed-and-vote
    if params.filters_enabled:
        voted = seed_and_vote(anchors, index.reference_length, filters)
    else:
        voted = anchors
    st = trace.steps["2f"]
    st.bytes_in = len(anchors) * ANCHOR_BYTES
    st.bytes_out = len(voted) * ANCHOR_BYTES
    st.add_op("add", 2 * len(anchors))
    st.add_op("compare", 2 * len(anchors))

    # 3g: bucketize
    st = trace.steps["3g"]
    st.bytes_in = len(voted) * ANCHOR_BYTES
    st.bytes_out = len(voted) * ANCHOR_BYTES
    st.add_op("multiply", len(voted))
    st.add_op("divide", len(voted))
    st.add_op("compare", len(voted))

    # 3h: hardware sort stage
    sorted_anchors, bucket_stats = sortnet.sort_and_merge(
        voted, index.reference_length)
    combined = sortnet.SortStats()
    for s in bucket_stats:
        combined = combined.combine(s)
    st = trace.steps["3h"]
    st.bytes_in = len(voted) * ANCHOR_BYTES
    st.bytes_out = len(voted) * ANCHOR_BYTES
    st.add_op("sort_cycle", combined.network_stages + combined.merge_steps)

    # 3i: chaining DP
    best, dp_iterations = chain(
        sorted_anchors, max_gap=params.max_gap, max_skip=params.max_skip,
        weight=params.n_events_per_seed,
        events_to_bases=params.events_to_bases,
        arithmetic=params.arithmetic, fmt=params.fmt)
    st = trace.steps["3i"]
    st.bytes_in = len(voted) * ANCHOR_BYTES
    st.bytes_out = CHAIN_RECORD_BYTES
    st.add_op("add", 4 * dp_iterations)
    st.add_op("compare", 5 * dp_iterations)
    st.add_op("multiply", dp_iterations)

    min_score = (params.min_score if params.min_score is not None
                 else 3.0 * params.n_events_per_seed)
    result = MappingResult(
        read_id=raw.read_id, status="unmapped",
        n_anchors_considered=len(voted),
        read_len_events=n_events, trace=trace)
    if best.anchors and best.score >= min_score:
        first = best.anchors[0]
        last = best.anchors[-1]
        # project the chain back to the read's origin; the chain's own
        # slope corrects for merged events compressing the read axis
        slope = 1.0
        if last.read_pos > first.read_pos:
            slope = (last.ref_pos - first.ref_pos) / (last.read_pos - first.read_pos)
            slope = min(2.0, max(0.5, slope))
        result.status = "mapped"
        result.ref_pos = max(0, int(round(first.ref_pos - first.read_pos * slope)))
        result.ref_end = best.ref_end
        result.score = best.score
        result.n_chain_anchors = len(best.anchors)
    return result


def _fill_empty_tail(trace: OperationTrace, from_step: str) -> None:
    """Zero the byte chain from a step onward so conservation still holds
    when a read drops out of the pipeline early."""
    steps = list(trace.steps)
    pos = steps.index(from_step)
    if pos > 0:
        trace.steps[steps[pos - 1]].bytes_out = 0
    for s in steps[pos:]:
        trace.steps[s].bytes_in = 0
        trace.steps[s].bytes_out = 0


# ---------------------------------------------------------------------------
# Mapping output (PAF-like TSV)
# ---------------------------------------------------------------------------

MAPPING_HEADER = ["read_id", "read_len_events", "status", "ref_id",
                  "ref_start", "ref_end", "n_anchors", "score"]


def write_mappings(results: list[MappingResult], ref_id: str, path) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(MAPPING_HEADER) + "\n")
        for r in sorted(results, key=lambda x: x.read_id):
            fh.write("\t".join(map(str, [
                r.read_id, r.read_len_events, r.status,
                ref_id if r.status == "mapped" else ".",
                r.ref_pos, r.ref_end, r.n_anchors_considered,
                f"{r.score:.4f}"])) + "\n")


def read_mappings(path) -> list[dict]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split("\t")
        if header != MAPPING_HEADER:
            raise MapperError(f"{path}: bad mappings header {header!r}")
        for line in fh:
            vals = line.strip().split("\t")
            row = dict(zip(header, vals))
            row["ref_start"] = int(row["ref_start"])
            row["ref_end"] = int(row["ref_end"])
            row["score"] = float(row["score"])
            rows.append(row)
    return rows
