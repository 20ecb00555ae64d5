"""Hardware-style sort stage: 8-way bucketization, 128-element bitonic
sorter blocks, and a streaming merge, with exact comparator/stage counts
for the cost model.

The network is data-oblivious: for a block padded to p elements it always
runs log2(p)*(log2(p)+1)/2 stages of p/2 comparators (28 stages / 1792
comparators at p=128).  Comparators where both operands are real data are
counted in comparators_fired; comparators touching a padding sentinel are
tallied separately so the cost model can exclude them (default) or not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_BUCKETS = 8
BLOCK_SIZE = 128
SENTINEL = np.uint64(0xFFFFFFFFFFFFFFFF)


class SortnetError(Exception):
    pass


@dataclass
class SortStats:
    elements: int = 0
    network_stages: int = 0
    comparators_fired: int = 0
    sentinel_comparators: int = 0
    merge_steps: int = 0

    def combine(self, other: "SortStats") -> "SortStats":
        return SortStats(
            elements=self.elements + other.elements,
            network_stages=self.network_stages + other.network_stages,
            comparators_fired=self.comparators_fired + other.comparators_fired,
            sentinel_comparators=self.sentinel_comparators + other.sentinel_comparators,
            merge_steps=self.merge_steps + other.merge_steps,
        )


def _ref_pos(item) -> int:
    if hasattr(item, "ref_pos"):
        return item.ref_pos
    if isinstance(item, tuple):
        return item[0]
    return int(item)


def default_key(item):
    """Anchor ordering: ascending (ref_pos, read_pos)."""
    if hasattr(item, "ref_pos"):
        return (item.ref_pos, item.read_pos)
    return item


def _key_array(items, key) -> np.ndarray:
    """Map item keys to uint64 so the network can compare vectorized.

    Accepts scalar integer keys in [0, 2^64-2] or pairs of 32-bit
    integers, which are packed as hi<<32 | lo.  The all-ones word is
    reserved for the padding sentinel.
    """
    keys = [key(it) for it in items]
    if not keys:
        return np.empty(0, dtype=np.uint64)
    if isinstance(keys[0], tuple):
        hi = np.array([k[0] for k in keys], dtype=np.uint64)
        lo = np.array([k[1] for k in keys], dtype=np.uint64)
        if (hi >> np.uint64(32)).any() or (lo >> np.uint64(32)).any():
            raise SortnetError("pair keys must fit in 32 bits each")
        return (hi << np.uint64(32)) | lo
    arr = np.array(keys, dtype=np.uint64)
    if (arr == SENTINEL).any():
        raise SortnetError("key value 2^64-1 is reserved for padding")
    return arr


# per padded size: list of (left indices, right indices, ascending mask)
_NETWORK_CACHE: dict[int, list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = {}


def _network_pattern(p: int):
    if p in _NETWORK_CACHE:
        return _NETWORK_CACHE[p]
    stages = []
    k = 2
    while k <= p:
        j = k // 2
        while j >= 1:
            i = np.arange(p)
            partner = i ^ j
            sel = partner > i
            left = i[sel]
            right = partner[sel]
            ascending = (left & k) == 0
            stages.append((left, right, ascending))
            j //= 2
        k *= 2
    _NETWORK_CACHE[p] = stages
    return stages


def _run_network(keys: np.ndarray, order: np.ndarray, stats: SortStats) -> None:
    """Run the bitonic network in place over (keys, order) rows of width p."""
    p = keys.shape[1]
    for left, right, ascending in _network_pattern(p):
        a = keys[:, left]
        b = keys[:, right]
        swap = np.where(ascending, a > b, a < b)
        real = (a != SENTINEL) & (b != SENTINEL)
        stats.comparators_fired += int(np.count_nonzero(real))
        stats.sentinel_comparators += int(real.size - np.count_nonzero(real))
        oa = order[:, left]
        ob = order[:, right]
        keys[:, left] = np.where(swap, b, a)
        keys[:, right] = np.where(swap, a, b)
        order[:, left] = np.where(swap, ob, oa)
        order[:, right] = np.where(swap, oa, ob)
    stats.network_stages += len(_NETWORK_CACHE[p]) * keys.shape[0]


def bitonic_sort_block(items, key=default_key) -> tuple[list, SortStats]:
    """Sort up to 128 items with the canonical bitonic network.

    Pads to the next power of two with +inf sentinels, sorts ascending,
    strips the padding.
    """
    n = len(items)
    if n > BLOCK_SIZE:
        raise SortnetError(f"block too large: {n} > {BLOCK_SIZE}")
    stats = SortStats(elements=n)
    if n <= 1:
        return list(items), stats
    p = 1
    while p < n:
        p *= 2
    keys = np.full((1, p), SENTINEL, dtype=np.uint64)
    keys[0, :n] = _key_array(items, key)
    order = np.arange(p, dtype=np.int64).reshape(1, p)
    _run_network(keys, order, stats)
    out = [items[i] for i in order[0] if i < n]
    return out, stats


def sort_key_matrix(keys: np.ndarray) -> tuple[np.ndarray, SortStats]:
    """Batch form: sort each row of a (blocks, p) uint64 key matrix
    (p a power of two, sentinels allowed).  Used by tests that push many
    vectors through the network at once."""
    stats = SortStats(elements=int(np.count_nonzero(keys != SENTINEL)))
    keys = keys.copy()
    order = np.tile(np.arange(keys.shape[1], dtype=np.int64), (keys.shape[0], 1))
    _run_network(keys, order, stats)
    return keys, stats


# ---------------------------------------------------------------------------
# Streaming merge
# ---------------------------------------------------------------------------

def _merge_two(keys_a, items_a, keys_b, items_b):
    """Stable two-run merge; run A wins ties.  Positions come from binary
    placement (searchsorted), not a comparison sort."""
    pos_a = np.arange(keys_a.size) + np.searchsorted(keys_b, keys_a, side="left")
    pos_b = np.arange(keys_b.size) + np.searchsorted(keys_a, keys_b, side="right")
    n = keys_a.size + keys_b.size
    keys = np.empty(n, dtype=np.uint64)
    keys[pos_a] = keys_a
    keys[pos_b] = keys_b
    items = [None] * n
    for p, it in zip(pos_a, items_a):
        items[p] = it
    for p, it in zip(pos_b, items_b):
        items[p] = it
    return keys, items


def stream_merge(runs: list[list], key=default_key) -> tuple[list, SortStats]:
    """One-pass k-way merge of individually sorted runs.

    Stability across equal keys follows run index.  merge_steps counts
    the elements emitted by the merger.
    """
    stats = SortStats()
    key_runs = []
    for r, run in enumerate(runs):
        karr = _key_array(run, key)
        if karr.size > 1 and (karr[1:] < karr[:-1]).any():
            raise SortnetError(f"run {r} is not sorted")
        key_runs.append((karr, list(run)))
    if not key_runs:
        return [], stats
    keys, items = key_runs[0]
    for karr, run_items in key_runs[1:]:
        keys, items = _merge_two(keys, items, karr, run_items)
    total = sum(k.size for k, _ in key_runs)
    stats.elements = total
    stats.merge_steps = total if len(key_runs) > 1 else 0
    return items, stats


# ---------------------------------------------------------------------------
# Bucketize and the full sort stage
# ---------------------------------------------------------------------------

def bucketize(anchors, reference_length: int) -> list[list]:
    """Partition by ref_pos into 8 equal reference regions, stable within
    each bucket."""
    if reference_length < 1:
        raise SortnetError("reference_length must be >= 1")
    buckets: list[list] = [[] for _ in range(N_BUCKETS)]
    for a in anchors:
        r = min(N_BUCKETS - 1, _ref_pos(a) * N_BUCKETS // reference_length)
        buckets[r].append(a)
    return buckets


def sort_and_merge(anchors, reference_length: int, key=default_key
                   ) -> tuple[list, list[SortStats]]:
    """Bucketize, block-sort each bucket (splitting blocks > 128), merge
    the per-bucket runs, and concatenate buckets in region order.

    Regions are non-overlapping, so concatenation needs no further merge.
    """
    buckets = bucketize(anchors, reference_length)
    out: list = []
    per_bucket: list[SortStats] = []
    for bucket in buckets:
        stats = SortStats()
        runs = []
        for lo in range(0, len(bucket), BLOCK_SIZE):
            sorted_block, s = bitonic_sort_block(bucket[lo:lo + BLOCK_SIZE], key)
            stats = stats.combine(s)
            runs.append(sorted_block)
        if len(runs) > 1:
            merged, ms = stream_merge(runs, key)
            stats = stats.combine(SortStats(merge_steps=ms.merge_steps))
        elif runs:
            merged = runs[0]
        else:
            merged = []
        out.extend(merged)
        per_bucket.append(stats)
    return out, per_bucket
