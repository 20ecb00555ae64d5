"""Hash-table index over quantized reference events.

Each sliding window of n consecutive event level codes is packed into a
64-bit word (code j at bit offset j*bucket_bits), mixed through the
splitmix64 finalizer

    x ^= x >> 30;  x *= 0xBF58476D1CE4E5B9
    x ^= x >> 27;  x *= 0x94D049BB133111EB
    x ^= x >> 31

and truncated to 32 bits.  Postings are ascending reference positions;
per-hash occurrence counts feed the frequency filter, and the serialized
size feeds the simulator's DRAM partitioning.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .event_pipeline import EventSequence, FixedPointFormat, QuantizationParams

MAGIC = b"RWMI"
VERSION = 1


class ReferenceIndexError(Exception):
    pass


def pack_codes(codes: np.ndarray, n: int, bucket_bits: int) -> np.ndarray:
    """Pack every length-n window of level codes into one uint64 per window."""
    if n * bucket_bits > 64:
        raise ReferenceIndexError("n_events_per_seed * bucket_bits exceeds 64 bits")
    codes = np.asarray(codes, dtype=np.uint64)
    m = codes.size - n + 1
    if m <= 0:
        raise ReferenceIndexError(f"too few events: {codes.size} < {n}")
    words = np.zeros(m, dtype=np.uint64)
    for j in range(n):
        words |= codes[j:j + m] << np.uint64(j * bucket_bits)
    return words


def mix64_to_32(words: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, truncated to 32 bits; vectorized."""
    x = np.asarray(words, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
    return (x & np.uint64(0xFFFFFFFF)).astype(np.uint32)


def seed_hashes(codes: np.ndarray, n: int, bucket_bits: int) -> np.ndarray:
    """32-bit hash of every length-n window of event level codes."""
    return mix64_to_32(pack_codes(codes, n, bucket_bits))


@dataclass
class ReferenceIndex:
    n_events_per_seed: int
    table: dict[int, list[int]]
    freq: dict[int, int]
    quant: QuantizationParams
    format: FixedPointFormat
    reference_length: int
    reference_id: str = "ref"
    _size_bytes: int | None = field(default=None, repr=False, compare=False)

    @property
    def size_bytes(self) -> int:
        if self._size_bytes is None:
            self._size_bytes = len(serialize(self))
        return self._size_bytes

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReferenceIndex):
            return NotImplemented
        return (self.n_events_per_seed == other.n_events_per_seed
                and self.table == other.table
                and self.freq == other.freq
                and self.quant == other.quant
                and self.format == other.format
                and self.reference_length == other.reference_length
                and self.reference_id == other.reference_id)


def build_index(ref_events: EventSequence, n_events_per_seed: int) -> ReferenceIndex:
    if not (2 <= n_events_per_seed <= 16):
        raise ReferenceIndexError(f"n_events_per_seed out of [2, 16]: {n_events_per_seed}")
    codes = ref_events.bucket_codes()
    if codes.size < n_events_per_seed:
        raise ReferenceIndexError(
            f"too few events: {codes.size} < {n_events_per_seed}")
    hashes = seed_hashes(codes, n_events_per_seed, ref_events.params.bucket_bits)
    order = np.argsort(hashes, kind="stable")
    table: dict[int, list[int]] = {}
    for pos in order:
        table.setdefault(int(hashes[pos]), []).append(int(pos))
    # rebuild in ascending-hash order for deterministic serialization
    table = {h: table[h] for h in sorted(table)}
    freq = {h: len(v) for h, v in table.items()}
    return ReferenceIndex(
        n_events_per_seed=n_events_per_seed,
        table=table,
        freq=freq,
        quant=ref_events.params,
        format=ref_events.format,
        reference_length=codes.size,  # one event per reference base offset
        reference_id=ref_events.read_id,
    )


def query(index: ReferenceIndex, h: int) -> list[int]:
    """Positions stored for hash h; empty on miss, never an error."""
    return index.table.get(int(h), [])


# ---------------------------------------------------------------------------
# Serialization: versioned, little-endian, length-prefixed sections
# ---------------------------------------------------------------------------

def serialize(index: ReferenceIndex) -> bytes:
    ref_id = index.reference_id.encode()
    header = struct.pack(
        "<BBdd IIH", index.n_events_per_seed, index.quant.bucket_bits,
        index.quant.shift, index.quant.scale,
        index.reference_length, len(index.table), index.format.fractional_bits)
    header += struct.pack("<H", len(ref_id)) + ref_id
    chunks = [struct.pack("<I", len(header)), header]
    postings = bytearray()
    for h in index.table:
        positions = index.table[h]
        postings += struct.pack("<II", h, len(positions))
        postings += np.asarray(positions, dtype="<u4").tobytes()
    chunks.append(struct.pack("<Q", len(postings)))
    chunks.append(bytes(postings))
    payload = b"".join(chunks)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return MAGIC + struct.pack("<H", VERSION) + payload + struct.pack("<I", crc)


def deserialize(blob: bytes) -> ReferenceIndex:
    if len(blob) < 10 or blob[:4] != MAGIC:
        raise ReferenceIndexError("not an index file (bad magic)")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise ReferenceIndexError(f"unsupported index version {version}")
    payload, crc_bytes = blob[6:-4], blob[-4:]
    (crc_stored,) = struct.unpack("<I", crc_bytes)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc_stored:
        raise ReferenceIndexError("checksum mismatch: index file corrupted")
    off = 0
    (header_len,) = struct.unpack_from("<I", payload, off)
    off += 4
    header = payload[off:off + header_len]
    (n_seed, bucket_bits, shift, scale, ref_len, n_hashes,
     frac_bits) = struct.unpack_from("<BBdd IIH", header, 0)
    pos = struct.calcsize("<BBdd IIH")
    (id_len,) = struct.unpack_from("<H", header, pos)
    ref_id = header[pos + 2:pos + 2 + id_len].decode()
    off += header_len
    (postings_len,) = struct.unpack_from("<Q", payload, off)
    off += 8
    end = off + postings_len
    if end > len(payload):
        raise ReferenceIndexError("truncated index file")
    table: dict[int, list[int]] = {}
    while off < end:
        h, count = struct.unpack_from("<II", payload, off)
        off += 8
        positions = np.frombuffer(payload, dtype="<u4", count=count, offset=off)
        off += 4 * count
        table[h] = [int(p) for p in positions]
    if len(table) != n_hashes:
        raise ReferenceIndexError("truncated index file: posting count mismatch")
    freq = {h: len(v) for h, v in table.items()}
    return ReferenceIndex(
        n_events_per_seed=n_seed,
        table=table,
        freq=freq,
        quant=QuantizationParams(bucket_bits=bucket_bits, shift=shift, scale=scale),
        format=FixedPointFormat(fractional_bits=frac_bits),
        reference_length=ref_len,
        reference_id=ref_id,
        _size_bytes=len(blob),
    )


def save_index(index: ReferenceIndex, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(index))


def load_index(path) -> ReferenceIndex:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
