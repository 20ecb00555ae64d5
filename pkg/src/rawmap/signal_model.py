"""Pore model, synthetic references/reads, and raw-signal generation.

Bridges the nucleotide and current-signal domains: a pore model maps each
k-mer to an expected current level, and the generators here produce
references, reads, and noisy raw signals with ground-truth origins so the
mapper can be evaluated against known answers at desk scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .rng import Rng

BASES = "ACGT"
_COMPLEMENT = str.maketrans("ACGT", "TGCA")

MOTIF_LENGTH = 500  # repeat motif used by generate_reference


class SignalModelError(Exception):
    """Raised for malformed pore models, sequences, or generator misuse."""


@dataclass
class Sequence:
    id: str
    bases: str

    def __post_init__(self):
        self.bases = self.bases.upper()
        if not set(self.bases) <= set(BASES):
            bad = sorted(set(self.bases) - set(BASES))
            raise SignalModelError(f"sequence {self.id!r}: invalid characters {bad}")

    def __len__(self) -> int:
        return len(self.bases)

    def reverse_complement(self) -> "Sequence":
        return Sequence(self.id, self.bases.translate(_COMPLEMENT)[::-1])


@dataclass
class PoreModel:
    """k-mer -> (mean_current pA, std_dev pA) lookup table."""

    k: int
    levels: dict[str, tuple[float, float]]

    def __post_init__(self):
        expected = 4 ** self.k
        if len(self.levels) != expected:
            raise SignalModelError(
                f"incomplete table: expected {expected} k-mers, got {len(self.levels)}"
            )
        for kmer, (mean, std) in self.levels.items():
            if len(kmer) != self.k:
                raise SignalModelError(f"inconsistent k-mer length: {kmer!r}")
            if not (0.0 < mean < 300.0):
                raise SignalModelError(f"mean current out of range for {kmer!r}: {mean}")
            if std < 0.0:
                raise SignalModelError(f"negative std_dev for {kmer!r}: {std}")

    def mean_of(self, kmer: str) -> float:
        return self.levels[kmer][0]

    def level_array(self) -> np.ndarray:
        """All mean currents in lexicographic k-mer order."""
        return np.array([self.levels[km][0] for km in sorted(self.levels)])


@dataclass
class RawSignal:
    read_id: str
    samples: np.ndarray
    truth: Optional[tuple[str, int, str]] = None  # (reference_id, start, strand)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.size == 0:
            raise SignalModelError(f"read {self.read_id!r}: empty sample array")


@dataclass(frozen=True)
class DatasetPreset:
    name: str
    genome_size: int
    read_count: int
    mean_read_length: int

    def __post_init__(self):
        if self.genome_size < 1000:
            raise SignalModelError("genome_size must be >= 1000")
        if self.read_count < 0:
            raise SignalModelError("read_count must be >= 0")


# Generator presets; genome sizes follow the evaluated-dataset descriptors,
# scaled read counts for desk-scale runs.
PRESETS = {
    "d1-like": DatasetPreset("d1-like", 29_903, 500, 1000),
    "d2-like": DatasetPreset("d2-like", 4_600_000, 200, 2000),
    "tiny": DatasetPreset("tiny", 10_000, 50, 800),
}


# ---------------------------------------------------------------------------
# Pore model IO and synthesis
# ---------------------------------------------------------------------------

def load_pore_model(path: str | Path) -> PoreModel:
    """Load a community-layout TSV (columns kmer / level_mean / level_stdv)."""
    path = Path(path)
    levels: dict[str, tuple[float, float]] = {}
    k: int | None = None
    with open(path) as fh:
        header = fh.readline().strip().split("\t")
        if header[:3] != ["kmer", "level_mean", "level_stdv"]:
            raise SignalModelError(f"{path}: bad header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise SignalModelError(f"{path}:{lineno}: malformed row {line!r}")
            kmer = parts[0].upper()
            try:
                mean, std = float(parts[1]), float(parts[2])
            except ValueError as exc:
                raise SignalModelError(f"{path}:{lineno}: malformed row {line!r}") from exc
            if k is None:
                k = len(kmer)
            elif len(kmer) != k:
                raise SignalModelError(f"{path}:{lineno}: inconsistent k-mer length {kmer!r}")
            if kmer in levels:
                raise SignalModelError(f"{path}:{lineno}: duplicate k-mer {kmer!r}")
            levels[kmer] = (mean, std)
    if k is None:
        raise SignalModelError(f"{path}: empty model file")
    if len(levels) != 4 ** k:
        raise SignalModelError(f"incomplete table: expected {4 ** k}, got {len(levels)}")
    return PoreModel(k=k, levels=levels)


def save_pore_model(model: PoreModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("kmer\tlevel_mean\tlevel_stdv\n")
        for kmer in sorted(model.levels):
            mean, std = model.levels[kmer]
            fh.write(f"{kmer}\t{mean:.4f}\t{std:.4f}\n")


def synth_pore_model(k: int, rng_seed: int) -> PoreModel:
    """Deterministic synthetic model: means uniform in [60, 130] pA, std 2.0."""
    if not (1 <= k <= 8):
        raise SignalModelError(f"k out of range [1, 8]: {k}")
    rng = Rng(rng_seed)
    levels = {}
    for combo in itertools.product(BASES, repeat=k):
        levels["".join(combo)] = (round(rng.uniform(60.0, 130.0), 4), 2.0)
    return PoreModel(k=k, levels=levels)


# ---------------------------------------------------------------------------
# Reference and read generation
# ---------------------------------------------------------------------------

def generate_reference(length: int, repeat_fraction: float, rng_seed: int,
                       ref_id: str = "ref") -> Sequence:
    """Random reference; repeat_fraction of it is copies of one 500-base motif.

    Motif copies exercise the frequency filter: each copy contributes the
    same seed hashes, pushing their index frequency above threshold.
    """
    if length < 1000:
        raise SignalModelError(f"reference length must be >= 1000, got {length}")
    if not (0.0 <= repeat_fraction <= 1.0):
        raise SignalModelError(f"repeat_fraction out of [0,1]: {repeat_fraction}")
    rng = Rng(rng_seed)
    motif = "".join(BASES[rng.choice_index(4)] for _ in range(MOTIF_LENGTH))
    chars = [BASES[rng.choice_index(4)] for _ in range(length)]
    n_copies = int(length * repeat_fraction) // MOTIF_LENGTH
    if n_copies > 0:
        block = length // n_copies
        for c in range(n_copies):
            lo = c * block
            hi = min(lo + block, length) - MOTIF_LENGTH
            if hi < lo:
                raise SignalModelError("repeat_fraction too high for this length")
            start = rng.randint(lo, hi)
            chars[start:start + MOTIF_LENGTH] = motif
    return Sequence(ref_id, "".join(chars))


def sequence_to_signal(seq: Sequence, model: PoreModel,
                       samples_per_event_mean: int, noise_std: float,
                       rng_seed: int, read_id: str | None = None,
                       truth: Optional[tuple[str, int, str]] = None,
                       fixed_dwell: bool = False) -> RawSignal:
    """Emit noisy current samples for each k-mer of seq.

    Dwell per k-mer is geometric with the given mean, clamped to
    [1, 4*mean]; with fixed_dwell the dwell is exactly the mean (zero
    variance), which gives noiseless round-trip tests a clean oracle.
    Each sample is the model mean plus Gaussian noise.
    """
    if len(seq) < model.k:
        raise SignalModelError(
            f"sequence {seq.id!r} shorter than k={model.k}")
    if samples_per_event_mean < 1:
        raise SignalModelError("samples_per_event_mean must be >= 1")
    rng = Rng(rng_seed)
    out: list[float] = []
    dwell_cap = 4 * samples_per_event_mean
    for i in range(len(seq) - model.k + 1):
        mean = model.mean_of(seq.bases[i:i + model.k])
        if fixed_dwell:
            d = samples_per_event_mean
        else:
            d = min(rng.geometric(samples_per_event_mean), dwell_cap)
        for _ in range(d):
            x = mean
            if noise_std > 0.0:
                x += rng.gauss(0.0, noise_std)
            out.append(x)
    return RawSignal(read_id or seq.id, np.array(out), truth=truth)


def generate_read_set(reference: Sequence, preset: DatasetPreset,
                      model: PoreModel, noise_std: float, rng_seed: int,
                      samples_per_event_mean: int = 8,
                      reverse_strand: bool = False) -> list[RawSignal]:
    """Sample reads uniformly from the reference and convert them to signals.

    Every returned signal carries (reference_id, start, strand) ground truth.
    Reads are forward-strand unless reverse_strand is set, in which case
    each read's strand is a fair coin flip.
    """
    if preset.mean_read_length > len(reference):
        raise SignalModelError(
            f"preset mean_read_length {preset.mean_read_length} exceeds "
            f"reference length {len(reference)}")
    rng = Rng(rng_seed)
    reads: list[RawSignal] = []
    min_len = model.k + 10
    for idx in range(preset.read_count):
        length = int(round(rng.gauss(preset.mean_read_length,
                                     preset.mean_read_length / 10.0)))
        length = max(min_len, min(length, len(reference)))
        start = rng.randint(0, len(reference) - length)
        sub = reference.bases[start:start + length]
        strand = "+"
        if reverse_strand and rng.random() < 0.5:
            sub = sub.translate(_COMPLEMENT)[::-1]
            strand = "-"
        read_seq = Sequence(f"read{idx:05d}", sub)
        sig = sequence_to_signal(
            read_seq, model, samples_per_event_mean, noise_std,
            rng_seed=rng.next_u64(), read_id=read_seq.id,
            truth=(reference.id, start, strand))
        reads.append(sig)
    return reads


# ---------------------------------------------------------------------------
# FASTA and raw-signal container IO
# ---------------------------------------------------------------------------

def write_fasta(seqs: Iterable[Sequence], path: str | Path, width: int = 80) -> None:
    with open(path, "w") as fh:
        for seq in seqs:
            fh.write(f">{seq.id}\n")
            for i in range(0, len(seq.bases), width):
                fh.write(seq.bases[i:i + width] + "\n")


def read_fasta(path: str | Path) -> list[Sequence]:
    seqs: list[Sequence] = []
    name: str | None = None
    chunks: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                if name is not None:
                    seqs.append(Sequence(name, "".join(chunks)))
                name = line[1:].split()[0]
                chunks = []
            else:
                chunks.append(line)
    if name is not None:
        seqs.append(Sequence(name, "".join(chunks)))
    if not seqs:
        raise SignalModelError(f"{path}: no FASTA records")
    return seqs


def write_signals(signals: Iterable[RawSignal], path: str | Path) -> None:
    """Line-oriented container: a '#read' header then decimal samples."""
    with open(path, "w") as fh:
        for sig in signals:
            if sig.truth is not None:
                ref, pos, strand = sig.truth
                fh.write(f"#read {sig.read_id} {ref} {pos} {strand}\n")
            else:
                fh.write(f"#read {sig.read_id} . -1 .\n")
            vals = " ".join(f"{x:.3f}" for x in sig.samples)
            fh.write(vals + "\n")


def read_signals(path: str | Path) -> list[RawSignal]:
    signals: list[RawSignal] = []
    with open(path) as fh:
        header: list[str] | None = None
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#read"):
                header = line.split()
            else:
                if header is None:
                    raise SignalModelError(f"{path}: samples before #read header")
                _, read_id, ref, pos, strand = header
                truth = None if ref == "." else (ref, int(pos), strand)
                samples = np.array([float(v) for v in line.split()])
                signals.append(RawSignal(read_id, samples, truth=truth))
                header = None
    return signals
