"""Pore model IO, synthetic generators, and container round trips."""

import numpy as np
import pytest

from rawmap import signal_model as sm
from rawmap.rng import Rng


def small_model(k=2, seed=5):
    return sm.synth_pore_model(k, rng_seed=seed)


# ---------------------------------------------------------------------------
# Sequence
# ---------------------------------------------------------------------------

def test_sequence_uppercases_and_validates():
    s = sm.Sequence("s", "acgt")
    assert s.bases == "ACGT"
    with pytest.raises(sm.SignalModelError):
        sm.Sequence("bad", "ACGN")


def test_reverse_complement():
    s = sm.Sequence("s", "AACGT")
    assert s.reverse_complement().bases == "ACGTT"


# ---------------------------------------------------------------------------
# Pore model
# ---------------------------------------------------------------------------

def test_synth_model_is_complete_and_deterministic():
    m1 = small_model(k=3, seed=42)
    m2 = small_model(k=3, seed=42)
    assert m1.k == 3 and len(m1.levels) == 64
    assert m1.levels == m2.levels
    for mean, std in m1.levels.values():
        assert 60.0 <= mean <= 130.0 and std == 2.0


def test_synth_model_k_bounds():
    with pytest.raises(sm.SignalModelError):
        sm.synth_pore_model(0, rng_seed=1)
    with pytest.raises(sm.SignalModelError):
        sm.synth_pore_model(9, rng_seed=1)


def test_pore_model_tsv_round_trip(tmp_path):
    model = small_model(k=2)
    path = tmp_path / "model.tsv"
    sm.save_pore_model(model, path)
    loaded = sm.load_pore_model(path)
    assert loaded.k == model.k
    for kmer in model.levels:
        assert loaded.levels[kmer] == pytest.approx(model.levels[kmer], abs=1e-4)


def test_pore_model_rejects_incomplete_table(tmp_path):
    path = tmp_path / "model.tsv"
    path.write_text("kmer\tlevel_mean\tlevel_stdv\nAA\t80.0\t2.0\n")
    with pytest.raises(sm.SignalModelError):
        sm.load_pore_model(path)


def test_pore_model_rejects_duplicates(tmp_path):
    path = tmp_path / "model.tsv"
    rows = ["kmer\tlevel_mean\tlevel_stdv"]
    rows += [f"{b}\t80.0\t2.0" for b in "ACGT"] + ["A\t90.0\t2.0"]
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(sm.SignalModelError):
        sm.load_pore_model(path)


def test_pore_model_rejects_inconsistent_k(tmp_path):
    path = tmp_path / "model.tsv"
    path.write_text("kmer\tlevel_mean\tlevel_stdv\nA\t80.0\t2.0\nCC\t90.0\t2.0\n")
    with pytest.raises(sm.SignalModelError):
        sm.load_pore_model(path)


def test_pore_model_rejects_bad_header(tmp_path):
    path = tmp_path / "model.tsv"
    path.write_text("a\tb\tc\nA\t80.0\t2.0\n")
    with pytest.raises(sm.SignalModelError):
        sm.load_pore_model(path)


def test_pore_model_constructor_validates_ranges():
    with pytest.raises(sm.SignalModelError):
        sm.PoreModel(k=1, levels={b: (500.0, 2.0) for b in "ACGT"})
    with pytest.raises(sm.SignalModelError):
        sm.PoreModel(k=1, levels={b: (80.0, -1.0) for b in "ACGT"})


# ---------------------------------------------------------------------------
# Reference generation
# ---------------------------------------------------------------------------

def test_generate_reference_length_and_determinism():
    r1 = sm.generate_reference(5000, 0.0, rng_seed=3)
    r2 = sm.generate_reference(5000, 0.0, rng_seed=3)
    assert len(r1) == 5000 and r1.bases == r2.bases


def test_generate_reference_plants_motif_copies():
    ref = sm.generate_reference(20000, 0.3, rng_seed=5)
    # 0.3 * 20000 / 500 = 12 motif copies; find the motif by its first copy
    n_copies = int(20000 * 0.3) // sm.MOTIF_LENGTH
    assert n_copies == 12
    # the most frequent 500-mer should appear exactly n_copies times
    counts = {}
    step = sm.MOTIF_LENGTH
    for i in range(0, len(ref) - step + 1):
        counts[ref.bases[i:i + step]] = counts.get(ref.bases[i:i + step], 0) + 1
    assert max(counts.values()) == n_copies


def test_generate_reference_validates_args():
    with pytest.raises(sm.SignalModelError):
        sm.generate_reference(500, 0.0, rng_seed=1)
    with pytest.raises(sm.SignalModelError):
        sm.generate_reference(5000, 1.5, rng_seed=1)


# ---------------------------------------------------------------------------
# Signal synthesis
# ---------------------------------------------------------------------------

def test_fixed_dwell_noiseless_signal_is_exact():
    model = small_model(k=2)
    seq = sm.Sequence("s", "ACGTAC")
    sig = sm.sequence_to_signal(seq, model, samples_per_event_mean=3,
                                noise_std=0.0, rng_seed=1, fixed_dwell=True)
    n_kmers = len(seq) - model.k + 1
    assert sig.samples.size == 3 * n_kmers
    for i in range(n_kmers):
        mean = model.mean_of(seq.bases[i:i + 2])
        assert np.all(sig.samples[3 * i:3 * i + 3] == mean)


def test_variable_dwell_is_bounded():
    model = small_model(k=2)
    seq = sm.Sequence("s", "ACGT" * 50)
    sig = sm.sequence_to_signal(seq, model, samples_per_event_mean=8,
                                noise_std=0.0, rng_seed=2)
    n_kmers = len(seq) - model.k + 1
    assert n_kmers <= sig.samples.size <= 32 * n_kmers


def test_sequence_to_signal_validates_args():
    model = small_model(k=4)
    with pytest.raises(sm.SignalModelError):
        sm.sequence_to_signal(sm.Sequence("s", "AC"), model, 8, 0.0, 1)
    with pytest.raises(sm.SignalModelError):
        sm.sequence_to_signal(sm.Sequence("s", "ACGTT"), model, 0, 0.0, 1)


def test_generate_read_set_counts_and_truth():
    model = small_model(k=2)
    ref = sm.generate_reference(4000, 0.0, rng_seed=7)
    preset = sm.DatasetPreset("t", 4000, 20, 300)
    reads = sm.generate_read_set(ref, preset, model, noise_std=1.0, rng_seed=9)
    assert len(reads) == 20
    for r in reads:
        ref_id, start, strand = r.truth
        assert ref_id == ref.id and 0 <= start < len(ref) and strand == "+"


def test_generate_read_set_reverse_strand_flag():
    model = small_model(k=2)
    ref = sm.generate_reference(4000, 0.0, rng_seed=7)
    preset = sm.DatasetPreset("t", 4000, 40, 300)
    reads = sm.generate_read_set(ref, preset, model, noise_std=0.0, rng_seed=9,
                                 reverse_strand=True)
    strands = {r.truth[2] for r in reads}
    assert strands == {"+", "-"}


def test_generate_read_set_rejects_oversized_reads():
    model = small_model(k=2)
    ref = sm.generate_reference(1000, 0.0, rng_seed=1)
    preset = sm.DatasetPreset("t", 1000, 1, 2000)
    with pytest.raises(sm.SignalModelError):
        sm.generate_read_set(ref, preset, model, noise_std=0.0, rng_seed=1)


def test_presets_match_descriptors():
    assert sm.PRESETS["d1-like"].genome_size == 29_903
    assert sm.PRESETS["d1-like"].read_count == 500


# ---------------------------------------------------------------------------
# Container IO
# ---------------------------------------------------------------------------

def test_fasta_round_trip_with_wrapping(tmp_path):
    rng = Rng(31)
    seqs = [sm.Sequence(f"s{i}", "".join(sm.BASES[rng.choice_index(4)]
                                         for _ in range(257)))
            for i in range(3)]
    path = tmp_path / "r.fasta"
    sm.write_fasta(seqs, path)
    loaded = sm.read_fasta(path)
    assert [(s.id, s.bases) for s in loaded] == [(s.id, s.bases) for s in seqs]
    # lines must be wrapped at 80 columns
    assert max(len(l) for l in path.read_text().splitlines()) <= 81


def test_read_fasta_rejects_empty(tmp_path):
    path = tmp_path / "e.fasta"
    path.write_text("\n")
    with pytest.raises(sm.SignalModelError):
        sm.read_fasta(path)


def test_signal_container_round_trip(tmp_path):
    sigs = [
        sm.RawSignal("a", np.array([1.25, -3.5, 80.125]), truth=("ref", 17, "+")),
        sm.RawSignal("b", np.array([0.0, 2.5]), truth=None),
    ]
    path = tmp_path / "sig.txt"
    sm.write_signals(sigs, path)
    loaded = sm.read_signals(path)
    assert [s.read_id for s in loaded] == ["a", "b"]
    assert loaded[0].truth == ("ref", 17, "+")
    assert loaded[1].truth is None
    np.testing.assert_allclose(loaded[0].samples, sigs[0].samples, atol=5e-4)


def test_signal_container_rejects_orphan_samples(tmp_path):
    path = tmp_path / "sig.txt"
    path.write_text("1.0 2.0 3.0\n")
    with pytest.raises(sm.SignalModelError):
        sm.read_signals(path)


def test_raw_signal_rejects_empty():
    with pytest.raises(sm.SignalModelError):
        sm.RawSignal("x", np.array([]))
