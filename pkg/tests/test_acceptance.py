"""Exit-criteria suite: ten numbered checks, one verdict line each.

Run with pytest; each test prints "criterion NN <name>: PASS|FAIL" on the
live console in addition to the usual pytest outcome.
"""

import hashlib
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from rawmap import cli, event_pipeline as ep, isp_sim, mapper, metrics
from rawmap import signal_model as sm
from rawmap.reference_index import load_index
from rawmap.rng import Rng
from rawmap import sortnet
from rawmap.trace import STEPS, OperationTrace
from rawmap.event_pipeline import FixedPointFormat, QuantizationParams


def verdict(capsys, num, name, ok, detail=""):
    line = f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    with capsys.disabled():
        print(line, flush=True)
    assert ok, line


def run_cli(*argv):
    rc = cli.main(list(argv))
    assert rc == 0, f"cli {' '.join(argv)} -> exit {rc}"


# ---------------------------------------------------------------------------
# Shared datasets (built once per session)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def d1(tmp_path_factory):
    out = tmp_path_factory.mktemp("d1")
    run_cli("--seed", "42", "gen", "--preset", "d1-like", "--out-dir", str(out))
    run_cli("index", "--reference", str(out / "reference.fasta"),
            "--pore-model", str(out / "pore_model.tsv"),
            "--out", str(out / "index.bin"))
    return out


def map_and_eval(ds, out_dir, arithmetic="fixed", no_filters=False,
                 filters=("2000", "5", "256")):
    maps = out_dir / f"mappings_{arithmetic}_{no_filters}.tsv"
    trace = out_dir / f"trace_{arithmetic}_{no_filters}.tsv"
    argv = ["--arithmetic", arithmetic, "map",
            "--index", str(ds / "index.bin"),
            "--signals", str(ds / "signals.txt"),
            "--out", str(maps), "--trace-out", str(trace)]
    if no_filters:
        argv.append("--no-filters")
    else:
        argv += ["--thresh-freq", filters[0], "--thresh-voting", filters[1],
                 "--voting-window", filters[2]]
    t0 = time.monotonic()
    run_cli(*argv)
    elapsed = time.monotonic() - t0
    rows = mapper.read_mappings(maps)
    truths = {s.read_id: s.truth for s in sm.read_signals(ds / "signals.txt")
              if s.truth is not None}
    rep = metrics.metrics(metrics.classify(rows, truths))
    return rep, rows, trace, elapsed


@pytest.fixture(scope="session")
def d1_fixed(d1, tmp_path_factory):
    out = tmp_path_factory.mktemp("d1map")
    rep, rows, trace, elapsed = map_and_eval(d1, out, arithmetic="fixed")
    return {"report": rep, "rows": rows, "trace": trace, "elapsed": elapsed,
            "out": out}


# ---------------------------------------------------------------------------
# 1. Chaining oracle
# ---------------------------------------------------------------------------

def brute_force_score(anchors, max_gap=500, weight=5):
    n = len(anchors)
    best = 0.0
    for mask in range(1, 1 << n):
        picked = [anchors[i] for i in range(n) if mask >> i & 1]
        score = weight * len(picked)
        for a, b in zip(picked[:-1], picked[1:]):
            dr = b.ref_pos - a.ref_pos
            dq = b.read_pos - a.read_pos
            if dr <= 0 or dq <= 0 or dr > max_gap or dq > max_gap:
                score = None
                break
            score -= abs(dr - dq)
        if score is not None and score > best:
            best = score
    return best


def test_criterion_01_chaining_oracle(capsys):
    rng = Rng(1001)
    t0 = time.monotonic()
    mismatches = 0
    for case in range(500):
        n = rng.randint(1, 12)
        span = 80 if case % 3 else 1200  # mix linkable and gap-breaking sets
        anchors = sorted(
            (mapper.Anchor(rng.randint(0, span), rng.randint(0, span))
             for _ in range(n)),
            key=lambda a: (a.ref_pos, a.read_pos))
        got, _ = mapper.chain(anchors, arithmetic="float")
        want = brute_force_score(anchors)
        if got.score != pytest.approx(want):
            mismatches += 1
    elapsed = time.monotonic() - t0
    ok = mismatches == 0 and elapsed < 10.0
    verdict(capsys, 1, "chaining matches brute force", ok,
            f"mismatches={mismatches} time={elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. Sort oracle
# ---------------------------------------------------------------------------

def test_criterion_02_sort_oracle(capsys):
    rng = Rng(2002)
    t0 = time.monotonic()
    failures = 0

    # 9800 small inputs (sizes 0-128), batched per padded width
    by_width = {}
    for _ in range(9800):
        n = rng.randint(0, 128)
        vals = np.array([rng.randint(0, 10 ** 6) for _ in range(n)],
                        dtype=np.uint64)
        p = 1
        while p < max(n, 2):
            p *= 2
        by_width.setdefault(p, []).append(vals)
    for p, group in by_width.items():
        mat = np.full((len(group), p), sortnet.SENTINEL, dtype=np.uint64)
        for r, vals in enumerate(group):
            mat[r, :vals.size] = vals
        out, _ = sortnet.sort_key_matrix(mat)
        for r, vals in enumerate(group):
            if not np.array_equal(out[r, :vals.size], np.sort(vals)):
                failures += 1

    # 200 large inputs through the full bucketize/sort/merge stage
    for _ in range(200):
        n = rng.randint(129, 5000)
        items = [rng.randint(0, 5000) for _ in range(n)]
        merged, _ = sortnet.sort_and_merge(items, 5001)
        if merged != sorted(items):
            failures += 1

    _, stats = sortnet.bitonic_sort_block(
        [rng.randint(0, 10 ** 6) for _ in range(128)])
    closed_form = stats.network_stages == 28 and stats.comparators_fired == 1792
    elapsed = time.monotonic() - t0
    ok = failures == 0 and closed_form and elapsed < 30.0
    verdict(capsys, 2, "sort/merge matches oracle and closed form", ok,
            f"failures={failures} stages={stats.network_stages} "
            f"comparators={stats.comparators_fired} time={elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. Metrics formula
# ---------------------------------------------------------------------------

def test_criterion_03_metrics_formula(capsys):
    rep = metrics.metrics(metrics.ConfusionCounts(8, 2, 0))
    exact = (rep.precision == 0.8 and rep.recall == 1.0
             and rep.f1 == pytest.approx(8 / 9))
    rng = Rng(3003)
    mismatches = 0
    for _ in range(1000):
        tp, fp, fn = (rng.randint(0, 100) for _ in range(3))
        r = metrics.metrics(metrics.ConfusionCounts(tp, fp, fn))
        p = tp / (tp + fp) if tp + fp else 0.0
        rr = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * rr / (p + rr) if p + rr else 0.0
        if (r.precision, r.recall, r.f1) != pytest.approx((p, rr, f1)):
            mismatches += 1
    ok = exact and mismatches == 0
    verdict(capsys, 3, "metrics match duplicate formula", ok,
            f"exact={exact} mismatches={mismatches}")


# ---------------------------------------------------------------------------
# 4. End-to-end accuracy
# ---------------------------------------------------------------------------

def test_criterion_04_end_to_end_accuracy(capsys, d1_fixed):
    rep = d1_fixed["report"]
    ok = rep.f1 >= 0.90 and d1_fixed["elapsed"] < 120.0
    verdict(capsys, 4, "d1-like F1 >= 0.90", ok,
            f"F1={rep.f1:.4f} time={d1_fixed['elapsed']:.1f}s")


# ---------------------------------------------------------------------------
# 5. Fixed vs float
# ---------------------------------------------------------------------------

def test_criterion_05_fixed_vs_float(capsys, d1, d1_fixed, tmp_path):
    rep_float, _, _, elapsed = map_and_eval(d1, tmp_path, arithmetic="float")
    gap = abs(d1_fixed["report"].f1 - rep_float.f1)
    total = d1_fixed["elapsed"] + elapsed
    ok = gap <= 0.05 and total < 240.0
    verdict(capsys, 5, "fixed/float F1 gap <= 0.05", ok,
            f"fixed={d1_fixed['report'].f1:.4f} float={rep_float.f1:.4f} "
            f"gap={gap:.4f} time={total:.1f}s")


# ---------------------------------------------------------------------------
# 6. Filter benefit on a repeat-rich genome
# ---------------------------------------------------------------------------

def test_criterion_06_filter_benefit(capsys, tmp_path_factory):
    ds = tmp_path_factory.mktemp("repeats")
    t0 = time.monotonic()
    run_cli("--seed", "42", "gen", "--preset", "d1-like",
            "--read-count", "200", "--repeat-fraction", "0.3",
            "--out-dir", str(ds))
    run_cli("index", "--reference", str(ds / "reference.fasta"),
            "--pore-model", str(ds / "pore_model.tsv"),
            "--out", str(ds / "index.bin"))
    rep_f, rows_f, _, _ = map_and_eval(ds, ds)
    rep_nf, rows_nf, _, _ = map_and_eval(ds, ds, no_filters=True)
    elapsed = time.monotonic() - t0
    anchors_f = sum(int(r["n_anchors"]) for r in rows_f)
    anchors_nf = sum(int(r["n_anchors"]) for r in rows_nf)
    ok = (rep_f.f1 >= rep_nf.f1 - 0.02 and anchors_f < anchors_nf
          and elapsed < 240.0)
    verdict(capsys, 6, "filters keep F1 and cut anchors", ok,
            f"F1_filters={rep_f.f1:.4f} F1_nofilters={rep_nf.f1:.4f} "
            f"anchors {anchors_f} < {anchors_nf} time={elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 7. Partitioning arithmetic
# ---------------------------------------------------------------------------

def test_criterion_07_partition_counts(capsys):
    dram4 = isp_sim.DramConfig(capacity_bytes=4_000_000_000)
    dram8 = replace(dram4, capacity_bytes=8_000_000_000, banks=32)
    p4 = isp_sim.n_partitions(52_000_000_000, dram4)
    p8 = isp_sim.n_partitions(52_000_000_000, dram8)
    ok = p4 == 20 and p8 == 10
    verdict(capsys, 7, "52 GB index partitions 20/10", ok, f"p4={p4} p8={p8}")


# ---------------------------------------------------------------------------
# 8. Simulator orderings
# ---------------------------------------------------------------------------

def synthetic_trace(index_bytes, lookups=200_000, scale=1000):
    t = OperationTrace(input_bytes=2_000_000, index_size_bytes=index_bytes,
                       n_reads=100)
    b = 2_000_000
    for s in STEPS:
        st = t.steps[s]
        st.bytes_in = b
        b = max(16, b // 2)
        st.bytes_out = b
        if s == "2e":
            st.add_op("lookup", lookups)
        elif s == "3h":
            st.add_op("sort_cycle", 50_000 * 28)
        else:
            st.add_op("add", 4 * scale)
            st.add_op("compare", 5 * scale)
            st.add_op("multiply", scale)
            st.add_op("divide", scale)
    return t


def test_criterion_08_simulator_orderings(capsys, d1_fixed):
    t0 = time.monotonic()
    traces = [OperationTrace.read_tsv(d1_fixed["trace"])]
    traces += [synthetic_trace(b) for b in
               (0, 10 ** 6, 2_600_000_000, 52_000_000_000)]
    hw = isp_sim.HardwareConfig()
    hw2 = replace(hw, dram=replace(hw.dram,
                                   capacity_bytes=hw.dram.capacity_bytes * 2,
                                   banks=hw.dram.banks * 2))
    order_ok = dram_ok = True
    for t in traces:
        lat = {s: isp_sim.simulate(t, s, hw).total_latency_s
               for s in isp_sim.SYSTEMS}
        order_ok &= (lat["MARS"] <= lat["MS-SmartSSD"] <= lat["MARS-External"])
        l2 = isp_sim.simulate(t, "MARS", hw2).total_latency_s
        dram_ok &= (l2 <= lat["MARS"] + 1e-12
                    and lat["MARS"] / l2 <= 2.0 + 1e-9)

    add_only = OperationTrace()
    for s in STEPS:
        if s not in ("2e", "3h"):
            add_only.steps[s].add_op("add", 10_000)
    ratio = (isp_sim.simulate(add_only, "MARS-BitSerial", hw).compute_latency_s()
             / isp_sim.simulate(add_only, "MARS", hw).compute_latency_s())
    elapsed = time.monotonic() - t0
    ok = order_ok and dram_ok and ratio >= 16.0 - 1e-9 and elapsed < 10.0
    verdict(capsys, 8, "placement orderings hold", ok,
            f"order={order_ok} dram={dram_ok} bitserial={ratio:.1f}x "
            f"time={elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 9. Determinism
# ---------------------------------------------------------------------------

def full_chain(root: Path):
    run_cli("--seed", "77", "gen", "--preset", "tiny", "--out-dir", str(root))
    run_cli("index", "--reference", str(root / "reference.fasta"),
            "--pore-model", str(root / "pore_model.tsv"),
            "--out", str(root / "index.bin"))
    run_cli("map", "--index", str(root / "index.bin"),
            "--signals", str(root / "signals.txt"),
            "--out", str(root / "mappings.tsv"),
            "--trace-out", str(root / "trace.tsv"))
    run_cli("simulate", "--trace", str(root / "trace.tsv"),
            "--system", "all", "--out", str(root / "cost.tsv"))
    digests = {}
    for p in sorted(root.iterdir()):
        digests[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    return digests


def test_criterion_09_determinism(capsys, tmp_path_factory):
    a = full_chain(tmp_path_factory.mktemp("det_a"))
    b = full_chain(tmp_path_factory.mktemp("det_b"))
    ok = a == b
    diff = [k for k in a if a.get(k) != b.get(k)]
    verdict(capsys, 9, "full chain is byte-identical", ok,
            f"files={len(a)} diffs={diff}")


# ---------------------------------------------------------------------------
# 10. Invariant property suites (>= 10^3 seeded cases each)
# ---------------------------------------------------------------------------

def prop_quantization_monotone(rng):
    bits = rng.randint(2, 10)
    q = QuantizationParams(bucket_bits=bits, shift=rng.uniform(-5, 5),
                           scale=rng.uniform(0.1, 10.0))
    z1, z2 = rng.uniform(-8, 8), rng.uniform(-8, 8)
    if z1 > z2:
        z1, z2 = z2, z1
    return q.bucket_of_z(z1) <= q.bucket_of_z(z2)


def prop_fixed_round_trip(rng):
    f = rng.randint(0, 15)
    fmt = FixedPointFormat(fractional_bits=f)
    x = rng.uniform(fmt.min_value, fmt.max_value)
    return abs(x - ep.from_fixed(ep.to_fixed(x, fmt), fmt)) <= 2.0 ** (-f - 1) + 1e-12


def prop_event_tiling(rng):
    vals = []
    for _ in range(rng.randint(8, 20)):
        level = rng.uniform(60.0, 130.0)
        for _ in range(rng.randint(4, 9)):
            vals.append(level + rng.gauss(0.0, 1.0))
    x = np.array(vals)
    codes, params = ep.normalize_and_quantize(sm.RawSignal("x", x), 5)
    events = ep.detect_events(codes, params, FixedPointFormat())
    cursor = 0
    for e in events:
        if e.start_index != cursor or e.length < ep.MIN_EVENT_LEN:
            return False
        cursor += e.length
    return cursor == x.size


class _FakeIndex:
    def __init__(self, freq):
        self.freq = freq


def prop_filters(rng):
    freq = {h: rng.randint(1, 40) for h in range(50)}
    index = _FakeIndex(freq)
    seeds = [(i, rng.randint(0, 60)) for i in range(rng.randint(1, 60))]
    lo = rng.randint(1, 20)
    hi = lo + rng.randint(0, 20)
    kept_lo = mapper.frequency_filter(index, seeds, lo)
    kept_hi = mapper.frequency_filter(index, seeds, hi)
    if not (set(kept_lo) <= set(seeds) and set(kept_lo) <= set(kept_hi)):
        return False
    if mapper.frequency_filter(index, kept_lo, lo) != kept_lo:
        return False

    anchors = [mapper.Anchor(rng.randint(0, 100), rng.randint(0, 2000))
               for _ in range(rng.randint(1, 80))]
    tv = rng.randint(1, 6)
    params_lo = mapper.FilterParams(10, tv, 128)
    params_hi = mapper.FilterParams(10, tv + rng.randint(0, 4), 128)
    out_lo = mapper.seed_and_vote(anchors, 2000, params_lo)
    out_hi = mapper.seed_and_vote(anchors, 2000, params_hi)
    if not (set(out_hi) <= set(out_lo) <= set(anchors)):
        return False
    return mapper.seed_and_vote(out_lo, 2000, params_lo) == out_lo


def prop_trace_conservation(rng):
    t = OperationTrace(input_bytes=rng.randint(0, 10 ** 6))
    b = rng.randint(0, 10 ** 6)
    for s in STEPS:
        st = t.steps[s]
        st.bytes_in = b
        b = rng.randint(0, 10 ** 6)
        st.bytes_out = b
        st.add_op("add", rng.randint(0, 1000))
    try:
        t.validate()
    except Exception:
        return False
    step = STEPS[rng.randint(1, len(STEPS) - 1)]
    t.steps[step].bytes_in += 1 + rng.randint(0, 100)
    try:
        t.validate()
    except Exception:
        return True
    return False


def test_criterion_10_property_suites(capsys):
    suites = {
        "quantization-monotone": prop_quantization_monotone,
        "fixed-round-trip": prop_fixed_round_trip,
        "event-tiling": prop_event_tiling,
        "filter-contract": prop_filters,
        "trace-conservation": prop_trace_conservation,
    }
    failed = {}
    for name, prop in suites.items():
        rng = Rng(sum(map(ord, name)))
        bad = sum(1 for _ in range(1000) if not prop(rng))
        if bad:
            failed[name] = bad
    ok = not failed
    verdict(capsys, 10, "invariant suites (1000 cases each)", ok,
            f"failed={failed or 'none'}")
