"""Command-line front end: gen / index / map / eval / simulate / report.

All randomness flows from the single --seed flag; repeating a command
with identical inputs and seed reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import isp_sim, mapper, metrics, signal_model
from .event_pipeline import FixedPointFormat, model_quantization_params, reference_to_events
from .reference_index import build_index, load_index, save_index
from .signal_model import PRESETS, DatasetPreset
from .trace import OperationTrace


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _require(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} not found: {p}", code=2)
    return p


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.preset not in PRESETS:
        raise CliError(
            f"unknown preset {args.preset!r}; available: {', '.join(sorted(PRESETS))}")
    preset = PRESETS[args.preset]
    if args.read_count is not None or args.genome_size is not None:
        preset = DatasetPreset(
            preset.name,
            args.genome_size or preset.genome_size,
            args.read_count if args.read_count is not None else preset.read_count,
            args.read_length or preset.mean_read_length)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    model = signal_model.synth_pore_model(args.k, rng_seed=args.seed)
    reference = signal_model.generate_reference(
        preset.genome_size, args.repeat_fraction, rng_seed=args.seed + 1)
    reads = signal_model.generate_read_set(
        reference, preset, model, noise_std=args.noise_std,
        rng_seed=args.seed + 2, samples_per_event_mean=args.samples_per_event,
        reverse_strand=args.reverse_strand)

    ref_path = out / "reference.fasta"
    model_path = out / "pore_model.tsv"
    sig_path = out / "signals.txt"
    signal_model.write_fasta([reference], ref_path)
    signal_model.save_pore_model(model, model_path)
    signal_model.write_signals(reads, sig_path)

    manifest = out / "manifest.txt"
    with open(manifest, "w") as fh:
        fh.write(f"preset\t{preset.name}\n")
        fh.write(f"seed\t{args.seed}\n")
        fh.write(f"genome_size\t{preset.genome_size}\n")
        fh.write(f"read_count\t{preset.read_count}\n")
        fh.write(f"mean_read_length\t{preset.mean_read_length}\n")
        fh.write(f"k\t{args.k}\n")
        fh.write(f"noise_std\t{args.noise_std}\n")
        fh.write(f"repeat_fraction\t{args.repeat_fraction}\n")
        fh.write(f"samples_per_event\t{args.samples_per_event}\n")
        for p in (ref_path, model_path, sig_path):
            fh.write(f"sha256:{p.name}\t{_sha256(p)}\n")
    print(f"wrote {ref_path}, {model_path}, {sig_path}")
    print(manifest.read_text(), end="")
    return 0


# ---------------------------------------------------------------------------
# index
# ---------------------------------------------------------------------------

def cmd_index(args) -> int:
    ref_path = _require(args.reference, "reference FASTA")
    model_path = _require(args.pore_model, "pore model")
    reference = signal_model.read_fasta(ref_path)[0]
    model = signal_model.load_pore_model(model_path)
    fmt = FixedPointFormat(fractional_bits=args.fractional_bits)
    params = model_quantization_params(model, bucket_bits=args.bucket_bits)
    events = reference_to_events(reference, model, params, fmt)
    index = build_index(events, n_events_per_seed=args.seed_span)
    save_index(index, args.out)
    print(f"indexed {len(events)} events -> {args.out} "
          f"({index.size_bytes} bytes, {len(index.table)} hashes)")
    return 0


# ---------------------------------------------------------------------------
# map
# ---------------------------------------------------------------------------

def _map_params(args, index) -> mapper.MapParams:
    filters = None
    if args.thresh_freq or args.thresh_voting or args.voting_window:
        base = mapper.filters_for_genome(index.reference_length)
        filters = mapper.FilterParams(
            thresh_freq=args.thresh_freq or base.thresh_freq,
            thresh_voting=args.thresh_voting or base.thresh_voting,
            voting_window=args.voting_window or base.voting_window)
    return mapper.MapParams(
        n_events_per_seed=index.n_events_per_seed,
        bucket_bits=index.quant.bucket_bits,
        fmt=index.format,
        filters=filters,
        filters_enabled=not args.no_filters,
        arithmetic=args.arithmetic)


def cmd_map(args) -> int:
    index_path = _require(args.index, "index file")
    sig_path = _require(args.signals, "signal container")
    index = load_index(index_path)
    signals = signal_model.read_signals(sig_path)
    params = _map_params(args, index)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(
                lambda s: mapper.map_read(s, index, params), signals))
    else:
        results = [mapper.map_read(s, index, params) for s in signals]
    results.sort(key=lambda r: r.read_id)

    mapper.write_mappings(results, index.reference_id, args.out)
    total = OperationTrace(index_size_bytes=index.size_bytes)
    for r in results:
        total = total.merge(r.trace)
    total.index_size_bytes = index.size_bytes
    total.write_tsv(args.trace_out)
    n_mapped = sum(1 for r in results if r.status == "mapped")
    print(f"mapped {n_mapped}/{len(results)} reads -> {args.out}; "
          f"trace -> {args.trace_out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    map_path = _require(args.mappings, "mappings TSV")
    sig_path = _require(args.signals, "signal container")
    rows = mapper.read_mappings(map_path)
    truths = {s.read_id: s.truth for s in signal_model.read_signals(sig_path)
              if s.truth is not None}
    counts = metrics.classify(rows, truths,
                              distance_threshold=args.distance_threshold)
    report = metrics.metrics(counts, distance_threshold=args.distance_threshold)
    metrics.write_accuracy_tsv(report, args.out)
    print(metrics.summary_line(report))
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    trace_path = _require(args.trace, "trace file")
    trace = OperationTrace.read_tsv(trace_path)
    hw = isp_sim.load_config(_require(args.config, "hardware config")) \
        if args.config else isp_sim.HardwareConfig()
    systems = isp_sim.SYSTEMS if args.system == "all" else [args.system]
    out = Path(args.out)
    reports = []
    for system in systems:
        report = isp_sim.simulate(trace, system, hw)
        path = out if len(systems) == 1 else \
            out.with_name(out.stem + f".{system}" + out.suffix)
        report.write_tsv(path)
        reports.append(report)
        print(report.summary())
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args) -> int:
    for path in args.files:
        p = _require(path, "report file")
        print(f"== {p} ==")
        print(p.read_text(), end="")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rawmap",
        description="Raw-signal read mapping and in-storage cost simulation")
    ap.add_argument("--seed", type=int, default=42,
                    help="master RNG seed (all randomness derives from it)")
    ap.add_argument("--config", default=None, help="hardware config INI")
    ap.add_argument("--threads", type=int, default=1,
                    help="worker threads for mapping")
    ap.add_argument("--arithmetic", choices=["fixed", "float"],
                    default="fixed", help="numeric mode of the event pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--preset", default="d1-like",
                   help=f"dataset preset ({', '.join(sorted(PRESETS))})")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--genome-size", type=int, default=None)
    g.add_argument("--read-count", type=int, default=None)
    g.add_argument("--read-length", type=int, default=None)
    g.add_argument("--repeat-fraction", type=float, default=0.0)
    g.add_argument("--noise-std", type=float, default=2.0)
    g.add_argument("--k", type=int, default=6, help="pore model k-mer length")
    g.add_argument("--samples-per-event", type=int, default=8)
    g.add_argument("--reverse-strand", action="store_true")
    g.set_defaults(func=cmd_gen)

    i = sub.add_parser("index", help="build the reference index")
    i.add_argument("--reference", required=True)
    i.add_argument("--pore-model", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--seed-span", type=int, default=5,
                   help="events per seed hash")
    i.add_argument("--bucket-bits", type=int, default=5)
    i.add_argument("--fractional-bits", type=int, default=8)
    i.set_defaults(func=cmd_index)

    m = sub.add_parser("map", help="map raw signals against an index")
    m.add_argument("--index", required=True)
    m.add_argument("--signals", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--trace-out", required=True)
    m.add_argument("--no-filters", action="store_true",
                   help="disable frequency and seed-and-vote filters")
    m.add_argument("--thresh-freq", type=int, default=None)
    m.add_argument("--thresh-voting", type=int, default=None)
    m.add_argument("--voting-window", type=int, default=None)
    m.set_defaults(func=cmd_map)

    e = sub.add_parser("eval", help="score mappings against ground truth")
    e.add_argument("--mappings", required=True)
    e.add_argument("--signals", required=True,
                   help="signal container carrying the truth sidecar")
    e.add_argument("--out", required=True)
    e.add_argument("--distance-threshold", type=int,
                   default=metrics.DEFAULT_DISTANCE_THRESHOLD)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("simulate", help="replay a trace on a hardware model")
    s.add_argument("--trace", required=True)
    s.add_argument("--system", default="MARS",
                   choices=isp_sim.SYSTEMS + ["all"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="print generated TSV reports")
    r.add_argument("files", nargs="+")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # surface domain errors with a clean message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
