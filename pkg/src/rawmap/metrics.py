"""Accuracy accounting against ground truth.

A mapped read whose reported position is within distance_threshold of its
true origin is a true positive; mapped beyond it is a false positive;
unmapped reads with known truth are false negatives.  Precision, recall,
and F1 follow the usual formulas with zero-denominator cases pinned to 0.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_DISTANCE_THRESHOLD = 256  # mapper localizes to voting-window resolution


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise MetricsError("confusion counts must be nonnegative")


@dataclass(frozen=True)
class AccuracyReport:
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts
    distance_threshold: int


def classify(results: list[dict], truths: dict[str, tuple[str, int, str]],
             distance_threshold: int = DEFAULT_DISTANCE_THRESHOLD
             ) -> ConfusionCounts:
    """Compare mapping rows (read_mappings format) against truth records.

    Reads without a truth record are excluded from all counts.
    """
    tp = fp = fn = 0
    for row in results:
        truth = truths.get(row["read_id"])
        if truth is None:
            continue
        _, true_pos, _ = truth
        if row["status"] == "mapped":
            if abs(row["ref_start"] - true_pos) <= distance_threshold:
                tp += 1
            else:
                fp += 1
        else:
            fn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn)


def metrics(counts: ConfusionCounts,
            distance_threshold: int = DEFAULT_DISTANCE_THRESHOLD
            ) -> AccuracyReport:
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = 2.0 * p * r / (p + r) if p + r else 0.0
    return AccuracyReport(precision=p, recall=r, f1=f1, counts=counts,
                          distance_threshold=distance_threshold)


def write_accuracy_tsv(report: AccuracyReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("metric\tvalue\n")
        fh.write(f"tp\t{report.counts.tp}\n")
        fh.write(f"fp\t{report.counts.fp}\n")
        fh.write(f"fn\t{report.counts.fn}\n")
        fh.write(f"precision\t{report.precision:.6f}\n")
        fh.write(f"recall\t{report.recall:.6f}\n")
        fh.write(f"f1\t{report.f1:.6f}\n")
        fh.write(f"distance_threshold\t{report.distance_threshold}\n")


def summary_line(report: AccuracyReport) -> str:
    c = report.counts
    return (f"TP={c.tp} FP={c.fp} FN={c.fn} "
            f"P={report.precision:.4f} R={report.recall:.4f} "
            f"F1={report.f1:.4f} (threshold {report.distance_threshold} bp)")
