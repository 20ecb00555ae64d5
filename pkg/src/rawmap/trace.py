"""Per-step operation/byte ledger linking the mapper to the cost simulator.

Steps follow the pipeline's control flow: 1a signal-to-event conversion,
1b quantization, 2c hash generation, 2d frequency filter, 2e index query,
2f seed-and-vote, 3g bucketize, 3h sort+merge, 3i chaining DP.  Bytes
leaving step s equal bytes entering step s+1 by construction; the
simulator charges each inter-step hop from these volumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

STEPS = ["1a", "1b", "2c", "2d", "2e", "2f", "3g", "3h", "3i"]

# which hardware unit class executes each step
STEP_UNIT = {
    "1a": "arithmetic",
    "1b": "arithmetic",
    "2c": "arithmetic",
    "2d": "arithmetic",
    "2e": "querying",
    "2f": "arithmetic",
    "3g": "arithmetic",
    "3h": "sorter",
    "3i": "arithmetic",
}

OP_CLASSES = ["add", "compare", "multiply", "divide", "lookup", "sort_cycle"]


class TraceError(Exception):
    pass


@dataclass
class StepTrace:
    ops: dict[str, int] = field(default_factory=dict)
    bytes_in: int = 0
    bytes_out: int = 0

    def add_op(self, op_class: str, count: int) -> None:
        if op_class not in OP_CLASSES:
            raise TraceError(f"unknown op class {op_class!r}")
        self.ops[op_class] = self.ops.get(op_class, 0) + int(count)

    def total_ops(self) -> int:
        return sum(self.ops.values())


@dataclass
class OperationTrace:
    steps: dict[str, StepTrace] = field(
        default_factory=lambda: {s: StepTrace() for s in STEPS})
    input_bytes: int = 0        # raw-signal bytes entering from flash
    index_size_bytes: int = 0   # serialized index size, for DRAM partitioning
    n_reads: int = 0

    def validate(self) -> None:
        for prev, nxt in zip(STEPS[:-1], STEPS[1:]):
            if self.steps[prev].bytes_out != self.steps[nxt].bytes_in:
                raise TraceError(
                    f"byte conservation violated between {prev} and {nxt}: "
                    f"{self.steps[prev].bytes_out} != {self.steps[nxt].bytes_in}")

    def merge(self, other: "OperationTrace") -> "OperationTrace":
        out = OperationTrace(
            input_bytes=self.input_bytes + other.input_bytes,
            index_size_bytes=max(self.index_size_bytes, other.index_size_bytes),
            n_reads=self.n_reads + other.n_reads)
        for s in STEPS:
            a, b = self.steps[s], other.steps[s]
            merged = StepTrace(bytes_in=a.bytes_in + b.bytes_in,
                               bytes_out=a.bytes_out + b.bytes_out)
            for op, cnt in list(a.ops.items()) + list(b.ops.items()):
                merged.add_op(op, cnt)
            out.steps[s] = merged
        return out

    # ------------------------------------------------------------------
    # TSV round trip: rows are (step, op_class, count, bytes_in, bytes_out);
    # a _meta section carries the run-level scalars.
    # ------------------------------------------------------------------

    def write_tsv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("step\top_class\tcount\tbytes_in\tbytes_out\n")
            fh.write(f"_meta\tinput_bytes\t{self.input_bytes}\t0\t0\n")
            fh.write(f"_meta\tindex_size_bytes\t{self.index_size_bytes}\t0\t0\n")
            fh.write(f"_meta\tn_reads\t{self.n_reads}\t0\t0\n")
            for s in STEPS:
                st = self.steps[s]
                if not st.ops:
                    fh.write(f"{s}\t_none\t0\t{st.bytes_in}\t{st.bytes_out}\n")
                for op in sorted(st.ops):
                    fh.write(f"{s}\t{op}\t{st.ops[op]}\t{st.bytes_in}\t{st.bytes_out}\n")

    @classmethod
    def read_tsv(cls, path) -> "OperationTrace":
        trace = cls()
        with open(path) as fh:
            header = fh.readline().strip().split("\t")
            if header != ["step", "op_class", "count", "bytes_in", "bytes_out"]:
                raise TraceError(f"{path}: bad trace header {header!r}")
            for line in fh:
                step, op, count, b_in, b_out = line.strip().split("\t")
                if step == "_meta":
                    setattr(trace, op, int(count))
                    continue
                if step not in trace.steps:
                    raise TraceError(f"{path}: unknown step {step!r}")
                st = trace.steps[step]
                st.bytes_in = int(b_in)
                st.bytes_out = int(b_out)
                if op != "_none":
                    st.add_op(op, int(count))
        return trace
