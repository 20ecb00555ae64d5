"""Operation-trace ledger: conservation, merge, and TSV round trip."""

import pytest

from rawmap.trace import OP_CLASSES, STEPS, OperationTrace, StepTrace, TraceError


def chained_trace(base=1000):
    t = OperationTrace(input_bytes=base, index_size_bytes=4096, n_reads=2)
    b = base
    for s in STEPS:
        st = t.steps[s]
        st.bytes_in = b
        b = max(8, b // 2)
        st.bytes_out = b
        st.add_op("add", 10)
    return t


def test_add_op_rejects_unknown_class():
    st = StepTrace()
    with pytest.raises(TraceError):
        st.add_op("xor", 1)
    for op in OP_CLASSES:
        st.add_op(op, 2)
    assert st.total_ops() == 2 * len(OP_CLASSES)


def test_validate_accepts_conserved_chain():
    chained_trace().validate()


def test_validate_rejects_broken_chain():
    t = chained_trace()
    t.steps["2d"].bytes_in += 1
    with pytest.raises(TraceError):
        t.validate()


def test_merge_sums_streams():
    a = chained_trace(1000)
    b = chained_trace(500)
    m = a.merge(b)
    m.validate()
    assert m.input_bytes == 1500 and m.n_reads == 4
    assert m.steps["1a"].ops["add"] == 20
    assert m.steps["1a"].bytes_in == 1500


def test_tsv_round_trip(tmp_path):
    t = chained_trace()
    t.steps["3h"].add_op("sort_cycle", 77)
    t.steps["2e"].ops.clear()  # exercise the _none placeholder row
    path = tmp_path / "trace.tsv"
    t.write_tsv(path)
    back = OperationTrace.read_tsv(path)
    assert back.input_bytes == t.input_bytes
    assert back.index_size_bytes == t.index_size_bytes
    assert back.n_reads == t.n_reads
    for s in STEPS:
        assert back.steps[s].ops == t.steps[s].ops
        assert back.steps[s].bytes_in == t.steps[s].bytes_in
        assert back.steps[s].bytes_out == t.steps[s].bytes_out


def test_read_tsv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("nope\n")
    with pytest.raises(TraceError):
        OperationTrace.read_tsv(path)


def test_read_tsv_rejects_unknown_step(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("step\top_class\tcount\tbytes_in\tbytes_out\n"
                    "9z\tadd\t1\t0\t0\n")
    with pytest.raises(TraceError):
        OperationTrace.read_tsv(path)
