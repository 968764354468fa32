import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblecache.traffic import (
    Distribution,
    Metric,
    PacketEvent,
    SingleElephant,
    Trace,
    TraceFormatError,
    TrafficDataset,
    generate_distribution,
    generate_trace,
    read_trace,
    read_truth,
    truth_order,
    write_trace,
    write_truth,
)

SHAPES = [d.value for d in Distribution]


@pytest.mark.parametrize("kind", SHAPES)
def test_reference_config_sums_exactly(kind):
    ds = generate_distribution(kind, 40, 300)
    assert ds.total == 300
    assert ds.n_flows == 40
    assert list(ds.sizes) == sorted(ds.sizes, reverse=True)
    assert min(ds.sizes) >= 1


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SHAPES), st.integers(1, 300), st.integers(0, 5000))
def test_any_config_sums_exactly(kind, flows, extra):
    ds = generate_distribution(kind, flows, flows + extra)
    assert ds.total == flows + extra
    assert ds.n_flows == flows
    assert all(a >= b for a, b in zip(ds.sizes, ds.sizes[1:]))


def test_linear_head():
    assert generate_distribution("linear", 40, 300).sizes[:4] == (15, 14, 14, 14)


def test_single_elephant():
    ds = generate_distribution(SingleElephant(15, 1000))
    assert ds.total == 1015
    assert ds.sizes.count(15) == 1 and ds.sizes.count(1) == 1000


def test_distribution_errors():
    with pytest.raises(ValueError):
        generate_distribution("linear", 40, 39)
    with pytest.raises(ValueError):
        generate_distribution("zipf", 40, 300)
    with pytest.raises(ValueError):
        generate_distribution("single-elephant")
    with pytest.raises(ValueError):
        SingleElephant(0, 3)


def test_dataset_validation():
    with pytest.raises(ValueError):
        TrafficDataset((1, 2))
    with pytest.raises(ValueError):
        TrafficDataset((2, 0))
    with pytest.raises(ValueError):
        TrafficDataset(())
    assert TrafficDataset.from_sizes([1, 3, 2]).sizes == (3, 2, 1)
    assert TrafficDataset((4, 2)).as_truth() == {1: 4, 2: 2}


def test_trace_packets_metric():
    ds = generate_distribution("cauchy", 50, 2000)
    tr = generate_trace(ds, 3, 1_000_000)
    assert len(tr) == 2000
    assert np.all(np.diff(tr.timestamp_ns) >= 0)
    assert tr.timestamp_ns.min() >= 0 and tr.timestamp_ns.max() <= 1_000_000
    assert tr.flow_totals() == ds.as_truth()


def test_trace_bytes_metric():
    ds = TrafficDataset((4000, 1500, 10), Metric.BYTES)
    tr = generate_trace(ds, 0, 10_000, mtu=1500)
    assert len(tr) == 3 + 1 + 1
    assert tr.flow_totals(Metric.BYTES) == {1: 4000, 2: 1500, 3: 10}
    assert tr.size.max() == 1500


def test_trace_is_seeded():
    ds = generate_distribution("laplace", 30, 500)
    assert generate_trace(ds, 9, 10**6) == generate_trace(ds, 9, 10**6)
    assert generate_trace(ds, 9, 10**6) != generate_trace(ds, 10, 10**6)


def test_flow_span_confines_flows():
    ds = generate_distribution("cauchy", 200, 20_000)
    span = 1_000_000
    tr = generate_trace(ds, 1, 50_000_000, flow_span_ns=span)
    assert np.all(np.diff(tr.timestamp_ns) >= 0)
    for fid in (1, 2, 3, 50):
        ts = tr.timestamp_ns[tr.flow_id == fid]
        assert ts.max() - ts.min() <= span
    assert tr.flow_totals() == ds.as_truth()


def test_trace_container():
    events = [PacketEvent(0, 1, 1), PacketEvent(5, 2, 3), PacketEvent(5, 1, 1)]
    tr = Trace.from_events(events)
    assert list(tr) == events
    assert tr[1] == events[1]
    assert len(tr[1:]) == 2
    with pytest.raises(ValueError):
        tr[::2]
    with pytest.raises(ValueError):
        tr.timestamp_ns[0] = 3
    with pytest.raises(ValueError):
        Trace.from_events([(5, 1, 1), (4, 1, 1)])
    with pytest.raises(ValueError):
        Trace.from_events([(5, 1, 0)])
    assert len(Trace.from_events([])) == 0


def test_trace_does_not_freeze_caller_arrays():
    ts = np.array([1, 2, 3])
    Trace(ts, np.array([1, 1, 1]), np.array([1, 1, 1]))
    ts[0] = 0


def test_trace_roundtrip(tmp_path):
    ds = generate_distribution("sech2", 20, 400)
    tr = generate_trace(ds, 4, 10**7)
    path = tmp_path / "t.csv"
    write_trace(tr, path, ["command: test", "seed: 4"])
    text = path.read_text()
    assert text.startswith("# command: test\n# seed: 4\nts_ns,flow_id,bytes\n")
    assert read_trace(path) == tr


@pytest.mark.parametrize(
    "body, message",
    [
        ("ts_ns,flow_id,bytes\n1,2\n", ":2: expected 3 fields"),
        ("ts_ns,flow_id,bytes\n1,2,x\n", ":2: non-integer"),
        ("ts_ns,flow_id,bytes\n5,1,1\n4,1,1\n", ":3: timestamp 4 is earlier"),
        ("ts_ns,flow_id,bytes\n5,1,0\n", ":2: event size"),
        ("ts,flow,bytes\n", ":1: expected header"),
        ("# only a comment\n", "missing header"),
    ],
)
def test_trace_format_errors(tmp_path, body, message):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(TraceFormatError, match=message):
        read_trace(path)


def test_truth_roundtrip(tmp_path):
    ds = generate_distribution("gaussian", 10, 100)
    path = tmp_path / "truth.csv"
    write_truth(ds, path, ["x"])
    assert read_truth(path) == ds.as_truth()
    path.write_text("flow_id,total_size\n1,3\n1,4\n")
    with pytest.raises(TraceFormatError, match="duplicate"):
        read_truth(path)


def test_truth_order_ranks_by_size_then_id():
    ids, ds = truth_order({7: 3, 2: 5, 4: 3})
    assert ids == [2, 4, 7]
    assert ds.sizes == (5, 3, 3)


def test_reference_kurtosis_values():
    # values reported for the 40-flow, 300-unit configuration
    from bubblecache.moments import batch_kurtosis

    ref = {"linear": -1.2, "laplace": 25.88, "cauchy": 20.54, "sech2": 12.11, "gaussian": 18.86}
    for kind, want in ref.items():
        got = batch_kurtosis(generate_distribution(kind, 40, 300).sizes)
        assert math.isclose(got, want, abs_tol=0.5)
