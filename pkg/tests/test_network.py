import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactmodes import (
    ContactEvent,
    DataError,
    StaticGraph,
    SymMatrix,
    TemporalNetwork,
    TraceFormatError,
    aggregate_static,
    ingest_trace,
    read_label_map,
    write_label_map,
    write_trace,
)
from oracles import merge_intervals


# ---------------------------------------------------------------------------
# SymMatrix


def test_symmatrix_enforces_symmetry():
    with pytest.raises(ValueError, match="not symmetric"):
        SymMatrix([[0.0, 1.0], [2.0, 0.0]])


def test_symmatrix_rejects_non_square_and_non_finite():
    with pytest.raises(ValueError, match="square"):
        SymMatrix(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="finite"):
        SymMatrix([[0.0, np.nan], [np.nan, 0.0]])


def test_symmatrix_symmetrised_averages():
    m = SymMatrix.symmetrised([[0.0, 1.0], [3.0, 0.0]])
    assert m[0, 1] == m[1, 0] == 2.0


def test_symmatrix_from_lower_uses_lower_triangle():
    m = SymMatrix.from_lower([[5.0, 99.0], [1.0, 7.0]])
    expect = np.array([[5.0, 1.0], [1.0, 7.0]])
    assert np.array_equal(m.values, expect)


def test_symmatrix_values_read_only():
    m = SymMatrix.zeros(3)
    with pytest.raises(ValueError):
        m.values[0, 0] = 1.0


@given(
    st.integers(min_value=1, max_value=6).flatmap(
        lambda n: st.lists(
            st.lists(st.floats(-10, 10), min_size=n, max_size=n),
            min_size=n,
            max_size=n,
        )
    )
)
@settings(max_examples=50, deadline=None)
def test_symmatrix_symmetrised_idempotent(rows):
    m = SymMatrix.symmetrised(rows)
    again = SymMatrix.symmetrised(m.values)
    assert np.array_equal(m.values, again.values)
    assert np.array_equal(m.values, m.values.T)


# ---------------------------------------------------------------------------
# ContactEvent / TemporalNetwork


def test_contact_event_canonical_order():
    ev = ContactEvent(5, 2, 1.0, 3.0)
    assert (ev.a, ev.b) == (2, 5)
    assert ev.duration == 2.0


def test_contact_event_rejects_bad_input():
    with pytest.raises(ValueError, match="self-contact"):
        ContactEvent(1, 1, 0.0, 1.0)
    with pytest.raises(ValueError, match="ends before"):
        ContactEvent(0, 1, 2.0, 1.0)
    with pytest.raises(ValueError, match="finite"):
        ContactEvent(0, 1, 0.0, math.inf)


def test_contact_event_coerces_numpy_scalars():
    ev = ContactEvent(np.int64(0), np.int64(1), np.float64(0.5), np.float64(1.5))
    assert type(ev.a) is int and type(ev.b) is int
    assert type(ev.start) is float and type(ev.end) is float


def _net(events, n=None, granularity=1.0):
    evs = tuple(ContactEvent(*e) for e in events)
    if n is None:
        n = max(ev.b for ev in evs) + 1
    return TemporalNetwork(n_nodes=n, events=evs, granularity=granularity)


def test_temporal_network_time_span():
    net = _net([(0, 1, 2.0, 4.0), (1, 2, 3.0, 9.0)])
    assert net.t_min == 2.0
    assert net.t_max == 9.0
    assert net.span == 7.0
    assert net.n_steps == 8
    assert net.step_of(2.0) == 0
    assert net.step_of(8.9) == 6


def test_temporal_network_requires_sorted_events():
    with pytest.raises(ValueError, match="sorted"):
        _net([(0, 1, 5.0, 6.0), (1, 2, 1.0, 2.0)])


def test_temporal_network_rejects_out_of_range_node():
    with pytest.raises(ValueError, match="n_nodes"):
        _net([(0, 5, 0.0, 1.0)], n=3)


def test_event_arrays_match_events():
    net = _net([(0, 1, 0.0, 1.0), (1, 2, 0.5, 2.0), (0, 2, 3.0, 3.0)])
    a, b, s, e = net.event_arrays
    assert a.tolist() == [0, 1, 0]
    assert b.tolist() == [1, 2, 2]
    assert s.tolist() == [0.0, 0.5, 3.0]
    assert e.tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        a[0] = 9


# ---------------------------------------------------------------------------
# Trace ingestion


TRACE = """node_a,node_b,start,end
alice,bob,10.0,12.0
bob,carol,11.0,15.0
carol,alice,20.0,21.0
"""


def test_ingest_trace_first_seen_labelling(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(TRACE)
    net = ingest_trace(p)
    assert net.label_map == {"alice": 0, "bob": 1, "carol": 2}
    assert net.n_nodes == 3
    assert net.n_events == 3
    assert net.events[0] == ContactEvent(0, 1, 10.0, 12.0)


def test_ingest_trace_orders_by_time_before_labelling(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("node_a,node_b,start,end\nzed,amy,5.0,6.0\nbob,amy,1.0,2.0\n")
    net = ingest_trace(p)
    # bob's contact starts first, so bob takes id 0 despite file order
    assert net.label_map == {"bob": 0, "amy": 1, "zed": 2}


def test_ingest_trace_merges_overlapping_duplicates(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(
        "node_a,node_b,start,end\n"
        "a,b,0.0,5.0\n"
        "b,a,3.0,8.0\n"   # directed duplicate, overlapping
        "a,b,20.0,21.0\n"
    )
    net = ingest_trace(p)
    assert [(ev.start, ev.end) for ev in net.events] == [(0.0, 8.0), (20.0, 21.0)]


def test_ingest_trace_ws4_with_comments(tmp_path):
    p = tmp_path / "t.dat"
    p.write_text("# comment\n3 7 0.0 1.0\n\n7 9 2.0 2.5\n")
    net = ingest_trace(p, fmt="ws4")
    assert net.n_nodes == 3
    assert net.label_map == {"3": 0, "7": 1, "9": 2}


def test_ingest_trace_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("node_a,node_b,start,end\na,b,0.0,1.0\na,b,oops,1.0\n")
    with pytest.raises(TraceFormatError, match="line 3"):
        ingest_trace(p)
    p.write_text("node_a,node_b,start,end\na,b,0.0\n")
    with pytest.raises(TraceFormatError, match="line 2"):
        ingest_trace(p)
    p.write_text("node_a,node_b,start,end\na,a,0.0,1.0\n")
    with pytest.raises(TraceFormatError, match="self-contact"):
        ingest_trace(p)


def test_ingest_trace_missing_and_empty(tmp_path):
    with pytest.raises(DataError, match="not found"):
        ingest_trace(tmp_path / "nope.csv")
    p = tmp_path / "t.csv"
    p.write_text("node_a,node_b,start,end\n")
    with pytest.raises(DataError, match="empty"):
        ingest_trace(p)


def test_ingest_trace_pinned_label_map(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(TRACE)
    pinned = {"carol": 0, "bob": 1, "alice": 2, "dave": 3}
    net = ingest_trace(p, label_map=pinned)
    assert net.n_nodes == 4  # dave reserved even though unseen
    assert net.events[0] == ContactEvent(1, 2, 10.0, 12.0)
    with pytest.raises(DataError, match="dense"):
        ingest_trace(p, label_map={"alice": 0, "bob": 2, "carol": 3})
    with pytest.raises(DataError, match="missing"):
        ingest_trace(p, label_map={"alice": 0, "bob": 1})


def test_trace_round_trip(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(TRACE)
    net = ingest_trace(p, granularity=0.5)
    out = tmp_path / "copy.csv"
    write_trace(net, out)
    again = ingest_trace(out, granularity=0.5, label_map=net.label_map)
    assert again.n_nodes == net.n_nodes
    assert again.events == net.events
    assert again.label_map == net.label_map


def test_label_map_round_trip(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(TRACE)
    net = ingest_trace(p)
    mp = tmp_path / "labels.json"
    write_label_map(net, mp)
    assert read_label_map(mp) == net.label_map


def test_label_map_identity_fallback(tmp_path):
    net = _net([(0, 1, 0.0, 1.0)])
    mp = tmp_path / "labels.json"
    write_label_map(net, mp)
    assert read_label_map(mp) == {"0": 0, "1": 1}


@given(
    st.lists(
        st.tuples(st.floats(0, 50), st.floats(0, 10)),
        min_size=1,
        max_size=12,
    )
)
@settings(max_examples=60, deadline=None)
def test_duplicate_merging_matches_interval_union(tmp_path_factory, raw):
    intervals = [(s, s + d) for s, d in raw]
    p = tmp_path_factory.mktemp("merge") / "t.csv"
    lines = ["node_a,node_b,start,end"]
    for s, e in intervals:
        lines.append(f"x,y,{s!r},{e!r}")
    p.write_text("\n".join(lines) + "\n")
    net = ingest_trace(p)
    got = [(ev.start, ev.end) for ev in net.events]
    assert got == merge_intervals(intervals)


# ---------------------------------------------------------------------------
# StaticGraph / aggregation


def test_static_graph_basics():
    g = StaticGraph.from_edges(4, [(0, 1), (1, 2, 2.5)])
    assert g.n_nodes == 4
    assert g.neighbors[1] == (0, 2)
    assert g.neighbors[3] == ()
    assert g.edges() == [(0, 1, 1.0), (1, 2, 2.5)]
    assert not g.is_connected()
    assert StaticGraph.from_edges(3, [(0, 1), (1, 2)]).is_connected()


def test_static_graph_rejects_negative_and_loops():
    with pytest.raises(ValueError, match="nonnegative"):
        StaticGraph(SymMatrix([[0.0, -1.0], [-1.0, 0.0]]))
    with pytest.raises(ValueError, match="diagonal"):
        StaticGraph(SymMatrix([[1.0, 0.0], [0.0, 0.0]]))


def test_aggregate_static_window_overlap():
    net = _net([(0, 1, 0.0, 4.0), (1, 2, 2.0, 6.0), (0, 2, 10.0, 11.0)])
    g = aggregate_static(net, 0.0, 4.0)
    a = g.adjacency
    assert a[0, 1] == pytest.approx(1.0)     # full window
    assert a[1, 2] == pytest.approx(0.5)     # half the window
    assert a[0, 2] == 0.0                    # outside
    with pytest.raises(ValueError, match="empty window"):
        aggregate_static(net, 3.0, 3.0)


def test_aggregate_static_sums_repeat_contacts():
    net = _net([(0, 1, 0.0, 1.0), (0, 1, 2.0, 3.0)], n=2)
    g = aggregate_static(net, 0.0, 10.0)
    assert g.adjacency[0, 1] == pytest.approx(0.2)
