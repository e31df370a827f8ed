import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactmodes import (
    BatchFormatError,
    ContactEvent,
    StaticGraph,
    TemporalNetwork,
    bfs_tree,
    derive_rng,
    edge_preference,
    filter_batch,
    flood_tree,
    read_batch,
    sample_batch,
    write_batch,
)
from oracles import (
    bfs_distances,
    bfs_root_tree_probability,
    is_forest,
    temporal_reachable,
)


def _temporal(events, n=None, granularity=1.0):
    evs = tuple(ContactEvent(*e) for e in sorted(events, key=lambda e: e[2]))
    if n is None:
        n = max(ev.b for ev in evs) + 1
    return TemporalNetwork(n_nodes=n, events=evs, granularity=granularity)


# ---------------------------------------------------------------------------
# BFS trees


def test_bfs_tree_is_spanning_tree(bridged_graph):
    rng = derive_rng(0, "t")
    t = bfs_tree(bridged_graph, 0, rng)
    assert not t.partial
    assert t.reached == frozenset(range(7))
    assert t.n_edges == 6
    assert is_forest(7, t.parent.items())
    assert t.matrix.values.sum() == pytest.approx(12.0)  # 6 edges, both halves


def test_bfs_tree_depths_match_distances(bridged_graph):
    adj = bridged_graph.adjacency.values
    rng = derive_rng(1, "t")
    for root in range(7):
        t = bfs_tree(bridged_graph, root, rng)
        dist = bfs_distances(adj, root)
        for v in range(7):
            depth = 0
            w = v
            while w != root:
                w = t.parent[w]
                depth += 1
            assert depth == dist[v]


def test_bfs_tree_root_not_in_parent_map(bridged_graph):
    t = bfs_tree(bridged_graph, 3, derive_rng(2, "t"))
    assert 3 not in t.parent
    assert set(t.parent) == set(range(7)) - {3}


def test_bfs_tree_partial_on_disconnected():
    g = StaticGraph.from_edges(4, [(0, 1), (2, 3)])
    t = bfs_tree(g, 0, derive_rng(3, "t"))
    assert t.partial
    assert t.reached == frozenset({0, 1})
    assert t.parent == {1: 0}


def test_bfs_tree_rejects_bad_root(bridged_graph):
    with pytest.raises(ValueError, match="out of range"):
        bfs_tree(bridged_graph, 9, derive_rng(0, "t"))


def test_bfs_tie_break_is_uniform():
    # square: node 2 sits opposite root 0 with parents 1 and 3 equidistant
    g = StaticGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    rng = derive_rng(17, "tie")
    picks = [bfs_tree(g, 0, rng).parent[2] for _ in range(4000)]
    frac = picks.count(1) / len(picks)
    assert abs(frac - 0.5) < 0.03  # > 4 sigma would be ~0.032


def test_bfs_tree_probability_matches_enumeration(bridged_graph):
    # empirical frequency of one specific tree vs its exact probability
    adj = bridged_graph.adjacency.values
    rng = derive_rng(23, "freq")
    target = bfs_tree(bridged_graph, 0, derive_rng(99, "pick"))
    p_exact = bfs_root_tree_probability(adj, 0, target.parent)
    assert p_exact > 0
    hits = sum(bfs_tree(bridged_graph, 0, rng).parent == target.parent for _ in range(3000))
    frac = hits / 3000
    sigma = (p_exact * (1 - p_exact) / 3000) ** 0.5
    assert abs(frac - p_exact) < 5 * sigma + 1e-9


# ---------------------------------------------------------------------------
# Temporal flooding


def test_flood_tree_follows_time_order():
    net = _temporal([(0, 1, 1.0, 1.0), (1, 2, 2.0, 2.0), (2, 3, 0.5, 0.5)])
    t = flood_tree(net, 0, 0.0)
    # 2->3 happens before 2 is informed, so 3 stays unreached
    assert t.reached == frozenset({0, 1, 2})
    assert t.partial
    assert t.parent == {1: 0, 2: 1}
    assert t.infection_times == {0: 0.0, 1: 1.0, 2: 2.0}


def test_flood_tree_ignores_events_before_start():
    net = _temporal([(0, 1, 1.0, 1.0), (0, 2, 3.0, 3.0)])
    t = flood_tree(net, 0, 2.0)
    assert t.reached == frozenset({0, 2})


def test_flood_tree_horizon_cuts_late_events():
    net = _temporal([(0, 1, 1.0, 1.0), (1, 2, 5.0, 5.0)])
    assert flood_tree(net, 0, 0.0, horizon=5.0).reached == frozenset({0, 1})
    assert flood_tree(net, 0, 0.0, horizon=5.5).reached == frozenset({0, 1, 2})


def test_flood_tree_same_timestamp_chains():
    # with stored order, 0-1 then 1-2 at the same instant chains through
    net = _temporal([(0, 1, 2.0, 2.0), (1, 2, 2.0, 2.0)])
    t = flood_tree(net, 0, 0.0)
    assert t.reached == frozenset({0, 1, 2})
    assert t.infection_times[2] == 2.0


@given(
    st.lists(
        st.tuples(
            st.integers(0, 5),
            st.integers(0, 5),
            st.integers(0, 40),
        ).filter(lambda e: e[0] != e[1]),
        min_size=1,
        max_size=25,
        unique_by=lambda e: e[2],  # distinct timestamps: deterministic flood
    ),
    st.integers(0, 5),
    st.integers(0, 20),
    st.one_of(st.none(), st.integers(1, 30)),
)
@settings(max_examples=80, deadline=None)
def test_flood_reached_matches_reachability_oracle(raw, root, start, horizon):
    events = [(a, b, float(s), float(s)) for a, b, s in raw]
    net = _temporal(events, n=6)
    t = flood_tree(net, root, float(start), horizon=None if horizon is None else float(horizon))
    expect = temporal_reachable(events, 6, root, float(start), horizon)
    assert t.reached == expect
    assert is_forest(6, t.parent.items())
    # delivery times never decrease along parent chains
    for child, par in t.parent.items():
        assert t.infection_times[par] <= t.infection_times[child]


# ---------------------------------------------------------------------------
# Batches


def test_sample_batch_deterministic(bridged_graph):
    b1 = sample_batch(bridged_graph, 20, seed=5)
    b2 = sample_batch(bridged_graph, 20, seed=5)
    assert np.array_equal(b1.matrices(), b2.matrices())
    b3 = sample_batch(bridged_graph, 20, seed=6)
    assert not np.array_equal(b1.matrices(), b3.matrices())


def test_sample_batch_prefix_stable(bridged_graph):
    # sample i depends only on (seed, i), not on the batch size
    small = sample_batch(bridged_graph, 5, seed=11)
    large = sample_batch(bridged_graph, 12, seed=11)
    assert np.array_equal(small.matrices(), large.matrices()[:5])


def test_sample_batch_temporal_start_times():
    events = [(i % 3, 3 + (i % 2), float(i), float(i) + 0.5) for i in range(40)]
    net = _temporal(events, n=5)
    batch = sample_batch(net, 30, seed=7)
    starts = batch.start_times()
    assert np.all(starts >= net.t_min)
    assert np.all(starts < net.t_max)
    assert batch.source.kind == "temporal"
    assert batch.source.t_min == net.t_min


def test_sample_batch_rejects_empty(bridged_graph):
    with pytest.raises(ValueError):
        sample_batch(bridged_graph, 0, seed=1)


def test_subset_picks_samples(bridged_graph):
    batch = sample_batch(bridged_graph, 10, seed=3)
    sub = batch.subset([2, 5, 7])
    assert sub.samples == (batch.samples[2], batch.samples[5], batch.samples[7])
    assert sub.n_nodes == batch.n_nodes


def test_filter_batch_extremes(bridged_graph):
    batch = sample_batch(bridged_graph, 15, seed=9)
    rng = derive_rng(1, "f")
    assert filter_batch(batch, lambda s: 1.0, rng).samples == batch.samples
    assert filter_batch(batch, lambda s: 0.0, rng).samples == ()


def test_edge_preference_filter(bridged_graph):
    batch = sample_batch(bridged_graph, 400, seed=13)
    keep = edge_preference(2, 3, 0.0)   # drop every tree using edge (2,3)
    kept = filter_batch(batch, keep, derive_rng(2, "f"))
    assert len(kept.samples) > 0
    assert all(not s.uses_edge(2, 3) for s in kept.samples)
    # partial keep leaves some users in
    some = filter_batch(batch, edge_preference(2, 3, 0.5), derive_rng(3, "f"))
    assert any(s.uses_edge(2, 3) for s in some.samples)


def test_batch_round_trip(tmp_path, bridged_graph):
    batch = sample_batch(bridged_graph, 8, seed=21)
    p = tmp_path / "batch.csv"
    write_batch(batch, p)
    again = read_batch(p)
    assert again.n_nodes == batch.n_nodes
    assert again.seed == batch.seed
    assert len(again.samples) == len(batch.samples)
    for a, b in zip(again.samples, batch.samples):
        assert a.root == b.root
        assert a.parent == b.parent
        assert a.start_time == b.start_time
        assert a.partial == b.partial
    assert np.array_equal(again.matrices(), batch.matrices())


def test_batch_round_trip_temporal(tmp_path):
    events = [(i % 3, 3 + (i % 2), float(i), float(i)) for i in range(30)]
    net = _temporal(events, n=5)
    batch = sample_batch(net, 6, seed=2)
    p = tmp_path / "batch.csv"
    write_batch(batch, p)
    again = read_batch(p)
    assert [s.start_time for s in again.samples] == [s.start_time for s in batch.samples]
    assert [s.partial for s in again.samples] == [s.partial for s in batch.samples]


def test_read_batch_error_lines(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("not a batch\n")
    with pytest.raises(BatchFormatError, match="magic"):
        read_batch(p)
    p.write_text(
        "#contactmodes-batch v1\n"
        "#n_nodes=3 seed=0 kind=static t_min=0.0 t_max=0.0 detail=x\n"
        "T,1,0.0,0\n"
        "E,1,9\n"
    )
    with pytest.raises(BatchFormatError, match="line 4"):
        read_batch(p)
