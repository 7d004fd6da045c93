import io
import math

import numpy as np
import pytest

from flowcast.graph import (
    EmptyDatasetError,
    IngestConfig,
    ParseError,
    TemporalEdge,
    build_snapshots,
    decompose,
    edge_feature_table,
    edge_features,
    ingest_edges,
    recompose,
    series_from_adjacency,
)


def _stream(text):
    return io.StringIO(text)


HEADER = "src,dst,timestamp,amount\n"


class TestIngest:
    def test_passthrough(self):
        res = ingest_edges(_stream(HEADER + "a,b,100,1.5\nb,c,200,2.0\na,c,300,4.0\n"))
        assert len(res.edges) == 3
        assert len(res.universe) == 3
        assert [e.amount for e in res.edges] == [1.5, 2.0, 4.0]
        assert res.report.n_kept == 3

    def test_dense_renumbering_first_appearance(self):
        res = ingest_edges(_stream(HEADER + "x,y,50,1\nz,x,10,1\n"))
        # sorted by timestamp: (z,x) first, so z gets id 0
        assert res.universe.label_of(0) == "z"
        assert res.universe.label_of(1) == "x"
        assert res.edges[0].timestamp == 10

    def test_date_string_timestamps(self):
        res = ingest_edges(_stream(HEADER + "a,b,2019-04-02,3\n"))
        assert res.edges[0].timestamp == 1554163200

    def test_negative_amount_reported_not_raised(self):
        res = ingest_edges(_stream(HEADER + "a,b,1,-5\na,b,2,1\n"))
        assert res.report.dropped_non_positive == 1
        assert res.report.n_kept == 1

    def test_self_loop_dropped_by_default(self):
        res = ingest_edges(_stream(HEADER + "a,a,1,2\na,b,2,2\n"))
        assert res.report.dropped_self_loop == 1
        res2 = ingest_edges(
            _stream(HEADER + "a,a,1,2\n"), IngestConfig(allow_self_loops=True)
        )
        assert len(res2.edges) == 1

    def test_malformed_row_names_line(self):
        with pytest.raises(ParseError, match="line 3"):
            ingest_edges(_stream(HEADER + "a,b,1,1\na,b,zzz,1\n"))

    def test_bad_field_count(self):
        with pytest.raises(ParseError, match="4 fields"):
            ingest_edges(_stream(HEADER + "a,b,1\n"))

    def test_empty_result_is_error(self):
        with pytest.raises(EmptyDatasetError):
            ingest_edges(_stream(HEADER + "a,b,1,-3\n"))

    def test_min_activity_filter(self):
        # 5-row fixture: node "e" appears once and must vanish entirely.
        text = HEADER + "a,b,1,1\nb,a,2,1\na,b,3,1\ne,a,4,1\nb,a,5,1\n"
        res = ingest_edges(_stream(text), IngestConfig(min_activity=2))
        assert res.report.dropped_low_activity == 1
        assert res.report.low_activity_nodes == 1
        assert len(res.edges) == 4
        assert "e" not in res.universe.ids

    def test_min_activity_monotone(self):
        text = HEADER + "".join(
            f"n{i},n{(i * 3) % 7},{i * 10},{i + 1}\n" for i in range(1, 30)
        )
        counts = []
        for k in (1, 2, 3, 5, 8):
            try:
                res = ingest_edges(_stream(text), IngestConfig(min_activity=k))
                counts.append((len(res.universe), len(res.edges)))
            except EmptyDatasetError:
                counts.append((0, 0))
        for (n1, e1), (n2, e2) in zip(counts, counts[1:]):
            assert n2 <= n1 and e2 <= e1

    def test_date_range_filter(self):
        text = HEADER + "a,b,2019-03-31,1\na,b,2019-04-15,1\na,b,2019-05-02,1\n"
        res = ingest_edges(
            _stream(text), IngestConfig(date_start="2019-04-01", date_end="2019-04-30")
        )
        assert res.report.dropped_out_of_range == 2
        assert len(res.edges) == 1


class TestSnapshots:
    def test_single_month(self):
        edges = [TemporalEdge(0, 1, 1554163200 + k, 1.0) for k in range(3)]
        series = build_snapshots(edges)
        assert series.n_snapshots == 1
        assert series.month_label(0) == "2019-04"

    def test_gap_month_is_empty(self):
        apr = 1554163200
        jun = 1559390400
        series = build_snapshots([TemporalEdge(0, 1, apr, 1), TemporalEdge(0, 1, jun, 1)])
        assert series.n_snapshots == 3
        assert series.snapshots[1].n_edges == 0

    def test_same_pair_amounts_sum(self):
        apr = 1554163200
        series = build_snapshots(
            [TemporalEdge(0, 1, apr, 2.0), TemporalEdge(0, 1, apr + 60, 2.0)]
        )
        assert series.snapshots[0].adjacency[(0, 1)] == 4.0
        # raw events are retained individually
        assert len(series.events) == 2

    def test_split_aggregation_invariance(self):
        apr = 1554163200
        one = build_snapshots([TemporalEdge(0, 1, apr, 6.0)])
        many = build_snapshots([TemporalEdge(0, 1, apr + k, 2.0) for k in range(3)])
        assert one.snapshots[0].adjacency == many.snapshots[0].adjacency

    def test_empty_edge_list(self):
        with pytest.raises(EmptyDatasetError):
            build_snapshots([])

    def test_year_boundary(self):
        dec = int(1609459200 - 86400 * 10)  # 2020-12-22
        jan = 1609459200 + 86400  # 2021-01-02
        series = build_snapshots([TemporalEdge(0, 1, dec, 1), TemporalEdge(0, 1, jan, 1)])
        assert series.n_snapshots == 2
        assert series.month_label(1) == "2021-01"


class TestDecompose:
    def test_row_by_hand(self):
        series = series_from_adjacency([{(0, 1): 2.0, (0, 2): 3.0, (0, 3): 5.0}], 4)
        d = decompose(series.snapshots[0])
        assert d.w[0] == 10.0
        assert d.ratios[0] == {1: 0.2, 2: 0.3, 3: 0.5}

    def test_zero_outflow_has_no_row(self):
        series = series_from_adjacency([{(0, 1): 7.0}], 3)
        d = decompose(series.snapshots[0])
        assert d.w[1] == 0.0 and d.w[2] == 0.0
        assert 1 not in d.ratios and 2 not in d.ratios
        assert d.ratios[0] == {1: 1.0}

    def test_rows_are_stochastic(self):
        rng = np.random.default_rng(0)
        adj = {}
        for _ in range(200):
            i, j = rng.integers(0, 12, size=2)
            if i != j:
                adj[(int(i), int(j))] = float(rng.uniform(0.1, 9))
        d = decompose(series_from_adjacency([adj], 12).snapshots[0])
        for i, row in d.ratios.items():
            assert abs(sum(row.values()) - 1.0) < 1e-9


class TestRecompose:
    def test_inverse_of_decompose(self):
        snap = recompose(np.array([10.0, 0, 0, 0]), {0: {0: 0.0, 1: 0.2, 2: 0.3, 3: 0.5}}, 4)
        assert snap.adjacency == {(0, 1): 2.0, (0, 2): 3.0, (0, 3): 5.0}

    def test_zero_volume_row_absent(self):
        snap = recompose(np.array([0.0, 4.0]), {0: {1: 1.0}, 1: {0: 1.0}}, 2)
        assert snap.adjacency == {(1, 0): 4.0}

    def test_single_edge(self):
        snap = recompose(np.array([4.0, 0.0]), {0: {1: 1.0}}, 2)
        assert snap.adjacency[(0, 1)] == 4.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            recompose(np.array([1.0, 2.0]), {}, 3)
        with pytest.raises(ValueError):
            recompose(np.array([1.0]), {0: {5: 1.0}}, 1)

    def test_round_trip_exact_on_dyadic_fixture(self):
        # Exactness is asserted on dyadic ratios/volumes, where every product
        # and quotient is representable.
        ratios = {0: {1: 0.25, 2: 0.75}, 1: {0: 0.5, 2: 0.5}}
        w = np.array([8.0, 2.0, 0.0])
        snap = recompose(w, ratios, 3)
        d = decompose(snap)
        assert np.array_equal(d.w, w)
        assert d.ratios == ratios

    def test_round_trip_close_on_random(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = 6
            w = rng.uniform(0.5, 20, size=n)
            rows = {}
            for i in range(n):
                k = int(rng.integers(1, 4))
                dests = rng.choice([j for j in range(n) if j != i], size=k, replace=False)
                p = rng.dirichlet(np.ones(k))
                rows[i] = {int(j): float(v) for j, v in zip(dests, p)}
            d = decompose(recompose(w, rows, n))
            assert np.allclose(d.w, w, rtol=1e-12)
            for i in range(n):
                for j, r in rows[i].items():
                    assert d.ratios[i][j] == pytest.approx(r, rel=1e-12)


class TestEdgeFeatures:
    @pytest.fixture
    def fixture_snapshot(self):
        return series_from_adjacency([{(0, 1): 4.0, (0, 2): 6.0, (2, 1): 10.0}], 3).snapshots[0]

    def test_hand_computed_features(self, fixture_snapshot):
        d = decompose(fixture_snapshot)
        inflow = fixture_snapshot.in_flows()
        total = fixture_snapshot.total_volume()
        f01 = edge_features(d, inflow, total, 0, 1)
        assert np.allclose(f01, [math.log(5), 0.4, 0.5, 4 / 14, 0.2])
        f21 = edge_features(d, inflow, total, 2, 1)
        assert np.allclose(f21, [math.log(11), 1.0, 0.5, 10 / 14, 0.5])

    def test_sole_edge_all_ratios_one(self):
        snap = series_from_adjacency([{(0, 1): 3.0}], 2).snapshots[0]
        f = edge_features(decompose(snap), snap.in_flows(), snap.total_volume(), 0, 1)
        assert np.allclose(f[1:], 1.0)

    def test_absent_edge_is_error(self, fixture_snapshot):
        d = decompose(fixture_snapshot)
        with pytest.raises(ValueError):
            edge_features(d, fixture_snapshot.in_flows(), fixture_snapshot.total_volume(), 1, 0)

    def test_table_covers_all_edges(self, fixture_snapshot):
        table = edge_feature_table(fixture_snapshot)
        assert set(table) == set(fixture_snapshot.adjacency)
        for vec in table.values():
            assert vec.shape == (5,)
            assert np.all(vec[1:] >= 0) and np.all(vec[1:] <= 1)
