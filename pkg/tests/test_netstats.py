import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowcast.graph import series_from_adjacency
from flowcast.netstats import (
    NetworkSummary,
    aggregate_distributions,
    ccdf,
    fit_power_law,
    summarize,
)


def two_month_fixture():
    # month 0: one edge; month 1: the same pair again plus a new one
    return series_from_adjacency(
        [{(0, 1): 1.0}, {(0, 1): 2.0, (1, 2): 3.0}], n_nodes=3, start_month=(2020, 1)
    )


class TestSummarize:
    def test_fixture_headline_numbers(self):
        s = summarize(two_month_fixture())
        assert s.n_snapshots == 2
        assert s.n_nodes == 3
        assert s.n_edges == 3
        # (1/6 + 2/6) / 2
        assert s.avg_sparsity == pytest.approx(0.25)
        # pair (0,1) in both months, (1,2) in one: mean(1.0, 0.5)
        assert s.avg_edge_persistence == pytest.approx(0.75)

    def test_undirected_basis_halves_pair_count(self):
        s = summarize(two_month_fixture(), pair_basis="undirected")
        assert s.avg_sparsity == pytest.approx(0.5)
        assert s.n_edges == 3

    def test_undirected_collapses_reciprocal_pairs(self):
        series = series_from_adjacency(
            [{(0, 1): 1.0, (1, 0): 4.0}], n_nodes=3, start_month=(2020, 1)
        )
        directed = summarize(series)
        undirected = summarize(series, pair_basis="undirected")
        assert directed.n_edges == 2
        assert undirected.n_edges == 1
        assert directed.avg_sparsity == pytest.approx(2 / 6)
        assert undirected.avg_sparsity == pytest.approx(1 / 3)

    def test_persistence_one_when_every_pair_always_present(self):
        series = series_from_adjacency(
            [{(0, 1): 1.0}, {(0, 1): 5.0}], n_nodes=2, start_month=(2021, 6)
        )
        assert summarize(series).avg_edge_persistence == pytest.approx(1.0)

    def test_unknown_basis_rejected(self):
        with pytest.raises(ValueError, match="pair_basis"):
            summarize(two_month_fixture(), pair_basis="both")

    def test_as_dict_round_trip(self):
        d = summarize(two_month_fixture()).as_dict()
        assert NetworkSummary(**d) == summarize(two_month_fixture())


class TestCcdf:
    def test_small_sample(self):
        xs, ps = ccdf([1.0, 2.0, 2.0, 4.0])
        assert xs.tolist() == [1.0, 2.0, 4.0]
        assert ps.tolist() == [1.0, 0.75, 0.25]

    def test_single_value(self):
        xs, ps = ccdf([3.0])
        assert xs.tolist() == [3.0]
        assert ps.tolist() == [1.0]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ccdf([])

    @given(
        st.lists(st.floats(min_value=0.1, max_value=1e6, allow_nan=False), min_size=1, max_size=80)
    )
    def test_shape_properties(self, values):
        xs, ps = ccdf(values)
        assert ps[0] == 1.0
        assert np.all(np.diff(ps) < 0) or ps.size == 1
        assert np.all(ps > 0) and np.all(ps <= 1.0)
        assert np.all(np.diff(xs) > 0)

    def test_probability_at_x_counts_ties(self):
        xs, ps = ccdf([5.0, 5.0, 7.0])
        # P(X >= 5) includes both fives
        assert ps[0] == 1.0
        assert ps[1] == pytest.approx(1 / 3)


class TestAggregateDistributions:
    def test_sums_over_snapshots(self):
        series = series_from_adjacency(
            [{(0, 1): 2.0, (2, 1): 1.0}, {(0, 1): 3.0}], n_nodes=4, start_month=(2020, 1)
        )
        d = aggregate_distributions(series)
        assert d["out_degree"].tolist() == [1.0, 1.0]  # nodes 0 and 2
        assert d["in_degree"].tolist() == [2.0]  # node 1 from two senders
        assert sorted(d["out_weight"].tolist()) == [1.0, 5.0]
        assert d["in_weight"].tolist() == [6.0]
        # node 3 never touches an edge and contributes to no sample
        assert all(arr.size < 4 for arr in d.values())


class TestPowerLawFit:
    def test_known_mle_value(self):
        # sum log(x/1) = 6 log 2 for x = 1,2,4,8
        fit = fit_power_law([1.0, 2.0, 4.0, 8.0], x_min=1.0)
        assert fit.alpha == pytest.approx(1.0 + 4.0 / (6.0 * np.log(2.0)), rel=1e-12)
        assert fit.x_min == 1.0
        assert fit.n_tail == 4

    def test_explicit_x_min_restricts_tail(self):
        fit = fit_power_law([1.0, 2.0, 4.0, 8.0], x_min=2.0)
        assert fit.n_tail == 3
        assert fit.alpha == pytest.approx(1.0 + 3.0 / (3.0 * np.log(2.0)), rel=1e-12)

    def test_pareto_recovery(self):
        rng = np.random.default_rng(7)
        u = rng.uniform(size=5000)
        samples = u ** (-1.0 / 1.5)  # continuous power law, alpha = 2.5, x_min = 1
        fit = fit_power_law(samples, x_min=1.0)
        assert 2.45 <= fit.alpha <= 2.55

    def test_search_recovers_planted_tail(self):
        rng = np.random.default_rng(11)
        u = rng.uniform(size=4000)
        tail = 5.0 * u ** (-1.0 / 1.5)
        noise = rng.uniform(0.5, 5.0, size=4000)
        fit = fit_power_law(np.concatenate([tail, noise]))
        assert fit.x_min >= 2.0
        assert abs(fit.alpha - 2.5) < 0.3

    def test_search_result_minimizes_ks_over_candidates(self):
        rng = np.random.default_rng(3)
        samples = rng.uniform(size=200) ** (-1.0 / 1.2)
        fit = fit_power_law(samples)
        worse = [
            fit_power_law(samples, x_min=c).ks_distance
            for c in np.unique(samples)[:50]
            if (samples >= c).sum() >= 10
        ]
        assert all(fit.ks_distance <= k + 1e-12 for k in worse)

    def test_scale_invariance(self):
        values = [1.0, 2.0, 4.0, 8.0]
        base = fit_power_law(values, x_min=1.0)
        scaled = fit_power_law([30.0 * v for v in values], x_min=30.0)
        assert scaled.alpha == pytest.approx(base.alpha, rel=1e-12)
        assert scaled.ks_distance == pytest.approx(base.ks_distance, rel=1e-9)

    def test_small_sample_search_needs_min_tail(self):
        with pytest.raises(ValueError, match="min_tail|tail samples"):
            fit_power_law([1.0, 2.0, 4.0, 8.0])

    def test_min_tail_can_be_relaxed(self):
        fit = fit_power_law([1.0, 2.0, 4.0, 8.0], min_tail=3)
        assert fit.n_tail >= 3

    def test_nonpositive_values_rejected(self):
        with pytest.raises(ValueError):
            fit_power_law([1.0, -2.0, 3.0], x_min=1.0)
        with pytest.raises(ValueError):
            fit_power_law([])

    def test_degenerate_tail_rejected(self):
        with pytest.raises(ValueError):
            fit_power_law([1.0, 1.0, 1.0], x_min=1.0)

    @settings(deadline=None)
    @given(st.floats(min_value=1.5, max_value=4.0), st.integers(min_value=0, max_value=2**31))
    def test_alpha_above_one_for_any_sample(self, alpha, seed):
        rng = np.random.default_rng(seed)
        samples = rng.uniform(size=64) ** (-1.0 / (alpha - 1.0))
        fit = fit_power_law(samples, x_min=1.0)
        assert fit.alpha > 1.0
        assert 0.0 <= fit.ks_distance <= 1.0
