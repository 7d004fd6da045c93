import numpy as np
import pytest

from flowcast.baselines import (
    ColdStartError,
    EdgeBankState,
    edgebank_ratio,
    edgebank_tw_ratio,
    edgebank_tw_volume,
    edgebank_volume,
    predict_ratio_rows,
    predict_volumes,
)
from flowcast.graph import series_from_adjacency


def history_fixture():
    # sender 0 active in months 0 and 1 with different rows; sender 3 never acts
    return series_from_adjacency(
        [
            {(0, 1): 1.0, (2, 1): 5.0},
            {(0, 1): 1.0, (0, 2): 3.0},
            {(1, 0): 7.0},
        ],
        n_nodes=4,
        start_month=(2019, 1),
    )


class TestState:
    def test_only_past_months_enter_state(self):
        state = EdgeBankState.from_series(history_fixture(), t=2)
        assert set(state.last_active) == {0, 2}
        assert 1 not in state.ratio_history  # sender 1 first acts at month 2
        assert state.seen_pairs == {(0, 1), (2, 1), (0, 2)}

    def test_future_months_cannot_change_predictions(self):
        near = series_from_adjacency(
            [{(0, 1): 2.0}, {(0, 2): 9.0}], n_nodes=3, start_month=(2019, 1)
        )
        far = series_from_adjacency(
            [{(0, 1): 2.0}, {(1, 0): 123.0, (2, 0): 5.0}], n_nodes=3, start_month=(2019, 1)
        )
        a = EdgeBankState.from_series(near, t=1)
        b = EdgeBankState.from_series(far, t=1)
        assert edgebank_ratio(a, 0) == edgebank_ratio(b, 0)
        assert edgebank_volume(a, 0) == edgebank_volume(b, 0)

    def test_target_month_bounds(self):
        with pytest.raises(ValueError):
            EdgeBankState.from_series(history_fixture(), t=4)
        with pytest.raises(ValueError):
            EdgeBankState.from_series(history_fixture(), t=-1)

    def test_t_zero_has_no_warm_senders(self):
        state = EdgeBankState.from_series(history_fixture(), t=0)
        assert state.warm_senders() == []
        assert state.is_cold(0)


class TestRatio:
    def test_mean_ratios_averages_rows(self):
        state = EdgeBankState.from_series(history_fixture(), t=3)
        row = edgebank_ratio(state, 0)
        # month 0 row {1: 1.0}; month 1 row {1: 0.25, 2: 0.75}
        assert row[1] == pytest.approx(0.625)
        assert row[2] == pytest.approx(0.375)
        assert sum(row.values()) == pytest.approx(1.0)

    def test_mean_weights_mode_weights_busy_months(self):
        state = EdgeBankState.from_series(history_fixture(), t=3)
        row = edgebank_ratio(state, 0, mode="mean-weights")
        # mean amounts: dst 1 -> (1+1)/2 = 1, dst 2 -> (0+3)/2 = 1.5
        assert row[1] == pytest.approx(0.4)
        assert row[2] == pytest.approx(0.6)

    def test_modes_agree_for_constant_volume_sender(self):
        series = series_from_adjacency(
            [{(0, 1): 2.0, (0, 2): 2.0}, {(0, 1): 4.0}],
            n_nodes=3,
            start_month=(2020, 1),
        )
        state = EdgeBankState.from_series(series, t=2)
        a = edgebank_ratio(state, 0, mode="mean-ratios")
        b = edgebank_ratio(state, 0, mode="mean-weights")
        assert a == pytest.approx(b)

    def test_single_month_history_is_that_row(self):
        state = EdgeBankState.from_series(history_fixture(), t=1)
        assert edgebank_ratio(state, 2) == {1: 1.0}

    def test_cold_sender_raises(self):
        state = EdgeBankState.from_series(history_fixture(), t=3)
        with pytest.raises(ColdStartError):
            edgebank_ratio(state, 3)

    def test_unknown_mode_rejected(self):
        state = EdgeBankState.from_series(history_fixture(), t=3)
        with pytest.raises(ValueError, match="mode"):
            edgebank_ratio(state, 0, mode="median")

    def test_window_variant_uses_last_month_only(self):
        state = EdgeBankState.from_series(history_fixture(), t=2)
        assert edgebank_tw_ratio(state, 0) == pytest.approx({1: 0.25, 2: 0.75})

    def test_window_variant_requires_recent_activity(self):
        state = EdgeBankState.from_series(history_fixture(), t=2)
        with pytest.raises(ColdStartError):
            edgebank_tw_ratio(state, 2)  # active at month 0 but not month 1


class TestVolume:
    def test_mean_of_active_months(self):
        series = series_from_adjacency(
            [{(0, 1): 10.0}, {(0, 1): 20.0}], n_nodes=2, start_month=(2020, 1)
        )
        state = EdgeBankState.from_series(series, t=2)
        assert edgebank_volume(state, 0) == pytest.approx(15.0)
        assert edgebank_tw_volume(state, 0) == pytest.approx(20.0)

    def test_inactive_months_do_not_dilute_mean(self):
        series = series_from_adjacency(
            [{(0, 1): 10.0}, {(1, 0): 1.0}, {(0, 1): 20.0}],
            n_nodes=2,
            start_month=(2020, 1),
        )
        state = EdgeBankState.from_series(series, t=3)
        assert edgebank_volume(state, 0) == pytest.approx(15.0)

    def test_window_volume_requires_recent_activity(self):
        series = series_from_adjacency(
            [{(0, 1): 10.0}, {(1, 0): 1.0}], n_nodes=2, start_month=(2020, 1)
        )
        state = EdgeBankState.from_series(series, t=2)
        with pytest.raises(ColdStartError):
            edgebank_tw_volume(state, 0)


class TestBatch:
    def test_rows_and_skips_partition_senders(self):
        state = EdgeBankState.from_series(history_fixture(), t=3)
        rows, skipped = predict_ratio_rows(state)
        assert sorted(rows) + sorted(skipped) != []
        assert set(rows) | set(skipped) == set(range(4))
        assert set(rows) & set(skipped) == set()
        assert set(rows) == {0, 1, 2}

    def test_window_skips_stale_senders(self):
        state = EdgeBankState.from_series(history_fixture(), t=3)
        rows, skipped = predict_ratio_rows(state, window=True)
        assert set(rows) == {1}  # only sender 1 active at month 2
        assert set(skipped) == {0, 2, 3}

    def test_batch_volumes_match_single_calls(self):
        state = EdgeBankState.from_series(history_fixture(), t=3)
        volumes, skipped = predict_volumes(state)
        for sender, v in volumes.items():
            assert v == edgebank_volume(state, sender)
        assert skipped == [3]

    def test_all_rows_are_distributions(self):
        rng = np.random.default_rng(5)
        months = []
        for _ in range(6):
            adj = {}
            for _ in range(12):
                i, j = rng.integers(0, 8, size=2)
                if i != j:
                    adj[(int(i), int(j))] = float(rng.uniform(0.5, 9.0))
            months.append(adj)
        series = series_from_adjacency(months, n_nodes=8, start_month=(2018, 5))
        state = EdgeBankState.from_series(series, t=6)
        for mode in ("mean-ratios", "mean-weights"):
            rows, _ = predict_ratio_rows(state, mode=mode)
            for row in rows.values():
                assert sum(row.values()) == pytest.approx(1.0, abs=1e-9)
                assert all(v > 0 for v in row.values())
