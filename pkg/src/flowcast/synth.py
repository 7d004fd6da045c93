"""Synthetic transfer networks with planted, recoverable structure.

Three patterns are layered onto a population of ordinary senders, each one
deliberately announced in the data a month before it takes effect so that
a model reading a sender's event history has something real to learn:

* Two-regime hub routing.  Each sender routes a fixed share of its monthly
  volume to one of two hubs depending on a hidden two-state regime.  One
  month ahead, a signal node announces the upcoming regime by a transfer
  to the sender: sig_a sends a large amount when the next regime is a,
  sig_b a small one when it is b.  Senders pay a small fee back to both
  signal nodes, the signal nodes anchor to both hubs (leaning on their
  own) and settle with each other, so every recurring relationship of the
  bookkeeping nodes is on the books from the first month.

* Guest months.  A small set of guest nodes takes turns hosting months in
  round-robin order.  Every guest sends a constant presence transfer to
  every ordinary sender every month, so all guest-to-sender pairs exist
  from the start; the upcoming host raises that amount to its own teaser
  code for the senders who will participate next month.  Guests also pay
  both hubs each month, leaning on a fixed one.  First-time participations
  are sender-to-guest edges that exist nowhere in the history, so late
  months contain genuinely new pairs that are nevertheless predictable
  from the teasers.

* One-shot churn.  During the first churn months every sender spends a
  small share on a fresh destination drawn by a global popularity law,
  without replacement, so each such pair occurs exactly once and then
  dissolves.  Core destinations with stable proportions persist
  throughout and anchor edge persistence.

Volumes are log-normal per sender with mild monthly noise.  With regime
flips and guests disabled the average edge persistence has a closed form,
and the generator can hit a requested value by solving for the number of
churn months.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .graph import NodeUniverse, SnapshotSeries, TemporalEdge, build_snapshots
from .runconfig import named_rng

SIGNAL_A, SIGNAL_B, HUB_A, HUB_B = 0, 1, 2, 3
FIRST_GUEST = 4


@dataclass
class SynthConfig:
    n_nodes: int = 30
    n_months: int = 18
    seed: int = 0
    core_per_sender: int = 3
    hub_share: float = 0.5
    churn_share: float = 0.1
    signal_amount_high: float = 120.0
    signal_amount_low: float = 2.0
    regime_flip_prob: float = 0.5
    n_guests: int = 3
    guest_share: float = 0.2
    fee_share: float = 0.04
    participation_prob: float = 0.35
    presence_amount: float = 1.0
    teaser_base: float = 200.0
    teaser_ratio: float = 2.0
    persistence_target: float | None = None
    churn_months: int | None = None
    volume_mu: float = 3.0
    volume_sigma: float = 0.4
    month_noise: float = 0.05
    popularity_exponent: float = 1.5
    start_year: int = 2020
    start_month: int = 1


def n_persistent_pairs(
    n_ordinary: int,
    core_per_sender: int,
    n_guests: int = 0,
    with_fees: bool = True,
) -> int:
    """Distinct pairs that recur every month when flips and participation are off.

    Per ordinary sender: one hub edge, its core edges, two fee edges
    (unless fees are disabled) and one incoming signal edge.  The two
    signal nodes anchor to both hubs and settle with each other, and each
    guest pays both hubs and sends presence to every ordinary sender.
    """
    per_sender = core_per_sender + 2 + (2 if with_fees else 0)
    return n_ordinary * per_sender + 6 + n_guests * (n_ordinary + 2)


def churn_months_for_target(
    target: float,
    n_months: int,
    n_ordinary: int,
    core_per_sender: int,
    n_guests: int = 0,
    with_fees: bool = True,
) -> int:
    """Number of churn months whose average edge persistence is closest to target.

    With flips and guests disabled, K persistent pairs appear in every one
    of the T snapshots and each of the n_ordinary * U churn pairs appears
    exactly once, so the mean appearance fraction is

        p(U) = (K + n_ordinary * U / T) / (K + n_ordinary * U).

    Solving for U gives K (1 - p) / (n_ordinary (p - 1/T)); achievable
    targets lie in (1/T, 1].
    """
    if n_months < 2:
        raise ValueError("persistence targets need at least two months")
    if not (1.0 / n_months < target <= 1.0):
        raise ValueError(
            f"persistence target must lie in (1/{n_months}, 1], got {target}"
        )
    k = n_persistent_pairs(n_ordinary, core_per_sender, n_guests, with_fees)
    exact = k * (1.0 - target) / (n_ordinary * (target - 1.0 / n_months))
    return int(round(exact))


def _validated_dims(config: SynthConfig) -> tuple[int, int]:
    """Check a config and return (n_ordinary, n_churn_months)."""
    if config.n_guests < 0:
        raise ValueError("n_guests must be nonnegative")
    n_special = FIRST_GUEST + config.n_guests
    n_ord = config.n_nodes - n_special
    if n_ord < 4:
        raise ValueError(
            f"n_nodes must be at least {n_special + 4} with {config.n_guests} guests"
        )
    if config.n_months < 1:
        raise ValueError("n_months must be positive")
    if not (0.0 < config.hub_share < 1.0):
        raise ValueError("hub_share must be in (0, 1)")
    if config.churn_share < 0.0 or config.guest_share < 0.0 or config.fee_share < 0.0:
        raise ValueError("churn_share, guest_share and fee_share must be nonnegative")
    total_share = (
        config.hub_share + config.churn_share + config.guest_share + config.fee_share
    )
    if total_share >= 1.0:
        raise ValueError(
            "hub_share + churn_share + guest_share + fee_share must stay below 1"
        )
    if config.core_per_sender < 1 or config.core_per_sender > n_ord - 1:
        raise ValueError("core_per_sender must be in [1, n_ordinary - 1]")
    if config.signal_amount_high <= 0 or config.signal_amount_low <= 0:
        raise ValueError("signal amounts must be positive")
    if config.n_guests > 0:
        if config.teaser_base <= 0 or config.teaser_ratio <= 0:
            raise ValueError("teaser amounts must be positive")
        if config.presence_amount <= 0:
            raise ValueError("presence_amount must be positive")
        if config.teaser_base <= config.presence_amount:
            raise ValueError("teaser_base must exceed presence_amount")
    if not (0.0 <= config.regime_flip_prob <= 1.0):
        raise ValueError("regime_flip_prob must lie in [0, 1]")
    if not (0.0 <= config.participation_prob <= 1.0):
        raise ValueError("participation_prob must lie in [0, 1]")

    pool = n_ord - 1 - config.core_per_sender
    max_churn = min(config.n_months, pool)
    guests_active = config.n_guests > 0 and config.participation_prob > 0.0

    if config.persistence_target is not None:
        if config.churn_months is not None:
            raise ValueError("give persistence_target or churn_months, not both")
        if config.regime_flip_prob != 0.0:
            raise ValueError("persistence targets need regime_flip_prob = 0")
        if guests_active:
            raise ValueError(
                "persistence targets need guests disabled "
                "(n_guests = 0 or participation_prob = 0)"
            )
        if config.churn_share == 0.0 and config.persistence_target < 1.0:
            raise ValueError("persistence targets below 1 need a positive churn_share")
        u = churn_months_for_target(
            config.persistence_target,
            config.n_months,
            n_ord,
            config.core_per_sender,
            config.n_guests,
            config.fee_share > 0.0,
        )
        if u > max_churn:
            raise ValueError(
                f"target needs {u} churn months but only {max_churn} are possible"
            )
        return n_ord, u

    if config.churn_months is not None:
        if not (0 <= config.churn_months <= max_churn):
            raise ValueError(f"churn_months must lie in [0, {max_churn}]")
        if config.churn_months > 0 and config.churn_share == 0.0:
            raise ValueError("churn months need a positive churn_share")
        return n_ord, config.churn_months

    if config.churn_share == 0.0:
        return n_ord, 0
    # by default churn stops well before the series end, so the last months
    # contain no unpredictable new pairs, only the announced ones
    return n_ord, min(max_churn, max(0, config.n_months - 6))


def _month_start_epoch(year: int, month: int, offset: int) -> int:
    y, m = divmod(year * 12 + (month - 1) + offset, 12)
    return int(datetime(y, m + 1, 1, tzinfo=timezone.utc).timestamp())


def generate_edges(config: SynthConfig) -> tuple[list, dict]:
    """Raw timestamped edges plus the ground truth behind them.

    The truth dict records node labels, role ids, each sender's regime
    sequence (one month past the end, since the last signal points there),
    core destinations and fractions, guest rotation, hubs, participation
    and teaser codes, the churn schedule, and the closed-form average edge
    persistence when flips and participation are disabled.
    """
    n_ord, n_churn = _validated_dims(config)
    t_total = config.n_months
    n_guests = config.n_guests
    guests = list(range(FIRST_GUEST, FIRST_GUEST + n_guests))
    ordinary = list(range(FIRST_GUEST + n_guests, config.n_nodes))
    labels = (
        ["sig_a", "sig_b", "hub_a", "hub_b"]
        + [f"g{k}" for k in range(n_guests)]
        + [f"u{k}" for k in range(n_ord)]
    )

    rng_reg = named_rng(config.seed, "synth.regimes")
    rng_vol = named_rng(config.seed, "synth.volumes")
    rng_core = named_rng(config.seed, "synth.cores")
    rng_churn = named_rng(config.seed, "synth.churn")
    rng_guest = named_rng(config.seed, "synth.guests")
    rng_noise = named_rng(config.seed, "synth.noise")

    regimes = np.zeros((n_ord, t_total + 1), dtype=int)
    regimes[:, 0] = rng_reg.integers(0, 2, size=n_ord)
    for t in range(1, t_total + 1):
        flip = rng_reg.random(n_ord) < config.regime_flip_prob
        regimes[:, t] = np.where(flip, 1 - regimes[:, t - 1], regimes[:, t - 1])

    volumes = rng_vol.lognormal(
        config.volume_mu, config.volume_sigma, size=n_ord + n_guests
    )
    base_volume = volumes[:n_ord]
    guest_volume = volumes[n_ord:]

    cores: dict = {}
    core_fractions: dict = {}
    for i in ordinary:
        candidates = np.array([j for j in ordinary if j != i])
        picked = rng_core.choice(candidates, size=config.core_per_sender, replace=False)
        cores[i] = [int(j) for j in picked]
        core_fractions[i] = rng_core.dirichlet(np.full(config.core_per_sender, 2.0))

    # churn destinations: drawn by a global popularity law over ordinary
    # nodes, without replacement per sender, so each pair occurs once ever
    popularity = np.power(np.arange(1, n_ord + 1, dtype=float), -config.popularity_exponent)
    first_ordinary = FIRST_GUEST + n_guests
    pools = {i: [j for j in ordinary if j != i and j not in cores[i]] for i in ordinary}
    churn_schedule: dict = {}
    for t in range(n_churn):
        for i in ordinary:
            pool = pools[i]
            weights = popularity[np.array(pool) - first_ordinary]
            dest = int(rng_churn.choice(np.array(pool), p=weights / weights.sum()))
            pool.remove(dest)
            churn_schedule[(i, t)] = dest

    # guest months run from month 1 (the first that can be teased ahead);
    # participation is drawn per sender-month and announced at month t-1
    guests_active = n_guests > 0 and config.participation_prob > 0.0
    participation = np.zeros((n_ord, t_total), dtype=bool)
    if guests_active:
        for t in range(1, t_total):
            participation[:, t] = rng_guest.random(n_ord) < config.participation_prob
    teaser_amounts = [
        config.teaser_base * config.teaser_ratio**k for k in range(n_guests)
    ]

    def guest_of(t: int) -> int:
        return guests[t % n_guests]

    edges: list = []
    for t in range(t_total):
        ts0 = _month_start_epoch(config.start_year, config.start_month, t)
        month_events: list = []

        def emit(src: int, dst: int, amount: float) -> None:
            month_events.append(TemporalEdge(src, dst, ts0 + len(month_events), float(amount)))

        noise = rng_noise.lognormal(0.0, config.month_noise, size=n_ord)
        churn_active = t < n_churn
        for k, i in enumerate(ordinary):
            volume = base_volume[k] * noise[k]
            emit(i, HUB_A + int(regimes[k, t]), config.hub_share * volume)
            if config.fee_share > 0.0:
                emit(i, SIGNAL_A, 0.5 * config.fee_share * volume)
                emit(i, SIGNAL_B, 0.5 * config.fee_share * volume)
            spent = config.hub_share + config.fee_share
            if churn_active:
                spent += config.churn_share
            if participation[k, t]:
                spent += config.guest_share
            core_total = (1.0 - spent) * volume
            for dest, frac in zip(cores[i], core_fractions[i]):
                emit(i, dest, frac * core_total)
            if churn_active:
                emit(i, churn_schedule[(i, t)], config.churn_share * volume)
            if participation[k, t]:
                emit(i, guest_of(t), config.guest_share * volume)
        host = guest_of(t + 1) if guests_active and t + 1 < t_total else None
        for g_idx, g in enumerate(guests):
            main_hub = HUB_A + (g_idx % 2)
            other_hub = HUB_B - (g_idx % 2)
            budget = config.hub_share * guest_volume[g_idx]
            emit(g, main_hub, 2.0 * budget / 3.0)
            emit(g, other_hub, budget / 3.0)
            code = teaser_amounts[g_idx]
            for k, i in enumerate(ordinary):
                teased = g == host and participation[k, t + 1]
                emit(g, i, code if teased else config.presence_amount)
        for k, i in enumerate(ordinary):
            upcoming = int(regimes[k, t + 1])
            amount = config.signal_amount_high if upcoming == 0 else config.signal_amount_low
            emit(SIGNAL_A + upcoming, i, amount)
        emit(SIGNAL_A, HUB_A, 50.0)
        emit(SIGNAL_A, HUB_B, 25.0)
        emit(SIGNAL_B, HUB_B, 50.0)
        emit(SIGNAL_B, HUB_A, 25.0)
        emit(SIGNAL_A, SIGNAL_B, 40.0)
        emit(SIGNAL_B, SIGNAL_A, 40.0)
        edges.extend(month_events)

    if config.regime_flip_prob == 0.0 and not guests_active:
        k_pairs = n_persistent_pairs(
            n_ord, config.core_per_sender, n_guests, config.fee_share > 0.0
        )
        analytic = (k_pairs + n_ord * n_churn / t_total) / (k_pairs + n_ord * n_churn)
    else:
        analytic = None

    truth = {
        "labels": labels,
        "roles": {
            "signal_a": SIGNAL_A,
            "signal_b": SIGNAL_B,
            "hub_a": HUB_A,
            "hub_b": HUB_B,
            "guests": guests,
            "ordinary": ordinary,
        },
        "regimes": {i: regimes[k].copy() for k, i in enumerate(ordinary)},
        "cores": cores,
        "core_fractions": core_fractions,
        "churn": churn_schedule,
        "churn_months": n_churn,
        "guest_of_month": {t: guest_of(t) for t in range(1, t_total) if guests_active},
        "participation": {
            i: participation[k].copy() for k, i in enumerate(ordinary)
        },
        "teaser_amounts": dict(zip(guests, teaser_amounts)),
        "guest_hubs": {g: HUB_A + (g_idx % 2) for g_idx, g in enumerate(guests)},
        "presence_amount": config.presence_amount,
        "analytic_persistence": analytic,
    }
    return edges, truth


def generate_series(config: SynthConfig) -> tuple[SnapshotSeries, dict]:
    """Generate edges and bucket them into a monthly snapshot series."""
    edges, truth = generate_edges(config)
    series = build_snapshots(edges, NodeUniverse(truth["labels"]))
    return series, truth
