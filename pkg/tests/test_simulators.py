from collections import defaultdict

import numpy as np
import pytest

from drsk import simulators as sim
from drsk.rng import make_rng
from oracles import lindley_loop, single_message_transit


def posterior_mean_rates(setting):
    return 20.0 / np.asarray(sim.INTERARRIVAL_SUMS[setting])


# -- M/M/1


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("mu", [0.5, 1.3, 4.0])
def test_mm1_single_replication_matches_scalar_recursion(seed, mu):
    cfg = sim.Mm1Config(replications=1, seed=seed)
    got = sim.mm1_mean_wait(mu, cfg)
    services, gaps = sim.mm1_draws(mu, cfg, make_rng(seed))
    assert got == lindley_loop(services[0], gaps[0], cfg.n_customers)


def test_mm1_instant_service():
    assert sim.mm1_mean_wait(1e6, sim.Mm1Config()) < 1e-4


def test_mm1_slower_service_waits_longer():
    cfg = sim.Mm1Config(replications=20)
    slow = [sim.mm1_mean_wait(0.5, sim.with_seed(cfg, s)) for s in range(50)]
    fast = [sim.mm1_mean_wait(2.0, sim.with_seed(cfg, s)) for s in range(50)]
    assert np.median(slow) > np.median(fast)


def test_mm1_nonnegative_and_deterministic():
    cfg = sim.Mm1Config(seed=3)
    a = sim.mm1_mean_wait(0.8, cfg)
    assert a >= 0 and a == sim.mm1_mean_wait(0.8, cfg)


def test_mm1_single_customer_never_waits():
    assert sim.mm1_mean_wait(0.1, sim.Mm1Config(n_customers=1)) == 0.0


def test_mm1_validation():
    with pytest.raises(ValueError):
        sim.mm1_mean_wait(0.0, sim.Mm1Config())
    with pytest.raises(ValueError):
        sim.Mm1Config(arrival_rate=-1.0)


def test_mm1_posterior_parameters():
    t = sim.mm1_posterior(20, 10.0, 2.0, 1.0)
    assert t.params["shapes"][0] == 22.0 and t.params["rates"][0] == 11.0


# -- network: routes


def test_ring_routes():
    assert sim.ring_route(1, 2) == (1,)
    assert sim.ring_route(1, 3) == (1, 2)
    assert sim.ring_route(3, 1) == (3, 4)
    assert sim.ring_route(1, 4) == (4,)
    assert sim.ring_route(2, 1) == (1,)
    assert sim.ring_route(4, 3) == (3,)
    with pytest.raises(ValueError):
        sim.ring_route(2, 2)


def test_route_validation():
    routes = {p: sim.ring_route(*p) for p in sim.PAIRS}
    broken = dict(routes)
    broken[(1, 3)] = (1, 3)
    with pytest.raises(ValueError):
        sim.NetworkConfig(routes=broken)
    wrong_end = dict(routes)
    wrong_end[(1, 3)] = (1,)
    with pytest.raises(ValueError):
        sim.NetworkConfig(routes=wrong_end)
    missing = dict(routes)
    del missing[(4, 2)]
    with pytest.raises(ValueError):
        sim.NetworkConfig(routes=missing)


# -- network: simulation


@pytest.mark.parametrize("pair", sim.PAIRS)
def test_single_message_transit_is_analytic(pair):
    cfg = sim.NetworkConfig()
    run = sim.simulate_messages([(0.25, *pair, 412.0)], cfg)
    expected = single_message_transit(sim.ring_route(*pair), 412.0)
    assert run.delays[0] == pytest.approx(expected, abs=1e-12)


def test_edges_are_fifo_and_exclusive():
    cfg = sim.NetworkConfig()
    rng = make_rng(11)
    arrivals = sim._arrival_stream(3 * posterior_mean_rates("A"), cfg, rng, 400)
    run = sim.simulate_messages(arrivals, cfg)
    per_edge = defaultdict(list)
    for edge, k, ready, start, finish in run.edge_log:
        per_edge[edge].append((ready, start, finish))
    assert set(per_edge) == {1, 2, 3, 4}
    for entries in per_edge.values():
        entries.sort()
        finishes = [f for _, _, f in entries]
        assert finishes == sorted(finishes)
        for (_, _, f_prev), (_, s_next, _) in zip(entries, entries[1:]):
            assert s_next >= f_prev
    assert np.all(run.delays > 0)


def test_contention_adds_waiting():
    cfg = sim.NetworkConfig()
    lone = sim.simulate_messages([(0.0, 1, 2, 300.0)], cfg).delays[0]
    both = sim.simulate_messages([(0.0, 1, 2, 300.0), (0.0, 1, 2, 300.0)], cfg).delays
    assert both[0] == pytest.approx(lone)
    assert both[1] == pytest.approx(lone + cfg.occupancy(300.0, 1))


@pytest.mark.parametrize("setting", "ABC")
def test_delays_positive_and_finite(setting):
    cfg = sim.NetworkConfig(replications=5)
    d = sim.network_replication(posterior_mean_rates(setting), cfg, make_rng(0))
    assert d.shape == (30,)
    assert np.all(np.isfinite(d)) and np.all(d > 0)
    assert sim.network_mean_delay(posterior_mean_rates(setting), cfg) > 0


def test_heavier_traffic_increases_delay():
    cfg = sim.NetworkConfig(replications=10)
    rates = posterior_mean_rates("A")
    base = [sim.network_mean_delay(rates, sim.with_seed(cfg, s)) for s in range(30)]
    heavy = [sim.network_mean_delay(3 * rates, sim.with_seed(cfg, s)) for s in range(30)]
    assert np.median(heavy) > np.median(base)


def test_network_deterministic_per_seed():
    cfg = sim.NetworkConfig(replications=3, seed=5)
    rates = posterior_mean_rates("B")
    assert sim.network_mean_delay(rates, cfg) == sim.network_mean_delay(rates, cfg)


def test_network_rejects_bad_rates():
    with pytest.raises(ValueError):
        sim.network_replication(np.ones(11), sim.NetworkConfig(), make_rng(0))
    with pytest.raises(ValueError):
        sim.network_replication(np.r_[np.ones(11), 0.0], sim.NetworkConfig(), make_rng(0))


# -- posterior presets


@pytest.mark.parametrize("setting", "ABC")
def test_arrival_data_presets_shape_and_rates(setting):
    t = sim.network_posterior(sim.INTERARRIVAL_SUMS[setting])
    assert t.dim == 12
    np.testing.assert_array_equal(t.params["shapes"], np.full(12, 20.0))
    np.testing.assert_array_equal(t.params["rates"], sim.INTERARRIVAL_SUMS[setting])


def test_arrival_data_entries():
    a = sim.network_posterior(sim.INTERARRIVAL_SUMS["A"])
    b = sim.network_posterior(sim.INTERARRIVAL_SUMS["B"])
    i12 = sim.PAIRS.index((1, 2))
    i24 = sim.PAIRS.index((2, 4))
    assert a.params["rates"][i12] == 0.5
    assert b.params["rates"][i24] == 1.1
    assert a.params["shapes"][i12] / a.params["rates"][i12] == 40.0


def test_network_posterior_without_prior_rate():
    t = sim.network_posterior(np.ones(12), includes_prior_rate=False)
    np.testing.assert_allclose(t.params["rates"], 1.1)


def test_network_posterior_validation():
    with pytest.raises(ValueError):
        sim.network_posterior(np.ones(11))
    with pytest.raises(ValueError):
        sim.network_posterior(np.r_[np.ones(11), -1.0])
