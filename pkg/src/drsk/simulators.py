"""Black-box stochastic simulators used as integrands.

* M/M/1 queue: mean waiting time of the first customers, via the Lindley
  recursion ``W_{k+1} = max(0, W_k + S_k - A_{k+1})`` with ``W_1 = 0``.
* Four-node communication network: mean transit delay of the first messages
  entering an initially empty network.

Topology of the network (a stand-in, since only the edge lengths and
capacities are given): nodes 1..4 on a ring, edge ``e`` joins node ``e`` to
node ``e % 4 + 1`` and has length ``100 e`` miles.  A message follows the
shorter way around the ring, going clockwise when both ways have two hops.
Each edge carries one message at a time in FIFO order; every visited node,
the entry and destination included, adds a fixed processing time with no
queueing.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .distributions import ScoredTarget, gamma_product
from .rng import make_rng

# ---------------------------------------------------------------------------
# M/M/1


@dataclass(frozen=True)
class Mm1Config:
    arrival_rate: float = 1.0
    n_customers: int = 10
    replications: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.arrival_rate <= 0 or self.n_customers < 1 or self.replications < 1:
            raise ValueError("M/M/1 rates and counts must be positive")


def mm1_draws(service_rate: float, config: Mm1Config, rng: np.random.Generator):
    """Service and inter-arrival times, each of shape ``(replications, n_customers - 1)``."""
    shape = (config.replications, config.n_customers - 1)
    services = rng.exponential(1.0 / service_rate, size=shape)
    gaps = rng.exponential(1.0 / config.arrival_rate, size=shape)
    return services, gaps


def mm1_mean_wait(service_rate: float, config: Mm1Config, rng: Optional[np.random.Generator] = None) -> float:
    """Average over replications of the mean waiting time of the first customers."""
    if not service_rate > 0:
        raise ValueError("service rate must be positive")
    rng = make_rng(config.seed) if rng is None else rng
    services, gaps = mm1_draws(service_rate, config, rng)
    wait = np.zeros(config.replications)
    total = np.zeros(config.replications)
    for k in range(config.n_customers - 1):
        wait = np.maximum(0.0, wait + services[:, k] - gaps[:, k])
        total = total + wait
    per_rep = total / config.n_customers
    return math.fsum(per_rep) / config.replications


def mm1_posterior(L: int, total_service_time: float, prior_shape: float = 2.0, prior_rate: float = 1.0) -> ScoredTarget:
    """Gamma posterior of an exponential service rate from ``L`` observed services."""
    if L < 0 or total_service_time <= 0:
        raise ValueError("need L >= 0 and a positive total service time")
    return gamma_product([prior_shape + L], [prior_rate + total_service_time])


# ---------------------------------------------------------------------------
# communication network

N_NODES = 4
PAIRS = tuple((i, j) for i in range(1, N_NODES + 1) for j in range(1, N_NODES + 1) if i != j)


def ring_route(i: int, j: int) -> tuple:
    """Edge sequence from node ``i`` to node ``j`` on the 4-ring."""
    if i == j:
        raise ValueError("route endpoints must differ")
    hops = (j - i) % N_NODES
    if hops <= N_NODES // 2:
        return tuple((i - 1 + k) % N_NODES + 1 for k in range(hops))
    # counter-clockwise: leaving node v backwards uses edge v-1 (edge 4 for node 1)
    return tuple((i - 2 - k) % N_NODES + 1 for k in range(N_NODES - hops))


@dataclass(frozen=True)
class NetworkConfig:
    mean_msg_length_bits: float = 300.0
    node_processing_s: float = 0.001
    edge_capacity_bits: float = 275000.0
    edge_lengths_miles: tuple = (100.0, 200.0, 300.0, 400.0)
    speed_mps: float = 150000.0
    n_messages: int = 30
    replications: int = 100
    routes: dict = field(default_factory=lambda: {p: ring_route(*p) for p in PAIRS})
    seed: int = 0

    def __post_init__(self):
        missing = [p for p in PAIRS if p not in self.routes]
        if missing:
            raise ValueError(f"routes missing for pairs {missing}")
        for (i, j), route in self.routes.items():
            node = i
            for e in route:
                a, b = e, e % N_NODES + 1
                if node not in (a, b):
                    raise ValueError(f"route {route} for {(i, j)} is not a connected path")
                node = b if node == a else a
            if node != j:
                raise ValueError(f"route {route} does not end at node {j}")

    def occupancy(self, length_bits: float, edge: int) -> float:
        """Seconds a message of the given length holds ``edge``."""
        return length_bits / self.edge_capacity_bits + self.edge_lengths_miles[edge - 1] / self.speed_mps


@dataclass
class NetworkRun:
    delays: np.ndarray
    # (edge, message, arrival at edge, start, finish)
    edge_log: list


def simulate_messages(arrivals, config: NetworkConfig, track: Optional[int] = None) -> NetworkRun:
    """Event-driven transit of a fixed list of messages.

    ``arrivals`` is a sequence of ``(time, src, dst, length_bits)`` sorted by
    time.  Delays are reported for the first ``track`` messages (all by
    default).  Events are handled in global time order, so an edge's next
    start time is simply ``max(arrival at edge, edge free time)``.
    """
    arrivals = list(arrivals)
    track = len(arrivals) if track is None else track
    free_at = [0.0] * (N_NODES + 1)
    done = np.full(len(arrivals), np.nan)
    log = []
    # heap entries: (time at node, tiebreak, message index, position on route)
    heap = [(a[0], k, k, 0) for k, a in enumerate(arrivals)]
    heapq.heapify(heap)
    while heap:
        t, _, k, pos = heapq.heappop(heap)
        _, src, dst, length = arrivals[k]
        route = config.routes[(src, dst)]
        ready = t + config.node_processing_s
        if pos == len(route):
            done[k] = ready
            continue
        edge = route[pos]
        start = max(ready, free_at[edge])
        finish = start + config.occupancy(length, edge)
        free_at[edge] = finish
        log.append((edge, k, ready, start, finish))
        heapq.heappush(heap, (finish, k, k, pos + 1))
    times = np.array([a[0] for a in arrivals])
    return NetworkRun(delays=(done - times)[:track], edge_log=log)


def _arrival_stream(rates: np.ndarray, config: NetworkConfig, rng: np.random.Generator, count: int):
    total = rates.sum()
    gaps = rng.exponential(1.0 / total, size=count)
    pairs = rng.choice(len(PAIRS), size=count, p=rates / total)
    lengths = rng.exponential(config.mean_msg_length_bits, size=count)
    times = np.cumsum(gaps)
    return [(times[k], *PAIRS[pairs[k]], lengths[k]) for k in range(count)]


def network_replication(rates, config: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    """Delays of the first ``n_messages`` arrivals in one run of the network.

    Later arrivals can still queue ahead of earlier messages on an edge, so
    the arrival stream is extended until it is certain that no further
    message can enter before the tracked ones have all finished.
    """
    rates = np.asarray(rates, dtype=float).reshape(-1)
    if rates.size != len(PAIRS) or np.any(rates <= 0):
        raise ValueError(f"need {len(PAIRS)} positive arrival rates")
    n = config.n_messages
    arrivals = _arrival_stream(rates, config, rng, n)
    while True:
        run = simulate_messages(arrivals, config, track=n)
        last_done = float(np.max(run.delays + np.array([a[0] for a in arrivals[:n]])))
        if arrivals[-1][0] >= last_done:
            return run.delays
        more = _arrival_stream(rates, config, rng, n)
        offset = arrivals[-1][0]
        arrivals += [(t + offset, s, d, l) for (t, s, d, l) in more]


def network_mean_delay(rates, config: NetworkConfig, rng: Optional[np.random.Generator] = None) -> float:
    """Average over replications of the mean delay of the first messages."""
    rng = make_rng(config.seed) if rng is None else rng
    means = [float(np.mean(network_replication(rates, config, rng))) for _ in range(config.replications)]
    return math.fsum(means) / config.replications


# cumulative 0.1 + sum of L=10 inter-arrival times, row-major over ordered pairs
INTERARRIVAL_SUMS = {
    "A": (0.5, 0.7, 0.6, 0.4, 0.4, 1.2, 0.3, 1.2, 1.0, 0.8, 0.7, 0.5),
    "B": (0.3, 0.5, 0.4, 0.2, 0.3, 1.1, 0.2, 1.0, 0.9, 0.5, 0.4, 0.3),
    "C": (0.4, 0.6, 0.5, 0.3, 0.4, 1.0, 0.3, 1.2, 0.7, 0.6, 0.5, 0.4),
}


def network_posterior(
    data, L: int = 10, prior_shape: float = 10.0, prior_rate: float = 0.1, includes_prior_rate: bool = True
) -> ScoredTarget:
    """Product-Gamma posterior of the 12 arrival rates.

    ``data`` holds the summed inter-arrival times per ordered pair; the
    published table already includes the prior rate, hence the default
    ``includes_prior_rate=True``.
    """
    vals = np.asarray(data, dtype=float).reshape(-1)
    if vals.size != len(PAIRS):
        raise ValueError(f"need {len(PAIRS)} cumulative values")
    if np.any(vals <= 0) or L < 0 or prior_shape <= 0 or prior_rate <= 0:
        raise ValueError("posterior inputs must be positive")
    rates = vals if includes_prior_rate else vals + prior_rate
    return gamma_product(np.full(vals.size, prior_shape + L), rates)


def with_seed(config, seed: int):
    return replace(config, seed=seed)
