"""Slotted broadcast SIS process on a realised multi-layer graph.

Each slot is split into 1/dt synchronous micro-slots. In a micro-slot an
informed device forgets with probability dt, and an uninformed device with j
informed strand neighbours becomes informed with probability
1 - (1 - alpha dt)^j. For small dt this is the continuous-time process whose
mean-field limit lives in :mod:`spreadnet.epidemic`.

Strand edge sets:
    intra m      layer-m nodes, links between layer-m nodes (within r_m).
    inter (m,n)  layer m and n nodes, links from a layer-m node to a layer-m
                 or layer-n node within r_m (used in both directions).
    combined     all nodes, all links.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .degree import StrandId
from .errors import InvalidParameterError
from .geometry import MultiLayerGraph


@dataclass(frozen=True)
class SimConfig:
    slots: int = 300
    burn_in: int = 100
    trials: int = 10
    seed: int = 0
    dt: float = 0.05
    initial_fraction: float = 0.5
    max_restarts: int = 20

    def __post_init__(self):
        if not self.slots > self.burn_in >= 0:
            raise InvalidParameterError(f"need slots > burn_in >= 0, got {self.slots}, {self.burn_in}")
        if not 0 < self.dt <= 1:
            raise InvalidParameterError(f"dt must lie in (0, 1], got {self.dt}")
        if abs(1 / self.dt - round(1 / self.dt)) > 1e-9:
            raise InvalidParameterError(f"1/dt must be an integer, got dt={self.dt}")
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        if not 0 <= self.initial_fraction <= 1:
            raise InvalidParameterError("initial_fraction must lie in [0, 1]")
        if self.max_restarts < 0:
            raise InvalidParameterError("max_restarts must be >= 0")

    @property
    def micro_slots(self) -> int:
        return int(round(1 / self.dt))


@dataclass(frozen=True)
class SimResult:
    """Informed fraction per trial (rows) and slot 0..slots (columns).

    ``restarts[t]`` counts how often trial t went extinct before the end of
    burn-in and was rerun on a fresh stream.
    """

    strand: StrandId
    alpha: float
    burn_in: int
    trajectories: np.ndarray
    restarts: tuple[int, ...] = ()
    participants: int = 0

    @property
    def slots(self) -> int:
        return self.trajectories.shape[1] - 1

    @property
    def mean_trajectory(self) -> np.ndarray:
        return self.trajectories.mean(axis=0)

    @property
    def steady_state(self) -> tuple[float, float]:
        return estimate_steady_state(self)


def strand_subgraph(graph: MultiLayerGraph, strand: StrandId) -> tuple[np.ndarray, sparse.csr_matrix]:
    """Participating global node ids and the strand's symmetric adjacency over them."""
    strand.check_layers(graph.num_layers)
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    la, lb = graph.layer[a], graph.layer[b]
    if strand.kind == "combined":
        nodes = np.arange(graph.num_nodes)
        keep = np.ones(len(a), bool)
    else:
        m = strand.m
        peers = [m] if strand.kind == "intra" else [m, strand.n]
        nodes = np.nonzero(np.isin(graph.layer, peers))[0]
        close = graph.edge_length <= graph.ranges[m - 1]
        keep = close & (((la == m) & np.isin(lb, peers)) | ((lb == m) & np.isin(la, peers)))
    index = np.full(graph.num_nodes, -1)
    index[nodes] = np.arange(len(nodes))
    i, j = index[a[keep]], index[b[keep]]
    n = len(nodes)
    adj = sparse.csr_matrix(
        (np.ones(2 * len(i), np.int32), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(n, n),
    )
    return nodes, adj


def _run_trial(adj, alpha, config: SimConfig, seed_seq) -> np.ndarray:
    n = adj.shape[0]
    rng = np.random.Generator(np.random.Philox(seed_seq))
    traj = np.zeros(config.slots + 1)
    informed = np.zeros(n, bool)
    n0 = int(round(config.initial_fraction * n))
    informed[rng.choice(n, size=n0, replace=False)] = True
    traj[0] = n0 / n
    dt = config.dt
    keep = 1.0 - alpha * dt
    for slot in range(1, config.slots + 1):
        if not informed.any():
            break
        for _ in range(config.micro_slots):
            j = adj @ informed.astype(np.int32)
            u = rng.random(n)
            informed = np.where(informed, u >= dt, u < 1.0 - keep ** j)
        traj[slot] = informed.mean()
    return traj


def run_sis(graph: MultiLayerGraph, strand: StrandId, alpha: float, config: SimConfig) -> SimResult:
    """Monte-Carlo estimate of the quasi-stationary informed fraction.

    Trial t, attempt a uses the stream SeedSequence([seed, t, a]). An attempt
    that dies out before the end of burn-in is discarded and rerun (up to
    ``max_restarts`` times; the last attempt is kept if all die). A run whose
    initial informed set is empty is kept as is.
    """
    if not 0 <= alpha <= 1:
        raise InvalidParameterError(f"alpha must lie in [0, 1], got {alpha}")
    nodes, adj = strand_subgraph(graph, strand)
    if len(nodes) == 0:
        raise InvalidParameterError(f"strand {strand} has no participating nodes")
    rows, restarts = [], []
    for t in range(config.trials):
        attempt = 0
        while True:
            traj = _run_trial(adj, alpha, config, np.random.SeedSequence([config.seed, t, attempt]))
            died = traj[config.burn_in] == 0.0 and traj[0] > 0.0
            if not died or attempt >= config.max_restarts:
                break
            attempt += 1
        rows.append(traj)
        restarts.append(attempt)
    return SimResult(strand, alpha, config.burn_in, np.vstack(rows), tuple(restarts), len(nodes))


def estimate_steady_state(result: SimResult) -> tuple[float, float]:
    """(mean, standard error) of the post-burn-in time average across trials."""
    if result.burn_in >= result.slots:
        raise InvalidParameterError(
            f"burn_in {result.burn_in} leaves no slots out of {result.slots}"
        )
    per_trial = result.trajectories[:, result.burn_in + 1:].mean(axis=1)
    mean = float(per_trial.mean())
    if len(per_trial) < 2:
        return mean, 0.0
    return mean, float(per_trial.std(ddof=1) / math.sqrt(len(per_trial)))
