"""UPF placement algorithms.

Every algorithm maps the station graph, the per-station UE counts of a slot
and a budget ``k`` to ``k`` distinct stations hosting a UPF. A UE's latency is
the hop distance from its serving station to the closest UPF.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .association import ActiveLoad
from .clustering import adjust_to_k, kmeans, louvain_communities, nearest_stations_to_centers
from .metrics import percentile_from_arrays
from .topology import NetworkGraph

ALGORITHMS = (
    "static_kmeans",
    "random",
    "greedy_percentile",
    "greedy_average",
    "kmeans",
    "kmeans_greedy_average",
    "louvain_greedy_average",
)

PERCENTILE = 90


class AllocationError(ValueError):
    pass


@dataclass(frozen=True)
class Allocation:
    """Stations hosting a UPF, in the order the algorithm picked them."""

    upf_nodes: tuple[int, ...]
    algorithm: str
    k: int

    @property
    def nodes(self) -> frozenset[int]:
        return frozenset(self.upf_nodes)


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise AllocationError(f"k={k} out of range 1..{n}")


def _active_arrays(load: ActiveLoad) -> tuple[np.ndarray, np.ndarray]:
    active = np.array(load.active_stations, dtype=np.int64)
    weights = np.array([load.ue_count[b] for b in active], dtype=np.int64)
    return active, weights


def latency_arrays(upf_nodes, load: ActiveLoad, hop: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-active-station latency and UE weight arrays."""
    upf = np.asarray(list(upf_nodes), dtype=np.int64)
    if upf.size == 0:
        raise AllocationError("empty allocation")
    active, weights = _active_arrays(load)
    if active.size == 0:
        return active, weights
    return hop[np.ix_(active, upf)].min(axis=1), weights


def ue_latency_profile(alloc: Allocation | Sequence[int], load: ActiveLoad, hop: np.ndarray) -> dict[int, int]:
    """Multiset latency -> number of UEs experiencing it."""
    nodes = alloc.upf_nodes if isinstance(alloc, Allocation) else alloc
    lat, weights = latency_arrays(nodes, load, hop)
    profile: dict[int, int] = {}
    for value, w in zip(lat.tolist(), weights.tolist()):
        profile[value] = profile.get(value, 0) + w
    return dict(sorted(profile.items()))


# -- baselines ----------------------------------------------------------------

def allocate_random(n_stations: int, k: int, rng: np.random.Generator) -> Allocation:
    """Uniform sample of ``k`` distinct stations, active or not."""
    _check_k(k, n_stations)
    picked = rng.choice(n_stations, size=k, replace=False)
    return Allocation(tuple(int(i) for i in picked), "random", k)


def allocate_static_kmeans(coords: np.ndarray, k: int, seed: int = 0) -> Allocation:
    """K-means over every station; independent of where the UEs are."""
    _check_k(k, len(coords))
    cl = kmeans(coords, k, seed)
    return Allocation(tuple(nearest_stations_to_centers(cl.centers, coords)), "static_kmeans", k)


# -- global greedy ------------------------------------------------------------

def _greedy(hop: np.ndarray, load: ActiveLoad, k: int, by_percentile: bool) -> list[int]:
    n = hop.shape[0]
    _check_k(k, n)
    active, weights = _active_arrays(load)
    if active.size == 0:
        raise AllocationError("no active UEs")
    dist = hop[active]  # active stations x candidate stations
    current = np.full(active.size, np.iinfo(np.int32).max, dtype=dist.dtype)
    chosen: list[int] = []
    taken = np.zeros(n, dtype=bool)
    for _ in range(k):
        best, best_key = -1, None
        for cand in range(n):
            if taken[cand]:
                continue
            lat = np.minimum(current, dist[:, cand])
            # integer weighted sums keep the mean comparison exact
            total = int(lat @ weights)
            if by_percentile:
                key = (percentile_from_arrays(lat, weights, PERCENTILE), total)
            else:
                key = (total,)
            if best_key is None or key < best_key:
                best, best_key = cand, key
        chosen.append(best)
        taken[best] = True
        current = np.minimum(current, dist[:, best])
    return chosen


def allocate_greedy_percentile(hop: np.ndarray, load: ActiveLoad, k: int) -> Allocation:
    """Repeatedly add the station giving the lowest 90th-percentile latency.

    Ties go to the lower mean latency, then to the lower station id.
    """
    return Allocation(tuple(_greedy(hop, load, k, True)), "greedy_percentile", k)


def allocate_greedy_average(hop: np.ndarray, load: ActiveLoad, k: int) -> Allocation:
    """Repeatedly add the station giving the lowest mean UE latency."""
    return Allocation(tuple(_greedy(hop, load, k, False)), "greedy_average", k)


# -- clustered variants -------------------------------------------------------

def _fill_all_active(active: Sequence[int], n: int, k: int) -> list[int]:
    chosen = list(active)
    active_set = set(chosen)
    for b in range(n):
        if len(chosen) == k:
            break
        if b not in active_set:
            chosen.append(b)
    return chosen


def _weighted_median(candidates: Sequence[int], demand: Sequence[int], weights, hop: np.ndarray) -> int:
    """Candidate minimising the UE-weighted hop sum to ``demand`` stations."""
    cost = hop[np.ix_(list(candidates), list(demand))] @ np.asarray(weights, dtype=np.int64)
    return int(candidates[int(np.argmin(cost))])


def allocate_kmeans(coords: np.ndarray, load: ActiveLoad, k: int, seed: int = 0) -> Allocation:
    """K-means over the active stations; UPFs at the stations nearest each center."""
    n = len(coords)
    _check_k(k, n)
    active = load.active_stations
    if not active:
        raise AllocationError("no active stations")
    if k > len(active):
        return Allocation(tuple(_fill_all_active(active, n, k)), "kmeans", k)
    cl = kmeans(coords[active], k, seed, ids=active)
    return Allocation(tuple(nearest_stations_to_centers(cl.centers, coords)), "kmeans", k)


def allocate_kmeans_greedy_average(
    coords: np.ndarray, hop: np.ndarray, load: ActiveLoad, k: int, seed: int = 0
) -> Allocation:
    """K-means over active stations, then a weighted 1-median inside each cluster."""
    n = len(coords)
    _check_k(k, n)
    active = load.active_stations
    if not active:
        raise AllocationError("no active stations")
    if k > len(active):
        return Allocation(tuple(_fill_all_active(active, n, k)), "kmeans_greedy_average", k)
    cl = kmeans(coords[active], k, seed, ids=active)
    picks = []
    for members in cl.communities():
        weights = [load.ue_count[b] for b in members]
        picks.append(_weighted_median(members, members, weights, hop))
    return Allocation(tuple(picks), "kmeans_greedy_average", k)


def allocate_louvain_greedy_average(graph: NetworkGraph, load: ActiveLoad, k: int) -> Allocation:
    """Louvain communities forced to ``k``, then a weighted 1-median in each.

    Communities without UEs host their UPF at their lowest-id station.
    """
    _check_k(k, graph.n)
    if load.total_ues < 1:
        raise AllocationError("no active UEs")
    communities = adjust_to_k(louvain_communities(graph), graph, k).communities()
    picks = []
    for members in communities:
        demand = [b for b in members if load.ue_count.get(b, 0) > 0]
        if not demand:
            picks.append(members[0])
            continue
        weights = [load.ue_count[b] for b in demand]
        picks.append(_weighted_median(members, demand, weights, graph.hop_dist))
    return Allocation(tuple(picks), "louvain_greedy_average", k)


# -- dispatch -----------------------------------------------------------------

@dataclass
class Allocator:
    """Runs any algorithm by name against a fixed graph.

    Static K-means placements are computed once per ``k`` by :meth:`prepare`
    and reused for every slot.
    """

    graph: NetworkGraph
    seed: int = 0
    _static: dict[int, Allocation] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.coords = self.graph.coords

    def prepare(self, ks: Sequence[int]) -> None:
        for k in ks:
            if k not in self._static:
                self._static[k] = allocate_static_kmeans(self.coords, k, self.seed)

    def rng(self, slot_index: int, k: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, slot_index, k])

    def __call__(self, algorithm: str, load: ActiveLoad, k: int) -> Allocation:
        hop = self.graph.hop_dist
        if algorithm == "static_kmeans":
            if k not in self._static:
                self.prepare([k])
            return self._static[k]
        if algorithm == "random":
            return allocate_random(self.graph.n, k, self.rng(load.slot_index, k))
        if algorithm == "greedy_percentile":
            return allocate_greedy_percentile(hop, load, k)
        if algorithm == "greedy_average":
            return allocate_greedy_average(hop, load, k)
        if algorithm == "kmeans":
            return allocate_kmeans(self.coords, load, k, self.seed)
        if algorithm == "kmeans_greedy_average":
            return allocate_kmeans_greedy_average(self.coords, hop, load, k, self.seed)
        if algorithm == "louvain_greedy_average":
            return allocate_louvain_greedy_average(self.graph, load, k)
        raise AllocationError(f"unknown algorithm {algorithm!r}")
