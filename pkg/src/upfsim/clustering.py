"""Planar K-means and Louvain community detection on the station graph."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .topology import DisconnectedGraphError, Edge, NetworkGraph, adjacency_lists

KMEANS_MAX_ITER = 100


@dataclass
class Clustering:
    """Cluster assignment keyed by station id.

    ``centers`` is only set for K-means; ``inertia_history`` records the
    within-cluster sum of squares after seeding and after every Lloyd step.
    """

    assignments: dict[int, int]
    centers: np.ndarray | None = None
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(set(self.assignments.values()))

    def communities(self) -> list[list[int]]:
        """Members of each cluster, ordered by cluster index."""
        groups: dict[int, list[int]] = {}
        for node in sorted(self.assignments):
            groups.setdefault(self.assignments[node], []).append(node)
        return [groups[c] for c in sorted(groups)]


def _relabel(groups: Iterable[Iterable[int]]) -> dict[int, int]:
    """Assign cluster indices in order of each group's lowest member."""
    ordered = sorted((sorted(g) for g in groups if g), key=lambda g: g[0])
    return {node: ci for ci, g in enumerate(ordered) for node in g}


# -- K-means -----------------------------------------------------------------

def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return (diff**2).sum(axis=-1)


def kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen center
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dists(points, points[[idx]])[:, 0])
    return points[chosen].astype(float)


def kmeans(
    points,
    k: int,
    seed: int = 0,
    *,
    ids: Sequence[int] | None = None,
    max_iter: int = KMEANS_MAX_ITER,
) -> Clustering:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when no assignment changes or after ``max_iter`` iterations. A
    cluster that goes empty takes over the point farthest from its own
    center.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be between 1 and the number of points ({n})")
    ids = list(range(n)) if ids is None else [int(i) for i in ids]
    rng = np.random.default_rng(seed)

    centers = kmeans_pp_init(points, k, rng)
    labels = np.argmin(_sq_dists(points, centers), axis=1)
    history = [float(_sq_dists(points, centers)[np.arange(n), labels].sum())]
    for _ in range(max_iter):
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = points[members].mean(axis=0)
        d2 = _sq_dists(points, centers)
        new_labels = np.argmin(d2, axis=1)
        for c in range(k):
            if not (new_labels == c).any():
                own = d2[np.arange(n), new_labels]
                sizes = np.bincount(new_labels, minlength=k)
                own[sizes[new_labels] < 2] = -1.0
                far = int(np.argmax(own))
                new_labels[far] = c
                centers[c] = points[far]
                d2[:, c] = _sq_dists(points, centers[[c]])[:, 0]
        history.append(float(d2[np.arange(n), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    # final centers are the means of the final assignment
    for c in range(k):
        centers[c] = points[labels == c].mean(axis=0)
    history.append(float(_sq_dists(points, centers)[np.arange(n), labels].sum()))

    return Clustering(
        assignments={ids[i]: int(labels[i]) for i in range(n)},
        centers=centers,
        inertia_history=history,
    )


def nearest_stations_to_centers(centers, station_xy) -> list[int]:
    """Closest not-yet-chosen station to each center, in center order."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    station_xy = np.asarray(station_xy, dtype=float).reshape(-1, 2)
    if len(centers) == 0:
        raise ValueError("no centers")
    if len(centers) > len(station_xy):
        raise ValueError("more centers than stations")
    d2 = _sq_dists(centers, station_xy)
    taken = np.zeros(len(station_xy), dtype=bool)
    picked = []
    for row in d2:
        row = np.where(taken, np.inf, row)
        idx = int(np.argmin(row))
        taken[idx] = True
        picked.append(idx)
    return picked


# -- modularity / Louvain ----------------------------------------------------

def is_connected(n: int, edges: Iterable[Edge]) -> bool:
    if n == 0:
        return False
    adj = adjacency_lists(n, edges)
    seen = {0}
    queue = deque([0])
    while queue:
        for v in adj[queue.popleft()]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == n


def modularity(n: int, edges: Iterable[Edge], assignments: dict[int, int]) -> float:
    """Newman modularity of a partition of an unweighted graph."""
    edges = list(edges)
    m = len(edges)
    if m == 0:
        return 0.0
    deg = np.zeros(n)
    internal: dict[int, int] = {}
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
        if assignments[u] == assignments[v]:
            internal[assignments[u]] = internal.get(assignments[u], 0) + 1
    tot: dict[int, float] = {}
    for node in range(n):
        tot[assignments[node]] = tot.get(assignments[node], 0.0) + deg[node]
    return sum(internal.get(c, 0) / m - (t / (2.0 * m)) ** 2 for c, t in tot.items())


def _one_level(adj: list[dict[int, float]], self_loops: list[float], m2: float) -> list[int]:
    """Local moving phase on a weighted graph.

    ``adj[i]`` maps neighbour -> edge weight (no self entries), ``self_loops[i]``
    is the weight of i's self loop counted once, ``m2`` is twice the total
    edge weight. Nodes are swept in ascending order until no move improves
    modularity.
    """
    n = len(adj)
    degree = [sum(adj[i].values()) + 2.0 * self_loops[i] for i in range(n)]
    comm = list(range(n))
    tot = degree[:]
    improved = True
    while improved:
        improved = False
        for i in range(n):
            ci = comm[i]
            links: dict[int, float] = {}
            for j, w in adj[i].items():
                links[comm[j]] = links.get(comm[j], 0.0) + w
            ki = degree[i]
            tot[ci] -= ki
            # gain of inserting i into c, up to a constant shared by all c
            best_c = ci
            best_gain = links.get(ci, 0.0) - tot[ci] * ki / m2
            for c in sorted(links):
                gain = links[c] - tot[c] * ki / m2
                if gain > best_gain + 1e-12:
                    best_c, best_gain = c, gain
            tot[best_c] += ki
            if best_c != ci:
                comm[i] = best_c
                improved = True
    return comm


def _louvain_local(n: int, edges: Sequence[Edge]) -> list[list[int]]:
    """Louvain on nodes 0..n-1; returns communities as sorted node lists."""
    if not edges:
        return [[i] for i in range(n)]
    adj: list[dict[int, float]] = [dict() for _ in range(n)]
    for u, v in edges:
        adj[u][v] = adj[u].get(v, 0.0) + 1.0
        adj[v][u] = adj[v].get(u, 0.0) + 1.0
    self_loops = [0.0] * n
    m2 = 2.0 * len(edges)
    members = [[i] for i in range(n)]

    while True:
        comm = _one_level(adj, self_loops, m2)
        # first appearance in ascending node order
        labels = list(dict.fromkeys(comm))
        if len(labels) == len(adj):
            break
        remap = {c: i for i, c in enumerate(labels)}
        new_members: list[list[int]] = [[] for _ in labels]
        new_adj: list[dict[int, float]] = [dict() for _ in labels]
        new_loops = [0.0] * len(labels)
        for i, c in enumerate(comm):
            ci = remap[c]
            new_members[ci].extend(members[i])
            new_loops[ci] += self_loops[i]
            for j, w in adj[i].items():
                cj = remap[comm[j]]
                if cj == ci:
                    # each internal edge is seen from both endpoints
                    new_loops[ci] += w / 2.0
                else:
                    new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
        adj, self_loops, members = new_adj, new_loops, new_members
    return [sorted(g) for g in members]


def _split_disconnected(groups: list[list[int]], adj: list[list[int]]) -> list[list[int]]:
    out = []
    for g in groups:
        left = set(g)
        while left:
            start = min(left)
            part = {start}
            queue = deque([start])
            while queue:
                for v in adj[queue.popleft()]:
                    if v in left and v not in part:
                        part.add(v)
                        queue.append(v)
            left -= part
            out.append(sorted(part))
    return out


def _induced(nodes: Sequence[int], edges: Iterable[Edge]) -> tuple[dict[int, int], list[Edge]]:
    local = {node: i for i, node in enumerate(sorted(nodes))}
    sub = [(local[u], local[v]) for u, v in edges if u in local and v in local]
    return local, sub


def louvain_groups(nodes: Sequence[int], edges: Iterable[Edge]) -> list[list[int]]:
    """Louvain communities of the subgraph induced by ``nodes``.

    Communities that come out internally disconnected are split into their
    connected pieces.
    """
    local, sub = _induced(nodes, edges)
    back = sorted(local)
    groups = _louvain_local(len(back), sub)
    groups = _split_disconnected(groups, adjacency_lists(len(back), sub))
    return sorted(([back[i] for i in g] for g in groups), key=lambda g: g[0])


def louvain_communities(graph: NetworkGraph) -> Clustering:
    if not is_connected(graph.n, graph.edges):
        raise DisconnectedGraphError("louvain requires a connected graph")
    groups = louvain_groups(range(graph.n), graph.sorted_edges())
    return Clustering(assignments=_relabel(groups))


# -- forcing exactly k communities -------------------------------------------

def _betweenness_split(nodes: list[int], edges: list[Edge]) -> list[list[int]]:
    """Remove highest-betweenness edges until the node set falls apart."""
    g = nx.Graph()
    g.add_nodes_from(nodes)
    g.add_edges_from(edges)
    while nx.is_connected(g):
        eb = nx.edge_betweenness_centrality(g)
        top = max(eb.values())
        u, v = min(tuple(sorted(e)) for e, val in eb.items() if val == top)
        g.remove_edge(u, v)
    return [sorted(c) for c in nx.connected_components(g)]


def adjust_to_k(clustering: Clustering, graph: NetworkGraph, k: int) -> Clustering:
    """Split or merge communities until exactly ``k`` remain.

    Splitting re-runs Louvain on the largest community's induced subgraph,
    falling back to edge-betweenness cuts when Louvain keeps it whole.
    Merging joins the pair of communities sharing the most edges, preferring
    the smallest combined size and then the lowest member id.
    """
    n = graph.n
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be between 1 and the number of nodes ({n})")
    groups = [list(g) for g in clustering.communities()]
    if len(groups) == k:
        return Clustering(assignments=_relabel(groups))
    edges = graph.sorted_edges()

    while len(groups) < k:
        target = min(groups, key=lambda g: (-len(g), g[0]))
        groups.remove(target)
        tset = set(target)
        sub_edges = [(u, v) for u, v in edges if u in tset and v in tset]
        parts = louvain_groups(target, sub_edges)
        if len(parts) < 2:
            parts = _betweenness_split(target, sub_edges)
        groups.extend(parts)

    while len(groups) > k:
        label = {node: ci for ci, g in enumerate(groups) for node in g}
        between: dict[tuple[int, int], int] = {}
        for u, v in edges:
            a, b = label[u], label[v]
            if a != b:
                key = (min(a, b), max(a, b))
                between[key] = between.get(key, 0) + 1

        def rank(pair):
            a, b = pair
            ga, gb = groups[a], groups[b]
            lo, hi = sorted((ga[0], gb[0]))
            return (-between[pair], len(ga) + len(gb), lo, hi)

        a, b = min(between, key=rank)
        merged = sorted(groups[a] + groups[b])
        groups = [g for i, g in enumerate(groups) if i not in (a, b)] + [merged]
        groups.sort(key=lambda g: g[0])

    return Clustering(assignments=_relabel(groups))
