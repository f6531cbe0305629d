"""Base-station deployment parsing and backhaul graph construction.

Stations closer than a link threshold are joined directly; the remaining
connected components are then stitched together, always joining the largest
and second-largest component through their closest pair of stations, until a
single connected graph remains.
"""

from __future__ import annotations

import io
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class DeploymentParseError(ValueError):
    """Raised when a deployment file line cannot be parsed."""


class DisconnectedGraphError(ValueError):
    """Raised when an operation requires a connected graph."""


@dataclass(frozen=True)
class BaseStation:
    id: int
    x: float
    y: float


Edge = tuple[int, int]


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Immutable station graph with its all-pairs hop matrix."""

    stations: tuple[BaseStation, ...]
    edges: frozenset[Edge]
    hop_dist: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.stations)

    @property
    def coords(self) -> np.ndarray:
        return station_coords(self.stations)

    def adjacency(self) -> list[list[int]]:
        return adjacency_lists(self.n, self.edges)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)


def station_coords(stations: Sequence[BaseStation]) -> np.ndarray:
    return np.array([(s.x, s.y) for s in stations], dtype=float).reshape(-1, 2)


def adjacency_lists(n: int, edges: Iterable[Edge]) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    for nbrs in adj:
        nbrs.sort()
    return adj


def _text_lines(stream) -> Iterable[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    for line in stream:
        if isinstance(line, (bytes, bytearray)):
            line = line.decode("utf-8")
        yield line


def parse_bs_deployment(stream, columns: tuple[int, int] = (0, 1)) -> list[BaseStation]:
    """Read one station per non-empty, non-comment line.

    ``columns`` gives the whitespace-separated field indices holding x and y.
    Ids are assigned 0..B-1 in file order.
    """
    xcol, ycol = columns
    need = max(xcol, ycol) + 1
    stations: list[BaseStation] = []
    for lineno, line in enumerate(_text_lines(stream), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.split()
        if len(fields) < need:
            raise DeploymentParseError(
                f"line {lineno}: expected at least {need} fields, got {len(fields)}"
            )
        try:
            x = float(fields[xcol])
            y = float(fields[ycol])
        except ValueError as exc:
            raise DeploymentParseError(f"line {lineno}: {exc}") from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise DeploymentParseError(f"line {lineno}: non-finite coordinate")
        stations.append(BaseStation(len(stations), x, y))
    if not stations:
        raise DeploymentParseError("no base stations")
    return stations


def load_bs_deployment(path, columns: tuple[int, int] = (0, 1)) -> list[BaseStation]:
    with open(path, "rb") as fh:
        return parse_bs_deployment(fh, columns)


def _components(n: int, edges: Iterable[Edge]) -> np.ndarray:
    edges = list(edges)
    if edges:
        rows, cols = np.array(edges).T
    else:
        rows = cols = np.empty(0, dtype=int)
    mat = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(mat, directed=False)
    return labels


def pairwise_distances(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def build_proximity_edges(
    stations: Sequence[BaseStation], threshold: float, strict: bool = True
) -> tuple[set[Edge], int]:
    """Link every pair closer than ``threshold`` meters.

    With ``strict=False`` pairs at exactly the threshold are linked too.
    Returns the edge set (pairs with u < v) and the resulting number of
    connected components.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    dist = pairwise_distances(station_coords(stations))
    close = dist < threshold if strict else dist <= threshold
    iu, ju = np.nonzero(np.triu(close, k=1))
    edges = {(int(i), int(j)) for i, j in zip(iu, ju)}
    n_comp = len(np.unique(_components(len(stations), edges)))
    return edges, n_comp


def connect_components(stations: Sequence[BaseStation], edges: Iterable[Edge]) -> NetworkGraph:
    """Merge components until the graph is connected and build the hop matrix."""
    stations = tuple(stations)
    n = len(stations)
    if n == 0:
        raise ValueError("no base stations")
    edges = {(min(u, v), max(u, v)) for u, v in edges}
    dist = pairwise_distances(station_coords(stations))
    while True:
        labels = _components(n, edges)
        groups: dict[int, list[int]] = {}
        for node, lab in enumerate(labels):
            groups.setdefault(int(lab), []).append(node)
        if len(groups) == 1:
            break
        # largest first; equal sizes ranked by lowest member id
        ranked = sorted(groups.values(), key=lambda g: (-len(g), g[0]))
        big, second = ranked[0], ranked[1]
        sub = dist[np.ix_(big, second)]
        # argmin over row-major order of ascending ids gives the
        # lexicographically smallest (u, v) among exact ties
        i, j = np.unravel_index(np.argmin(sub), sub.shape)
        u, v = big[i], second[j]
        edges.add((min(u, v), max(u, v)))
    frozen = frozenset(edges)
    hop = all_pairs_hop_distances(n, frozen)
    hop.setflags(write=False)
    return NetworkGraph(stations, frozen, hop)


def build_network(
    stations: Sequence[BaseStation], threshold: float = 500.0, strict: bool = True
) -> NetworkGraph:
    edges, _ = build_proximity_edges(stations, threshold, strict)
    return connect_components(stations, edges)


def all_pairs_hop_distances(n: int, edges: Iterable[Edge]) -> np.ndarray:
    """Unweighted shortest-path lengths via one BFS per source node."""
    adj = adjacency_lists(n, edges)
    hop = np.full((n, n), -1, dtype=np.int32)
    for src in range(n):
        row = hop[src]
        row[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            d = row[u] + 1
            for v in adj[u]:
                if row[v] < 0:
                    row[v] = d
                    queue.append(v)
        if (row < 0).any():
            raise DisconnectedGraphError(
                f"node {int(np.argmax(row < 0))} unreachable from node {src}"
            )
    return hop


def hop_histogram(hop: np.ndarray) -> dict[int, int]:
    """Count unordered station pairs (i < j) at each hop distance."""
    iu = np.triu_indices(hop.shape[0], k=1)
    return dict(sorted(Counter(hop[iu].tolist()).items()))


def mean_pairwise_hops(hop: np.ndarray) -> float:
    n = hop.shape[0]
    if n < 2:
        return 0.0
    return float(hop.sum()) / (n * (n - 1))


def write_edge_list(graph: NetworkGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in graph.sorted_edges():
            fh.write(f"{u} {v}\n")
