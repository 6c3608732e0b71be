"""Multi-layer Poisson deployments and their random geometric graphs.

Coordinates and ranges are in km, intensities in devices per km^2. Two devices
are linked when their distance is at most the range of either one (links are
reciprocal). By default the window is a torus so that every device sees a
full disk, which is what the infinite-plane degree laws assume.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from .degree import StrandId
from .errors import InvalidParameterError


@dataclass(frozen=True)
class Window:
    width: float
    height: float
    wraparound: bool = True

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidParameterError(f"window sides must be > 0, got {self.width} x {self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @classmethod
    def square(cls, side: float, wraparound: bool = True) -> Window:
        return cls(side, side, wraparound)


@dataclass(frozen=True)
class PointSet:
    layer_id: int
    points: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample_ppp(intensity: float, window: Window, seed, layer_id: int = 1) -> PointSet:
    """Homogeneous PPP in ``window``: Poisson(intensity * area) uniform points.

    ``seed`` is an int or a ``numpy.random.SeedSequence``; the stream is a
    counter-based Philox generator, so the result is fully determined by it.
    """
    if not intensity >= 0:
        raise InvalidParameterError(f"intensity must be >= 0, got {intensity}")
    rng = _rng(seed)
    n = int(rng.poisson(intensity * window.area))
    pts = rng.random((n, 2)) * np.array([window.width, window.height])
    pts.setflags(write=False)
    return PointSet(layer_id, pts)


def sample_layers(intensities: Sequence[float], window: Window, seed) -> list[PointSet]:
    """One independent PPP per layer, each on its own child stream of ``seed``."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(len(intensities))
    return [
        sample_ppp(lam, window, child, layer_id=i + 1)
        for i, (lam, child) in enumerate(zip(intensities, children))
    ]


def _separation(a: np.ndarray, b: np.ndarray, window: Window) -> np.ndarray:
    d = np.abs(a - b)
    if window.wraparound:
        d = np.minimum(d, np.array([window.width, window.height]) - d)
    return np.hypot(d[:, 0], d[:, 1])


def _brute_pairs(coords, radius, window):
    n = len(coords)
    ii, jj = np.triu_indices(n, k=1)
    d = _separation(coords[ii], coords[jj], window)
    keep = d <= radius
    return ii[keep], jj[keep], d[keep]


def close_pairs(coords: np.ndarray, radius: float, window: Window):
    """All pairs i < j at distance <= ``radius``, via uniform grid bucketing.

    Cells are at least ``radius`` wide, so only the 3x3 block around a cell
    can hold partners; a half stencil visits each unordered cell pair once.
    Returns (i, j, distance) arrays.
    """
    n = len(coords)
    empty = (np.zeros(0, int), np.zeros(0, int), np.zeros(0))
    if n < 2 or radius <= 0:
        return empty
    nx = max(1, int(window.width // radius))
    ny = max(1, int(window.height // radius))
    if window.wraparound and (nx < 3 or ny < 3):
        return _brute_pairs(coords, radius, window)
    cw, ch = window.width / nx, window.height / ny
    cx = np.minimum((coords[:, 0] // cw).astype(int), nx - 1)
    cy = np.minimum((coords[:, 1] // ch).astype(int), ny - 1)
    cell = cx * ny + cy
    order = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=nx * ny)
    starts = np.cumsum(counts) - counts

    out_i, out_j, out_d = [], [], []
    for dx, dy in ((0, 0), (1, -1), (1, 0), (1, 1), (0, 1)):
        tx, ty = cx + dx, cy + dy
        if window.wraparound:
            tx %= nx
            ty %= ny
            valid = np.ones(n, bool)
        else:
            valid = (tx >= 0) & (tx < nx) & (ty >= 0) & (ty < ny)
        src = np.nonzero(valid)[0]
        target = tx[src] * ny + ty[src]
        cnt = counts[target]
        total = int(cnt.sum())
        if total == 0:
            continue
        i = np.repeat(src, cnt)
        offset = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        j = order[np.repeat(starts[target], cnt) + offset]
        if (dx, dy) == (0, 0):
            keep = i < j
            i, j = i[keep], j[keep]
        d = _separation(coords[i], coords[j], window)
        keep = d <= radius
        i, j, d = i[keep], j[keep], d[keep]
        swap = i > j
        i[swap], j[swap] = j[swap], i[swap]
        out_i.append(i)
        out_j.append(j)
        out_d.append(d)
    if not out_i:
        return empty
    return np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_d)


@dataclass(frozen=True)
class MultiLayerGraph:
    """Realised multi-layer geometric graph.

    Nodes are numbered globally, layer by layer. ``layer`` holds the 1-based
    layer of every node, ``local`` its index inside the layer's PointSet.
    ``edges`` lists each undirected link once (i < j) with its length in
    ``edge_length``; ``edge_via`` records which endpoint's range created it
    (bit 1: within range of i, bit 2: within range of j).
    """

    window: Window
    point_sets: tuple[PointSet, ...]
    ranges: tuple[float, ...]
    coords: np.ndarray
    layer: np.ndarray
    local: np.ndarray
    node_range: np.ndarray
    edges: np.ndarray
    edge_length: np.ndarray
    edge_via: np.ndarray
    _csr: sparse.csr_matrix = field(repr=False, compare=False, default=None)

    @property
    def num_nodes(self) -> int:
        return len(self.layer)

    @property
    def num_layers(self) -> int:
        return len(self.ranges)

    def layer_size(self, m: int) -> int:
        return int(np.count_nonzero(self.layer == m))

    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 adjacency over all nodes."""
        return self._csr

    def neighbors(self, node: int) -> list[tuple[int, int]]:
        """(layer, local index) of every neighbour of global node ``node``."""
        a = self._csr
        nbrs = a.indices[a.indptr[node]:a.indptr[node + 1]]
        return [(int(self.layer[v]), int(self.local[v])) for v in nbrs]


def _csr_from_edges(n: int, edges: np.ndarray) -> sparse.csr_matrix:
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(len(rows), dtype=np.int32)
    a = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    a.sort_indices()
    return a


def build_graph(point_sets: Sequence[PointSet], ranges: Sequence[float], window: Window) -> MultiLayerGraph:
    """Link every pair whose distance is within the range of either endpoint."""
    if len(point_sets) != len(ranges):
        raise InvalidParameterError(
            f"got {len(point_sets)} point sets but {len(ranges)} ranges"
        )
    if any(not r >= 0 for r in ranges):
        raise InvalidParameterError(f"ranges must be >= 0, got {list(ranges)}")
    sizes = [len(ps) for ps in point_sets]
    n = sum(sizes)
    coords = (
        np.concatenate([np.asarray(ps.points, float).reshape(-1, 2) for ps in point_sets])
        if n else np.zeros((0, 2))
    )
    layer = np.repeat(np.arange(1, len(point_sets) + 1), sizes)
    local = np.concatenate([np.arange(s) for s in sizes]) if n else np.zeros(0, int)
    node_range = np.repeat(np.asarray(ranges, float), sizes)

    reach = max(ranges) if len(ranges) else 0.0
    i, j, d = close_pairs(coords, reach, window)
    via = (d <= node_range[i]).astype(np.int8) | ((d <= node_range[j]).astype(np.int8) << 1)
    keep = via > 0
    edges = np.column_stack([i[keep], j[keep]]).astype(np.int64) if n else np.zeros((0, 2), np.int64)
    d, via = d[keep], via[keep]
    order = np.lexsort((edges[:, 1], edges[:, 0])) if len(edges) else np.zeros(0, int)
    edges, d, via = edges[order], d[order], via[order]
    for arr in (coords, layer, local, node_range, edges, d, via):
        arr.setflags(write=False)
    return MultiLayerGraph(
        window,
        tuple(point_sets),
        tuple(float(r) for r in ranges),
        coords,
        layer,
        local,
        node_range,
        edges,
        d,
        via,
        _csr_from_edges(n, edges),
    )


def sample_graph(intensities: Sequence[float], ranges: Sequence[float], window: Window, seed) -> MultiLayerGraph:
    return build_graph(sample_layers(intensities, window, seed), ranges, window)


def strand_degrees(graph: MultiLayerGraph, strand: StrandId) -> np.ndarray:
    """Per-node degree for the strand's source nodes.

    intra m: layer-m nodes, same-layer neighbours within r_m.
    inter (m, n): layer-m nodes, neighbours of layers m or n within r_m.
    combined: every node, all neighbours within the node's own range.
    """
    strand.check_layers(graph.num_layers)
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    la, lb = graph.layer[a], graph.layer[b]
    d = graph.edge_length
    n = graph.num_nodes
    if strand.kind == "combined":
        deg = np.bincount(a[d <= graph.node_range[a]], minlength=n)
        deg += np.bincount(b[d <= graph.node_range[b]], minlength=n)
        return deg
    m = strand.m
    r = graph.ranges[m - 1]
    peers = {m} if strand.kind == "intra" else {m, strand.n}
    close = d <= r
    a_src = close & (la == m) & np.isin(lb, list(peers))
    b_src = close & (lb == m) & np.isin(la, list(peers))
    deg = np.bincount(a[a_src], minlength=n) + np.bincount(b[b_src], minlength=n)
    return deg[graph.layer == m]


def empirical_degree_histogram(graph: MultiLayerGraph, strand: StrandId) -> np.ndarray:
    """Counts of source nodes by degree k (index k). All zero when no source nodes exist."""
    deg = strand_degrees(graph, strand)
    if deg.size == 0:
        return np.zeros(1, dtype=np.int64)
    return np.bincount(deg).astype(np.int64)


def total_variation(histogram: np.ndarray, pmf_values: np.ndarray) -> float:
    """TV distance between a count histogram (normalised) and a pmf table.

    Mass of the pmf beyond its table is counted as unmatched.
    """
    counts = np.asarray(histogram, float)
    total = counts.sum()
    if total == 0:
        raise InvalidParameterError("empty histogram")
    p = counts / total
    q = np.asarray(pmf_values, float)
    size = max(p.size, q.size)
    p = np.pad(p, (0, size - p.size))
    q = np.pad(q, (0, size - q.size))
    return 0.5 * (float(np.abs(p - q).sum()) + max(0.0, 1.0 - float(q.sum())))


def write_points_csv(point_sets: Sequence[PointSet], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer", "x_km", "y_km"])
        for ps in point_sets:
            for x, y in ps.points:
                w.writerow([ps.layer_id, f"{x:.9f}", f"{y:.9f}"])


def write_edges_csv(graph: MultiLayerGraph, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer_a", "idx_a", "layer_b", "idx_b"])
        for i, j in graph.edges:
            w.writerow([graph.layer[i], graph.local[i], graph.layer[j], graph.local[j]])


def side_for_area(area_km2: float) -> float:
    return math.sqrt(area_km2)
