"""Graph geodesics on meshes and farthest point sampling."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .mesh_io import TriangleMesh


class DisconnectedMeshError(ValueError):
    pass


def edge_graph(mesh: TriangleMesh) -> sp.csr_matrix:
    """Symmetric sparse adjacency with Euclidean edge lengths as weights."""
    e = mesh.edges
    length = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    n = mesh.n_vertices
    g = sp.coo_matrix((length, (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()
    return (g + g.T).tocsr()


def check_connected(graph) -> None:
    n_comp, labels = csgraph.connected_components(graph, directed=False)
    if n_comp > 1:
        sizes = np.bincount(labels)
        unreachable = graph.shape[0] - sizes[labels[0]]
        raise DisconnectedMeshError(
            f"mesh has {n_comp} connected components; {unreachable} vertices "
            f"are unreachable from vertex 0")


def geodesic_from_sources(mesh: TriangleMesh, sources) -> np.ndarray:
    """Shortest-path distances along mesh edges, one row per source (Dijkstra)."""
    g = edge_graph(mesh)
    check_connected(g)
    return csgraph.dijkstra(g, directed=False, indices=np.atleast_1d(sources))


class GeodesicOracle:
    """Single-source distance rows with memoization, shared by sampling stages.

    Subclasses only need to override ``_compute``. With ``memoize=False`` rows
    are recomputed on every request, for oracles that are cheap but huge.
    """

    memoize = True

    def __init__(self, n_points: int):
        self.n_points = n_points
        self._rows: dict[int, np.ndarray] = {}

    def _compute(self, sources: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def rows(self, sources) -> np.ndarray:
        sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        if not self.memoize:
            return self._compute(sources)
        missing = [int(s) for s in dict.fromkeys(sources.tolist()) if s not in self._rows]
        if missing:
            for s, row in zip(missing, self._compute(np.array(missing))):
                row = np.array(row)
                row.setflags(write=False)
                self._rows[s] = row
        return np.stack([self._rows[int(s)] for s in sources])

    def row(self, source: int) -> np.ndarray:
        return self.rows([source])[0]

    def all_pairs(self) -> np.ndarray:
        return self.rows(np.arange(self.n_points))

    def pairwise(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        return self.rows(indices)[:, indices]


class MeshGeodesics(GeodesicOracle):
    """Dijkstra on the edge graph of a triangle mesh."""

    def __init__(self, mesh: TriangleMesh):
        super().__init__(mesh.n_vertices)
        self.graph = edge_graph(mesh)
        check_connected(self.graph)

    def _compute(self, sources):
        return csgraph.dijkstra(self.graph, directed=False, indices=sources)


class GridGeodesics(GeodesicOracle):
    """Exact edge-graph distances on a lattice from ``generate_grid_mesh``.

    The only diagonals run from ``(i, j)`` to ``(i+1, j+1)``, so a shortest path
    between vertices whose row and column offsets share a sign takes
    ``min(|di|, |dj|)`` diagonal steps and axis steps for the rest; otherwise
    it is a Manhattan path. Restricted to the 4-neighbour lattice
    (``diagonals=False``) it is always Manhattan.
    """

    memoize = False

    def __init__(self, rows, cols, spacing_x=1.0, spacing_y=1.0, diagonals=True):
        super().__init__(rows * cols)
        self.shape = (rows, cols)
        self.hx, self.hy = float(spacing_x), float(spacing_y)
        self.diagonals = diagonals

    def _distance(self, si, sj, ti, tj):
        di = ti - si
        dj = tj - sj
        adi, adj = np.abs(di), np.abs(dj)
        manhattan = adi * self.hy + adj * self.hx
        if not self.diagonals:
            return manhattan
        shortcut = np.minimum(adi, adj) * (self.hx + self.hy - np.hypot(self.hx, self.hy))
        return np.where(di * dj > 0, manhattan - shortcut, manhattan)

    def _compute(self, sources):
        rows, cols = self.shape
        si, sj = np.divmod(np.asarray(sources, dtype=np.int64), cols)
        out = np.empty((len(sources), rows, cols))
        cut = self.hx + self.hy - np.hypot(self.hx, self.hy)
        for r, (a, b) in enumerate(zip(si, sj)):
            adi = np.abs(np.arange(rows) - a).astype(float)
            adj = np.abs(np.arange(cols) - b).astype(float)
            np.add.outer(adi * self.hy, adj * self.hx, out=out[r])
            if self.diagonals:
                # only the quadrants where both offsets share a sign admit diagonal steps
                out[r, a + 1:, b + 1:] -= cut * np.minimum.outer(adi[a + 1:], adj[b + 1:])
                out[r, :a, :b] -= cut * np.minimum.outer(adi[:a], adj[:b])
        return out.reshape(len(sources), -1)

    def pairwise(self, indices) -> np.ndarray:
        i, j = np.divmod(np.asarray(indices, dtype=np.int64), self.shape[1])
        return self._distance(i[:, None], j[:, None], i[None, :], j[None, :])


@dataclass(frozen=True, eq=False)
class SamplingSet:
    """Ordered sample indices (rows of the sampling matrix) and their distance table."""

    indices: np.ndarray
    distances: np.ndarray
    source_mesh_size: int
    radii: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.indices)

    def to_csv(self, indices_path, distances_path) -> None:
        with open(indices_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["order", "vertex", "radius"])
            radii = self.radii if self.radii is not None else np.full(self.size, np.nan)
            for k, (v, r) in enumerate(zip(self.indices, radii)):
                w.writerow([k, int(v), repr(float(r))])
        np.savetxt(distances_path, self.distances, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, indices_path, distances_path, source_mesh_size) -> "SamplingSet":
        with open(indices_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        indices = np.array([int(r["vertex"]) for r in rows], dtype=np.int64)
        radii = np.array([float(r["radius"]) for r in rows])
        d = np.loadtxt(distances_path, delimiter=",", ndmin=2)
        return cls(indices, d, source_mesh_size, radii)


def farthest_point_sampling(mesh_or_oracle, q: int, seed_index: int = 0) -> SamplingSet:
    """Greedy max-min sampling under the geodesic metric.

    Each new sample maximizes the distance to the samples chosen so far; ties go
    to the smallest vertex index. The q x q distance table is assembled from the
    per-sample distance rows computed along the way.

    Parameters
    ----------
    mesh_or_oracle : TriangleMesh or GeodesicOracle
        Where distance rows come from; passing an oracle lets several
        samplings share cached Dijkstra sweeps.
    """
    oracle = mesh_or_oracle if isinstance(mesh_or_oracle, GeodesicOracle) else MeshGeodesics(mesh_or_oracle)
    n = oracle.n_points
    if not 1 <= q <= n:
        raise ValueError(f"number of samples q={q} must lie in [1, {n}]")
    if not 0 <= seed_index < n:
        raise ValueError(f"seed index {seed_index} outside [0, {n})")
    indices = np.empty(q, dtype=np.int64)
    radii = np.empty(q)
    indices[0] = seed_index
    radii[0] = np.inf
    row = oracle.row(seed_index)
    if not np.all(np.isfinite(row)):
        raise DisconnectedMeshError("some vertices are unreachable from the seed")
    mind = row.copy()
    mind[seed_index] = -1.0
    for k in range(1, q):
        nxt = int(np.argmax(mind))
        indices[k] = nxt
        radii[k] = mind[nxt]
        np.minimum(mind, oracle.row(nxt), out=mind)
        mind[indices[: k + 1]] = -1.0
    distances = oracle.pairwise(indices)
    distances = 0.5 * (distances + distances.T)
    np.fill_diagonal(distances, 0.0)
    return SamplingSet(indices, distances, n, radii)


def subsample_rows(table, sampling: SamplingSet) -> np.ndarray:
    """Apply the sampling matrix: select ``sampling.indices`` rows of an N-row table."""
    table = np.asarray(table)
    if table.shape[0] != sampling.source_mesh_size:
        raise ValueError(
            f"table has {table.shape[0]} rows but the sampling was drawn from {sampling.source_mesh_size} points")
    return table[sampling.indices]
