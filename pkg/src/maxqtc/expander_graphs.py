"""Random regular and biregular base graphs and their second eigenvalues."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

MAX_RESTARTS = 10**4
DENSE_EIG_LIMIT = 2000
EIG_TOL = 1e-8


class GenerationFailed(RuntimeError):
    """Raised when random graph generation exhausts its restart budget."""


class DisconnectedGraph(ValueError):
    """Raised when a spectral quantity is requested for a disconnected graph."""


@dataclass(frozen=True, eq=False)
class RegularGraph:
    """Simple ``d``-regular graph; ``neighbors[v]`` is the sorted neighbor row of ``v``."""

    n: int
    d: int
    neighbors: np.ndarray
    _lambda2: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        nbrs = np.asarray(self.neighbors, dtype=np.int64)
        if nbrs.shape != (self.n, self.d):
            raise ValueError(f"neighbor array shape {nbrs.shape} != ({self.n}, {self.d})")
        nbrs = np.sort(nbrs, axis=1)
        if self.d > 0:
            if (nbrs == np.arange(self.n)[:, None]).any():
                raise ValueError("self-loop in regular graph")
            if (np.diff(nbrs, axis=1) == 0).any():
                raise ValueError("multi-edge in regular graph")
            A = _adjacency_from_neighbors(nbrs, self.n, self.n)
            if (A != A.T).nnz:
                raise ValueError("neighbor lists are not symmetric")
        nbrs.setflags(write=False)
        object.__setattr__(self, "neighbors", nbrs)

    @classmethod
    def from_edges(cls, n: int, d: int, edges) -> "RegularGraph":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        adj = [[] for _ in range(n)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        bad = [v for v in range(n) if len(adj[v]) != d]
        if bad:
            raise ValueError(f"vertex {bad[0]} has degree {len(adj[bad[0]])}, expected {d}")
        return cls(n, d, np.array(adj, dtype=np.int64).reshape(n, d))

    def edges(self) -> np.ndarray:
        """Undirected edges ``(u, v)`` with ``u < v``, lexicographically sorted."""
        u = np.repeat(np.arange(self.n), self.d)
        v = self.neighbors.ravel()
        keep = u < v
        return np.column_stack([u[keep], v[keep]])

    def adjacency(self) -> sp.csr_matrix:
        return _adjacency_from_neighbors(self.neighbors, self.n, self.n)

    def is_connected(self) -> bool:
        ncomp, _ = csgraph.connected_components(self.adjacency(), directed=False)
        return ncomp == 1

    def is_bipartite(self) -> bool:
        return _is_bipartite(self.neighbors, self.n)

    @property
    def lambda2(self) -> float:
        if not self._lambda2:
            self._lambda2.append(second_eigenvalue(self))
        return self._lambda2[0]


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Simple ``(d1, d2)``-biregular bipartite graph.

    ``left_neighbors[u]`` lists the ``d1`` right vertices adjacent to left vertex ``u``.
    The biadjacency ``B`` is ``n2 x n1``.
    """

    n1: int
    n2: int
    d1: int
    d2: int
    left_neighbors: np.ndarray
    _lambda2: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.n1 * self.d1 != self.n2 * self.d2:
            raise ValueError(
                f"n1*d1 = {self.n1 * self.d1} != n2*d2 = {self.n2 * self.d2}"
            )
        nbrs = np.sort(np.asarray(self.left_neighbors, dtype=np.int64), axis=1)
        if nbrs.shape != (self.n1, self.d1):
            raise ValueError(f"neighbor array shape {nbrs.shape} != ({self.n1}, {self.d1})")
        if nbrs.size:
            if nbrs.min() < 0 or nbrs.max() >= self.n2:
                raise ValueError("right vertex index out of range")
            if (np.diff(nbrs, axis=1) == 0).any():
                raise ValueError("multi-edge in bipartite graph")
        right_deg = np.bincount(nbrs.ravel(), minlength=self.n2)
        if (right_deg != self.d2).any():
            raise ValueError(f"right degrees are not all {self.d2}")
        nbrs.setflags(write=False)
        object.__setattr__(self, "left_neighbors", nbrs)

    @classmethod
    def from_edges(cls, n1, n2, d1, d2, edges) -> "BipartiteGraph":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        adj = [[] for _ in range(n1)]
        for u, v in edges:
            adj[u].append(v)
        bad = [u for u in range(n1) if len(adj[u]) != d1]
        if bad:
            raise ValueError(f"left vertex {bad[0]} has degree {len(adj[bad[0]])}, expected {d1}")
        return cls(n1, n2, d1, d2, np.array(adj, dtype=np.int64).reshape(n1, d1))

    def edges(self) -> np.ndarray:
        u = np.repeat(np.arange(self.n1), self.d1)
        return np.column_stack([u, self.left_neighbors.ravel()])

    def biadjacency(self) -> sp.csr_matrix:
        """``n2 x n1`` zero/one matrix."""
        return _adjacency_from_neighbors(self.left_neighbors, self.n1, self.n2).T.tocsr()

    def is_connected(self) -> bool:
        B = self.biadjacency()
        A = sp.bmat([[None, B.T], [B, None]], format="csr")
        ncomp, _ = csgraph.connected_components(A, directed=False)
        return ncomp == 1

    @property
    def lambda2(self) -> float:
        if not self._lambda2:
            self._lambda2.append(second_singular(self))
        return self._lambda2[0]


def _adjacency_from_neighbors(nbrs, n_rows, n_cols) -> sp.csr_matrix:
    rows = np.repeat(np.arange(n_rows), nbrs.shape[1])
    data = np.ones(rows.size, dtype=np.int64)
    return sp.csr_matrix((data, (rows, nbrs.ravel())), shape=(n_rows, n_cols))


def _is_bipartite(nbrs, n) -> bool:
    color = np.full(n, -1)
    for s in range(n):
        if color[s] >= 0:
            continue
        color[s] = 0
        stack = [s]
        while stack:
            u = stack.pop()
            for v in nbrs[u]:
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    stack.append(v)
                elif color[v] == color[u]:
                    return False
    return True


def _pair_stubs(left, right, rng, max_rounds):
    """Pair two stub lists into a simple edge set.

    Stubs whose pairing would create a loop or repeated edge are re-shuffled
    and re-paired; returns ``None`` when no suitable pair remains.
    ``right is None`` means a single stub multiset paired with itself.
    """
    edges = set()
    single = right is None
    for _ in range(max_rounds):
        if single:
            stubs = rng.permutation(left)
            a, b = stubs[0::2], stubs[1::2]
        else:
            a = left
            b = rng.permutation(right)
        bad_a, bad_b = [], []
        for u, v in zip(a.tolist(), b.tolist()):
            key = (min(u, v), max(u, v)) if single else (u, v)
            if (single and u == v) or key in edges:
                bad_a.append(u)
                bad_b.append(v)
            else:
                edges.add(key)
        if not bad_a:
            return edges
        if single:
            left = np.array(bad_a + bad_b)
            if not _has_candidate(set(left.tolist()), set(left.tolist()), edges, True):
                return None
        else:
            left, right = np.array(bad_a), np.array(bad_b)
            if not _has_candidate(set(bad_a), set(bad_b), edges, False):
                return None
    return None


def _has_candidate(us, vs, edges, single) -> bool:
    for u in us:
        for v in vs:
            if single:
                if u != v and (min(u, v), max(u, v)) not in edges:
                    return True
            elif (u, v) not in edges:
                return True
    return False


def random_regular(n: int, d: int, seed: int = 0) -> RegularGraph:
    """Connected, non-bipartite simple ``d``-regular graph on ``n`` vertices.

    Built from the pairing model: stubs are matched at random, colliding pairs
    are re-matched, and the whole attempt restarts if it gets stuck or the
    result is disconnected or bipartite (so that ``lambda2 < d``).
    Deterministic for a fixed ``seed``.
    """
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if not 1 <= d < n:
        raise ValueError(f"need 1 <= d < n, got d={d}, n={n}")
    if (n * d) % 2:
        raise ValueError(f"n*d must be even, got n={n}, d={d}")
    if d == n - 1:
        nbrs = np.array([[u for u in range(n) if u != v] for v in range(n)])
        return RegularGraph(n, d, nbrs)
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(MAX_RESTARTS):
        edges = _pair_stubs(stubs, None, rng, max_rounds=10 * d + 10)
        if edges is None:
            continue
        adj = [[] for _ in range(n)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        g = RegularGraph(n, d, np.array(adj, dtype=np.int64))
        if g.is_connected() and not g.is_bipartite():
            return g
    raise GenerationFailed(
        f"no connected non-bipartite simple {d}-regular graph on {n} vertices "
        f"after {MAX_RESTARTS} restarts"
    )


def random_biregular(n1: int, n2: int, d1: int, d2: int, seed: int = 0) -> BipartiteGraph:
    """Connected simple ``(d1, d2)``-biregular graph between sides of size ``n1``, ``n2``."""
    if min(n1, n2, d1, d2) < 1:
        raise ValueError("sizes and degrees must be positive")
    if n1 * d1 != n2 * d2:
        raise ValueError(f"need n1*d1 == n2*d2, got {n1 * d1} != {n2 * d2}")
    if d1 > n2 or d2 > n1:
        raise ValueError(f"degrees too large: d1={d1} > n2={n2} or d2={d2} > n1={n1}")
    if d1 == n2:
        nbrs = np.tile(np.arange(n2), (n1, 1))
        return BipartiteGraph(n1, n2, d1, d2, nbrs)
    rng = np.random.default_rng(seed)
    left = np.repeat(np.arange(n1), d1)
    right = np.repeat(np.arange(n2), d2)
    for _ in range(MAX_RESTARTS):
        edges = _pair_stubs(left, right, rng, max_rounds=10 * max(d1, d2) + 10)
        if edges is None:
            continue
        adj = [[] for _ in range(n1)]
        for u, v in edges:
            adj[u].append(v)
        g = BipartiteGraph(n1, n2, d1, d2, np.array(adj, dtype=np.int64))
        if g.is_connected():
            return g
    raise GenerationFailed(
        f"no connected simple ({d1},{d2})-biregular graph on {n1}+{n2} vertices "
        f"after {MAX_RESTARTS} restarts"
    )


def second_eigenvalue(G: RegularGraph) -> float:
    """``max(|lambda_2|, |lambda_n|)`` of the adjacency matrix."""
    if not G.is_connected():
        raise DisconnectedGraph("second eigenvalue requested for a disconnected graph")
    A = G.adjacency().astype(np.float64)
    if G.n <= DENSE_EIG_LIMIT:
        ev = np.linalg.eigvalsh(A.toarray())
        return float(max(abs(ev[-2]), abs(ev[0])))
    # deflate the all-ones top eigenvector and take the largest-magnitude eigenvalue
    n, d = G.n, G.d
    op = spla.LinearOperator(
        (n, n), matvec=lambda x: A @ x - (d / n) * x.sum(), dtype=np.float64
    )
    val = spla.eigsh(op, k=1, which="LM", tol=EIG_TOL, return_eigenvectors=False)
    return float(abs(val[0]))


def second_singular(G: BipartiteGraph) -> float:
    """Second largest singular value of the biadjacency matrix."""
    if not G.is_connected():
        raise DisconnectedGraph("second singular value requested for a disconnected graph")
    B = G.biadjacency().astype(np.float64)
    top = math.sqrt(G.d1 * G.d2)
    if min(G.n1, G.n2) <= DENSE_EIG_LIMIT:
        sv = np.linalg.svd(B.toarray(), compute_uv=False)
        s1 = sv[0]
        s2 = sv[1] if sv.size > 1 else 0.0
    else:
        s = spla.svds(B, k=2, tol=EIG_TOL, return_singular_vectors=False)
        s1, s2 = max(s), min(s)
    if abs(s1 - top) > 1e-8 * max(1.0, top):
        raise ValueError(f"top singular value {s1} != sqrt(d1*d2) = {top}")
    # rank-one biadjacency (complete bipartite) has an exact zero second value
    return float(s2) if s2 > 1e-10 * top else 0.0


def ramanujan_threshold(d: int) -> float:
    return 2.0 * math.sqrt(d - 1)


def ramanujan_fraction(n: int, d: int, seeds, slack: float = 0.2) -> float:
    """Fraction of random ``d``-regular graphs with ``lambda2 <= 2 sqrt(d-1) + slack``.

    Emits a warning (never an error) when it drops below 0.9.
    """
    seeds = list(seeds)
    hits = sum(
        random_regular(n, d, s).lambda2 <= ramanujan_threshold(d) + slack for s in seeds
    )
    frac = hits / len(seeds)
    if frac < 0.9:
        warnings.warn(
            f"only {frac:.2f} of random {d}-regular graphs on {n} vertices are "
            f"within {slack} of the Ramanujan bound",
            stacklevel=2,
        )
    return frac
