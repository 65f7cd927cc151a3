"""Walk-based and chain-based t-partite hypergraphs used as sampling masks.

Hyperedges are ordered t-tuples ``(v_1, ..., v_t)`` with ``v_i`` in part ``i``.
A regular hypergraph takes every walk of length ``t-1`` in a ``d``-regular base
graph; a quasi-regular one takes every path through a chain of biregular
bipartite graphs. Crossing counts ``e(W_1, ..., W_t)`` are computed with an
integer dynamic program over walks, and with brute-force enumeration as an
independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .expander_graphs import BipartiteGraph, RegularGraph

MATERIALIZE_LIMIT = 10**7
MICRO_TENSOR_LIMIT = 10**6


@dataclass(frozen=True)
class HyperedgeSet:
    """Explicit list of 0-based t-tuples within ``dims`` (the sampling mask)."""

    dims: tuple
    edges: np.ndarray

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, len(dims))
        if edges.size:
            if edges.min() < 0 or (edges.max(axis=0) >= np.asarray(dims)).any():
                raise IndexError("hyperedge index out of range")
            flat = np.ravel_multi_index(edges.T, dims)
            if np.unique(flat).size != flat.size:
                raise ValueError("duplicate hyperedges")
        edges.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "edges", edges)

    @property
    def t(self) -> int:
        return len(self.dims)

    def __len__(self):
        return self.edges.shape[0]

    def mask(self) -> np.ndarray:
        """Dense boolean mask (small instances only)."""
        M = np.zeros(self.dims, dtype=bool)
        M[tuple(self.edges.T)] = True
        return M


class _ChainHypergraph:
    """Shared machinery: ``links[i]`` is an ``(n_i, k_i)`` array of out-neighbors
    from part ``i`` into part ``i + 1``."""

    links: tuple
    dims: tuple

    @property
    def t(self) -> int:
        return len(self.dims)

    @property
    def edge_count(self) -> int:
        count = self.dims[0]
        for nb in self.links:
            count *= nb.shape[1]
        return count

    def iter_edge_blocks(self, block_vertices: int = 1024) -> Iterator[np.ndarray]:
        """Yield hyperedges in lexicographic order, grouped by start vertex."""
        for start in range(0, self.dims[0], block_vertices):
            stop = min(start + block_vertices, self.dims[0])
            walks = np.arange(start, stop, dtype=np.int64)[:, None]
            for nb in self.links:
                nxt = nb[walks[:, -1]]
                k = nb.shape[1]
                walks = np.column_stack([np.repeat(walks, k, axis=0), nxt.ravel()])
            yield walks

    def edges(self) -> np.ndarray:
        if self.edge_count > MATERIALIZE_LIMIT:
            raise MemoryError(
                f"{self.edge_count} hyperedges exceed the materialization limit "
                f"{MATERIALIZE_LIMIT}; use iter_edge_blocks"
            )
        return np.concatenate(list(self.iter_edge_blocks()), axis=0)

    def hyperedge_set(self) -> HyperedgeSet:
        return HyperedgeSet(self.dims, self.edges())

    def transfer_matrices(self) -> list:
        """Sparse integer ``n_{i+1} x n_i`` matrices pushing walk counts forward."""
        mats = []
        for i, nb in enumerate(self.links):
            n_from, n_to = self.dims[i], self.dims[i + 1]
            rows = nb.ravel()
            cols = np.repeat(np.arange(n_from), nb.shape[1])
            mats.append(
                sp.csr_matrix(
                    (np.ones(rows.size, dtype=np.int64), (rows, cols)),
                    shape=(n_to, n_from),
                )
            )
        return mats

    def degrees(self) -> list:
        """Per-part vertex degrees (number of hyperedges through each vertex)."""
        mats = self.transfer_matrices()
        fwd = [np.ones(self.dims[0], dtype=np.int64)]
        for M in mats:
            fwd.append(M @ fwd[-1])
        bwd = [np.ones(self.dims[-1], dtype=np.int64)]
        for M in reversed(mats):
            bwd.append(M.T @ bwd[-1])
        bwd.reverse()
        return [f * b for f, b in zip(fwd, bwd)]


class WalkHypergraph(_ChainHypergraph):
    """All length-``t-1`` walks of a ``d``-regular base graph."""

    def __init__(self, base: RegularGraph, t: int):
        if t < 2:
            raise ValueError(f"need t >= 2, got {t}")
        if base.n * base.d ** (t - 1) >= 2**63:
            raise OverflowError("hyperedge count overflows 64 bits")
        self.base = base
        self.dims = (base.n,) * t
        self.links = (base.neighbors,) * (t - 1)

    @property
    def d(self) -> int:
        return self.base.d

    def __repr__(self):
        return f"WalkHypergraph(n={self.base.n}, d={self.base.d}, t={self.t})"


class QuasiRegularHypergraph(_ChainHypergraph):
    """Paths through a chain of biregular bipartite graphs ``G_1, ..., G_{t-1}``."""

    def __init__(self, chain: Sequence[BipartiteGraph]):
        chain = tuple(chain)
        if not chain:
            raise ValueError("chain must contain at least one bipartite graph")
        for i in range(len(chain) - 1):
            if chain[i].n2 != chain[i + 1].n1:
                raise ValueError(
                    f"chain link {i} has right side {chain[i].n2} but link {i + 1} "
                    f"has left side {chain[i + 1].n1}"
                )
        self.chain = chain
        self.dims = (chain[0].n1,) + tuple(g.n2 for g in chain)
        self.links = tuple(g.left_neighbors for g in chain)

    @property
    def degree_params(self) -> list:
        """``[d_1, d_2, ..., d_{2t-2}]``."""
        out = []
        for g in self.chain:
            out += [g.d1, g.d2]
        return out

    def expected_degrees(self) -> list:
        """Per-part degree ``prod_{k<i} d_{2k} * prod_{k>=i} d_{2k-1}``."""
        ds = self.degree_params
        t = self.t
        out = []
        for i in range(1, t + 1):
            deg = 1
            for k in range(1, i):
                deg *= ds[2 * k - 1]
            for k in range(i, t):
                deg *= ds[2 * k - 2]
            out.append(deg)
        return out

    def __repr__(self):
        return f"QuasiRegularHypergraph(dims={self.dims})"


def build_walk_hypergraph(G: RegularGraph, t: int) -> WalkHypergraph:
    return WalkHypergraph(G, t)


def build_quasi_hypergraph(chain: Sequence[BipartiteGraph]) -> QuasiRegularHypergraph:
    return QuasiRegularHypergraph(chain)


def _indicator(W, n: int, part: int) -> np.ndarray:
    W = np.asarray(W)
    if W.dtype == bool:
        if W.shape[0] != n:
            raise IndexError(f"indicator for part {part} has length {W.shape[0]}, expected {n}")
        return W.astype(np.int64)
    W = W.astype(np.int64).ravel()
    if W.size and (W.min() < 0 or W.max() >= n):
        raise IndexError(f"subset index out of range for part {part} of size {n}")
    ind = np.zeros(n, dtype=np.int64)
    ind[W] = 1
    return ind


def count_crossing(H: _ChainHypergraph, subsets: Sequence) -> int:
    """Exact ``e(W_1, ..., W_t)`` by the walk dynamic program.

    ``subsets[i]`` is either an index array or a boolean indicator of part ``i``.
    """
    if len(subsets) != H.t:
        raise ValueError(f"expected {H.t} subsets, got {len(subsets)}")
    inds = [_indicator(W, n, i) for i, (W, n) in enumerate(zip(subsets, H.dims))]
    v = inds[0]
    for M, ind in zip(H.transfer_matrices(), inds[1:]):
        v = ind * (M @ v)
    return int(v.sum())


def count_crossing_batch(H: _ChainHypergraph, indicators: Sequence[np.ndarray],
                         transfer=None) -> np.ndarray:
    """Vectorized :func:`count_crossing` over a batch of subset tuples.

    ``indicators[i]`` is an ``(n_i, B)`` 0/1 array; returns ``B`` integer counts.
    """
    mats = transfer if transfer is not None else H.transfer_matrices()
    v = np.asarray(indicators[0], dtype=np.int64)
    for M, ind in zip(mats, indicators[1:]):
        v = np.asarray(ind, dtype=np.int64) * (M @ v)
    return v.sum(axis=0)


def count_crossing_brute(H: _ChainHypergraph, subsets: Sequence) -> int:
    """``e(W_1, ..., W_t)`` by enumerating every hyperedge."""
    inds = [_indicator(W, n, i).astype(bool) for i, (W, n) in enumerate(zip(subsets, H.dims))]
    total = 0
    for block in H.iter_edge_blocks():
        hit = np.ones(block.shape[0], dtype=bool)
        for i, ind in enumerate(inds):
            hit &= ind[block[:, i]]
        total += int(hit.sum())
    return total


def _sq(a):
    return np.sqrt(np.clip(a * (1.0 - a), 0.0, None))


def _tail_products(alphas):
    """``tail[i] = prod_{k > i} alpha_k`` (0-based, empty product 1)."""
    alphas = np.asarray(alphas, dtype=np.float64)
    t = alphas.shape[0]
    tail = np.ones_like(alphas)
    for i in range(t - 2, -1, -1):
        tail[i] = tail[i + 1] * alphas[i + 1]
    return tail


def mixing_bound_regular(t: int, alphas, lam: float, d: float):
    """Two-sided mixing bound for walk hypergraphs.

    Returns ``(tight, crude)`` where ``tight`` is the alpha-dependent bound and
    ``crude = (2t - 3) lam / (4 d)``. ``alphas`` may carry a trailing batch axis.
    """
    a = np.asarray(alphas, dtype=np.float64)
    if a.shape[0] != t:
        raise ValueError(f"expected {t} densities, got {a.shape[0]}")
    tail = _tail_products(a)
    tight = _sq(a[0]) * _sq(a[1]) * tail[1]
    for i in range(2, t):
        tight = tight + np.sqrt(a[0]) * _sq(a[i]) * tail[i]
    tight = (lam / d) * tight
    crude = (2 * t - 3) * lam / (4 * d)
    return (float(tight) if np.ndim(tight) == 0 else tight), crude


def mixing_bound_quasi(t: int, alphas, lambdas: Sequence[float], degrees: Sequence[float]):
    """Mixing bound for chain hypergraphs.

    ``lambdas[k]`` is the second singular value of link ``k``; ``degrees`` is
    ``[d_1, ..., d_{2t-2}]``. Returns ``(tight, crude)``.
    """
    a = np.asarray(alphas, dtype=np.float64)
    if a.shape[0] != t or len(lambdas) != t - 1 or len(degrees) != 2 * t - 2:
        raise ValueError("inconsistent lengths of alphas, lambdas, degrees")
    scale = [lam / math.sqrt(degrees[2 * k] * degrees[2 * k + 1]) for k, lam in enumerate(lambdas)]
    tail = _tail_products(a)
    tight = scale[0] * _sq(a[0]) * _sq(a[1]) * tail[1]
    for k in range(1, t - 1):
        tight = tight + scale[k] * np.sqrt(a[0]) * _sq(a[k + 1]) * tail[k + 1]
    crude = scale[0] / 4 + sum(s / 2 for s in scale[1:])
    return (float(tight) if np.ndim(tight) == 0 else tight), crude


def hypergraph_bound(H: _ChainHypergraph, alphas):
    """Dispatch to the mixing bound matching the hypergraph type."""
    if isinstance(H, WalkHypergraph):
        return mixing_bound_regular(H.t, alphas, H.base.lambda2, H.base.d)
    return mixing_bound_quasi(
        H.t, alphas, [g.lambda2 for g in H.chain], H.degree_params
    )


def mixing_discrepancy(H: _ChainHypergraph, subsets: Sequence) -> float:
    """``|e(W_1..W_t)/|E| - prod alpha_i|``."""
    e = count_crossing(H, subsets)
    alphas = [
        _indicator(W, n, i).sum() / n for i, (W, n) in enumerate(zip(subsets, H.dims))
    ]
    return abs(e / H.edge_count - float(np.prod(alphas)))


def random_subset_indicators(dims: Sequence[int], batch: int, rng) -> list:
    """Random subsets with sizes uniform on ``{0, ..., n_i}`` (boundaries included).

    Returns one ``(n_i, batch)`` 0/1 array per part.
    """
    out = []
    for n in dims:
        sizes = rng.integers(0, n + 1, size=batch)
        ranks = np.argsort(rng.random((batch, n)), axis=1).argsort(axis=1)
        out.append((ranks < sizes[:, None]).T.astype(np.int64))
    return out


def fuzz_mixing(H: _ChainHypergraph, trials: int, seed: int = 0, chunk: int = 20000):
    """Randomized subset fuzzing of the mixing bound.

    Yields per-chunk dicts with arrays ``alphas`` (t x B), ``discrepancy``,
    ``tight``, and the scalar ``crude``.
    """
    rng = np.random.default_rng(seed)
    mats = H.transfer_matrices()
    E = H.edge_count
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        inds = random_subset_indicators(H.dims, b, rng)
        counts = count_crossing_batch(H, inds, mats)
        alphas = np.stack([ind.sum(axis=0) / n for ind, n in zip(inds, H.dims)])
        disc = np.abs(counts / E - np.prod(alphas, axis=0))
        tight, crude = hypergraph_bound(H, alphas)
        yield {"alphas": alphas, "discrepancy": disc, "tight": tight, "crude": crude}
        done += b


def adjacency_tensor(H: _ChainHypergraph) -> np.ndarray:
    """0/1 adjacency tensor (micro instances only)."""
    if math.prod(H.dims) > MICRO_TENSOR_LIMIT:
        raise MemoryError(f"adjacency tensor of size {math.prod(H.dims)} exceeds cap")
    T = np.zeros(H.dims)
    T[tuple(H.edges().T)] = 1.0
    return T


def adjacency_tensor_mixing(TH, subsets: Sequence) -> float:
    """``|e - |E| prod|W_i| / prod n_i| / sqrt(prod |W_i|)`` from a dense adjacency tensor.

    Returns 0 when any subset is empty.
    """
    TH = np.asarray(TH, dtype=np.float64)
    if TH.size > MICRO_TENSOR_LIMIT:
        raise MemoryError(f"adjacency tensor of size {TH.size} exceeds cap")
    inds = [_indicator(W, n, i).astype(np.float64) for i, (W, n) in enumerate(zip(subsets, TH.shape))]
    sizes = [ind.sum() for ind in inds]
    if min(sizes) == 0:
        return 0.0
    e = TH
    for ind in inds:
        e = np.tensordot(ind, e, axes=(0, 0))
    E = TH.sum()
    lhs = abs(float(e) - E / TH.size * math.prod(sizes))
    return lhs / math.sqrt(math.prod(sizes))


def micro_spectral_norm(T, restarts: int = 200, iters: int = 200, seed: int = 0) -> float:
    """Spectral norm of a tiny tensor by multi-start alternating maximization.

    Each restart ascends ``<T, v_1 ∘ ... ∘ v_t>`` over unit vectors one mode at a
    time; the best value is a lower bound that is exact on micro instances in
    practice. Test oracle only.
    """
    T = np.asarray(T, dtype=np.float64)
    if T.size > 10**4:
        raise MemoryError("micro_spectral_norm is limited to 10^4 entries")
    rng = np.random.default_rng(seed)
    t = T.ndim
    best = 0.0
    for _ in range(restarts):
        vs = [rng.standard_normal(n) for n in T.shape]
        vs = [v / np.linalg.norm(v) for v in vs]
        val = 0.0
        for _ in range(iters):
            for k in range(t):
                g = T
                for j in reversed(range(t)):
                    if j != k:
                        g = np.tensordot(g, vs[j], axes=(j, 0))
                nrm = np.linalg.norm(g)
                if nrm == 0:
                    break
                vs[k] = g / nrm
            new = nrm
            if abs(new - val) <= 1e-14 * max(1.0, new):
                val = new
                break
            val = new
        best = max(best, val)
    return float(best)


def _out_neighbors(pairs, n_from, n_to):
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs = pairs[order]
    deg = np.bincount(pairs[:, 0], minlength=n_from)
    indeg = np.bincount(pairs[:, 1], minlength=n_to)
    if deg.min() != deg.max() or indeg.min() != indeg.max():
        return None
    return pairs[:, 1].reshape(n_from, int(deg[0])), int(deg[0]), int(indeg[0])


def hypergraph_from_edges(hs: HyperedgeSet):
    """Recover the walk or chain hypergraph whose full edge set is ``hs``.

    Consecutive coordinate pairs give the base graph (or the chain links);
    raises ``ValueError`` if ``hs`` is not the complete edge set of either kind.
    """
    links = []
    for i in range(hs.t - 1):
        pairs = np.unique(hs.edges[:, i:i + 2], axis=0)
        nb = _out_neighbors(pairs, hs.dims[i], hs.dims[i + 1])
        if nb is None:
            raise ValueError(f"link {i} of the hyperedge set is not biregular")
        links.append((pairs, nb))
    H = None
    same = len(set(hs.dims)) == 1 and all(
        np.array_equal(links[0][0], p) for p, _ in links
    )
    if same:
        pairs = links[0][0]
        rev = np.unique(pairs[:, ::-1], axis=0)
        if np.array_equal(rev, pairs) and not (pairs[:, 0] == pairs[:, 1]).any():
            nbrs, d, _ = links[0][1]
            H = WalkHypergraph(RegularGraph(hs.dims[0], d, nbrs), hs.t)
    if H is None:
        chain = [
            BipartiteGraph(hs.dims[i], hs.dims[i + 1], d1, d2, nbrs)
            for i, (_, (nbrs, d1, d2)) in enumerate(links)
        ]
        H = QuasiRegularHypergraph(chain)
    if H.edge_count != len(hs):
        raise ValueError(
            f"hyperedge set has {len(hs)} edges but the recovered construction has "
            f"{H.edge_count}; it is not a complete walk/path set"
        )
    return H
