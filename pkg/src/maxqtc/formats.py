"""Plain-text file formats. All indices are 0-based; dense values are in C order
(last index fastest).

tensor        ``t`` / dims / one value per line
factors       ``t r`` / then per factor: ``n_i`` followed by ``n_i`` rows of ``r`` values
graph         ``n d`` / one edge ``u v`` per line
bigraph       ``n1 n2 d1 d2`` / one edge ``u v`` per line (``u`` left, ``v`` right)
hyperedges    ``t n_1 ... n_t |E|`` / one edge of ``t`` indices per line
observations  ``t n_1 ... n_t |E|`` / ``t`` indices then the observed value per line
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .expander_graphs import BipartiteGraph, RegularGraph
from .hypergraph import HyperedgeSet
from .tensor_core import DenseTensor, FactorSet, Observations


class FormatError(ValueError):
    pass


def _lines(path):
    text = Path(path).read_text()
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _ints(line, what):
    try:
        return [int(x) for x in line.split()]
    except ValueError as exc:
        raise FormatError(f"bad {what} line: {line!r}") from exc


def _fmt(x: float) -> str:
    return repr(float(x))


def write_tensor(T: DenseTensor, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{T.order}\n{' '.join(map(str, T.dims))}\n")
        fh.write("\n".join(_fmt(v) for v in T.flat))
        fh.write("\n")


def read_tensor(path) -> DenseTensor:
    lines = _lines(path)
    if len(lines) < 2:
        raise FormatError("tensor file needs an order line and a dims line")
    (t,) = _ints(lines[0], "order")
    dims = _ints(lines[1], "dims")
    if len(dims) != t:
        raise FormatError(f"order {t} but {len(dims)} dims")
    values = np.array([float(x) for x in lines[2:]])
    if values.size != int(np.prod(dims)):
        raise FormatError(f"expected {int(np.prod(dims))} values, found {values.size}")
    return DenseTensor.from_flat(dims, values)


def write_factors(f: FactorSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{f.order} {f.rank}\n")
        for U in f:
            fh.write(f"{U.shape[0]}\n")
            for row in U:
                fh.write(" ".join(_fmt(v) for v in row) + "\n")


def read_factors(path) -> FactorSet:
    lines = _lines(path)
    t, r = _ints(lines[0], "header")
    pos = 1
    facs = []
    for _ in range(t):
        (n,) = _ints(lines[pos], "factor size")
        rows = np.loadtxt(io.StringIO("\n".join(lines[pos + 1: pos + 1 + n])), ndmin=2)
        if rows.shape != (n, r):
            raise FormatError(f"factor block has shape {rows.shape}, expected {(n, r)}")
        facs.append(rows)
        pos += 1 + n
    return FactorSet(tuple(facs))


def write_graph(G: RegularGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{G.n} {G.d}\n")
        for u, v in G.edges():
            fh.write(f"{u} {v}\n")


def write_bigraph(G: BipartiteGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{G.n1} {G.n2} {G.d1} {G.d2}\n")
        for u, v in G.edges():
            fh.write(f"{u} {v}\n")


def read_graph(path):
    """Read a regular graph (``n d`` header) or bipartite graph (``n1 n2 d1 d2``)."""
    lines = _lines(path)
    header = _ints(lines[0], "header")
    edges = np.array([_ints(ln, "edge") for ln in lines[1:]], dtype=np.int64).reshape(-1, 2)
    if len(header) == 2:
        return RegularGraph.from_edges(header[0], header[1], edges)
    if len(header) == 4:
        return BipartiteGraph.from_edges(*header, edges)
    raise FormatError(f"graph header must have 2 or 4 fields, got {lines[0]!r}")


def write_hyperedges(H: HyperedgeSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{H.t} {' '.join(map(str, H.dims))} {len(H)}\n")
        np.savetxt(fh, H.edges, fmt="%d")


def _read_indexed(path, with_values: bool):
    lines = _lines(path)
    header = _ints(lines[0], "header")
    t = header[0]
    if len(header) != t + 2:
        raise FormatError(f"header must be 't n_1 ... n_t |E|', got {lines[0]!r}")
    dims, m = header[1:-1], header[-1]
    body = np.loadtxt(io.StringIO("\n".join(lines[1:])), ndmin=2) if m else np.zeros((0, t + with_values))
    if body.shape != (m, t + with_values):
        raise FormatError(f"expected {m} lines of {t + with_values} fields, got {body.shape}")
    return dims, body


def read_hyperedges(path) -> HyperedgeSet:
    dims, body = _read_indexed(path, False)
    return HyperedgeSet(tuple(dims), body.astype(np.int64))


def write_observations(obs: Observations, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{len(obs.dims)} {' '.join(map(str, obs.dims))} {len(obs)}\n")
        for e, v in zip(obs.edges, obs.values):
            fh.write(" ".join(map(str, e)) + " " + _fmt(v) + "\n")


def read_observations(path) -> Observations:
    dims, body = _read_indexed(path, True)
    t = len(dims)
    return Observations(tuple(dims), body[:, :t].astype(np.int64), body[:, t])
