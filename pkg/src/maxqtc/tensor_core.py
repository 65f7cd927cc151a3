"""Dense tensor and CP-factor arithmetic.

Conventions
-----------
* Dense values are stored in C order (last index varies fastest).
* All indices and modes are 0-based.
* Mode-``i`` matricization orders columns with the *earliest* remaining
  mode varying fastest, so that ``T_[i] = U_i @ K_{-i}.T`` with
  ``K_{-i} = U_t ⊙ ... ⊙ U_{i+1} ⊙ U_{i-1} ⊙ ... ⊙ U_1``.
* ``khatri_rao(A, B)`` places row ``b + l*a`` at ``A[a] * B[b]``
  (``B`` varies fastest).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.sparse as sp

MAX_DENSE_ENTRIES = 10**8


def _check_size(dims: Sequence[int]) -> None:
    total = 1
    for n in dims:
        total *= int(n)
    if total > MAX_DENSE_ENTRIES:
        raise ValueError(
            f"dense tensor with {total} entries exceeds the cap of {MAX_DENSE_ENTRIES}"
        )


@dataclass(frozen=True)
class DenseTensor:
    """Order-t real tensor held as a read-only C-ordered array."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim < 2:
            raise ValueError(f"tensor order must be >= 2, got {vals.ndim}")
        if any(n < 1 for n in vals.shape):
            raise ValueError(f"dims must be positive, got {vals.shape}")
        _check_size(vals.shape)
        vals = np.array(vals, order="C", copy=True)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_flat(cls, dims: Sequence[int], flat) -> "DenseTensor":
        dims = tuple(int(n) for n in dims)
        flat = np.asarray(flat, dtype=np.float64).ravel()
        if flat.size != int(np.prod(dims)):
            raise ValueError(
                f"expected {int(np.prod(dims))} values for dims {dims}, got {flat.size}"
            )
        return cls(flat.reshape(dims))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def order(self) -> int:
        return self.values.ndim

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def __getitem__(self, idx):
        return self.values[idx]


@dataclass(frozen=True)
class FactorSet:
    """CP factors ``U^(1), ..., U^(t)``, each ``n_i x r``."""

    factors: tuple

    def __post_init__(self):
        facs = tuple(np.array(U, dtype=np.float64, copy=True) for U in self.factors)
        if len(facs) < 2:
            raise ValueError(f"need at least 2 factors, got {len(facs)}")
        for U in facs:
            if U.ndim != 2:
                raise ValueError(f"factors must be matrices, got shape {U.shape}")
        ranks = {U.shape[1] for U in facs}
        if len(ranks) != 1:
            raise ValueError(f"factors disagree on rank: {sorted(ranks)}")
        if facs[0].shape[1] < 1:
            raise ValueError("rank must be >= 1")
        for U in facs:
            U.setflags(write=False)
        object.__setattr__(self, "factors", facs)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(U.shape[0] for U in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)

    def __len__(self):
        return len(self.factors)

    def __getitem__(self, i):
        return self.factors[i]

    def __iter__(self):
        return iter(self.factors)

    def replace(self, mode: int, U) -> "FactorSet":
        facs = list(self.factors)
        facs[mode] = U
        return FactorSet(tuple(facs))


@dataclass(frozen=True)
class Observations:
    """Tensor entries known on a hyperedge set (the masked part of a tensor).

    ``edges`` is an ``(m, t)`` integer array of 0-based multi-indices and
    ``values`` the matching ``(m,)`` entries.
    """

    dims: tuple
    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        edges = np.asarray(self.edges, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if edges.ndim != 2 or edges.shape[1] != len(dims):
            raise ValueError(
                f"edges must have shape (m, {len(dims)}), got {edges.shape}"
            )
        if edges.shape[0] != values.size:
            raise ValueError(
                f"{edges.shape[0]} edges but {values.size} values"
            )
        _check_bounds(edges, dims)
        edges.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    def with_values(self, values) -> "Observations":
        return Observations(self.dims, self.edges, values)


def _check_bounds(edges: np.ndarray, dims: Sequence[int]) -> None:
    if edges.size == 0:
        return
    if edges.min() < 0:
        raise IndexError("negative index in edge list")
    over = edges.max(axis=0) >= np.asarray(dims)
    if over.any():
        mode = int(np.flatnonzero(over)[0])
        raise IndexError(
            f"index {int(edges[:, mode].max())} out of range for mode {mode} "
            f"of size {dims[mode]}"
        )


def _check_factor_dims(f: FactorSet, dims: Sequence[int]) -> None:
    if tuple(dims) != f.dims:
        raise ValueError(f"factor dims {f.dims} do not match tensor dims {tuple(dims)}")


def khatri_rao(A, B) -> np.ndarray:
    """Columnwise Kronecker product; row ``b + l*a`` holds ``A[a] * B[b]``."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2:
        raise ValueError("khatri_rao expects matrices")
    if A.shape[1] != B.shape[1]:
        raise ValueError(
            f"column counts differ: {A.shape[1]} vs {B.shape[1]}"
        )
    return (A[:, None, :] * B[None, :, :]).reshape(-1, A.shape[1])


def khatri_rao_list(mats: Sequence[np.ndarray]) -> np.ndarray:
    """``mats[0] ⊙ mats[1] ⊙ ...`` with the last matrix varying fastest."""
    return reduce(khatri_rao, mats)


def evaluate(f: FactorSet) -> DenseTensor:
    """Dense tensor ``sum_l U1[:, l] ∘ ... ∘ Ut[:, l]``."""
    _check_size(f.dims)
    rest = khatri_rao_list(f.factors[1:])
    return DenseTensor((f.factors[0] @ rest.T).reshape(f.dims))


def evaluate_at(f: FactorSet, edges) -> np.ndarray:
    """Entries of the CP tensor at the given multi-indices, without densifying."""
    edges = np.asarray(edges, dtype=np.int64)
    _check_bounds(edges, f.dims)
    prod = np.ones((edges.shape[0], f.rank))
    for mode, U in enumerate(f.factors):
        prod *= U[edges[:, mode]]
    return prod.sum(axis=1)


def matricize(T: DenseTensor, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding, ``n_mode x prod(other dims)``."""
    vals = T.values if isinstance(T, DenseTensor) else np.asarray(T)
    if not 0 <= mode < vals.ndim:
        raise ValueError(f"mode {mode} out of range for order {vals.ndim}")
    moved = np.moveaxis(vals, mode, 0)
    return moved.reshape(vals.shape[mode], -1, order="F")


def unmatricize(M, mode: int, dims: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`matricize`."""
    dims = tuple(int(n) for n in dims)
    if not 0 <= mode < len(dims):
        raise ValueError(f"mode {mode} out of range for order {len(dims)}")
    M = np.asarray(M, dtype=np.float64)
    other = dims[:mode] + dims[mode + 1:]
    if M.shape != (dims[mode], int(np.prod(other))):
        raise ValueError(f"matrix shape {M.shape} does not fit dims {dims} at mode {mode}")
    moved = M.reshape((dims[mode],) + other, order="F")
    return DenseTensor(np.moveaxis(moved, 0, mode))


def matricized_column(multi_index: Sequence[int], dims: Sequence[int], mode: int) -> int:
    """Column of ``multi_index`` in the mode-``mode`` unfolding (0-based)."""
    k = 0
    stride = 1
    for s, (j, n) in enumerate(zip(multi_index, dims)):
        if s == mode:
            continue
        k += j * stride
        stride *= n
    return k


def other_factors(f: FactorSet, mode: int) -> list:
    """Factors entering ``K_{-mode}``, in product order ``U_t, ..., U_1``."""
    return [f.factors[j] for j in reversed(range(f.order)) if j != mode]


def kronecker(T: DenseTensor, S: DenseTensor) -> DenseTensor:
    """Tensor Kronecker product; ``k_s = j_s + m_s * i_s``."""
    if T.order != S.order:
        raise ValueError(f"orders differ: {T.order} vs {S.order}")
    _check_size([n * m for n, m in zip(T.dims, S.dims)])
    return DenseTensor(np.kron(T.values, S.values))


def hadamard(T: DenseTensor, S: DenseTensor) -> DenseTensor:
    if T.dims != S.dims:
        raise ValueError(f"dims differ: {T.dims} vs {S.dims}")
    return DenseTensor(T.values * S.values)


def two_inf_norm(A) -> float:
    """Largest Euclidean row norm."""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return 0.0
    return float(np.sqrt(np.max(np.sum(A * A, axis=1))))


def frobenius_norm(T) -> float:
    vals = T.values if isinstance(T, DenseTensor) else np.asarray(T)
    return float(np.linalg.norm(vals.ravel()))


def inf_norm(T) -> float:
    vals = T.values if isinstance(T, DenseTensor) else np.asarray(T)
    return float(np.max(np.abs(vals)))


def mode_selector(edges, mode: int, n_mode: int) -> sp.csr_matrix:
    """Sparse ``n_mode x m`` 0/1 matrix scattering edge rows onto mode indices."""
    edges = np.asarray(edges, dtype=np.int64)
    m = edges.shape[0]
    return sp.csr_matrix(
        (np.ones(m), (edges[:, mode], np.arange(m))), shape=(n_mode, m)
    )


def mttkrp(residual: Observations, f: FactorSet, mode: int) -> np.ndarray:
    """``R_[mode] @ K_{-mode}`` for a residual supported on ``residual.edges``.

    The Khatri-Rao product is never formed; cost is O(m * r * t).
    """
    _check_factor_dims(f, residual.dims)
    if not 0 <= mode < f.order:
        raise ValueError(f"mode {mode} out of range for order {f.order}")
    edges = residual.edges
    prod = np.ones((edges.shape[0], f.rank))
    for j, U in enumerate(f.factors):
        if j != mode:
            prod *= U[edges[:, j]]
    prod *= residual.values[:, None]
    return mode_selector(edges, mode, f.dims[mode]) @ prod
