"""Max-quasinorm bounds, error-bound calculators and sign-tensor combinatorics.

The true max-qnorm is never computed; everything here works with certified
upper bounds from explicit factorizations and the lower bound ``|T|_inf``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor_core import FactorSet, two_inf_norm

GROTHENDIECK_CAP = 1.783


def maxqnorm_upper(f: FactorSet) -> float:
    """``prod_i ||U_i||_{2,inf}``, an upper bound on the max-qnorm of ``evaluate(f)``."""
    return float(math.prod(two_inf_norm(U) for U in f))


def rank_bound(t: int, r: int) -> float:
    """``r^((t^2 - t - 1)/2)``: max-qnorm over ``|T|_inf`` for a rank-``r`` order-``t`` tensor."""
    if t < 2 or r < 1:
        raise ValueError(f"need t >= 2 and r >= 1, got t={t}, r={r}")
    exponent = (t * t - t - 1) / 2
    if exponent * math.log(r) > 700:
        raise OverflowError(f"rank bound overflows for t={t}, r={r}")
    return float(r) ** exponent


def incoherent_bound(C: float, t: int, r: int) -> float:
    """``C^t r^(t/2)`` for a tensor with a rank-``r`` factorization of entries bounded by ``C``."""
    if C <= 0:
        raise ValueError(f"need C > 0, got {C}")
    return C**t * r ** (t / 2)


def error_bound_constant(t: int) -> float:
    """``C_t = 2^t (2t - 3) K_G^(t-1)`` with ``K_G`` at its cap 1.783."""
    if t < 2:
        raise ValueError(f"need t >= 2, got {t}")
    return 2**t * (2 * t - 3) * GROTHENDIECK_CAP ** (t - 1)


def error_bound_rhs(t: int, maxq: float, lam: float, d: float, noise_rms: float = 0.0) -> float:
    """Mean-squared-error bound ``C_t maxq^2 lam / d`` (+ ``4 noise_rms^2`` when noisy)."""
    return error_bound_constant(t) * maxq**2 * lam / d + 4.0 * noise_rms**2


def error_bound_rhs_quasi(maxq: float, lambdas: Sequence[float], degrees: Sequence[float]) -> float:
    """MSE bound for chain hypergraphs.

    ``2^t K_G^(t-1) (lam_1/sqrt(d_1 d_2) + sum_k 2 lam_k/sqrt(d_{2k-1} d_{2k})) maxq^2``.
    """
    t = len(lambdas) + 1
    scale = [lam / math.sqrt(degrees[2 * k] * degrees[2 * k + 1]) for k, lam in enumerate(lambdas)]
    spectral = scale[0] + 2 * sum(scale[1:])
    return 2**t * GROTHENDIECK_CAP ** (t - 1) * spectral * maxq**2


def even_strings(t: int) -> list:
    """All length-``t`` 0/1 tuples with an even number of ones, lexicographic."""
    if t < 2:
        raise ValueError(f"need t >= 2, got {t}")
    return [s for s in itertools.product((0, 1), repeat=t) if sum(s) % 2 == 0]


@dataclass(frozen=True)
class SignVectorTuple:
    vectors: tuple

    def __post_init__(self):
        vecs = tuple(np.asarray(v, dtype=np.int64).ravel() for v in self.vectors)
        if len(vecs) < 2:
            raise ValueError("need at least two sign vectors")
        for v in vecs:
            if not np.isin(v, (-1, 1)).all():
                raise ValueError("sign vectors must contain only -1 and +1")
        object.__setattr__(self, "vectors", vecs)

    @property
    def dims(self) -> tuple:
        return tuple(v.size for v in self.vectors)

    def tensor(self) -> np.ndarray:
        """The rank-1 sign tensor ``s_1 ∘ ... ∘ s_t``."""
        out = self.vectors[0]
        for v in self.vectors[1:]:
            out = np.multiply.outer(out, v)
        return out


@dataclass(frozen=True)
class IndicatorDecomposition:
    """``terms[j][i]`` is the boolean indicator of ``W_{i,j}``; ``strings[j]`` its even string."""

    strings: tuple
    terms: tuple

    def reconstruct(self) -> np.ndarray:
        """``sum_j 1_{W_{1,j}} ∘ ... ∘ 1_{W_{t,j}}`` as an integer tensor."""
        total = None
        for term in self.terms:
            out = term[0].astype(np.int64)
            for ind in term[1:]:
                out = np.multiply.outer(out, ind.astype(np.int64))
            total = out if total is None else total + out
        return total


def sign_decompose(s: SignVectorTuple) -> IndicatorDecomposition:
    """Write ``(S + J)/2`` as a sum of ``2^(t-1)`` indicator rank-1 tensors.

    With ``W_i = {k : s_i[k] = -1}``, term ``j`` uses ``W_i`` where the even
    string has a one and the complement of ``W_i`` where it has a zero.
    """
    neg = [v == -1 for v in s.vectors]
    strings = even_strings(len(neg))
    terms = tuple(
        tuple(w if bit else ~w for bit, w in zip(string, neg)) for string in strings
    )
    return IndicatorDecomposition(tuple(strings), terms)


def sample_complexity_factor(t: int, r: int, eps: float) -> float:
    """``r^(2(t-1)(t^2-t-1)) / eps^(2(t-1))``; the big-O constant is omitted."""
    if eps <= 0:
        raise ValueError(f"need eps > 0, got {eps}")
    return float(r) ** (2 * (t - 1) * (t * t - t - 1)) / eps ** (2 * (t - 1))
