"""Exact K-nearest-neighbor distances by blocked pairwise distances.

Ranks are self-inclusive: rank 1 is the point itself at distance 0, so the distance at
rank K is the smallest radius r with |B(x, r)| >= K counting x.
"""

from __future__ import annotations

import concurrent.futures as cf
from dataclasses import dataclass

import numpy as np

from .types import ContractViolation, Dataset

DEFAULT_BLOCK = 1024
# max elements in one exact-difference scratch array
_CHUNK = 1 << 22
# max elements in one block of expanded distances
_SCRATCH = 1 << 24


@dataclass(frozen=True, eq=False)
class NeighborTable:
    """Row i holds d(x_i, NN(x_i, 1..K)) in nondecreasing order."""

    dists: np.ndarray
    K: int

    @property
    def n(self) -> int:
        return int(self.dists.shape[0])

    def column(self, rank: int) -> np.ndarray:
        if not 1 <= rank <= self.K:
            raise ContractViolation(f"rank {rank} outside table width K={self.K}.")
        return self.dists[:, rank - 1]


def pairwise_sq_dists_block(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """||A_i||^2 + ||B_j||^2 - 2 A_i . B_j, clamped below at 0."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise ContractViolation(f"Dimension mismatch: A has d={A.shape[1]}, B has d={B.shape[1]}.")
    a_norm = np.einsum("ij,ij->i", A, A)[:, None]
    b_norm = np.einsum("ij,ij->i", B, B)[None, :]
    out = a_norm + b_norm - 2.0 * (A @ B.T)
    np.maximum(out, 0.0, out=out)
    return out


def knn_table(data: Dataset, K: int, *, block: int = DEFAULT_BLOCK, workers: int = 1) -> NeighborTable:
    n = data.n
    if not 1 <= K <= n:
        raise ContractViolation(f"K={K} must satisfy 1 <= K <= n={n}.")
    if block < 1:
        raise ContractViolation("block must be >= 1.")

    P = data.points
    # centering keeps the norm expansion well conditioned; distances are translation invariant
    X = P - P.mean(axis=0)
    norms = np.einsum("ij,ij->i", X, X)
    # rounding bound on one expanded entry: a few ulps of ||a||^2 + ||b||^2 per dimension
    slack = 4.0 * (data.d + 4) * np.finfo(np.float64).eps
    block = max(1, min(block, _SCRATCH // n))
    dists = np.empty((n, K), dtype=np.float64)

    def fill(start: int) -> None:
        end = min(start + block, n)
        rows = np.arange(end - start)
        d2 = pairwise_sq_dists_block(X[start:end], X)
        d2[rows, start + rows] = 0.0
        if K < n:
            kth = np.partition(d2, K - 1, axis=1)[:, K - 1]
            err = slack * (norms[start:end] + norms.max())
            # every true K-nearest neighbor lies within two error bounds of the approximate K-th value
            width = int((d2 <= (kth + 2.0 * err)[:, None]).sum(axis=1).max())
            width = max(K, width)
            if width < n:
                cand = np.argpartition(d2, width - 1, axis=1)[:, :width]
            else:
                cand = np.broadcast_to(np.arange(n), (end - start, n))
        else:
            cand = np.broadcast_to(np.arange(n), (end - start, n))
        step = max(1, _CHUNK // (cand.shape[1] * data.d))
        for lo in range(0, end - start, step):
            hi = min(lo + step, end - start)
            # exact distances from raw coordinates: self and duplicates land on 0
            diff = P[start + lo : start + hi, None, :] - P[cand[lo:hi]]
            exact = np.einsum("ijk,ijk->ij", diff, diff)
            exact.sort(axis=1)
            dists[start + lo : start + hi] = np.sqrt(exact[:, :K])

    starts = range(0, n, block)
    if workers > 1 and n > block:
        with cf.ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(fill, starts))
    else:
        for s in starts:
            fill(s)
    return NeighborTable(dists=dists, K=K)
