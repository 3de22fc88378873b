"""Matrix measures (logarithmic norms), singular values, and block composite bounds.

The measure induced by a vector norm is the one-sided derivative
``lim_{h->0+} (||I + hA|| - 1)/h``.  For the Euclidean norm it equals
``lambda_max(A + A^T)/2``; for the max norm it is the worst row sum
``max_i (a_ii + sum_{j != i} |a_ij|)``.  Negative values certify that the
flow of ``x' = Ax`` contracts in that norm.

For block-partitioned matrices this module also provides the composite
bounds used throughout the stability checks: with the mixed metric
"Euclidean inside each block, max across blocks", the measure of the full
matrix is bounded by the worst block row of measures/norms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


def _as_matrix(a, square: bool = False) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1) if not square else m.reshape(-1, 1)
    if m.ndim != 2 or m.size == 0:
        raise InvalidInputError(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix entries must be finite")
    return m


def mu2(a) -> float:
    """Matrix measure induced by the Euclidean norm: lambda_max(A + A^T)/2."""
    m = _as_matrix(a, square=True)
    return float(np.linalg.eigvalsh(m + m.T)[-1] / 2.0)


def mu_inf(a) -> float:
    """Matrix measure induced by the max norm: max_i (a_ii + sum_{j!=i} |a_ij|)."""
    m = _as_matrix(a, square=True)
    abs_m = np.abs(m)
    return float(np.max(np.diag(m) + abs_m.sum(axis=1) - np.diag(abs_m)))


def sigma_max(a) -> float:
    """Largest singular value."""
    m = _as_matrix(a)
    return float(np.linalg.svd(m, compute_uv=False)[0])


def sigma_min(a) -> float:
    """Smallest singular value."""
    m = _as_matrix(a)
    return float(np.linalg.svd(m, compute_uv=False)[-1])


def norm2(a) -> float:
    """Spectral norm, i.e. the largest singular value."""
    return sigma_max(a)


@dataclass(frozen=True)
class BlockMatrix:
    """Square block partition: N x N outer blocks, block (i, j) of shape dims[i] x dims[j].

    ``blocks[i][j]`` may be None for a zero block.
    """

    blocks: tuple
    dims: tuple

    @classmethod
    def from_rows(cls, rows) -> "BlockMatrix":
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise InvalidInputError("block structure must be square and non-empty")
        dims = [None] * n
        norm_rows = []
        for i, row in enumerate(rows):
            out_row = []
            for j, blk in enumerate(row):
                if blk is None:
                    out_row.append(None)
                    continue
                b = _as_matrix(blk)
                for axis, k in ((0, i), (1, j)):
                    if dims[k] is None:
                        dims[k] = b.shape[axis]
                    elif dims[k] != b.shape[axis]:
                        raise InvalidInputError(
                            f"block ({i},{j}) shape {b.shape} inconsistent with "
                            f"declared dim {dims[k]} for block index {k}"
                        )
                out_row.append(b)
            norm_rows.append(tuple(out_row))
        if any(d is None for d in dims):
            raise InvalidInputError("every block row/column needs at least one explicit block")
        return cls(blocks=tuple(norm_rows), dims=tuple(dims))

    @property
    def n_blocks(self) -> int:
        return len(self.dims)

    def block(self, i: int, j: int) -> np.ndarray:
        b = self.blocks[i][j]
        if b is None:
            return np.zeros((self.dims[i], self.dims[j]))
        return b

    def dense(self) -> np.ndarray:
        return np.block([[self.block(i, j) for j in range(self.n_blocks)]
                         for i in range(self.n_blocks)])

    def slices(self):
        edges = np.concatenate([[0], np.cumsum(self.dims)])
        return [slice(int(edges[i]), int(edges[i + 1])) for i in range(self.n_blocks)]


def _as_block(a) -> BlockMatrix:
    if isinstance(a, BlockMatrix):
        return a
    return BlockMatrix.from_rows(a)


def block_measure_bound(a) -> float:
    """Upper bound on the measure of a block matrix in the mixed block metric.

    Returns ``max_i { mu2(A_ii) + sum_{j != i} ||A_ij||_2 }``, which dominates
    the measure induced by taking Euclidean norms inside each block and the
    max norm across blocks.
    """
    bm = _as_block(a)
    worst = -np.inf
    for i in range(bm.n_blocks):
        row = mu2(bm.block(i, i))
        for j in range(bm.n_blocks):
            if j != i and bm.blocks[i][j] is not None:
                row += norm2(bm.blocks[i][j])
        worst = max(worst, row)
    return float(worst)


def block_norm_bound(h) -> float:
    """Upper bound on the induced norm of a block matrix in the mixed block metric.

    Returns ``max_i sum_j ||H_ij||_2``.
    """
    bm = _as_block(h)
    worst = 0.0
    for i in range(bm.n_blocks):
        row = 0.0
        for j in range(bm.n_blocks):
            if bm.blocks[i][j] is not None:
                row += norm2(bm.blocks[i][j])
        worst = max(worst, row)
    return float(worst)


def block_max_norm(z: np.ndarray, dims) -> float:
    """Mixed vector norm: max over blocks of the Euclidean norm of each block."""
    z = np.asarray(z, dtype=float)
    out = 0.0
    start = 0
    for d in dims:
        out = max(out, float(np.linalg.norm(z[start:start + d])))
        start += d
    if start != z.shape[0]:
        raise InvalidInputError(f"vector length {z.shape[0]} does not match dims {tuple(dims)}")
    return out
