"""Symmetric block-tridiagonal matrices: log-determinant, solves, and the
diagonal of the inverse.

The representation is uniform: ``diag`` stacks K blocks of width w and
``lower`` stacks the K-1 sub-diagonal coupling blocks (block (k+1, k)).
Structurally absent ("padded") components are marked in ``free``; their rows
and columns hold a unit diagonal so that they contribute nothing to the
log-determinant and solves.  This is how pinned path states are carried
without breaking the uniform layout.

Factorization is delegated to LAPACK's banded Cholesky through SciPy; the
selected-inversion recursion for marginal variances runs block-by-block.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefiniteError

__all__ = [
    "BlockTridiagonal",
    "logdet_and_solve",
    "marginal_variances",
]


class BlockTridiagonal:
    """Symmetric block-tridiagonal matrix with uniform block width."""

    def __init__(self, diag, lower=None, free=None):
        diag = np.asarray(diag, dtype=float)
        if diag.ndim != 3 or diag.shape[1] != diag.shape[2]:
            raise ValueError("diag must have shape (K, w, w)")
        k, w = diag.shape[0], diag.shape[1]
        if lower is None:
            lower = np.zeros((max(k - 1, 0), w, w))
        lower = np.asarray(lower, dtype=float)
        if lower.shape != (max(k - 1, 0), w, w):
            raise ValueError("lower must have shape (K-1, w, w)")
        if free is None:
            free = np.ones((k, w), dtype=bool)
        self.diag = diag
        self.lower = lower
        self.free = np.asarray(free, dtype=bool)
        self._factor = None

    @classmethod
    def from_blocks(cls, diag_blocks, lower_blocks=None):
        """Build from per-block arrays of (possibly varying) width.

        Narrow blocks are padded to the maximum width with unit diagonal
        rows, which leaves determinants, solves and marginal variances of
        the true components unchanged.
        """
        diag_blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in diag_blocks]
        k = len(diag_blocks)
        widths = [b.shape[0] for b in diag_blocks]
        w = max(widths)
        diag = np.zeros((k, w, w))
        free = np.zeros((k, w), dtype=bool)
        for i, b in enumerate(diag_blocks):
            wi = widths[i]
            diag[i, :wi, :wi] = b
            diag[i, range(wi, w), range(wi, w)] = 1.0
            free[i, :wi] = True
        lower = np.zeros((max(k - 1, 0), w, w))
        if lower_blocks is not None:
            for i, b in enumerate(lower_blocks):
                b = np.atleast_2d(np.asarray(b, dtype=float))
                lower[i, : b.shape[0], : b.shape[1]] = b
        return cls(diag, lower, free)

    # -- basic properties ---------------------------------------------------

    @property
    def num_blocks(self):
        return self.diag.shape[0]

    @property
    def width(self):
        return self.diag.shape[1]

    @property
    def dim(self):
        """Number of true (non-padded) components."""
        return int(self.free.sum())

    def dense(self):
        """Dense matrix over the true components (padding removed)."""
        k, w = self.diag.shape[0], self.width
        full = np.zeros((k * w, k * w))
        for i in range(k):
            full[i * w : (i + 1) * w, i * w : (i + 1) * w] = self.diag[i]
        for i in range(k - 1):
            blk = self.lower[i]
            full[(i + 1) * w : (i + 2) * w, i * w : (i + 1) * w] = blk
            full[i * w : (i + 1) * w, (i + 1) * w : (i + 2) * w] = blk.T
        mask = self.free.reshape(-1)
        return full[np.ix_(mask, mask)]

    def symmetry_error(self):
        """max |A - A^T| over coupling blocks (diag blocks are stored once)."""
        err = 0.0
        for i in range(self.num_blocks):
            err = max(err, float(np.max(np.abs(self.diag[i] - self.diag[i].T), initial=0.0)))
        return err

    # -- banded factorization -------------------------------------------------

    def _banded(self, shift=0.0):
        k, w = self.num_blocks, self.width
        d = k * w
        bw = min(2 * w - 1, d - 1)
        ab = np.zeros((bw + 1, d))
        diag = self.diag
        if shift:
            diag = diag.copy()
            idx = np.arange(w)
            diag[:, idx, idx] += np.where(self.free, shift, 0.0)
        for a in range(w):
            for c in range(a + 1):
                ab[a - c, c::w] = diag[:, a, c]
        if k > 1:
            for a in range(w):
                for c in range(w):
                    ab[w + a - c, c : c + (k - 1) * w : w] = self.lower[:, a, c]
        return ab

    def factor(self, shift=0.0):
        """Banded Cholesky factor; raises NotPositiveDefiniteError on failure."""
        ab = self._banded(shift=shift)
        try:
            cb = scipy.linalg.cholesky_banded(ab, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(str(exc)) from exc
        return cb

    def logdet(self, factor=None):
        """log |H| over the true components (H must be positive definite)."""
        cb = self.factor() if factor is None else factor
        d = cb[0]
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise NotPositiveDefiniteError("nonpositive pivot in banded Cholesky")
        # padded components contribute log 1 = 0
        return float(2.0 * np.sum(np.log(d)))

    def solve(self, rhs, factor=None):
        """Solve H x = rhs; rhs is laid out as (K, w) or flat (K*w,)."""
        cb = self.factor() if factor is None else factor
        shape = np.shape(rhs)
        flat = np.asarray(rhs, dtype=float).reshape(-1)
        out = scipy.linalg.cho_solve_banded((cb, True), flat, check_finite=False)
        return out.reshape(shape)

    # -- selected inversion ----------------------------------------------------

    def inverse_diagonal(self):
        """Diagonal of H^{-1}, shaped (K, w); padded entries are 0.

        Uses the block Schur-complement recursion: forward elimination gives
        S_i = D_i - L_{i-1} S_{i-1}^{-1} L_{i-1}^T, and the backward sweep
        accumulates the tridiagonal part of the inverse.
        """
        k, w = self.num_blocks, self.width
        s_inv = []
        s = self.diag[0]
        for i in range(k):
            try:
                c = np.linalg.cholesky(s)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError(f"block {i}: {exc}") from exc
            inv = np.linalg.inv(c.T) @ np.linalg.inv(c)
            s_inv.append(inv)
            if i + 1 < k:
                li = self.lower[i]
                s = self.diag[i + 1] - li @ inv @ li.T
        sigma = np.zeros((k, w, w))
        sigma[k - 1] = s_inv[k - 1]
        for i in range(k - 2, -1, -1):
            li = self.lower[i]
            m = s_inv[i] @ li.T @ sigma[i + 1]
            sigma[i] = s_inv[i] + m @ li @ s_inv[i]
        out = np.einsum("kii->ki", sigma).copy()
        out[~self.free] = 0.0
        return out


def logdet_and_solve(h: BlockTridiagonal, rhs=None):
    """Log-determinant of a positive definite block-tridiagonal matrix and,
    optionally, the solution of ``H x = rhs``."""
    cb = h.factor()
    ld = h.logdet(factor=cb)
    if rhs is None:
        return ld, None
    return ld, h.solve(rhs, factor=cb)


def marginal_variances(h: BlockTridiagonal):
    """Diagonal of ``H^{-1}`` (flattened over true components)."""
    diag = h.inverse_diagonal()
    return diag[h.free]
