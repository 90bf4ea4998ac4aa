"""Vectorized detection kernels for the Monte Carlo harness.

Internal module. Each function mirrors its scalar counterpart in
``linalg``/``detectors`` exactly (same pivot rule, same tie-breaking, same
elementwise arithmetic) but operates on a leading batch axis of
independent channel instances, which is what makes desk-scale BER sweeps
take seconds instead of hours. The scalar implementations remain the
public contract; the equivalence of the two paths is pinned by tests.

Instead of raising on a rank-deficient instance, the batched routines
return a boolean validity mask so the harness can redraw the offending
channel without losing the rest of the batch. Symbols are handled as
constellation point indices throughout; since point index equals the
integer value of the Gray label, bit errors are a popcount of XORed
indices.
"""

from __future__ import annotations

import numpy as np

from .channel import SnrSpec
from .linalg import PIVOT_RTOL
from .modem import Constellation

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def inverse_batch(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Jordan inversion of a stack of square matrices.

    Returns ``(inv, ok)`` where ``ok[b]`` is False for instances whose
    pivot fell below the singularity threshold; their output is garbage
    and must be discarded by the caller.
    """
    a = np.asarray(a, dtype=np.complex128)
    batch, n, m = a.shape
    if n != m:
        raise ValueError(f"inverse requires square matrices, got {n}x{m}")
    tol = PIVOT_RTOL * np.max(np.abs(a), axis=(1, 2))
    ok = tol > 0.0

    aug = np.concatenate([a, np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape)], axis=2).copy()
    rows = np.arange(batch)
    for k in range(n):
        p = k + np.argmax(np.abs(aug[:, k:, k]), axis=1)
        rk = aug[rows, k].copy()
        aug[rows, k] = aug[rows, p]
        aug[rows, p] = rk
        piv = aug[:, k, k]
        bad = np.abs(piv) < tol
        ok &= ~bad
        piv = np.where(ok, piv, 1.0)  # keep dead instances finite
        aug[:, k, :] = aug[:, k, :] / piv[:, None]
        col = aug[:, :, k].copy()
        col[:, k] = 0.0
        aug -= col[:, :, None] * aug[:, k:k + 1, :]
    return np.ascontiguousarray(aug[:, :, n:]), ok


def pinv_batch(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normal-equation pseudo-inverse of a stack of full-column-rank matrices."""
    a = np.asarray(a, dtype=np.complex128)
    ah = a.conj().transpose(0, 2, 1)
    gram_inv, ok = inverse_batch(ah @ a)
    return gram_inv @ ah, ok


def nulling_batch(h: np.ndarray, core: str, snr: SnrSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched nulling matrix and ordering metric; see ``detectors.nulling_matrix``."""
    if core == "zf":
        g, ok = pinv_batch(h)
        metric = np.sqrt(np.sum(np.abs(g) ** 2, axis=2))
        return g, metric, ok
    if core == "mmse":
        ah = h.conj().transpose(0, 2, 1)
        n_t = h.shape[2]
        d, ok = inverse_batch(ah @ h + np.eye(n_t) * snr.noise_var)
        metric = np.diagonal(d, axis1=1, axis2=2).real.copy()
        return d @ ah, metric, ok
    raise ValueError(f"unknown nulling core {core!r}")


def slice_indices(z: np.ndarray, c: Constellation) -> np.ndarray:
    """Nearest-point indices for an array of soft symbols (first index on ties)."""
    return np.argmin(np.abs(z[..., None] - c.points), axis=-1)


def transmit_batch(h: np.ndarray, x: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Batched ``y = H x + n`` over instance-stacked arrays."""
    return np.einsum("bij,bj->bi", h, x) + noise


def linear_indices_batch(
    h: np.ndarray, y: np.ndarray, core: str, snr: SnrSpec, c: Constellation
) -> tuple[np.ndarray, np.ndarray]:
    """Batched linear detection, returning point indices and a validity mask."""
    g, _, ok = nulling_batch(h, core, snr)
    z = np.einsum("bij,bj->bi", g, y)
    return slice_indices(z, c), ok


def vblast_indices_batch(
    h: np.ndarray,
    y: np.ndarray,
    core: str,
    iterations: int,
    snr: SnrSpec,
    c: Constellation,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched truncated V-BLAST.

    Returns ``(indices, orders, ok)``: detected point indices per original
    stream, the per-instance detection order (original stream indices,
    shape ``(batch, iterations)``), and the validity mask.
    """
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    batch, n_r, n_t = h.shape
    if iterations > n_t - 1:
        raise ValueError(f"iterations {iterations} exceeds n_t - 1 = {n_t - 1}")

    rows = np.arange(batch)
    active = np.broadcast_to(np.arange(n_t), (batch, n_t)).copy()  # ascending per row
    h_cur = h.copy()
    y_cur = y.copy()
    out = np.zeros((batch, n_t), dtype=np.int64)
    orders = np.zeros((batch, iterations), dtype=np.int64)
    ok = np.ones(batch, dtype=bool)

    for it in range(iterations):
        g, metric, ok_i = nulling_batch(h_cur, core, snr)
        ok &= ok_i
        j = np.argmin(metric, axis=1)  # first minimum -> lowest original index
        k = active[rows, j]
        orders[:, it] = k
        w = g[rows, j]  # (batch, n_r)
        z = np.sum(w * y_cur, axis=1)
        sidx = slice_indices(z, c)
        out[rows, k] = sidx
        h_col = np.take_along_axis(h_cur, j[:, None, None], axis=2)[:, :, 0]
        y_cur = y_cur - h_col * c.points[sidx][:, None]

        n_act = h_cur.shape[2]
        grid = np.broadcast_to(np.arange(n_act), (batch, n_act))
        keep = grid[grid != j[:, None]].reshape(batch, n_act - 1)
        h_cur = np.take_along_axis(h_cur, keep[:, None, :], axis=2)
        active = np.take_along_axis(active, keep, axis=1)

    if h_cur.shape[2] > 0:
        g, _, ok_f = nulling_batch(h_cur, core, snr)
        ok &= ok_f
        z = np.einsum("bij,bj->bi", g, y_cur)
        sidx = slice_indices(z, c)
        np.put_along_axis(out, active, sidx, axis=1)

    return out, orders, ok


def ml_indices_batch(
    h: np.ndarray, y: np.ndarray, cand_idx: np.ndarray, c: Constellation
) -> np.ndarray:
    """Batched exhaustive ML over precomputed candidate index vectors."""
    cand_sym = c.points[cand_idx]  # (P, n_t)
    hx = np.einsum("bij,pj->bpi", h, cand_sym)  # (batch, P, n_r)
    metric = np.sum(np.abs(y[:, None, :] - hx) ** 2, axis=2)
    best = np.argmin(metric, axis=1)
    return cand_idx[best]


def count_bit_errors(tx_idx: np.ndarray, rx_idx: np.ndarray) -> int:
    """Total differing Gray-label bits between two index arrays."""
    return int(_POPCOUNT[np.bitwise_xor(tx_idx, rx_idx)].sum())
