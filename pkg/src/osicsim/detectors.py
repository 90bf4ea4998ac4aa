"""MIMO detectors: ZF/MMSE linear, the OSIC V-BLAST loop, and an ML oracle.

The V-BLAST detector runs a configurable number of
ordering/nulling/slicing/cancellation iterations and then detects the
remaining streams jointly with the linear core. ``iterations = 0``
degenerates to the pure linear detector; ``iterations = n_t - 1`` is the
ordinary full V-BLAST.

Per iteration, on the current deflated channel ``H_i``:

* ordering: pick the undetected stream with the smallest metric, where the
  metric is the row norm of ``G = pinv(H_i)`` for the ZF core and the real
  diagonal of ``D = (H_i^H H_i + I * noise_var)^-1`` for the MMSE core
  (``G = D H_i^H``); ties go to the lowest original stream index;
* nulling: ``z = g_k . y_i`` with ``g_k`` the chosen row of ``G``;
* slicing: quantize ``z`` to the nearest constellation point;
* cancellation: subtract the sliced symbol's channel column from ``y_i``
  and remove that column from ``H_i``.

Cancellation removes the detected column physically (with an index map
back to original stream order) rather than zeroing it: a zeroed column
would make the deflated matrix rank deficient and the pseudo-inverse
undefined. The nulling matrix is recomputed from scratch on every
deflation; no rank-one update shortcuts are used, so measured cost scales
the way the recomputing algorithm is specified to.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .channel import SnrSpec
from .linalg import (
    RankDeficiencyError,
    SingularMatrixError,
    hermitian,
    inverse,
    pinv,
    row_norms,
)
from .modem import Constellation, slice_index, slice_symbol

NULLING_CORES = ("zf", "mmse")

# exhaustive-search guard for ml_detect: at most 2**16 candidate vectors
ML_MAX_SEARCH_BITS = 16


class SearchSpaceError(ValueError):
    """Raised when the ML search space exceeds the exhaustive-search bound."""


@dataclass(frozen=True)
class DetectorSpec:
    """Which nulling core to use and how many cancellation iterations to run."""

    core: str
    iterations: int

    def __post_init__(self):
        if self.core not in NULLING_CORES:
            raise ValueError(f"unknown nulling core {self.core!r}, expected one of {NULLING_CORES}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be non-negative, got {self.iterations}")


@dataclass
class DetectionTrace:
    """Detection output plus the per-iteration bookkeeping of the OSIC loop."""

    order: list[int] = field(default_factory=list)
    z_values: list[complex] = field(default_factory=list)
    symbols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.complex128))


def nulling_matrix(h, core: str, snr: SnrSpec):
    """Nulling matrix ``G`` and the stream-ordering metric for one channel.

    ZF: ``G = pinv(h)``, metric = row norms of ``G`` (smaller = stronger
    stream). MMSE: ``D = (h^H h + I * noise_var)^-1``, ``G = D h^H``,
    metric = real diagonal of ``D``. The imaginary part of ``diag(D)`` is
    discarded; ``D`` is Hermitian in exact arithmetic.

    Raises :class:`RankDeficiencyError` when ``h`` lacks full column rank.
    """
    h = np.asarray(h, dtype=np.complex128)
    if core == "zf":
        g = pinv(h)
        return g, row_norms(g)
    if core == "mmse":
        hh = hermitian(h)
        n_t = h.shape[1]
        try:
            d = inverse(hh @ h + np.eye(n_t) * snr.noise_var)
        except SingularMatrixError as exc:
            raise RankDeficiencyError(f"regularized Gram matrix is singular: {exc}") from exc
        return d @ hh, np.diag(d).real.copy()
    raise ValueError(f"unknown nulling core {core!r}, expected one of {NULLING_CORES}")


def linear_detect(h, y, core: str, snr: SnrSpec, c: Constellation) -> np.ndarray:
    """One-shot linear detection: slice every entry of ``G @ y``."""
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128).ravel()
    if y.size != h.shape[0]:
        raise ValueError(f"dimension mismatch: y has {y.size} entries, channel has {h.shape[0]} rows")
    g, _ = nulling_matrix(h, core, snr)
    z = g @ y
    return np.array([slice_symbol(zi, c) for zi in z], dtype=np.complex128)


def vblast_detect(h, y, spec: DetectorSpec, snr: SnrSpec, c: Constellation) -> DetectionTrace:
    """Truncated V-BLAST: ``spec.iterations`` OSIC rounds, then linear detection.

    Returns a :class:`DetectionTrace` whose ``order`` lists the original
    indices of the successively detected streams and whose ``symbols`` holds
    the full estimate, assembled in original stream order.
    """
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128).ravel()
    n_r, n_t = h.shape
    if y.size != n_r:
        raise ValueError(f"dimension mismatch: y has {y.size} entries, channel has {n_r} rows")
    if spec.iterations > n_t - 1:
        raise ValueError(f"iterations {spec.iterations} exceeds n_t - 1 = {n_t - 1}")

    active = list(range(n_t))  # original indices of undetected streams, ascending
    h_cur = h.copy()
    y_cur = y.copy()
    trace = DetectionTrace(symbols=np.zeros(n_t, dtype=np.complex128))

    for _ in range(spec.iterations):
        g, metric = nulling_matrix(h_cur, spec.core, snr)
        j = int(np.argmin(metric))  # first minimum -> lowest original index on ties
        k = active[j]
        z = complex(g[j] @ y_cur)
        s = slice_symbol(z, c)
        trace.order.append(k)
        trace.z_values.append(z)
        trace.symbols[k] = s
        y_cur = y_cur - h_cur[:, j] * s
        h_cur = np.delete(h_cur, j, axis=1)
        active.pop(j)

    if active:
        g, _ = nulling_matrix(h_cur, spec.core, snr)
        z_rem = g @ y_cur
        for j, k in enumerate(active):
            trace.symbols[k] = slice_symbol(complex(z_rem[j]), c)

    return trace


def ml_candidates(n_t: int, c: Constellation) -> np.ndarray:
    """All ``|C|**n_t`` candidate point-index vectors in lexicographic order."""
    m = len(c.points)
    if n_t * c.bits_per_symbol > ML_MAX_SEARCH_BITS:
        raise SearchSpaceError(
            f"{m}**{n_t} candidates exceed the exhaustive bound of 2**{ML_MAX_SEARCH_BITS}"
        )
    return np.array(list(product(range(m), repeat=n_t)), dtype=np.int64)


def ml_detect(h, y, c: Constellation) -> np.ndarray:
    """Exhaustive maximum-likelihood detection (oracle for small systems).

    Minimises ``||y - h x||^2`` over every candidate symbol vector; ties go
    to the lowest candidate index in lexicographic stream order.
    """
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128).ravel()
    n_t = h.shape[1]
    cand_idx = ml_candidates(n_t, c)
    cand_sym = c.points[cand_idx]  # (P, n_t)
    residual = y[None, :] - cand_sym @ h.T  # (P, n_r)
    metric = np.sum(np.abs(residual) ** 2, axis=1)
    best = int(np.argmin(metric))
    return cand_sym[best].copy()
