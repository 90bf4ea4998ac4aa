"""Bit/symbol mapping for QPSK and 16-QAM, and the constellation slicer.

Both constellations are Gray-labelled and normalised to unit average
energy. Points are stored in label order, so the index of a point equals
the integer value of its bit label (most significant bit first); this
makes modulation a table lookup and demodulation an ``argmin`` plus a
label read-off.

Fixed labelings:

* QPSK: bits ``b1 b0`` map to ``((1 - 2*b1) + (1 - 2*b0) * 1j) / sqrt(2)``,
  i.e. ``00 -> (+1+1j)/sqrt(2)``, ``01 -> (+1-1j)/sqrt(2)``,
  ``10 -> (-1+1j)/sqrt(2)``, ``11 -> (-1-1j)/sqrt(2)``.
* 16-QAM: independent per-axis 2-bit Gray map
  ``{00: -3, 01: -1, 11: +1, 10: +3} / sqrt(10)``; the in-phase level comes
  from the high bit pair and the quadrature level from the low pair.

Slicing ties are broken by the lowest point index; with continuous noise
this is a measure-zero event and exists only to pin determinism.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Per-axis Gray code for 16-QAM: adjacent levels differ in one bit.
_GRAY_PAIR_LEVELS = {(0, 0): -3.0, (0, 1): -1.0, (1, 1): 1.0, (1, 0): 3.0}


@dataclass(frozen=True)
class Constellation:
    """A modulation alphabet with Gray bit labels and unit average energy."""

    name: str
    points: np.ndarray
    bits_per_symbol: int
    bit_labels: np.ndarray = field(repr=False)  # (M, bits_per_symbol) uint8

    def __post_init__(self):
        m = len(self.points)
        if m != 2 ** self.bits_per_symbol:
            raise ValueError("constellation size must be 2**bits_per_symbol")
        energy = float(np.mean(np.abs(self.points) ** 2))
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"constellation mean energy {energy} is not 1")
        if len(np.unique(self.points)) != m:
            raise ValueError("constellation points must be distinct")


def _labels(m: int, bits: int) -> np.ndarray:
    out = np.zeros((m, bits), dtype=np.uint8)
    for idx in range(m):
        for b in range(bits):
            out[idx, b] = (idx >> (bits - 1 - b)) & 1
    return out


def _make_qpsk() -> Constellation:
    pts = np.zeros(4, dtype=np.complex128)
    for idx in range(4):
        b1, b0 = (idx >> 1) & 1, idx & 1
        pts[idx] = ((1 - 2 * b1) + (1 - 2 * b0) * 1j) / np.sqrt(2.0)
    return Constellation("qpsk", pts, 2, _labels(4, 2))


def _make_qam16() -> Constellation:
    pts = np.zeros(16, dtype=np.complex128)
    for idx in range(16):
        b3, b2, b1, b0 = (idx >> 3) & 1, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1
        i_level = _GRAY_PAIR_LEVELS[(b3, b2)]
        q_level = _GRAY_PAIR_LEVELS[(b1, b0)]
        pts[idx] = (i_level + 1j * q_level) / np.sqrt(10.0)
    return Constellation("qam16", pts, 4, _labels(16, 4))


QPSK = _make_qpsk()
QAM16 = _make_qam16()

_CONSTELLATIONS = {"qpsk": QPSK, "qam16": QAM16}


def get_constellation(name: str) -> Constellation:
    try:
        return _CONSTELLATIONS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown modulation {name!r}, expected one of {sorted(_CONSTELLATIONS)}") from None


def bits_to_indices(bits, c: Constellation) -> np.ndarray:
    """Pack groups of ``bits_per_symbol`` bits into point indices (MSB first)."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size % c.bits_per_symbol:
        raise ValueError(
            f"bit count {bits.size} is not divisible by bits_per_symbol {c.bits_per_symbol}"
        )
    groups = bits.reshape(-1, c.bits_per_symbol).astype(np.int64)
    weights = 1 << np.arange(c.bits_per_symbol - 1, -1, -1)
    return groups @ weights


def indices_to_bits(indices, c: Constellation) -> np.ndarray:
    """Inverse of :func:`bits_to_indices`; returns a flat uint8 bit array."""
    indices = np.asarray(indices, dtype=np.int64).ravel()
    return c.bit_labels[indices].ravel()


def modulate(bits, c: Constellation) -> np.ndarray:
    """Map a Gray-labelled bit sequence to constellation symbols.

    The bit count must be a multiple of ``c.bits_per_symbol``; an empty
    sequence yields an empty vector.
    """
    return c.points[bits_to_indices(bits, c)]


def slice_index(z: complex, c: Constellation) -> int:
    """Index of the constellation point nearest to ``z`` (lowest index on ties)."""
    return int(np.argmin(np.abs(z - c.points)))


def slice_symbol(z: complex, c: Constellation) -> complex:
    """Quantize a soft estimate to the nearest constellation point."""
    return complex(c.points[slice_index(z, c)])


def demodulate(symbols, c: Constellation) -> np.ndarray:
    """Slice each symbol and emit its Gray label; inverse of :func:`modulate`."""
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    if symbols.size == 0:
        return np.zeros(0, dtype=np.uint8)
    idx = np.argmin(np.abs(symbols[:, None] - c.points[None, :]), axis=1)
    return indices_to_bits(idx, c)


def hamming_errors(a, b) -> int:
    """Number of differing positions between two equal-length bit sequences."""
    a = np.asarray(a, dtype=np.uint8).ravel()
    b = np.asarray(b, dtype=np.uint8).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return int(np.count_nonzero(a != b))
