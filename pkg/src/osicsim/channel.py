"""Per-subcarrier Rayleigh flat-fading MIMO channel, AWGN and the SNR convention.

SNR convention
--------------
Transmit symbols have unit average energy per antenna and the noise at each
receive antenna is circularly-symmetric complex Gaussian with variance
``noise_var = 1 / snr_linear``. Under this normalisation the MMSE
regularizer ``I / SNR`` equals ``I * noise_var`` exactly, so the linear SNR
value is used literally by the detectors.

Randomness
----------
Every draw comes from a counter-based Philox4x64 generator keyed by the
pair ``(seed, stream)``; identical keys reproduce identical sequences
regardless of scheduling, which is what makes parallel Monte Carlo cells
deterministic. Gaussians are produced by the Box-Muller transform over the
generator's uniforms, so the whole sampling chain is specified by
``philox4x64 + box-muller`` and can be replicated outside this package.

The per-subcarrier model is K independent flat-fading MIMO channels; no
time-domain OFDM processing (IFFT, cyclic prefix) is performed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RNG_ALGORITHM = "philox4x64+box-muller"


@dataclass(frozen=True)
class SnrSpec:
    """Operating signal-to-noise ratio in dB, with derived linear forms."""

    snr_db: float

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def noise_var(self) -> float:
        return 1.0 / self.snr_linear


@dataclass(frozen=True)
class ChannelRealization:
    """One flat-fading MIMO channel draw for subcarrier ``subcarrier``."""

    h: np.ndarray
    subcarrier: int = 0


def link_snr(snr_db: float, n_t: int) -> SnrSpec:
    """Per-stream link spec for a nominal operating SNR.

    The nominal SNR axis used by sweeps, policies and calibration tables
    measures total received signal power over noise power at each receive
    antenna. With unit-energy symbols on ``n_t`` transmit antennas and
    unit-variance channel entries, the received signal power per antenna
    is ``n_t``, so the per-stream spec the detector sees is derated by
    ``10 log10(n_t)`` dB. The iteration-threshold calibration this package
    reproduces only lines up under this normalisation; the per-stream
    alternative shifts every BER curve left by the same offset.
    """
    if n_t < 1:
        raise ValueError(f"n_t must be positive, got {n_t}")
    return SnrSpec(snr_db - 10.0 * math.log10(n_t))


def make_stream(seed: int, stream: int) -> np.random.Generator:
    """Generator for an independent, scheduling-free random stream.

    Identical ``(seed, stream)`` pairs reproduce identical sequences;
    distinct pairs give statistically independent streams.
    """
    if not (0 <= seed < 2**64 and 0 <= stream < 2**64):
        raise ValueError("seed and stream must be unsigned 64-bit integers")
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """N(0, 1) samples via the Box-Muller transform over ``rng`` uniforms."""
    n = int(np.prod(shape)) if shape else 1
    pairs = (n + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1], keeps log finite
    u2 = rng.random(pairs)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:n].reshape(shape)


def complex_normal(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    """CN(0, var) samples: each component is N(0, var/2)."""
    z = standard_normal(rng, tuple(shape) + (2,))
    scale = np.sqrt(var / 2.0)
    return scale * (z[..., 0] + 1j * z[..., 1])


def gen_channel(n_r: int, n_t: int, rng: np.random.Generator, subcarrier: int = 0) -> ChannelRealization:
    """Draw an ``n_r x n_t`` Rayleigh channel: entries i.i.d. CN(0, 1).

    Requires ``n_r >= n_t >= 1`` so the detectors can separate all streams.
    """
    if not (n_r >= n_t >= 1):
        raise ValueError(f"invalid dimensions: need n_r >= n_t >= 1, got n_r={n_r}, n_t={n_t}")
    return ChannelRealization(complex_normal(rng, (n_r, n_t), 1.0), subcarrier)


def gen_channel_batch(count: int, n_r: int, n_t: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent channel draws, shape ``(count, n_r, n_t)``."""
    if not (n_r >= n_t >= 1):
        raise ValueError(f"invalid dimensions: need n_r >= n_t >= 1, got n_r={n_r}, n_t={n_t}")
    return complex_normal(rng, (count, n_r, n_t), 1.0)


def gen_noise(n_r: int, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """AWGN vector of length ``n_r`` with per-entry variance ``noise_var``."""
    if noise_var < 0:
        raise ValueError(f"noise variance must be non-negative, got {noise_var}")
    if noise_var == 0:
        return np.zeros(n_r, dtype=np.complex128)
    return complex_normal(rng, (n_r,), noise_var)


def gen_noise_batch(count: int, n_r: int, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """``count`` AWGN vectors, shape ``(count, n_r)``."""
    if noise_var < 0:
        raise ValueError(f"noise variance must be non-negative, got {noise_var}")
    if noise_var == 0:
        return np.zeros((count, n_r), dtype=np.complex128)
    return complex_normal(rng, (count, n_r), noise_var)


def random_bits(rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform payload bits as a uint8 array."""
    return rng.integers(0, 2, count, dtype=np.uint8)


def transmit(h, x, noise) -> np.ndarray:
    """Received vector ``h @ x + noise`` for one channel use."""
    if isinstance(h, ChannelRealization):
        h = h.h
    h = np.asarray(h, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128).ravel()
    noise = np.asarray(noise, dtype=np.complex128).ravel()
    n_r, n_t = h.shape
    if x.size != n_t:
        raise ValueError(f"dimension mismatch: channel expects {n_t} transmit symbols, got {x.size}")
    if noise.size != n_r:
        raise ValueError(f"dimension mismatch: channel produces {n_r} outputs, noise has {noise.size}")
    return h @ x + noise
