"""Self-interference waveform sources and sample statistics.

Two sources are provided: a proper (second-order circular) white complex
Gaussian generator, which matches the critically-sampled input assumed by the
closed-form analysis, and an oversampled WLAN-style OFDM generator used for
waveform-level runs. Both are deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .units import dbm_to_mw

_CONSTELLATIONS = {
    "QPSK": np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0),
    "16QAM": None,  # built lazily below
    "64QAM": None,
}


def _square_qam(levels: int) -> np.ndarray:
    amp = np.arange(-(levels - 1), levels, 2, dtype=float)
    pts = (amp[:, None] + 1j * amp[None, :]).ravel()
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


_CONSTELLATIONS["16QAM"] = _square_qam(4)
_CONSTELLATIONS["64QAM"] = _square_qam(8)


@dataclass(frozen=True)
class ComplexSequence:
    """A stream of complex baseband samples with sample-rate metadata."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def power_mw(self) -> float:
        """Mean sample power in linear mW."""
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class WaveformSpec:
    """OFDM waveform parameters (defaults follow 802.11-style numerology)."""

    subcarriers: int = 64
    null_subcarriers: int = 14
    cyclic_prefix: int = 16
    oversampling: int = 4
    bandwidth_hz: float = 20e6
    constellation: str = "16QAM"
    target_power_dbm: float = 0.0

    def __post_init__(self):
        if self.subcarriers < 1:
            raise ValueError("subcarriers must be positive")
        if not 0 <= self.null_subcarriers < self.subcarriers:
            raise ValueError("null_subcarriers must be in [0, subcarriers)")
        if self.cyclic_prefix < 0:
            raise ValueError("cyclic_prefix must be nonnegative")
        if self.oversampling < 1:
            raise ValueError("oversampling must be positive")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.constellation not in _CONSTELLATIONS:
            raise ValueError(f"unsupported constellation {self.constellation!r}")

    @property
    def symbol_duration_s(self) -> float:
        return (self.subcarriers + self.cyclic_prefix) / self.bandwidth_hz

    @property
    def samples_per_symbol(self) -> int:
        return (self.subcarriers + self.cyclic_prefix) * self.oversampling


@dataclass(frozen=True)
class SignalStats:
    """Sample moments of a complex sequence (powers in linear mW)."""

    variance: float
    pseudo_variance: complex
    abs_moment4: float
    abs_moment6: float
    sample_count: int


def gen_proper_gaussian(n: int, sigma_x2: float, seed: int,
                        sample_rate_hz: float = 20e6) -> ComplexSequence:
    """I.i.d. zero-mean proper white complex Gaussian samples.

    Real and imaginary parts are independent with variance ``sigma_x2 / 2``
    each, so the total power is ``sigma_x2`` and the pseudo-variance is zero.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if sigma_x2 <= 0:
        raise ValueError("sigma_x2 must be positive")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(sigma_x2 / 2.0)
    samples = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return ComplexSequence(samples, sample_rate_hz)


def active_subcarrier_bins(spec: WaveformSpec) -> np.ndarray:
    """FFT bin indices (0..K-1) carrying data symbols.

    Nulls are placed symmetrically about DC: the DC bin itself plus the
    largest-|frequency| bins at the band edges (Nyquist first, then
    alternating negative/positive edges).
    """
    k = spec.subcarriers
    half = k // 2
    order = [-half] if k % 2 == 0 else []
    for m in range(half - (1 - k % 2), 0, -1):
        order.append(m)
        order.append(-m)
    if spec.null_subcarriers:
        nulls = {0, *order[: spec.null_subcarriers - 1]}
    else:
        nulls = set()
    active = np.array(sorted(m for m in range(-half, half) if m not in nulls))
    return active % k


def gen_ofdm_waveform(spec: WaveformSpec, num_symbols: int, seed: int) -> ComplexSequence:
    """Oversampled cyclic-prefixed OFDM waveform.

    Random constellation points are placed on the active subcarriers, the
    band edges are zero-padded to length K*K_os and transformed with an
    inverse DFT (spectral interpolation), and a cyclic prefix of
    K_cp*K_os samples is prepended per symbol. The whole waveform is then
    scaled so its mean power equals ``target_power_dbm`` exactly.
    """
    if num_symbols < 1:
        raise ValueError("num_symbols must be >= 1")
    points = _CONSTELLATIONS[spec.constellation]
    rng = np.random.default_rng(seed)

    k, kos = spec.subcarriers, spec.oversampling
    nfft = k * kos
    active = active_subcarrier_bins(spec)
    # map baseband bins to the zero-padded grid: negative bins wrap to the top
    grid_bins = np.where(active < k // 2, active, active + (nfft - k))

    syms = rng.choice(points, size=(num_symbols, active.size))
    freq = np.zeros((num_symbols, nfft), dtype=np.complex128)
    freq[:, grid_bins] = syms
    time = np.fft.ifft(freq, axis=1) * nfft / np.sqrt(k)

    ncp = spec.cyclic_prefix * kos
    if ncp:
        time = np.concatenate([time[:, -ncp:], time], axis=1)
    samples = time.ravel()

    target = dbm_to_mw(spec.target_power_dbm)
    samples = samples * np.sqrt(target / np.mean(np.abs(samples) ** 2))
    return ComplexSequence(samples, spec.bandwidth_hz * kos)


def estimate_stats(seq: ComplexSequence) -> SignalStats:
    """Sample-average moment estimates after mean removal."""
    x = seq.samples
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    xc = x - np.mean(x)
    a2 = np.abs(xc) ** 2
    return SignalStats(
        variance=float(np.mean(a2)),
        pseudo_variance=complex(np.mean(xc ** 2)),
        abs_moment4=float(np.mean(a2 ** 2)),
        abs_moment6=float(np.mean(a2 ** 3)),
        sample_count=x.size,
    )
