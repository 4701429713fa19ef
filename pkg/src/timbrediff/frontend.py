"""Audio ingestion and shared DSP primitives.

Everything downstream (timbre metrics, spectral embeddings) runs on the
types in this module: mono clips, one-sided power spectrograms, Bark-band
summaries and per-band analytic envelopes.  All functions are pure and
deterministic; identical inputs give bit-identical outputs.
"""

import struct
from dataclasses import dataclass

import numpy as np

# Canonical processing rate used by the pipeline; clips are resampled to
# this on ingest so the filterbank layout is fixed.
CANONICAL_RATE = 16000

# One Bark band per pair of adjacent edges (Zwicker critical bands).
BARK_EDGES_HZ = np.array([
    20, 100, 200, 300, 400, 510, 630, 770, 920, 1080, 1270, 1480, 1720,
    2000, 2320, 2700, 3150, 3700, 4400, 5300, 6400, 7700, 9500, 12000,
    15500,
], dtype=np.float64)

DEFAULT_FRAME_LEN = 1024
DEFAULT_HOP = 512

_PCM16_SCALE = 32768.0
_RESAMPLE_HALF_TAPS = 32  # 64-tap windowed-sinc kernel
_RESAMPLE_KAISER_BETA = 8.0


class WavError(Exception):
    """Base class for WAV file problems."""


class WavHeaderError(WavError):
    """File is not a parseable RIFF/WAVE container."""


class UnsupportedWavError(WavError):
    """Valid WAV, but a codec/bit depth this reader does not handle."""


class EmptyBandError(ValueError):
    """A requested frequency band contains no spectral bins."""


@dataclass(frozen=True)
class AudioClip:
    """Mono sample buffer plus its sample rate.

    Samples are float64 with nominal range [-1, 1]; the range is not
    enforced so that gain experiments stay representable.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("clip samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("clip samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    """One-sided power spectrogram: power[frame, bin], bin_freqs in Hz."""

    power: np.ndarray
    bin_freqs: np.ndarray
    frame_rate: float

    def __post_init__(self):
        power = np.asarray(self.power, dtype=np.float64)
        freqs = np.asarray(self.bin_freqs, dtype=np.float64)
        if power.ndim != 2 or power.shape[1] != freqs.size:
            raise ValueError("power must be [frames x bins] matching bin_freqs")
        if not np.all(np.isfinite(power)) or np.any(power < 0):
            raise ValueError("power values must be finite and nonnegative")
        if freqs.size < 2 or np.any(np.diff(freqs) <= 0) or freqs[0] != 0:
            raise ValueError("bin_freqs must increase strictly from 0")
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "bin_freqs", freqs)

    @property
    def nyquist(self) -> float:
        return float(self.bin_freqs[-1])


@dataclass(frozen=True)
class BandDecomposition:
    """Per-band analytic envelopes: band_envelopes[band, sample]."""

    band_edges: tuple
    band_envelopes: np.ndarray

    def __post_init__(self):
        env = np.asarray(self.band_envelopes, dtype=np.float64)
        if env.ndim != 2 or env.shape[0] != len(self.band_edges):
            raise ValueError("band_envelopes must be [bands x samples]")
        if np.any(env < 0) or not np.all(np.isfinite(env)):
            raise ValueError("envelopes must be finite and nonnegative")
        lows = [lo for lo, _ in self.band_edges]
        highs = [hi for _, hi in self.band_edges]
        if any(hi <= lo for lo, hi in self.band_edges):
            raise ValueError("band edges must satisfy lo < hi")
        if any(l2 < h1 for h1, l2 in zip(highs, lows[1:])):
            raise ValueError("bands must be ordered with non-overlapping interiors")
        object.__setattr__(self, "band_edges", tuple(map(tuple, self.band_edges)))
        object.__setattr__(self, "band_envelopes", env)


# ---------------------------------------------------------------------------
# WAV I/O (RIFF, PCM16 and IEEE float32)
# ---------------------------------------------------------------------------

def load_wav(path) -> AudioClip:
    """Read a PCM16 or IEEE float32 WAV file as a mono clip.

    Multichannel input is averaged to mono.  PCM16 value v maps to
    v / 32768, so samples land in [-1, 1).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavHeaderError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    offset = 12
    while offset + 8 <= len(raw):
        chunk_id = raw[offset:offset + 4]
        (size,) = struct.unpack_from("<I", raw, offset + 4)
        body = raw[offset + 8:offset + 8 + size]
        if chunk_id == b"fmt ":
            if size < 16 or len(body) < 16:
                raise WavHeaderError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < size:
                raise WavHeaderError(f"{path}: data chunk shorter than declared")
            data = body
        offset += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise WavHeaderError(f"{path}: missing fmt or data chunk")
    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels < 1 or rate <= 0:
        raise WavHeaderError(f"{path}: invalid channel count or sample rate")

    if audio_format == 1 and bits == 16:
        values = np.frombuffer(data[: len(data) - len(data) % 2], dtype="<i2")
        samples = values.astype(np.float64) / _PCM16_SCALE
    elif audio_format == 3 and bits == 32:
        values = np.frombuffer(data[: len(data) - len(data) % 4], dtype="<f4")
        samples = values.astype(np.float64)
    else:
        raise UnsupportedWavError(
            f"{path}: unsupported codec (format tag {audio_format}, {bits}-bit); "
            "only PCM16 and IEEE float32 are readable"
        )

    usable = samples.size - samples.size % channels
    samples = samples[:usable].reshape(-1, channels).mean(axis=1)
    if samples.size == 0:
        raise WavHeaderError(f"{path}: no audio frames")
    return AudioClip(samples, rate)


def save_wav(path, clip: AudioClip, sample_format: str = "pcm16") -> None:
    """Write a mono WAV file, either 'pcm16' or 'float32'."""
    if sample_format == "pcm16":
        scaled = np.round(clip.samples * _PCM16_SCALE)
        payload = np.clip(scaled, -32768, 32767).astype("<i2").tobytes()
        audio_format, bits = 1, 16
    elif sample_format == "float32":
        payload = clip.samples.astype("<f4").tobytes()
        audio_format, bits = 3, 32
    else:
        raise ValueError(f"unknown sample_format {sample_format!r}")

    block_align = bits // 8
    header = b"".join([
        b"RIFF",
        struct.pack("<I", 36 + len(payload)),
        b"WAVE",
        b"fmt ",
        struct.pack("<IHHIIHH", 16, audio_format, 1, clip.sample_rate,
                    clip.sample_rate * block_align, block_align, bits),
        b"data",
        struct.pack("<I", len(payload)),
    ])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

def _kaiser_taper(u: np.ndarray) -> np.ndarray:
    """Kaiser window evaluated at normalized offsets u in [-1, 1]."""
    out = np.zeros_like(u)
    inside = np.abs(u) <= 1.0
    out[inside] = (np.i0(_RESAMPLE_KAISER_BETA * np.sqrt(1.0 - u[inside] ** 2))
                   / np.i0(_RESAMPLE_KAISER_BETA))
    return out


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited resampling with a 64-tap Kaiser-windowed sinc kernel.

    Duration is preserved to within one output sample.  Same-rate input is
    returned unchanged.
    """
    if int(target_rate) <= 0:
        raise ValueError("target_rate must be positive")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return clip

    src = clip.samples
    n_out = max(1, int(round(src.size * target_rate / clip.sample_rate)))
    step = clip.sample_rate / target_rate           # input samples per output sample
    cutoff = min(1.0, target_rate / clip.sample_rate)
    taps = np.arange(-_RESAMPLE_HALF_TAPS + 1, _RESAMPLE_HALF_TAPS + 1)
    padded = np.concatenate([
        np.zeros(_RESAMPLE_HALF_TAPS), src, np.zeros(_RESAMPLE_HALF_TAPS),
    ])

    out = np.empty(n_out)
    chunk = 65536
    for start in range(0, n_out, chunk):
        idx_out = np.arange(start, min(start + chunk, n_out))
        pos = idx_out * step
        base = np.floor(pos).astype(np.int64)
        offsets = taps[None, :] - (pos - base)[:, None]
        kernel = cutoff * np.sinc(cutoff * offsets)
        kernel *= _kaiser_taper(offsets / _RESAMPLE_HALF_TAPS)
        kernel /= kernel.sum(axis=1, keepdims=True)  # unity DC gain per sample
        gathered = padded[base[:, None] + taps[None, :] + _RESAMPLE_HALF_TAPS]
        out[idx_out] = (gathered * kernel).sum(axis=1)
    return AudioClip(out, target_rate)


# ---------------------------------------------------------------------------
# Spectral analysis
# ---------------------------------------------------------------------------

def stft_power(clip: AudioClip, frame_len: int = DEFAULT_FRAME_LEN,
               hop: int = DEFAULT_HOP) -> Spectrogram:
    """One-sided Hann-windowed power spectrogram.

    bin_freqs[i] = i * sample_rate / frame_len; power is the raw squared
    magnitude of the one-sided FFT (no window-gain compensation).
    """
    if frame_len < 2 or frame_len & (frame_len - 1):
        raise ValueError("frame_len must be a power of two")
    if not 1 <= hop <= frame_len:
        raise ValueError("hop must satisfy 1 <= hop <= frame_len")
    if clip.samples.size < frame_len:
        raise ValueError(
            f"clip has {clip.samples.size} samples, shorter than frame_len {frame_len}"
        )
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(frame_len) / frame_len)
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, frame_len)[::hop]
    spectrum = np.fft.rfft(frames * window, axis=1)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    bin_freqs = np.arange(frame_len // 2 + 1) * (clip.sample_rate / frame_len)
    return Spectrogram(power, bin_freqs, clip.sample_rate / hop)


def bark_band_edges(sample_rate: int) -> list:
    """Usable Bark band (lo, hi) pairs for a sample rate.

    Bands whose lower edge reaches the Nyquist frequency are dropped and
    the band containing Nyquist is truncated to end there.
    """
    nyquist = sample_rate / 2.0
    edges = []
    for lo, hi in zip(BARK_EDGES_HZ[:-1], BARK_EDGES_HZ[1:]):
        if lo >= nyquist:
            break
        edges.append((float(lo), float(min(hi, nyquist))))
    return edges


def bark_band_powers(spec: Spectrogram) -> np.ndarray:
    """Per-frame mean power in each usable Bark band, [frames x bands].

    A bin at frequency f belongs to the band with lo <= f < hi; the bin at
    exactly Nyquist joins the band containing it.  Bins below the first
    edge (20 Hz) are excluded, which rules out DC.
    """
    n_bands = len(bark_band_edges(int(round(2 * spec.nyquist))))
    band_index = np.searchsorted(BARK_EDGES_HZ, spec.bin_freqs, side="right") - 1
    out = np.zeros((spec.power.shape[0], n_bands))
    for band in range(n_bands):
        members = band_index == band
        if members.any():
            out[:, band] = spec.power[:, members].mean(axis=1)
    return out


def band_envelopes(clip: AudioClip, band_edges) -> BandDecomposition:
    """Analytic-signal magnitude envelopes of FFT-isolated bands.

    Per band the full-length spectrum is zeroed outside [lo, hi), one-sided
    (positive frequencies doubled) and inverse-transformed; the envelope is
    the magnitude of the resulting analytic signal.  A bin at exactly
    Nyquist is kept, unscaled, when the band reaches Nyquist.
    """
    n = clip.samples.size
    nyquist = clip.sample_rate / 2.0
    for lo, hi in band_edges:
        if not 0 < lo < hi or hi > nyquist:
            raise ValueError(f"band ({lo}, {hi}) must lie within (0, {nyquist}]")

    spectrum = np.fft.fft(clip.samples)
    k_pos = np.arange(1, n // 2 + 1)               # positive-frequency bins
    freqs = k_pos * (clip.sample_rate / n)
    has_nyquist_bin = n % 2 == 0

    masked = np.zeros((len(band_edges), n), dtype=complex)
    for row, (lo, hi) in enumerate(band_edges):
        members = (freqs >= lo) & (freqs < hi)
        if hi >= nyquist:
            members |= freqs == nyquist
        if not members.any():
            raise EmptyBandError(f"band {lo}-{hi} Hz contains no spectral bins")
        bins = k_pos[members]
        scale = np.full(bins.size, 2.0)
        if has_nyquist_bin:
            scale[bins == n // 2] = 1.0
        masked[row, bins] = spectrum[bins] * scale

    envelopes = np.abs(np.fft.ifft(masked, axis=1))
    return BandDecomposition(tuple(band_edges), envelopes)
