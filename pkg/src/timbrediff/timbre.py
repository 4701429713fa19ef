"""The five timbre attribute metrics.

Each metric is a self-contained, gain-invariant formula over the shared
spectral frontend: scaling a clip by any positive constant leaves every
value unchanged (up to float roundoff).  Values are objective proxies for
the perceptual attributes, not calibrated psychoacoustic units.
"""

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .frontend import (
    AudioClip,
    Spectrogram,
    band_envelopes,
    bark_band_edges,
    bark_band_powers,
    stft_power,
)

SILENCE_POWER_FLOOR = 1e-10
LOUDNESS_EXPONENT = 0.23        # Stevens-law compressive exponent per band
SHARPNESS_KNEE_BAND = 14        # weighting grows above this Bark band
SHARPNESS_GROWTH = 0.171
BOOM_BAND_COUNT = 3             # Bark bands 1..3 cover 20-300 Hz
DEPTH_CUTOFF_HZ = 200.0
ROUGHNESS_MOD_BAND_HZ = (30.0, 150.0)
MIN_ROUGHNESS_DURATION = 0.25   # seconds

TIMBRE_CSV_HEADER = ["clip_id", "sharpness", "roughness", "boominess",
                     "brightness", "depth"]


class SilentClipError(ValueError):
    """Clip carries no measurable spectral energy."""


class ClipTooShortError(ValueError):
    """Clip is too short for the requested analysis."""


class TimbreAttribute(Enum):
    """The five attributes, in fixed index order."""

    SHARPNESS = 1
    ROUGHNESS = 2
    BOOMINESS = 3
    BRIGHTNESS = 4
    DEPTH = 5


ATTRIBUTE_NAMES = tuple(a.name.lower() for a in TimbreAttribute)
N_ATTRIBUTES = len(ATTRIBUTE_NAMES)


@dataclass(frozen=True)
class TimbreVector:
    """One metric value per attribute, in TimbreAttribute order."""

    sharpness: float
    roughness: float
    boominess: float
    brightness: float
    depth: float

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise ValueError("timbre values must be finite")
        if not 0.0 <= self.boominess <= 1.0:
            raise ValueError("boominess must lie in [0, 1]")
        if not 0.0 <= self.depth <= 1.0:
            raise ValueError("depth must lie in [0, 1]")
        if self.roughness < 0.0 or self.sharpness < 0.0:
            raise ValueError("roughness and sharpness must be nonnegative")
        if self.brightness <= 0.0:
            raise ValueError("brightness must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.sharpness, self.roughness, self.boominess,
                         self.brightness, self.depth], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "TimbreVector":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (N_ATTRIBUTES,):
            raise ValueError(f"expected {N_ATTRIBUTES} values, got shape {values.shape}")
        return cls(*map(float, values))


def _checked_spectrogram(clip: AudioClip) -> Spectrogram:
    spec = stft_power(clip)
    if spec.power.sum() <= SILENCE_POWER_FLOOR:
        raise SilentClipError("silent input: total framed power below threshold")
    return spec


def _specific_loudness(spec: Spectrogram) -> np.ndarray:
    """Compressed loudness per usable Bark band, from time-averaged power."""
    mean_band_power = bark_band_powers(spec).mean(axis=0)
    return mean_band_power ** LOUDNESS_EXPONENT


def _brightness(spec: Spectrogram) -> float:
    # Power-weighted mean of per-frame spectral centroids; weighting each
    # frame by its power collapses to one global centroid.
    total = spec.power.sum()
    return float((spec.power @ spec.bin_freqs).sum() / total)


def _sharpness(loudness: np.ndarray) -> float:
    bands = np.arange(1, loudness.size + 1, dtype=np.float64)
    weights = np.where(
        bands <= SHARPNESS_KNEE_BAND,
        1.0,
        np.exp(SHARPNESS_GROWTH * (bands - SHARPNESS_KNEE_BAND)),
    )
    denom = loudness.sum()
    if denom <= 0.0:
        raise SilentClipError("no energy inside the analysis bands")
    return float((loudness * weights * bands).sum() / denom)


def _boominess(loudness: np.ndarray) -> float:
    denom = loudness.sum()
    if denom <= 0.0:
        raise SilentClipError("no energy inside the analysis bands")
    return float(loudness[:BOOM_BAND_COUNT].sum() / denom)


def _depth(spec: Spectrogram) -> float:
    low = spec.bin_freqs < DEPTH_CUTOFF_HZ
    return float(spec.power[:, low].sum() / spec.power.sum())


def _roughness(clip: AudioClip, loudness: np.ndarray) -> float:
    edges = bark_band_edges(clip.sample_rate)
    envelopes = band_envelopes(clip, edges).band_envelopes

    # Rectangular 30-150 Hz band-pass of each envelope, via its spectrum.
    n = envelopes.shape[1]
    freqs = np.fft.rfftfreq(n, 1.0 / clip.sample_rate)
    lo, hi = ROUGHNESS_MOD_BAND_HZ
    keep = (freqs >= lo) & (freqs <= hi)
    env_spectrum = np.fft.rfft(envelopes, axis=1)
    env_spectrum[:, ~keep] = 0.0
    modulation = np.fft.irfft(env_spectrum, n=n, axis=1)

    mod_rms = np.sqrt((modulation ** 2).mean(axis=1))
    mod_index = mod_rms / (envelopes.mean(axis=1) + 1e-12)
    denom = loudness.sum()
    if denom <= 0.0:
        raise SilentClipError("no energy inside the analysis bands")
    return float((loudness * mod_index).sum() / denom)


def brightness(clip: AudioClip) -> float:
    """Power-weighted spectral centroid in Hz."""
    return _brightness(_checked_spectrogram(clip))


def sharpness(clip: AudioClip) -> float:
    """Loudness-weighted mean Bark band index, upper bands overweighted."""
    return _sharpness(_specific_loudness(_checked_spectrogram(clip)))


def boominess(clip: AudioClip) -> float:
    """Fraction of specific loudness in the lowest three Bark bands."""
    return _boominess(_specific_loudness(_checked_spectrogram(clip)))


def depth(clip: AudioClip) -> float:
    """Fraction of spectral power below 200 Hz."""
    return _depth(_checked_spectrogram(clip))


def roughness(clip: AudioClip) -> float:
    """Loudness-weighted 30-150 Hz modulation index of Bark-band envelopes."""
    if clip.duration < MIN_ROUGHNESS_DURATION:
        raise ClipTooShortError(
            f"roughness needs at least {MIN_ROUGHNESS_DURATION} s of audio"
        )
    spec = _checked_spectrogram(clip)
    return _roughness(clip, _specific_loudness(spec))


def compute_timbre_vector(clip: AudioClip) -> TimbreVector:
    """All five metrics from one pass over the clip."""
    if clip.duration < MIN_ROUGHNESS_DURATION:
        raise ClipTooShortError(
            f"timbre extraction needs at least {MIN_ROUGHNESS_DURATION} s of audio"
        )
    spec = _checked_spectrogram(clip)
    loudness = _specific_loudness(spec)
    return TimbreVector(
        sharpness=_sharpness(loudness),
        roughness=_roughness(clip, loudness),
        boominess=_boominess(loudness),
        brightness=_brightness(spec),
        depth=_depth(spec),
    )


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def write_timbre_csv(path, rows) -> None:
    """Write (clip_id, TimbreVector) pairs; values keep 9 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMBRE_CSV_HEADER)
        for clip_id, vec in rows:
            writer.writerow([clip_id] + [f"{v:.9g}" for v in vec.as_array()])


def read_timbre_csv(path) -> dict:
    """Read a timbre CSV back into {clip_id: TimbreVector}, preserving order."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TIMBRE_CSV_HEADER:
            raise ValueError(f"{path}: unexpected timbre CSV header {header}")
        for row in reader:
            if len(row) != len(TIMBRE_CSV_HEADER):
                raise ValueError(f"{path}: malformed row {row}")
            if row[0] in out:
                raise ValueError(f"{path}: duplicate clip_id {row[0]!r}")
            out[row[0]] = TimbreVector(*map(float, row[1:]))
    return out
