"""Embedding providers and distance functions for neighbor search.

Three providers are supported: the 5-dim timbre vector, an 80-dim log-mel
statistics vector, and externally computed embeddings imported from a TDCE
file.  Embeddings are z-scored with statistics fit on training data only.
"""

import csv
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .frontend import AudioClip, stft_power
from .timbre import N_ATTRIBUTES, SILENCE_POWER_FLOOR, SilentClipError, TimbreVector

TIMBRE_PROVIDER = "timbre"
SPECTRAL_PROVIDER = "spectral"
EXTERNAL_PROVIDER = "external"

MEL_BANDS = 40
SPECTRAL_DIM = 2 * MEL_BANDS
MEL_FMAX_HZ = 8000.0
LOG_FLOOR = 1e-10
STD_FLOOR = 1e-9

TDCE_MAGIC = b"TDCE"
TDCE_VERSION = 1
_TDCE_HEADER = struct.Struct("<4sIII")  # magic, version, dim, count


class TdceError(ValueError):
    """Malformed TDCE embedding file or id sidecar."""


class DistanceKind(Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"

    @classmethod
    def parse(cls, name: str) -> "DistanceKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown distance kind {name!r}") from None


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray
    provider_id: str
    clip_id: str = ""

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise ValueError("embedding vector must be non-empty and 1-D")
        if not np.all(np.isfinite(vec)):
            raise ValueError("embedding components must be finite")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("mean and std must be 1-D with equal shape")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
            raise ValueError("normalization stats must be finite")
        if np.any(std < STD_FLOOR):
            raise ValueError(f"std components must be >= {STD_FLOOR}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.size


def fit_normalization(vectors) -> NormalizationStats:
    """Per-dimension mean and population std, std clamped below at 1e-9."""
    rows = [np.asarray(v, dtype=np.float64) for v in vectors]
    if len(rows) < 2:
        raise ValueError("need at least 2 vectors to fit normalization")
    dim = rows[0].size
    if any(r.ndim != 1 or r.size != dim for r in rows):
        raise ValueError("vectors must all share one dimension")
    data = np.vstack(rows)
    return NormalizationStats(data.mean(axis=0),
                              np.maximum(data.std(axis=0), STD_FLOOR))


def embed_timbre(vec: TimbreVector, stats: NormalizationStats,
                 clip_id: str = "") -> Embedding:
    """z-scored timbre vector, for neighbor search in metric space."""
    if stats.dim != N_ATTRIBUTES:
        raise ValueError(f"timbre provider needs {N_ATTRIBUTES}-dim stats, got {stats.dim}")
    z = (vec.as_array() - stats.mean) / stats.std
    return Embedding(z, TIMBRE_PROVIDER, clip_id)


def mel_filterbank(bin_freqs: np.ndarray, n_bands: int = MEL_BANDS,
                   fmax: float = MEL_FMAX_HZ) -> np.ndarray:
    """Triangular unit-peak mel filters over the given bin grid, [bands x bins]."""
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    points = from_mel(np.linspace(to_mel(0.0), to_mel(fmax), n_bands + 2))
    bank = np.zeros((n_bands, bin_freqs.size))
    for band in range(n_bands):
        lo, center, hi = points[band], points[band + 1], points[band + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        bank[band] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def spectral_features(clip: AudioClip) -> np.ndarray:
    """Raw 80-dim log-mel statistics: 40 band means then 40 band stds."""
    spec = stft_power(clip)
    if spec.power.sum() <= SILENCE_POWER_FLOOR:
        raise SilentClipError("silent input: total framed power below threshold")
    bank = mel_filterbank(spec.bin_freqs)
    log_mel = np.log(np.maximum(spec.power @ bank.T, LOG_FLOOR))
    return np.concatenate([log_mel.mean(axis=0), log_mel.std(axis=0)])


def embed_spectral(clip: AudioClip, stats: NormalizationStats,
                   clip_id: str = "") -> Embedding:
    """z-scored log-mel statistics embedding."""
    if stats.dim != SPECTRAL_DIM:
        raise ValueError(f"spectral provider needs {SPECTRAL_DIM}-dim stats, got {stats.dim}")
    z = (spectral_features(clip) - stats.mean) / stats.std
    return Embedding(z, SPECTRAL_PROVIDER, clip_id)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def distances_to(matrix: np.ndarray, query: np.ndarray,
                 kind: DistanceKind) -> np.ndarray:
    """Distance from each matrix row to the query vector.

    Rows bit-identical to the query get distance exactly 0 under both
    kinds; a zero vector under cosine is assigned similarity 0.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    if kind is DistanceKind.EUCLIDEAN:
        out = np.sqrt(((matrix - query) ** 2).sum(axis=1))
    else:
        row_norms = np.sqrt((matrix ** 2).sum(axis=1))
        query_norm = np.sqrt((query ** 2).sum())
        denom = row_norms * query_norm
        sims = np.zeros(matrix.shape[0])
        ok = denom > 0.0
        sims[ok] = (matrix[ok] @ query) / denom[ok]
        out = np.clip(1.0 - sims, 0.0, None)
    out[(matrix == query).all(axis=1)] = 0.0
    return out


def distance(u: Embedding, v: Embedding, kind: DistanceKind) -> float:
    """Distance between two embeddings of the same provider and dimension."""
    if u.provider_id != v.provider_id:
        raise ValueError(
            f"provider mismatch: {u.provider_id!r} vs {v.provider_id!r}"
        )
    if u.vector.size != v.vector.size:
        raise ValueError(
            f"dimension mismatch: {u.vector.size} vs {v.vector.size}"
        )
    return float(distances_to(u.vector[None, :], v.vector, kind)[0])


# ---------------------------------------------------------------------------
# TDCE embedding file format
# ---------------------------------------------------------------------------

def _ids_path(path) -> str:
    return f"{path}.ids.csv"


def write_embeddings(path, embeddings) -> None:
    """Write embeddings to a TDCE file plus its `<file>.ids.csv` sidecar.

    Layout: magic `TDCE`, u32 version=1, u32 dim, u32 count, then
    count x dim float32 little-endian, row-major.
    """
    embeddings = list(embeddings)
    dim = embeddings[0].vector.size if embeddings else 0
    if any(e.vector.size != dim for e in embeddings):
        raise ValueError("embeddings must all share one dimension")
    with open(path, "wb") as fh:
        fh.write(_TDCE_HEADER.pack(TDCE_MAGIC, TDCE_VERSION, dim, len(embeddings)))
        if embeddings:
            data = np.vstack([e.vector for e in embeddings]).astype("<f4")
            fh.write(data.tobytes(order="C"))
    with open(_ids_path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "clip_id"])
        for row, emb in enumerate(embeddings):
            writer.writerow([row, emb.clip_id])


def import_embeddings(path, provider_id: str = EXTERNAL_PROVIDER) -> list:
    """Read a TDCE file and its id sidecar into a list of Embedding."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _TDCE_HEADER.size:
        raise TdceError(f"{path}: truncated header")
    magic, version, dim, count = _TDCE_HEADER.unpack_from(raw, 0)
    if magic != TDCE_MAGIC:
        raise TdceError(f"{path}: bad magic {magic!r}")
    if version != TDCE_VERSION:
        raise TdceError(f"{path}: unsupported version {version}")
    expected = count * dim * 4
    payload = raw[_TDCE_HEADER.size:]
    if len(payload) < expected:
        raise TdceError(
            f"{path}: truncated payload ({len(payload)} bytes, expected {expected})"
        )
    if len(payload) > expected:
        raise TdceError(f"{path}: {len(payload) - expected} trailing bytes")

    ids = []
    with open(_ids_path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["row", "clip_id"]:
            raise TdceError(f"{_ids_path(path)}: unexpected header {header}")
        for row in reader:
            if len(row) != 2 or row[0] != str(len(ids)):
                raise TdceError(f"{_ids_path(path)}: malformed row {row}")
            ids.append(row[1])
    if len(ids) != count:
        raise TdceError(
            f"{path}: id count mismatch ({len(ids)} ids for {count} embeddings)"
        )

    if count == 0:
        return []
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    return [Embedding(vec.astype(np.float64), provider_id, clip_id)
            for vec, clip_id in zip(vectors, ids)]
