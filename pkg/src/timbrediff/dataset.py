"""Dataset manifests and AUC-based ground-truth label generation.

Ground truth for an anomalous group (condition m, cause q) compares the
timbre metric distribution of the group's clips against the normal
training clips of the same condition: the AUC of that comparison is
thresholded into a {-1, 0, +1} label per attribute.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .detector import threshold_label
from .timbre import ATTRIBUTE_NAMES, N_ATTRIBUTES

DEFAULT_T_PRIME = 0.05

MANIFEST_CSV_HEADER = ["clip_id", "path", "split", "state", "condition",
                       "cause", "domain"]
GROUND_TRUTH_CSV_HEADER = ["condition", "cause", "attribute", "score", "label"]

SPLITS = ("train", "test")
STATES = ("normal", "anomalous")
DOMAINS = ("source", "target")


class ManifestError(ValueError):
    """Manifest rows violating the format or the training-data constraints."""


class GroundTruthError(ValueError):
    """Ground truth cannot be derived for the given entries."""


@dataclass(frozen=True)
class ManifestEntry:
    clip_id: str
    path: str
    split: str
    state: str
    condition_id: str
    cause_id: str = ""
    domain: str = "source"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.state not in STATES:
            raise ManifestError(f"state must be one of {STATES}, got {self.state!r}")
        if self.domain not in DOMAINS:
            raise ManifestError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        if not self.clip_id or not self.condition_id:
            raise ManifestError("clip_id and condition must be non-empty")
        if self.split == "train" and self.state == "anomalous":
            raise ManifestError("training data must be normal only")
        if self.state == "anomalous" and not self.cause_id:
            raise ManifestError("anomalous entries must carry a cause")


@dataclass(frozen=True)
class GroundTruthRecord:
    condition_id: str
    cause_id: str
    scores: np.ndarray    # per-attribute AUC in [0, 1]
    labels: np.ndarray    # per-attribute {-1, 0, 1}

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=int)
        if scores.shape != (N_ATTRIBUTES,) or labels.shape != (N_ATTRIBUTES,):
            raise ValueError("scores and labels must each have 5 entries")
        if np.any(scores < 0.0) or np.any(scores > 1.0):
            raise ValueError("ground truth scores must lie in [0, 1]")
        if not np.isin(labels, (-1, 0, 1)).all():
            raise ValueError("labels must be -1, 0 or 1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)


# ---------------------------------------------------------------------------
# Manifest CSV
# ---------------------------------------------------------------------------

def load_manifest(path) -> list:
    """Read and validate a manifest CSV; errors name the offending row."""
    entries = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_CSV_HEADER:
            raise ManifestError(f"{path}: unexpected manifest header {header}")
        for number, row in enumerate(reader, start=2):
            if len(row) != len(MANIFEST_CSV_HEADER):
                raise ManifestError(f"{path} row {number}: expected "
                                    f"{len(MANIFEST_CSV_HEADER)} fields, got {len(row)}")
            try:
                entry = ManifestEntry(clip_id=row[0], path=row[1], split=row[2],
                                      state=row[3], condition_id=row[4],
                                      cause_id=row[5], domain=row[6])
            except ManifestError as exc:
                raise ManifestError(f"{path} row {number}: {exc}") from None
            if entry.clip_id in seen:
                raise ManifestError(f"{path} row {number}: duplicate clip_id "
                                    f"{entry.clip_id!r}")
            seen.add(entry.clip_id)
            entries.append(entry)
    return entries


def write_manifest_csv(path, entries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_CSV_HEADER)
        for e in entries:
            writer.writerow([e.clip_id, e.path, e.split, e.state,
                             e.condition_id, e.cause_id, e.domain])


# ---------------------------------------------------------------------------
# AUC
# ---------------------------------------------------------------------------

def auc(negative_scores, positive_scores) -> float:
    """Area under the ROC curve via midranks, ties counted one half.

    Equals pair counting exactly: (wins + 0.5 * ties) / (n_neg * n_pos),
    computed in O(n log n) through the rank-sum identity.
    """
    neg = np.asarray(negative_scores, dtype=np.float64)
    pos = np.asarray(positive_scores, dtype=np.float64)
    if neg.size == 0 or pos.size == 0:
        raise ValueError("auc requires non-empty negative and positive score lists")
    if not (np.all(np.isfinite(neg)) and np.all(np.isfinite(pos))):
        raise ValueError("auc requires finite scores")

    combined = np.concatenate([neg, pos])
    _, inverse, counts = np.unique(combined, return_inverse=True,
                                   return_counts=True)
    ends = np.cumsum(counts)
    midranks = (ends - counts + 1 + ends) / 2.0     # average rank per distinct value
    pos_rank_sum = midranks[inverse[neg.size:]].sum()
    u = pos_rank_sum - pos.size * (pos.size + 1) / 2.0
    return float(u / (neg.size * pos.size))


# ---------------------------------------------------------------------------
# Ground truth generation
# ---------------------------------------------------------------------------

def _timbre_rows(entries, timbre_vectors) -> np.ndarray:
    rows = []
    for entry in entries:
        if entry.clip_id not in timbre_vectors:
            raise GroundTruthError(f"missing timbre vector for clip {entry.clip_id!r}")
        rows.append(timbre_vectors[entry.clip_id].as_array())
    return np.vstack(rows)


def generate_ground_truth(entries, timbre_vectors,
                          t_prime: float = DEFAULT_T_PRIME) -> list:
    """One labeled record per (condition, cause) group of anomalous clips.

    Per attribute, the score is the AUC of the group's metric values
    against the same-condition normal training values; the label applies
    the t_prime threshold to that score.
    """
    train_by_condition = {}
    for entry in entries:
        if entry.split == "train":
            train_by_condition.setdefault(entry.condition_id, []).append(entry)

    groups = {}
    for entry in entries:
        if entry.state == "anomalous":
            groups.setdefault((entry.condition_id, entry.cause_id), []).append(entry)

    records = []
    for (condition_id, cause_id) in sorted(groups):
        if condition_id not in train_by_condition:
            raise GroundTruthError(
                f"condition {condition_id!r} has anomalous clips but no normal "
                "training clips"
            )
        normal_values = _timbre_rows(train_by_condition[condition_id], timbre_vectors)
        anomalous_values = _timbre_rows(groups[(condition_id, cause_id)], timbre_vectors)
        scores = np.array([
            auc(normal_values[:, col], anomalous_values[:, col])
            for col in range(N_ATTRIBUTES)
        ])
        labels = np.array([threshold_label(s, t_prime) for s in scores], dtype=int)
        records.append(GroundTruthRecord(condition_id, cause_id, scores, labels))
    return records


def assign_labels(entries, records) -> dict:
    """Map each anomalous clip to its group's label vector."""
    by_group = {(r.condition_id, r.cause_id): r for r in records}
    out = {}
    for entry in entries:
        if entry.state != "anomalous":
            continue
        key = (entry.condition_id, entry.cause_id)
        if key not in by_group:
            raise GroundTruthError(
                f"clip {entry.clip_id!r}: no ground truth record for condition "
                f"{entry.condition_id!r}, cause {entry.cause_id!r}"
            )
        out[entry.clip_id] = by_group[key].labels.copy()
    return out


def ground_truth_statistics(records) -> dict:
    """Group count, unique label-vector count and label value tallies."""
    records = list(records)
    if not records:
        raise ValueError("statistics need at least one record")
    all_labels = np.concatenate([r.labels for r in records])
    return {
        "groups": len(records),
        "unique_vectors": len({tuple(r.labels.tolist()) for r in records}),
        "counts": {
            "minus": int((all_labels == -1).sum()),
            "zero": int((all_labels == 0).sum()),
            "plus": int((all_labels == 1).sum()),
        },
    }


# ---------------------------------------------------------------------------
# Ground truth CSV
# ---------------------------------------------------------------------------

def write_ground_truth_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GROUND_TRUTH_CSV_HEADER)
        for rec in records:
            for col, name in enumerate(ATTRIBUTE_NAMES):
                writer.writerow([rec.condition_id, rec.cause_id, name,
                                 f"{rec.scores[col]:.9g}", str(int(rec.labels[col]))])


def read_ground_truth_csv(path) -> list:
    raw = {}
    order = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GROUND_TRUTH_CSV_HEADER:
            raise ValueError(f"{path}: unexpected ground truth header {header}")
        for row in reader:
            if len(row) != len(GROUND_TRUTH_CSV_HEADER):
                raise ValueError(f"{path}: malformed row {row}")
            condition, cause, attribute, score, label = row
            if attribute not in ATTRIBUTE_NAMES:
                raise ValueError(f"{path}: unknown attribute {attribute!r}")
            key = (condition, cause)
            if key not in raw:
                raw[key] = {}
                order.append(key)
            raw[key][attribute] = (float(score), int(label))
    records = []
    for key in order:
        if set(raw[key]) != set(ATTRIBUTE_NAMES):
            raise ValueError(f"{path}: group {key} is missing attributes")
        scores = [raw[key][name][0] for name in ATTRIBUTE_NAMES]
        labels = [raw[key][name][1] for name in ATTRIBUTE_NAMES]
        records.append(GroundTruthRecord(key[0], key[1], np.array(scores),
                                         np.array(labels, dtype=int)))
    return records
