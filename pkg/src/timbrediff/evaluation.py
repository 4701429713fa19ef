"""Detection AUC and class-balanced label error reporting.

The label error is a mean absolute error over anomalous clips where each
clip's contribution is divided by the number of truth clips sharing its
label, then averaged over the label values actually present.  This keeps
rare label values from being drowned out by frequent ones.
"""

import json
from dataclasses import dataclass

import numpy as np

from .dataset import assign_labels, auc
from .timbre import ATTRIBUTE_NAMES, N_ATTRIBUTES

LABEL_VALUES = (-1, 0, 1)


class CoverageError(ValueError):
    """Results do not cover every clip the evaluation needs."""


@dataclass(frozen=True)
class EvalReport:
    detection_auc: float
    mae: dict                 # attribute name -> normalized MAE
    mean_mae: float
    counts: dict              # attribute name -> {label value as str: count}
    n_clips: int

    def to_dict(self) -> dict:
        return {
            "detection_auc": self.detection_auc,
            "mae": dict(self.mae),
            "mean_mae": self.mean_mae,
            "counts": {k: dict(v) for k, v in self.counts.items()},
            "n_clips": self.n_clips,
        }


def detection_auc(normal_scores, anomalous_scores) -> float:
    """AUC of anomaly scores, normals as negatives."""
    return auc(normal_scores, anomalous_scores)


def truth_label_counts(truths) -> np.ndarray:
    """counts[attribute, value_index] over the truth labels."""
    counts = np.zeros((N_ATTRIBUTES, len(LABEL_VALUES)), dtype=int)
    for labels in truths.values():
        for col in range(N_ATTRIBUTES):
            counts[col, LABEL_VALUES.index(int(labels[col]))] += 1
    return counts


def normalized_mae(predictions, truths) -> np.ndarray:
    """Per-attribute class-balanced MAE between ordinal label maps.

    Each clip's |prediction - truth| is divided by the number of truth
    clips with that truth label; the sum is divided by the number of label
    values present in the truths (3 when all of -1/0/1 occur).
    """
    if not truths:
        raise ValueError("normalized_mae needs at least one truth clip")
    for clip_id, labels in truths.items():
        if clip_id not in predictions:
            raise CoverageError(f"missing prediction for clip {clip_id!r}")
        for label in (*labels, *predictions[clip_id]):
            if int(label) not in LABEL_VALUES:
                raise ValueError(f"clip {clip_id!r}: label {label} out of range")

    counts = truth_label_counts(truths)
    totals = np.zeros(N_ATTRIBUTES)
    for clip_id, labels in truths.items():
        pred = np.asarray(predictions[clip_id], dtype=int)
        for col in range(N_ATTRIBUTES):
            truth = int(labels[col])
            class_size = counts[col, LABEL_VALUES.index(truth)]
            totals[col] += abs(int(pred[col]) - truth) / class_size
    classes_present = (counts > 0).sum(axis=1)
    return totals / classes_present


def build_report(results, entries, records) -> EvalReport:
    """Aggregate scored results against a manifest and its ground truth."""
    by_id = {}
    for res in results:
        by_id[res.clip_id] = res

    test_entries = [e for e in entries if e.split == "test"]
    missing = [e.clip_id for e in test_entries if e.clip_id not in by_id]
    if missing:
        raise CoverageError(f"missing result for clip {missing[0]!r} "
                            f"({len(missing)} test clips uncovered)")

    normal_scores = [by_id[e.clip_id].anomaly_score for e in test_entries
                     if e.state == "normal"]
    anomalous_scores = [by_id[e.clip_id].anomaly_score for e in test_entries
                        if e.state == "anomalous"]
    if not normal_scores or not anomalous_scores:
        raise CoverageError("evaluation needs both normal and anomalous test clips")

    truths = assign_labels(entries, records)
    predictions = {clip_id: by_id[clip_id].attribute_labels
                   for clip_id in truths if clip_id in by_id}
    mae_values = normalized_mae(predictions, truths)

    counts = truth_label_counts(truths)
    counts_dict = {
        name: {str(value): int(counts[col, idx])
               for idx, value in enumerate(LABEL_VALUES)}
        for col, name in enumerate(ATTRIBUTE_NAMES)
    }
    return EvalReport(
        detection_auc=detection_auc(normal_scores, anomalous_scores),
        mae={name: float(mae_values[col]) for col, name in enumerate(ATTRIBUTE_NAMES)},
        mean_mae=float(mae_values.mean()),
        counts=counts_dict,
        n_clips=len(truths),
    )


def write_report_json(path, report: EvalReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report_json(path) -> EvalReport:
    with open(path) as fh:
        data = json.load(fh)
    return EvalReport(
        detection_auc=data["detection_auc"],
        mae=data["mae"],
        mean_mae=data["mean_mae"],
        counts=data["counts"],
        n_clips=data["n_clips"],
    )
