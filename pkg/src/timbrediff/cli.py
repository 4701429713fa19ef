"""Command-line pipeline: synth, fit, score, gen-gt, eval.

All randomness flows from --seed; nothing reads the clock except the
model's created_utc metadata field.  Logs go to standard error, data to
files (and the gen-gt statistics JSON to standard output).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    DEFAULT_T_PRIME,
    GroundTruthError,
    ManifestError,
    generate_ground_truth,
    ground_truth_statistics,
    load_manifest,
    read_ground_truth_csv,
    write_ground_truth_csv,
)
from .detector import (
    DEFAULT_K,
    DEFAULT_T,
    ReferenceSet,
    TimbreDiffResult,
    global_baseline_score,
    read_results_csv,
    score_clip,
    write_results_csv,
)
from .embeddings import (
    EXTERNAL_PROVIDER,
    SPECTRAL_PROVIDER,
    TIMBRE_PROVIDER,
    DistanceKind,
    Embedding,
    TdceError,
    fit_normalization,
    import_embeddings,
    spectral_features,
)
from .evaluation import CoverageError, build_report, write_report_json
from .frontend import CANONICAL_RATE, WavError, load_wav, resample
from .store import ModelDirectoryError, atomic_write, load_model, save_model
from .synth import default_benchmark_specs, generate_dataset
from .timbre import TimbreVector, compute_timbre_vector

# Spectral defaults to euclidean: much of an anomaly's signature in the
# log-mel statistics space is a level-axis displacement that cosine
# distance would discard.
DEFAULT_DISTANCE = {
    TIMBRE_PROVIDER: DistanceKind.EUCLIDEAN,
    SPECTRAL_PROVIDER: DistanceKind.EUCLIDEAN,
    EXTERNAL_PROVIDER: DistanceKind.COSINE,
}

_CLI_ERRORS = (WavError, ManifestError, GroundTruthError, CoverageError,
               TdceError, ModelDirectoryError, ValueError, OSError)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _load_clip(audio_root, entry):
    clip = load_wav(Path(audio_root) / entry.path)
    return resample(clip, CANONICAL_RATE)


def _stored_precision(vec: TimbreVector) -> TimbreVector:
    # Query features must match the precision of the persisted reference
    # set (9 significant digits in timbre.csv, float32 in embeddings.tdce),
    # otherwise a clip scored against itself would not tie exactly.
    return TimbreVector(*(float(f"{v:.9g}") for v in vec.as_array()))


def _quantized_embedding(vector, provider_id, clip_id) -> Embedding:
    vec32 = np.asarray(vector, dtype=np.float64).astype("<f4").astype(np.float64)
    return Embedding(vec32, provider_id, clip_id)


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    conditions, causes = default_benchmark_specs()
    if args.conditions > len(conditions):
        raise ValueError(
            f"--conditions must be <= {len(conditions)} (the default specs)"
        )
    conditions = conditions[: args.conditions]
    if args.causes != "default":
        wanted = args.causes.split(",")
        by_id = {c.cause_id: c for c in causes}
        unknown = [w for w in wanted if w not in by_id]
        if unknown:
            raise ValueError(f"unknown cause ids: {unknown}; "
                             f"available: {sorted(by_id)}")
        causes = tuple(by_id[w] for w in wanted)
    dataset = generate_dataset(conditions, causes, args.train_per_cond,
                               args.test_per_cond, args.seed, args.out)
    _log(f"synth: wrote {len(dataset.manifest)} clips to {args.out} "
         f"(seed {args.seed})")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _raw_training_features(args, entries):
    """(clip_ids, raw feature rows, timbre rows) for the training split."""
    train = [e for e in entries if e.split == "train"]
    if not train:
        raise ManifestError("manifest has no training rows")
    clip_ids = [e.clip_id for e in train]

    if args.provider == EXTERNAL_PROVIDER and not args.embeddings:
        raise ValueError("provider 'external' requires --embeddings")

    timbre_rows = []
    spectral_rows = []
    for entry in train:
        clip = _load_clip(args.audio_root, entry)
        timbre_rows.append((entry.clip_id, compute_timbre_vector(clip)))
        if args.provider == SPECTRAL_PROVIDER:
            spectral_rows.append(spectral_features(clip))

    if args.provider == TIMBRE_PROVIDER:
        raw = [vec.as_array() for _, vec in timbre_rows]
    elif args.provider == SPECTRAL_PROVIDER:
        raw = spectral_rows
    else:
        imported = {e.clip_id: e.vector
                    for e in import_embeddings(args.embeddings)}
        missing = [cid for cid in clip_ids if cid not in imported]
        if missing:
            raise ValueError(
                f"embeddings file covers {len(imported)} clips but is missing "
                f"training clip {missing[0]!r}"
            )
        raw = [imported[cid] for cid in clip_ids]
    return clip_ids, raw, timbre_rows


def cmd_fit(args) -> int:
    entries = load_manifest(args.manifest)
    clip_ids, raw, timbre_rows = _raw_training_features(args, entries)
    stats = fit_normalization(raw)
    embeddings = [
        Embedding((np.asarray(row, dtype=np.float64) - stats.mean) / stats.std,
                  args.provider, cid)
        for cid, row in zip(clip_ids, raw)
    ]
    distance = (DistanceKind.parse(args.distance) if args.distance
                else DEFAULT_DISTANCE[args.provider])
    save_model(args.out, embeddings, timbre_rows, stats, distance,
               k=args.k, t=args.t)
    _log(f"fit: {len(embeddings)} training clips, provider={args.provider}, "
         f"distance={distance.value}, model at {args.out}")
    return 0


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

def _query_embedding(config, ref, entry, clip, external_vectors):
    provider = config["provider"]
    if provider == TIMBRE_PROVIDER:
        vec = compute_timbre_vector(clip).as_array()
    elif provider == SPECTRAL_PROVIDER:
        vec = spectral_features(clip)
    else:
        if entry.clip_id not in external_vectors:
            raise ValueError(
                f"embeddings file is missing test clip {entry.clip_id!r}"
            )
        vec = external_vectors[entry.clip_id]
    z = (np.asarray(vec, dtype=np.float64) - ref.normalization.mean) / ref.normalization.std
    return _quantized_embedding(z, provider, entry.clip_id)


def cmd_score(args) -> int:
    ref, config = load_model(args.model)
    if args.distance:
        kind = DistanceKind.parse(args.distance)
        ref = ReferenceSet(ref.embeddings, ref.timbre_values, ref.clip_ids,
                           ref.provider_id, kind, ref.normalization)
    k = args.k if args.k is not None else int(config["k"])
    t = args.t if args.t is not None else float(config["t"])

    external_vectors = {}
    if config["provider"] == EXTERNAL_PROVIDER:
        if not args.embeddings:
            raise ValueError(
                "model provider is 'external'; scoring requires --embeddings"
            )
        external_vectors = {e.clip_id: e.vector
                            for e in import_embeddings(args.embeddings)}

    entries = load_manifest(args.manifest)
    results = []
    for entry in entries:
        if entry.split != "test":
            continue
        clip = _load_clip(args.audio_root, entry)
        query_timbre = _stored_precision(compute_timbre_vector(clip))
        query_emb = _query_embedding(config, ref, entry, clip,
                                     external_vectors)
        result = score_clip(ref, query_emb, query_timbre, k=k, t=t)
        if args.baseline == "global":
            scores, labels = global_baseline_score(ref, query_timbre, t=t)
            result = TimbreDiffResult(
                clip_id=result.clip_id,
                anomaly_score=result.anomaly_score,
                attribute_scores=scores,
                attribute_labels=labels,
                neighbor_indices=result.neighbor_indices,
            )
        results.append(result)

    atomic_write(args.out, lambda p: write_results_csv(p, results))
    _log(f"score: {len(results)} test clips, k={k}, t={t}, "
         f"baseline={args.baseline or 'knn'}, results at {args.out}")
    return 0


# ---------------------------------------------------------------------------
# gen-gt / eval
# ---------------------------------------------------------------------------

def cmd_gen_gt(args) -> int:
    entries = load_manifest(args.manifest)
    needed = [e for e in entries if e.split == "train" or e.state == "anomalous"]
    timbre_vectors = {}
    for entry in needed:
        timbre_vectors[entry.clip_id] = compute_timbre_vector(
            _load_clip(args.audio_root, entry)
        )
    records = generate_ground_truth(entries, timbre_vectors, t_prime=args.t_prime)
    atomic_write(args.out, lambda p: write_ground_truth_csv(p, records))
    stats = ground_truth_statistics(records)
    _log(f"gen-gt: t_prime: {args.t_prime:g}, {stats['groups']} groups, "
         f"ground truth at {args.out}")
    print(json.dumps(stats, indent=2, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    results = read_results_csv(args.results)
    records = read_ground_truth_csv(args.gt)
    entries = load_manifest(args.manifest)
    report = build_report(results, entries, records)
    atomic_write(args.out, lambda p: write_report_json(p, report))
    _log(f"eval: detection_auc={report.detection_auc:.4f}, "
         f"mean_mae={report.mean_mae:.4f}, report at {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timbrediff",
        description="Anomalous sound detection with timbre difference labels",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--conditions", type=int, default=3)
    p.add_argument("--causes", default="default",
                   help="comma-separated cause ids, or 'default'")
    p.add_argument("--train-per-cond", type=int, default=50)
    p.add_argument("--test-per-cond", type=int, default=10)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit a reference model on training clips")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--provider", required=True,
                   choices=[TIMBRE_PROVIDER, SPECTRAL_PROVIDER, EXTERNAL_PROVIDER])
    p.add_argument("--embeddings", help="TDCE file for provider 'external'")
    p.add_argument("--out", required=True, help="model directory")
    p.add_argument("--distance", choices=["euclidean", "cosine"])
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--t", type=float, default=DEFAULT_T)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score the test clips of a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--embeddings", help="TDCE file for provider 'external'")
    p.add_argument("--k", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--distance", choices=["euclidean", "cosine"])
    p.add_argument("--baseline", choices=["global"])
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("gen-gt", help="derive ground truth difference labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--t-prime", type=float, default=DEFAULT_T_PRIME)
    p.add_argument("--out", required=True, help="ground truth CSV path")
    p.set_defaults(func=cmd_gen_gt)

    p = sub.add_parser("eval", help="evaluate results against ground truth")
    p.add_argument("--results", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except _CLI_ERRORS as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
