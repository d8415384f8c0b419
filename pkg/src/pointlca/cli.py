"""Command-line pipeline: ingest -> extract -> fit -> classify -> estimate.

Artifacts live in the output directory::

    events/<split>/<id>.evc    canonical-binary recordings
    ingest.json                record list with labels and digests
    features_<split>.feat      raw global features
    dictionary.lcad            exemplar dictionary
    eval_<decoder>.json        evaluation report
    predictions_<decoder>.csv  per-input predictions
    workload.json              FLOPs / energy estimate
    run_manifest.json          config snapshot, stage timings, digests

Exit codes: 0 success, 1 validation error, 2 data error, 3 divergence.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend
from .config import load_config, lca_params, sampling_config, validate_config
from .decoder import DECODERS, decode, evaluate, round_m_hat
from .errors import DataError, LcaDivergenceError, PointLcaError, ValidationError
from .event_cloud import load_events, stream_to_cloud, write_canonical
from .featfile import load_features, save_features
from .lca import build_dictionary, compute_gramian, encode, load_dictionary, save_dictionary
from .pointnet import extract_features, load_weights, random_weights
from .rng import derive_seed
from .workload import WorkloadParams, estimate

log = logging.getLogger("pointlca")

SPLITS = ("train", "test")
_SPLIT_STREAM = {"train": 0, "test": 1 << 32}


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Output directory plus the manifest that accumulates across stages."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.out / "run_manifest.json"
        if self.manifest_path.exists():
            self.manifest = json.loads(self.manifest_path.read_text())
        else:
            self.manifest = {"schema_version": 1, "stages": {}}
        self.manifest["config"] = cfg
        self.manifest["backend"] = backend()
        self.manifest["version"] = __version__

    def path(self, name) -> Path:
        return self.out / name

    def record_stage(self, stage, started, artifacts, **extra):
        digests = {str(Path(p).relative_to(self.out)): sha256_file(p) for p in artifacts}
        entry = {"wall_seconds": round(time.perf_counter() - started, 6), "artifacts": digests}
        entry.update(extra)
        self.manifest["stages"][stage] = entry
        self.manifest_path.write_text(json.dumps(self.manifest, indent=2, sort_keys=True))


# -- input discovery ---------------------------------------------------------------

def discover_inputs(inputs) -> list[tuple[Path, str | None]]:
    """``(path, label)`` pairs.  A directory is walked recursively and a file's
    label is its parent directory name (unlabelled at top level); a CSV
    manifest holds ``path,label`` rows relative to the manifest."""
    root = Path(inputs)
    if root.is_dir():
        found = []
        for p in sorted(root.rglob("*")):
            if p.is_file() and not p.name.startswith("."):
                label = p.parent.name if p.parent != root else None
                found.append((p, label))
        return found
    if root.is_file():
        rows = []
        with root.open(newline="") as fh:
            for row in csv.DictReader(fh):
                rows.append((root.parent / row["path"], row.get("label") or None))
        return rows
    raise DataError(f"input path does not exist: {root}")


# -- stages ------------------------------------------------------------------

def cmd_ingest(cfg) -> int:
    run = Run(cfg)
    started = time.perf_counter()
    records, failures, artifacts = {}, [], []
    for split in SPLITS:
        spec = cfg[split]
        if spec is None:
            continue
        fmt = spec.get("format", "canonical-binary")
        found = discover_inputs(spec["inputs"])
        if not found:
            raise DataError(f"no inputs in {spec['inputs']}")
        dest = run.path(f"events/{split}")
        dest.mkdir(parents=True, exist_ok=True)
        records[split] = []
        for path, label in found:
            rid = f"{split}-{len(records[split]):06d}"
            try:
                stream = load_events(path, fmt, label=label)
            except PointLcaError as exc:
                failures.append({"split": split, "source": str(path), "error": str(exc)})
                log.warning("skipping %s: %s", path, exc)
                continue
            target = dest / f"{rid}.evc"
            write_canonical(stream, target)
            artifacts.append(target)
            records[split].append({"id": rid, "source": str(path), "label": label,
                                   "file": str(target.relative_to(run.out)), "events": len(stream)})
    if not records:
        raise ValidationError("config names neither a train nor a test split")
    listing = run.path("ingest.json")
    listing.write_text(json.dumps({"records": records, "failures": failures}, indent=2, sort_keys=True))
    artifacts.append(listing)
    run.record_stage("ingest", started, artifacts, failures=len(failures))
    for split, recs in records.items():
        log.info("ingest %s: %d recordings", split, len(recs))
    if failures:
        log.error("%d inputs failed to parse", len(failures))
        return DataError.exit_code
    return 0


def _load_listing(run):
    path = run.path("ingest.json")
    if not path.exists():
        raise DataError(f"missing {path}; run ingest first")
    return json.loads(path.read_text())["records"]


def _weights(cfg):
    if cfg["weights_path"]:
        path = Path(cfg["weights_path"])
        if not path.exists():
            raise DataError(f"weights file not found: {path}")
        return load_weights(path)
    return random_weights(int(cfg["weights_seed"]))


def cmd_extract(cfg) -> int:
    run = Run(cfg)
    started = time.perf_counter()
    listing = _load_listing(run)
    weights = _weights(cfg)
    sampling = sampling_config(cfg)
    artifacts = []
    for split in [s for s in SPLITS if s in listing]:
        recs = listing[split]

        def one(item):
            idx, rec = item
            seed = derive_seed(sampling.seed, _SPLIT_STREAM[split] + idx)
            stream = load_events(run.out / rec["file"], "canonical-binary", label=rec["label"])
            cfg_i = type(sampling)(sampling.num_windows, sampling.events_per_window,
                                   sampling.target_points, seed)
            return extract_features(stream_to_cloud(stream, cfg_i, cfg["normalization"]), weights)

        with ThreadPoolExecutor(max_workers=int(cfg["workers"])) as pool:
            feats = list(pool.map(one, enumerate(recs)))
        if not feats:
            continue
        target = run.path(f"features_{split}.feat")
        save_features(np.stack(feats), [r["label"] for r in recs], target)
        artifacts.append(target)
        log.info("extract %s: %d features", split, len(feats))
    run.record_stage("extract", started, artifacts)
    return 0


def cmd_fit(cfg) -> int:
    run = Run(cfg)
    started = time.perf_counter()
    src = run.path("features_train.feat")
    if not src.exists():
        raise DataError(f"missing training features {src}")
    F, labels = load_features(src)
    dictionary = build_dictionary(F, labels)
    target = run.path("dictionary.lcad")
    save_dictionary(dictionary, target)
    hist = {}
    for lab in labels:
        hist[str(lab)] = hist.get(str(lab), 0) + 1
    log.info("fit: M=%d N=%d", dictionary.M, dictionary.N)
    for lab in sorted(hist):
        log.info("  class %s: %d atoms", lab, hist[lab])
    run.record_stage("fit", started, [target], M=dictionary.M, N=dictionary.N, label_histogram=hist)
    return 0


def classify_features(dictionary, F, truths, params, decoders):
    """Encode and decode every row of ``F``.  Returns (reports, predictions, diverged, traces)."""
    gram = compute_gramian(dictionary)
    traces, diverged = [], []
    results = {d: [] for d in decoders}
    for i, s in enumerate(F):
        try:
            act = encode(s, dictionary, gram, params)
        except (LcaDivergenceError, DataError) as exc:
            diverged.append({"index": i, "error": str(exc)})
            for d in decoders:
                results[d].append(decode(np.zeros(dictionary.M), dictionary.labels, d))
            continue
        traces.append(act)
        for d in decoders:
            results[d].append(decode(act, dictionary.labels, d))
    reports = {}
    for d in decoders:
        reports[d] = evaluate(results[d], truths, traces=traces or None, M=dictionary.M)
    return reports, results, diverged, traces


def cmd_classify(cfg) -> int:
    run = Run(cfg)
    started = time.perf_counter()
    dict_path, test_path = run.path("dictionary.lcad"), run.path("features_test.feat")
    for p in (dict_path, test_path):
        if not p.exists():
            raise DataError(f"missing {p}")
    dictionary = load_dictionary(dict_path)
    F, truths = load_features(test_path)
    if F.shape[0] == 0:
        raise DataError("empty test set")
    params = lca_params(cfg)
    decoders = DECODERS if cfg["decoder"] == "both" else (cfg["decoder"],)
    reports, results, diverged, traces = classify_features(dictionary, F, truths, params, decoders)
    ids = _test_ids(run, F.shape[0])
    artifacts = []
    for d in decoders:
        rep_path = run.path(f"eval_{d}.json")
        rep_path.write_text(reports[d].to_json())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "truth", "predicted", "score"])
        for rid, t, p in zip(ids, truths, results[d]):
            w.writerow([rid, t, "" if p.no_evidence else p.predicted_class, repr(p.score)])
        pred_path = run.path(f"predictions_{d}.csv")
        pred_path.write_text(buf.getvalue())
        artifacts += [rep_path, pred_path]
        log.info("classify [%s]: top-1 %.4f (%d/%d)", d, reports[d].top1_accuracy,
                 reports[d].correct, reports[d].total)
    first = reports[decoders[0]]
    run.manifest["eval"] = {d: r.to_dict() for d, r in reports.items()}
    run.record_stage("classify", started, artifacts, K=params.steps, N=dictionary.N,
                     M=dictionary.M, m_hat=first.m_hat, diverged=diverged)
    for item in diverged:
        log.error("input %s: %s", ids[item["index"]], item["error"])
    return 3 if diverged else 0


def _test_ids(run, count):
    path = run.path("ingest.json")
    if path.exists():
        recs = json.loads(path.read_text())["records"].get("test", [])
        if len(recs) == count:
            return [r["id"] for r in recs]
    return [f"test-{i:06d}" for i in range(count)]


def _workload_params(args, run):
    explicit = [args.K, args.N, args.M, args.mhat]
    if all(v is not None for v in explicit):
        return WorkloadParams(args.K, args.N, args.M, args.mhat, args.joules_per_flop)
    stage = run.manifest["stages"].get("classify") if run else None
    if stage is None or stage.get("m_hat") is None:
        raise ValidationError("give --K --N --M --mhat, or run classify first")
    return WorkloadParams(
        args.K if args.K is not None else stage["K"],
        args.N if args.N is not None else stage["N"],
        args.M if args.M is not None else stage["M"],
        args.mhat if args.mhat is not None else round_m_hat(stage["m_hat"]),
        args.joules_per_flop,
    )


def cmd_estimate(cfg, args) -> int:
    started = time.perf_counter()
    explicit = all(v is not None for v in (args.K, args.N, args.M, args.mhat))
    run = None
    if not explicit or args.out is not None or args.config is not None:
        run = Run(cfg)
    report = estimate(_workload_params(args, run))
    print(report.render())
    if run is not None:
        target = run.path("workload.json")
        target.write_text(report.to_json())
        run.manifest["workload"] = report.to_dict()
        run.record_stage("estimate", started, [target])
    return 0


def cmd_bench(cfg, args) -> int:
    t0 = time.perf_counter()
    status = cmd_classify(cfg)
    t1 = time.perf_counter()
    cmd_estimate(cfg, args)
    t2 = time.perf_counter()
    run = Run(cfg)
    timing = {"backend": backend(), "classify_seconds": t1 - t0, "estimate_seconds": t2 - t1}
    run.path("bench.json").write_text(json.dumps(timing, indent=2, sort_keys=True))
    log.info("bench [%s]: classify %.3fs, estimate %.3fs", backend(), t1 - t0, t2 - t1)
    return status


# -- argument handling -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline config (JSON) or a run manifest")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="sampling and random-weights seed (u64)")
    common.add_argument("--lambda", dest="lam", type=float, help="LCA threshold")
    common.add_argument("--tau", type=float, help="LCA leakage time constant")
    common.add_argument("--steps", type=int, help="LCA time steps")
    common.add_argument("--dt", type=float, help="LCA integration step")
    common.add_argument("--decoder", choices=DECODERS + ("both",))
    common.add_argument("--train", help="training inputs (directory or CSV manifest)")
    common.add_argument("--test", help="test inputs (directory or CSV manifest)")
    common.add_argument("--format", dest="fmt", help="event file format of the inputs")
    common.add_argument("--normalization", choices=("isotropic", "per-axis"),
                        help="point-cloud scaling")
    common.add_argument("--weights", help="PointNet weights file (PNETW001)")
    common.add_argument("--workers", type=int, help="per-input worker threads")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="pointlca", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("ingest", "convert recordings to canonical event files"),
        ("extract", "sample point clouds and extract global features"),
        ("fit", "build the exemplar dictionary from training features"),
        ("classify", "LCA-encode and decode the test features"),
    ]:
        sub.add_parser(name, parents=[common], help=help_)
    for name, help_ in [("estimate", "FLOPs and energy report"),
                        ("bench", "classify + estimate with timing")]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--K", type=int)
        p.add_argument("--N", type=int)
        p.add_argument("--M", type=int)
        p.add_argument("--mhat", type=int)
        p.add_argument("--joules-per-flop", type=float, default=9.09e-14)
    return parser


def apply_overrides(cfg, args) -> dict:
    if args.out is not None:
        cfg["out"] = args.out
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ValidationError("--seed must be an unsigned 64-bit integer")
        cfg["sampling"]["seed"] = args.seed
        cfg["weights_seed"] = args.seed
    for flag, key in (("lam", "lam"), ("tau", "tau"), ("steps", "steps"), ("dt", "dt")):
        value = getattr(args, flag)
        if value is not None:
            cfg["lca"][key] = value
    if args.decoder is not None:
        cfg["decoder"] = args.decoder
    for split in SPLITS:
        value = getattr(args, split)
        if value is not None:
            cfg[split] = {"inputs": str(Path(value).resolve()),
                          "format": (cfg[split] or {}).get("format", "canonical-binary")}
    if args.fmt is not None:
        for split in SPLITS:
            if cfg[split] is not None:
                cfg[split]["format"] = args.fmt
    if args.normalization is not None:
        cfg["normalization"] = args.normalization
    if args.weights is not None:
        cfg["weights_path"] = str(Path(args.weights).resolve())
    if args.workers is not None:
        cfg["workers"] = args.workers
    cfg["out"] = str(Path(cfg["out"]).resolve())
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        validate_config(cfg)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "extract":
            return cmd_extract(cfg)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "classify":
            return cmd_classify(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg, args)
        return cmd_bench(cfg, args)
    except PointLcaError as exc:
        log.error("%s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
