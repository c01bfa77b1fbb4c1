"""Command-line front end: extract, train, sweep, classify, segment.

Settings come from built-in defaults, then ``--config`` (JSON), then flags.
Logs go to stderr, artifacts to files, one JSON result to stdout.
Exit codes: 0 success, 2 usage or input error, 3 lesion segmentation failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import evaluation
from .dataset_io import DatasetError, LoadReport, read_feature_table, read_image, write_feature_table
from .features import FEATURE_ORDER, DegenerateLesionError
from .mlp import Model
from .pipeline import (AUGMENT_MODES, HIDDEN_SIZES, ConfigError, PipelineConfig, analyze_image,
                       check_samples, extract_dataset)
from .trainers import ALGORITHM_NAMES, ALGORITHMS, TrainerConfig

log = logging.getLogger("leafdx")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3


class InputError(Exception):
    """Bad input detected by a command; exits with status 2."""


# flag dest -> PipelineConfig field; trainer settings are prefixed "trainer."
_OVERRIDES = {
    "dataset": "dataset_root", "output_dir": "output_dir", "features": "features_csv",
    "glcm_levels": "glcm_levels", "k_max": "k_max", "lesion": "lesion",
    "segmentation_seed": "segmentation_seed", "augment": "augment", "max_side": "max_side",
    "hidden": "n_hidden", "trials": "trials", "ratio": "ratio", "base_seed": "base_seed",
    "jobs": "jobs", "algorithm": "trainer.algorithm", "epochs": "trainer.max_epochs",
    "seed": "trainer.seed", "goal": "trainer.goal",
}


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dump(obj) + "\n", encoding="utf-8")


def build_config(args: argparse.Namespace) -> PipelineConfig:
    base = PipelineConfig.load(args.config).to_dict() if args.config else PipelineConfig().to_dict()
    for dest, key in _OVERRIDES.items():
        v = getattr(args, dest, None)
        if v is None:
            continue
        if key.startswith("trainer."):
            base["trainer"][key.split(".", 1)[1]] = v
        else:
            base[key] = v
    try:
        return PipelineConfig.from_dict(base)
    except ConfigError as exc:
        msg = str(exc)
        if "unknown algorithm" in msg:
            msg = f"unknown algorithm; valid names: {', '.join(ALGORITHMS)}"
        raise InputError(msg) from exc


# ---------------------------------------------------------------- commands

def cmd_extract(cfg: PipelineConfig) -> dict:
    report = LoadReport()
    try:
        samples = extract_dataset(cfg, report)
    except DatasetError as exc:
        raise InputError(str(exc)) from exc
    if "no classes found" in report.warnings:
        raise InputError("no classes found")
    if not samples:
        raise InputError("no image could be processed")
    out = cfg.features_path
    out.parent.mkdir(parents=True, exist_ok=True)
    write_feature_table(samples, out)
    log.info("wrote %d rows to %s", len(samples), out)
    return {"features_csv": str(out), "rows": len(samples),
            "images": len({s.origin for s in samples}),
            "augmented_rows": sum(s.is_augmented for s in samples),
            "skipped": [{"path": p, "reason": r} for p, r in report.skipped]}


def _load_samples(cfg: PipelineConfig):
    path = cfg.features_path
    if not path.exists():
        raise InputError(f"feature table not found: {path}")
    samples = read_feature_table(path)
    check_samples(samples)
    return samples


def cmd_train(cfg: PipelineConfig) -> dict:
    samples = _load_samples(cfg)
    model, report = evaluation.fit_model(samples, cfg.trainer, cfg.n_hidden)
    X = np.array([s.features for s in samples])
    y = np.array([s.label.index for s in samples])
    train_acc = float(np.mean(model.predict(X) == y))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    rep = report.to_dict()
    rep.update(n_hidden=cfg.n_hidden, train_accuracy=train_acc, n_samples=len(samples),
               trainer=cfg.trainer.to_dict())
    _write_json(out / "report.json", rep)
    log.info("%s N=%d: %s after %d epochs", cfg.trainer.algorithm, cfg.n_hidden,
             report.stop_reason, report.epochs_run)
    return {"model": str(out / "model.json"), "report": str(out / "report.json"),
            "stop_reason": report.stop_reason, "epochs_run": report.epochs_run,
            "final_loss": rep["final_loss"], "train_accuracy": train_acc}


def cmd_sweep(cfg: PipelineConfig) -> dict:
    samples = _load_samples(cfg)
    out = Path(cfg.output_dir)
    grid: dict[str, dict[int, float | None]] = {}
    failures = []
    for alg in ALGORITHMS:
        grid[alg] = {}
        for n in HIDDEN_SIZES:
            tcfg = TrainerConfig.from_dict({**cfg.trainer.to_dict(), "algorithm": alg})
            try:
                summary = evaluation.run_trials(samples, tcfg, n, cfg.trials, cfg.base_seed,
                                                cfg.ratio, cfg.jobs)
            except Exception as exc:  # a failed cell must not sink the sweep
                log.error("%s N=%d failed: %s", alg, n, exc)
                failures.append({"algorithm": alg, "n_hidden": n, "error": str(exc)})
                grid[alg][n] = None
                continue
            grid[alg][n] = summary.mean_accuracy
            _write_json(out / "trials" / f"{alg}_N{n}.json", summary.to_dict())
            log.info("%s N=%d mean accuracy %.4f", alg, n, summary.mean_accuracy)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "name", *(f"N={n}" for n in HIDDEN_SIZES)])
        for alg in ALGORITHMS:
            w.writerow([alg, ALGORITHM_NAMES[alg],
                        *("" if grid[alg][n] is None else repr(grid[alg][n]) for n in HIDDEN_SIZES)])
    return {"sweep_csv": str(out / "sweep.csv"), "grid": grid, "failures": failures}


def _read_image_or_fail(path: str):
    try:
        return read_image(path)
    except Exception as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc


def cmd_classify(cfg: PipelineConfig, model_path: str, image_path: str) -> dict:
    try:
        model = Model.load(model_path)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot load model {model_path}: {exc}") from exc
    a = analyze_image(_read_image_or_fail(image_path), cfg)
    cls = int(model.predict(a.features)[0])
    name = model.class_names[cls] if cls < len(model.class_names) else f"class{cls}"
    return {"image": image_path, "class_index": cls, "class_name": name,
            "features": dict(zip(FEATURE_ORDER, a.features.tolist())),
            "clusters": a.cluster_report()}


def cmd_segment(cfg: PipelineConfig, image_path: str) -> dict:
    a = analyze_image(_read_image_or_fail(image_path), cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(image_path).stem
    mask_path = out / f"{stem}_mask.png"
    Image.fromarray(a.segmentation.lesion_mask.astype(np.uint8) * 255).save(mask_path)
    rep = a.cluster_report()
    _write_json(out / f"{stem}_segment.json", rep)
    return {"mask": str(mask_path), "report": str(out / f"{stem}_segment.json"), **rep}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--output-dir", help="directory for artifacts (default: out)")
    common.add_argument("--jobs", type=int, help="worker processes (default: 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    seg = argparse.ArgumentParser(add_help=False)
    seg.add_argument("--k-max", type=int, help="largest k tried by the elbow search (default: 8)")
    seg.add_argument("--lesion", help="'auto' (largest a* centroid) or a fixed cluster index")
    seg.add_argument("--segmentation-seed", type=int, help="k-means seed (default: 42)")
    seg.add_argument("--glcm-levels", type=int, help="gray levels for the co-occurrence matrix (default: 8)")
    seg.add_argument("--max-side", type=int, help="downscale so the longer side is at most this; 0 = off")

    table = argparse.ArgumentParser(add_help=False)
    table.add_argument("--features", help="feature CSV (default: <output-dir>/features.csv)")

    trainer = argparse.ArgumentParser(add_help=False)
    trainer.add_argument("--algorithm", type=str.upper,
                         help=f"one of {', '.join(ALGORITHMS)} (default: BR)")
    trainer.add_argument("--epochs", type=int, help="maximum epochs (default: 1000)")
    trainer.add_argument("--seed", type=int, help="weight-initialisation seed (default: 0)")
    trainer.add_argument("--goal", type=float, help="stop once training MSE is at or below this")

    p = argparse.ArgumentParser(prog="leafdx", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract", parents=[common, seg, table],
                       help="segment every image and write the feature CSV")
    e.add_argument("--dataset", help="root with one sub-directory per class")
    e.add_argument("--augment", choices=AUGMENT_MODES,
                   help="'all' adds 90/180/270 degree rows flagged as augmented (default: none)")

    t = sub.add_parser("train", parents=[common, table, trainer],
                       help="train one network on the feature CSV")
    t.add_argument("--hidden", type=int, help="hidden neurons N (default: 20)")

    s = sub.add_parser("sweep", parents=[common, table, trainer],
                       help="10 algorithms x N in {5,10,15,20} accuracy grid")
    s.add_argument("--trials", type=int, help="repeated 7:3 splits per cell (default: 10)")
    s.add_argument("--ratio", type=float, help="training fraction (default: 0.7)")
    s.add_argument("--base-seed", type=int, help="trial i uses seed base_seed + i (default: 0)")

    c = sub.add_parser("classify", parents=[common, seg], help="predict the disease of one image")
    c.add_argument("--model", required=True, help="model JSON written by train")
    c.add_argument("image")

    g = sub.add_parser("segment", parents=[common, seg],
                       help="write the lesion mask PNG and cluster report for one image")
    g.add_argument("image")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = build_config(args)
        if args.command == "extract":
            result = cmd_extract(cfg)
        elif args.command == "train":
            result = cmd_train(cfg)
        elif args.command == "sweep":
            result = cmd_sweep(cfg)
        elif args.command == "classify":
            result = cmd_classify(cfg, args.model, args.image)
        else:
            result = cmd_segment(cfg, args.image)
    except DegenerateLesionError as exc:
        log.error("lesion segmentation failed: %s", exc)
        print("lesion segmentation failed", file=sys.stderr)
        return EXIT_DEGENERATE
    except (InputError, ConfigError, DatasetError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(_dump(result))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
