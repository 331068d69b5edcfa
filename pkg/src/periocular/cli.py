"""Command-line entry point: ``periocular {prepare,experiment,relevance,fanova,synth}``.

Settings come from a flat TOML file (``--config``) with command-line flags
taking precedence. Every run is seeded explicitly. Exit codes: 0 success,
1 usage or configuration error, 2 data error, 3 internal invariant breach.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import ManifestError, SplitPlan, dump_manifest, load_manifest, make_split, select
from .evaluation import DEFAULT_PARAMS, LeakageError, PipelineConfig, emit_table, evaluate_features, report_json
from .fanova import CurveParseError, fanova_test, read_curves_csv
from .features import FeatureSpec, extract_matrix, extractor_names, spec_for
from .imagecore import (
    CANONICAL_HEIGHT,
    CANONICAL_WIDTH,
    DecodeError,
    GrayImage,
    OcclusionCircle,
    apply_occlusion,
    encode_pgm,
    read_image,
    resize_bilinear,
)
from .learn import KINDS, LabeledSet, SpecMismatchError, TrainingError
from .relevance import FIGURE_TOP_N, importance_from_gbt, relevance_model, render_overlay, sweep_csv, threshold_sweep
from .synth import SynthConfig, write_benchmark

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3
CONDITIONS = ("non_occluded", "occluded")
DEFAULT_THRESHOLDS = (0.0, 0.0001, 0.0002, 0.0005, 0.001, 0.002)


class UsageError(Exception):
    pass


class DataError(Exception):
    def __init__(self, message: str, details=()):
        super().__init__(message)
        self.details = list(details)


@dataclass
class ExperimentConfig:
    manifest: str = ""
    image_root: str = ""
    condition: str = "non_occluded"
    extractor: str = "ulbp_concat"
    learner: str = "svm"
    params: dict = field(default_factory=dict)
    grid: list | None = None
    train_fraction: float = 0.6
    k: int = 5
    seed: int | None = None
    out: str = "out"
    thresholds: list = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    relevance_extractor: str = "raw"
    retrain: str = "svm"
    gbt: dict = field(default_factory=dict)
    top_n: list = field(default_factory=lambda: list(FIGURE_TOP_N))
    n_boot: int = 1000

    def validate(self) -> None:
        if self.seed is None:
            raise UsageError("a seed is required (config key 'seed' or --seed)")
        if self.condition not in CONDITIONS:
            raise UsageError(f"condition must be one of {CONDITIONS}, got {self.condition!r}")
        for name in (self.extractor, self.relevance_extractor):
            if name not in extractor_names():
                raise UsageError(f"unknown extractor {name!r}; choose from {extractor_names()}")
        for kind in (self.learner, self.retrain):
            if kind not in KINDS:
                raise UsageError(f"unknown learner {kind!r}; choose from {list(KINDS)}")
        if not 0 < self.train_fraction < 1 or self.k < 2:
            raise UsageError("train_fraction must lie in (0, 1) and k must be at least 2")

    def hash(self) -> str:
        canon = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def cache_dir(self) -> Path:
        return self.out_dir / "cache" / self.condition

    @property
    def split_path(self) -> Path:
        return self.out_dir / "split.json"


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    raw: dict = {}
    base = Path(".")
    if path:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"config {path}: {exc}") from None
        base = Path(path).parent
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    # paths in a config file are relative to that file
    for key in ("manifest", "image_root", "out"):
        if raw.get(key):
            raw[key] = str(base / raw[key])
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ExperimentConfig(**raw)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    cfg.validate()
    return cfg


def _provenance(cfg: ExperimentConfig, command: str) -> dict:
    return {"command": command, "config_hash": cfg.hash(), "seed": cfg.seed, "version": __version__}


def _stamp(cfg: ExperimentConfig, command: str) -> str:
    p = _provenance(cfg, command)
    return f"config_hash={p['config_hash']} seed={p['seed']} command={command}"


def _write(path: Path, data: bytes | str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    path.write_bytes(data)


def _cache_name(image_path: str) -> str:
    return str(Path(image_path).with_suffix(".pgm"))


# --- prepare ---------------------------------------------------------------

def _canonical(img: GrayImage, rec, condition: str) -> GrayImage:
    circle = rec.occlusion
    out = resize_bilinear(img, CANONICAL_WIDTH, CANONICAL_HEIGHT)
    if condition == "occluded":
        # circles are given in source pixel coordinates
        sx, sy = CANONICAL_WIDTH / img.width, CANONICAL_HEIGHT / img.height
        scaled = OcclusionCircle(circle.cx * sx, circle.cy * sy, circle.r * min(sx, sy))
        out = apply_occlusion(out, scaled)
    return out


def cmd_prepare(cfg: ExperimentConfig) -> int:
    if not cfg.manifest:
        raise UsageError("config needs 'manifest'")
    manifest = Path(cfg.manifest)
    try:
        records = load_manifest(manifest.read_bytes())
    except OSError as exc:
        raise DataError(f"cannot read manifest: {exc}") from None
    root = Path(cfg.image_root) if cfg.image_root else manifest.parent
    errors, images = [], []
    for rec in records:
        if cfg.condition == "occluded" and rec.occlusion is None:
            errors.append(f"{rec.image_path}: no occlusion circle for the occluded condition")
            continue
        try:
            img = read_image(root / rec.image_path)
        except FileNotFoundError:
            errors.append(f"{rec.image_path}: file not found")
            continue
        except DecodeError as exc:
            errors.append(f"{rec.image_path}: {exc}")
            continue
        images.append((rec, img))
    if errors:
        _write(cfg.out_dir / "prepare_errors.json", json.dumps(
            {**_provenance(cfg, "prepare"), "errors": errors}, indent=2, sort_keys=True) + "\n")
        raise DataError(f"{len(errors)} of {len(records)} images could not be prepared", errors)
    try:
        plan = make_split(records, cfg.train_fraction, cfg.k, cfg.seed)
    except ValueError as exc:
        raise DataError(f"cannot split subjects: {exc}") from None
    cached = []
    for rec, img in images:
        name = _cache_name(rec.image_path)
        _write(cfg.cache_dir / name, encode_pgm(_canonical(img, rec, cfg.condition)))
        cached.append(type(rec)(name, rec.subject_id, rec.gender, rec.eye, rec.session, rec.occlusion))
    _write(cfg.cache_dir / "manifest.csv", dump_manifest(cached))
    _write(cfg.split_path, plan.to_json())
    _write(cfg.cache_dir / "prepare.json", json.dumps(
        {**_provenance(cfg, "prepare"), "n_images": len(cached), "condition": cfg.condition},
        indent=2, sort_keys=True) + "\n")
    print(f"prepared {len(cached)} images under {cfg.cache_dir}")
    return EXIT_OK


# --- experiment ------------------------------------------------------------

def _load_cache(cfg: ExperimentConfig):
    manifest = cfg.cache_dir / "manifest.csv"
    if not manifest.exists() or not cfg.split_path.exists():
        raise UsageError(f"no prepared cache for {cfg.condition!r} under {cfg.out_dir}; run 'prepare' first")
    records = load_manifest(manifest.read_bytes())
    plan = SplitPlan.from_json(cfg.split_path.read_text())
    records = select(records, plan.train_subjects | plan.test_subjects)
    images = [read_image(cfg.cache_dir / r.image_path) for r in records]
    return records, images, plan


def _labeled(records, images, name: str, jobs: int) -> LabeledSet:
    X, spec = extract_matrix(images, name, jobs)
    return LabeledSet(X, [r.label for r in records], [r.subject_id for r in records], spec.spec_id)


def cmd_experiment(cfg: ExperimentConfig, jobs: int) -> int:
    records, images, plan = _load_cache(cfg)
    data = _labeled(records, images, cfg.extractor, jobs)
    expected = spec_for(cfg.extractor)
    if data.spec_id != expected.spec_id:
        raise SpecMismatchError(f"cached features do not match extractor {cfg.extractor!r}")
    grid = tuple(dict(g) for g in cfg.grid) if cfg.grid is not None else None
    pipeline = PipelineConfig(cfg.extractor, cfg.learner, dict(cfg.params), grid, cfg.seed)
    report = evaluate_features(data, plan, pipeline, jobs)
    stem = f"report_{cfg.extractor.replace(':', '')}_{cfg.condition}"
    extra = {**_provenance(cfg, "experiment"), "config": asdict(cfg), "extractor": cfg.extractor,
             "condition": cfg.condition, "learner": cfg.learner}
    _write(cfg.out_dir / f"{stem}.json", report_json(report, extra))
    table = emit_table({(cfg.extractor, cfg.condition): report})
    _write(cfg.out_dir / f"{stem}.csv", f"# {_stamp(cfg, 'experiment')}\n{table}")
    print(table, end="")
    return EXIT_OK


# --- relevance -------------------------------------------------------------

def _mean_image(images) -> GrayImage:
    mean = np.mean([im.data for im in images], axis=0)
    return GrayImage.from_array(np.floor(mean + 0.5).astype(np.uint8))


def cmd_relevance(cfg: ExperimentConfig, jobs: int) -> int:
    spec: FeatureSpec = spec_for(cfg.relevance_extractor)
    if not spec.has_spatial_loci:
        raise UsageError(f"extractor {cfg.relevance_extractor!r} has no pixel loci for overlays")
    records, images, plan = _load_cache(cfg)
    data = _labeled(records, images, cfg.relevance_extractor, jobs)
    train_rows = [i for i, r in enumerate(records) if r.subject_id in plan.train_subjects]
    test_rows = [i for i, r in enumerate(records) if r.subject_id in plan.test_subjects]
    tr, te = data.subset(train_rows), data.subset(test_rows)
    imp = importance_from_gbt(relevance_model(tr, cfg.seed, cfg.gbt))
    thresholds = [float(t) for t in cfg.thresholds]
    params = {**DEFAULT_PARAMS.get(cfg.retrain, {}), **cfg.params}
    results = threshold_sweep(tr, te, thresholds, cfg.retrain, params, cfg.seed, importance=imp)
    stamp = _stamp(cfg, "relevance")
    _write(cfg.out_dir / "relevance_sweep.csv", f"# {stamp}\n{sweep_csv(results)}")
    base = _mean_image([images[i] for i in train_rows])
    for n in cfg.top_n:
        _write(cfg.out_dir / f"overlay_top{n}.ppm", render_overlay(imp, spec, int(n), base, stamp))
    summary = {
        **_provenance(cfg, "relevance"),
        "config": asdict(cfg),
        "feature_length": len(imp),
        "n_nonzero_importance": imp.n_nonzero,
        "importance": imp.scores.tolist(),
        "sweep": [
            {"threshold": r.threshold, "n_selected": r.n_selected, "ccr": r.ccr_after_retrain,
             "degenerate": r.degenerate, "seed": r.seed}
            for r in results
        ],
    }
    _write(cfg.out_dir / "relevance.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(sweep_csv(results), end="")
    return EXIT_OK


# --- fanova ----------------------------------------------------------------

def cmd_fanova(cfg: ExperimentConfig, curves: str, jobs: int) -> int:
    try:
        text = Path(curves).read_text()
    except OSError as exc:
        raise DataError(f"cannot read curves: {exc}") from None
    try:
        groups = read_curves_csv(text)
    except CurveParseError as exc:
        raise DataError(f"{curves}: {exc}") from None
    except ValueError as exc:
        raise DataError(f"{curves}: {exc}") from None
    try:
        result = fanova_test(groups, cfg.n_boot, cfg.seed, jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    doc = {**json.loads(result.to_json()), **_provenance(cfg, "fanova"),
           "groups": [g.label for g in groups]}
    body = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    _write(cfg.out_dir / "fanova.json", body)
    print(body, end="")
    return EXIT_OK


# --- synth -----------------------------------------------------------------

def cmd_synth(cfg: ExperimentConfig, n_subjects: int) -> int:
    synth = SynthConfig(n_subjects=n_subjects, seed=cfg.seed)
    manifest = write_benchmark(cfg.out_dir, synth)
    toml = (
        f'manifest = "manifest.csv"\nseed = {cfg.seed}\nout = "run"\n'
        f'extractor = "ulbp_concat"\nlearner = "svm"\n'
    )
    _write(cfg.out_dir / "experiment.toml", toml)
    print(f"wrote {2 * n_subjects} images and {manifest}")
    return EXIT_OK


# --- argument handling -----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file of flat key = value settings")
    common.add_argument("--seed", type=int, help="base seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=1, help="worker threads")
    common.add_argument("--out", help="output directory (overrides the config)")
    p = _Parser(prog="periocular", description="Periocular gender classification pipeline")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sp = sub.add_parser("prepare", parents=[common], help="split subjects and cache canonical images")
    sp.add_argument("--condition", choices=CONDITIONS)
    sp = sub.add_parser("experiment", parents=[common], help="cross-validate and evaluate one extractor")
    sp.add_argument("--condition", choices=CONDITIONS)
    sp.add_argument("--extractor")
    sp.add_argument("--learner")
    sp = sub.add_parser("relevance", parents=[common], help="gain-importance threshold sweep and overlays")
    sp.add_argument("--condition", choices=CONDITIONS)
    sp.add_argument("--thresholds", type=lambda s: [float(t) for t in s.split(",")],
                    help="comma-separated thresholds")
    sp = sub.add_parser("fanova", parents=[common], help="bootstrap functional ANOVA on a curves CSV")
    sp.add_argument("curves")
    sp.add_argument("--n-boot", type=int, dest="n_boot")
    sp = sub.add_parser("synth", parents=[common], help="write the synthetic periocular benchmark")
    sp.add_argument("--n-subjects", type=int, default=200, dest="n_subjects")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    overrides = {k: getattr(args, k, None) for k in
                 ("seed", "out", "condition", "extractor", "learner", "thresholds", "n_boot")}
    cfg = load_config(args.config, overrides)
    if args.command == "prepare":
        return cmd_prepare(cfg)
    if args.command == "experiment":
        return cmd_experiment(cfg, args.jobs)
    if args.command == "relevance":
        return cmd_relevance(cfg, args.jobs)
    if args.command == "fanova":
        return cmd_fanova(cfg, args.curves, args.jobs)
    return cmd_synth(cfg, args.n_subjects)


def main(argv=None) -> int:
    try:
        return run(argv)
    except SystemExit as exc:
        # argparse exits on --help, --version and bad usage
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, SpecMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for line in exc.details:
            print(f"  {line}", file=sys.stderr)
        return EXIT_DATA
    except (ManifestError, DecodeError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LeakageError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
