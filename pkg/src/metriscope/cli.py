"""Command-line pipeline: phantom generation, perturbation sweeps, feature
extraction, metric evaluation, and sensitivity reporting.

Exit codes: 0 success, 2 config validation, 3 missing input, 4 numeric
failure; on error a single JSON object is written to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from . import analysis, featstore, metrics, perturb
from .core import RngStream, partition_dataset, read_image_set, write_image_set
from .featstore import ExtractorSpec, read_femb, read_probs_csv, write_femb
from .metrics import MetricConfig, MetricError, MetricReport, MissingInputError, evaluate_all
from .phantom import PhantomSpec, generate_phantom_set

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    """Invalid run configuration or flags."""


class MissingArtifactError(FileNotFoundError):
    """A referenced input file or directory does not exist."""


def _thread_count(flag_value: int | None) -> int:
    """--threads flag with METRISCOPE_THREADS fallback; 0 means auto."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get("METRISCOPE_THREADS")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"METRISCOPE_THREADS={env!r} is not an integer") from None


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _canonical_hash(doc) -> str:
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def demo_config() -> dict:
    """The bundled desk-scale demo configuration."""
    with resources.files("metriscope").joinpath("data/demo_config.json").open() as f:
        return json.load(f)


# --- subcommand implementations -------------------------------------------------


def _parse_mix(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse mix {text!r}") from None


def cmd_gen_phantoms(args) -> int:
    try:
        spec = PhantomSpec(
            count=args.count, size=args.size,
            class_mix=_parse_mix(args.class_mix),
            source_mix=_parse_mix(args.source_mix),
            lesion=not args.no_lesion, seed=args.seed,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
    image_set = generate_phantom_set(spec)
    out = Path(args.out)
    write_image_set(image_set, out)
    print(f"wrote {len(image_set)} phantoms to {out}")
    return EXIT_OK


def _load_set(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"image set not found: {path}")
    return read_image_set(path)


def cmd_perturb(args) -> int:
    base = _load_set(args.in_path)
    reference = _load_set(args.ref) if args.ref else None
    sweep_path = Path(args.spec)
    if not sweep_path.exists():
        raise MissingArtifactError(f"sweep file not found: {sweep_path}")
    try:
        sweep = perturb.load_sweep(sweep_path)
    except (ValueError, KeyError) as e:
        raise ConfigError(f"bad sweep file: {e}") from None
    out = Path(args.out)
    for spec in sweep:
        label = perturb.spec_label(spec)
        perturbed = perturb.apply_perturbation(base, spec, reference=reference)
        write_image_set(perturbed, out / label)
        print(f"wrote condition {label} ({len(perturbed)} images)")
    return EXIT_OK


def _extract(image_set, extractor: ExtractorSpec):
    if extractor.kind == "global64":
        return featstore.extract_global64(image_set)
    if extractor.kind == "spatial48":
        return featstore.extract_spatial48(image_set, int(extractor.params.get("g", 4)))
    path = Path(extractor.params["path"])
    if not path.exists():
        raise MissingArtifactError(f"external embedding not found: {path}")
    return read_femb(path)


def cmd_embed(args) -> int:
    image_set = _load_set(args.in_path)
    try:
        spec = ExtractorSpec(kind=args.extractor, params={"g": args.grid})
    except ValueError as e:
        raise ConfigError(str(e)) from None
    fm = _extract(image_set, spec)
    write_femb(fm, args.out)
    print(f"wrote {fm.n}x{fm.d} embedding ({fm.extractor_tag}) to {args.out}")
    return EXIT_OK


def _load_features(path, extractor: ExtractorSpec):
    """Image-set directories are extracted on the fly; FEMB files load directly."""
    path = Path(path)
    if path.is_file() and path.suffix == ".femb":
        return read_femb(path)
    return _extract(_load_set(path), extractor)


def _metric_config(doc: dict, enabled=None) -> MetricConfig:
    known = {
        "prdc_k", "kid_subset_size", "kid_subsets", "asw_projections",
        "is_splits", "ct_cells", "ct_min_cell", "fd_sizes", "fd_reps",
        "kmeans_classes", "softmax_temperature", "probs_source",
    }
    unknown = set(doc) - known - {"enabled"}
    if unknown:
        raise ConfigError(f"unknown metric options: {sorted(unknown)}")
    kwargs = {k: v for k, v in doc.items() if k in known}
    if "fd_sizes" in kwargs and kwargs["fd_sizes"] is not None:
        kwargs["fd_sizes"] = tuple(int(s) for s in kwargs["fd_sizes"])
    if enabled is None:
        enabled = doc.get("enabled")
    try:
        if enabled is not None:
            return MetricConfig(enabled=tuple(enabled), **kwargs)
        return MetricConfig(**kwargs)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def cmd_metrics(args) -> int:
    extractor = ExtractorSpec(kind=args.extractor, params={"g": args.grid})
    real = _load_features(args.real, extractor)
    gen = _load_features(args.gen, extractor)
    metric_options = {}
    if args.config:
        config_path = Path(args.config)
        if not config_path.exists():
            raise MissingArtifactError(f"config not found: {config_path}")
        with open(config_path) as f:
            metric_options = dict(json.load(f).get("metrics", {}))
    enabled = (tuple(args.metrics.split(",")) if args.metrics
               else tuple(metric_options.pop("enabled", metrics.DEFAULT_METRICS)))
    metric_options.pop("enabled", None)

    spatial_spec = ExtractorSpec(kind="spatial48", params={"g": args.grid})
    real_spatial = gen_spatial = None
    if "sfid" in enabled:
        if args.real_spatial and args.gen_spatial:
            real_spatial = _load_features(args.real_spatial, spatial_spec)
            gen_spatial = _load_features(args.gen_spatial, spatial_spec)
        elif Path(args.real).is_dir() and Path(args.gen).is_dir():
            real_spatial = _load_features(args.real, spatial_spec)
            gen_spatial = _load_features(args.gen, spatial_spec)
    train = _load_features(args.train, extractor) if args.train else None
    probs = None
    if args.probs:
        probs_path = Path(args.probs)
        if not probs_path.exists():
            raise MissingArtifactError(f"probs file not found: {probs_path}")
        probs = read_probs_csv(probs_path)

    # unless asked for explicitly, drop metrics whose extra inputs are absent
    # (the Phase-2 FEMB path has no images to re-extract from)
    if args.metrics is None:
        dropped = set()
        if train is None:
            dropped.add("ct")
        if real_spatial is None or gen_spatial is None:
            dropped.add("sfid")
        enabled = tuple(m for m in enabled if m not in dropped)
    if probs is not None:
        metric_options["probs_source"] = "external"
    config = _metric_config(metric_options, enabled=enabled)

    try:
        report = evaluate_all(
            real, gen, config=config, rng=RngStream(args.seed),
            real_spatial=real_spatial, gen_spatial=gen_spatial,
            train=train, probs=probs,
            real_name=Path(args.real).stem, gen_name=Path(args.gen).stem)
    except MissingInputError as e:
        raise MissingArtifactError(str(e)) from None
    report.to_json(args.out)
    print(f"wrote metric report to {args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    baseline = MetricReport.from_json(args.baseline)
    conditions = []
    for item in args.conditions:
        if "=" not in item:
            raise ConfigError(f"conditions must be name=path, got {item!r}")
        name, path = item.split("=", 1)
        if not Path(path).exists():
            raise MissingArtifactError(f"condition report not found: {path}")
        conditions.append((name, MetricReport.from_json(path)))
    try:
        table = analysis.build_sensitivity(baseline, conditions)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    for fmt in args.formats.split(","):
        analysis.emit_heatmap(table, fmt, out.with_suffix(f".{fmt}"))
        print(f"wrote {out.with_suffix('.' + fmt)}")
    return EXIT_OK


# --- full pipeline ---------------------------------------------------------------


def _validate_run_config(doc: dict) -> dict:
    required = {"seed", "datasets", "reference", "base", "sweep"}
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"run config missing keys: {sorted(missing)}")
    for role in ("reference", "base"):
        if doc[role] not in doc["datasets"]:
            raise ConfigError(f"{role} set {doc[role]!r} not among datasets "
                              f"{sorted(doc['datasets'])}")
    if not isinstance(doc["sweep"], list):
        raise ConfigError("sweep must be a list of perturbation specs")
    return doc


def _materialize_dataset(name: str, entry: dict, out_dir: Path):
    if "phantom" in entry:
        try:
            spec = PhantomSpec(**entry["phantom"])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"dataset {name!r}: {e}") from None
        image_set = generate_phantom_set(spec)
    elif "path" in entry:
        image_set = _load_set(entry["path"])
    else:
        raise ConfigError(f"dataset {name!r} needs 'phantom' or 'path'")
    write_image_set(image_set, out_dir / "sets" / name)
    return image_set


def cmd_run(config: dict, out_dir, seed_override: int | None = None) -> int:
    """The full Phase-1 loop: materialize sets, apply the sweep, extract
    features, evaluate the metric suite per condition, and emit the
    sensitivity heatmap plus a checksummed manifest."""
    config = _validate_run_config(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = int(seed_override if seed_override is not None else config["seed"])
    rng = RngStream(seed)

    datasets = {name: _materialize_dataset(name, entry, out_dir)
                for name, entry in config["datasets"].items()}
    reference = datasets[config["reference"]]
    base = datasets[config["base"]]

    try:
        sweep = [perturb.parse_perturbation(obj) for obj in config["sweep"]]
    except (ValueError, KeyError) as e:
        raise ConfigError(f"bad sweep spec: {e}") from None

    metric_cfg = _metric_config(config.get("metrics", {}))
    ext_doc = config.get("extractor", {"kind": "global64"})
    try:
        extractor = ExtractorSpec(kind=ext_doc.get("kind", "global64"),
                                  params=ext_doc.get("params", ext_doc))
    except ValueError as e:
        raise ConfigError(str(e)) from None
    grid = int(config.get("spatial_grid", 4))

    # ct_score needs a train/test split of the real data: the first half
    # anchors the cells, the held-out half serves as every metric's reference
    want_ct = "ct" in metric_cfg.enabled
    if want_ct:
        train_set, ref_set = partition_dataset(reference, [0.5, 0.5], rng.split(0))
    else:
        train_set, ref_set = None, reference

    feat_dir = out_dir / "features"
    feat_dir.mkdir(exist_ok=True)
    real = _extract(ref_set, extractor)
    write_femb(real, feat_dir / "reference.femb")
    train = None
    if want_ct:
        train = _extract(train_set, extractor)
        write_femb(train, feat_dir / "train.femb")
    want_sfid = "sfid" in metric_cfg.enabled
    real_spatial = featstore.extract_spatial48(ref_set, grid) if want_sfid else None

    report_dir = out_dir / "reports"
    report_dir.mkdir(exist_ok=True)

    def run_condition(label: str, image_set) -> MetricReport:
        gen = _extract(image_set, extractor)
        write_femb(gen, feat_dir / f"{label}.femb")
        gen_spatial = featstore.extract_spatial48(image_set, grid) if want_sfid else None
        # rng rooted at the bare seed so `metrics --seed <seed>` on the saved
        # FEMB files reproduces these values exactly (partial-rerun contract)
        report = evaluate_all(
            real, gen, config=metric_cfg, rng=RngStream(seed),
            real_spatial=real_spatial, gen_spatial=gen_spatial,
            train=train, real_name=ref_set.name, gen_name=image_set.name)
        report.to_json(report_dir / f"{label}.json")
        return report

    baseline_report = run_condition("baseline", base)
    conditions = []
    for spec in sweep:
        label = perturb.spec_label(spec)
        perturbed = perturb.apply_perturbation(base, spec, reference=ref_set)
        write_image_set(perturbed, out_dir / "sets" / label)
        conditions.append((label, run_condition(label, perturbed)))
        print(f"condition {label} done")

    table = analysis.build_sensitivity(baseline_report, conditions)
    for fmt in ("csv", "json", "svg"):
        analysis.emit_heatmap(table, fmt, out_dir / f"heatmap.{fmt}")

    artifacts = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            artifacts[str(path.relative_to(out_dir))] = _sha256(path)
    manifest = {
        "config_hash": _canonical_hash(config),
        "seed": seed,
        "created": datetime.now(timezone.utc).isoformat(),
        "artifacts": artifacts,
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"run complete: {len(conditions)} conditions, "
          f"manifest at {out_dir / 'manifest.json'}")
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--out", required=True, help="output path")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (0 = auto; env METRISCOPE_THREADS)")
    common.add_argument("--config", default=None, help="JSON config file")

    parser = argparse.ArgumentParser(
        prog="metriscope",
        description="Stress-testing toolkit for no-reference image-quality metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-phantoms", parents=[common],
                       help="generate a synthetic phantom set")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--class-mix", default="0.4,0.4,0.2")
    p.add_argument("--source-mix", default="0.5,0.5")
    p.add_argument("--no-lesion", action="store_true")

    p = sub.add_parser("perturb", parents=[common],
                       help="apply a perturbation sweep to an image set")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--ref", default=None, help="reference set for external_dup")
    p.add_argument("--spec", required=True, help="JSON sweep file")

    p = sub.add_parser("embed", parents=[common],
                       help="extract features from an image set to FEMB")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--extractor", choices=["global64", "spatial48"],
                   default="global64")
    p.add_argument("--grid", type=int, default=4)

    p = sub.add_parser("metrics", parents=[common],
                       help="evaluate the metric suite on a (real, gen) pair")
    p.add_argument("--real", required=True, help="image-set dir or .femb file")
    p.add_argument("--gen", required=True, help="image-set dir or .femb file")
    p.add_argument("--real-spatial", default=None)
    p.add_argument("--gen-spatial", default=None)
    p.add_argument("--train", default=None, help="train features for ct_score")
    p.add_argument("--probs", default=None, help="external ClassProbMatrix CSV")
    p.add_argument("--metrics", default=None, help="comma list of metric names")
    p.add_argument("--extractor", choices=["global64", "spatial48"],
                   default="global64")
    p.add_argument("--grid", type=int, default=4)

    p = sub.add_parser("analyze", parents=[common],
                       help="build the sensitivity table from metric reports")
    p.add_argument("--baseline", required=True)
    p.add_argument("--conditions", nargs="+", required=True,
                   metavar="NAME=REPORT.json")
    p.add_argument("--formats", default="csv,json,svg")

    p = sub.add_parser("run", parents=[common],
                       help="full pipeline from a run-config JSON")
    p.add_argument("--demo", action="store_true",
                   help="use the bundled demo configuration")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _thread_count(args.threads)  # validated; computation is numpy-internal
        if args.command == "gen-phantoms":
            return cmd_gen_phantoms(args)
        if args.command == "perturb":
            return cmd_perturb(args)
        if args.command == "embed":
            return cmd_embed(args)
        if args.command == "metrics":
            return cmd_metrics(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "run":
            if args.demo:
                config = demo_config()
            elif args.config:
                config_path = Path(args.config)
                if not config_path.exists():
                    raise MissingArtifactError(f"config not found: {config_path}")
                try:
                    with open(config_path) as f:
                        config = json.load(f)
                except json.JSONDecodeError as e:
                    raise ConfigError(f"config is not valid JSON: {e}") from None
            else:
                raise ConfigError("run requires --config or --demo")
            seed = args.seed if args.seed != 0 else None
            return cmd_run(config, args.out, seed_override=seed)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        _emit_error(EXIT_CONFIG, str(e))
        return EXIT_CONFIG
    except (MissingArtifactError, FileNotFoundError, MissingInputError) as e:
        _emit_error(EXIT_MISSING, str(e))
        return EXIT_MISSING
    except MetricError as e:
        _emit_error(EXIT_NUMERIC, str(e))
        return EXIT_NUMERIC


def _emit_error(code: int, message: str) -> None:
    sys.stderr.write(json.dumps({"code": code, "message": message}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
