"""Command-line entry point.

Subcommands: generate, train, classify, evaluate, sensitivity, fixation,
pipeline and inspect. Output paths default to ``$TACTILE_PCA_OUTPUT_DIR``
(or the working directory).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import classify, data_model, evaluation, pca, plotting, sensitivity, synth

log = logging.getLogger("tactile_pca")

OUTPUT_DIR_ENV = "TACTILE_PCA_OUTPUT_DIR"
REPORT_SCHEMA = "tactile-evaluation"
FIXATION_SCHEMA = "tactile-fixation"
SENSITIVITY_SCHEMA = "tactile-sensitivity"
ARTIFACT_VERSION = 1

EXIT_OK = 0
EXIT_PARAM = 2
EXIT_IO = 3
EXIT_SCHEMA = 4
EXIT_DATA = 5


class ParameterError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    out: Path | None = None
    out_dir: Path | None = None
    dataset: Path | None = None
    model: Path | None = None
    classifier: Path | None = None
    predictions: Path | None = None
    manifold: Path | None = None
    fixation: Path | None = None
    paths: list[Path] = field(default_factory=list)
    preset: str = "cylinders-small"
    seed: int = 0
    test_seed: int | None = None
    repeats: int = 1
    gamma1: float = pca.DEFAULT_GAMMA1
    gamma2: float = pca.DEFAULT_GAMMA2
    n_bins: int = classify.DEFAULT_BINS
    epsilon: float = classify.DEFAULT_EPSILON
    method: str = "both"
    manifold_dims: int | None = None
    b: int = 10
    theta_threshold: float = math.pi / 18
    overlap_fraction: float = 0.5
    filter_window: int = 5

    def validate(self) -> None:
        for name in ("gamma1", "gamma2"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ParameterError(f"{name} must lie in (0, 1), got {v}")
        if self.n_bins < 2:
            raise ParameterError(f"n_bins must be at least 2, got {self.n_bins}")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.repeats < 1:
            raise ParameterError(f"repeats must be positive, got {self.repeats}")
        if self.manifold_dims is not None and self.manifold_dims < 1:
            raise ParameterError("manifold-dims must be positive")
        if self.method not in ("knn", "prob", "both"):
            raise ParameterError(f"unknown method {self.method!r}")
        try:
            self.alg_params()
        except sensitivity.SensitivityError as exc:
            raise ParameterError(str(exc)) from None

    def alg_params(self) -> sensitivity.AlgParams:
        return sensitivity.AlgParams(
            b=self.b, theta_threshold=self.theta_threshold,
            overlap_fraction=self.overlap_fraction, filter_window=self.filter_window,
        )

    def output_dir(self) -> Path:
        d = self.out_dir or Path(os.environ.get(OUTPUT_DIR_ENV, "."))
        d.mkdir(parents=True, exist_ok=True)
        return d


def _require(value, flag: str):
    if value is None:
        raise ParameterError(f"{flag} is required")
    return value


def _dump_json(doc: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_json(path: Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _grid_meta(model: pca.PcaModel) -> data_model.GridMetadata:
    if model.meta is None:
        raise data_model.DatasetError("model file carries no grid header")
    return model.meta


# --- steps -----------------------------------------------------------------


def do_generate(cfg: RunConfig, out: Path) -> data_model.DatasetGrid:
    sensor, stim = synth.preset(cfg.preset)
    grid = synth.generate_grid(sensor, stim, cfg.seed, cfg.repeats)
    data_model.save_grid(grid, out)
    log.info("wrote %d segments to %s", len(grid), out)
    return grid


def do_train(cfg: RunConfig, grid: data_model.DatasetGrid, out_dir: Path):
    clean, report = data_model.preprocess(grid)
    if report.dropped:
        log.warning("dropped %d abnormal taps: %s", len(report.dropped), report.dropped)
    for note in report.notes:
        log.warning(note)
    missing = clean.missing_classes()
    if missing:
        raise data_model.DatasetError(f"training grid lacks class {missing[0]}")
    model = pca.fit(clean, cfg.gamma1, cfg.gamma2)
    pcs = pca.project_grid(model, clean)
    clf = classify.Classifiers.train(pcs, clean.meta, cfg.n_bins, cfg.epsilon)
    pca.save_model(model, out_dir / "pca_model.json")
    classify.save_classifiers(clf, out_dir / "classifier.json")
    pca.write_manifold(pcs, out_dir / "manifold.csv")
    if cfg.manifold_dims:
        plotting.manifold_figure(pcs, clean.meta, out_dir / "manifold_plot.svg", cfg.manifold_dims)
    log.info("n_total=%d n_reduced=%d", model.n_total, model.n_reduced)
    return model, clf, pcs


def do_classify(model: pca.PcaModel, clf: classify.Classifiers, grid: data_model.DatasetGrid,
                method: str, out: Path) -> list[evaluation.PredictionRecord]:
    clean, _ = data_model.preprocess(grid)
    pcs = pca.project_grid(model, clean)
    records = clf.predict(pcs, method)
    evaluation.write_predictions(records, out)
    return records


def do_sensitivity(cfg: RunConfig, pcs, meta: data_model.GridMetadata, out_dir: Path):
    smap = sensitivity.sensitivity_map(pcs, meta, cfg.alg_params())
    plotting.sensitivity_heatmap(smap.normalized, meta, out_dir / "sensitivity_map.svg")
    profile = sensitivity.location_profile(smap, cfg.filter_window)
    plotting.sensitivity_profile(profile, meta, smap.fixation_loc_value, out_dir / "sensitivity_profile.svg")
    _dump_json({
        "schema": SENSITIVITY_SCHEMA,
        "version": ARTIFACT_VERSION,
        "loc_values": meta.loc_values().tolist(),
        "id_values": meta.id_values().tolist(),
        "values": smap.values.tolist(),
        "normalized": smap.normalized.tolist(),
    }, out_dir / "sensitivity.json")
    return smap


def fixation_doc(smap: sensitivity.SensitivityMap, meta: data_model.GridMetadata) -> dict:
    fx = smap.fixation
    return {
        "schema": FIXATION_SCHEMA,
        "version": ARTIFACT_VERSION,
        "fixation_loc_index": smap.fixation_loc_index,
        "fixation_value": smap.fixation_loc_value,
        "units": meta.units.get("loc", ""),
        "per_location": [
            {"loc_index": l + 1, "loc_value": meta.loc_value(l + 1),
             "min_filtered": float(fx.min_filtered[l]), "max_filtered": float(fx.max_filtered[l]),
             "rank_sum": float(fx.rank_sum[l])}
            for l in range(meta.n_loc)
        ],
    }


def do_evaluate(records, meta: data_model.GridMetadata, out_dir: Path, fixation_value: float | None) -> dict:
    circular = meta.circular_what
    doc = {
        "schema": REPORT_SCHEMA,
        "version": ARTIFACT_VERSION,
        "circular_what": circular,
        "methods": evaluation.report(records, circular),
    }
    _dump_json(doc, out_dir / "report.json")
    errors = {}
    for method, recs in evaluation.by_method(records).items():
        for axis, name in (("id", "what"), ("loc", "where")):
            summary = evaluation.percentile_summary(recs, axis)
            if axis == "id":
                actual = {r.true.id_index: r.true.id_value for r in recs}
            else:
                actual = {r.true.loc_index: r.true.loc_value for r in recs}
            plotting.predicted_vs_actual(
                summary, actual, f"{name} ({meta.units.get(axis, '')})",
                out_dir / f"predicted_{name}_{method}.svg",
            )
        errors[method] = evaluation.error_by_location(recs, circular)
    plotting.error_by_location(errors, meta, fixation_value, out_dir / "error_by_location.svg")
    return doc


# --- subcommands -----------------------------------------------------------


def _cmd_generate(cfg: RunConfig) -> None:
    out = cfg.out or cfg.output_dir() / f"{cfg.preset}-seed{cfg.seed}.json"
    do_generate(cfg, out)


def _cmd_train(cfg: RunConfig) -> None:
    grid = data_model.load_grid(_require(cfg.dataset, "--dataset"))
    do_train(cfg, grid, cfg.output_dir())


def _cmd_classify(cfg: RunConfig) -> None:
    model = pca.load_model(_require(cfg.model, "--model"))
    clf = classify.load_classifiers(_require(cfg.classifier, "--classifier"))
    grid = data_model.load_grid(_require(cfg.dataset, "--dataset"))
    out = cfg.out or cfg.output_dir() / "predictions.csv"
    do_classify(model, clf, grid, cfg.method, out)


def _cmd_evaluate(cfg: RunConfig) -> None:
    records = evaluation.read_predictions(_require(cfg.predictions, "--predictions"))
    meta = _grid_meta(pca.load_model(_require(cfg.model, "--model")))
    fix = None
    if cfg.fixation:
        doc = _load_json(cfg.fixation)
        data_model.check_schema(doc, FIXATION_SCHEMA, ARTIFACT_VERSION)
        fix = float(doc["fixation_value"])
    do_evaluate(records, meta, cfg.output_dir(), fix)


def _manifold_and_meta(cfg: RunConfig):
    pcs = pca.read_manifold(_require(cfg.manifold, "--manifold"))
    meta = _grid_meta(pca.load_model(_require(cfg.model, "--model")))
    return pcs, meta


def _cmd_sensitivity(cfg: RunConfig) -> None:
    pcs, meta = _manifold_and_meta(cfg)
    do_sensitivity(cfg, pcs, meta, cfg.output_dir())


def _cmd_fixation(cfg: RunConfig) -> None:
    pcs, meta = _manifold_and_meta(cfg)
    smap = sensitivity.sensitivity_map(pcs, meta, cfg.alg_params())
    doc = fixation_doc(smap, meta)
    _dump_json(doc, cfg.out or cfg.output_dir() / "fixation.json")
    print(f"fixation loc_index={doc['fixation_loc_index']} value={doc['fixation_value']!r} {doc['units']}")


def _cmd_pipeline(cfg: RunConfig) -> None:
    out_dir = cfg.output_dir()
    train = do_generate(cfg, out_dir / "train.json")
    test_seed = cfg.seed + 1 if cfg.test_seed is None else cfg.test_seed
    test_cfg = RunConfig(**{**cfg.__dict__, "seed": test_seed})
    test = do_generate(test_cfg, out_dir / "test.json")
    if cfg.manifold_dims is None:
        cfg.manifold_dims = 3
    model, clf, pcs = do_train(cfg, train, out_dir)
    records = do_classify(model, clf, test, cfg.method, out_dir / "predictions.csv")
    meta = model.meta
    smap = do_sensitivity(cfg, pcs, meta, out_dir)
    fix = fixation_doc(smap, meta)
    _dump_json(fix, out_dir / "fixation.json")
    report = do_evaluate(records, meta, out_dir, smap.fixation_loc_value)
    for method, entry in report["methods"].items():
        grads = [("n/a" if g is None else f"{g:.3f}") for g in (entry["id_gradient"], entry["loc_gradient"])]
        print(f"{method}: what gradient {grads[0]}, where gradient {grads[1]}, "
              f"what RMSE {entry['what_rmse']:.3f}")
    print(f"fixation loc_index={fix['fixation_loc_index']} value={fix['fixation_value']!r} {fix['units']}")


KNOWN_JSON = {
    data_model.DATASET_SCHEMA: lambda d: data_model.grid_from_dict(d),
    pca.MODEL_SCHEMA: lambda d: pca.model_from_dict(d),
    classify.CLASSIFIER_SCHEMA: lambda d: classify.classifiers_from_dict(d),
    REPORT_SCHEMA: lambda d: data_model.check_schema(d, REPORT_SCHEMA, ARTIFACT_VERSION),
    FIXATION_SCHEMA: lambda d: data_model.check_schema(d, FIXATION_SCHEMA, ARTIFACT_VERSION),
    SENSITIVITY_SCHEMA: lambda d: data_model.check_schema(d, SENSITIVITY_SCHEMA, ARTIFACT_VERSION),
}


def _cmd_inspect(cfg: RunConfig) -> None:
    """Re-read artifacts and report what they are."""
    for path in cfg.paths:
        if path.suffix == ".json":
            doc = _load_json(path)
            schema = doc.get("schema") if isinstance(doc, dict) else None
            if schema not in KNOWN_JSON:
                raise data_model.SchemaError(f"{path}: unknown schema {schema!r}")
            KNOWN_JSON[schema](doc)
            print(f"{path}: {schema} v{doc['version']}")
        elif path.suffix == ".csv":
            with open(path) as fh:
                header = fh.readline().strip().split(",")
            if header[:4] == ["loc_index", "id_index", "loc_value", "id_value"]:
                pcs = pca.read_manifold(path)
                print(f"{path}: manifold, {len(pcs)} vectors")
            elif header == evaluation.PREDICTION_COLUMNS:
                print(f"{path}: predictions, {len(evaluation.read_predictions(path))} records")
            else:
                print(f"{path}: table with columns {header}")
        else:
            print(f"{path}: {path.stat().st_size} bytes")


COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "classify": _cmd_classify,
    "evaluate": _cmd_evaluate,
    "sensitivity": _cmd_sensitivity,
    "fixation": _cmd_fixation,
    "pipeline": _cmd_pipeline,
    "inspect": _cmd_inspect,
}


def run(cfg: RunConfig) -> int:
    """Execute one subcommand; returns the process exit status."""
    try:
        cfg.validate()
        COMMANDS[cfg.subcommand](cfg)
    except ParameterError as exc:
        print(f"error: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except data_model.SchemaError as exc:
        print(f"error: schema: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except json.JSONDecodeError as exc:
        print(f"error: unreadable file: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: unreadable file: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tactile-pca", description="Two-stage PCA tactile where/what perception.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, out_dir=True):
        if out_dir:
            p.add_argument("--out-dir", type=Path)
        return p

    def fit_opts(p):
        p.add_argument("--gamma1", type=float, default=pca.DEFAULT_GAMMA1)
        p.add_argument("--gamma2", type=float, default=pca.DEFAULT_GAMMA2)
        p.add_argument("--n-bins", type=int, default=classify.DEFAULT_BINS)
        p.add_argument("--epsilon", type=float, default=classify.DEFAULT_EPSILON)
        p.add_argument("--manifold-dims", type=int, default=None,
                       help="also export the leading PCs as a figure (3 for a 3-D view)")

    def alg_opts(p):
        p.add_argument("--b", type=int, default=10, help="number of overlapping sections")
        p.add_argument("--theta-threshold", type=float, default=math.pi / 18, help="cone half-angle, radians")
        p.add_argument("--overlap-fraction", type=float, default=0.5)
        p.add_argument("--filter-window", type=int, default=5)

    def gen_opts(p):
        p.add_argument("--preset", default="cylinders-small", choices=sorted(synth.PRESETS))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--repeats", type=int, default=1, help="taps per class")

    p = common(sub.add_parser("generate", help="write a synthetic dataset"))
    gen_opts(p)
    p.add_argument("--out", type=Path)

    p = common(sub.add_parser("train", help="fit PCA and classifiers, export the manifold"))
    p.add_argument("--dataset", type=Path, required=True)
    fit_opts(p)

    p = common(sub.add_parser("classify", help="predict classes for a dataset"))
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--classifier", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--method", default="both", choices=["knn", "prob", "both"])
    p.add_argument("--out", type=Path)

    p = common(sub.add_parser("evaluate", help="summarise predictions and export figures"))
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--fixation", type=Path)

    for name, text in (("sensitivity", "sensitivity map and figures"), ("fixation", "choose the fixation location")):
        p = common(sub.add_parser(name, help=text))
        p.add_argument("--manifold", type=Path, required=True)
        p.add_argument("--model", type=Path, required=True)
        alg_opts(p)
        if name == "fixation":
            p.add_argument("--out", type=Path)

    p = common(sub.add_parser("pipeline", help="generate, train, classify, evaluate and fixate"))
    gen_opts(p)
    p.add_argument("--test-seed", type=int, default=None)
    p.add_argument("--method", default="both", choices=["knn", "prob", "both"])
    fit_opts(p)
    alg_opts(p)

    p = sub.add_parser("inspect", help="re-read artifacts written by this tool")
    p.add_argument("paths", type=Path, nargs="+")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    fields = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
    return run(RunConfig(**fields))


if __name__ == "__main__":
    sys.exit(main())
