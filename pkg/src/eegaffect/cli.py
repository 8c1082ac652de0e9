"""Command line entry point for the eegaffect pipeline.

Exit codes: 0 success, 1 some grid cells failed, 2 usage/config/input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import PipelineConfig, config_from_dict, dump_config, load_config
from .errors import ConfigError, ConstantFeature, EegAffectError, InvalidSpec
from .evaluation import (CvResult, cross_validate, cv_result_json, dumps_json,
                         feature_histograms, plan_folds, roc_curve, roc_csv, table_csv,
                         table_dict, tabulate)
from .features import (band_stat_vector, descriptor_name, hoc_vector, spd_vector,
                       time_stat_vector, write_feature_csv)
from .fir_filter import bank_to_json, design_filter_bank, extract_bands
from .labeling import Label, build_dataset
from .signal_model import (SELECTED_CHANNELS, Dataset, Ratings, SynthSpec, TrialRecording,
                           load_dataset, make_dataset, select_channels, synth_trial,
                           write_dataset)

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2
BAND_METHODS = ("stats_band", "spd")

RECIPES = {
    "alpha-vs-beta": {
        "duration_s": 63.0,
        "sample_rate_hz": 128.0,
        "channels": list(SELECTED_CHANNELS),
        "classes": [
            {"label": "low", "rating": 2.0, "snr_db": 0.0,
             "components": [{"band": "alpha", "amplitude": 20.0, "frequency_hz": 10.0}]},
            {"label": "high", "rating": 8.0, "snr_db": 0.0,
             "components": [{"band": "beta", "amplitude": 20.0, "frequency_hz": 20.0}]},
        ],
    },
}


class UsageError(Exception):
    pass


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _derive_seed(*parts) -> int:
    digest = hashlib.sha256("/".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# -- convert ------------------------------------------------------------------

_TRIAL_FILE = re.compile(r"^s(\d+)_t(\d+)\.csv$")


def _read_trial_csv(path: Path, fs: float) -> TrialRecording:
    names, rows, width = [], [], None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise UsageError(f"{path}:{lineno}: expected {width - 1} samples, "
                                 f"got {len(row) - 1}")
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
            names.append(row[0].strip())
    if not rows:
        raise UsageError(f"{path}: no channel rows")
    m = _TRIAL_FILE.match(path.name)
    try:
        return TrialRecording(int(m.group(1)), int(m.group(2)), names, np.array(rows), fs)
    except EegAffectError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _read_ratings_csv(path: Path) -> dict:
    if not path.is_file():
        raise UsageError(f"{path}: ratings file not found")
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                key = (int(row["subject_id"]), int(row["trial_id"]))
                vals = {k: float(row[k]) for k in ("valence", "arousal", "dominance", "liking")
                        if row.get(k) not in (None, "")}
                out[key] = Ratings(**vals)
            except (KeyError, ValueError, TypeError, EegAffectError) as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
    return out


def cmd_convert(args) -> int:
    src = Path(args.input)
    if not src.is_dir():
        raise UsageError(f"{src}: not a directory")
    files = sorted(p for p in src.iterdir() if _TRIAL_FILE.match(p.name))
    if not files:
        raise UsageError(f"{src}: no trials found (expected files named sNN_tNN.csv)")
    ratings = _read_ratings_csv(src / args.ratings)
    items = []
    for path in files:
        trial = _read_trial_csv(path, args.sample_rate)
        if trial.key not in ratings:
            raise UsageError(f"{path}: no row for subject {trial.key[0]} trial "
                             f"{trial.key[1]} in {args.ratings}")
        items.append((trial, ratings[trial.key]))
    try:
        dataset = make_dataset(items)
        write_dataset(dataset, args.output, source=f"converted from {src.name}")
    except EegAffectError as exc:
        raise UsageError(str(exc)) from None
    first = dataset.trials[0][0]
    print(f"wrote {len(dataset)} trials, {len(first.channel_names)} channels, "
          f"N={first.n_samples} to {args.output}")
    return EXIT_OK


# -- synth --------------------------------------------------------------------

def _noise_sigma(cls: dict) -> float:
    if "noise_sigma" in cls:
        return float(cls["noise_sigma"])
    power = sum(c["amplitude"] ** 2 / 2.0 for c in cls.get("components", []))
    return math.sqrt(power / 10.0 ** (float(cls.get("snr_db", 0.0)) / 10.0))


def synth_dataset(recipe: dict, n_trials: int, seed: int) -> Dataset:
    """Class-balanced synthetic dataset: class ``i`` gets ``n/len(classes)`` trials
    (remainder to the first classes), shuffled by ``seed``."""
    if n_trials < 1:
        raise InvalidSpec("n_trials must be at least 1")
    classes = recipe["classes"]
    if len(classes) < 1:
        raise InvalidSpec("recipe defines no classes")
    order = np.random.default_rng(seed).permutation(np.arange(n_trials) % len(classes))
    templates = []
    for cls in classes:
        spec = SynthSpec(duration_s=recipe.get("duration_s", 63.0),
                         sample_rate_hz=recipe.get("sample_rate_hz", 128.0),
                         components=tuple(cls.get("components", ())),
                         noise_sigma=_noise_sigma(cls),
                         channels=tuple(recipe.get("channels", SELECTED_CHANNELS)))
        rating = cls["rating"]
        ratings = Ratings(valence=cls.get("valence", rating), arousal=cls.get("arousal", rating))
        templates.append((spec, ratings))
    items = []
    for i, c in enumerate(order):
        spec, ratings = templates[int(c)]
        trial_seed = int(np.random.SeedSequence([seed, i]).generate_state(1, np.uint64)[0])
        spec = SynthSpec(spec.duration_s, spec.sample_rate_hz, spec.components,
                         spec.noise_sigma, trial_seed, spec.channels)
        items.append((synth_trial(spec, i // 40 + 1, i % 40 + 1), ratings))
    return make_dataset(items)


def cmd_synth(args) -> int:
    if args.spec:
        try:
            recipe = yaml.safe_load(Path(args.spec).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise UsageError(f"{args.spec}: {exc}") from None
    elif args.recipe in RECIPES:
        recipe = RECIPES[args.recipe]
    else:
        raise UsageError(f"unknown recipe {args.recipe!r}; choose from {sorted(RECIPES)}")
    try:
        dataset = synth_dataset(recipe, args.n_trials, args.seed)
        write_dataset(dataset, args.output,
                      source=f"synthetic {args.spec or args.recipe} n={args.n_trials} seed={args.seed}")
    except (EegAffectError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid recipe: {exc}") from None
    print(f"wrote {len(dataset)} synthetic trials to {args.output}")
    return EXIT_OK


# -- run ----------------------------------------------------------------------

def _load_bank(cfg: PipelineConfig, fs: float, out: Path) -> list:
    path = out / "filter_bank.json"
    bank = design_filter_bank(fs, cfg.bands, cfg.filter_spec_overrides())
    _write(path, bank_to_json(bank))
    return bank


def extract_features(cfg: PipelineConfig, dataset: Dataset, bank) -> dict:
    """``{method: [((subject, trial), FeatureVector), ...]}`` in dataset order."""
    need_bands = any(m in BAND_METHODS for m in cfg.methods)

    def one(trial):
        trial = select_channels(trial, cfg.channels)
        bands = extract_bands(trial, bank, cfg.filter_mode) if need_bands else None
        out = {}
        for m in cfg.methods:
            if m == "stats_time":
                out[m] = time_stat_vector(trial, cfg.channels)
            elif m == "stats_band":
                out[m] = band_stat_vector(bands, cfg.channels, cfg.bands)
            elif m == "spd":
                out[m] = spd_vector(bands, cfg.channels, cfg.bands)
            else:
                out[m] = hoc_vector(trial, cfg.hoc_order, cfg.channels)
        return trial.key, out

    trials = dataset.recordings
    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            rows = list(pool.map(one, trials))
    else:
        rows = [one(t) for t in trials]
    return {m: [(key, fv[m]) for key, fv in rows] for m in cfg.methods}


def cell_grid(cfg: PipelineConfig) -> list:
    return [(clf, m, s, d) for clf in cfg.classifiers for m in cfg.methods
            for s in cfg.schemes for d in cfg.dimensions]


def cell_key(cell) -> str:
    return "-".join(cell)


def _histograms_csv(data, bins: int) -> tuple:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    titles = [Label(c).title for c in np.unique(data.y)]
    w.writerow(["feature", "bin_low", "bin_high", *titles])
    skipped = []
    for j, desc in enumerate(data.layout):
        name = descriptor_name(data.method, desc)
        try:
            h = feature_histograms(data, j, bins)
        except ConstantFeature:
            skipped.append(name)
            continue
        for b in range(bins):
            w.writerow([name, repr(float(h.edges[b])), repr(float(h.edges[b + 1])),
                        *(int(h.counts[t][b]) for t in titles)])
    return buf.getvalue(), skipped


def run_cell(cfg: PipelineConfig, cell, features, ratings, out: Path) -> dict:
    clf, method, scheme, dim = cell
    key = cell_key(cell)
    cdir = out / "cells" / key
    record = {"key": key, "classifier": clf, "method": method, "scheme": scheme,
              "dimension": dim}
    try:
        data = build_dataset(features[method], ratings, dim, scheme, cfg.contiguous_boundaries)
        groups = [k[0] for k in data.keys] if cfg.grouped_folds else None
        plan = plan_folds(len(data), cfg.folds, data.y, cfg.fold_seed, keys=data.keys,
                          groups=groups)
        tcfg = cfg.train_config(clf, _derive_seed(cfg.seed, key))
        result = cross_validate(data, tcfg, plan)
    except EegAffectError as exc:
        record.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        _write(cdir / "result.json", dumps_json(record))
        return record
    _write(cdir / "result.json", cv_result_json(result))
    if scheme == "bipartition":
        if result.scores is not None and not any(s != s for s in result.scores):
            try:
                _write(cdir / "roc.csv", roc_csv(roc_curve(result.scores, result.labels)))
            except EegAffectError:
                pass
        text, _ = _histograms_csv(data, cfg.histogram_bins)
        _write(cdir / "histograms.csv", text)
    record.update(status="ok", mean_accuracy=result.mean_accuracy)
    return record


def _read_cells(out: Path) -> tuple:
    results, records = [], []
    for path in sorted((out / "cells").glob("*/result.json")):
        d = json.loads(path.read_text())
        if d.get("status") == "failed":
            records.append(d)
            continue
        r = CvResult.from_dict(d)
        results.append(r)
        records.append({"key": path.parent.name, "classifier": r.classifier,
                        "method": r.method, "scheme": r.scheme, "dimension": r.dimension,
                        "status": "ok", "mean_accuracy": r.mean_accuracy})
    return results, records


def write_report(cfg: PipelineConfig, out: Path, cells=None) -> int:
    results, records = _read_cells(out)
    if cells is not None:
        wanted = {cell_key(c) for c in cells}
        results = [r for r in results if cell_key(r.key) in wanted]
        records = [r for r in records if r["key"] in wanted]
    order = {cell_key(c): i for i, c in enumerate(cell_grid(cfg))}
    records.sort(key=lambda r: (order.get(r["key"], len(order)), r["key"]))
    table = tabulate(results)
    failed = sum(r["status"] != "ok" for r in records)
    report = {"version": __version__, "config": cfg.resolved(), "table": table_dict(table),
              "cells": records, "failed_cells": failed}
    _write(out / "report.json", dumps_json(report))
    _write(out / "report.csv", table_csv(table))
    print(_render_table(table))
    for r in records:
        if r["status"] != "ok":
            print(f"FAILED {r['key']}: {r['error']}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def _render_table(table) -> str:
    head = ["classifier", "method", *(f"{s}/{d}" for s, d in table.columns)]
    rows = [[*r, *(table.cell_text(r, c) or "-" for c in table.columns)] for r in table.rows]
    widths = [max(len(str(x)) for x in col) for col in zip(head, *rows)]
    return "\n".join("  ".join(str(x).ljust(w) for x, w in zip(line, widths))
                     for line in [head, *rows])


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed, jobs=args.jobs, output=args.out)
    if not Path(cfg.dataset).is_dir():
        raise UsageError(f"dataset path {cfg.dataset} does not exist")
    out = Path(cfg.output)
    try:
        dataset = load_dataset(cfg.dataset, cfg.dataset_format, cfg.baseline_s, cfg.jobs)
        fs = dataset.recordings[0].sample_rate_hz
        bank = (_load_bank(cfg, fs, out) if any(m in BAND_METHODS for m in cfg.methods)
                else None)
        features = extract_features(cfg, dataset, bank)
    except EegAffectError as exc:
        raise UsageError(f"{type(exc).__name__}: {exc}") from None
    _write(out / "config.yaml", dump_config(cfg))
    for m, rows in features.items():
        buf = io.StringIO()
        write_feature_csv(rows, buf)
        _write(out / "features" / f"{m}.csv", buf.getvalue())

    cells = cell_grid(cfg)
    ratings = dataset.ratings
    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            list(pool.map(lambda c: run_cell(cfg, c, features, ratings, out), cells))
    else:
        for c in cells:
            run_cell(cfg, c, features, ratings, out)
    return write_report(cfg, out, cells)


def cmd_report(args) -> int:
    out = Path(args.out)
    cfg_path = out / "config.yaml"
    if not cfg_path.is_file():
        raise UsageError(f"{out} holds no config.yaml; run the pipeline first")
    cfg = load_config(cfg_path)
    if not (out / "cells").is_dir():
        raise UsageError(f"{out} holds no cell results")
    return write_report(cfg, out)


def cmd_config(args) -> int:
    sys.stdout.write(dump_config(config_from_dict({})))
    return EXIT_OK


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eegaffect", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", help="per-trial CSV directory -> canonical dataset")
    c.add_argument("input", help="directory of sNN_tNN.csv files (one row per channel)")
    c.add_argument("output", help="destination dataset directory")
    c.add_argument("--ratings", default="ratings.csv",
                   help="ratings CSV inside INPUT (subject_id,trial_id,valence,arousal,...)")
    c.add_argument("--sample-rate", type=float, default=128.0)
    c.set_defaults(func=cmd_convert)

    s = sub.add_parser("synth", help="write a seeded synthetic dataset")
    s.add_argument("output")
    s.add_argument("--recipe", default="alpha-vs-beta", help=f"built-in: {sorted(RECIPES)}")
    s.add_argument("--spec", help="YAML recipe file (overrides --recipe)")
    s.add_argument("--n-trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=7)
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("run", help="run the experiment grid from a config file")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("report", help="re-tabulate the cell results in an output directory")
    t.add_argument("out")
    t.set_defaults(func=cmd_report)

    d = sub.add_parser("config", help="print the default config")
    d.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"eegaffect {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
