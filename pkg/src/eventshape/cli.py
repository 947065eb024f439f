"""Command-line entry point: ``eventshape <subcommand> ...``.

Failures print a single JSON line ``{"error": <type>, "message": <text>}``
to stderr and exit with status 1 (2 for command-line usage errors).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import aedat, elbp, synth
from .descriptors import DESCRIPTOR_KINDS, RingConfig
from .events import FramingConfig
from .orientation import OrientationConfig
from .pipeline import (CLASSIFIERS, FeatureSet, PipelineConfig, alpha_table, bench,
                       check_compatible, extract_features, extract_sequence_features,
                       load_model, rows_to_csv, run_ggm, run_svm, train_svm)

log = logging.getLogger("eventshape")

CORPORA = ("suits", "poker2015", "digits")
DATASET_KINDS = ("auto", "file", "poker2015", "mnist", "sequence")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", type=Path, help="JSON PipelineConfig; flags below override it")
    g.add_argument("--N", type=int, help="events per window")
    g.add_argument("--B", type=int, help="window step in events")
    g.add_argument("--L", type=int, help="plane-fit neighbourhood side")
    g.add_argument("--M", type=int, help="max plane-fit neighbours")
    g.add_argument("--V", type=int, help="direction bins")
    g.add_argument("--min-neighbors", type=int)
    g.add_argument("--descriptor", choices=DESCRIPTOR_KINDS)
    g.add_argument("--rings", type=int, help="ESC rings R")
    g.add_argument("--hemispheres", type=int, choices=(1, 2), help="ESC cells per ring")
    g.add_argument("--classifier", choices=CLASSIFIERS)
    g.add_argument("--alpha", type=float, help="memory factor")
    g.add_argument("--K", type=int, help="GGM clusters")
    g.add_argument("--C", type=float, help="SVM penalty")
    g.add_argument("--gamma", type=float, help="RBF width (default 1/dim)")
    g.add_argument("--seed", type=int)


def build_config(args) -> PipelineConfig:
    base = PipelineConfig()
    if getattr(args, "config", None):
        base = PipelineConfig.from_dict(json.loads(Path(args.config).read_text()))
    d = base.to_dict()
    fr, orc, ring = d["framing"], d["orientation"], d["ring"]
    for flag, target, key in (("N", fr, "N"), ("B", fr, "B"), ("L", orc, "L"), ("M", orc, "M"),
                              ("V", orc, "V"), ("min_neighbors", orc, "min_neighbors"),
                              ("rings", ring, "R"), ("hemispheres", ring, "hemispheres")):
        v = getattr(args, flag, None)
        if v is not None:
            target[key] = v
    if getattr(args, "V", None) is not None:
        ring["V"] = args.V
    for key in ("descriptor", "classifier", "alpha", "K", "C", "gamma", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    d["framing"], d["orientation"], d["ring"] = (FramingConfig(**fr), OrientationConfig(**orc),
                                                 RingConfig(**ring))
    return PipelineConfig(**d)


def _write(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ------------------------------------------------------------------ synth


def cmd_synth(args) -> None:
    if args.corpus:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.corpus == "suits":
            samples = synth.suit_corpus(args.n, seed=args.seed)
        elif args.corpus == "poker2015":
            samples = synth.poker2015_corpus(seed=args.seed)
        else:
            samples = synth.digit_corpus(args.n, seed=args.seed)
        for i, s in enumerate(samples):
            if args.corpus == "digits":
                digit = "6" if s.label == "six" else "9"
                name = f"mnist_{digit}_scale04_{i:04d}.aedat"
            else:
                name = f"{s.label}{'_i' if s.inverted else ''}_{i:03d}.aedat"
            aedat.save_aedat(out / name, s.stream)
        log.info("wrote %d samples to %s", len(samples), out)
        return
    if not args.scenario:
        raise ValueError("give a scenario file or --corpus")
    scen = synth.parse_scenario(Path(args.scenario).read_text())
    stream = synth.synthesize(scen)
    aedat.save_aedat(args.out, stream)
    meta = {"label": scen.label, "events": len(stream), "scenario": synth.format_scenario(scen)}
    Path(str(args.out) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------- features


def _detect_kind(path: Path) -> str:
    if path.is_file():
        return "file"
    names = [f.name for f in path.rglob("*") if f.suffix.lower() in aedat.AEDAT_SUFFIXES]
    if names and all(aedat._MNIST_RE.search(n) for n in names):
        return "mnist"
    return "poker2015"


def load_features_input(path, kind: str, cfg: PipelineConfig, scale: int = 4, limit=None) -> FeatureSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such input: {path}")
    if kind == "auto":
        kind = _detect_kind(path)
    if kind == "file":
        stream = aedat.read_aedat(path)
        side = Path(str(path) + ".json")
        if side.is_file():
            stream.label = json.loads(side.read_text()).get("label")
        return extract_features([stream], cfg, sources=[path.name])
    if kind == "poker2015":
        samples = aedat.load_poker2015(path)
        return extract_features([(s, c) for s, c, _ in samples], cfg,
                                sources=[f"{c}{'_i' if i else ''}#{k}"
                                         for k, (_, c, i) in enumerate(samples)])
    if kind == "mnist":
        samples = aedat.load_mnist_dvs(path, scale=scale, limit=limit)
        return extract_features(samples, cfg)
    if kind == "sequence":
        stream, bounds, labels = aedat.load_labeled_sequence(path)
        fs = extract_sequence_features(stream, bounds, labels, cfg, source=path.name)
        log.info("%d windows kept, %d straddling windows discarded", len(fs), fs.discarded)
        return fs
    raise ValueError(f"unknown dataset kind {kind!r}")


def cmd_features(args) -> None:
    cfg = build_config(args)
    fs = load_features_input(args.input, args.kind, cfg, args.scale, args.limit)
    _write(args.out, fs.to_csv() if args.csv else fs.to_json() + "\n")
    log.info("%d windows from %d samples", len(fs), fs.n_samples)


def _load_features(path) -> FeatureSet:
    return FeatureSet.from_json(Path(path).read_text())


def _config_for(fs: FeatureSet, args) -> PipelineConfig:
    """Pipeline config whose feature part is taken from the feature file."""
    cfg = build_config(args)
    d = cfg.to_dict()
    d.update(fs.config)
    return PipelineConfig.from_dict(d)


# ------------------------------------------------------------------ ggm/svm


def cmd_ggm(args) -> None:
    fs = _load_features(args.features)
    cfg = _config_for(fs, args)
    if args.model_in:
        model = load_model(json.loads(Path(args.model_in).read_text()))
        check_compatible(model.config, fs)
    model, report = run_ggm(fs, cfg, timing=args.timing)
    if args.model:
        Path(args.model).write_text(json.dumps(model.to_dict(), sort_keys=True) + "\n")
    _write(args.report, report.to_json() + "\n")
    if args.csv:
        Path(args.csv).write_text(report.confusion_csv())
    if args.alpha_csv:
        Path(args.alpha_csv).write_text(alpha_table(report))


def cmd_svm(args) -> None:
    fs = _load_features(args.features)
    if args.kernel:
        args.classifier = f"svm-{args.kernel}"
    elif args.classifier in (None, "ggm"):
        args.classifier = "svm-rbf"
    cfg = _config_for(fs, args)
    report = run_svm(fs, cfg, args.protocol, args.folds, grid=args.grid, timing=args.timing)
    if args.model:
        ens = train_svm(fs, cfg)
        Path(args.model).write_text(json.dumps(ens.to_dict(), sort_keys=True) + "\n")
    _write(args.report, report.to_json() + "\n")
    if args.csv:
        Path(args.csv).write_text(report.confusion_csv())


def cmd_bench(args) -> None:
    cfg = build_config(args)
    path = Path(args.input)
    kind = _detect_kind(path) if args.kind == "auto" else args.kind
    if kind == "poker2015":
        samples = [(s, c) for s, c, _ in aedat.load_poker2015(path)]
    elif kind == "mnist":
        samples = aedat.load_mnist_dvs(path, scale=args.scale, limit=args.limit)
    else:
        raise ValueError("bench needs a per-sample dataset directory (poker2015 or mnist)")
    Ns = [int(n) for n in args.sweep.split(",") if n.strip()]
    rows = bench(samples, cfg, Ns, args.protocol, args.folds)
    _write(args.out, rows_to_csv(rows))


def cmd_dump_elbp(args) -> None:
    rows = []
    for cls, rep in enumerate(elbp.REPRESENTATIVES, start=1):
        rows.append({"class": cls, "representative": rep, "bits": f"{rep:08b}",
                     "transitions": elbp.transitions(rep), "tag": elbp.tag_of(cls),
                     "weight": elbp.weight_of(cls),
                     "orbit": sorted(elbp.rotation_orbit(rep))})
    if args.json:
        _write(args.out, json.dumps(rows, indent=1) + "\n")
        return
    lines = ["class,representative,bits,transitions,tag,weight,orbit_size"]
    for r in rows:
        lines.append(f"{r['class']},{r['representative']},{r['bits']},{r['transitions']},"
                     f"{r['tag']},{r['weight']},{len(r['orbit'])}")
    _write(args.out, "\n".join(lines) + "\n")


# ------------------------------------------------------------------- main


def _error_line(kind: str, message: str) -> str:
    return json.dumps({"error": kind, "message": message})


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as the same one-line JSON as runtime failures."""

    def error(self, message):
        sys.stderr.write(_error_line("UsageError", f"{self.prog}: {message}") + "\n")
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="eventshape",
                 description="Event-camera shape descriptors and classifiers")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate synthetic AEDAT streams")
    p.add_argument("scenario", nargs="?", help="key=value scenario file")
    p.add_argument("-o", "--out", required=True, help="AEDAT file, or directory with --corpus")
    p.add_argument("--corpus", choices=CORPORA, help="write a whole synthetic dataset")
    p.add_argument("--n", type=int, default=5, help="samples per class for --corpus")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="extract window descriptors")
    p.add_argument("input", help="AEDAT file or dataset directory")
    p.add_argument("--kind", choices=DATASET_KINDS, default="auto")
    p.add_argument("--scale", type=int, default=4, help="MNIST-DVS scale")
    p.add_argument("--limit", type=int, help="MNIST-DVS subsample size")
    p.add_argument("-o", "--out", default="-")
    p.add_argument("--csv", action="store_true", help="CSV instead of JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("ggm", help="unsupervised K-means + GGM evaluation")
    p.add_argument("features", help="feature JSON from 'features'")
    p.add_argument("--model", help="write the fitted model here")
    p.add_argument("--model-in", help="check the features against an existing model's config")
    p.add_argument("--report", default="-")
    p.add_argument("--csv", help="confusion matrix CSV")
    p.add_argument("--alpha-csv", help="alpha sweep table CSV")
    p.add_argument("--timing", action="store_true", help="add wall-clock timings to the report")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ggm)

    p = sub.add_parser("svm", help="supervised SVM evaluation")
    p.add_argument("features")
    p.add_argument("--protocol", choices=("loo", "kfold"), default="loo")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--kernel", choices=("linear", "rbf"))
    p.add_argument("--grid", action="store_true", help="5-fold grid search for C and gamma")
    p.add_argument("--model", help="train on everything and write the ensemble here")
    p.add_argument("--report", default="-")
    p.add_argument("--csv", help="confusion matrix CSV")
    p.add_argument("--timing", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_svm)

    p = sub.add_parser("bench", help="accuracy and window duration across N")
    p.add_argument("input", help="dataset directory")
    p.add_argument("--kind", choices=("auto", "poker2015", "mnist"), default="auto")
    p.add_argument("--sweep", default="50,100,150,175,200,225,250")
    p.add_argument("--protocol", choices=("loo", "kfold"), default="kfold")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--limit", type=int)
    p.add_argument("-o", "--out", default="-")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dump-elbp", help="print the 36 eLBP classes")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_dump_elbp)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        sys.stderr.write(_error_line(type(exc).__name__, str(exc)) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
