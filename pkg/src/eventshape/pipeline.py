"""End-to-end pipelines: feature extraction, GGM and SVM evaluation, N sweeps.

Everything here is deterministic given :attr:`PipelineConfig.seed`; reports
embed the full configuration and serialise with sorted keys so that re-running
a report's configuration reproduces the same bytes.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .classifiers.ggm import GgmModel, ggm_fit, name_clusters
from .classifiers.kmeans import kmeans, purity
from .classifiers.memory import majority_vote, memory_classify
from .classifiers.svm import SvmEnsemble, grid_search
from .descriptors import DESCRIPTOR_KINDS, RingConfig, describe, descriptor_length
from .events import EventStream, FramingConfig, frame_stream
from .orientation import OrientationConfig, orient_window

log = logging.getLogger(__name__)

CLASSIFIERS = ("ggm", "svm-linear", "svm-rbf")
ALPHA_SWEEP = (1.0, 0.75, 0.5, 0.25, 0.0)


@dataclass(frozen=True)
class PipelineConfig:
    framing: FramingConfig = FramingConfig()
    orientation: OrientationConfig = OrientationConfig()
    descriptor: str = "hoe+elbp4pol"
    ring: RingConfig = RingConfig()
    classifier: str = "ggm"
    alpha: float = 0.75
    K: int = 4
    C: float = 1.0
    gamma: Optional[float] = None
    svm_tol: float = 1e-3
    seed: int = 0
    datasets: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.descriptor not in DESCRIPTOR_KINDS:
            raise ValueError(f"unknown descriptor {self.descriptor!r}; choose from {DESCRIPTOR_KINDS}")
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"unknown classifier {self.classifier!r}; choose from {CLASSIFIERS}")
        if self.ring.V != self.orientation.V:
            raise ValueError("ring.V must equal orientation.V")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.C <= 0:
            raise ValueError("C must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        for key, typ in (("framing", FramingConfig), ("orientation", OrientationConfig),
                         ("ring", RingConfig)):
            if key in d and isinstance(d[key], dict):
                d[key] = typ(**d[key])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def feature_dict(self) -> dict:
        """The part of the configuration that determines descriptor values."""
        return {"framing": asdict(self.framing), "orientation": asdict(self.orientation),
                "descriptor": self.descriptor, "ring": asdict(self.ring)}


# ---------------------------------------------------------------- features


@dataclass(eq=False)
class FeatureSet:
    """Window descriptors of a labelled collection of samples.

    ``sample`` maps each window to its sample; ``sequence`` groups windows
    whose order carries memory (one per sample for per-file datasets, a single
    group for one continuous recording).
    """

    features: np.ndarray
    sample: np.ndarray
    window_index: np.ndarray
    sequence: np.ndarray
    duration_us: np.ndarray
    sample_labels: list
    sources: list
    config: dict
    discarded: int = 0

    def __len__(self):
        return len(self.features)

    @property
    def labels(self) -> np.ndarray:
        """Per-window ground-truth labels."""
        lab = np.array([str(x) for x in self.sample_labels], dtype=object)
        return lab[self.sample] if len(self.sample) else np.zeros(0, dtype=object)

    @property
    def classes(self) -> list:
        return sorted({str(x) for x in self.sample_labels if x is not None})

    @property
    def n_samples(self) -> int:
        return len(self.sample_labels)

    def to_json(self) -> str:
        records = [
            {"source": self.sources[s], "sample": int(s), "label": self.sample_labels[s],
             "window_index": int(w), "sequence": int(q), "duration_us": int(d),
             "vector": v.tolist()}
            for s, w, q, d, v in zip(self.sample, self.window_index, self.sequence,
                                     self.duration_us, self.features)
        ]
        samples = [{"source": src, "label": lab}
                   for src, lab in zip(self.sources, self.sample_labels)]
        doc = {"format": "eventshape-features", "version": 1, "config": self.config,
               "samples": samples, "discarded": self.discarded, "records": records}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FeatureSet":
        doc = json.loads(text)
        if doc.get("format") != "eventshape-features" or doc.get("version") != 1:
            raise ValueError("not a version-1 feature file")
        recs = doc["records"]
        dim = descriptor_length(doc["config"]["descriptor"], doc["config"]["orientation"]["V"],
                                RingConfig(**doc["config"]["ring"]))
        feats = np.array([r["vector"] for r in recs], dtype=float).reshape(len(recs), dim)

        def col(key):
            return np.array([r[key] for r in recs], dtype=np.int64)

        return cls(feats, col("sample"), col("window_index"), col("sequence"), col("duration_us"),
                   [s["label"] for s in doc["samples"]], [s["source"] for s in doc["samples"]],
                   doc["config"], doc.get("discarded", 0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["source", "label", "window_index", "duration_us"]
                   + [f"f{i}" for i in range(self.features.shape[1])])
        for s, wi, d, v in zip(self.sample, self.window_index, self.duration_us, self.features):
            w.writerow([self.sources[s], self.sample_labels[s], int(wi), int(d)]
                       + [repr(float(x)) for x in v])
        return buf.getvalue()

    def subset(self, samples) -> "FeatureSet":
        """Windows of the given sample ids (sample numbering is kept)."""
        m = np.isin(self.sample, np.asarray(samples))
        return FeatureSet(self.features[m], self.sample[m], self.window_index[m],
                          self.sequence[m], self.duration_us[m], self.sample_labels,
                          self.sources, self.config)


def window_descriptors(stream: EventStream, cfg: PipelineConfig, starts_only=None):
    """Descriptors and durations of every window of one stream.

    ``starts_only`` optionally restricts the work to windows whose start index
    is in that set. Returns ``(features, window_index, durations)``.
    """
    feats, idx, durs = [], [], []
    for k, w in enumerate(frame_stream(stream, cfg.framing)):
        if starts_only is not None and w.start_index not in starts_only:
            continue
        o = orient_window(w, cfg.orientation)
        feats.append(describe(w, cfg.descriptor, o, cfg.ring))
        idx.append(k)
        durs.append(w.duration_us)
    dim = descriptor_length(cfg.descriptor, cfg.orientation.V, cfg.ring)
    return (np.array(feats, dtype=float).reshape(len(feats), dim),
            np.array(idx, dtype=np.int64), np.array(durs, dtype=np.int64))


def extract_features(samples: Sequence, cfg: PipelineConfig, sources=None) -> FeatureSet:
    """Per-sample feature extraction.

    ``samples`` holds ``(stream, label)`` pairs, objects with ``stream`` and
    ``label`` attributes, or bare streams (label taken from the stream).
    """
    feats, smp, widx, durs, labels = [], [], [], [], []
    srcs = []
    for i, item in enumerate(samples):
        if isinstance(item, EventStream):
            stream, label = item, item.label
        elif hasattr(item, "stream"):
            stream, label = item.stream, item.label
        else:
            stream, label = item[0], item[1]
        F, idx, d = window_descriptors(stream, cfg)
        feats.append(F)
        smp.append(np.full(len(F), i, dtype=np.int64))
        widx.append(idx)
        durs.append(d)
        labels.append(None if label is None else str(label))
        srcs.append(sources[i] if sources is not None else f"sample{i:04d}")
    dim = descriptor_length(cfg.descriptor, cfg.orientation.V, cfg.ring)
    if not feats:
        z = np.zeros(0, dtype=np.int64)
        return FeatureSet(np.zeros((0, dim)), z, z, z, z, [], [], cfg.feature_dict())
    sample = np.concatenate(smp)
    return FeatureSet(np.vstack(feats), sample, np.concatenate(widx), sample.copy(),
                      np.concatenate(durs), labels, srcs, cfg.feature_dict())


def extract_sequence_features(stream: EventStream, boundaries: Sequence[int], labels: Sequence,
                              cfg: PipelineConfig, source: str = "sequence") -> FeatureSet:
    """Features of one continuous recording split into labelled segments.

    ``boundaries[k]`` is the first event index of segment ``k`` (with a final
    end index). Windows containing events of two segments are discarded.
    """
    bounds = np.asarray(boundaries, dtype=np.int64)
    N = cfg.framing.N
    windows = frame_stream(stream, cfg.framing)
    keep = set()
    seg_of = {}
    for w in windows:
        s = w.start_index
        seg = int(np.searchsorted(bounds, s, side="right") - 1)
        if s + N <= bounds[seg + 1]:
            keep.add(s)
            seg_of[s] = seg
    F, idx, d = window_descriptors(stream, cfg, keep)
    starts = np.array([windows[k].start_index for k in idx], dtype=np.int64)
    sample = np.array([seg_of[s] for s in starts.tolist()], dtype=np.int64)
    n_seg = len(bounds) - 1
    return FeatureSet(F, sample, idx, np.zeros(len(F), dtype=np.int64), d,
                      [None if x is None else str(x) for x in labels],
                      [f"{source}#{k}" for k in range(n_seg)], cfg.feature_dict(),
                      discarded=len(windows) - len(keep))


def check_compatible(model_config: dict, features: FeatureSet) -> None:
    """Refuse to score descriptors produced under a different configuration."""
    if model_config and model_config != features.config:
        diff = sorted(k for k in set(model_config) | set(features.config)
                      if model_config.get(k) != features.config.get(k))
        raise ValueError(f"feature configuration differs from the model's in: {', '.join(diff)}")


# ----------------------------------------------------------------- reports


def confusion_matrix(truth, pred, classes) -> np.ndarray:
    pos = {c: i for i, c in enumerate(classes)}
    M = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, pred):
        if t in pos and p in pos:
            M[pos[t], pos[p]] += 1
    return M


@dataclass(eq=False)
class EvalReport:
    """Sample-level (TA) and window-level (wA) results of one evaluation.

    ``confusion`` rows are true classes and columns predictions, counted over
    samples; ``window_confusion`` counts windows.
    """

    classes: list
    confusion: np.ndarray
    window_confusion: np.ndarray
    mean_window_us: float
    config: dict
    details: dict = field(default_factory=dict)
    timings: Optional[dict] = None

    @property
    def TA(self) -> float:
        n = self.confusion.sum()
        return 100.0 * np.trace(self.confusion) / n if n else 0.0

    @property
    def wA(self) -> float:
        n = self.window_confusion.sum()
        return 100.0 * np.trace(self.window_confusion) / n if n else 0.0

    def to_dict(self) -> dict:
        d = {
            "classes": list(self.classes),
            "confusion": self.confusion.tolist(),
            "window_confusion": self.window_confusion.tolist(),
            "TA": self.TA,
            "wA": self.wA,
            "n_samples": int(self.confusion.sum()),
            "n_windows": int(self.window_confusion.sum()),
            "mean_window_us": self.mean_window_us,
            "config": self.config,
            "details": self.details,
        }
        if self.timings is not None:
            d["timings"] = self.timings
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred"] + list(self.classes) + ["accuracy"])
        for c, row in zip(self.classes, self.confusion):
            tot = row.sum()
            acc = 100.0 * row[self.classes.index(c)] / tot if tot else 0.0
            w.writerow([c] + row.tolist() + [f"{acc:.2f}"])
        w.writerow(["TA", f"{self.TA:.2f}", "wA", f"{self.wA:.2f}"])
        return buf.getvalue()


def _memory_predict(scores, sequence, alpha):
    """Per-window k* with memory reset at every new sequence."""
    kstar = np.zeros(len(scores), dtype=np.int64)
    for q in np.unique(sequence):
        m = sequence == q
        kstar[m] = memory_classify(scores[m], alpha)[1]
    return kstar


def _sample_votes(kstar, sample, n_samples):
    votes = {}
    for s in range(n_samples):
        m = sample == s
        if m.any():
            votes[s] = majority_vote(kstar[m])
    return votes


# --------------------------------------------------------------------- GGM


def run_ggm(fs: FeatureSet, cfg: PipelineConfig, timing: bool = False):
    """K-means + GGM on all windows, scored back with the memory rule.

    Returns ``(model, report)``. Clusters are named after their majority
    ground-truth label when labels exist; the report's ``details`` holds the
    cluster purity and window accuracy for each alpha of the standard sweep.
    """
    t0 = time.perf_counter()
    n_samples = len(np.unique(fs.sample))
    if n_samples < cfg.K or len(fs) < cfg.K:
        raise ValueError(f"cannot fit K={cfg.K} clusters to {n_samples} samples "
                         f"({len(fs)} windows)")
    V = cfg.orientation.V
    if not cfg.descriptor.startswith("hoe"):
        raise ValueError("the GGM works on HOE descriptors")
    labels, _ = kmeans(fs.features, cfg.K, seed=cfg.seed)
    model = ggm_fit(fs.features, labels, cfg.K, V)
    truth = fs.labels
    has_truth = all(x is not None for x in fs.sample_labels)
    if has_truth:
        names = name_clusters(labels, truth.astype(str), cfg.K)
    else:
        names = [f"cluster{k}" for k in range(cfg.K)]
    model.class_names = names
    model.config = fs.config
    t_fit = time.perf_counter() - t0

    scores = model.score(fs.features)
    classes = fs.classes if has_truth else sorted(set(names))
    sweep = {}
    for a in ALPHA_SWEEP:
        k = _memory_predict(scores, fs.sequence, a)
        pred = np.array(names, dtype=object)[k]
        sweep[f"{a:g}"] = float(100.0 * np.mean(pred == truth)) if has_truth and len(k) else None
    kstar = _memory_predict(scores, fs.sequence, cfg.alpha)
    pred = np.array(names, dtype=object)[kstar]
    wconf = confusion_matrix(truth, pred, classes) if has_truth else np.zeros((0, 0), np.int64)
    votes = _sample_votes(kstar, fs.sample, fs.n_samples)
    sample_pred = [names[v] for v in votes.values()]
    sample_truth = [fs.sample_labels[s] for s in votes]
    conf = confusion_matrix(sample_truth, sample_pred, classes) if has_truth else np.zeros((0, 0), np.int64)
    details = {
        "cluster_names": names,
        "cluster_sizes": model.sizes.tolist(),
        "purity": float(purity(labels, truth.astype(str))) if has_truth else None,
        "alpha_sweep_wA": sweep,
        "discarded_windows": fs.discarded,
    }
    timings = None
    if timing:
        timings = {"fit_s": t_fit, "total_s": time.perf_counter() - t0}
    report = EvalReport(classes, conf, wconf, _mean_duration(fs),
                        _report_config(cfg, fs), details, timings)
    return model, report


def alpha_table(report: EvalReport) -> str:
    """Window accuracy for each memory factor, one row per alpha."""
    rows = ["alpha,accuracy"]
    for a, acc in report.details["alpha_sweep_wA"].items():
        rows.append(f"{a},{'' if acc is None else f'{acc:.2f}'}")
    return "\n".join(rows) + "\n"


def _mean_duration(fs: FeatureSet) -> float:
    return float(fs.duration_us.mean()) if len(fs) else 0.0


def _report_config(cfg: PipelineConfig, fs: FeatureSet) -> dict:
    d = cfg.to_dict()
    if fs.config and fs.config != cfg.feature_dict():
        # features were extracted elsewhere; record what they actually used
        d.update(fs.config)
    return d


# --------------------------------------------------------------------- SVM


def make_folds(fs: FeatureSet, protocol: str = "loo", folds: int = 10, seed: int = 0) -> list:
    """Partition sample ids into test folds.

    ``loo`` gives one fold per sample; ``kfold`` deals each class's shuffled
    samples round-robin over ``folds`` folds (stratified, disjoint and
    exhaustive).
    """
    ids = [s for s in range(fs.n_samples) if np.any(fs.sample == s)]
    if protocol == "loo":
        return [[s] for s in ids]
    if protocol != "kfold":
        raise ValueError(f"unknown protocol {protocol!r}")
    if folds < 2:
        raise ValueError("k-fold needs at least 2 folds")
    if folds > len(ids):
        raise ValueError(f"{folds} folds for {len(ids)} samples")
    rng = np.random.default_rng(seed)
    out = [[] for _ in range(folds)]
    pos = 0
    for c in fs.classes:
        members = [s for s in ids if fs.sample_labels[s] == c]
        for s in rng.permutation(members).tolist():
            out[pos % folds].append(int(s))
            pos += 1
    return [sorted(f) for f in out]


def run_svm(fs: FeatureSet, cfg: PipelineConfig, protocol: str = "loo", folds: int = 10,
            grid: bool = False, timing: bool = False) -> EvalReport:
    """Cross-validated one-against-one SVM with memory-smoothed majority votes."""
    t0 = time.perf_counter()
    if cfg.classifier not in ("svm-linear", "svm-rbf"):
        raise ValueError("run_svm needs an svm-linear or svm-rbf classifier")
    if any(x is None for x in fs.sample_labels):
        raise ValueError("supervised evaluation needs labelled samples")
    kernel = cfg.classifier.split("-")[1]
    classes = fs.classes
    truth = fs.labels.astype(str)
    C, gamma = cfg.C, cfg.gamma
    details = {"protocol": protocol}
    if grid:
        g = grid_search(fs.features, truth, fs.sample, kernel, folds=5, seed=cfg.seed)
        C, gamma = g["C"], g["gamma"]
        details["grid"] = g
    details["C"], details["gamma"] = C, gamma
    fold_list = make_folds(fs, protocol, folds, cfg.seed)
    details["folds"] = len(fold_list)
    kstar = np.zeros(len(fs), dtype=np.int64)
    for test in fold_list:
        te = np.isin(fs.sample, test)
        tr = ~te
        present = set(truth[tr].tolist())
        for c in classes:
            if c not in present:
                raise ValueError(f"class {c!r} is absent from a training fold")
        ens = SvmEnsemble.fit(fs.features[tr], truth[tr], kernel, C, gamma, cfg.svm_tol,
                              classes=classes)
        proba = ens.predict_proba(fs.features[te])
        kstar[te] = _memory_predict(proba, fs.sequence[te], cfg.alpha)
    names = np.array(classes, dtype=object)
    wconf = confusion_matrix(truth, names[kstar], classes)
    votes = _sample_votes(kstar, fs.sample, fs.n_samples)
    conf = confusion_matrix([fs.sample_labels[s] for s in votes],
                            [classes[v] for v in votes.values()], classes)
    timings = {"total_s": time.perf_counter() - t0} if timing else None
    return EvalReport(classes, conf, wconf, _mean_duration(fs), _report_config(cfg, fs),
                      details, timings)


def train_svm(fs: FeatureSet, cfg: PipelineConfig) -> SvmEnsemble:
    kernel = cfg.classifier.split("-")[1]
    ens = SvmEnsemble.fit(fs.features, fs.labels.astype(str), kernel, cfg.C, cfg.gamma,
                          cfg.svm_tol, classes=fs.classes)
    ens.config = fs.config
    return ens


# ------------------------------------------------------------------- bench


BENCH_COLUMNS = ("N", "B", "TA", "wA", "mean_window_us", "n_windows")


def bench(samples, cfg: PipelineConfig, Ns: Sequence[int], protocol: str = "kfold",
          folds: int = 5) -> list[dict]:
    """Accuracy and mean window duration for each window length in ``Ns``.

    The step ``B`` is taken from the configuration and capped at ``N``.
    """
    rows = []
    for N in Ns:
        c = replace(cfg, framing=FramingConfig(N, min(cfg.framing.B, N)))
        fs = extract_features(samples, c)
        if cfg.classifier == "ggm":
            _, rep = run_ggm(fs, c)
        else:
            rep = run_svm(fs, c, protocol, folds)
        rows.append({"N": N, "B": c.framing.B, "TA": rep.TA, "wA": rep.wA,
                     "mean_window_us": rep.mean_window_us, "n_windows": len(fs)})
    return rows


def rows_to_csv(rows, columns=BENCH_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def load_model(d: dict):
    if d.get("type") == "ggm":
        return GgmModel.from_dict(d)
    if d.get("type") == "svm-ovo":
        return SvmEnsemble.from_dict(d)
    raise ValueError(f"unknown model type {d.get('type')!r}")
