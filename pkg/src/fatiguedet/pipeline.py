"""End-to-end orchestration: manifest ingestion, pipeline fitting,
streaming inference into the alert unit, cross-validated evaluation, and
the PIPE1 composite model file.

A fitted pipeline bundles the ROI geometry, preprocessing settings, an
optional face-detection cascade with its scan settings, the PCA basis, and
the SVM. Given identical inputs, config, and seed, training and inference
are byte-reproducible.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import classifier, fatigue, features
from .classifier import KernelSpec, SvmModel
from .detector import Cascade, ScanConfig, detect, load_cascade, save_cascade
from .errors import (
    BadLabel,
    ConfigError,
    EmptyManifest,
    ManifestError,
    MissingFile,
    ModelMismatch,
    NoFacesFound,
    ParseError,
    SingleClass,
    TooFewSamples,
    VersionMismatch,
)
from .features import PcaModel, RoiGeometry, load_pca, save_pca
from .imaging import Image, PreprocessConfig, Rect, load_pnm, preprocess

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Manifest ingestion

@dataclass(frozen=True)
class ManifestRecord:
    path: Path
    label: int  # +1 fatigued, -1 alert
    group: str | None = None
    box: Rect | None = None

    def load_image(self) -> Image:
        return load_pnm(self.path.read_bytes())


def _parse_label(token: str, line_no: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise BadLabel(f"line {line_no}: label {token!r} is not +1/-1") \
            from None
    if value not in (1, -1):
        raise BadLabel(f"line {line_no}: label {token!r} is not +1/-1")
    return value


def ingest(manifest_path: str | Path) -> list[ManifestRecord]:
    """Read a manifest CSV: path,label[,group[,x,y,w,h]] per record.

    An optional header line is detected by a non-numeric label field. Paths
    resolve relative to the manifest's directory and must exist.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise MissingFile(f"manifest {manifest_path} does not exist")
    base = manifest_path.parent
    records: list[ManifestRecord] = []
    with open(manifest_path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise ManifestError(f"line {line_no}: expected at least "
                                    f"path,label")
            if line_no == 1:
                try:
                    int(row[1])
                except ValueError:
                    continue  # header line
            if len(row) not in (2, 3, 7):
                raise ManifestError(
                    f"line {line_no}: expected 2, 3, or 7 fields, "
                    f"got {len(row)}")
            label = _parse_label(row[1].strip(), line_no)
            group = row[2].strip() or None if len(row) >= 3 else None
            box = None
            if len(row) == 7:
                try:
                    x, y, w, h = (int(v) for v in row[3:7])
                    box = Rect(x, y, w, h)
                except ValueError as exc:
                    raise ManifestError(f"line {line_no}: bad box: {exc}") \
                        from None
            path = base / row[0].strip()
            if not path.exists():
                raise MissingFile(f"line {line_no}: {path} does not exist")
            records.append(ManifestRecord(path, label, group, box))
    if not records:
        raise EmptyManifest(f"{manifest_path} holds no records")
    return records


# ---------------------------------------------------------------------------
# Configuration

@dataclass(frozen=True)
class PipelineConfig:
    cascade_path: str | None = None
    scan: ScanConfig = ScanConfig()
    preprocess: PreprocessConfig = PreprocessConfig()
    geometry: RoiGeometry = features.DEFAULT_GEOMETRY
    pca_k: int | None = None
    pca_variance: float | None = 0.95
    svm_c: float = 1.0
    svm_kernel: str = "rbf"
    svm_gamma: float | None = None
    svm_tol: float = 1e-3
    svm_max_passes: int = 200
    no_face_policy: str = "skip"  # "skip" or "fatigued"
    alert: fatigue.AlertConfig = fatigue.AlertConfig()
    seed: int = 0

    def kernel(self) -> KernelSpec:
        return KernelSpec(self.svm_kernel, self.svm_gamma)


def _fmt_opt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: PipelineConfig) -> str:
    """Line-oriented key = value form holding every tunable default."""
    g = cfg.geometry
    pairs = [
        ("# face detector ('cascade_path' empty disables detection)", None),
        ("cascade_path", _fmt_opt(cfg.cascade_path)),
        ("scale_factor", repr(cfg.scan.scale_factor)),
        ("step_frac", repr(cfg.scan.step_frac)),
        ("group_iou", repr(cfg.scan.group_iou)),
        ("min_neighbors", str(cfg.scan.min_neighbors)),
        ("# preprocessing", None),
        ("low_light", cfg.preprocess.low_light),
        ("low_light_threshold", repr(cfg.preprocess.low_light_threshold)),
        ("denoise_spatial_sigma", repr(cfg.preprocess.denoise_spatial_sigma)),
        ("denoise_range_sigma", repr(cfg.preprocess.denoise_range_sigma)),
        ("clahe_tiles", str(cfg.preprocess.clahe_tiles)),
        ("clahe_clip_limit", repr(cfg.preprocess.clahe_clip_limit)),
        ("# ROI geometry", None),
        ("face_side", str(g.face_side)),
        ("eye_window", f"{g.eye.x} {g.eye.y} {g.eye.w} {g.eye.h}"),
        ("mouth_window", f"{g.mouth.x} {g.mouth.y} {g.mouth.w} {g.mouth.h}"),
        ("# PCA ('pca_k' overrides the variance fraction)", None),
        ("pca_k", _fmt_opt(cfg.pca_k)),
        ("pca_variance", _fmt_opt(cfg.pca_variance)),
        ("# SVM ('svm_gamma' empty uses 1/(k*var))", None),
        ("svm_c", repr(cfg.svm_c)),
        ("svm_kernel", cfg.svm_kernel),
        ("svm_gamma", _fmt_opt(cfg.svm_gamma)),
        ("svm_tol", repr(cfg.svm_tol)),
        ("svm_max_passes", str(cfg.svm_max_passes)),
        ("# inference", None),
        ("no_face_policy", cfg.no_face_policy),
        ("# alert unit", None),
        ("t_low", str(cfg.alert.t_low)),
        ("t_high", str(cfg.alert.t_high)),
        ("alarm_duration", repr(cfg.alert.alarm_duration)),
        ("high_persist", repr(cfg.alert.high_persist)),
        ("water_spray", _fmt_opt(cfg.alert.water_spray_enabled)),
        ("sample_period", repr(cfg.alert.sample_period)),
        ("realarm_on_recheck", _fmt_opt(cfg.alert.realarm_on_recheck)),
        ("# misc", None),
        ("seed", str(cfg.seed)),
    ]
    lines = []
    for key, value in pairs:
        lines.append(key if value is None else f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _parse_bool(token: str, key: str) -> bool:
    low = token.lower()
    if low in ("on", "true", "1", "yes"):
        return True
    if low in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected on/off, got {token!r}")


def _parse_rect(token: str, key: str) -> Rect:
    parts = token.split()
    if len(parts) != 4:
        raise ConfigError(f"{key}: expected 'x y w h', got {token!r}")
    try:
        return Rect(*(int(v) for v in parts))
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_config(text: str, base: PipelineConfig | None = None,
                 ) -> PipelineConfig:
    """Parse key = value lines ('#' comments allowed) over base defaults."""
    cfg = base if base is not None else PipelineConfig()
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()

    def pop(key, parse, default):
        if key not in values:
            return default
        token = values.pop(key)
        if token == "":
            return None
        try:
            return parse(token)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    scan = ScanConfig(
        scale_factor=pop("scale_factor", float, cfg.scan.scale_factor),
        step_frac=pop("step_frac", float, cfg.scan.step_frac),
        group_iou=pop("group_iou", float, cfg.scan.group_iou),
        min_neighbors=pop("min_neighbors", int, cfg.scan.min_neighbors))
    prep = PreprocessConfig(
        low_light=pop("low_light", str, cfg.preprocess.low_light),
        low_light_threshold=pop("low_light_threshold", float,
                                cfg.preprocess.low_light_threshold),
        denoise_spatial_sigma=pop("denoise_spatial_sigma", float,
                                  cfg.preprocess.denoise_spatial_sigma),
        denoise_range_sigma=pop("denoise_range_sigma", float,
                                cfg.preprocess.denoise_range_sigma),
        clahe_tiles=pop("clahe_tiles", int, cfg.preprocess.clahe_tiles),
        clahe_clip_limit=pop("clahe_clip_limit", float,
                             cfg.preprocess.clahe_clip_limit))
    geometry = RoiGeometry(
        face_side=pop("face_side", int, cfg.geometry.face_side),
        eye=pop("eye_window", lambda t: _parse_rect(t, "eye_window"),
                cfg.geometry.eye),
        mouth=pop("mouth_window",
                  lambda t: _parse_rect(t, "mouth_window"),
                  cfg.geometry.mouth))
    alert = fatigue.AlertConfig(
        t_low=pop("t_low", int, cfg.alert.t_low),
        t_high=pop("t_high", int, cfg.alert.t_high),
        alarm_duration=pop("alarm_duration", float,
                           cfg.alert.alarm_duration),
        high_persist=pop("high_persist", float, cfg.alert.high_persist),
        water_spray_enabled=pop(
            "water_spray", lambda t: _parse_bool(t, "water_spray"),
            cfg.alert.water_spray_enabled),
        sample_period=pop("sample_period", float, cfg.alert.sample_period),
        realarm_on_recheck=pop(
            "realarm_on_recheck",
            lambda t: _parse_bool(t, "realarm_on_recheck"),
            cfg.alert.realarm_on_recheck))
    no_face = pop("no_face_policy", str, cfg.no_face_policy)
    if no_face not in ("skip", "fatigued"):
        raise ConfigError(f"no_face_policy: expected skip or fatigued, "
                          f"got {no_face!r}")
    out = PipelineConfig(
        cascade_path=pop("cascade_path", str, cfg.cascade_path),
        scan=scan, preprocess=prep, geometry=geometry,
        pca_k=pop("pca_k", int, cfg.pca_k),
        pca_variance=pop("pca_variance", float, cfg.pca_variance),
        svm_c=pop("svm_c", float, cfg.svm_c),
        svm_kernel=pop("svm_kernel", str, cfg.svm_kernel),
        svm_gamma=pop("svm_gamma", float, cfg.svm_gamma),
        svm_tol=pop("svm_tol", float, cfg.svm_tol),
        svm_max_passes=pop("svm_max_passes", int, cfg.svm_max_passes),
        no_face_policy=no_face, alert=alert,
        seed=pop("seed", int, cfg.seed))
    if values:
        raise ConfigError(f"unknown config keys: {sorted(values)}")
    return out


# ---------------------------------------------------------------------------
# Pipeline model

@dataclass(frozen=True, eq=False)
class PipelineModel:
    geometry: RoiGeometry
    preprocess: PreprocessConfig
    pca: PcaModel
    svm: SvmModel
    cascade: Cascade | None = None
    scan: ScanConfig = ScanConfig()

    def __post_init__(self):
        if self.svm.n_features != self.pca.k:
            raise ModelMismatch(
                f"SVM expects {self.svm.n_features} inputs but PCA "
                f"produces {self.pca.k}")
        if self.pca.d != self.geometry.vector_length:
            raise ModelMismatch(
                f"PCA dimension {self.pca.d} does not match the "
                f"{self.geometry.vector_length}-entry ROI layout")


def _largest_box(boxes) -> Rect | None:
    if not boxes:
        return None
    return max(boxes, key=lambda b: (b.rect.area, -b.rect.y, -b.rect.x)).rect


def frame_box(img: Image, model_or_cascade, scan: ScanConfig,
              fallback: Rect | None) -> Rect | None:
    """Face box for one preprocessed frame.

    With a cascade, the largest detected box wins (the driver sits nearest
    the camera); without one, the manifest ground-truth box or whole frame
    is used.
    """
    if model_or_cascade is not None:
        return _largest_box(detect(img, model_or_cascade, scan))
    if fallback is not None:
        return fallback
    return Rect(0, 0, img.width, img.height)


def extract_features(records: Sequence[ManifestRecord],
                     geometry: RoiGeometry, prep: PreprocessConfig,
                     cascade: Cascade | None, scan: ScanConfig,
                     ) -> tuple[np.ndarray, np.ndarray, list, list[int]]:
    """Feature matrix for a dataset: (X, labels, groups, skipped indices)."""
    vectors = []
    labels = []
    groups = []
    skipped: list[int] = []
    for i, rec in enumerate(records):
        img = preprocess(rec.load_image(), prep)
        box = frame_box(img, cascade, scan, rec.box)
        if box is None:
            logger.warning("no face found in %s; frame skipped", rec.path)
            skipped.append(i)
            continue
        vectors.append(features.frame_features(img, box, geometry))
        labels.append(rec.label)
        groups.append(rec.group)
    if not vectors:
        raise NoFacesFound("every frame was skipped")
    return np.array(vectors), np.array(labels), groups, skipped


def fit_pipeline(records: Sequence[ManifestRecord],
                 config: PipelineConfig = PipelineConfig(),
                 ) -> PipelineModel:
    """Train PCA + SVM over the extracted ROI features of a dataset."""
    cascade = None
    if config.cascade_path:
        cascade = load_cascade(Path(config.cascade_path).read_text())
    x, y, _, skipped = extract_features(records, config.geometry,
                                        config.preprocess, cascade,
                                        config.scan)
    if skipped:
        logger.warning("%d of %d frames skipped during training",
                       len(skipped), len(records))
    if np.all(y == 1) or np.all(y == -1):
        raise SingleClass("training data contains a single class")
    pca = features.pca_fit(x, k=config.pca_k,
                           variance=None if config.pca_k else
                           config.pca_variance)
    z = features.pca_project_many(pca, x)
    svm = classifier.svm_train(z, y, C=config.svm_c, kernel=config.kernel(),
                               tol=config.svm_tol,
                               max_passes=config.svm_max_passes)
    return PipelineModel(geometry=config.geometry,
                         preprocess=config.preprocess, pca=pca, svm=svm,
                         cascade=cascade, scan=config.scan)


def pipeline_predict(model: PipelineModel,
                     records: Sequence[ManifestRecord]) -> np.ndarray:
    """Labels for every frame of a dataset (ground-truth boxes allowed)."""
    x, _, _, _ = extract_features(records, model.geometry, model.preprocess,
                                  model.cascade, model.scan)
    z = features.pca_project_many(model.pca, x)
    dec = classifier.svm_decision_many(model.svm, z)
    return np.where(dec >= 0, 1, -1)


# ---------------------------------------------------------------------------
# Streaming inference

@dataclass
class StreamTrace:
    trace: fatigue.Trace
    labels: list[int | None]  # None marks a skipped (no-face) frame
    skipped: int

    def render(self) -> str:
        base = self.trace.render().splitlines()
        out = [base[0]]
        tick_idx = 0
        for line in base[1:]:
            out.append(line)
            if line.startswith("TICK"):
                label = self.labels[tick_idx]
                t = line.split()[1]
                text = "skip" if label is None else f"{label:+d}"
                out.append(f"LABEL {t} {text}")
                tick_idx += 1
        return "\n".join(out) + "\n"


def infer_stream(model: PipelineModel, frames: Sequence[Image],
                 alert_config: fatigue.AlertConfig = fatigue.AlertConfig(),
                 no_face_policy: str = "skip",
                 boxes: Sequence[Rect | None] | None = None) -> StreamTrace:
    """Classify frames in order and drive the alert unit.

    Frames with no detected face leave the running sum unchanged under the
    "skip" policy, or count as fatigued under "fatigued"; time advances
    either way. With the detector disabled, per-frame fallback boxes (e.g.
    from a manifest) stand in for detections, matching the training-side
    box policy; otherwise the whole frame is used.
    """
    if no_face_policy not in ("skip", "fatigued"):
        raise ValueError(f"bad no_face_policy {no_face_policy!r}")
    acc = fatigue.FatigueAccumulator()
    state: fatigue.AlertState = fatigue.IDLE
    ticks: list[fatigue.TraceTick] = []
    events: list[fatigue.ActuatorEvent] = []
    labels: list[int | None] = []
    skipped = 0
    for i, img in enumerate(frames):
        img = preprocess(img, model.preprocess)
        fallback = boxes[i] if boxes is not None else None
        if fallback is None and model.cascade is None:
            fallback = Rect(0, 0, img.width, img.height)
        box = frame_box(img, model.cascade, model.scan, fallback)
        label: int | None
        if box is None:
            skipped += 1
            if no_face_policy == "fatigued":
                label = 1
            else:
                label = None
        else:
            vec = features.frame_features(img, box, model.geometry)
            z = features.pca_project(model.pca, vec)
            label = classifier.svm_predict(model.svm, z)
        if label is None:
            acc = fatigue.FatigueAccumulator(
                acc.r, acc.t + alert_config.sample_period)
        else:
            acc = fatigue.step(acc, label, alert_config.sample_period)
        lvl = fatigue.level(acc, alert_config)
        state, evs = fatigue.alert_step(state, lvl,
                                        alert_config.sample_period,
                                        alert_config, now=acc.t)
        events.extend(evs)
        ticks.append(fatigue.TraceTick(acc.t, acc.r, lvl, state))
        labels.append(label)
    trace = fatigue.Trace(alert_config, ticks, events)
    return StreamTrace(trace, labels, skipped)


# ---------------------------------------------------------------------------
# Evaluation

@dataclass
class MetricsReport:
    accuracy: float
    precision: float | None
    recall: float | None
    tp: int
    fp: int
    tn: int
    fn: int
    fold_accuracies: list[float]
    mean_fold_accuracy: float
    fold_test_indices: list[list[int]]
    mean_detection_latency_ticks: float | None = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn,
                          "fn": self.fn},
            "fold_accuracies": self.fold_accuracies,
            "mean_fold_accuracy": self.mean_fold_accuracy,
            "mean_detection_latency_ticks":
                self.mean_detection_latency_ticks,
        }

    def to_text(self) -> str:
        def opt(v):
            return "n/a" if v is None else f"{v:.4f}"

        lines = [
            f"accuracy  {self.accuracy:.4f}",
            f"precision {opt(self.precision)}",
            f"recall    {opt(self.recall)}",
            f"confusion tp={self.tp} fp={self.fp} tn={self.tn} "
            f"fn={self.fn}",
            "folds     " + " ".join(f"{a:.4f}"
                                    for a in self.fold_accuracies),
            f"mean fold {self.mean_fold_accuracy:.4f}",
        ]
        if self.mean_detection_latency_ticks is not None:
            lines.append(
                f"latency   {self.mean_detection_latency_ticks:.2f} ticks")
        return "\n".join(lines) + "\n"


def group_folds(groups: Sequence[str], folds: int,
                seed: int) -> list[list[int]]:
    """Whole groups assigned to folds, largest first onto the lightest
    fold, after a seeded shuffle of equal-size orderings."""
    rng = np.random.default_rng(seed)
    names = sorted(set(groups))
    rng.shuffle(names)
    by_size = sorted(names, key=lambda g: -sum(1 for x in groups
                                               if x == g))
    assignment: list[list[int]] = [[] for _ in range(folds)]
    sizes = [0] * folds
    for name in by_size:
        members = [i for i, g in enumerate(groups) if g == name]
        target = min(range(folds), key=lambda f: (sizes[f], f))
        assignment[target].extend(members)
        sizes[target] += len(members)
    return [sorted(f) for f in assignment]


def evaluate(model: PipelineModel, records: Sequence[ManifestRecord],
             folds: int, seed: int = 0) -> MetricsReport:
    """Cross-validate the classifier stage over a dataset's features.

    Features are extracted with the model's preprocessing/geometry and
    projected through its PCA basis; each fold retrains an SVM with the
    model's hyperparameters. When subject groups are present, folds are
    group-aware: no subject appears in both train and test.
    """
    x, y, groups, _ = extract_features(records, model.geometry,
                                       model.preprocess, model.cascade,
                                       model.scan)
    n = len(y)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise TooFewSamples(f"{n} samples cannot fill {folds} folds")
    if np.all(y == 1) or np.all(y == -1):
        raise SingleClass("evaluation data contains a single class")
    z = features.pca_project_many(model.pca, x)
    named = [g for g in groups if g]
    if len(set(named)) > 1 and len(named) == n and len(set(named)) >= folds:
        fold_indices = group_folds(groups, folds, seed)
    else:
        fold_indices = classifier.stratified_folds(y, folds, seed)
    report = classifier.run_folds(z, y, fold_indices, C=model.svm.C,
                                  kernel=model.svm.kernel)
    total = report.tp + report.fp + report.tn + report.fn
    accuracy = (report.tp + report.tn) / total
    precision = report.tp / (report.tp + report.fp) \
        if report.tp + report.fp else None
    recall = report.tp / (report.tp + report.fn) \
        if report.tp + report.fn else None
    return MetricsReport(accuracy=accuracy, precision=precision,
                         recall=recall, tp=report.tp, fp=report.fp,
                         tn=report.tn, fn=report.fn,
                         fold_accuracies=report.fold_accuracies,
                         mean_fold_accuracy=report.mean_accuracy,
                         fold_test_indices=report.fold_test_indices)


def onset_latency(trace: StreamTrace, onset_tick: int) -> float | None:
    """Ticks from a fatigue onset to the first AlarmOn, or None."""
    period = trace.trace.config.sample_period
    for ev in trace.trace.events:
        if ev.kind == fatigue.EventKind.ALARM_ON:
            return ev.t / period - onset_tick
    return None


# ---------------------------------------------------------------------------
# PIPE1 composite format

def _render_section(name: str, body: str) -> str:
    return f"SECTION {name}\n{body}END\n"


def save_pipeline(model: PipelineModel) -> str:
    g = model.geometry
    p = model.preprocess
    geometry_body = (f"face_side = {g.face_side}\n"
                     f"eye_window = {g.eye.x} {g.eye.y} {g.eye.w} {g.eye.h}\n"
                     f"mouth_window = {g.mouth.x} {g.mouth.y} "
                     f"{g.mouth.w} {g.mouth.h}\n")
    prep_body = (f"low_light = {p.low_light}\n"
                 f"low_light_threshold = {p.low_light_threshold!r}\n"
                 f"denoise_spatial_sigma = {p.denoise_spatial_sigma!r}\n"
                 f"denoise_range_sigma = {p.denoise_range_sigma!r}\n"
                 f"clahe_tiles = {p.clahe_tiles}\n"
                 f"clahe_clip_limit = {p.clahe_clip_limit!r}\n")
    out = ["PIPE1\n",
           _render_section("geometry", geometry_body),
           _render_section("preprocess", prep_body)]
    if model.cascade is not None:
        s = model.scan
        scan_body = (f"scale_factor = {s.scale_factor!r}\n"
                     f"step_frac = {s.step_frac!r}\n"
                     f"group_iou = {s.group_iou!r}\n"
                     f"min_neighbors = {s.min_neighbors}\n")
        out.append(_render_section("scan", scan_body))
        out.append(_render_section("cascade", save_cascade(model.cascade)))
    out.append(_render_section("pca", save_pca(model.pca)))
    out.append(_render_section("svm", classifier.save_svm(model.svm)))
    return "".join(out)


def _split_sections(lines: list[str]) -> dict[str, list[str]]:
    sections: dict[str, list[str]] = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        parts = line.split()
        if parts[0] != "SECTION" or len(parts) != 2:
            raise ParseError(f"line {i + 2}: expected SECTION header")
        name = parts[1]
        body: list[str] = []
        i += 1
        while i < len(lines) and lines[i].strip() != "END":
            body.append(lines[i])
            i += 1
        if i >= len(lines):
            raise ParseError(f"section {name!r} is not terminated")
        sections[name] = body
        i += 1
    return sections


def _section_pairs(body: list[str], name: str) -> dict[str, str]:
    pairs = {}
    for line in body:
        if "=" not in line:
            raise ParseError(f"section {name!r}: expected key = value")
        key, _, value = line.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def load_pipeline(text: str) -> PipelineModel:
    lines = text.splitlines()
    if not lines or lines[0].split() != ["PIPE1"]:
        head = lines[0].split() if lines else []
        if head and head[0].startswith("PIPE"):
            raise VersionMismatch(f"unsupported version {head[0]!r}")
        raise ParseError("line 1: expected PIPE1 header")
    sections = _split_sections(lines[1:])
    for required in ("geometry", "preprocess", "pca", "svm"):
        if required not in sections:
            raise ParseError(f"missing section {required!r}")
    try:
        gpairs = _section_pairs(sections["geometry"], "geometry")
        geometry = RoiGeometry(
            face_side=int(gpairs["face_side"]),
            eye=_parse_rect(gpairs["eye_window"], "eye_window"),
            mouth=_parse_rect(gpairs["mouth_window"], "mouth_window"))
        ppairs = _section_pairs(sections["preprocess"], "preprocess")
        prep = PreprocessConfig(
            low_light=ppairs["low_light"],
            low_light_threshold=float(ppairs["low_light_threshold"]),
            denoise_spatial_sigma=float(ppairs["denoise_spatial_sigma"]),
            denoise_range_sigma=float(ppairs["denoise_range_sigma"]),
            clahe_tiles=int(ppairs["clahe_tiles"]),
            clahe_clip_limit=float(ppairs["clahe_clip_limit"]))
    except (KeyError, ValueError, ConfigError) as exc:
        raise ParseError(f"bad geometry/preprocess section: {exc}") from None
    cascade = None
    scan = ScanConfig()
    if "cascade" in sections:
        cascade = load_cascade("\n".join(sections["cascade"]) + "\n")
        if "scan" in sections:
            try:
                spairs = _section_pairs(sections["scan"], "scan")
                scan = ScanConfig(
                    scale_factor=float(spairs["scale_factor"]),
                    step_frac=float(spairs["step_frac"]),
                    group_iou=float(spairs["group_iou"]),
                    min_neighbors=int(spairs["min_neighbors"]))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad scan section: {exc}") from None
    pca = load_pca("\n".join(sections["pca"]) + "\n")
    svm = classifier.load_svm("\n".join(sections["svm"]) + "\n")
    return PipelineModel(geometry=geometry, preprocess=prep, pca=pca,
                         svm=svm, cascade=cascade, scan=scan)
