"""Face detection: Haar-like features over integral images, decision-stump
weak learners, AdaBoost-trained attentional cascade stages, multi-scale
sliding-window scanning, and the CASCADE1 text format.

Feature values are variance-normalized by the window's pixel standard
deviation (floored at 1), the standard guard against lighting changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    ImageTooSmall,
    NoFeatures,
    OutOfBounds,
    ParseError,
    VersionMismatch,
)
from .imaging import Image, IntegralImage, Rect, integral_image, iround

KINDS = ("2H", "2V", "3H", "3V", "4")


@dataclass(frozen=True)
class HaarFeature:
    """One rectangular feature inside the base detection window.

    kind picks the sub-rectangle split: 2H/2V halve the rect, 3H/3V cut it
    in thirds (center counted twice so a constant image cancels to zero),
    and 4 is the checkerboard of quadrants.
    """

    kind: str
    rect: Rect

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        r = self.rect
        if self.kind == "2H" and r.w % 2:
            raise ValueError("2H needs width divisible by 2")
        if self.kind == "2V" and r.h % 2:
            raise ValueError("2V needs height divisible by 2")
        if self.kind == "3H" and r.w % 3:
            raise ValueError("3H needs width divisible by 3")
        if self.kind == "3V" and r.h % 3:
            raise ValueError("3V needs height divisible by 3")
        if self.kind == "4" and (r.w % 2 or r.h % 2):
            raise ValueError("4 needs width and height divisible by 2")

    def sub_rects(self) -> tuple[tuple[int, int, int, int, int], ...]:
        """(x1, y1, x2, y2, weight) corner tuples; weighted areas sum to 0."""
        r = self.rect
        x1, y1, x2, y2 = r.x, r.y, r.x2, r.y2
        if self.kind == "2H":
            xm = x1 + r.w // 2
            return ((x1, y1, xm, y2, 1), (xm, y1, x2, y2, -1))
        if self.kind == "2V":
            ym = y1 + r.h // 2
            return ((x1, y1, x2, ym, 1), (x1, ym, x2, y2, -1))
        if self.kind == "3H":
            xa = x1 + r.w // 3
            xb = x1 + 2 * r.w // 3
            return ((x1, y1, xa, y2, -1), (xa, y1, xb, y2, 2),
                    (xb, y1, x2, y2, -1))
        if self.kind == "3V":
            ya = y1 + r.h // 3
            yb = y1 + 2 * r.h // 3
            return ((x1, y1, x2, ya, -1), (x1, ya, x2, yb, 2),
                    (x1, yb, x2, y2, -1))
        xm = x1 + r.w // 2
        ym = y1 + r.h // 2
        return ((x1, y1, xm, ym, 1), (xm, y1, x2, ym, -1),
                (x1, ym, xm, y2, -1), (xm, ym, x2, y2, 1))


@dataclass(frozen=True)
class WeakClassifier:
    feature: HaarFeature
    threshold: float
    polarity: int

    def __post_init__(self):
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 or -1")


@dataclass(frozen=True)
class Stage:
    weak: tuple[tuple[WeakClassifier, float], ...]  # (classifier, alpha)
    threshold: float

    def __post_init__(self):
        if not self.weak:
            raise ValueError("stage needs at least one weak classifier")
        if any(alpha < 0 for _, alpha in self.weak):
            raise ValueError("weak classifier weights must be >= 0")


@dataclass(frozen=True)
class Cascade:
    base_w: int
    base_h: int
    stages: tuple[Stage, ...]

    def __post_init__(self):
        if self.base_w <= 0 or self.base_h <= 0:
            raise ValueError("base window must be positive")
        if not self.stages:
            raise ValueError("cascade needs at least one stage")


@dataclass(frozen=True)
class FaceBox:
    rect: Rect
    score: int  # count of grouped raw detections


@dataclass(frozen=True)
class ScanConfig:
    scale_factor: float = 1.25
    step_frac: float = 0.08
    group_iou: float = 0.3
    min_neighbors: int = 3

    def __post_init__(self):
        if self.scale_factor <= 1.0:
            raise ValueError("scale_factor must exceed 1")
        if not 0 < self.step_frac <= 1:
            raise ValueError("step_frac must be in (0, 1]")
        if not 0 < self.group_iou <= 1:
            raise ValueError("group_iou must be in (0, 1]")
        if self.min_neighbors < 1:
            raise ValueError("min_neighbors must be >= 1")


@dataclass
class EvalStats:
    stages_evaluated: int = 0


# ---------------------------------------------------------------------------
# Feature evaluation

def _scale_sub_rects(feature: HaarFeature, scale: float):
    """Corner-scaled sub-rects with exact area renormalization.

    Corners scale independently (keeping adjacent sub-rects tiling). Each
    rectangle's pixel sum is divided by its actual scaled area, then scaled
    by weight * ideal area: on a constant image the per-rect mean is exact,
    so the weighted ideal areas cancel to exactly zero at every scale.
    """
    out = []
    for x1, y1, x2, y2, wgt in feature.sub_rects():
        sx1, sy1 = iround(x1 * scale), iround(y1 * scale)
        sx2, sy2 = iround(x2 * scale), iround(y2 * scale)
        actual = (sx2 - sx1) * (sy2 - sy1)
        if actual <= 0:
            raise ValueError(f"degenerate sub-rect at scale {scale}")
        ideal = (x2 - x1) * (y2 - y1) * scale * scale
        out.append((sx1, sy1, sx2, sy2, float(actual), wgt * ideal))
    return tuple(out)


def _gather(sums: np.ndarray, xs, ys, x1, y1, x2, y2):
    return (sums[ys + y2, xs + x2] - sums[ys + y1, xs + x2]
            - sums[ys + y2, xs + x1] + sums[ys + y1, xs + x1])


def _window_divisor(ii: IntegralImage, xs, ys, win_w: int, win_h: int):
    """max(pixel standard deviation, 1) per window origin."""
    n = win_w * win_h
    s1 = _gather(ii.sums, xs, ys, 0, 0, win_w, win_h).astype(np.float64)
    s2 = _gather(ii.squares, xs, ys, 0, 0, win_w, win_h).astype(np.float64)
    mean = s1 / n
    var = s2 / n - mean * mean
    return np.maximum(np.sqrt(np.maximum(var, 0.0)), 1.0)


def _raw_feature_values(sums: np.ndarray, scaled_subs, xs, ys):
    total = None
    for sx1, sy1, sx2, sy2, actual, coeff in scaled_subs:
        term = (_gather(sums, xs, ys, sx1, sy1, sx2, sy2) / actual) * coeff
        total = term if total is None else total + term
    return total


def eval_feature(ii: IntegralImage, feature: HaarFeature,
                 window_origin: tuple[int, int], scale: float,
                 base_w: int, base_h: int) -> float:
    """Variance-normalized feature value for one window placement.

    The raw rectangle-sum difference is divided by the window standard
    deviation and by scale^2, bringing values from any scale into base
    window units so stump thresholds transfer across scales.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    ox, oy = window_origin
    win_w, win_h = iround(base_w * scale), iround(base_h * scale)
    if ox < 0 or oy < 0 or ox + win_w > ii.width or oy + win_h > ii.height:
        raise OutOfBounds(
            f"window {win_w}x{win_h} at ({ox}, {oy}) outside "
            f"{ii.width}x{ii.height} image")
    subs = _scale_sub_rects(feature, scale)
    for sx1, sy1, sx2, sy2, _, _ in subs:
        if ox + sx2 > ii.width or oy + sy2 > ii.height:
            raise OutOfBounds("scaled feature rect outside image")
    xs = np.array([ox])
    ys = np.array([oy])
    raw = _raw_feature_values(ii.sums, subs, xs, ys)
    div = (scale * scale) * _window_divisor(ii, xs, ys, win_w, win_h)
    return float((raw / div)[0])


# ---------------------------------------------------------------------------
# Weak classifier training

@dataclass(frozen=True)
class StumpFit:
    threshold: float
    polarity: int
    error: float


def stump_predict(values: np.ndarray, threshold: float,
                  polarity: int) -> np.ndarray:
    """+1 where polarity * (value - threshold) >= 0, else -1."""
    return np.where(polarity * (values - threshold) >= 0, 1, -1)


def train_weak(values: np.ndarray, labels: np.ndarray,
               weights: np.ndarray) -> StumpFit:
    """Best decision stump by weighted error, in one sorted scan.

    Candidate thresholds are midpoints between consecutive distinct values
    plus -inf/+inf sentinels. Ties prefer the smallest threshold, then
    polarity +1.
    """
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    n = len(values)
    if n == 0:
        raise EmptyInput("no samples")
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError("weights must be non-negative with positive sum")
    if not np.all(np.isin(labels, (1, -1))):
        raise ValueError("labels must be +1 or -1")

    order = np.argsort(values, kind="stable")
    v = values[order]
    wpos = np.where(labels[order] == 1, weights[order], 0.0)
    wneg = np.where(labels[order] == -1, weights[order], 0.0)
    cpos = np.concatenate([[0.0], np.cumsum(wpos)])
    cneg = np.concatenate([[0.0], np.cumsum(wneg)])
    total_pos = cpos[-1]
    total_neg = cneg[-1]

    # candidate split i means: samples [0, i) fall below the threshold
    splits = [0] + [i for i in range(1, n) if v[i] > v[i - 1]] + [n]
    thresholds = [-math.inf] + [float(v[i - 1] + v[i]) / 2.0
                                for i in splits[1:-1]] + [math.inf]
    best: StumpFit | None = None
    for split, thr in zip(splits, thresholds):
        # polarity +1 predicts +1 at/above the threshold
        err_p = cpos[split] + (total_neg - cneg[split])
        err_m = (total_pos + total_neg) - err_p
        if best is None or err_p < best.error:
            best = StumpFit(thr, 1, float(err_p))
        if err_m < best.error:
            best = StumpFit(thr, -1, float(err_m))
    return best


@dataclass(frozen=True)
class BoostRound:
    feature_index: int
    threshold: float
    polarity: int
    alpha: float
    error: float


@dataclass
class BoostResult:
    rounds: list[BoostRound]
    weights: np.ndarray  # final (unnormalized) sample weights


_EPS_CLAMP = 1e-10
_CHUNK = 4096


def _best_feature_errors(values: np.ndarray, labels: np.ndarray,
                         weights: np.ndarray) -> np.ndarray:
    """Per-feature minimal stump error; matches train_weak arithmetic."""
    n, nf = values.shape
    out = np.empty(nf)
    for lo in range(0, nf, _CHUNK):
        block = values[:, lo:lo + _CHUNK]
        order = np.argsort(block, axis=0, kind="stable")
        v = np.take_along_axis(block, order, axis=0)
        lab = labels[order]
        w = weights[order]
        wpos = np.where(lab == 1, w, 0.0)
        wneg = np.where(lab == -1, w, 0.0)
        cpos = np.vstack([np.zeros(block.shape[1]), np.cumsum(wpos, axis=0)])
        cneg = np.vstack([np.zeros(block.shape[1]), np.cumsum(wneg, axis=0)])
        total_pos = cpos[-1]
        total_neg = cneg[-1]
        err_p = cpos + (total_neg - cneg)
        # splits at equal consecutive values are not candidates
        invalid = np.vstack([np.zeros(block.shape[1], bool),
                             v[1:] <= v[:-1],
                             np.zeros(block.shape[1], bool)])
        err_p = np.where(invalid, np.inf, err_p)
        err_m = np.where(invalid, np.inf,
                         (total_pos + total_neg) - err_p)
        out[lo:lo + _CHUNK] = np.minimum(err_p.min(axis=0), err_m.min(axis=0))
    return out


def boost(values: np.ndarray, labels: np.ndarray,
          rounds: int) -> BoostResult:
    """Discrete AdaBoost over a feature-value matrix (n samples x F features).

    Weights start uniform and are renormalized each round; correctly
    classified samples are scaled by beta = eps / (1 - eps) with eps clamped
    away from 0 and 1.
    """
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    n, nf = values.shape
    if n == 0:
        raise EmptyInput("no samples")
    if nf == 0:
        raise NoFeatures("empty feature pool")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    w = np.full(n, 1.0 / n)
    picked: list[BoostRound] = []
    for _ in range(rounds):
        w = w / w.sum()
        per_feature = _best_feature_errors(values, labels, w)
        f = int(np.argmin(per_feature))
        fit = train_weak(values[:, f], labels, w)
        eps = min(max(fit.error, _EPS_CLAMP), 1.0 - _EPS_CLAMP)
        beta = eps / (1.0 - eps)
        alpha = math.log(1.0 / beta)
        h = stump_predict(values[:, f], fit.threshold, fit.polarity)
        w = np.where(h == labels, w * beta, w)
        picked.append(BoostRound(f, fit.threshold, fit.polarity, alpha,
                                 fit.error))
    return BoostResult(picked, w)


# ---------------------------------------------------------------------------
# Stage and cascade training

def feature_grid(base_w: int = 24, base_h: int = 24,
                 step: int = 2) -> list[HaarFeature]:
    """Coarse feature pool: all kinds, positions and sizes in `step` px."""
    pool: list[HaarFeature] = []
    for kind in KINDS:
        for y in range(0, base_h, step):
            for x in range(0, base_w, step):
                for h in range(step, base_h - y + 1, step):
                    for w in range(step, base_w - x + 1, step):
                        if kind == "2H" and w % 2:
                            continue
                        if kind == "2V" and h % 2:
                            continue
                        if kind == "3H" and w % 3:
                            continue
                        if kind == "3V" and h % 3:
                            continue
                        if kind == "4" and (w % 2 or h % 2):
                            continue
                        pool.append(HaarFeature(kind, Rect(x, y, w, h)))
    return pool


def _stack_windows(windows: Sequence[IntegralImage], base_w: int,
                   base_h: int) -> tuple[np.ndarray, np.ndarray]:
    for ii in windows:
        if ii.width != base_w or ii.height != base_h:
            raise ValueError(
                f"window is {ii.width}x{ii.height}, expected "
                f"{base_w}x{base_h}")
    sums = np.stack([ii.sums for ii in windows])
    squares = np.stack([ii.squares for ii in windows])
    return sums, squares


def feature_value_matrix(windows: Sequence[IntegralImage],
                         features: Sequence[HaarFeature], base_w: int,
                         base_h: int) -> np.ndarray:
    """Variance-normalized feature values, shape (n windows, n features)."""
    sums, squares = _stack_windows(windows, base_w, base_h)
    n = base_w * base_h
    s1 = sums[:, base_h, base_w].astype(np.float64)
    s2 = squares[:, base_h, base_w].astype(np.float64)
    mean = s1 / n
    div = np.maximum(np.sqrt(np.maximum(s2 / n - mean * mean, 0.0)), 1.0)
    out = np.empty((len(windows), len(features)))
    for fi, feat in enumerate(features):
        raw = None
        for x1, y1, x2, y2, actual, coeff in _scale_sub_rects(feat, 1.0):
            term = ((sums[:, y2, x2] - sums[:, y1, x2]
                     - sums[:, y2, x1] + sums[:, y1, x1]) / actual) * coeff
            raw = term if raw is None else raw + term
        out[:, fi] = raw / div
    return out


def stage_scores(stage: Stage, values_by_weak: np.ndarray) -> np.ndarray:
    """Sum of alphas over weak classifiers voting +1.

    values_by_weak holds one column per weak classifier, aligned with
    stage.weak.
    """
    total = np.zeros(values_by_weak.shape[0])
    for col, (weak, alpha) in enumerate(stage.weak):
        votes = stump_predict(values_by_weak[:, col], weak.threshold,
                              weak.polarity)
        total += np.where(votes == 1, alpha, 0.0)
    return total


def train_stage(positives: Sequence[IntegralImage],
                negatives: Sequence[IntegralImage], rounds: int,
                target_detection_rate: float = 0.995,
                features: Sequence[HaarFeature] | None = None,
                base_w: int = 24, base_h: int = 24) -> Stage:
    """Boost `rounds` decision stumps, then lower the stage threshold from
    half the total vote until the stage passes the target share of
    positives."""
    if not positives or not negatives:
        raise EmptyInput("need both positive and negative windows")
    if not 0 < target_detection_rate <= 1:
        raise ValueError("target_detection_rate must be in (0, 1]")
    if features is None:
        features = feature_grid(base_w, base_h)
    if not features:
        raise NoFeatures("empty feature pool")
    windows = list(positives) + list(negatives)
    labels = np.array([1] * len(positives) + [-1] * len(negatives))
    values = feature_value_matrix(windows, features, base_w, base_h)
    result = boost(values, labels, rounds)
    weak = tuple(
        (WeakClassifier(features[r.feature_index], r.threshold, r.polarity),
         r.alpha)
        for r in result.rounds)
    total_alpha = sum(alpha for _, alpha in weak)
    pos_values = values[:len(positives), [r.feature_index
                                          for r in result.rounds]]
    stage_for_scores = Stage(weak, 0.0)
    scores = np.sort(stage_scores(stage_for_scores, pos_values))
    need = math.ceil(target_detection_rate * len(positives))
    threshold = min(0.5 * total_alpha, float(scores[len(scores) - need]))
    return Stage(weak, threshold)


def _cascade_pass_at_base(stages: Iterable[Stage],
                          windows: Sequence[IntegralImage], base_w: int,
                          base_h: int) -> np.ndarray:
    """Boolean accept mask for base-size windows under the given stages."""
    mask = np.ones(len(windows), dtype=bool)
    for stage in stages:
        feats = [weak.feature for weak, _ in stage.weak]
        values = feature_value_matrix(windows, feats, base_w, base_h)
        mask &= stage_scores(stage, values) >= stage.threshold
    return mask


def train_cascade(positives: Sequence[IntegralImage],
                  negatives: Sequence[IntegralImage],
                  stage_rounds: Sequence[int],
                  target_detection_rate: float = 0.995,
                  features: Sequence[HaarFeature] | None = None,
                  base_w: int = 24, base_h: int = 24,
                  min_negatives: int = 50) -> Cascade:
    """Train stages in sequence on the negatives each cascade prefix still
    accepts (its false positives). When too few survive, the pool is topped
    up with the rejected negatives scoring closest to the stage threshold,
    so later stages keep refining the boundary."""
    if features is None:
        features = feature_grid(base_w, base_h)
    remaining = list(negatives)
    stages: list[Stage] = []
    for rounds in stage_rounds:
        stage = train_stage(positives, remaining, rounds,
                            target_detection_rate, features, base_w, base_h)
        stages.append(stage)
        feats = [weak.feature for weak, _ in stage.weak]
        values = feature_value_matrix(remaining, feats, base_w, base_h)
        scores = stage_scores(stage, values)
        order = np.argsort(-scores, kind="stable")
        accepted = [i for i in order if scores[i] >= stage.threshold]
        if len(accepted) < min_negatives:
            accepted = list(order[:min(min_negatives, len(remaining))])
        remaining = [remaining[i] for i in sorted(accepted)]
    return Cascade(base_w, base_h, tuple(stages))


# ---------------------------------------------------------------------------
# Scanning

def _prepared_stages(cascade: Cascade, scale: float):
    prepared = []
    for stage in cascade.stages:
        weaks = [(_scale_sub_rects(weak.feature, scale), weak.threshold,
                  weak.polarity, alpha) for weak, alpha in stage.weak]
        prepared.append((weaks, stage.threshold))
    return prepared


def _stage_score_at(ii: IntegralImage, prepared_weaks, xs, ys, div):
    total = np.zeros(len(xs))
    for subs, threshold, polarity, alpha in prepared_weaks:
        val = _raw_feature_values(ii.sums, subs, xs, ys) / div
        votes = polarity * (val - threshold) >= 0
        total += np.where(votes, alpha, 0.0)
    return total


def classify_window(ii: IntegralImage, cascade: Cascade,
                    origin: tuple[int, int], scale: float,
                    stats: EvalStats | None = None) -> bool:
    """Run the attentional cascade on one window; stops at the first
    failing stage."""
    ox, oy = origin
    win_w = iround(cascade.base_w * scale)
    win_h = iround(cascade.base_h * scale)
    if ox < 0 or oy < 0 or ox + win_w > ii.width or oy + win_h > ii.height:
        raise OutOfBounds(f"window at ({ox}, {oy}) scale {scale} outside "
                          f"{ii.width}x{ii.height} image")
    xs = np.array([ox])
    ys = np.array([oy])
    div = (scale * scale) * _window_divisor(ii, xs, ys, win_w, win_h)
    for weaks, threshold in _prepared_stages(cascade, scale):
        if stats is not None:
            stats.stages_evaluated += 1
        if _stage_score_at(ii, weaks, xs, ys, div)[0] < threshold:
            return False
    return True


class _RectGroup:
    """Raw-hit cluster anchored at its running mean box."""

    def __init__(self, rect: Rect):
        self.members = [rect]
        self._sx, self._sy = float(rect.x), float(rect.y)
        self._sw, self._sh = float(rect.w), float(rect.h)

    def add(self, rect: Rect) -> None:
        self.members.append(rect)
        self._sx += rect.x
        self._sy += rect.y
        self._sw += rect.w
        self._sh += rect.h

    def mean_rect(self) -> Rect:
        n = len(self.members)
        return Rect(iround(self._sx / n), iround(self._sy / n),
                    max(1, iround(self._sw / n)), max(1, iround(self._sh / n)))


def _group_rects(raw: list[Rect], iou_threshold: float) -> list[list[Rect]]:
    """Greedy clustering: each hit joins the first group whose mean box it
    overlaps at >= iou_threshold, otherwise starts a group. Anchoring on the
    mean keeps dense scan grids from chaining into one blob."""
    groups: list[_RectGroup] = []
    for rect in raw:
        for group in groups:
            if rect.iou(group.mean_rect()) >= iou_threshold:
                group.add(rect)
                break
        else:
            groups.append(_RectGroup(rect))
    return [g.members for g in groups]


def detect(img: Image, cascade: Cascade,
           scan: ScanConfig = ScanConfig()) -> list[FaceBox]:
    """Multi-scale scan: raw cascade hits are grouped by overlap and groups
    below min_neighbors discarded; each surviving group reports its mean
    box with the group size as score, sorted by (y, x)."""
    if img.channels != 1:
        raise ValueError("detect expects a grayscale image")
    if img.width < cascade.base_w or img.height < cascade.base_h:
        raise ImageTooSmall(
            f"{img.width}x{img.height} image is smaller than the "
            f"{cascade.base_w}x{cascade.base_h} base window")
    ii = integral_image(img)
    raw: list[Rect] = []
    scale = 1.0
    while True:
        win_w = iround(cascade.base_w * scale)
        win_h = iround(cascade.base_h * scale)
        if win_w > img.width or win_h > img.height:
            break
        step = max(1, iround(scan.step_frac * win_w))
        xs0 = np.arange(0, img.width - win_w + 1, step)
        ys0 = np.arange(0, img.height - win_h + 1, step)
        xs = np.repeat(xs0, len(ys0))
        ys = np.tile(ys0, len(xs0))
        div = (scale * scale) * _window_divisor(ii, xs, ys, win_w, win_h)
        alive = np.arange(len(xs))
        for weaks, threshold in _prepared_stages(cascade, scale):
            scores = _stage_score_at(ii, weaks, xs[alive], ys[alive],
                                     div[alive])
            alive = alive[scores >= threshold]
            if not len(alive):
                break
        raw.extend(Rect(int(xs[i]), int(ys[i]), win_w, win_h)
                   for i in alive)
        scale *= scan.scale_factor
    raw.sort(key=lambda r: (r.y, r.x, r.w, r.h))
    boxes: list[FaceBox] = []
    for group in _group_rects(raw, scan.group_iou):
        if len(group) < scan.min_neighbors:
            continue
        x = iround(sum(r.x for r in group) / len(group))
        y = iround(sum(r.y for r in group) / len(group))
        w = iround(sum(r.w for r in group) / len(group))
        h = iround(sum(r.h for r in group) / len(group))
        w = min(w, img.width - x)
        h = min(h, img.height - y)
        boxes.append(FaceBox(Rect(x, y, w, h), len(group)))
    boxes.sort(key=lambda b: (b.rect.y, b.rect.x))
    return boxes


# ---------------------------------------------------------------------------
# CASCADE1 text format

def save_cascade(cascade: Cascade) -> str:
    lines = [f"CASCADE1 {cascade.base_w} {cascade.base_h} "
             f"{len(cascade.stages)}"]
    for stage in cascade.stages:
        lines.append(f"STAGE {len(stage.weak)} {float(stage.threshold)!r}")
        for weak, alpha in stage.weak:
            r = weak.feature.rect
            lines.append(
                f"WEAK {weak.feature.kind} {r.x} {r.y} {r.w} {r.h} "
                f"{float(weak.threshold)!r} {weak.polarity} {float(alpha)!r}")
    return "\n".join(lines) + "\n"


def load_cascade(text: str) -> Cascade:
    lines = text.splitlines()
    if not lines:
        raise ParseError("line 1: empty cascade file")
    head = lines[0].split()
    if not head or head[0] != "CASCADE1":
        if head and head[0].startswith("CASCADE"):
            raise VersionMismatch(f"unsupported version {head[0]!r}")
        raise ParseError("line 1: expected CASCADE1 header")
    try:
        base_w, base_h, n_stages = (int(v) for v in head[1:4])
    except (IndexError, ValueError):
        raise ParseError("line 1: malformed CASCADE1 header") from None
    pos = 1
    stages: list[Stage] = []
    for _ in range(n_stages):
        if pos >= len(lines):
            raise ParseError(f"line {len(lines) + 1}: missing STAGE block")
        parts = lines[pos].split()
        if len(parts) != 3 or parts[0] != "STAGE":
            raise ParseError(f"line {pos + 1}: expected STAGE line")
        try:
            n_weak = int(parts[1])
            threshold = float(parts[2])
        except ValueError:
            raise ParseError(f"line {pos + 1}: malformed STAGE line") from None
        pos += 1
        weak: list[tuple[WeakClassifier, float]] = []
        for _ in range(n_weak):
            if pos >= len(lines):
                raise ParseError(f"line {len(lines) + 1}: missing WEAK line")
            w = lines[pos].split()
            if len(w) != 9 or w[0] != "WEAK" or w[1] not in KINDS:
                raise ParseError(f"line {pos + 1}: expected WEAK line")
            try:
                rect = Rect(int(w[2]), int(w[3]), int(w[4]), int(w[5]))
                weak.append((WeakClassifier(HaarFeature(w[1], rect),
                                            float(w[6]), int(w[7])),
                             float(w[8])))
            except ValueError as exc:
                raise ParseError(f"line {pos + 1}: {exc}") from None
            pos += 1
        try:
            stages.append(Stage(tuple(weak), threshold))
        except ValueError as exc:
            raise ParseError(f"line {pos}: {exc}") from None
    try:
        return Cascade(base_w, base_h, tuple(stages))
    except ValueError as exc:
        raise ParseError(f"line 1: {exc}") from None
