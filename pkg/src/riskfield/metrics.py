"""Actor-aligned risk-object-identification metrics.

All metrics operate on per-frame actor score maps restricted to visible
actors. An actor is predicted risky at threshold tau when its score is
strictly greater than tau. Threshold sweeps are micro-averaged: TP/FP/FN
are pooled over all actor-frames in the window before computing F1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# Clamp applied inside the log of the consistency score so that F1 = 0
# frames contribute a large, finite penalty.
PIC_EPSILON = 1e-6


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class SweepResult:
    """Best F1 over thresholds plus the smallest threshold achieving it."""

    score: float
    tau: float
    n_gt: int


@dataclass(frozen=True)
class FrameScores:
    """Scores and alignment data for one frame.

    scores maps visible actor ids to risk scores; gt_risky holds the
    ground-truth risky ids for the frame (possibly including actors that
    are not visible; those are excluded from every count). positions and
    ego_xy support the closest-approach event-frame fallback.
    """

    frame_index: int
    timestamp: float
    scores: dict
    visible: frozenset
    gt_risky: frozenset
    ego_xy: tuple = (0.0, 0.0)
    positions: dict = field(default_factory=dict)

    def __post_init__(self):
        extra = set(self.scores) - set(self.visible)
        if extra:
            raise MetricsError(f"scored ids not in visible set: {sorted(extra)}")


@dataclass
class ActorScoreSeries:
    frames: list
    meta: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        ts = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise MetricsError("series frames must be in chronological order")

    def event_frame(self) -> int:
        """Frame index of the risk event.

        Uses the annotated collision frame when present, otherwise the frame
        where the ego's distance to the nearest ground-truth risky actor is
        minimal; falls back to the final frame when no GT actor is ever
        visible with a known position.
        """
        if "collision_frame" in self.meta:
            idx = int(self.meta["collision_frame"])
            return min(max(idx, 0), len(self.frames) - 1)
        best_idx, best_d = None, math.inf
        for i, f in enumerate(self.frames):
            for rid in f.gt_risky:
                if rid not in f.positions:
                    continue
                px, py = f.positions[rid]
                d = math.hypot(px - f.ego_xy[0], py - f.ego_xy[1])
                if d < best_d:
                    best_d, best_idx = d, i
        return best_idx if best_idx is not None else len(self.frames) - 1

    def window_for(self, seconds: float) -> tuple[int, int]:
        """Inclusive frame-index window covering the last `seconds` before
        the event frame (the event frame included)."""
        ev = self.event_frame()
        t_end = self.frames[ev].timestamp
        first = ev
        for i in range(ev, -1, -1):
            # small slack absorbs float accumulation in frame timestamps
            if self.frames[i].timestamp >= t_end - seconds - 1e-9:
                first = i
            else:
                break
        return first, ev


def _frame_counts(frame: FrameScores, tau: float) -> Confusion:
    predicted = {aid for aid, sc in frame.scores.items() if sc > tau}
    gt_vis = frame.gt_risky & frame.visible
    tp = len(predicted & gt_vis)
    fp = len(predicted - gt_vis)
    fn = len(gt_vis - predicted)
    tn = len(frame.visible) - tp - fp - fn
    return Confusion(tp, fp, fn, tn)


def confusion_at(series: ActorScoreSeries, tau: float, window=None) -> list[Confusion]:
    """Per-frame confusion counts over visible actors at a fixed threshold."""
    frames = _window_frames(series, window)
    return [_frame_counts(f, tau) for f in frames]


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    """F1 = 2TP / (2TP + FP + FN); defined as 0 when precision + recall = 0."""
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def _window_frames(series: ActorScoreSeries, window) -> list:
    if window is None:
        return list(series.frames)
    first, last = window
    if first > last:
        raise MetricsError(f"empty frame window ({first}, {last})")
    return list(series.frames[first : last + 1])


def _pooled_sweep(frames: list) -> SweepResult:
    """Exhaustive threshold sweep over all unique scores plus one value
    below the minimum, on micro-averaged counts."""
    scores, flags = [], []
    for f in frames:
        gt_vis = f.gt_risky & f.visible
        for aid, sc in f.scores.items():
            scores.append(sc)
            flags.append(aid in gt_vis)
    n_gt = int(sum(flags))
    if not scores or n_gt == 0:
        return SweepResult(0.0, 0.0, n_gt)

    s = np.asarray(scores, dtype=float)
    g = np.asarray(flags, dtype=bool)
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    g_sorted = g[order]
    # suffix_gt[i] = number of GT positives with score >= s_sorted[i]
    suffix_gt = np.concatenate([np.cumsum(g_sorted[::-1])[::-1], [0]])

    taus = np.concatenate([[s_sorted[0] - 1.0], np.unique(s_sorted)])
    idx = np.searchsorted(s_sorted, taus, side="right")
    n_pred = len(s_sorted) - idx
    tp = suffix_gt[idx]
    fp = n_pred - tp
    fn = n_gt - tp
    denom = 2 * tp + fp + fn
    f1 = np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1), 0.0)
    best = int(np.argmax(f1))  # first (= smallest tau) among ties
    return SweepResult(float(f1[best]), float(taus[best]), n_gt)


def ot_f1(series: ActorScoreSeries, window=None) -> SweepResult:
    """Overall thresholded F1: max over the threshold sweep, with the
    smallest achieving threshold. Returns score 0 (n_gt == 0 flags the
    warning condition) when the window has no GT-risky actor-frames."""
    return _pooled_sweep(_window_frames(series, window))


def ot_f1_t(series: ActorScoreSeries, seconds: float) -> SweepResult:
    """ot_f1 restricted to the last `seconds` before the event frame."""
    return ot_f1(series, window=series.window_for(seconds))


def frame_f1_trace(series: ActorScoreSeries, tau: float) -> np.ndarray:
    """Per-frame F1 at a fixed threshold.

    Frames with no GT-risky visible actor and no prediction carry no
    evidence either way and count as 1.0 (vacuously correct).
    """
    out = []
    for f in series.frames:
        c = _frame_counts(f, tau)
        out.append(1.0 if (c.tp + c.fp + c.fn) == 0 else f1_from_counts(c.tp, c.fp, c.fn))
    return np.asarray(out)


def pic(f1_trace, epsilon: float = PIC_EPSILON) -> float:
    """Consistency score: exponentially weighted negative-log F1 over the
    trace, weighting late frames more. Lower is better; 0 for a perfect
    trace."""
    trace = np.asarray(f1_trace, dtype=float)
    t_frames = len(trace)
    if t_frames == 0:
        return 0.0
    t = np.arange(1, t_frames + 1)
    weights = np.exp(-(t_frames - t) / t_frames)
    return float(-np.sum(weights * np.log(np.maximum(trace, epsilon))))


def default_class_weights(series_list) -> tuple[float, float]:
    """Inverse-frequency class weights over the pooled visible actor-frames:
    w_p = N_neg / N, w_n = N_pos / N."""
    pos = neg = 0
    for series in series_list:
        for f in series.frames:
            gt_vis = f.gt_risky & f.visible
            pos += len(gt_vis)
            neg += len(f.visible) - len(gt_vis)
    total = pos + neg
    if total == 0:
        return 0.5, 0.5
    return neg / total, pos / total


def wmota(series_list, tau: float, w_p: float, w_n: float):
    """Weighted multi-object tracking accuracy at a fixed threshold.

    Identity switches count per-actor binary-label flips between
    consecutive frames in which the actor is visible, split by the actor's
    ground-truth class at the current frame. Returns None when no actor is
    ever visible (undefined denominator).
    """
    if isinstance(series_list, ActorScoreSeries):
        series_list = [series_list]
    penalty = 0.0
    denom = 0.0
    for series in series_list:
        prev_label: dict = {}
        for f in series.frames:
            gt_vis = f.gt_risky & f.visible
            c = _frame_counts(f, tau)
            idsw_p = idsw_n = 0
            for aid in f.visible:
                label = f.scores.get(aid, 0.0) > tau
                if aid in prev_label and prev_label[aid] != label:
                    if aid in gt_vis:
                        idsw_p += 1
                    else:
                        idsw_n += 1
                prev_label[aid] = label
            penalty += w_p * (c.fn + idsw_p) + w_n * (c.fp + idsw_n)
            denom += w_p * len(gt_vis) + w_n * (len(f.visible) - len(gt_vis))
    if denom == 0:
        return None
    return 1.0 - penalty / denom


@dataclass(frozen=True)
class MetricsConfig:
    weights: tuple | None = None  # (w_p, w_n); None -> inverse-frequency
    epsilon: float = PIC_EPSILON
    windows: tuple = (1.0, 2.0, 3.0)
    average: str = "micro"

    def __post_init__(self):
        if self.average not in ("micro", "macro"):
            raise MetricsError("average must be 'micro' or 'macro'")


@dataclass
class MetricsReport:
    ot_f1: float
    tau_star: float
    ot_f1_windows: dict
    pic: float
    pic_sum: float
    wmota: float | None
    w_p: float
    w_n: float
    n_sequences: int
    per_sequence: list
    warnings: list
    config_hash: str = ""
    epsilon: float = PIC_EPSILON
    ot_f1_macro: float | None = None

    def to_dict(self) -> dict:
        return {
            "ot_f1": self.ot_f1,
            "tau_star": self.tau_star,
            "ot_f1_windows": dict(self.ot_f1_windows),
            "pic": self.pic,
            "pic_sum": self.pic_sum,
            "wmota": self.wmota,
            "w_p": self.w_p,
            "w_n": self.w_n,
            "n_sequences": self.n_sequences,
            "per_sequence": list(self.per_sequence),
            "warnings": list(self.warnings),
            "config_hash": self.config_hash,
            "epsilon": self.epsilon,
            "ot_f1_macro": self.ot_f1_macro,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MetricsReport":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def evaluate(series_list, config: MetricsConfig | None = None, config_hash: str = "") -> MetricsReport:
    """Full metric suite over a set of scored sequences.

    The overall threshold sweep (and tau*) pools actor-frames across all
    sequences; windowed scores pool the per-sequence event windows; the
    consistency score is the mean (and sum) of per-sequence values at tau*;
    wMOTA is pooled at tau* with inverse-frequency class weights unless
    overridden.
    """
    if isinstance(series_list, ActorScoreSeries):
        series_list = [series_list]
    series_list = list(series_list)
    if not series_list:
        raise MetricsError("no scored sequences to evaluate")
    cfg = config or MetricsConfig()
    warnings: list[str] = []

    all_frames = [f for s in series_list for f in s.frames]
    overall = _pooled_sweep(all_frames)
    if overall.n_gt == 0:
        warnings.append("no GT-risky actor-frames in the evaluation pool; OT-F1 set to 0")
    tau_star = overall.tau

    window_scores = {}
    for seconds in cfg.windows:
        pooled = []
        for s in series_list:
            first, last = s.window_for(seconds)
            pooled.extend(s.frames[first : last + 1])
        window_scores[f"{seconds:g}s"] = _pooled_sweep(pooled).score

    if cfg.weights is not None:
        w_p, w_n = cfg.weights
    else:
        w_p, w_n = default_class_weights(series_list)

    per_sequence = []
    pics = []
    for s in series_list:
        trace = frame_f1_trace(s, tau_star)
        p = pic(trace, epsilon=cfg.epsilon)
        pics.append(p)
        own = _pooled_sweep(list(s.frames))
        per_sequence.append(
            {
                "name": s.name or s.meta.get("name", ""),
                "n_frames": len(s.frames),
                "event_frame": s.event_frame(),
                "ot_f1": own.score,
                "pic": p,
                "wmota": wmota([s], tau_star, w_p, w_n),
                "f1_trace": [float(v) for v in trace],
            }
        )

    pooled_wmota = wmota(series_list, tau_star, w_p, w_n)
    if pooled_wmota is None:
        warnings.append("wMOTA undefined: no visible actors in the evaluation pool")

    macro = None
    if cfg.average == "macro":
        macro = float(np.mean([row["ot_f1"] for row in per_sequence]))

    return MetricsReport(
        ot_f1=overall.score,
        tau_star=tau_star,
        ot_f1_windows=window_scores,
        pic=float(np.mean(pics)),
        pic_sum=float(np.sum(pics)),
        wmota=pooled_wmota,
        w_p=w_p,
        w_n=w_n,
        n_sequences=len(series_list),
        per_sequence=per_sequence,
        warnings=warnings,
        config_hash=config_hash,
        epsilon=cfg.epsilon,
        ot_f1_macro=macro,
    )
