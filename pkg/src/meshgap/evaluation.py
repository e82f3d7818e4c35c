"""Balanced-accuracy scoring, threshold sweeps, and report rendering."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .cice import LabelField
from .errors import ValidationError
from .mesh import TriangleMesh, build_adjacency
from .pipeline import PipelineConfig, labels_from_fields, prepare_model_fields


@dataclass(frozen=True)
class BasResult:
    """Balanced accuracy: mean of per-class recalls.

    score is None only for zero-length inputs. When the truth holds a single
    class, score is that class's recall alone and degenerate is True.
    """

    score: float | None
    degenerate: bool = False


def balanced_accuracy(truth: LabelField, predicted: LabelField) -> BasResult:
    if len(truth) != len(predicted):
        raise ValidationError(
            f"label fields differ in length: {len(truth)} vs {len(predicted)}"
        )
    if len(truth) == 0:
        return BasResult(None)
    t = truth.labels
    p = predicted.labels
    n_missing = int(t.sum())
    n_present = len(t) - n_missing
    if n_missing == 0:
        return BasResult(float((~p[~t]).sum() / n_present), degenerate=True)
    if n_present == 0:
        return BasResult(float(p[t].sum() / n_missing), degenerate=True)
    recall_missing = float(p[t].sum() / n_missing)
    recall_present = float((~p[~t]).sum() / n_present)
    return BasResult((recall_missing + recall_present) / 2.0)


def threshold_grid(lo: float = 1.0, hi: float = 10.0, count: int = 19) -> np.ndarray:
    """Uniform inclusive grid; defaults to the 19 thresholds on [1, 10] mm."""
    if count < 1 or lo <= 0 or hi <= lo:
        raise ValidationError(f"bad threshold grid {lo}:{hi}:{count}")
    return np.linspace(lo, hi, count)


@dataclass(frozen=True)
class BenchmarkPair:
    source: TriangleMesh
    target: TriangleMesh
    golden: LabelField
    name: str
    group: str | None = None


@dataclass(frozen=True)
class SweepReport:
    thresholds: np.ndarray  # (T,)
    pair_names: tuple
    pair_groups: tuple
    scores: np.ndarray  # (P, T), NaN where undefined
    degenerate: np.ndarray  # (P, T) bool
    per_threshold_mean: np.ndarray
    per_threshold_median: np.ndarray
    best_threshold: float
    best_score: float
    mode: str
    select: str

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "select": self.select,
            "thresholds_mm": [float(t) for t in self.thresholds],
            "pairs": list(self.pair_names),
            "pair_groups": list(self.pair_groups),
            "scores": [
                [None if np.isnan(s) else float(s) for s in row] for row in self.scores
            ],
            "degenerate": [[bool(d) for d in row] for row in self.degenerate],
            "per_threshold_mean": [float(x) for x in self.per_threshold_mean],
            "per_threshold_median": [float(x) for x in self.per_threshold_median],
            "best_threshold_mm": float(self.best_threshold),
            "best_score": float(self.best_score),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "SweepReport":
        scores = np.array(
            [[np.nan if s is None else s for s in row] for row in d["scores"]], dtype=float
        )
        return SweepReport(
            thresholds=np.array(d["thresholds_mm"], dtype=float),
            pair_names=tuple(d["pairs"]),
            pair_groups=tuple(d["pair_groups"]),
            scores=scores,
            degenerate=np.array(d["degenerate"], dtype=bool),
            per_threshold_mean=np.array(d["per_threshold_mean"], dtype=float),
            per_threshold_median=np.array(d["per_threshold_median"], dtype=float),
            best_threshold=d["best_threshold_mm"],
            best_score=d["best_score"],
            mode=d["mode"],
            select=d["select"],
        )


def sweep(
    pairs,
    config_base: PipelineConfig,
    thresholds,
    select: str = "mean",
    mode: str | None = None,
    jobs: int = 1,
) -> SweepReport:
    """Classify every pair at every threshold and pick the best threshold.

    Predictor outputs are computed once per pair and reused across thresholds
    (the round-trip error does not depend on t). Selection aggregates by mean
    BAS by default; `select="median"` switches the statistic. Ties go to the
    smallest threshold.
    """
    pairs = list(pairs)
    thresholds = np.asarray(thresholds, dtype=float)
    if not pairs:
        raise ValidationError("sweep needs at least one pair")
    if len(thresholds) == 0:
        raise ValidationError("sweep needs at least one threshold")
    if np.any(np.diff(thresholds) <= 0):
        raise ValidationError("thresholds must be strictly increasing")
    if select not in ("mean", "median"):
        raise ValidationError(f"select must be 'mean' or 'median', got {select!r}")
    if mode is None:
        mode = "single" if len(config_base.predictor_specs) == 1 else "ensemble"

    scores = np.full((len(pairs), len(thresholds)), np.nan)
    degenerate = np.zeros((len(pairs), len(thresholds)), dtype=bool)

    def run_pair(pair: BenchmarkPair):
        adjacency = build_adjacency(pair.source)
        prepared = prepare_model_fields(
            pair.source,
            pair.target,
            config_base.predictor_specs,
            adjacency,
            config_base.cice_filter_rounds,
        )
        row_scores = np.empty(len(thresholds))
        row_degen = np.empty(len(thresholds), dtype=bool)
        for j, t in enumerate(thresholds):
            result = labels_from_fields(
                prepared,
                adjacency,
                float(t),
                config_base.label_filter_rounds,
                config_base.vote_min,
                config_base.use_dilation,
            )
            bas = balanced_accuracy(pair.golden, result.final)
            row_scores[j] = np.nan if bas.score is None else bas.score
            row_degen[j] = bas.degenerate
        return row_scores, row_degen

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_pair, pairs))
    else:
        rows = [run_pair(p) for p in pairs]
    for i, (rs, rd) in enumerate(rows):
        scores[i] = rs
        degenerate[i] = rd

    mean = np.nanmean(scores, axis=0)
    median = np.nanmedian(scores, axis=0)
    agg = mean if select == "mean" else median
    best_idx = int(np.argmax(agg))  # argmax takes the first (smallest) on ties
    return SweepReport(
        thresholds=thresholds,
        pair_names=tuple(p.name for p in pairs),
        pair_groups=tuple(p.group or "" for p in pairs),
        scores=scores,
        degenerate=degenerate,
        per_threshold_mean=mean,
        per_threshold_median=median,
        best_threshold=float(thresholds[best_idx]),
        best_score=float(agg[best_idx]),
        mode=mode,
        select=select,
    )


def render_report(report: SweepReport, out_dir, metadata: dict | None = None) -> None:
    """Write sweep.json, sweep.csv, summary.txt and a sweep.png figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = report.to_json_dict()
    if metadata:
        payload["metadata"] = metadata
    (out / "sweep.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair", "pair_group", "threshold", "bas"])
        for i, name in enumerate(report.pair_names):
            for j, t in enumerate(report.thresholds):
                s = report.scores[i, j]
                w.writerow(
                    [name, report.pair_groups[i], repr(float(t)), "" if np.isnan(s) else repr(float(s))]
                )

    lines = [
        f"mode={report.mode}",
        f"select={report.select}",
        f"best_threshold_mm={repr(float(report.best_threshold))}",
        f"best_score={repr(float(report.best_score))}",
        "",
        "threshold_mm\tmean_bas\tmedian_bas",
    ]
    for j, t in enumerate(report.thresholds):
        lines.append(
            f"{float(t):g}\t{report.per_threshold_mean[j]:.9g}\t{report.per_threshold_median[j]:.9g}"
        )
    (out / "summary.txt").write_text("\n".join(lines) + "\n")

    _render_figure(report, out / "sweep.png")


def _render_figure(report: SweepReport, path) -> None:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    cols = [report.scores[:, j][~np.isnan(report.scores[:, j])] for j in range(len(report.thresholds))]
    ax.boxplot(cols, positions=report.thresholds, widths=0.3, manage_ticks=False)
    ax.plot(report.thresholds, report.per_threshold_mean, "o-", color="tab:blue", label="mean")
    ax.plot(
        report.thresholds, report.per_threshold_median, "s--", color="tab:orange", label="median"
    )
    ax.axvline(report.best_threshold, color="tab:red", lw=1, ls=":",
               label=f"best ({report.best_threshold:g} mm)")
    ax.set_xlabel("threshold (mm)")
    ax.set_ylabel("balanced accuracy")
    ax.set_title(f"threshold sweep ({report.mode})")
    ax.legend(loc="lower center", ncol=3, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
