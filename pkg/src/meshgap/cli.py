"""Command-line surface: cice, classify, resect, sweep.

Exit codes: 0 success, 1 runtime failure, 2 usage/validation/parse failure.
Every command writing outputs also writes a manifest.json recording
parameters, seeds and input digests.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .cice import (
    load_label_csv,
    median_filter,
    save_label_csv,
    save_scalar_csv,
)
from .correspondence import PredictorSpec, predict
from .cice import compute_cice
from .errors import InputError, MeshgapError, ValidationError
from .evaluation import BenchmarkPair, render_report, sweep, threshold_grid
from .manifest import write_manifest
from .mesh import build_adjacency, load_mesh, save_mesh
from .pipeline import PipelineConfig, classify_pair, write_classification
from .resect import (
    VolumeSampleCache,
    cut_mesh,
    plan_cuts,
    project_golden_standard,
    save_removed_csv,
    load_removed_csv,
)


def _parse_predictor(text: str, seed: int | None = None) -> PredictorSpec:
    if seed is not None and text.startswith("nnjitter") and "seed=" not in text:
        sep = "," if ":" in text and not text.endswith(":") else (":" if ":" not in text else "")
        text = f"{text}{sep}seed={seed}"
    return PredictorSpec.parse(text)


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, count = text.split(":")
        return threshold_grid(float(lo), float(hi), int(count))
    except ValueError as exc:
        raise ValidationError(f"bad threshold grid {text!r}; expected <lo>:<hi>:<count>") from exc


@click.group()
@click.version_option(package_name="meshgap")
def cli():
    """Detect missing regions on mesh pairs via correspondence round trips."""


@cli.command("cice")
@click.option("--source", required=True, type=click.Path())
@click.option("--target", required=True, type=click.Path())
@click.option("--predictor", default="nn", show_default=True)
@click.option("--seed", type=int, default=None, help="seed for nnjitter predictors lacking one")
@click.option("--filter-rounds", type=int, default=1, show_default=True)
@click.option("--out", required=True, type=click.Path())
def cmd_cice(source, target, predictor, seed, filter_rounds, out):
    """Compute raw and median-filtered round-trip error for one mesh pair."""
    spec = _parse_predictor(predictor, seed)
    src = load_mesh(source)
    tgt = load_mesh(target)
    forward = predict(spec, src, tgt)
    backward = predict(spec, tgt, src)
    raw = compute_cice(src, forward, backward)
    adjacency = build_adjacency(src)
    filt = median_filter(raw, adjacency, filter_rounds) if filter_rounds else raw
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_scalar_csv(raw, out_dir / "cice_raw.csv")
    save_scalar_csv(filt, out_dir / "cice_filtered.csv")
    write_manifest(
        out_dir,
        "cice",
        {"predictor": spec.describe(), "filter_rounds": filter_rounds},
        inputs=[source, target],
        seeds={"predictor_seed": spec.seed},
    )
    click.echo(f"wrote {out_dir / 'cice_raw.csv'} and cice_filtered.csv")


@cli.command("classify")
@click.option("--source", required=True, type=click.Path())
@click.option("--target", required=True, type=click.Path())
@click.option("--threshold-mm", required=True, type=float)
@click.option("--predictors", multiple=True, default=("nn",), show_default=True)
@click.option("--vote-min", type=int, default=1, show_default=True)
@click.option("--cice-filter-rounds", type=int, default=1, show_default=True)
@click.option("--label-filter-rounds", type=int, default=1, show_default=True)
@click.option("--dilate", is_flag=True, help="use any-neighbour dilation for the label pass")
@click.option("--out-dir", required=True, type=click.Path())
def cmd_classify(
    source, target, threshold_mm, predictors, vote_min,
    cice_filter_rounds, label_filter_rounds, dilate, out_dir,
):
    """Full missing-region classification with optional ensemble voting."""
    specs = tuple(_parse_predictor(p) for p in predictors)
    config = PipelineConfig(
        threshold_mm=threshold_mm,
        predictor_specs=specs,
        vote_min=vote_min,
        cice_filter_rounds=cice_filter_rounds,
        label_filter_rounds=label_filter_rounds,
        use_dilation=dilate,
    )
    src = load_mesh(source)
    tgt = load_mesh(target)
    result = classify_pair(src, tgt, config)
    write_classification(result, out_dir)
    write_manifest(
        out_dir,
        "classify",
        {
            "threshold_mm": threshold_mm,
            "predictors": [s.describe() for s in specs],
            "vote_min": vote_min,
            "cice_filter_rounds": cice_filter_rounds,
            "label_filter_rounds": label_filter_rounds,
            "dilate": dilate,
        },
        inputs=[source, target],
        seeds={"predictor_seeds": [s.seed for s in specs]},
    )
    click.echo(
        f"{result.final.missing_count()} of {len(result.final)} vertices classified missing"
    )


@cli.command("resect")
@click.option("--mesh", "mesh_path", required=True, type=click.Path())
@click.option("--count", type=int, default=35, show_default=True)
@click.option("--box-width-mm", type=float, default=30.0, show_default=True)
@click.option("--fraction-lo", type=float, default=0.11, show_default=True)
@click.option("--fraction-hi", type=float, default=0.28, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--volume-samples", type=int, default=50_000, show_default=True)
@click.option("--source-mesh", type=click.Path(), default=None,
              help="companion complete mesh recorded in pairs.json (defaults to --mesh)")
@click.option("--out-dir", required=True, type=click.Path())
def cmd_resect(
    mesh_path, count, box_width_mm, fraction_lo, fraction_hi, seed,
    volume_samples, source_mesh, out_dir,
):
    """Generate simulated resections: cut meshes, removed indices, manifest."""
    mesh = load_mesh(mesh_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = VolumeSampleCache.build(mesh, volume_samples, seed)
    boxes = plan_cuts(
        mesh, count, box_width_mm, seed, (fraction_lo, fraction_hi), sample_cache=cache
    )
    pairs = []
    for k, box in enumerate(boxes):
        res = cut_mesh(mesh, box, sample_cache=cache)
        name = f"pair_{k:02d}"
        save_mesh(res.cut_mesh, out / f"{name}_target.off")
        save_removed_csv(res.removed_vertex_indices, out / f"{name}_removed.csv")
        pairs.append(
            {
                "name": name,
                "target_mesh": f"{name}_target.off",
                "removed_csv": f"{name}_removed.csv",
                "removed_volume_fraction": res.removed_volume_fraction,
                "removed_vertex_fraction": res.removed_vertex_fraction,
                "box": box.to_json_dict(),
            }
        )
    (out / "cuts.json").write_text(
        json.dumps([b.to_json_dict() for b in boxes], indent=2) + "\n"
    )
    pairs_doc = {
        "base_mesh": str(Path(mesh_path).resolve()),
        "source_mesh": str(Path(source_mesh).resolve()) if source_mesh else str(Path(mesh_path).resolve()),
        "box_width_mm": box_width_mm,
        "fraction_range": [fraction_lo, fraction_hi],
        "seed": seed,
        "volume_samples": volume_samples,
        "pairs": pairs,
    }
    (out / "pairs.json").write_text(json.dumps(pairs_doc, indent=2) + "\n")
    write_manifest(
        out,
        "resect",
        {
            "count": count,
            "box_width_mm": box_width_mm,
            "fraction_range": [fraction_lo, fraction_hi],
            "volume_samples": volume_samples,
        },
        inputs=[mesh_path],
        seeds={"seed": seed},
    )
    click.echo(f"wrote {count} pairs to {out}")


@cli.command("sweep")
@click.option("--pairs-manifest", required=True, type=click.Path())
@click.option("--thresholds", default="1:10:19", show_default=True)
@click.option("--predictors", multiple=True, default=("nn",), show_default=True)
@click.option("--vote-min", type=int, default=1, show_default=True)
@click.option("--select", type=click.Choice(["mean", "median"]), default="mean", show_default=True)
@click.option("--cice-filter-rounds", type=int, default=1, show_default=True)
@click.option("--label-filter-rounds", type=int, default=1, show_default=True)
@click.option("--golden-predictors", multiple=True,
              help="forward-map predictors for golden projection when the pairs "
                   "manifest has no golden_csv entries (default: 5 seeded nnjitter)")
@click.option("--golden-vote-min", type=int, default=3, show_default=True)
@click.option("--source-mesh", type=click.Path(), default=None,
              help="override the source mesh recorded in the pairs manifest")
@click.option("--jobs", type=int, default=None, envvar="MESHGAP_JOBS",
              help="max concurrent pair evaluations [default: 1 or $MESHGAP_JOBS]")
@click.option("--out-dir", required=True, type=click.Path())
def cmd_sweep(
    pairs_manifest, thresholds, predictors, vote_min, select,
    cice_filter_rounds, label_filter_rounds, golden_predictors, golden_vote_min,
    source_mesh, jobs, out_dir,
):
    """Sweep thresholds over a benchmark of pairs and report the optimum."""
    grid = _parse_grid(thresholds)
    manifest_path = Path(pairs_manifest)
    if not manifest_path.is_file():
        raise InputError(f"pairs manifest not found: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{manifest_path}: invalid JSON: {exc}") from exc
    entries = doc.get("pairs", [])
    if not entries:
        raise InputError(f"{manifest_path}: no pairs listed")
    base_dir = manifest_path.parent
    src_path = Path(source_mesh) if source_mesh else Path(doc["source_mesh"])
    source = load_mesh(src_path)

    if not golden_predictors:
        golden_specs = tuple(
            PredictorSpec("nnjitter", seed=1000 + k, jitter_sigma=1.0) for k in range(5)
        )
    else:
        golden_specs = tuple(_parse_predictor(p) for p in golden_predictors)
    complete_target = None
    pairs = []
    for e in entries:
        target = load_mesh(base_dir / e["target_mesh"])
        if "golden_csv" in e:
            golden = load_label_csv(base_dir / e["golden_csv"])
        else:
            if complete_target is None:
                complete_target = load_mesh(Path(doc["base_mesh"]))
            removed = load_removed_csv(base_dir / e["removed_csv"])
            fmaps = [predict(s, source, complete_target) for s in golden_specs]
            golden = project_golden_standard(
                source, complete_target, removed, fmaps, golden_vote_min
            )
        pairs.append(
            BenchmarkPair(source, target, golden, e["name"], e.get("group"))
        )

    specs = tuple(_parse_predictor(p) for p in predictors)
    config = PipelineConfig(
        threshold_mm=float(grid[0]),
        predictor_specs=specs,
        vote_min=vote_min,
        cice_filter_rounds=cice_filter_rounds,
        label_filter_rounds=label_filter_rounds,
    )
    report = sweep(pairs, config, grid, select=select, jobs=jobs or 1)
    out = Path(out_dir)
    render_report(report, out, metadata={
        "pairs_manifest": str(manifest_path),
        "predictors": [s.describe() for s in specs],
        "golden_predictors": [s.describe() for s in golden_specs],
        "golden_vote_min": golden_vote_min,
        "vote_min": vote_min,
    })
    write_manifest(
        out,
        "sweep",
        {
            "thresholds": thresholds,
            "predictors": [s.describe() for s in specs],
            "vote_min": vote_min,
            "select": select,
            "cice_filter_rounds": cice_filter_rounds,
            "label_filter_rounds": label_filter_rounds,
            "golden_predictors": [s.describe() for s in golden_specs],
            "golden_vote_min": golden_vote_min,
            "jobs": jobs or 1,
        },
        inputs=[manifest_path],
        seeds={
            "predictor_seeds": [s.seed for s in specs],
            "golden_seeds": [s.seed for s in golden_specs],
        },
    )
    click.echo(
        f"best threshold {report.best_threshold:g} mm "
        f"({report.select} BAS {report.best_score:.4f}); report in {out}"
    )


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 2
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except MeshgapError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
