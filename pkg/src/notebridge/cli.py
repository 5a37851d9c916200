"""Command-line entry point wiring the analysis modules into reproducible runs.

Every subcommand writes its reports plus a manifest (effective config, input
checksums, row counts, package version) into the output directory.  Reports
themselves contain no timestamps or machine paths, so identical inputs give
byte-identical reports; only the manifest carries environment detail.
"""

from __future__ import annotations

import contextlib
import dataclasses
import json
import os
import sys

import click

from . import __version__
from .data import (
    apply_paper_filters,
    dataset_manifest,
    load_dataset,
    load_topic_labels,
    write_dataset,
)
from .descriptives import bucket_table, robustness_subsets, text_profile
from .errors import NotebridgeError
from .exposure import build_complete_blocks, representativeness_report, rescore_equal_exposure
from .inference import (
    TABLE1_SPECS,
    ai_effect_table,
    fit_model,
    rating_frame,
    run_eq2_outcomes,
    subgroup_fits_with_notices,
)
from .pairwise import pairwise_bradley_terry
from .scorer import ScoringConfig, fit_bridging
from .simulate import GroupQuality, SimConfig, confound_experiment, simulate
from .stats import welch_t

SCHEMA_VERSION = 1


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"schema_version": SCHEMA_VERSION, **payload}, fh,
                  indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _write_tsv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(str(x) for x in row) + "\n")


@contextlib.contextmanager
def _output_lock(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    lock_path = os.path.join(out_dir, ".lock")
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise click.ClickException(
            f"output directory is locked by another run: {lock_path}"
        ) from None
    try:
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.remove(lock_path)


class _Run:
    """Collects produced files so the manifest can list them at the end."""

    def __init__(self, out_dir, config_echo):
        self.out_dir = out_dir
        self.config_echo = config_echo
        self.outputs: list[str] = []

    def path(self, name):
        self.outputs.append(name)
        return os.path.join(self.out_dir, name)

    def finish(self, extra=None):
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "version": __version__,
            "config": self.config_echo,
            "outputs": sorted(self.outputs),
        }
        if extra:
            manifest.update(extra)
        with open(os.path.join(self.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _scoring_config(ctx_params) -> ScoringConfig:
    cfg_file = ctx_params.get("config")
    base = {}
    if cfg_file:
        with open(cfg_file, encoding="utf-8") as fh:
            base = json.load(fh).get("scoring", {})
    fields = {f.name for f in dataclasses.fields(ScoringConfig)}
    base = {k: v for k, v in base.items() if k in fields}
    # CLI flags override config-file values over built-in defaults
    for key in ("factor_dim", "lambda_intercept", "lambda_factor", "crh_threshold",
                "crnh_threshold", "max_iterations", "convergence_tol", "seed"):
        val = ctx_params.get(key)
        if val is not None:
            base[key] = val
    return ScoringConfig(**base)


def _load_filtered(notes, ratings, raters):
    for path in (notes, ratings, raters):
        if not os.path.exists(path):
            raise click.ClickException(f"input file not found: {path}")
    raw = load_dataset(notes, ratings, raters)
    return raw, apply_paper_filters(raw)


_data_options = [
    click.option("--notes", required=True, help="notes TSV path"),
    click.option("--ratings", required=True, help="ratings TSV path"),
    click.option("--raters", required=True, help="rater profiles TSV path"),
]

_scoring_options = [
    click.option("--config", default=None, help="JSON config file"),
    click.option("--factor-dim", "factor_dim", type=int, default=None),
    click.option("--lambda-intercept", "lambda_intercept", type=float, default=None),
    click.option("--lambda-factor", "lambda_factor", type=float, default=None),
    click.option("--crh-threshold", "crh_threshold", type=float, default=None),
    click.option("--crnh-threshold", "crnh_threshold", type=float, default=None),
    click.option("--seed", type=int, default=None),
]


def _apply(options):
    def deco(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn
    return deco


@click.group()
def main():
    """Bridging-score and comparison analyses for community fact-checking notes."""


def _echo_params(params):
    return {k: v for k, v in sorted(params.items()) if v is not None}


@main.command()
@_apply(_data_options)
@click.option("--out-dir", required=True)
def ingest(notes, ratings, raters, out_dir):
    """Load, filter, and re-serialize a dataset with an audit manifest."""
    with _output_lock(out_dir):
        raw, filtered = _load_filtered(notes, ratings, raters)
        run = _Run(out_dir, {"notes": notes, "ratings": ratings, "raters": raters})
        paths = write_dataset(filtered, out_dir)
        for p in paths.values():
            run.outputs.append(os.path.basename(p))
        run.finish(extra=dataset_manifest(raw, filtered))


def _score_dataset(filtered, cfg, run):
    scores = fit_bridging(filtered, cfg)
    _write_tsv(run.path("scores.tsv"), ["noteId", "helpfulness_score", "status"],
               [(nid, repr(s), st) for nid, s, st in scores.to_rows()])
    _write_json(run.path("scores.json"), scores.to_dict())
    return scores


@main.command()
@_apply(_data_options)
@_apply(_scoring_options)
@click.option("--out-dir", required=True)
@click.pass_context
def score(ctx, notes, ratings, raters, out_dir, **_):
    """Fit the bridging MF and write note scores and statuses."""
    with _output_lock(out_dir):
        cfg = _scoring_config(ctx.params)
        raw, filtered = _load_filtered(notes, ratings, raters)
        run = _Run(out_dir, {"scoring": dataclasses.asdict(cfg)})
        _score_dataset(filtered, cfg, run)
        run.finish(extra=dataset_manifest(raw, filtered))


@main.command("equal-exposure")
@_apply(_data_options)
@_apply(_scoring_options)
@click.option("--out-dir", required=True)
@click.pass_context
def equal_exposure(ctx, notes, ratings, raters, out_dir, **_):
    """Build complete-rater blocks, re-score them, and check representativeness."""
    with _output_lock(out_dir):
        cfg = _scoring_config(ctx.params)
        raw, filtered = _load_filtered(notes, ratings, raters)
        run = _Run(out_dir, {"scoring": dataclasses.asdict(cfg)})
        blocks = build_complete_blocks(filtered)
        _write_tsv(run.path("blocks.tsv"),
                   ["tweetId", "noteId", "raterId", "value"],
                   [(b.tweet_id, r.note_id, r.rater_id, r.value)
                    for b in blocks for r in sorted(b.ratings, key=lambda r: (r.note_id, r.rater_id))])
        scores = rescore_equal_exposure(blocks, cfg)
        _write_tsv(run.path("equal_exposure_scores.tsv"),
                   ["noteId", "helpfulness_score", "status"],
                   [(nid, repr(s), st) for nid, s, st in scores.to_rows()])
        rep = representativeness_report(filtered, blocks)
        _write_json(run.path("representativeness.json"), rep.to_dict())
        eq2 = run_eq2_outcomes(scores, filtered)
        _write_json(run.path("eq2_outcomes.json"),
                    {k: v.to_dict() for k, v in eq2.items()})
        run.finish(extra=dataset_manifest(raw, filtered))


def _table1_fits(filtered):
    """Fit each rating-level specification, keeping per-model failures
    (e.g. an interaction column that is identically zero on a small subset)
    from aborting the rest."""
    frame = rating_frame(filtered)
    fits, errors = {}, {}
    for name, spec in TABLE1_SPECS.items():
        try:
            fits[name] = fit_model(frame, spec)
        except NotebridgeError as exc:
            errors[name] = str(exc)
    return fits, errors


def _table1_payload(fits, errors):
    payload = {k: v.to_dict() for k, v in fits.items()}
    payload.update({k: {"error": v} for k, v in errors.items()})
    return payload


@main.command()
@_apply(_data_options)
@click.option("--out-dir", required=True)
def table1(notes, ratings, raters, out_dir):
    """Fit the four rating-level specifications."""
    with _output_lock(out_dir):
        raw, filtered = _load_filtered(notes, ratings, raters)
        run = _Run(out_dir, {})
        fits, errors = _table1_fits(filtered)
        _write_json(run.path("table1.json"), _table1_payload(fits, errors))
        terms = sorted({t for f in fits.values() for t in f.coefficients})
        rows = []
        for term in terms:
            row = [term]
            for name in fits:
                c = fits[name].coefficients.get(term)
                row.append("" if c is None else f"{c.estimate:.6g} ({c.se:.3g})")
            rows.append(row)
        _write_tsv(run.path("table1.tsv"), ["term", *fits.keys()], rows)
        run.finish(extra=dataset_manifest(raw, filtered))


@main.command()
@_apply(_data_options)
@_apply(_scoring_options)
@click.option("--equal-exposure/--full-sample", "use_equal", default=True,
              help="score on the equal-exposure subset (default) or full sample")
@click.option("--out-dir", required=True)
@click.pass_context
def eq2(ctx, notes, ratings, raters, use_equal, out_dir, **_):
    """Note-level outcome models: outcome ~ AI + (1|tweetId), BH-adjusted."""
    with _output_lock(out_dir):
        cfg = _scoring_config(ctx.params)
        raw, filtered = _load_filtered(notes, ratings, raters)
        run = _Run(out_dir, {"scoring": dataclasses.asdict(cfg), "equal_exposure": use_equal})
        if use_equal:
            scores = rescore_equal_exposure(build_complete_blocks(filtered), cfg)
        else:
            scores = fit_bridging(filtered, cfg)
        fits = run_eq2_outcomes(scores, filtered)
        _write_json(run.path("eq2_outcomes.json"), {k: v.to_dict() for k, v in fits.items()})
        run.finish(extra=dataset_manifest(raw, filtered))


@main.command()
@_apply(_data_options)
@click.option("--labels", "labels_path", required=True, help="topic label TSV")
@click.option("--axis", type=click.Choice(["topic", "modality"]), required=True)
@click.option("--min-ratings", type=int, default=500)
@click.option("--out-dir", required=True)
def subgroups(notes, ratings, raters, labels_path, axis, min_ratings, out_dir):
    """Re-estimate the main rating-level model per tweet label."""
    with _output_lock(out_dir):
        raw, filtered = _load_filtered(notes, ratings, raters)
        labels = load_topic_labels(labels_path)
        run = _Run(out_dir, {"axis": axis, "min_ratings": min_ratings})
        fits, notices = subgroup_fits_with_notices(filtered, labels, axis,
                                                   min_ratings=min_ratings)
        _write_json(run.path("subgroups.json"),
                    {"fits": {k: v.to_dict() for k, v in fits.items()},
                     "notices": notices})
        table = ai_effect_table(fits)
        _write_tsv(run.path("subgroup_ai_effects.csv.tsv"),
                   list(table.columns), table.itertuples(index=False))
        run.finish(extra=dataset_manifest(raw, filtered))


@main.command()
@_apply(_data_options)
@click.option("--out-dir", required=True)
def pairwise(notes, ratings, raters, out_dir):
    """Within-rater LLM-vs-human pairwise Bradley-Terry comparison."""
    with _output_lock(out_dir):
        raw, filtered = _load_filtered(notes, ratings, raters)
        run = _Run(out_dir, {})
        report = pairwise_bradley_terry(filtered)
        _write_json(run.path("pairwise.json"), report.to_dict())
        run.finish(extra=dataset_manifest(raw, filtered))


@main.command()
@_apply(_data_options)
@click.option("--out-dir", required=True)
def descriptives(notes, ratings, raters, out_dir):
    """Bucket helpfulness table, text/URL/domain profile, length tests."""
    with _output_lock(out_dir):
        raw, filtered = _load_filtered(notes, ratings, raters)
        run = _Run(out_dir, {})
        table = bucket_table(filtered)
        _write_tsv(run.path("bucket_table.tsv"), list(table.columns),
                   table.itertuples(index=False))
        profile = text_profile(list(filtered.notes.values()))
        _write_json(run.path("text_profile.json"), profile.to_dict())
        llm_wc = [len(n.text.split()) for n in filtered.notes.values() if n.is_ai]
        human_wc = [len(n.text.split()) for n in filtered.notes.values() if not n.is_ai]
        extra = {}
        if len(llm_wc) >= 2 and len(human_wc) >= 2:
            try:
                t = welch_t(llm_wc, human_wc)
                extra = {"word_count_welch": {"t": t.statistic, "p": t.p_value, "df": t.df}}
            except NotebridgeError as exc:
                extra = {"word_count_welch": {"error": str(exc)}}
        _write_json(run.path("descriptives.json"), extra)
        run.finish(extra=dataset_manifest(raw, filtered))


@main.command()
@_apply(_data_options)
@_apply(_scoring_options)
@click.option("--out-dir", required=True)
@click.pass_context
def robustness(ctx, notes, ratings, raters, out_dir, **_):
    """Rating-count floor and timing-matched note-level robustness subsets."""
    with _output_lock(out_dir):
        cfg = _scoring_config(ctx.params)
        raw, filtered = _load_filtered(notes, ratings, raters)
        run = _Run(out_dir, {"scoring": dataclasses.asdict(cfg)})
        scores = fit_bridging(filtered, cfg)
        reports = robustness_subsets(filtered, scores)
        _write_json(run.path("robustness.json"),
                    {r.name: r.to_dict() for r in reports})
        run.finish(extra=dataset_manifest(raw, filtered))


def _sim_config(params) -> SimConfig:
    kwargs = {}
    cfg_file = params.get("config")
    if cfg_file:
        with open(cfg_file, encoding="utf-8") as fh:
            raw = json.load(fh).get("sim", {})
        if "llm_quality" in raw:
            raw["llm_quality"] = GroupQuality(**raw["llm_quality"])
        if "human_quality" in raw:
            raw["human_quality"] = GroupQuality(**raw["human_quality"])
        fields = {f.name for f in dataclasses.fields(SimConfig)}
        kwargs.update({k: v for k, v in raw.items() if k in fields})
    if params.get("seed") is not None:
        kwargs["seed"] = params["seed"]
    return SimConfig(**kwargs)


@main.command("simulate")
@click.option("--config", default=None, help="JSON config file with a 'sim' block")
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", required=True)
@click.pass_context
def simulate_cmd(ctx, out_dir, **_):
    """Generate a synthetic corpus plus its generating truth."""
    with _output_lock(out_dir):
        cfg = _sim_config(ctx.params)
        run = _Run(out_dir, {"sim": _sim_config_echo(cfg)})
        dataset, truth = simulate(cfg)
        paths = write_dataset(dataset, out_dir)
        for p in paths.values():
            run.outputs.append(os.path.basename(p))
        _write_json(run.path("truth.json"), truth.to_dict())
        run.finish(extra={"counts": dataset.counts()})


def _sim_config_echo(cfg: SimConfig) -> dict:
    echo = dataclasses.asdict(cfg)
    return json.loads(json.dumps(echo, default=list))


@main.command()
@click.option("--config", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", required=True)
@click.pass_context
def confound(ctx, out_dir, **_):
    """Run the end-to-end timing/exposure confound experiment on simulated data."""
    with _output_lock(out_dir):
        cfg = _sim_config(ctx.params)
        run = _Run(out_dir, {"sim": _sim_config_echo(cfg)})
        report = confound_experiment(cfg)
        _write_json(run.path("confound.json"), report.to_dict())
        run.finish()


@main.command("report-all")
@_apply([click.option("--notes", default=None), click.option("--ratings", default=None),
         click.option("--raters", default=None)])
@click.option("--config", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", required=True)
@click.pass_context
def report_all(ctx, notes, ratings, raters, out_dir, **_):
    """Run every analysis; simulates a corpus when no input files are given."""
    with _output_lock(out_dir):
        run = _Run(out_dir, {"inputs": {"notes": notes, "ratings": ratings, "raters": raters}})
        sim_truth = None
        if notes is None:
            sim_cfg = _sim_config(ctx.params)
            run.config_echo["sim"] = _sim_config_echo(sim_cfg)
            dataset, sim_truth = simulate(sim_cfg)
            raw = dataset
            filtered = apply_paper_filters(dataset)
            paths = write_dataset(dataset, out_dir)
            for p in paths.values():
                run.outputs.append(os.path.basename(p))
            _write_json(run.path("truth.json"), sim_truth.to_dict())
        else:
            raw, filtered = _load_filtered(notes, ratings, raters)
        cfg = ScoringConfig()

        scores = _score_dataset(filtered, cfg, run)
        blocks = build_complete_blocks(filtered)
        if blocks:
            ee_scores = rescore_equal_exposure(blocks, cfg)
            _write_tsv(run.path("equal_exposure_scores.tsv"),
                       ["noteId", "helpfulness_score", "status"],
                       [(nid, repr(s), st) for nid, s, st in ee_scores.to_rows()])
            _write_json(run.path("representativeness.json"),
                        representativeness_report(filtered, blocks).to_dict())
            _write_json(run.path("eq2_outcomes.json"),
                        {k: v.to_dict() for k, v in run_eq2_outcomes(ee_scores, filtered).items()})
        fits, errors = _table1_fits(filtered)
        _write_json(run.path("table1.json"), _table1_payload(fits, errors))
        try:
            _write_json(run.path("pairwise.json"), pairwise_bradley_terry(filtered).to_dict())
        except NotebridgeError as exc:
            _write_json(run.path("pairwise.json"), {"error": str(exc)})
        table = bucket_table(filtered)
        _write_tsv(run.path("bucket_table.tsv"), list(table.columns),
                   table.itertuples(index=False))
        _write_json(run.path("text_profile.json"),
                    text_profile(list(filtered.notes.values())).to_dict())
        _write_json(run.path("robustness.json"),
                    {r.name: r.to_dict() for r in robustness_subsets(filtered, scores)})
        run.finish(extra=dataset_manifest(raw, filtered))


if __name__ == "__main__":
    sys.exit(main())
