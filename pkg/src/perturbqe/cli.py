"""Command-line entry point.

Every stage of the pipeline is a subcommand reading the previous stage's
artifacts from the output directory, plus `run` which chains them all.
Flags override the JSON config. Exit codes: 0 success, 2 config error,
3 backend/provider error, 4 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .core import AlignerKind, TargetMode
from .dataio import (
    emit_explanations,
    load_predictions,
    record_from_verdicts,
    write_predictions,
)
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    InvalidInputError,
    ProviderError,
)
from .evaluation import grid_search
from .pipeline import (
    PipelineRunner,
    RunArtifacts,
    RunConfig,
    compute_metrics,
    load_run_dataset,
    read_perturbations,
    read_tables,
    read_translations,
    read_verdicts,
    run,
    run_baseline_logprob,
    stage_align,
    stage_perturb,
    stage_predict,
    stage_translate,
    write_perturbations,
    write_tables,
    write_translations,
    write_verdicts,
)

logger = logging.getLogger("perturbqe")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--output-dir", help="override the config's output directory")
    parser.add_argument("--cache-dir", help="override the config's cache directory")
    parser.add_argument("--fold-case", action="store_true", default=None,
                        help="case-fold tokens before comparison (default off)")
    parser.add_argument("--skip-errors", action="store_true", default=None,
                        help="log and exclude failing sentences instead of aborting")
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--max-in-flight", type=int)
    parser.add_argument("--num-replacements", type=int)
    parser.add_argument("--consistency-threshold", type=float)
    parser.add_argument("--direct-outcome-threshold", type=float)
    parser.add_argument("--influence-threshold", type=int)
    parser.add_argument("--target-mode", choices=[m.value for m in TargetMode])
    parser.add_argument("--aligner", choices=[a.value for a in AlignerKind])


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config)
    hp = config.hyperparameters
    hp_overrides = {}
    for field_name, arg_name in (
        ("num_replacements", "num_replacements"),
        ("consistency_threshold", "consistency_threshold"),
        ("direct_outcome_threshold", "direct_outcome_threshold"),
        ("influence_threshold", "influence_threshold"),
    ):
        value = getattr(args, arg_name, None)
        if value is not None:
            hp_overrides[field_name] = value
    if getattr(args, "target_mode", None):
        hp_overrides["target_mode"] = TargetMode(args.target_mode)
    if getattr(args, "aligner", None):
        hp_overrides["aligner"] = AlignerKind(args.aligner)
    if hp_overrides:
        try:
            hp = replace(hp, **hp_overrides)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
    overrides = {"hyperparameters": hp}
    if getattr(args, "output_dir", None):
        overrides["output_dir"] = args.output_dir
    if getattr(args, "cache_dir", None):
        overrides["cache_dir"] = args.cache_dir
    if getattr(args, "fold_case", None) is not None:
        overrides["fold_case"] = args.fold_case
    if getattr(args, "skip_errors", None) is not None:
        overrides["skip_errors"] = args.skip_errors
    if getattr(args, "batch_size", None) is not None:
        overrides["batch_size"] = args.batch_size
    if getattr(args, "max_in_flight", None) is not None:
        overrides["max_in_flight"] = args.max_in_flight
    return replace(config, **overrides)


def _artifacts(config: RunConfig) -> RunArtifacts:
    artifacts = RunArtifacts(Path(config.output_dir))
    artifacts.output_dir.mkdir(parents=True, exist_ok=True)
    return artifacts


def cmd_run(args) -> int:
    config = _load_config(args)
    artifacts = run(config)
    logger.info("run complete; artifacts in %s", artifacts.output_dir)
    return 0


def cmd_perturb(args) -> int:
    config = _load_config(args)
    config.validate_paths()
    dataset = load_run_dataset(config)
    perturbations = stage_perturb(dataset, config)
    artifacts = _artifacts(config)
    write_perturbations(perturbations, artifacts.perturbations)
    logger.info("wrote %s", artifacts.perturbations)
    return 0


def cmd_translate(args) -> int:
    config = _load_config(args)
    config.validate_paths()
    artifacts = _artifacts(config)
    perturbations = read_perturbations(artifacts.perturbations)
    translations = stage_translate(perturbations, config)
    write_translations(perturbations, translations, artifacts.translations)
    logger.info("wrote %s", artifacts.translations)
    return 0


def cmd_align(args) -> int:
    config = _load_config(args)
    config.validate_paths()
    artifacts = _artifacts(config)
    dataset = load_run_dataset(config)
    perturbations = read_perturbations(artifacts.perturbations)
    translations, skipped = read_translations(
        artifacts.translations, config.backend.backend_id
    )
    for sp in perturbations:
        if sp.sentence.sentence_id in skipped:
            sp.skipped = True
    tables = stage_align(dataset, perturbations, translations, config)
    write_tables(tables, artifacts.tables)
    logger.info("wrote %s", artifacts.tables)
    return 0


def cmd_predict(args) -> int:
    config = _load_config(args)
    artifacts = _artifacts(config)
    tables = read_tables(artifacts.tables)
    verdicts, labels = stage_predict(tables, config.hyperparameters)
    write_verdicts(verdicts, [st.sentence_id for st in tables], artifacts.verdicts)
    write_predictions(labels, artifacts.predictions)
    logger.info("wrote %s and %s", artifacts.verdicts, artifacts.predictions)
    return 0


def cmd_explain(args) -> int:
    config = _load_config(args)
    config.validate_paths()
    artifacts = _artifacts(config)
    dataset = load_run_dataset(config)
    ids, verdicts = read_verdicts(artifacts.verdicts)
    by_id = {s.sentence_id: s for s in dataset}
    records = []
    for sid, sentence_verdicts in zip(ids, verdicts):
        sentence = by_id.get(sid)
        if sentence is None:
            raise DataError(f"verdicts mention unknown sentence {sid!r}")
        if not sentence_verdicts and len(sentence.mt_tokens) > 0:
            continue  # skipped sentence
        records.append(
            record_from_verdicts(
                sid,
                list(sentence.source_tokens),
                list(sentence.mt_tokens),
                sentence_verdicts,
            )
        )
    fmt = args.format
    if fmt in ("json", "both"):
        emit_explanations(records, "json", artifacts.explanations_json)
        logger.info("wrote %s", artifacts.explanations_json)
    if fmt in ("html", "both"):
        emit_explanations(records, "html", artifacts.explanations_html)
        logger.info("wrote %s", artifacts.explanations_html)
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    config.validate_paths()
    artifacts = _artifacts(config)
    dataset = load_run_dataset(config)
    if not dataset.has_gold:
        raise DataError("evaluate needs gold tags in the dataset config")
    labels = load_predictions(args.predictions or artifacts.predictions)
    if len(labels) != len(dataset):
        raise DataError(
            f"{len(labels)} prediction lines for {len(dataset)} dataset sentences"
        )
    skipped = [len(line) == 0 and len(s.mt_tokens) > 0 for line, s in zip(labels, dataset)]
    metrics = compute_metrics(dataset, labels, skipped)
    with open(artifacts.metrics, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(metrics, fh, ensure_ascii=False, indent=1, sort_keys=True)
        fh.write("\n")
    print(json.dumps(metrics, indent=1, sort_keys=True))
    return 0


def cmd_tune(args) -> int:
    config = _load_config(args)
    config.validate_paths()
    artifacts = _artifacts(config)
    dataset = load_run_dataset(config)
    if not dataset.has_gold:
        raise DataError("tune needs gold tags in the dataset config")
    try:
        with open(args.grid, encoding="utf-8") as fh:
            grid = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read grid {args.grid}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"grid {args.grid} is not valid JSON: {exc}") from exc
    runner = PipelineRunner(dataset, config)
    try:
        best, leaderboard = grid_search(
            grid,
            runner,
            config.hyperparameters,
            leaderboard_path=artifacts.leaderboard,
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    best_doc = {"hyperparameters": best.to_dict()}
    with open(artifacts.best_config, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(best_doc, fh, ensure_ascii=False, indent=1, sort_keys=True)
        fh.write("\n")
    print(json.dumps(best_doc, indent=1, sort_keys=True))
    logger.info(
        "evaluated %d configs; leaderboard in %s", len(leaderboard), artifacts.leaderboard
    )
    return 0


def cmd_baseline_logprob(args) -> int:
    config = _load_config(args)
    if args.threshold_log2 is not None:
        config = replace(config, logprob_threshold_log2=args.threshold_log2)
    if args.logprob_file:
        config = replace(config, logprob_path=args.logprob_file)
    artifacts = run_baseline_logprob(config)
    logger.info("wrote %s", artifacts.baseline_predictions)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perturbqe",
        description=(
            "Word-level quality estimation for blackbox MT: perturb source "
            "words, re-translate, align, and flag target words influenced by "
            "too many source words."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    commands = {
        "run": (cmd_run, "run the whole pipeline"),
        "perturb": (cmd_perturb, "select targets and generate replacement variants"),
        "translate": (cmd_translate, "translate all variants (cache-first)"),
        "align": (cmd_align, "align perturbed translations to the original"),
        "predict": (cmd_predict, "classify consistency and write OK/BAD predictions"),
        "evaluate": (cmd_evaluate, "score predictions against gold tags"),
        "tune": (cmd_tune, "grid-search hyperparameters on a labeled dev set"),
        "explain": (cmd_explain, "emit per-word influence explanations"),
        "baseline-logprob": (cmd_baseline_logprob, "log-probability baseline labels"),
    }
    for name, (func, help_text) in commands.items():
        sp = sub.add_parser(name, help=help_text)
        _add_common(sp)
        sp.set_defaults(func=func)
        if name == "explain":
            sp.add_argument("--format", choices=["json", "html", "both"], default="both")
        if name == "evaluate":
            sp.add_argument("--predictions", help="score this file instead of the run artifact")
        if name == "tune":
            sp.add_argument("--grid", required=True, help="JSON file of hyperparameter value lists")
        if name == "baseline-logprob":
            sp.add_argument("--logprob-file", help="override the config's logprob file")
            sp.add_argument("--threshold-log2", type=float,
                            help="OK iff logprob (log base 2) strictly exceeds this")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return 2
    except (BackendError, ProviderError) as exc:
        logger.error("backend error: %s", exc)
        return 3
    except DataError as exc:
        logger.error("data error: %s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
