"""
Walkthrough: threshold tuning without re-translating
====================================================

Grid search over the decision thresholds reuses the cached perturbation,
translation and alignment artifacts, so sweeping (consistency threshold,
direct-outcome threshold, influence threshold) costs no MT calls at all
after the first pass. The corpus below plants its optimum at influence
threshold 2, and the tuner finds it.

Run from the repository root:

    python demos/tune_thresholds.py
"""

import tempfile
from pathlib import Path

from perturbqe.core import AlignerKind, Hyperparameters, TargetMode
from perturbqe.evaluation import grid_search
from perturbqe.pipeline import (
    BackendSpec,
    PipelineRunner,
    ProviderSpec,
    RunConfig,
    load_run_dataset,
)
from perturbqe.synthetic import build_planted_corpus

workdir = Path(tempfile.mkdtemp(prefix="perturbqe-tune-"))
corpus = build_planted_corpus(
    workdir / "corpus",
    n_sentences=24,
    sentence_length=8,
    n_replacements=6,
    influence_threshold=2,
    seed=5,
)

base = Hyperparameters(
    num_replacements=6,
    consistency_threshold=0.75,
    direct_outcome_threshold=0.85,
    influence_threshold=0,
    target_mode=TargetMode.ALL_TOKENS,
    aligner=AlignerKind.TERCOM,
)
config = RunConfig(
    src_path=str(corpus.src_path),
    mt_path=str(corpus.mt_path),
    tags_path=str(corpus.tags_path),
    backend=BackendSpec(kind="mock", backend_id="demo-mt", rules_path=str(corpus.rules_path)),
    provider=ProviderSpec(kind="lexicon", fixture_path=str(corpus.lexicon_path)),
    hyperparameters=base,
    cache_dir=str(workdir / "cache"),
    output_dir=str(workdir / "out"),
)

runner = PipelineRunner(load_run_dataset(config), config)

# one warm-up pass fills the stage caches (this is the only part that
# would talk to a real MT system)
runner.influence_counts(base)
calls_after_warmup = runner.backend.calls
print(f"backend calls to build artifacts: {calls_after_warmup}")

grid = {
    "influence_threshold": [0, 1, 2, 3, 4, 5],
    "direct_outcome_threshold": [0.85, 0.9],
}
best, leaderboard = grid_search(
    grid, runner, base, leaderboard_path=workdir / "leaderboard.jsonl"
)
print(f"backend calls during the sweep:   {runner.backend.calls - calls_after_warmup}")

print(f"\nevaluated {len(leaderboard)} configurations; top five by MCC:")
for entry in sorted(leaderboard, key=lambda e: -e["mcc"])[:5]:
    print(
        f"  mcc={entry['mcc']:.3f}  t={entry['influence_threshold']}  "
        f"c={entry['consistency_threshold']}  p={entry['direct_outcome_threshold']}"
    )

print(
    f"\nbest: influence_threshold={best.influence_threshold}, "
    f"consistency_threshold={best.consistency_threshold}, "
    f"direct_outcome_threshold={best.direct_outcome_threshold}"
)
print(f"leaderboard written to {workdir / 'leaderboard.jsonl'}")
