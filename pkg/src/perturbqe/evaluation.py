"""Metrics and hyperparameter tuning.

BAD is the positive class throughout (WMT word-level convention). MCC falls
back to 0 whenever a denominator factor is zero. Tokens are pooled
corpus-wide, not averaged per sentence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Collection, Mapping, Optional, Sequence

from .core import AlignerKind, Hyperparameters, TargetMode, WordLabel
from .errors import DataError, InvalidInputError

OK = WordLabel.OK.value
BAD = WordLabel.BAD.value


@dataclass(frozen=True)
class ConfusionCounts:
    """OK/BAD confusion counts with BAD as the positive class."""

    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise InvalidInputError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.tn + other.tn,
            self.fp + other.fp,
            self.fn + other.fn,
        )


def confusion(
    predicted: Sequence[Sequence[str]],
    gold: Sequence[Sequence[str]],
    sentence_ids: Optional[Sequence[str]] = None,
) -> ConfusionCounts:
    """Pool per-sentence OK/BAD label lists into corpus-wide counts."""
    if len(predicted) != len(gold):
        raise DataError(
            f"{len(predicted)} predicted sentences vs {len(gold)} gold sentences"
        )
    counts = ConfusionCounts()
    for i, (pred_line, gold_line) in enumerate(zip(predicted, gold)):
        sid = sentence_ids[i] if sentence_ids is not None else str(i)
        if len(pred_line) != len(gold_line):
            raise DataError(
                f"sentence {sid!r}: {len(pred_line)} predicted labels vs "
                f"{len(gold_line)} gold labels"
            )
        tp = tn = fp = fn = 0
        for p, g in zip(pred_line, gold_line):
            if p not in (OK, BAD) or g not in (OK, BAD):
                raise DataError(f"sentence {sid!r}: labels must be OK or BAD")
            if g == BAD:
                if p == BAD:
                    tp += 1
                else:
                    fn += 1
            else:
                if p == BAD:
                    fp += 1
                else:
                    tn += 1
        counts = counts + ConfusionCounts(tp, tn, fp, fn)
    return counts


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any denominator factor is 0."""
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom_sq == 0:
        return 0.0
    value = (tp * tn - fp * fn) / math.sqrt(denom_sq)
    return max(-1.0, min(1.0, value))


def targeted_scores(
    predicted: Sequence[Sequence[str]],
    mask: Sequence[Collection[int]],
) -> tuple[float, float]:
    """Recall and precision of BAD predictions against a targeted-BAD mask.

    recall = targeted tokens predicted BAD / targeted tokens;
    precision = targeted tokens predicted BAD / all tokens predicted BAD.
    Empty denominators yield 0.
    """
    if len(predicted) != len(mask):
        raise DataError(f"{len(predicted)} sentences vs {len(mask)} mask lines")
    hit = masked_total = bad_total = 0
    for i, (pred_line, masked) in enumerate(zip(predicted, mask)):
        for idx in masked:
            if not 0 <= idx < len(pred_line):
                raise DataError(f"sentence {i}: mask index {idx} out of range")
        masked_total += len(set(masked))
        for j, label in enumerate(pred_line):
            if label == BAD:
                bad_total += 1
                if j in masked:
                    hit += 1
    recall = hit / masked_total if masked_total else 0.0
    precision = hit / bad_total if bad_total else 0.0
    return recall, precision


def logprob_predict(
    token_logprobs: Sequence[Optional[float]], threshold_log2: float
) -> list[str]:
    """Label each token OK iff its log2 probability strictly exceeds the
    threshold, else BAD."""
    labels = []
    for i, lp in enumerate(token_logprobs):
        if lp is None:
            raise DataError(f"missing log probability for token {i}")
        labels.append(OK if lp > threshold_log2 else BAD)
    return labels


# ---------------------------------------------------------------------------
# Grid search


#: order in which hyperparameter fields break MCC ties (lexicographic)
TIE_BREAK_FIELDS = (
    "influence_threshold",
    "consistency_threshold",
    "direct_outcome_threshold",
    "target_mode",
    "aligner",
    "provider_id",
    "num_replacements",
)

GRID_FIELDS = (
    "num_replacements",
    "consistency_threshold",
    "direct_outcome_threshold",
    "influence_threshold",
    "target_mode",
    "aligner",
    "provider_id",
)


def _tie_key(hp: Hyperparameters):
    values = []
    for name in TIE_BREAK_FIELDS:
        value = getattr(hp, name)
        if isinstance(value, (TargetMode, AlignerKind)):
            value = value.value
        values.append(value)
    return tuple(values)


def expand_grid(
    grid: Mapping[str, Sequence], base: Hyperparameters
) -> list[Hyperparameters]:
    """Cartesian product of the grid axes over the base configuration.

    Axes not present in ``grid`` stay at the base value. The expansion order
    is deterministic: fields in declaration order, values in listed order.
    """
    unknown = set(grid) - set(GRID_FIELDS)
    if unknown:
        raise InvalidInputError(f"unknown grid fields: {sorted(unknown)}")
    if any(len(v) == 0 for v in grid.values()):
        raise InvalidInputError("grid axes must be non-empty")
    axes = []
    for name in GRID_FIELDS:
        if name in grid:
            axes.append([(name, v) for v in grid[name]])
        else:
            axes.append([(name, getattr(base, name))])
    configs = []
    for combo in product(*axes):
        kwargs = dict(combo)
        kwargs["target_mode"] = TargetMode(kwargs["target_mode"])
        kwargs["aligner"] = AlignerKind(kwargs["aligner"])
        configs.append(Hyperparameters(**kwargs))
    if not configs:
        raise InvalidInputError("empty hyperparameter grid")
    return configs


def grid_search(
    grid: Mapping[str, Sequence],
    runner,
    base: Hyperparameters,
    *,
    leaderboard_path: Optional[str | Path] = None,
) -> tuple[Hyperparameters, list[dict]]:
    """Evaluate every grid point and return (best config, leaderboard).

    ``runner`` must expose ``influence_counts(hp) -> list[list[int]]`` (the
    per-sentence, per-target-token influencer counts, memoized so that
    threshold-only sweeps never re-translate) and ``gold_labels() ->
    list[list[str]]``. The best config maximizes dev MCC; ties break by
    lexicographic comparison of (influence_threshold, consistency_threshold,
    direct_outcome_threshold, target_mode, aligner, provider_id,
    num_replacements).
    """
    configs = expand_grid(grid, base)
    gold = runner.gold_labels()
    leaderboard = []
    best: Optional[tuple[float, tuple, Hyperparameters]] = None
    for hp in configs:
        counts_per_sentence = runner.influence_counts(hp)
        predicted = [
            [BAD if c > hp.influence_threshold else OK for c in counts]
            for counts in counts_per_sentence
        ]
        score = mcc(confusion(predicted, gold))
        entry = dict(hp.to_dict())
        entry["mcc"] = score
        leaderboard.append(entry)
        candidate = (-score, _tie_key(hp), hp)
        if best is None or candidate[:2] < best[:2]:
            best = candidate
    assert best is not None
    if leaderboard_path is not None:
        path = Path(leaderboard_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for entry in leaderboard:
                fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
    return best[2], leaderboard
