"""Consistency classification and OK/BAD verdict prediction.

For every perturbed source word we observe how its replacement
re-translations behave at each position of the original translation.
Each (perturbed source word, target word) cell gets one of three labels:

* consistent — the target word survived (strictly) more than a
  ``consistency_threshold`` fraction of the perturbations unchanged;
* direct outcome — the observed versions are (strictly) more than a
  ``direct_outcome_threshold`` fraction unique, i.e. the target word is
  itself the translation of the perturbed word and varies with it;
* inconsistent — the remaining case: a few alternative versions showed up,
  so the perturbed source word influences this target word.

A target word influenced by strictly more than ``influence_threshold``
source words is predicted BAD. All three comparisons are strict, and the
per-cell fractions are taken over the row's actual variant count, so rows
with a provider shortfall stay meaningful.

The empty-alignment sentinel is ``None``: distinct from every real token
and from the empty string; all empty cells count as one observed value.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

from .alignment import AlignedVariant
from .errors import InvalidInputError

logger = logging.getLogger("perturbqe")

#: rows whose variant count falls below this are dropped from the matrix
MIN_ROW_VARIANTS = 3


class ConsistencyLabel(Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    DIRECT_OUTCOME = "direct_outcome"


class WordLabel(str, Enum):
    OK = "OK"
    BAD = "BAD"


class TargetMode(str, Enum):
    """Which source tokens get perturbed."""

    CONTENT_WORDS = "content_words"
    ALL_WORDS = "all_words"
    ALL_TOKENS = "all_tokens"


class AlignerKind(str, Enum):
    LEVENSHTEIN = "levenshtein"
    TERCOM = "tercom"


@dataclass(frozen=True)
class Hyperparameters:
    """The knobs governing one pipeline run.

    All thresholds are compared strictly: a cell is consistent only when its
    unchanged fraction exceeds ``consistency_threshold``, a direct outcome
    only when its unique fraction exceeds ``direct_outcome_threshold``, and a
    word is BAD only when its influence count exceeds ``influence_threshold``.
    """

    num_replacements: int = 30
    consistency_threshold: float = 0.95
    direct_outcome_threshold: float = 0.9
    influence_threshold: int = 2
    target_mode: TargetMode = TargetMode.CONTENT_WORDS
    aligner: AlignerKind = AlignerKind.TERCOM
    provider_id: str = "lexicon"

    def __post_init__(self) -> None:
        try:
            if not isinstance(self.target_mode, TargetMode):
                object.__setattr__(self, "target_mode", TargetMode(self.target_mode))
            if not isinstance(self.aligner, AlignerKind):
                object.__setattr__(self, "aligner", AlignerKind(self.aligner))
        except ValueError as exc:
            raise InvalidInputError(str(exc)) from exc
        if self.num_replacements < 1:
            raise InvalidInputError("num_replacements must be >= 1")
        if not 0.0 <= self.consistency_threshold <= 1.0:
            raise InvalidInputError("consistency_threshold must be in [0, 1]")
        if not 0.0 <= self.direct_outcome_threshold <= 1.0:
            raise InvalidInputError("direct_outcome_threshold must be in [0, 1]")
        if self.influence_threshold < 0:
            raise InvalidInputError("influence_threshold must be >= 0")

    def to_dict(self) -> dict:
        return {
            "num_replacements": self.num_replacements,
            "consistency_threshold": self.consistency_threshold,
            "direct_outcome_threshold": self.direct_outcome_threshold,
            "influence_threshold": self.influence_threshold,
            "target_mode": self.target_mode.value,
            "aligner": self.aligner.value,
            "provider_id": self.provider_id,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Hyperparameters":
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown hyperparameter keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "target_mode" in kwargs:
            kwargs["target_mode"] = TargetMode(kwargs["target_mode"])
        if "aligner" in kwargs:
            kwargs["aligner"] = AlignerKind(kwargs["aligner"])
        return cls(**kwargs)


@dataclass(frozen=True)
class ConsistencyMatrix:
    """Per-sentence classification grid.

    ``rows`` are the perturbed source token indices, ``cols`` the original
    translation's token indices. ``cells[i][j]`` is the label for perturbing
    source word ``rows[i]`` at target word ``cols[j]``, and
    ``variant_tables[i][j]`` keeps the observed projected tokens (one per
    replacement; ``None`` stands for an empty alignment) for explanations.
    """

    sentence_id: str
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    cells: tuple[tuple[ConsistencyLabel, ...], ...]
    variant_tables: tuple[tuple[tuple[Optional[str], ...], ...], ...]

    def __post_init__(self) -> None:
        if len(self.cells) != len(self.rows) or len(self.variant_tables) != len(self.rows):
            raise InvalidInputError("matrix rows out of shape")
        for row_cells, row_table in zip(self.cells, self.variant_tables):
            if len(row_cells) != len(self.cols) or len(row_table) != len(self.cols):
                raise InvalidInputError("matrix columns out of shape")


@dataclass(frozen=True)
class Influencer:
    """One source word found to influence a target word, with the distinct
    projected tokens observed under its perturbations (value, count),
    most frequent first."""

    source_index: int
    variants: tuple[tuple[Optional[str], int], ...]


@dataclass(frozen=True)
class WordVerdict:
    target_index: int
    label: WordLabel
    influence_count: int
    influencers: tuple[Influencer, ...] = field(default_factory=tuple)


def classify_cell(
    original_token: str,
    variants: Sequence[Optional[str]],
    consistency_threshold: float,
    direct_outcome_threshold: float,
) -> ConsistencyLabel:
    """Classify one (source word, target word) cell.

    ``variants`` holds the projected token observed at this target position
    under each perturbation of the source word (``None`` = empty alignment).
    The caller is responsible for token normalization; comparison is exact.
    """
    if len(variants) == 0:
        raise InvalidInputError("classify_cell needs at least one variant")
    total = len(variants)
    unchanged = sum(1 for v in variants if v == original_token)
    if unchanged / total > consistency_threshold:
        return ConsistencyLabel.CONSISTENT
    if len(set(variants)) / total > direct_outcome_threshold:
        return ConsistencyLabel.DIRECT_OUTCOME
    return ConsistencyLabel.INCONSISTENT


def build_consistency_matrix(
    original_translation: Sequence[str],
    aligned_variants: Mapping[int, Sequence[AlignedVariant]],
    hp: Hyperparameters,
    *,
    sentence_id: str = "",
    min_row_variants: int = MIN_ROW_VARIANTS,
) -> ConsistencyMatrix:
    """Classify every cell of the perturbation grid for one sentence.

    ``aligned_variants`` maps each perturbed source index to that row's
    projected variants. Rows may carry fewer than ``hp.num_replacements``
    variants (provider shortfall); thresholds then apply over the actual
    count. Rows with fewer than ``min_row_variants`` variants are dropped
    with a log line, rows with zero or more than ``hp.num_replacements``
    variants are rejected.
    """
    cols = tuple(range(len(original_translation)))
    rows: list[int] = []
    cells: list[tuple[ConsistencyLabel, ...]] = []
    tables: list[tuple[tuple[Optional[str], ...], ...]] = []
    for src_index in sorted(aligned_variants):
        variants = aligned_variants[src_index]
        if len(variants) == 0:
            raise InvalidInputError(
                f"sentence {sentence_id!r}: row {src_index} has no variants"
            )
        if len(variants) > hp.num_replacements:
            raise InvalidInputError(
                f"sentence {sentence_id!r}: row {src_index} has "
                f"{len(variants)} variants, more than num_replacements="
                f"{hp.num_replacements}"
            )
        for av in variants:
            if len(av.projected) != len(original_translation):
                raise InvalidInputError(
                    f"sentence {sentence_id!r}: row {src_index} has a variant "
                    f"projected to {len(av.projected)} positions, expected "
                    f"{len(original_translation)}"
                )
        if len(variants) < min_row_variants:
            logger.warning(
                "sentence %r: dropping row %d with only %d usable variants",
                sentence_id,
                src_index,
                len(variants),
            )
            continue
        row_table = tuple(
            tuple(av.projected[j] for av in variants) for j in cols
        )
        row_cells = tuple(
            classify_cell(
                original_translation[j],
                row_table[j],
                hp.consistency_threshold,
                hp.direct_outcome_threshold,
            )
            for j in cols
        )
        rows.append(src_index)
        cells.append(row_cells)
        tables.append(row_table)
    return ConsistencyMatrix(
        sentence_id=sentence_id,
        rows=tuple(rows),
        cols=cols,
        cells=tuple(cells),
        variant_tables=tuple(tables),
    )


def _distinct_variants(
    observed: Sequence[Optional[str]],
) -> tuple[tuple[Optional[str], int], ...]:
    counts = Counter(observed)
    return tuple(
        sorted(counts.items(), key=lambda kv: (-kv[1], kv[0] is None, kv[0] or ""))
    )


def predict_verdicts(matrix: ConsistencyMatrix, influence_threshold: int) -> list[WordVerdict]:
    """Turn a consistency matrix into per-target-word OK/BAD verdicts.

    A target word's influencers are exactly the rows classified inconsistent
    for its column; direct-outcome rows never count (that is how the source
    word translated directly to the target word is excluded). The verdict is
    BAD iff the influencer count strictly exceeds ``influence_threshold``.
    Row order does not affect the result.
    """
    if influence_threshold < 0:
        raise InvalidInputError("influence_threshold must be >= 0")
    verdicts = []
    for j, col in enumerate(matrix.cols):
        influencers = []
        for i, row in enumerate(matrix.rows):
            if matrix.cells[i][j] is ConsistencyLabel.INCONSISTENT:
                influencers.append(
                    Influencer(
                        source_index=row,
                        variants=_distinct_variants(matrix.variant_tables[i][j]),
                    )
                )
        influencers.sort(key=lambda inf: inf.source_index)
        count = len(influencers)
        label = WordLabel.BAD if count > influence_threshold else WordLabel.OK
        verdicts.append(
            WordVerdict(
                target_index=col,
                label=label,
                influence_count=count,
                influencers=tuple(influencers),
            )
        )
    return verdicts
