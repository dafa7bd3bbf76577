"""Synthetic corpora with planted influencer sets.

The generator builds sentences over per-position vocabularies that never
collide, wires a :class:`~perturbqe.mt.MockBackend` rule onto some target
positions, and emits every file a pipeline run needs (source, MT output,
gold tags, targeted mask, replacement lexicon, mock rule table). Because
the backend's behavior is constructed, the true influencer set of every
target token — and hence the correct OK/BAD label for any influence
threshold — is known exactly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import InvalidInputError
from .mt import MockBackend, PlantedRule, SentenceTemplate


@dataclass(frozen=True)
class PlantedCorpus:
    """Paths plus ground truth for one generated corpus."""

    src_path: Path
    mt_path: Path
    tags_path: Path
    mask_path: Path
    lexicon_path: Path
    rules_path: Path
    templates: tuple[SentenceTemplate, ...]
    #: per sentence: target index -> set of true influencer source indices
    influencers: tuple[dict[int, frozenset[int]], ...]
    influence_threshold: int

    @property
    def gold_bad(self) -> list[frozenset[int]]:
        """Per sentence, the target indices whose true influencer count
        exceeds the generation threshold."""
        return [
            frozenset(
                q
                for q, triggers in per_sentence.items()
                if len(triggers) > self.influence_threshold
            )
            for per_sentence in self.influencers
        ]


def _mixed_parity_replacements(
    tokens: list[str],
    position: int,
    rule: PlantedRule,
    pool: list[str],
    n_replacements: int,
    n_keep: int,
) -> list[str]:
    """Pick replacements so the rule's choice both sticks and flips.

    Exactly ``n_keep`` picks leave the rule on its original choice and the
    rest flip it, so the column's unchanged fraction is pinned by
    construction (and its unique fraction stays low).
    """
    original = rule.pick(tokens)
    keep, flip = [], []
    for cand in pool:
        variant = list(tokens)
        variant[position] = cand
        (keep if rule.pick(variant) == original else flip).append(cand)
    n_flip = n_replacements - n_keep
    if len(keep) < n_keep or len(flip) < n_flip:
        raise InvalidInputError(
            f"candidate pool too small for balanced parity at position {position}"
        )
    return sorted(keep[:n_keep] + flip[:n_flip])


def build_planted_corpus(
    out_dir: str | Path,
    *,
    n_sentences: int = 200,
    sentence_length: int = 8,
    n_replacements: int = 6,
    rule_sizes: tuple[int, ...] = (1, 2, 3, 4),
    influence_threshold: int = 2,
    plain_every: int = 5,
    seed: int = 0,
) -> PlantedCorpus:
    """Generate a corpus of ``n_sentences`` with one planted rule on most
    sentences (every ``plain_every``-th sentence is rule-free), cycling the
    trigger-set sizes through ``rule_sizes``."""
    if sentence_length < max(rule_sizes) + 1:
        raise InvalidInputError("sentences too short for the requested rules")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    templates: list[SentenceTemplate] = []
    influencers: list[dict[int, frozenset[int]]] = []
    lexicon: dict[str, list[str]] = {}

    rule_cycle = 0
    for s in range(n_sentences):
        tokens = [f"w{s}p{i}" for i in range(sentence_length)]
        rules: tuple[PlantedRule, ...] = ()
        sentence_truth: dict[int, frozenset[int]] = {}
        if plain_every <= 0 or s % plain_every != plain_every - 1:
            size = rule_sizes[rule_cycle % len(rule_sizes)]
            rule_cycle += 1
            positions = list(range(sentence_length))
            target = rng.choice(positions)
            trigger_pool = [p for p in positions if p != target]
            triggers = tuple(sorted(rng.sample(trigger_pool, size)))
            rule = PlantedRule(
                target_index=target,
                trigger_indices=triggers,
                choices=(f"x{s}c0", f"x{s}c1"),
            )
            rules = (rule,)
            sentence_truth[target] = frozenset(triggers)
        template = SentenceTemplate(
            sentence_id=str(s), source_tokens=tuple(tokens), rules=rules
        )
        templates.append(template)
        influencers.append(sentence_truth)

        for i, token in enumerate(tokens):
            pool = [f"w{s}p{i}r{j}" for j in range(n_replacements * 8)]
            if rules and i in rules[0].trigger_indices:
                # unchanged fractions cycle through 1/3, 1/2 and 2/3 of the
                # row so consistency-threshold sweeps see real transitions
                n_keep = (2 + (s + i) % 3) * n_replacements // 6
                lexicon[token] = _mixed_parity_replacements(
                    tokens, i, rules[0], pool, n_replacements, n_keep
                )
            else:
                lexicon[token] = pool[:n_replacements]

    backend = MockBackend(templates)
    src_lines = [" ".join(t.source_tokens) for t in templates]
    mt_token_lines = [backend.translate_tokens(t.source_tokens) for t in templates]

    src_path = out / "corpus.src"
    mt_path = out / "corpus.mt"
    tags_path = out / "corpus.tags"
    mask_path = out / "corpus.mask"
    lexicon_path = out / "lexicon.tsv"
    rules_path = out / "mock_rules.json"

    src_path.write_text("\n".join(src_lines) + "\n", encoding="utf-8")
    mt_path.write_text(
        "\n".join(" ".join(toks) for toks in mt_token_lines) + "\n", encoding="utf-8"
    )

    tag_lines = []
    mask_lines = []
    for s, truth in enumerate(influencers):
        bad = {
            q for q, trig in truth.items() if len(trig) > influence_threshold
        }
        length = len(mt_token_lines[s])
        tag_lines.append(
            " ".join("BAD" if j in bad else "OK" for j in range(length))
        )
        mask_lines.append(" ".join("1" if j in bad else "0" for j in range(length)))
    tags_path.write_text("\n".join(tag_lines) + "\n", encoding="utf-8")
    mask_path.write_text("\n".join(mask_lines) + "\n", encoding="utf-8")

    with open(lexicon_path, "w", encoding="utf-8") as fh:
        for token in sorted(lexicon):
            fh.write(token + "\t" + "\t".join(lexicon[token]) + "\n")

    rules_doc = {
        "token_prefix": "de:",
        "templates": [
            {
                "sentence_id": t.sentence_id,
                "source_tokens": list(t.source_tokens),
                "rules": [
                    {
                        "target_index": r.target_index,
                        "trigger_indices": list(r.trigger_indices),
                        "choices": list(r.choices),
                    }
                    for r in t.rules
                ],
            }
            for t in templates
        ],
    }
    with open(rules_path, "w", encoding="utf-8") as fh:
        json.dump(rules_doc, fh, ensure_ascii=False, indent=1)

    return PlantedCorpus(
        src_path=src_path,
        mt_path=mt_path,
        tags_path=tags_path,
        mask_path=mask_path,
        lexicon_path=lexicon_path,
        rules_path=rules_path,
        templates=tuple(templates),
        influencers=tuple(influencers),
        influence_threshold=influence_threshold,
    )


def write_translation_fixture(
    corpus: PlantedCorpus,
    path: str | Path,
    n_replacements: Optional[int] = None,
) -> int:
    """Enumerate every source text a pipeline run over ``corpus`` can send
    (originals plus all single-position perturbations from the lexicon) and
    dump source-to-translation JSONL for fixture-mode translate services.

    Returns the number of fixture entries written.
    """
    backend = MockBackend(corpus.templates)
    lexicon: dict[str, list[str]] = {}
    with open(corpus.lexicon_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) >= 2:
                lexicon[parts[0]] = parts[1:]

    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for template in corpus.templates:
            tokens = list(template.source_tokens)
            variants = [tokens]
            for i, token in enumerate(tokens):
                for replacement in lexicon.get(token, [])[: n_replacements or None]:
                    variant = list(tokens)
                    variant[i] = replacement
                    variants.append(variant)
            for variant in variants:
                target = backend.translate_tokens(variant)
                fh.write(
                    json.dumps(
                        {
                            "source": " ".join(variant),
                            "translation": " ".join(target),
                            "tokens": target,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
                count += 1
    return count
