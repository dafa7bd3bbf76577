"""Dataset reading, prediction files, and influence explanations.

Datasets are parallel line-aligned UTF-8 text files (source, MT output,
optional gold word tags, optional targeted-BAD mask, optional source POS
tags). Gold tag lines of length 2k+1 against k MT tokens are treated as
gap-interleaved and the word tags at odd positions are kept; otherwise
lengths must match exactly.

Explanations serialize to JSON (one record per line) and to a single
self-contained HTML page with no external resources.
"""

from __future__ import annotations

import html
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import postag
from .core import WordLabel, WordVerdict
from .errors import DataError
from .textnorm import normalize_token, tokenize_target

OK = WordLabel.OK.value
BAD = WordLabel.BAD.value


@dataclass(frozen=True)
class Sentence:
    sentence_id: str
    source_text: str
    source_tokens: tuple[str, ...]
    mt_text: str
    mt_tokens: tuple[str, ...]
    gold_tags: Optional[tuple[str, ...]] = None
    targeted_mask: Optional[frozenset[int]] = None
    pos_tags: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class QEDataset:
    sentences: tuple[Sentence, ...]

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def has_gold(self) -> bool:
        return all(s.gold_tags is not None for s in self.sentences) and len(self) > 0

    def gold_labels(self) -> list[list[str]]:
        out = []
        for s in self.sentences:
            if s.gold_tags is None:
                raise DataError(f"sentence {s.sentence_id!r} has no gold tags")
            out.append(list(s.gold_tags))
        return out


def _read_lines(path: str | Path) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _parse_gold_tags(line: str, n_tokens: int, sentence_id: str, path) -> tuple[str, ...]:
    tags = line.split()
    if len(tags) == 2 * n_tokens + 1 and n_tokens > 0:
        tags = tags[1::2]  # gap-interleaved: keep the word positions
    if len(tags) != n_tokens:
        raise DataError(
            f"{path}: sentence {sentence_id!r} has {len(tags)} tags for "
            f"{n_tokens} MT tokens"
        )
    for tag in tags:
        if tag not in (OK, BAD):
            raise DataError(
                f"{path}: sentence {sentence_id!r} has tag {tag!r}, expected OK/BAD"
            )
    return tuple(tags)


def _parse_mask(line: str, n_tokens: int, sentence_id: str, path) -> frozenset[int]:
    flags = line.split()
    if len(flags) != n_tokens:
        raise DataError(
            f"{path}: sentence {sentence_id!r} has {len(flags)} mask flags for "
            f"{n_tokens} MT tokens"
        )
    out = set()
    for i, flag in enumerate(flags):
        if flag not in ("0", "1"):
            raise DataError(
                f"{path}: sentence {sentence_id!r} mask flag {flag!r} is not 0/1"
            )
        if flag == "1":
            out.add(i)
    return frozenset(out)


def _parse_pos(line: str, n_tokens: int, sentence_id: str, path) -> tuple[str, ...]:
    tags = line.split()
    if len(tags) != n_tokens:
        raise DataError(
            f"{path}: sentence {sentence_id!r} has {len(tags)} POS tags for "
            f"{n_tokens} source tokens"
        )
    out = []
    for tag in tags:
        mapped = "PUNCT" if tag == "." else tag
        if mapped not in postag.COARSE_TAGS:
            raise DataError(
                f"{path}: sentence {sentence_id!r} has unknown POS tag {tag!r}"
            )
        out.append(mapped)
    return tuple(out)


def load_dataset(
    src: str | Path,
    mt: str | Path,
    tags: Optional[str | Path] = None,
    mask: Optional[str | Path] = None,
    pos: Optional[str | Path] = None,
) -> QEDataset:
    """Load a line-aligned QE dataset.

    Source tokens come from whitespace-splitting the source line; MT tokens
    from whitespace-splitting the MT line, with single-character segmentation
    for space-less CJK output.
    """
    src_lines = _read_lines(src)
    mt_lines = _read_lines(mt)
    if len(src_lines) != len(mt_lines):
        raise DataError(
            f"line count mismatch: {src} has {len(src_lines)} lines, "
            f"{mt} has {len(mt_lines)} lines"
        )
    optional = {}
    for name, path in (("tags", tags), ("mask", mask), ("pos", pos)):
        if path is None:
            optional[name] = None
            continue
        lines = _read_lines(path)
        if len(lines) != len(src_lines):
            raise DataError(
                f"line count mismatch: {path} has {len(lines)} lines, "
                f"{src} has {len(src_lines)} lines"
            )
        optional[name] = lines

    sentences = []
    for i, (src_line, mt_line) in enumerate(zip(src_lines, mt_lines)):
        sid = str(i)
        source_tokens = tuple(normalize_token(t) for t in src_line.split())
        mt_tokens = tuple(normalize_token(t) for t in tokenize_target(mt_line))
        gold = None
        if optional["tags"] is not None:
            gold = _parse_gold_tags(optional["tags"][i], len(mt_tokens), sid, tags)
        masked = None
        if optional["mask"] is not None:
            masked = _parse_mask(optional["mask"][i], len(mt_tokens), sid, mask)
        pos_tags = None
        if optional["pos"] is not None:
            pos_tags = _parse_pos(optional["pos"][i], len(source_tokens), sid, pos)
        sentences.append(
            Sentence(
                sentence_id=sid,
                source_text=" ".join(source_tokens),
                source_tokens=source_tokens,
                mt_text=mt_line,
                mt_tokens=mt_tokens,
                gold_tags=gold,
                targeted_mask=masked,
                pos_tags=pos_tags,
            )
        )
    return QEDataset(sentences=tuple(sentences))


def write_predictions(labels: Sequence[Sequence[str]], path: str | Path) -> None:
    """One line per sentence, space-separated OK/BAD, LF newlines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in labels:
            fh.write(" ".join(line) + "\n")


def load_predictions(path: str | Path) -> list[list[str]]:
    out = []
    for i, line in enumerate(_read_lines(path)):
        labels = line.split()
        for label in labels:
            if label not in (OK, BAD):
                raise DataError(f"{path}: line {i + 1} has label {label!r}")
        out.append(labels)
    return out


# ---------------------------------------------------------------------------
# Explanations


@dataclass(frozen=True)
class InfluencerDetail:
    source_index: int
    source_token: str
    #: distinct projected tokens observed under this source word's
    #: perturbations, (value, count), most frequent first; None = empty
    variants: tuple[tuple[Optional[str], int], ...]


@dataclass(frozen=True)
class WordExplanation:
    target_index: int
    token: str
    label: str
    influence_count: int
    influencers: tuple[InfluencerDetail, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class ExplanationRecord:
    sentence_id: str
    source_tokens: tuple[str, ...]
    target_tokens: tuple[str, ...]
    words: tuple[WordExplanation, ...]

    def to_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "source_tokens": list(self.source_tokens),
            "target_tokens": list(self.target_tokens),
            "words": [
                {
                    "target_index": w.target_index,
                    "token": w.token,
                    "label": w.label,
                    "influence_count": w.influence_count,
                    "influencers": [
                        {
                            "source_index": inf.source_index,
                            "source_token": inf.source_token,
                            "variants": [[v, c] for v, c in inf.variants],
                        }
                        for inf in w.influencers
                    ],
                }
                for w in self.words
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExplanationRecord":
        return cls(
            sentence_id=data["sentence_id"],
            source_tokens=tuple(data["source_tokens"]),
            target_tokens=tuple(data["target_tokens"]),
            words=tuple(
                WordExplanation(
                    target_index=w["target_index"],
                    token=w["token"],
                    label=w["label"],
                    influence_count=w["influence_count"],
                    influencers=tuple(
                        InfluencerDetail(
                            source_index=inf["source_index"],
                            source_token=inf["source_token"],
                            variants=tuple((v, c) for v, c in inf["variants"]),
                        )
                        for inf in w["influencers"]
                    ),
                )
                for w in data["words"]
            ),
        )


def record_from_verdicts(
    sentence_id: str,
    source_tokens: Sequence[str],
    target_tokens: Sequence[str],
    verdicts: Sequence[WordVerdict],
) -> ExplanationRecord:
    words = []
    for verdict in verdicts:
        influencers = tuple(
            InfluencerDetail(
                source_index=inf.source_index,
                source_token=source_tokens[inf.source_index],
                variants=inf.variants,
            )
            for inf in verdict.influencers
        )
        words.append(
            WordExplanation(
                target_index=verdict.target_index,
                token=target_tokens[verdict.target_index],
                label=verdict.label.value,
                influence_count=verdict.influence_count,
                influencers=influencers,
            )
        )
    return ExplanationRecord(
        sentence_id=sentence_id,
        source_tokens=tuple(source_tokens),
        target_tokens=tuple(target_tokens),
        words=tuple(words),
    )


def write_explanations_json(records: Sequence[ExplanationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def load_explanations_json(path: str | Path) -> list[ExplanationRecord]:
    records = []
    for i, line in enumerate(_read_lines(path)):
        if not line.strip():
            continue
        try:
            records.append(ExplanationRecord.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{path}: line {i + 1}: {exc}") from exc
    return records


_HTML_HEAD = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Word-level QE report</title>
<style>
body { font-family: Georgia, serif; margin: 2em auto; max-width: 60em; color: #222; }
h1 { font-size: 1.4em; } h2 { font-size: 1.1em; margin-top: 2em; }
.tokens { line-height: 2.2; }
.tok { padding: 2px 5px; margin: 1px; border-radius: 4px; display: inline-block; }
.src .tok { background: #eef2f7; }
.tgt .tok.ok { background: #e7f4e7; }
.tgt .tok.bad { background: #f6d6d6; border: 1px solid #c33; font-weight: bold; }
.count { color: #777; font-size: 0.75em; vertical-align: super; }
table { border-collapse: collapse; margin: 0.6em 0 1.2em 1.5em; font-size: 0.9em; }
td, th { border: 1px solid #bbb; padding: 3px 8px; text-align: left; }
th { background: #f0f0f0; }
.variant { white-space: nowrap; padding: 0 4px; }
.empty { color: #a55; font-style: italic; }
.legend { color: #555; font-size: 0.85em; }
</style>
</head>
<body>
<h1>Word-level quality estimation report</h1>
<p class="legend">Each target word is OK or <strong>BAD</strong>; BAD words
collected more influencing source words than the configured threshold.
Under every influenced target word, the table lists the influencing source
words and the distinct translations observed while perturbing them
(&empty; marks positions with no aligned counterpart).</p>
"""


def _variant_html(value: Optional[str], count: int) -> str:
    shown = "<span class=\"empty\">&empty;</span>" if value is None else html.escape(value)
    return f"<span class=\"variant\">{shown}&times;{count}</span>"


def render_html_report(records: Sequence[ExplanationRecord]) -> str:
    """A single static page; token spans carry data attributes so the report
    is machine-checkable against the verdicts it was generated from."""
    parts = [_HTML_HEAD]
    for record in records:
        sid = html.escape(record.sentence_id)
        parts.append(f"<h2>Sentence {sid}</h2>")
        parts.append(f'<div class="tokens src" data-sentence="{sid}">')
        parts.append(
            " ".join(
                f'<span class="tok" data-source-index="{i}">{html.escape(tok)}</span>'
                for i, tok in enumerate(record.source_tokens)
            )
        )
        parts.append("</div>")
        parts.append(f'<div class="tokens tgt" data-sentence="{sid}">')
        spans = []
        for word in record.words:
            cls = "bad" if word.label == BAD else "ok"
            spans.append(
                f'<span class="tok {cls}" data-sentence="{sid}" '
                f'data-target-index="{word.target_index}" '
                f'data-label="{html.escape(word.label)}" '
                f'data-influence="{word.influence_count}">'
                f"{html.escape(word.token)}"
                f'<span class="count">{word.influence_count}</span></span>'
            )
        parts.append(" ".join(spans))
        parts.append("</div>")
        for word in record.words:
            if not word.influencers:
                continue
            parts.append(
                f'<p>Influences on <strong>{html.escape(word.token)}</strong> '
                f"(position {word.target_index}, {html.escape(word.label)}):</p>"
            )
            parts.append("<table>")
            parts.append(
                "<tr><th>source word</th><th>observed translations</th></tr>"
            )
            for inf in word.influencers:
                cells = " ".join(_variant_html(v, c) for v, c in inf.variants)
                parts.append(
                    f'<tr data-sentence="{sid}" data-target-index="{word.target_index}" '
                    f'data-source-index="{inf.source_index}">'
                    f"<td>{html.escape(inf.source_token)}</td><td>{cells}</td></tr>"
                )
            parts.append("</table>")
    parts.append("</body>\n</html>\n")
    return "\n".join(parts)


def emit_explanations(
    records: Sequence[ExplanationRecord], format: str, path: str | Path
) -> None:
    """Write explanations as JSONL (``format="json"``) or a static HTML page
    (``format="html"``)."""
    if format == "json":
        write_explanations_json(records, path)
    elif format == "html":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_html_report(records))
    else:
        raise DataError(f"unknown explanation format {format!r}")
