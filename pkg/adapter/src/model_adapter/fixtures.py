"""Deterministic fixture-mode model stand-ins.

The unmask fixture uses the same file format as the pipeline's static
lexicon (``token TAB cand1 TAB cand2 ...``); candidate scores decay with
rank. The translate fixture is JSONL with ``source``, ``translation`` and
optional ``tokens`` / ``logprobs`` per line.
"""

from __future__ import annotations

import json
import unicodedata
from typing import Optional

from .wire import Candidate, TranslateResult


class FixtureError(ValueError):
    pass


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


class FixtureUnmasker:
    def __init__(self, path: str) -> None:
        self.table: dict[str, list[str]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) < 2:
                    raise FixtureError(
                        f"{path}:{line_no}: expected 'token TAB candidates...'"
                    )
                self.table[_nfc(parts[0])] = [_nfc(p) for p in parts[1:] if p]

    def candidates(self, tokens: list[str], mask_index: int, n: int) -> list[Candidate]:
        raw = self.table.get(_nfc(tokens[mask_index]), [])
        out = []
        for rank, token in enumerate(raw):
            token = token.strip()
            if not token or any(ch.isspace() for ch in token):
                continue
            out.append(Candidate(token=token, score=round(1.0 / (1 + rank), 6)))
            if len(out) == n:
                break
        return out


class FixtureTranslator:
    def __init__(self, path: str) -> None:
        self.table: dict[str, TranslateResult] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    source = _nfc(entry["source"])
                    translation = _nfc(entry["translation"])
                except (ValueError, KeyError, TypeError) as exc:
                    raise FixtureError(f"{path}:{line_no}: {exc}") from exc
                tokens = entry.get("tokens") or translation.split()
                logprobs = entry.get("logprobs")
                self.table[source] = TranslateResult(
                    translation=translation,
                    tokens=[_nfc(t) for t in tokens],
                    logprobs=logprobs,
                )

    def translate(self, text: str) -> Optional[TranslateResult]:
        return self.table.get(_nfc(text))
