"""Source-side perturbation: pick which tokens to perturb and build variants.

For each selected source token, a replacement provider supplies candidate
substitute tokens (from a masked-LM service or a static lexicon file); the
candidates are filtered (no self-replacements under NFC + case folding, no
empty/whitespace or multi-word candidates), truncated to the requested
count, and each surviving replacement yields one variant sentence that
differs from the original at exactly that position.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import requests

from . import postag
from .core import TargetMode
from .errors import DataError, InvalidInputError, ProviderError
from .textnorm import normalize_token, tokenize_text


@dataclass(frozen=True)
class TokenizedSentence:
    """A working source sentence: surface tokens plus optional coarse POS tags.

    Joining ``tokens`` with single spaces reproduces the exact text fed to
    translation backends.
    """

    sentence_id: str
    tokens: tuple[str, ...]
    tags: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.tags is not None and len(self.tags) != len(self.tokens):
            raise InvalidInputError(
                f"sentence {self.sentence_id!r}: {len(self.tags)} tags for "
                f"{len(self.tokens)} tokens"
            )

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class PerturbationSet:
    """All perturbations of one source position.

    ``variants[k]`` equals the original token sequence except at
    ``source_index``, where it carries ``replacements[k]``.
    """

    source_index: int
    replacements: tuple[str, ...]
    variants: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        if len(self.variants) != len(self.replacements):
            raise InvalidInputError("one variant per replacement required")

    def __len__(self) -> int:
        return len(self.replacements)


class ReplacementProvider(Protocol):
    """Source of substitute candidates for a masked position.

    Implementations must be safe for concurrent calls; candidate order is
    descending provider score and must be deterministic.
    """

    provider_id: str

    def candidates(self, tokens: Sequence[str], mask_index: int, n: int) -> list[str]:
        ...


def select_targets(sentence: TokenizedSentence, mode: TargetMode) -> list[int]:
    """Positions to perturb, ascending.

    content_words needs tags and selects NOUN/VERB/ADJ/ADV/PRON positions;
    all_words keeps tokens containing at least one letter or digit;
    all_tokens keeps everything.
    """
    if mode is TargetMode.ALL_TOKENS:
        return list(range(len(sentence.tokens)))
    if mode is TargetMode.ALL_WORDS:
        return [
            i
            for i, tok in enumerate(sentence.tokens)
            if any(ch.isalpha() or ch.isdigit() for ch in tok)
        ]
    if mode is TargetMode.CONTENT_WORDS:
        if sentence.tags is None:
            raise DataError(
                f"sentence {sentence.sentence_id!r}: content-word targeting "
                "requires POS tags (supply a tag file or use the bundled tagger)"
            )
        return [
            i for i, tag in enumerate(sentence.tags) if tag in postag.CONTENT_TAGS
        ]
    raise InvalidInputError(f"unknown target mode: {mode!r}")


def tag_pos(text: str, sentence_id: str = "") -> TokenizedSentence:
    """Tokenize raw text and tag it with the bundled English tagger."""
    if not text or not text.strip():
        raise DataError(f"sentence {sentence_id!r}: empty source text")
    tokens = tokenize_text(text)
    tags = postag.tag_tokens(tokens)
    return TokenizedSentence(
        sentence_id=sentence_id, tokens=tuple(tokens), tags=tuple(tags)
    )


def tag_pretokenized(
    tokens: Sequence[str], sentence_id: str = ""
) -> TokenizedSentence:
    """Tag an already-tokenized sentence with the bundled tagger."""
    if not tokens:
        raise DataError(f"sentence {sentence_id!r}: empty token sequence")
    return TokenizedSentence(
        sentence_id=sentence_id,
        tokens=tuple(tokens),
        tags=tuple(postag.tag_tokens(list(tokens))),
    )


def generate_replacements(
    sentence: TokenizedSentence,
    position: int,
    n: int,
    provider: ReplacementProvider,
) -> PerturbationSet:
    """Build up to ``n`` single-position perturbations of one source token.

    Candidates equal to the original token (after NFC + case folding),
    empty/whitespace candidates, multi-word candidates, and duplicates are
    discarded; survivors keep provider order. An empty result means the
    caller should drop this position.
    """
    if not 0 <= position < len(sentence.tokens):
        raise InvalidInputError(
            f"sentence {sentence.sentence_id!r}: position {position} out of range"
        )
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    original_key = normalize_token(sentence.tokens[position], fold_case=True)
    raw = provider.candidates(list(sentence.tokens), position, n)
    replacements: list[str] = []
    seen: set[str] = set()
    for cand in raw:
        tok = normalize_token(cand).strip()
        if not tok or any(ch.isspace() for ch in tok):
            continue
        if normalize_token(tok, fold_case=True) == original_key:
            continue
        if tok in seen:
            continue
        seen.add(tok)
        replacements.append(tok)
        if len(replacements) == n:
            break
    variants = tuple(
        sentence.tokens[:position] + (rep,) + sentence.tokens[position + 1 :]
        for rep in replacements
    )
    return PerturbationSet(
        source_index=position,
        replacements=tuple(replacements),
        variants=variants,
    )


class StaticLexiconProvider:
    """Replacement candidates from a fixture file.

    File format: UTF-8, one record per line, ``token TAB cand1 TAB cand2 …``.
    Used for tests and offline runs; lookups are by NFC-normalized token.
    """

    def __init__(self, path: str, provider_id: str = "lexicon") -> None:
        self.provider_id = provider_id
        self.path = path
        self._table: dict[str, list[str]] = {}
        try:
            with open(path, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    parts = line.split("\t")
                    if len(parts) < 2:
                        raise DataError(
                            f"{path}:{line_no}: expected 'token TAB candidates...'"
                        )
                    key = normalize_token(parts[0])
                    self._table[key] = [normalize_token(p) for p in parts[1:] if p]
        except OSError as exc:
            raise DataError(f"cannot read lexicon fixture {path}: {exc}") from exc

    def candidates(self, tokens: Sequence[str], mask_index: int, n: int) -> list[str]:
        return list(self._table.get(normalize_token(tokens[mask_index]), []))


class RemoteMaskedLMProvider:
    """Replacement candidates from an unmasking HTTP service.

    POSTs ``{"tokens": [...], "mask_index": i, "n": n}`` to the endpoint and
    expects ``{"candidates": [{"token": ..., "score": ...}, ...]}`` ordered
    by descending score. Transport failures are retried with exponential
    backoff before giving up.
    """

    def __init__(
        self,
        endpoint: str,
        provider_id: str = "remote",
        *,
        timeout: float = 60.0,
        max_attempts: int = 5,
        backoff_base: float = 0.5,
        session: Optional[requests.Session] = None,
        sleep=time.sleep,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.provider_id = provider_id
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._session = session or requests.Session()
        self._sleep = sleep

    def candidates(self, tokens: Sequence[str], mask_index: int, n: int) -> list[str]:
        payload = {"tokens": list(tokens), "mask_index": mask_index, "n": n}
        last_error: Optional[Exception] = None
        for attempt in range(self.max_attempts):
            try:
                resp = self._session.post(
                    f"{self.endpoint}/unmask", json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                if attempt + 1 < self.max_attempts:
                    self._sleep(self.backoff_base * (2**attempt))
                continue
            if resp.status_code >= 500:
                last_error = ProviderError(
                    f"unmask service error {resp.status_code}", retryable=True
                )
                if attempt + 1 < self.max_attempts:
                    self._sleep(self.backoff_base * (2**attempt))
                continue
            if resp.status_code != 200:
                raise ProviderError(
                    f"unmask request rejected with HTTP {resp.status_code}: "
                    f"{resp.text[:200]}"
                )
            try:
                body = resp.json()
                cands = body["candidates"]
                return [str(c["token"]) for c in cands]
            except (ValueError, KeyError, TypeError) as exc:
                raise ProviderError(f"malformed unmask response: {exc}") from exc
        raise ProviderError(
            f"unmask service unreachable after {self.max_attempts} attempts: "
            f"{last_error}",
            retryable=True,
        )
