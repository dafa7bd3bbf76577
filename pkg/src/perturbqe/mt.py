"""Blackbox translation contract: pluggable backends plus a persistent cache.

Backends must behave as pure functions of (backend_id, source text): greedy
or fixed-beam decoding, fixed prompt. The cache is a content-addressed
on-disk store — one JSON record per key plus an append-only index — so
records stay greppable and a re-run over the same corpus never touches the
backend again.
"""

from __future__ import annotations

import hashlib
import json
import os
import subprocess
import threading
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import requests

from .errors import (
    BackendError,
    DataError,
    InvalidInputError,
    ProtocolError,
    TransientBackendError,
)
from .textnorm import normalize_token, tokenize_target

#: environment variable naming the default cache directory
CACHE_DIR_ENV = "PERTURBQE_CACHE_DIR"


@dataclass(frozen=True)
class BackendResult:
    """One backend answer: translation text, its tokens, optional per-token
    log probabilities (log base 2)."""

    translation: str
    tokens: tuple[str, ...]
    logprobs: Optional[tuple[float, ...]] = None


class TranslationBackend:
    """Contract for translation backends.

    ``translate`` must be deterministic and safe for concurrent calls.
    ``calls`` counts the number of ``translate`` invocations (for cache
    idempotence checks).
    """

    backend_id: str = "backend"
    returns_logprobs: bool = False

    def __init__(self) -> None:
        self.calls = 0
        self._calls_lock = threading.Lock()

    def _count_call(self) -> None:
        with self._calls_lock:
            self.calls += 1

    def translate(self, texts: Sequence[str]) -> list[BackendResult]:
        raise NotImplementedError


@dataclass(frozen=True)
class TranslationRecord:
    source_text: str
    translation_text: str
    target_tokens: tuple[str, ...]
    token_logprobs: Optional[tuple[float, ...]]
    backend_id: str
    cache_key: str

    def __post_init__(self) -> None:
        if self.token_logprobs is not None and len(self.token_logprobs) != len(
            self.target_tokens
        ):
            raise InvalidInputError(
                f"{len(self.token_logprobs)} logprobs for "
                f"{len(self.target_tokens)} tokens"
            )

    def to_dict(self) -> dict:
        return {
            "source_text": self.source_text,
            "translation_text": self.translation_text,
            "target_tokens": list(self.target_tokens),
            "token_logprobs": (
                list(self.token_logprobs) if self.token_logprobs is not None else None
            ),
            "backend_id": self.backend_id,
            "cache_key": self.cache_key,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TranslationRecord":
        return cls(
            source_text=data["source_text"],
            translation_text=data["translation_text"],
            target_tokens=tuple(data["target_tokens"]),
            token_logprobs=(
                tuple(data["token_logprobs"])
                if data.get("token_logprobs") is not None
                else None
            ),
            backend_id=data["backend_id"],
            cache_key=data["cache_key"],
        )


def cache_key(backend_id: str, source_text: str) -> str:
    """Stable content hash identifying one (backend, source) pair."""
    payload = backend_id.encode("utf-8") + b"\x00" + source_text.encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


class TranslationCache:
    """Content-addressed store: ``<dir>/<key[:2]>/<key>.json`` per record,
    plus ``index.jsonl``. Writes are atomic (temp file + rename); records are
    immutable once written, so reads are memoized in memory; concurrent
    readers are safe."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._index_lock = threading.Lock()
        self._memory: dict[str, TranslationRecord] = {}
        self._made_shards: set[str] = set()

    def _record_path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[TranslationRecord]:
        cached = self._memory.get(key)
        if cached is not None:
            return cached
        path = self._record_path(key)
        if not path.exists():
            return None
        try:
            with open(path, encoding="utf-8") as fh:
                record = TranslationRecord.from_dict(json.load(fh))
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"corrupt cache record {path}: {exc}") from exc
        self._memory[key] = record
        return record

    def _write_record(self, record: TranslationRecord) -> bool:
        path = self._record_path(record.cache_key)
        shard = record.cache_key[:2]
        if shard not in self._made_shards:
            path.parent.mkdir(parents=True, exist_ok=True)
            self._made_shards.add(shard)
        if path.exists():
            self._memory[record.cache_key] = record
            return False
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(record.to_dict(), fh, ensure_ascii=False, sort_keys=True)
        os.replace(tmp, path)
        self._memory[record.cache_key] = record
        return True

    def _append_index(self, records: Sequence[TranslationRecord]) -> None:
        if not records:
            return
        lines = [
            json.dumps(
                {
                    "cache_key": r.cache_key,
                    "backend_id": r.backend_id,
                    "source_text": r.source_text,
                },
                ensure_ascii=False,
            )
            for r in records
        ]
        with self._index_lock:
            with open(self.directory / "index.jsonl", "a", encoding="utf-8") as fh:
                fh.write("".join(line + "\n" for line in lines))

    def put(self, record: TranslationRecord) -> None:
        if self._write_record(record):
            self._append_index([record])

    def put_many(self, records: Sequence[TranslationRecord]) -> None:
        """Persist a completed batch: record files first, then one index append."""
        self._append_index([r for r in records if self._write_record(r)])


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_DIR_ENV)
    if env:
        return Path(env)
    return Path(".perturbqe-cache")


def _chunks(items: list, size: int) -> list[list]:
    return [items[i : i + size] for i in range(0, len(items), size)]


def translate_batch(
    sources: Sequence[str],
    backend: TranslationBackend,
    cache: TranslationCache,
    *,
    batch_size: int = 16,
    max_in_flight: int = 2,
    max_attempts: int = 5,
    backoff_base: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> list[TranslationRecord]:
    """Translate ``sources`` cache-first, in input order.

    Only cache misses reach the backend, batched up to ``batch_size`` and
    retried with exponential backoff on transient transport errors (at most
    ``max_attempts`` attempts per batch). Every completed batch is persisted
    before the call returns, so an interrupted run loses at most the batches
    still in flight.
    """
    if batch_size < 1:
        raise InvalidInputError("batch_size must be >= 1")
    by_key: dict[str, TranslationRecord] = {}
    keys: list[str] = []
    pending: set[str] = set()
    misses: list[tuple[str, str]] = []  # unique (text, key) in first-seen order
    for text in sources:
        key = cache_key(backend.backend_id, text)
        keys.append(key)
        if key in by_key or key in pending:
            continue
        cached = cache.get(key)
        if cached is not None:
            by_key[key] = cached
        else:
            pending.add(key)
            misses.append((text, key))

    def run_batch(batch: list[tuple[str, str]]) -> list[TranslationRecord]:
        texts = [text for text, _ in batch]
        last_error: Optional[Exception] = None
        for attempt in range(max_attempts):
            try:
                results = backend.translate(texts)
                break
            except TransientBackendError as exc:
                last_error = exc
                if attempt + 1 < max_attempts:
                    sleep(backoff_base * (2**attempt))
        else:
            raise BackendError(
                f"backend {backend.backend_id!r} failed after {max_attempts} "
                f"attempts on source {batch[0][0]!r}: {last_error}"
            )
        if len(results) != len(texts):
            raise ProtocolError(
                f"backend {backend.backend_id!r} returned {len(results)} results "
                f"for {len(texts)} sources (first source {batch[0][0]!r})"
            )
        out = []
        for (text, key), result in zip(batch, results):
            tokens = result.tokens or tuple(tokenize_target(result.translation))
            out.append(
                TranslationRecord(
                    source_text=text,
                    translation_text=result.translation,
                    target_tokens=tokens,
                    token_logprobs=result.logprobs,
                    backend_id=backend.backend_id,
                    cache_key=key,
                )
            )
        cache.put_many(out)
        return out

    batches = _chunks(misses, batch_size)
    if len(batches) > 1 and max_in_flight > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            for done in pool.map(run_batch, batches):
                for record in done:
                    by_key[record.cache_key] = record
    else:
        for batch in batches:
            for record in run_batch(batch):
                by_key[record.cache_key] = record

    return [by_key[key] for key in keys]


def verify_backend_determinism(backend: TranslationBackend, probe_text: str) -> None:
    """Reject sampling backends: the same sentence must translate identically
    on two consecutive calls."""
    first = backend.translate([probe_text])[0]
    second = backend.translate([probe_text])[0]
    if (first.translation, first.tokens) != (second.translation, second.tokens):
        raise BackendError(
            f"backend {backend.backend_id!r} is nondeterministic: translating "
            f"{probe_text!r} twice produced different output; configure greedy "
            "or fixed-beam decoding"
        )


def load_logprobs(
    path: str | Path, expected: Sequence[tuple[str, int]]
) -> dict[str, list[float]]:
    """Read per-token log probabilities (log base 2), one line per sentence.

    ``expected`` pairs each sentence id with its MT token count; a mismatch
    raises a DataError naming the offending line.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read logprob file {path}: {exc}") from exc
    if len(lines) != len(expected):
        raise DataError(
            f"{path}: {len(lines)} lines for {len(expected)} dataset sentences"
        )
    out: dict[str, list[float]] = {}
    for line_no, (line, (sentence_id, count)) in enumerate(zip(lines, expected), start=1):
        parts = line.split()
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise DataError(f"{path}:{line_no}: non-numeric log probability") from exc
        if len(values) != count:
            raise DataError(
                f"{path}:{line_no}: {len(values)} log probabilities for "
                f"{count} MT tokens (sentence {sentence_id!r})"
            )
        out[sentence_id] = values
    return out


# ---------------------------------------------------------------------------
# Backends


class HttpBackend(TranslationBackend):
    """Backend speaking the ``/translate`` wire protocol.

    POSTs ``{"texts": [...]}`` and expects ``{"results": [{"translation": ...,
    "tokens": [...], "logprobs": [...]?}, ...]}`` in input order.
    """

    def __init__(
        self,
        endpoint: str,
        backend_id: str = "http",
        *,
        timeout: float = 120.0,
        session: Optional[requests.Session] = None,
    ) -> None:
        super().__init__()
        self.endpoint = endpoint.rstrip("/")
        self.backend_id = backend_id
        self.timeout = timeout
        self._session = session or requests.Session()

    def translate(self, texts: Sequence[str]) -> list[BackendResult]:
        self._count_call()
        try:
            resp = self._session.post(
                f"{self.endpoint}/translate",
                json={"texts": list(texts)},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransientBackendError(f"translate request failed: {exc}") from exc
        if resp.status_code >= 500:
            raise TransientBackendError(
                f"translate service error {resp.status_code}"
            )
        if resp.status_code != 200:
            raise ProtocolError(
                f"translate request rejected with HTTP {resp.status_code}: "
                f"{resp.text[:200]}"
            )
        try:
            results = resp.json()["results"]
            out = []
            for item in results:
                logprobs = item.get("logprobs")
                out.append(
                    BackendResult(
                        translation=str(item["translation"]),
                        tokens=tuple(str(t) for t in item.get("tokens") or ()),
                        logprobs=tuple(float(x) for x in logprobs)
                        if logprobs is not None
                        else None,
                    )
                )
            return out
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed translate response: {exc}") from exc


class SubprocessBackend(TranslationBackend):
    """Backend wrapping a command: one source sentence per stdin line, one
    translation per stdout line. A prompt template with the
    ``<English_input>`` placeholder, when configured, wraps each line."""

    PLACEHOLDER = "<English_input>"

    def __init__(
        self,
        command: Sequence[str],
        backend_id: str = "subprocess",
        *,
        prompt_template: Optional[str] = None,
        timeout: float = 600.0,
    ) -> None:
        super().__init__()
        if prompt_template is not None and self.PLACEHOLDER not in prompt_template:
            raise InvalidInputError(
                f"prompt template must contain {self.PLACEHOLDER!r}"
            )
        self.command = list(command)
        self.backend_id = backend_id
        self.prompt_template = prompt_template
        self.timeout = timeout

    def translate(self, texts: Sequence[str]) -> list[BackendResult]:
        self._count_call()
        lines = [
            self.prompt_template.replace(self.PLACEHOLDER, text)
            if self.prompt_template
            else text
            for text in texts
        ]
        try:
            proc = subprocess.run(
                self.command,
                input="\n".join(lines) + "\n",
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise TransientBackendError(f"backend command failed: {exc}") from exc
        if proc.returncode != 0:
            raise TransientBackendError(
                f"backend command exited {proc.returncode}: {proc.stderr[:200]}"
            )
        out_lines = proc.stdout.splitlines()
        if len(out_lines) != len(texts):
            raise ProtocolError(
                f"backend command wrote {len(out_lines)} lines for "
                f"{len(texts)} sources"
            )
        return [
            BackendResult(translation=line, tokens=tuple(tokenize_target(line)))
            for line in out_lines
        ]


# ---------------------------------------------------------------------------
# Mock backend with planted correlations


@dataclass(frozen=True)
class PlantedRule:
    """Forces one target position to flip among ``choices`` as a function of
    the source tokens at ``trigger_indices`` — the ground-truth influencer
    set of that target token is the trigger set, by construction."""

    target_index: int
    trigger_indices: tuple[int, ...]
    choices: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.choices) < 2:
            raise InvalidInputError("a planted rule needs at least two choices")

    def pick(self, source_tokens: Sequence[str]) -> str:
        key = "\x1f".join(source_tokens[i] for i in self.trigger_indices)
        return self.choices[zlib.crc32(key.encode("utf-8")) % len(self.choices)]


@dataclass(frozen=True)
class SentenceTemplate:
    """One known source sentence: its base translation (explicit target
    tokens, or token-by-token from the backend prefix when omitted) plus any
    planted rules overriding single target positions."""

    sentence_id: str
    source_tokens: tuple[str, ...]
    rules: tuple[PlantedRule, ...] = ()
    target_tokens: Optional[tuple[str, ...]] = None


class MockBackend(TranslationBackend):
    """Deterministic toy MT system for tests and offline runs.

    The base behavior translates token-by-token (``token_prefix`` + token),
    so every source position maps directly to the same target position.
    Planted rules override designated target positions with a choice driven
    by designated source positions. Inputs are matched to the template with
    the most positional token overlap at equal length, so single-position
    perturbations of a known template are recognized.
    """

    def __init__(
        self,
        templates: Sequence[SentenceTemplate],
        backend_id: str = "mock",
        *,
        token_prefix: str = "de:",
        call_log: Optional[str | Path] = None,
    ) -> None:
        super().__init__()
        self.backend_id = backend_id
        self.token_prefix = token_prefix
        self.call_log = Path(call_log) if call_log else None
        self._by_length: dict[int, list[SentenceTemplate]] = {}
        # (length, position, token) -> templates carrying that token there
        self._by_slot: dict[tuple[int, int, str], list[int]] = {}
        self._templates = list(templates)
        for t_idx, template in enumerate(self._templates):
            length = len(template.source_tokens)
            target_len = len(
                template.target_tokens
                if template.target_tokens is not None
                else template.source_tokens
            )
            for rule in template.rules:
                if not 0 <= rule.target_index < target_len:
                    raise InvalidInputError(
                        f"template {template.sentence_id!r}: rule target "
                        f"{rule.target_index} outside the translation"
                    )
                if any(not 0 <= i < length for i in rule.trigger_indices):
                    raise InvalidInputError(
                        f"template {template.sentence_id!r}: rule trigger "
                        "outside the source sentence"
                    )
            self._by_length.setdefault(length, []).append(template)
            for pos, token in enumerate(template.source_tokens):
                self._by_slot.setdefault((length, pos, token), []).append(t_idx)

    @classmethod
    def from_rules_file(
        cls,
        path: str | Path,
        backend_id: str = "mock",
        call_log: Optional[str | Path] = None,
    ) -> "MockBackend":
        try:
            with open(path, encoding="utf-8") as fh:
                spec = json.load(fh)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read mock rules file {path}: {exc}") from exc
        templates = [
            SentenceTemplate(
                sentence_id=str(t["sentence_id"]),
                source_tokens=tuple(t["source_tokens"]),
                rules=tuple(
                    PlantedRule(
                        target_index=r["target_index"],
                        trigger_indices=tuple(r["trigger_indices"]),
                        choices=tuple(r["choices"]),
                    )
                    for r in t.get("rules", ())
                ),
                target_tokens=(
                    tuple(t["target_tokens"]) if t.get("target_tokens") else None
                ),
            )
            for t in spec["templates"]
        ]
        return cls(
            templates,
            backend_id=backend_id,
            token_prefix=spec.get("token_prefix", "de:"),
            call_log=call_log,
        )

    def _match_template(self, tokens: list[str]) -> SentenceTemplate:
        length = len(tokens)
        votes: dict[int, int] = {}
        for pos, token in enumerate(tokens):
            for t_idx in self._by_slot.get((length, pos, token), ()):
                votes[t_idx] = votes.get(t_idx, 0) + 1
        best_idx = min(
            (t_idx for t_idx, v in votes.items() if v >= length - 1),
            default=None,
            key=lambda t_idx: (-votes[t_idx], t_idx),
        )
        if best_idx is None:
            raise BackendError(
                f"mock backend {self.backend_id!r} has no template within one "
                f"token of {' '.join(tokens)!r}"
            )
        return self._templates[best_idx]

    def translate_tokens(self, tokens: Sequence[str]) -> list[str]:
        tokens = list(tokens)
        template = self._match_template(tokens)
        if template.target_tokens is not None:
            target = list(template.target_tokens)
        else:
            target = [self.token_prefix + tok for tok in tokens]
        for rule in template.rules:
            target[rule.target_index] = rule.pick(tokens)
        return target

    def translate(self, texts: Sequence[str]) -> list[BackendResult]:
        self._count_call()
        if self.call_log is not None:
            with self._calls_lock:
                with open(self.call_log, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"batch_size": len(texts)}) + "\n")
        out = []
        for text in texts:
            tokens = [normalize_token(t) for t in text.split()]
            target = self.translate_tokens(tokens)
            out.append(
                BackendResult(translation=" ".join(target), tokens=tuple(target))
            )
        return out


def mock_backend(
    rule_table: Sequence[SentenceTemplate] | str | Path,
    backend_id: str = "mock",
    **kwargs,
) -> MockBackend:
    """Build a planted-correlation mock backend from templates or a rules file."""
    if isinstance(rule_table, (str, Path)):
        return MockBackend.from_rules_file(rule_table, backend_id=backend_id, **kwargs)
    return MockBackend(rule_table, backend_id=backend_id, **kwargs)
