"""End-to-end orchestration and per-stage artifacts.

Each stage reads the previous stage's persisted artifact, so expensive
stages can be re-run independently:

    perturb    -> perturbations.jsonl
    translate  -> translations.jsonl        (backed by the on-disk cache)
    align      -> variant_tables.jsonl
    predict    -> verdicts.jsonl + predictions.txt
    explain    -> explanations.jsonl + report.html
    evaluate   -> metrics.json
    run        -> all of the above + manifest.json

Artifacts are written in dataset order with LF newlines, so a re-run with
an unchanged config and a warm cache reproduces them byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .alignment import AlignedVariant, get_aligner, project
from .core import (
    ConsistencyLabel,
    Hyperparameters,
    TargetMode,
    WordVerdict,
    Influencer,
    WordLabel,
    build_consistency_matrix,
    predict_verdicts,
)
from .dataio import (
    QEDataset,
    Sentence,
    emit_explanations,
    load_dataset,
    record_from_verdicts,
    write_predictions,
)
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    InvalidInputError,
    PerturbQEError,
)
from .evaluation import confusion, logprob_predict, mcc, targeted_scores
from .mt import (
    HttpBackend,
    MockBackend,
    SubprocessBackend,
    TranslationBackend,
    TranslationCache,
    cache_key,
    default_cache_dir,
    load_logprobs,
    translate_batch,
    verify_backend_determinism,
    TranslationRecord,
)
from .perturbation import (
    PerturbationSet,
    RemoteMaskedLMProvider,
    ReplacementProvider,
    StaticLexiconProvider,
    TokenizedSentence,
    generate_replacements,
    select_targets,
)
from .textnorm import normalize_token

logger = logging.getLogger("perturbqe")

PLACEHOLDER = "<English_input>"


@dataclass(frozen=True)
class BackendSpec:
    kind: str  # http | subprocess | mock
    backend_id: str
    endpoint: Optional[str] = None
    command: Optional[tuple[str, ...]] = None
    rules_path: Optional[str] = None
    prompt_template: Optional[str] = None
    timeout: float = 120.0
    call_log: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ("http", "subprocess", "mock"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError("http backend needs an endpoint")
        if self.kind == "subprocess" and not self.command:
            raise ConfigError("subprocess backend needs a command")
        if self.kind == "mock" and not self.rules_path:
            raise ConfigError("mock backend needs a rules file")
        if self.prompt_template is not None and PLACEHOLDER not in self.prompt_template:
            raise ConfigError(f"prompt template must contain {PLACEHOLDER!r}")


@dataclass(frozen=True)
class ProviderSpec:
    kind: str  # remote | lexicon
    endpoint: Optional[str] = None
    fixture_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ("remote", "lexicon"):
            raise ConfigError(f"unknown provider kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigError("remote provider needs an endpoint")
        if self.kind == "lexicon" and not self.fixture_path:
            raise ConfigError("lexicon provider needs a fixture path")


@dataclass(frozen=True)
class RunConfig:
    src_path: str
    mt_path: str
    backend: BackendSpec
    provider: ProviderSpec
    hyperparameters: Hyperparameters = field(default_factory=Hyperparameters)
    tags_path: Optional[str] = None
    mask_path: Optional[str] = None
    pos_path: Optional[str] = None
    cache_dir: Optional[str] = None
    output_dir: str = "qe-out"
    batch_size: int = 16
    max_in_flight: int = 2
    provider_max_in_flight: int = 1
    fold_case: bool = False
    skip_errors: bool = False
    verify_determinism: bool = True
    logprob_path: Optional[str] = None
    logprob_threshold_log2: float = math.log2(0.45)

    def to_dict(self) -> dict:
        return {
            "dataset": {
                "src": self.src_path,
                "mt": self.mt_path,
                "tags": self.tags_path,
                "mask": self.mask_path,
                "pos": self.pos_path,
            },
            "backend": {
                "kind": self.backend.kind,
                "backend_id": self.backend.backend_id,
                "endpoint": self.backend.endpoint,
                "command": list(self.backend.command) if self.backend.command else None,
                "rules": self.backend.rules_path,
                "prompt_template": self.backend.prompt_template,
                "timeout": self.backend.timeout,
                "call_log": self.backend.call_log,
            },
            "provider": {
                "kind": self.provider.kind,
                "endpoint": self.provider.endpoint,
                "fixture": self.provider.fixture_path,
            },
            "hyperparameters": self.hyperparameters.to_dict(),
            "cache_dir": self.cache_dir,
            "output_dir": self.output_dir,
            "batch_size": self.batch_size,
            "max_in_flight": self.max_in_flight,
            "provider_max_in_flight": self.provider_max_in_flight,
            "fold_case": self.fold_case,
            "skip_errors": self.skip_errors,
            "verify_determinism": self.verify_determinism,
            "logprob_file": self.logprob_path,
            "logprob_threshold_log2": self.logprob_threshold_log2,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        try:
            dataset = data["dataset"]
            backend = data["backend"]
            provider = data["provider"]
            command = backend.get("command")
            hp_data = data.get("hyperparameters", {})
            hp = Hyperparameters.from_dict(hp_data)
            return cls(
                src_path=dataset["src"],
                mt_path=dataset["mt"],
                tags_path=dataset.get("tags"),
                mask_path=dataset.get("mask"),
                pos_path=dataset.get("pos"),
                backend=BackendSpec(
                    kind=backend["kind"],
                    backend_id=backend.get("backend_id", backend["kind"]),
                    endpoint=backend.get("endpoint"),
                    command=tuple(command) if command else None,
                    rules_path=backend.get("rules"),
                    prompt_template=backend.get("prompt_template"),
                    timeout=float(backend.get("timeout", 120.0)),
                    call_log=backend.get("call_log"),
                ),
                provider=ProviderSpec(
                    kind=provider["kind"],
                    endpoint=provider.get("endpoint"),
                    fixture_path=provider.get("fixture"),
                ),
                hyperparameters=hp,
                cache_dir=data.get("cache_dir"),
                output_dir=data.get("output_dir", "qe-out"),
                batch_size=int(data.get("batch_size", 16)),
                max_in_flight=int(data.get("max_in_flight", 2)),
                provider_max_in_flight=int(data.get("provider_max_in_flight", 1)),
                fold_case=bool(data.get("fold_case", False)),
                skip_errors=bool(data.get("skip_errors", False)),
                verify_determinism=bool(data.get("verify_determinism", True)),
                logprob_path=data.get("logprob_file"),
                logprob_threshold_log2=float(
                    data.get("logprob_threshold_log2", math.log2(0.45))
                ),
            )
        except (KeyError, TypeError, ValueError, InvalidInputError) as exc:
            raise ConfigError(f"bad run config: {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def validate_paths(self) -> None:
        required = [("src", self.src_path), ("mt", self.mt_path)]
        optional = [
            ("tags", self.tags_path),
            ("mask", self.mask_path),
            ("pos", self.pos_path),
            ("logprob_file", self.logprob_path),
            ("provider fixture", self.provider.fixture_path),
            ("backend rules", self.backend.rules_path),
        ]
        for name, path in required:
            if not path or not Path(path).exists():
                raise ConfigError(f"{name} file not found: {path}")
        for name, path in optional:
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{name} file not found: {path}")

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_backend(config: RunConfig) -> TranslationBackend:
    spec = config.backend
    if spec.kind == "http":
        return HttpBackend(spec.endpoint, spec.backend_id, timeout=spec.timeout)
    if spec.kind == "subprocess":
        return SubprocessBackend(
            spec.command,
            spec.backend_id,
            prompt_template=spec.prompt_template,
            timeout=spec.timeout,
        )
    return MockBackend.from_rules_file(
        spec.rules_path, backend_id=spec.backend_id, call_log=spec.call_log
    )


def build_provider(config: RunConfig) -> ReplacementProvider:
    spec = config.provider
    provider_id = config.hyperparameters.provider_id
    if spec.kind == "remote":
        return RemoteMaskedLMProvider(spec.endpoint, provider_id=provider_id)
    return StaticLexiconProvider(spec.fixture_path, provider_id=provider_id)


def open_cache(config: RunConfig) -> TranslationCache:
    directory = Path(config.cache_dir) if config.cache_dir else default_cache_dir()
    return TranslationCache(directory)


# ---------------------------------------------------------------------------
# In-memory stage results


@dataclass
class SentencePerturbations:
    sentence: TokenizedSentence
    sets: list[PerturbationSet]
    skipped: bool = False
    error: Optional[str] = None


@dataclass
class SentenceTables:
    sentence_id: str
    ref_tokens: tuple[str, ...]
    #: (source index, replacements, aligned variants) per kept row
    rows: list[tuple[int, tuple[str, ...], list[AlignedVariant]]]
    skipped: bool = False


def _norm(token: str, config: RunConfig) -> str:
    return normalize_token(token, fold_case=config.fold_case)


def _tokenized_sentence(sentence: Sentence, config: RunConfig) -> TokenizedSentence:
    tags = sentence.pos_tags
    if tags is None and config.hyperparameters.target_mode is TargetMode.CONTENT_WORDS:
        from .postag import tag_tokens

        tags = tuple(tag_tokens(list(sentence.source_tokens)))
    return TokenizedSentence(
        sentence_id=sentence.sentence_id,
        tokens=tuple(sentence.source_tokens),
        tags=tags,
    )


def stage_perturb(
    dataset: QEDataset,
    config: RunConfig,
    provider: Optional[ReplacementProvider] = None,
) -> list[SentencePerturbations]:
    """Select targets and generate replacement variants for every sentence."""
    provider = provider or build_provider(config)
    hp = config.hyperparameters
    out: list[SentencePerturbations] = []
    for sentence in dataset:
        try:
            ts = _tokenized_sentence(sentence, config)
            targets = select_targets(ts, hp.target_mode)

            def one(position: int) -> PerturbationSet:
                return generate_replacements(ts, position, hp.num_replacements, provider)

            if config.provider_max_in_flight > 1 and len(targets) > 1:
                with ThreadPoolExecutor(
                    max_workers=config.provider_max_in_flight
                ) as pool:
                    psets = list(pool.map(one, targets))
            else:
                psets = [one(p) for p in targets]
            kept = []
            for pset in psets:
                if len(pset) == 0:
                    logger.info(
                        "sentence %s: no usable replacements for position %d",
                        sentence.sentence_id,
                        pset.source_index,
                    )
                    continue
                kept.append(pset)
            out.append(SentencePerturbations(sentence=ts, sets=kept))
        except PerturbQEError as exc:
            if not config.skip_errors:
                raise
            logger.warning("skipping sentence %s: %s", sentence.sentence_id, exc)
            out.append(
                SentencePerturbations(
                    sentence=TokenizedSentence(
                        sentence_id=sentence.sentence_id,
                        tokens=tuple(sentence.source_tokens),
                    ),
                    sets=[],
                    skipped=True,
                    error=str(exc),
                )
            )
    return out


def _sentence_texts(sp: SentencePerturbations) -> list[str]:
    texts: list[str] = []
    seen: set[str] = set()
    for pset in sp.sets:
        for variant in pset.variants:
            text = " ".join(variant)
            if text not in seen:
                seen.add(text)
                texts.append(text)
    return texts


def stage_translate(
    perturbations: Sequence[SentencePerturbations],
    config: RunConfig,
    backend: Optional[TranslationBackend] = None,
    cache: Optional[TranslationCache] = None,
) -> dict[str, TranslationRecord]:
    """Translate every variant sentence, cache-first.

    Returns a map from variant text to its translation record. The original
    translation comes from the dataset's MT side, not from the backend. In
    fail-soft mode sentences are translated one by one so a backend failure
    only skips the sentence that caused it.
    """
    backend = backend or build_backend(config)
    cache = cache or open_cache(config)
    all_texts: list[str] = []
    seen: set[str] = set()
    for sp in perturbations:
        if sp.skipped:
            continue
        for text in _sentence_texts(sp):
            if text not in seen:
                seen.add(text)
                all_texts.append(text)
    if config.verify_determinism:
        probe = next(
            (
                t
                for t in all_texts
                if cache.get(cache_key(backend.backend_id, t)) is None
            ),
            None,
        )
        if probe is not None:
            try:
                verify_backend_determinism(backend, probe)
            except BackendError:
                if not config.skip_errors:
                    raise
                logger.warning("determinism probe failed; continuing fail-soft")

    out: dict[str, TranslationRecord] = {}
    if config.skip_errors:
        for sp in perturbations:
            if sp.skipped:
                continue
            try:
                records = translate_batch(
                    _sentence_texts(sp),
                    backend,
                    cache,
                    batch_size=config.batch_size,
                    max_in_flight=config.max_in_flight,
                )
            except BackendError as exc:
                logger.warning(
                    "skipping sentence %s: %s", sp.sentence.sentence_id, exc
                )
                sp.skipped = True
                sp.error = str(exc)
                continue
            out.update({record.source_text: record for record in records})
    else:
        records = translate_batch(
            all_texts,
            backend,
            cache,
            batch_size=config.batch_size,
            max_in_flight=config.max_in_flight,
        )
        out.update({record.source_text: record for record in records})
    return out


def stage_align(
    dataset: QEDataset,
    perturbations: Sequence[SentencePerturbations],
    translations: dict[str, TranslationRecord],
    config: RunConfig,
    hp: Optional[Hyperparameters] = None,
) -> list[SentenceTables]:
    """Align every perturbed translation to the original and project it."""
    hp = hp or config.hyperparameters
    aligner = get_aligner(hp.aligner.value)
    by_id = {s.sentence_id: s for s in dataset}
    out = []
    for sp in perturbations:
        sentence = by_id[sp.sentence.sentence_id]
        ref = tuple(_norm(t, config) for t in sentence.mt_tokens)
        if sp.skipped:
            out.append(
                SentenceTables(
                    sentence_id=sentence.sentence_id,
                    ref_tokens=ref,
                    rows=[],
                    skipped=True,
                )
            )
            continue
        rows = []
        for pset in sp.sets:
            variants = []
            for variant_tokens in pset.variants:
                record = translations[" ".join(variant_tokens)]
                hyp = [_norm(t, config) for t in record.target_tokens]
                alignment = aligner(ref, hyp)
                variants.append(project(alignment, hyp, len(ref)))
            rows.append((pset.source_index, pset.replacements, variants))
        out.append(
            SentenceTables(sentence_id=sentence.sentence_id, ref_tokens=ref, rows=rows)
        )
    return out


def stage_predict(
    tables: Sequence[SentenceTables],
    hp: Hyperparameters,
) -> tuple[list[list[WordVerdict]], list[list[str]]]:
    """Classify consistency and predict per-word verdicts."""
    verdicts_out: list[list[WordVerdict]] = []
    labels_out: list[list[str]] = []
    for st in tables:
        if st.skipped:
            verdicts_out.append([])
            labels_out.append([])
            continue
        aligned = {src: variants for src, _, variants in st.rows}
        matrix = build_consistency_matrix(
            st.ref_tokens, aligned, hp, sentence_id=st.sentence_id
        )
        verdicts = predict_verdicts(matrix, hp.influence_threshold)
        verdicts_out.append(verdicts)
        labels_out.append([v.label.value for v in verdicts])
    return verdicts_out, labels_out


# ---------------------------------------------------------------------------
# Artifact (de)serialization


def write_perturbations(
    perturbations: Sequence[SentencePerturbations], path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sp in perturbations:
            fh.write(
                json.dumps(
                    {
                        "sentence_id": sp.sentence.sentence_id,
                        "tokens": list(sp.sentence.tokens),
                        "tags": list(sp.sentence.tags) if sp.sentence.tags else None,
                        "skipped": sp.skipped,
                        "error": sp.error,
                        "sets": [
                            {
                                "source_index": pset.source_index,
                                "replacements": list(pset.replacements),
                            }
                            for pset in sp.sets
                        ],
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def read_perturbations(path: str | Path) -> list[SentencePerturbations]:
    out = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for line in lines:
        if not line.strip():
            continue
        data = json.loads(line)
        tokens = tuple(data["tokens"])
        ts = TokenizedSentence(
            sentence_id=data["sentence_id"],
            tokens=tokens,
            tags=tuple(data["tags"]) if data.get("tags") else None,
        )
        sets = []
        for entry in data["sets"]:
            position = entry["source_index"]
            replacements = tuple(entry["replacements"])
            variants = tuple(
                tokens[:position] + (rep,) + tokens[position + 1 :]
                for rep in replacements
            )
            sets.append(
                PerturbationSet(
                    source_index=position, replacements=replacements, variants=variants
                )
            )
        out.append(
            SentencePerturbations(
                sentence=ts,
                sets=sets,
                skipped=data.get("skipped", False),
                error=data.get("error"),
            )
        )
    return out


def write_translations(
    perturbations: Sequence[SentencePerturbations],
    translations: dict[str, TranslationRecord],
    path: str | Path,
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sp in perturbations:
            variants = []
            if not sp.skipped:
                for pset in sp.sets:
                    for replacement, variant in zip(pset.replacements, pset.variants):
                        record = translations[" ".join(variant)]
                        variants.append(
                            {
                                "source_index": pset.source_index,
                                "replacement": replacement,
                                "source_text": record.source_text,
                                "translation": record.translation_text,
                                "tokens": list(record.target_tokens),
                                "cache_key": record.cache_key,
                            }
                        )
            fh.write(
                json.dumps(
                    {
                        "sentence_id": sp.sentence.sentence_id,
                        "skipped": sp.skipped,
                        "error": sp.error,
                        "variants": variants,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def read_translations(
    path: str | Path, backend_id: str = ""
) -> tuple[dict[str, TranslationRecord], set[str]]:
    """Rebuild the variant-text-to-record map plus the set of sentence ids
    skipped during translation."""
    records: dict[str, TranslationRecord] = {}
    skipped: set[str] = set()
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for line in lines:
        if not line.strip():
            continue
        data = json.loads(line)
        if data.get("skipped"):
            skipped.add(data["sentence_id"])
            continue
        for entry in data["variants"]:
            records[entry["source_text"]] = TranslationRecord(
                source_text=entry["source_text"],
                translation_text=entry["translation"],
                target_tokens=tuple(entry["tokens"]),
                token_logprobs=None,
                backend_id=backend_id,
                cache_key=entry["cache_key"],
            )
    return records, skipped


def write_tables(tables: Sequence[SentenceTables], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for st in tables:
            fh.write(
                json.dumps(
                    {
                        "sentence_id": st.sentence_id,
                        "ref_tokens": list(st.ref_tokens),
                        "skipped": st.skipped,
                        "rows": [
                            {
                                "source_index": src,
                                "replacements": list(replacements),
                                "projected": [list(av.projected) for av in variants],
                                "dropped": [av.dropped_hyp_tokens for av in variants],
                            }
                            for src, replacements, variants in st.rows
                        ],
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def read_tables(path: str | Path) -> list[SentenceTables]:
    out = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for line in lines:
        if not line.strip():
            continue
        data = json.loads(line)
        rows = []
        for entry in data["rows"]:
            variants = [
                AlignedVariant(projected=tuple(proj), dropped_hyp_tokens=dropped)
                for proj, dropped in zip(entry["projected"], entry["dropped"])
            ]
            rows.append(
                (entry["source_index"], tuple(entry["replacements"]), variants)
            )
        out.append(
            SentenceTables(
                sentence_id=data["sentence_id"],
                ref_tokens=tuple(data["ref_tokens"]),
                rows=rows,
                skipped=data.get("skipped", False),
            )
        )
    return out


def write_verdicts(
    verdicts: Sequence[Sequence[WordVerdict]],
    sentence_ids: Sequence[str],
    path: str | Path,
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sid, sentence_verdicts in zip(sentence_ids, verdicts):
            fh.write(
                json.dumps(
                    {
                        "sentence_id": sid,
                        "verdicts": [
                            {
                                "target_index": v.target_index,
                                "label": v.label.value,
                                "influence_count": v.influence_count,
                                "influencers": [
                                    {
                                        "source_index": inf.source_index,
                                        "variants": [[val, c] for val, c in inf.variants],
                                    }
                                    for inf in v.influencers
                                ],
                            }
                            for v in sentence_verdicts
                        ],
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def read_verdicts(path: str | Path) -> tuple[list[str], list[list[WordVerdict]]]:
    ids = []
    out = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for line in lines:
        if not line.strip():
            continue
        data = json.loads(line)
        ids.append(data["sentence_id"])
        out.append(
            [
                WordVerdict(
                    target_index=v["target_index"],
                    label=WordLabel(v["label"]),
                    influence_count=v["influence_count"],
                    influencers=tuple(
                        Influencer(
                            source_index=inf["source_index"],
                            variants=tuple((val, c) for val, c in inf["variants"]),
                        )
                        for inf in v["influencers"]
                    ),
                )
                for v in data["verdicts"]
            ]
        )
    return ids, out


# ---------------------------------------------------------------------------
# Whole-run orchestration


@dataclass
class RunArtifacts:
    output_dir: Path

    @property
    def perturbations(self) -> Path:
        return self.output_dir / "perturbations.jsonl"

    @property
    def translations(self) -> Path:
        return self.output_dir / "translations.jsonl"

    @property
    def tables(self) -> Path:
        return self.output_dir / "variant_tables.jsonl"

    @property
    def verdicts(self) -> Path:
        return self.output_dir / "verdicts.jsonl"

    @property
    def predictions(self) -> Path:
        return self.output_dir / "predictions.txt"

    @property
    def explanations_json(self) -> Path:
        return self.output_dir / "explanations.jsonl"

    @property
    def explanations_html(self) -> Path:
        return self.output_dir / "report.html"

    @property
    def metrics(self) -> Path:
        return self.output_dir / "metrics.json"

    @property
    def manifest(self) -> Path:
        return self.output_dir / "manifest.json"

    @property
    def leaderboard(self) -> Path:
        return self.output_dir / "leaderboard.jsonl"

    @property
    def best_config(self) -> Path:
        return self.output_dir / "best_config.json"

    @property
    def baseline_predictions(self) -> Path:
        return self.output_dir / "baseline_predictions.txt"


def load_run_dataset(config: RunConfig) -> QEDataset:
    return load_dataset(
        config.src_path,
        config.mt_path,
        tags=config.tags_path,
        mask=config.mask_path,
        pos=config.pos_path,
    )


def compute_metrics(
    dataset: QEDataset,
    labels: Sequence[Sequence[str]],
    skipped: Sequence[bool],
) -> dict:
    """MCC (and targeted recall/precision when a mask is present), pooled
    over non-skipped sentences."""
    kept_pred = []
    kept_gold = []
    kept_mask = []
    kept_ids = []
    has_mask = all(s.targeted_mask is not None for s in dataset) and len(dataset) > 0
    for sentence, line, skip in zip(dataset, labels, skipped):
        if skip or sentence.gold_tags is None:
            continue
        kept_ids.append(sentence.sentence_id)
        kept_pred.append(list(line))
        kept_gold.append(list(sentence.gold_tags))
        if has_mask:
            kept_mask.append(sentence.targeted_mask)
    counts = confusion(kept_pred, kept_gold, kept_ids)
    out = {
        "scored_sentences": len(kept_pred),
        "scored_tokens": counts.total,
        "confusion": {
            "tp": counts.tp,
            "tn": counts.tn,
            "fp": counts.fp,
            "fn": counts.fn,
        },
        "mcc": mcc(counts),
    }
    if has_mask:
        recall, precision = targeted_scores(kept_pred, kept_mask)
        out["targeted_recall"] = recall
        out["targeted_precision"] = precision
    return out


def run(config: RunConfig) -> RunArtifacts:
    """Execute the whole pipeline and persist every artifact."""
    config.validate_paths()
    artifacts = RunArtifacts(Path(config.output_dir))
    artifacts.output_dir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    def timed(name: str):
        class _Timer:
            def __enter__(self_inner):
                self_inner.start = time.perf_counter()

            def __exit__(self_inner, *exc):
                timings[name] = round(time.perf_counter() - self_inner.start, 6)

        return _Timer()

    dataset = load_run_dataset(config)
    backend = build_backend(config)
    cache = open_cache(config)

    with timed("perturb"):
        perturbations = stage_perturb(dataset, config)
        write_perturbations(perturbations, artifacts.perturbations)
    with timed("translate"):
        translations = stage_translate(perturbations, config, backend, cache)
        write_translations(perturbations, translations, artifacts.translations)
    with timed("align"):
        tables = stage_align(dataset, perturbations, translations, config)
        write_tables(tables, artifacts.tables)
    with timed("predict"):
        verdicts, labels = stage_predict(tables, config.hyperparameters)
        write_verdicts(verdicts, [st.sentence_id for st in tables], artifacts.verdicts)
        write_predictions(labels, artifacts.predictions)
    skipped = [st.skipped for st in tables]
    with timed("explain"):
        records = [
            record_from_verdicts(
                sentence.sentence_id,
                [_norm(t, config) for t in sentence.source_tokens],
                [_norm(t, config) for t in sentence.mt_tokens],
                sentence_verdicts,
            )
            for sentence, sentence_verdicts, skip in zip(dataset, verdicts, skipped)
            if not skip
        ]
        emit_explanations(records, "json", artifacts.explanations_json)
        emit_explanations(records, "html", artifacts.explanations_html)
    metrics: Optional[dict] = None
    if dataset.has_gold:
        with timed("evaluate"):
            metrics = compute_metrics(dataset, labels, skipped)
            with open(artifacts.metrics, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(metrics, fh, ensure_ascii=False, indent=1, sort_keys=True)
                fh.write("\n")

    manifest = {
        "config_sha256": config.config_hash(),
        "package_version": __version__,
        "sentences": len(dataset),
        "skipped_sentences": [
            st.sentence_id for st in tables if st.skipped
        ],
        "backend_calls": getattr(backend, "calls", None),
        "stage_seconds": timings,
        "mcc": metrics["mcc"] if metrics else None,
    }
    with open(artifacts.manifest, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=1, sort_keys=True)
        fh.write("\n")
    return artifacts


def run_baseline_logprob(config: RunConfig) -> RunArtifacts:
    """Label tokens by the backend's own word log probabilities."""
    config.validate_paths()
    if not config.logprob_path:
        raise ConfigError("baseline needs a logprob_file in the config")
    artifacts = RunArtifacts(Path(config.output_dir))
    artifacts.output_dir.mkdir(parents=True, exist_ok=True)
    dataset = load_run_dataset(config)
    expected = [(s.sentence_id, len(s.mt_tokens)) for s in dataset]
    logprobs = load_logprobs(config.logprob_path, expected)
    labels = [
        logprob_predict(logprobs[s.sentence_id], config.logprob_threshold_log2)
        for s in dataset
    ]
    write_predictions(labels, artifacts.baseline_predictions)
    if dataset.has_gold:
        metrics = compute_metrics(dataset, labels, [False] * len(dataset))
        with open(
            artifacts.output_dir / "baseline_metrics.json", "w", encoding="utf-8"
        ) as fh:
            json.dump(metrics, fh, ensure_ascii=False, indent=1, sort_keys=True)
            fh.write("\n")
    return artifacts


# ---------------------------------------------------------------------------
# Stage runner for hyperparameter tuning


class PipelineRunner:
    """Memoized stage executor backing grid search.

    Perturbation+translation artifacts are shared across configs that agree
    on (target_mode, num_replacements); alignment additionally keys on the
    aligner; per-column influence counts additionally key on the two
    consistency thresholds. Threshold-only sweeps therefore reuse cached
    variant tables and never touch the provider or the MT backend.
    """

    def __init__(self, dataset: QEDataset, config: RunConfig) -> None:
        self.dataset = dataset
        self.config = config
        self.backend = build_backend(config)
        self.cache = open_cache(config)
        self.provider = build_provider(config)
        self._perturbations: dict = {}
        self._tables: dict = {}
        self._counts: dict = {}

    def gold_labels(self) -> list[list[str]]:
        return self.dataset.gold_labels()

    def _perturbation_stage(self, hp: Hyperparameters):
        key = (hp.target_mode, hp.num_replacements)
        if key not in self._perturbations:
            config = replace(
                self.config,
                hyperparameters=replace(
                    self.config.hyperparameters,
                    target_mode=hp.target_mode,
                    num_replacements=hp.num_replacements,
                ),
            )
            perturbations = stage_perturb(self.dataset, config, self.provider)
            translations = stage_translate(
                perturbations, config, self.backend, self.cache
            )
            self._perturbations[key] = (config, perturbations, translations)
        return self._perturbations[key]

    def tables(self, hp: Hyperparameters) -> list[SentenceTables]:
        key = (hp.target_mode, hp.num_replacements, hp.aligner)
        if key not in self._tables:
            config, perturbations, translations = self._perturbation_stage(hp)
            self._tables[key] = stage_align(
                self.dataset, perturbations, translations, config, hp
            )
        return self._tables[key]

    def influence_counts(self, hp: Hyperparameters) -> list[list[int]]:
        if hp.provider_id != self.config.hyperparameters.provider_id:
            raise ConfigError(
                "grid provider_id values must match the configured provider "
                f"({self.config.hyperparameters.provider_id!r})"
            )
        key = (
            hp.target_mode,
            hp.num_replacements,
            hp.aligner,
            hp.consistency_threshold,
            hp.direct_outcome_threshold,
        )
        if key not in self._counts:
            tables = self.tables(hp)
            per_sentence = []
            for st in tables:
                if st.skipped:
                    per_sentence.append([])
                    continue
                aligned = {src: variants for src, _, variants in st.rows}
                matrix = build_consistency_matrix(
                    st.ref_tokens, aligned, hp, sentence_id=st.sentence_id
                )
                counts = [0] * len(matrix.cols)
                for i in range(len(matrix.rows)):
                    for j in range(len(matrix.cols)):
                        if matrix.cells[i][j] is ConsistencyLabel.INCONSISTENT:
                            counts[j] += 1
                per_sentence.append(counts)
            self._counts[key] = per_sentence
        return self._counts[key]
