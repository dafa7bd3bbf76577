import pytest

from perturbqe.core import AlignerKind, Hyperparameters, TargetMode
from perturbqe.pipeline import BackendSpec, ProviderSpec, RunConfig
from perturbqe.synthetic import PlantedCorpus, build_planted_corpus

#: thresholds matched to the planted corpus construction: trigger rows keep
#: the original choice on at most 2/3 of replacements (never consistent at
#: c=0.75) and show at most 2 distinct values (never a direct outcome at
#: p=0.85)
PLANTED_HP = Hyperparameters(
    num_replacements=6,
    consistency_threshold=0.75,
    direct_outcome_threshold=0.85,
    influence_threshold=2,
    target_mode=TargetMode.ALL_TOKENS,
    aligner=AlignerKind.TERCOM,
    provider_id="lexicon",
)


def planted_config(
    corpus: PlantedCorpus,
    cache_dir,
    output_dir,
    *,
    hp: Hyperparameters = PLANTED_HP,
    call_log=None,
    backend_id: str = "mock",
) -> RunConfig:
    return RunConfig(
        src_path=str(corpus.src_path),
        mt_path=str(corpus.mt_path),
        tags_path=str(corpus.tags_path),
        mask_path=str(corpus.mask_path),
        backend=BackendSpec(
            kind="mock",
            backend_id=backend_id,
            rules_path=str(corpus.rules_path),
            call_log=str(call_log) if call_log else None,
        ),
        provider=ProviderSpec(kind="lexicon", fixture_path=str(corpus.lexicon_path)),
        hyperparameters=hp,
        cache_dir=str(cache_dir),
        output_dir=str(output_dir),
        max_in_flight=1,  # in-process mock: threads only add GIL churn
    )


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> PlantedCorpus:
    """24 sentences, enough to carry every trigger-set size at least once."""
    return build_planted_corpus(
        tmp_path_factory.mktemp("small-corpus"),
        n_sentences=24,
        sentence_length=8,
        n_replacements=6,
        influence_threshold=2,
        seed=7,
    )
