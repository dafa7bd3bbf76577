"""Word-level quality estimation for blackbox machine translation.

Source words are perturbed one by one with masked-LM replacements, the
perturbed sentences are re-translated, each perturbed translation is
aligned back onto the original translation, and every target word is
classified by how many source words influence it: words influenced by
strictly more than a threshold number of source words are predicted BAD.
The per-word influencer sets double as explanations.
"""

__version__ = "0.1.0"

from .alignment import (
    AlignedVariant,
    Alignment,
    Delete,
    Insert,
    Match,
    Shift,
    Substitute,
    levenshtein_align,
    project,
    tercom_align,
)
from .core import (
    AlignerKind,
    ConsistencyLabel,
    ConsistencyMatrix,
    Hyperparameters,
    Influencer,
    TargetMode,
    WordLabel,
    WordVerdict,
    build_consistency_matrix,
    classify_cell,
    predict_verdicts,
)
from .dataio import (
    ExplanationRecord,
    QEDataset,
    Sentence,
    emit_explanations,
    load_dataset,
    load_predictions,
    write_predictions,
)
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    InvalidInputError,
    PerturbQEError,
    ProtocolError,
    ProviderError,
    TransientBackendError,
)
from .evaluation import (
    ConfusionCounts,
    confusion,
    grid_search,
    logprob_predict,
    mcc,
    targeted_scores,
)
from .mt import (
    BackendResult,
    HttpBackend,
    MockBackend,
    PlantedRule,
    SentenceTemplate,
    SubprocessBackend,
    TranslationBackend,
    TranslationCache,
    TranslationRecord,
    load_logprobs,
    mock_backend,
    translate_batch,
)
from .perturbation import (
    PerturbationSet,
    RemoteMaskedLMProvider,
    StaticLexiconProvider,
    TokenizedSentence,
    generate_replacements,
    select_targets,
    tag_pos,
)
from .pipeline import PipelineRunner, RunConfig, run
