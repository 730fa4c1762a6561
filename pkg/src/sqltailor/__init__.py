"""Workload-tailored document retrieval and serving for NL2SQL."""

from .allocation import (
    AllocationObjective,
    ContextAllocation,
    ObjectiveFailure,
    OutOfBoundsError,
    ReparamPoint,
    bayes_optimize,
    reparam_to_tokens,
)
from .bandit import ARM_GENERIC, ARM_SPECIALIZED, BanditState, select_pipeline
from .config import EngineConfig, load_config
from .documents import (
    Document,
    DuplicateTableError,
    RelevanceLabel,
    SchemaCatalog,
    build_hint_documents,
    build_schema_documents,
    label_relevance,
)
from .embedding import (
    ProxySet,
    SyntheticQuestion,
    TrainingSet,
    WeightVector,
    cosine_loss,
    cosine_similarity,
    fit_weights,
    objective,
    optimize_weights,
    tailored_embedding,
)
from .evaluation import (
    DisjointImpossible,
    EvalReport,
    EvalSplit,
    QuestionSqlPair,
    run_eval,
    split_workload,
    topk_recall,
)
from .pipeline import AnswerRecord, BuildInputs, Engine, build_store
from .providers import (
    MockEmbeddingProvider,
    MockGenerativeProvider,
    ProviderUnavailable,
    make_embedding_provider,
    make_generative_provider,
)
from .prompting import PromptAssembly, assemble_prompt, extract_sql
from .retrieval import RetrievalResult, retrieve, retrieve_generic
from .sqlparser import (
    LexError,
    QueryRecord,
    QuerySubcomponents,
    SqlAst,
    canonicalize,
    extract_subcomponents,
    parse_sql,
)
from .store import (
    DocumentStore,
    StoreCorruptError,
    StoreVersionError,
    load_store,
    persist_store,
)
from .tokens import TokenCounter, count_tokens

__version__ = "0.1.0"
