"""recourse-forge: fast counterfactual explanations for tabular black-box
classifiers via line search along hyperplanes fit in an autoencoder
latent space."""

from .errors import (
    ArtifactError,
    ExplainFailure,
    ExplainRequestError,
    FitError,
    IngestError,
    RecourseError,
    SchemaError,
    TrainingError,
)
from .explain import (
    ExplainRequest,
    ExplainResult,
    explain,
    explain_batch,
    explain_constrained,
    explain_direct,
    explain_sparse,
)
from .metrics import EvalReport, evaluate, evaluate_robustness, proximity
from .neural import (
    Autoencoder,
    BlackBox,
    TrainConfig,
    decode_latent,
    encode_latent,
    predict,
    train_autoencoder,
    train_blackbox,
)
from .surrogate import (
    Hyperplane,
    SurrogateBundle,
    SurrogateConfig,
    build_surrogate,
    fit_lasso,
    fit_linear_svm,
    sample_latent_space,
)
from .tabular import (
    DatasetSchema,
    FeatureSpec,
    RawRow,
    SchemaHints,
    decode,
    encode,
    ingest_csv,
    l0_feature_diff,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "Autoencoder",
    "BlackBox",
    "DatasetSchema",
    "EvalReport",
    "ExplainFailure",
    "ExplainRequest",
    "ExplainRequestError",
    "ExplainResult",
    "FeatureSpec",
    "FitError",
    "Hyperplane",
    "IngestError",
    "RawRow",
    "RecourseError",
    "SchemaError",
    "SchemaHints",
    "SurrogateBundle",
    "SurrogateConfig",
    "TrainConfig",
    "TrainingError",
    "build_surrogate",
    "decode",
    "decode_latent",
    "encode",
    "encode_latent",
    "evaluate",
    "evaluate_robustness",
    "explain",
    "explain_batch",
    "explain_constrained",
    "explain_direct",
    "explain_sparse",
    "fit_lasso",
    "fit_linear_svm",
    "ingest_csv",
    "l0_feature_diff",
    "predict",
    "proximity",
    "sample_latent_space",
    "train_autoencoder",
    "train_blackbox",
]
