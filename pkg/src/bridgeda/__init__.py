"""Domain adaptation through intermediate bridge domains.

A numpy toolkit for studying adaptation chains source -> bridge -> target:
a scratch reverse-mode tensor, the adversarial/prototype/disentanglement
loss family, divergence estimators that vet a bridge choice, synthetic
multi-domain benchmarks, end-to-end trainers, and a small CLI.
"""

from .config import (
    DataSection,
    ReportSection,
    RunConfig,
    cfgan_config,
    dump_run_config,
    load_run_config,
    pada_config,
    parse_data_section,
    parse_run_config,
    serialize_run_config,
)
from .divergence import (
    DistanceReport,
    a_distance_from_error,
    proxy_a_distance,
    sliced_wasserstein,
    validate_bridge,
)
from .errors import (
    ConfigError,
    ContractError,
    DataFormatError,
    DimensionError,
    EstimationError,
    LabelError,
    NumericDomainError,
    ToolkitError,
    TrainingError,
    ValidationError,
)
from .losses import (
    CfganDiscriminators,
    CfganGenerators,
    CfganLosses,
    KernelSpec,
    MineEstimator,
    cfgan_objective,
    class_level_discrepancy,
    complete_classes,
    cross_entropy,
    cycle_consistency,
    domain_identifier_loss,
    entropy_confusion_loss,
    fit_mine,
    gan_pair_losses,
    median_heuristic,
    mine_estimate,
    mmd_squared,
    reconstruction_loss,
)
from .nn import Adam, Mlp, MlpSpec
from .pipelines import (
    CfganConfig,
    CfganModel,
    MetricRecord,
    ModelBundle,
    PadaConfig,
    Translator,
    build_bundle,
    build_cfgan,
    evaluate,
    load_model,
    read_metrics,
    save_model,
    train_cfgan,
    train_pada,
    train_source_only,
    write_metrics,
)
from .plots import emit_plot, project_2d
from .prototypes import (
    PrototypeSet,
    PseudoLabelBatch,
    compute_prototypes,
    ema_update,
    proto_classify,
    pseudo_label,
)
from .rng import stream
from .synthdata import (
    DomainDataset,
    DomainTriple,
    PointFamily,
    TranslationTaskSpec,
    TripleSpec,
    gen_domain_triple,
    gen_translation_task,
    read_dataset,
    read_dataset_groups,
    write_dataset,
    write_datasets,
)
from .tensor import Tensor, backward, grad_check

__version__ = "0.1.0"
