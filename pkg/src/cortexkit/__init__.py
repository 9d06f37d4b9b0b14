"""cortexkit: deterministic connectome analytics.

BOLD time-series augmentation, functional brain-network construction,
graph augmentation, network feature extraction, a cross-validated ML
pipeline, and a multi-site federated-learning simulator — all seeded and
bit-reproducible.
"""

from . import errors
from .features import graph_feature_set, node_feature_table
from .fed import (
    FedConfig,
    SiteShard,
    aggregate,
    local_update,
    make_synthetic_sites,
    pretrain,
    run_federation,
    simsiam_loss,
)
from .graphaug import (
    GraphAugmentSpec,
    apply_graph_augment,
    attr_mask,
    edge_perturb,
    hub_preserving_drop,
    node_drop,
    subgraph_crop,
    weight_dep_edge_removal,
)
from .io import load_graph_csv, load_manifest, load_timeseries_csv, save_graph_csv
from .ml import (
    EvalReport,
    LabeledDataset,
    cross_validate,
    evaluate,
    knn_predict,
    linear_svm_train,
    logistic_train,
    partition_kfold,
    partition_random,
    pca_fit_transform,
)
from .network import (
    BrainGraph,
    ConstructSpec,
    construct,
    hofc,
    lowrank_rep,
    mutual_info,
    partial_corr,
    pearson,
    sparse_rep,
    sparsify,
    spearman,
)
from .rng import SeededRng
from .state import ModelState
from .timeseries import (
    AugmentSpec,
    TimeSeries,
    downsample,
    jitter,
    pretrain_pair,
    random_slice,
    simulate_timeseries,
    upsample,
)

__version__ = "0.1.0"
