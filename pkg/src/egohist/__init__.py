"""egohist: graph learning via egonet feature-histogram intersection.

A framework-free (numpy) graph network whose convolution scores each
node's egonet feature distribution against learned dictionary/histogram
pairs through the histogram intersection kernel, with all gradients
derived and implemented by hand.
"""

__version__ = "0.1.0"

from .errors import (
    CheckpointError,
    ConfigError,
    DatasetFormatError,
    DatasetIntegrityError,
    DatasetParseError,
    EgohistError,
    NumericError,
    ShapeError,
    StratificationError,
)
from .graphs import (
    CLASSIFICATION,
    REGRESSION,
    Dataset,
    EgonetIndex,
    Graph,
    build_egonets,
    circulant_graph,
    extract_egonets,
    load_fixed_split,
    load_tudataset,
    save_tudataset,
    synthetic_classification_dataset,
    synthetic_regression_dataset,
)
from .layer import (
    HistogramLayer,
    LayerTape,
    Mask,
    histogram_intersection,
    layer_backward,
    layer_forward,
    normalized_similarity,
    soft_histogram,
    unit_rows,
)
from .model import (
    Model,
    ModelConfig,
    ModelTape,
    config_for_dataset,
    load_checkpoint,
    loss,
    loss_grad,
    metric,
    model_backward,
    model_forward,
    save_checkpoint,
)
from .optim import (
    Adam,
    CVResult,
    FoldPlan,
    GridEntry,
    RunRecord,
    TrainConfig,
    TrainSplit,
    ablation_cells,
    cross_validate,
    evaluate,
    expand_grid,
    grid_search,
    holdout_split,
    make_fold_plan,
    reference_grid,
    train,
)
from .interpret import MaskReport, export_masks, importance_summary, mask_importance
from .bench import BenchResult, loglog_slope, run_scaling, total_egonet_membership
