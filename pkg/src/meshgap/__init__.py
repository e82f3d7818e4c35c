"""Missing-region detection on triangle-mesh pairs via correspondence
round-trip errors."""

from .cice import (
    LabelField,
    ScalarField,
    compute_cice,
    dilate_labels,
    majority_label_filter,
    median_filter,
    threshold_labels,
)
from .correspondence import (
    CorrespondenceMap,
    PredictorSpec,
    compose,
    load_correspondence,
    predict,
    save_correspondence,
)
from .errors import (
    BudgetExhaustedError,
    GeometryError,
    InputError,
    MeshFormatError,
    MeshgapError,
    ValidationError,
)
from .evaluation import (
    BasResult,
    BenchmarkPair,
    SweepReport,
    balanced_accuracy,
    render_report,
    sweep,
    threshold_grid,
)
from .mesh import (
    AdjacencyIndex,
    TriangleMesh,
    adjacency_from_edges,
    build_adjacency,
    load_mesh,
    point_in_mesh,
    points_in_mesh,
    save_mesh,
    signed_volume,
)
from .pipeline import PipelineConfig, classify_pair, vote, write_classification
from .resect import (
    CutBox,
    ResectionResult,
    VolumeSampleCache,
    cut_mesh,
    plan_cuts,
    project_golden_standard,
)

__version__ = "0.1.0"
