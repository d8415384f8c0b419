"""Event-stream classification with PointNet global features and an
exemplar LCA encoder/decoder."""

__version__ = "0.1.0"

from ._accel import backend  # noqa: E402
from .decoder import (  # noqa: E402
    EvalReport, Prediction, decode_max_activation, decode_max_sum, evaluate, measure_sparsity,
    round_m_hat,
)
from .event_cloud import (  # noqa: E402
    Event, EventStream, PointCloud, SamplingConfig, assess_duration, load_events,
    normalize_cloud, window_and_sample,
)
from .lca import (  # noqa: E402
    ActivationVector, Dictionary, LcaParams, build_dictionary, compute_gramian, driving_input,
    lca_encode, reconstruction_residual, soft_threshold,
)
from .pointnet import PointNetWeights, extract_features, load_weights, random_weights  # noqa: E402
from .workload import (  # noqa: E402
    WorkloadParams, WorkloadReport, energy_estimate, inference_flops_dense,
    inference_flops_sparse, training_flops,
)
