"""Vector diffusion maps with landmark acceleration."""

__version__ = "0.1.0"

from .config import ExperimentConfig, build_config, parse_toml, validate_config
from .connections import (
    FrameField,
    align_connection,
    align_connections,
    build_connection_field,
    frame_field,
    local_pca_frame,
    local_pca_frame_knn,
    orthogonal_polar,
)
from .containers import read_container, write_container
from .kernels import AffinityMatrix, alpha_normalize, gaussian_affinity, row_degrees
from .lavdm import (
    LandmarkPipelineState,
    LandmarkSpectralResult,
    assemble_landmark,
    dense_markov_oracle,
    effective_transport,
    landmark_degrees,
    landmark_state,
    landmark_svd,
    lavdm_embed,
)
from .experiments import RunResult, run_experiment
from .manifolds import (
    PointCloud,
    SurfaceChart,
    distorted_sphere,
    distorted_sphere_point,
    ground_truth_frame,
    klein_bottle,
    klein_point,
    read_cloud_csv,
    sample_near,
    sample_surface,
    sphere,
    sphere_point,
    write_cloud_csv,
)
from .metrics import (
    EigenComparison,
    PointwiseFields,
    compare_eigenpair,
    match_eigenvectors,
    median_mad,
    pointwise_fields,
)
from .transport import (
    SphereCurve,
    SphericalTangentVector,
    double_transport_error,
    great_circle_arc,
    sphere_transport_ode,
    transport_components,
)
from .vdm import (
    BlockMatrix,
    Embedding,
    SpectralResult,
    assemble_vdm,
    vdm_embed,
    vdm_spectrum,
)
