"""Sampled-manifold experiments: heat-kernel Laplacians, drift, attention steps."""
from attnlab.manifold.checks import (
    DecayTrajectory,
    GraphLaplacian,
    RegressionReport,
    ZerothOrderReport,
    attention_limit_check,
    attention_step,
    build_graph_laplacian,
    clustering_decay,
    drift_deviation_check,
    feature_variance,
    laplacian_convergence_check,
    zeroth_order_check,
)
from attnlab.manifold.geometry import (
    DensitySpec,
    FieldSpec,
    PointCloud,
    attention_operator,
    sample,
    sample_circle,
    sample_sphere,
)
from attnlab.manifold.pde import (
    ArgminResult,
    argmin_pseudo_metric,
    conformal_identity_check,
    pde_euler_reference,
)

__all__ = [
    "ArgminResult",
    "DecayTrajectory",
    "DensitySpec",
    "FieldSpec",
    "GraphLaplacian",
    "PointCloud",
    "RegressionReport",
    "ZerothOrderReport",
    "argmin_pseudo_metric",
    "attention_limit_check",
    "attention_operator",
    "attention_step",
    "build_graph_laplacian",
    "clustering_decay",
    "conformal_identity_check",
    "drift_deviation_check",
    "feature_variance",
    "laplacian_convergence_check",
    "pde_euler_reference",
    "sample",
    "sample_circle",
    "sample_sphere",
    "zeroth_order_check",
]
