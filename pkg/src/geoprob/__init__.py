"""geoprob: point-process samplers, stabilizing geometric functionals, and
Monte-Carlo verification of their law-of-large-numbers and Gaussian limits."""

__version__ = "0.1.0"

from .rng import RngStream
from .windows import DensityField, Window, make_density, unit_cube, centered_box
from .point_process import (
    Mark,
    MarkLaw,
    PointSet,
    attach_marks,
    read_pointset,
    rescale,
    sample_binomial,
    sample_homogeneous_poisson,
    sample_inhomogeneous_poisson,
    write_pointset,
)

from .geometry import (
    Graph,
    SpatialIndex,
    build_spatial_index,
    delaunay_2d,
    incident_edges,
    knn_brute,
    knn_graph,
    sig_graph,
    voronoi_cells_2d,
    voronoi_graph,
)
from .functionals import (
    AcceptanceVector,
    EdgeWeight,
    WeightedMeasure,
    WeightFunctional,
    add_one_cost,
    birth_growth,
    germ_grain_volume,
    integrate,
    make_functional,
    point_measure,
    rsa_pack,
    total_mass,
    weighted_mass,
    xi_graph,
    xi_rescaled,
)
from .estimators import (
    EstimateReport,
    MeanTable,
    TailCurve,
    VDTable,
    build_mean_table,
    build_vd_table,
    cumulant_stats,
    estimate_D,
    estimate_pair_correlation,
    estimate_pair_integrand,
    estimate_stab_tail,
    estimate_V,
    estimate_xi_mean,
)
from .harness import (
    CLTReport,
    ExperimentConfig,
    TestFunction,
    make_test_function,
    predict_covariance,
    predict_mean,
    predict_variance_binomial,
    predict_variance_poisson,
    run_clt_experiment,
    scaling_check,
)

__all__ = [
    "RngStream",
    "DensityField",
    "Window",
    "make_density",
    "unit_cube",
    "centered_box",
    "Mark",
    "MarkLaw",
    "PointSet",
    "attach_marks",
    "read_pointset",
    "rescale",
    "sample_binomial",
    "sample_homogeneous_poisson",
    "sample_inhomogeneous_poisson",
    "write_pointset",
    "Graph",
    "SpatialIndex",
    "build_spatial_index",
    "delaunay_2d",
    "incident_edges",
    "knn_brute",
    "knn_graph",
    "sig_graph",
    "voronoi_cells_2d",
    "voronoi_graph",
    "AcceptanceVector",
    "EdgeWeight",
    "WeightedMeasure",
    "WeightFunctional",
    "add_one_cost",
    "birth_growth",
    "germ_grain_volume",
    "integrate",
    "make_functional",
    "point_measure",
    "rsa_pack",
    "total_mass",
    "weighted_mass",
    "xi_graph",
    "xi_rescaled",
    "EstimateReport",
    "MeanTable",
    "TailCurve",
    "VDTable",
    "build_mean_table",
    "build_vd_table",
    "cumulant_stats",
    "estimate_D",
    "estimate_pair_correlation",
    "estimate_pair_integrand",
    "estimate_stab_tail",
    "estimate_V",
    "estimate_xi_mean",
    "CLTReport",
    "ExperimentConfig",
    "TestFunction",
    "make_test_function",
    "predict_covariance",
    "predict_mean",
    "predict_variance_binomial",
    "predict_variance_poisson",
    "run_clt_experiment",
    "scaling_check",
]
