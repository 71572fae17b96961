"""Simulation and spectral analysis of 1D sub-critical Gaussian
multiplicative chaos on the unit interval.

Construction goes through the white-noise decomposition of the
log-correlated field: independent stationary level fields are sampled
exactly by circulant embedding, multiplied into unit-mean weights, and the
resulting densities are analyzed through Fourier coefficients, dyadic
martingale decompositions and dimension estimators.
"""

from .estimators import (
    ExponentPlan,
    NoFeasibleExponentsError,
    SlopeFit,
    clt_exponent,
    clt_rescale_profile,
    correlation_dimension,
    decay_exponent_bound,
    decay_slope,
    exponent_margin,
    find_exponents,
    fourier_dimension,
    l2_spectrum_slope,
    power_law_spectrum,
    uniform_bound_probe,
    write_profile_csv,
    write_slope_csv,
)
from .geometry import (
    OverlapQuadrature,
    cumulative_covariance,
    level_covariance,
    level_variance,
    overlap_quadrature,
    region_difference_measure,
)
from .harness import (
    EnsembleResult,
    ExperimentConfig,
    ReplicaRecord,
    export_result,
    load_result,
    merge_results,
    run_ensemble,
    run_replica,
)
from .measure import (
    ChaosDensity,
    chaos_density,
    dyadic_masses,
    frostman_scan,
    holder_moment_probe,
    holder_moment_quadrature,
    interval_mass,
    weight_field,
    weight_moment,
    weight_moment_mc,
    write_density_csv,
)
from .sampler import (
    EmbeddingSpectrum,
    FieldHierarchy,
    GridSpec,
    NotEmbeddableError,
    covariance_sequence,
    embedding_spectrum,
    read_hierarchy,
    sample_hierarchy,
    sample_level,
    sample_level_dense,
    write_hierarchy,
)
from .spectral import (
    DyadicInterval,
    LocalizedVector,
    SeparationComponents,
    SpectrumVector,
    abel_segment_transform,
    dyadic_family,
    fourier_coefficients,
    localized_vector,
    lq_norm,
    martingale_vector,
    product_difference_expansion,
    segment_integral,
    separation_bound,
    write_separation_json,
    write_spectrum_csv,
)

__version__ = "0.1.0"
