"""Numerical workbench for Hilbert geometry on convex planar domains and
convex projective structures on surfaces.

The layers build on each other roughly in this order: projective linear
algebra, convex domains, the Hilbert metric, holonomy representations and
their deformations, length spectra and entropies, boundary measures and
geodesic currents, and the Monge-Ampere / Blaschke metric comparison.
"""

from .errors import (
    DegenerateImage,
    EmptyIntersection,
    HilbertiaError,
    InsufficientData,
    MismatchedBoundary,
    NonConvexDomain,
    NonInvertible,
    NotConverged,
    NotHyperbolic,
    NotInterior,
    NotOnBoundary,
    NotPositiveDefinite,
    OriginNotInterior,
    TooCloseToBoundary,
    TooFewPoints,
    TooShort,
)
from .projective import (
    ProjMap,
    ProjPoint,
    SpectralData,
    act,
    classify,
    dual_map,
    log_middle_eigenvalue,
    middle_eigen_parameter,
    translation_length,
)
from .domains import (
    Chord,
    ConvexDomain,
    Ellipse,
    OrbitHull,
    Polygon,
    chord_endpoints,
    clean_hull,
    contains,
    domain_from_json,
    hausdorff_distance,
    orbit_hull,
    polar_dual,
    square,
)
from .metric import (
    DEFAULT_SEED,
    FinslerSample,
    VolumeEstimate,
    busemann_function,
    busemann_volume,
    distance,
    finsler_norm,
    finsler_sample,
    unit_ball_volume,
)
from .holonomy import (
    HolonomyRep,
    Word,
    bulge_deform,
    dual_structure,
    embed_sl2,
    evaluate,
    fuchsian_pants,
    fuchsian_punctured_torus,
    twist_deform,
)
from .dynamics import (
    BoundaryMeasure,
    ConjClass,
    EntropyEstimate,
    GeodesicCurrent,
    LengthSpectrum,
    bowen_margulis_current,
    busemann_cocycle,
    conjugacy_classes,
    critical_exponent,
    current_from_class,
    entropy_estimate,
    intersection_number,
    length_spectrum,
    patterson_sullivan,
)
from .affine import (
    BlaschkeData,
    ComparisonReport,
    GridSolution,
    blaschke_metric,
    compare_hilbert_affine,
    solve_monge_ampere,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_SEED",
    "BlaschkeData",
    "BoundaryMeasure",
    "Chord",
    "ComparisonReport",
    "ConjClass",
    "ConvexDomain",
    "DegenerateImage",
    "Ellipse",
    "EmptyIntersection",
    "EntropyEstimate",
    "FinslerSample",
    "GeodesicCurrent",
    "GridSolution",
    "HilbertiaError",
    "HolonomyRep",
    "InsufficientData",
    "LengthSpectrum",
    "MismatchedBoundary",
    "NonConvexDomain",
    "NonInvertible",
    "NotConverged",
    "NotHyperbolic",
    "NotInterior",
    "NotOnBoundary",
    "NotPositiveDefinite",
    "OrbitHull",
    "OriginNotInterior",
    "Polygon",
    "ProjMap",
    "ProjPoint",
    "SpectralData",
    "TooCloseToBoundary",
    "TooFewPoints",
    "TooShort",
    "VolumeEstimate",
    "Word",
    "act",
    "blaschke_metric",
    "bowen_margulis_current",
    "bulge_deform",
    "busemann_cocycle",
    "busemann_function",
    "busemann_volume",
    "chord_endpoints",
    "classify",
    "clean_hull",
    "compare_hilbert_affine",
    "conjugacy_classes",
    "contains",
    "critical_exponent",
    "current_from_class",
    "distance",
    "domain_from_json",
    "dual_map",
    "dual_structure",
    "embed_sl2",
    "entropy_estimate",
    "evaluate",
    "finsler_norm",
    "finsler_sample",
    "fuchsian_pants",
    "fuchsian_punctured_torus",
    "hausdorff_distance",
    "intersection_number",
    "length_spectrum",
    "log_middle_eigenvalue",
    "middle_eigen_parameter",
    "orbit_hull",
    "patterson_sullivan",
    "polar_dual",
    "solve_monge_ampere",
    "square",
    "translation_length",
    "twist_deform",
    "unit_ball_volume",
    "__version__",
]
