"""Metric catalog: one descriptor per supported metric.

The catalog rows double as machine-readable documentation of each metric:
which criterion it scores, the space it operates in, whether it needs a
reference set (binary) or runs on the synthetic set alone (unary), and the
optimization direction used when turning raw values into 0-100 scores.

``direction`` is the published optimization goal; ``score_direction`` is the
direction actually applied during normalization. They differ only where the
published goal is expressed on an inverted scale (t-closeness: the raw
distance shrinks as compliance improves; boundary margin: larger margins mean
safer data).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

CRITERIA = (
    "congruence",
    "coverage",
    "constraint",
    "completeness",
    "compliance",
    "comprehension",
    "consistency",
)

SPACES = (
    "embedding",
    "image",
    "metadata",
    "data-attribute",
    "documentation",
    "quality-metrics",
)

# What input feeds the metric at evaluation time.
SOURCE_EMBEDDING = "embedding"
SOURCE_IMAGE_PAIRS = "image-pairs"
SOURCE_CLASS_PROBS = "class-probs"
SOURCE_TABLE = "table"
SOURCE_MANIFEST = "manifest"
SOURCE_SUBGROUP_METRICS = "subgroup-metrics"


@dataclass(frozen=True)
class MetricDescriptor:
    name: str          # unique identifier, used in configs and reports
    label: str         # catalog display label (not unique across criteria)
    criterion: str
    space: str
    arity: str         # "unary" | "binary"
    direction: str     # "maximize" | "minimize" | "stat-sig"
    image_only: bool
    source: str = SOURCE_EMBEDDING
    score_direction: str = ""   # defaults to `direction`
    computable: bool = True     # False: declaration-only, never computed
    in_catalog: bool = True

    def __post_init__(self):
        if not self.score_direction:
            object.__setattr__(self, "score_direction", self.direction)


def _d(name, label, criterion, space, arity, direction, image_only, **kw):
    return MetricDescriptor(name, label, criterion, space, arity, direction,
                            image_only, **kw)


#: Catalog rows, in canonical order. Tests pin this against a golden table.
CATALOG: tuple[MetricDescriptor, ...] = (
    # congruence
    _d("cosine_similarity", "Cosine Similarity", "congruence",
       "embedding", "binary", "maximize", False),
    _d("earth_movers_distance", "Earth Mover's Distance", "congruence",
       "embedding", "binary", "minimize", False),
    _d("jensen_shannon_divergence", "Jensen-Shannon Divergence", "congruence",
       "embedding", "binary", "minimize", False),
    _d("psnr", "Peak Signal-to-Noise Ratio", "congruence",
       "image", "binary", "maximize", True, source=SOURCE_IMAGE_PAIRS),
    _d("ssim", "Structural Similarity Index", "congruence",
       "image", "binary", "maximize", True, source=SOURCE_IMAGE_PAIRS),
    _d("frechet_distance", "Fréchet Inception Distance", "congruence",
       "embedding", "binary", "minimize", True),
    _d("centroid_distance_congruence", "Distance to Centroid", "congruence",
       "embedding", "binary", "minimize", False),
    _d("precision", "Precision", "congruence",
       "embedding", "binary", "maximize", False),
    # coverage
    _d("inception_score", "Inception Score", "coverage",
       "image", "unary", "maximize", True, source=SOURCE_CLASS_PROBS),
    _d("recall", "Recall", "coverage",
       "embedding", "binary", "maximize", False),
    _d("coverage", "Coverage", "coverage",
       "embedding", "binary", "maximize", False),
    _d("centroid_distance_coverage", "Distance to Centroid", "coverage",
       "embedding", "binary", "maximize", False),
    _d("convex_hull_volume", "Convex Hull Volume", "coverage",
       "embedding", "unary", "maximize", False),
    _d("dpp_score", "Determinantal Point Processes Score", "coverage",
       "embedding", "unary", "maximize", False),
    _d("vendi_score", "Vendi Score", "coverage",
       "embedding", "unary", "maximize", False),
    _d("variance_coverage", "Variance", "coverage",
       "embedding", "unary", "maximize", False),
    _d("entropy_coverage", "Entropy", "coverage",
       "embedding", "unary", "maximize", False),
    _d("rarity_score", "Rarity Score", "coverage",
       "embedding", "binary", "minimize", False),
    _d("cluster_balance", "Clustering-Based Metrics", "coverage",
       "embedding", "unary", "maximize", False),
    # constraint (published space is "embedding"; evaluation runs on the
    # attribute table, where the rule geometry lives)
    _d("nearest_invalid_datapoint", "Nearest Invalid Datapoint", "constraint",
       "embedding", "binary", "minimize", False, source=SOURCE_TABLE,
       score_direction="maximize"),
    _d("constraint_boundary_distance", "Distance to Constraint Boundary",
       "constraint", "embedding", "binary", "minimize", False,
       source=SOURCE_TABLE),
    _d("constraint_violation_rate", "Constraint Violation Rate", "constraint",
       "embedding", "binary", "minimize", False, source=SOURCE_TABLE),
    # completeness
    _d("required_field_proportion", "Proportion of Required Fields",
       "completeness", "metadata", "binary", "maximize", False,
       source=SOURCE_TABLE),
    _d("missing_data_percentage", "Missing Data Percentage", "completeness",
       "metadata", "binary", "minimize", False, source=SOURCE_TABLE),
    # compliance
    _d("differential_privacy_score", "Differential Privacy Score",
       "compliance", "data-attribute", "unary", "minimize", False,
       source=SOURCE_MANIFEST, computable=False),
    _d("k_anonymity", "K-Anonymity Level", "compliance",
       "data-attribute", "unary", "maximize", False, source=SOURCE_TABLE),
    _d("l_diversity", "L-Diversity Score", "compliance",
       "data-attribute", "unary", "maximize", False, source=SOURCE_TABLE),
    _d("t_closeness", "T-Closeness Level", "compliance",
       "data-attribute", "unary", "maximize", False, source=SOURCE_TABLE,
       score_direction="minimize"),
    # comprehension
    _d("documentation_clarity", "Documentation Clarity Score", "comprehension",
       "documentation", "unary", "maximize", False, source=SOURCE_MANIFEST),
    # consistency
    _d("metric_variance", "Variance", "consistency",
       "quality-metrics", "unary", "minimize", False,
       source=SOURCE_SUBGROUP_METRICS),
    _d("max_min_difference", "Maximum-Minimum Difference", "consistency",
       "quality-metrics", "unary", "minimize", False,
       source=SOURCE_SUBGROUP_METRICS),
    _d("anova", "Analysis of Variance", "consistency",
       "quality-metrics", "unary", "stat-sig", False,
       source=SOURCE_SUBGROUP_METRICS),
)

#: Additional computed metrics kept outside the pinned catalog table.
EXTRAS: tuple[MetricDescriptor, ...] = (
    _d("re_identification_risk", "Re-identification Risk", "compliance",
       "embedding", "binary", "minimize", False, in_catalog=False),
)

REGISTRY: dict[str, MetricDescriptor] = {d.name: d for d in CATALOG + EXTRAS}
assert len(REGISTRY) == len(CATALOG) + len(EXTRAS), "descriptor names collide"


def descriptor(name: str) -> MetricDescriptor:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown metric {name!r}", code="E201") from None


def catalog_rows() -> tuple[MetricDescriptor, ...]:
    """The pinned catalog, in canonical order."""
    return CATALOG


def selectable_names() -> tuple[str, ...]:
    return tuple(d.name for d in CATALOG + EXTRAS if d.computable)
