"""Normalization, per-criterion aggregation, verdicts, and report assembly.

Raw metric values are mapped onto a 0-100 score by direction against
per-metric bounds, aggregated into one score per criterion (weighted
arithmetic or geometric mean), and classified against the verdict
thresholds (defaults: good at 80 and above, moderate in [70, 80), low
below 70 - configurable per application).

Undefined metrics are excluded with their weight renormalized away rather
than scored zero: a missing measurement is not evidence of poor quality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import catalog
from .errors import PlanError
from .model import MetricResult

GEOMETRIC_FLOOR = 0.01

#: Analytic bounds for metrics whose range is fixed. Everything else needs
#: config bounds, a calibration run, or data-dependent defaults attached by
#: the evaluation pipeline (``default_bounds`` diagnostic).
STATIC_BOUNDS: dict[str, tuple[float, float]] = {
    "cosine_similarity": (-1.0, 1.0),
    "jensen_shannon_divergence": (0.0, 1.0),
    "precision": (0.0, 1.0),
    "recall": (0.0, 1.0),
    "coverage": (0.0, 1.0),
    "cluster_balance": (0.0, 1.0),
    "constraint_violation_rate": (0.0, 1.0),
    "required_field_proportion": (0.0, 1.0),
    "missing_data_percentage": (0.0, 1.0),
    "t_closeness": (0.0, 1.0),
    "ssim": (-1.0, 1.0),
    "documentation_clarity": (1.0, 10.0),
    "re_identification_risk": (0.0, 1.0),
    "metric_variance": (0.0, 2500.0),
    "max_min_difference": (0.0, 100.0),
}

#: Metrics whose natural bounds depend on the data; the pipeline supplies
#: them through the ``default_bounds`` diagnostic.
DYNAMIC_BOUNDS = ("vendi_score", "inception_score", "k_anonymity", "l_diversity")


def resolve_bounds(result: MetricResult, config) -> tuple[float, float] | None:
    name = result.descriptor.name
    if name in config.bounds:
        return config.bounds[name]
    if name in STATIC_BOUNDS:
        return STATIC_BOUNDS[name]
    default = result.diagnostics.get("default_bounds")
    if default is not None:
        return float(default[0]), float(default[1])
    return None


def has_bounds_source(name: str, config) -> bool:
    """Plan-time check: will normalization find bounds for this metric?"""
    d = catalog.descriptor(name)
    return (name in config.bounds or name in STATIC_BOUNDS
            or name in DYNAMIC_BOUNDS or d.direction == "stat-sig")


def normalize(result: MetricResult, bounds: tuple[float, float] | None):
    """Attach the 0-100 normalized score to a metric result.

    maximize: 100*clamp((v-lo)/(hi-lo)); minimize: mirrored. Metrics scored
    by statistical significance map to 100*p (a high p-value means no
    detectable inconsistency). Infinite sentinels pin to the direction's
    best/worst end; undefined results pass through unscored.
    """
    if not result.defined:
        return result
    d = result.descriptor
    if d.direction == "stat-sig":
        p = result.diagnostics.get("p")
        if p is None:
            return result
        return result.with_normalized(100.0 * min(max(float(p), 0.0), 1.0))
    direction = d.score_direction
    if math.isinf(result.value):
        best = result.value > 0 if direction == "maximize" else result.value < 0
        return result.with_normalized(100.0 if best else 0.0)
    if bounds is None:
        raise PlanError(f"metric {d.name!r} has no normalization bounds; "
                        "set bounds in the config or run calibrate")
    lo, hi = bounds
    if not lo < hi:
        raise PlanError(f"metric {d.name!r}: bounds must satisfy lo < hi")
    fraction = (result.value - lo) / (hi - lo)
    if direction == "minimize":
        fraction = 1.0 - fraction
    return result.with_normalized(100.0 * min(max(fraction, 0.0), 1.0))


def aggregate_criterion(normalized: list[float], weights: list[float],
                        mode: str = "arithmetic") -> float:
    """Weighted mean of normalized scores; weights renormalize over the
    supplied (defined) values. Geometric mode floors values at 0.01 before
    the log so a single zero cannot erase the criterion."""
    if not normalized:
        raise PlanError("cannot aggregate an empty criterion")
    if len(weights) != len(normalized):
        raise PlanError("weights and values differ in length")
    total = sum(weights)
    if total <= 0:
        weights = [1.0] * len(normalized)
        total = float(len(normalized))
    shares = [w / total for w in weights]
    if mode == "arithmetic":
        return sum(s * v for s, v in zip(shares, normalized))
    if mode == "geometric":
        log_sum = sum(s * math.log(max(v, GEOMETRIC_FLOOR))
                      for s, v in zip(shares, normalized))
        return math.exp(log_sum)
    raise PlanError(f"unknown aggregation mode {mode!r}")


def verdict(score: float | None, thresholds: dict) -> str:
    """good at/above the good threshold, moderate at/above the moderate
    threshold, low below it; None means the criterion was not evaluated."""
    if score is None:
        return "not evaluated"
    if score >= thresholds["good"]:
        return "good"
    if score >= thresholds["moderate"]:
        return "moderate"
    return "low"


# ---------------------------------------------------------------------------
# report assembly

_CATALOG_ORDER = {d.name: i for i, d in enumerate(catalog.CATALOG + catalog.EXTRAS)}


def _scope_sort_key(scope: str):
    kind_rank = {"global": 0, "region": 1, "subgroup": 2}
    kind, _, tag = scope.partition(":")
    return (kind_rank.get(kind, 3), tag)


def _value_to_json(value: float | None):
    if value is None:
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


def _value_from_json(raw):
    if raw is None:
        return None
    if raw == "inf":
        return math.inf
    if raw == "-inf":
        return -math.inf
    return float(raw)


@dataclass(frozen=True)
class CriterionBlock:
    criterion: str
    score: float | None
    verdict: str
    metrics: tuple[dict, ...]
    excluded: int

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "score": self.score,
            "verdict": self.verdict,
            "excluded": self.excluded,
            "metrics": list(self.metrics),
        }


@dataclass(frozen=True)
class ScopeBlock:
    scope: str
    criteria: tuple[CriterionBlock, ...]

    def to_dict(self) -> dict:
        return {"scope": self.scope,
                "criteria": [c.to_dict() for c in self.criteria]}


@dataclass(frozen=True)
class QualityReport:
    tool: dict
    seed: int
    config_digest: str
    thresholds: dict
    aggregation: str
    scopes: tuple[ScopeBlock, ...]
    notes: tuple[str, ...] = ()
    declared_privacy: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tool": dict(self.tool),
            "seed": self.seed,
            "config_digest": self.config_digest,
            "thresholds": {"good": float(self.thresholds["good"]),
                           "moderate": float(self.thresholds["moderate"])},
            "aggregation": self.aggregation,
            "declared_privacy": dict(self.declared_privacy),
            "scopes": [s.to_dict() for s in self.scopes],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "QualityReport":
        scopes = []
        for s in raw.get("scopes", []):
            criteria = tuple(
                CriterionBlock(criterion=c["criterion"], score=c["score"],
                               verdict=c["verdict"], excluded=c["excluded"],
                               metrics=tuple(c["metrics"]))
                for c in s.get("criteria", []))
            scopes.append(ScopeBlock(scope=s["scope"], criteria=criteria))
        return cls(tool=dict(raw.get("tool", {})),
                   seed=int(raw["seed"]),
                   config_digest=str(raw["config_digest"]),
                   thresholds=dict(raw["thresholds"]),
                   aggregation=str(raw["aggregation"]),
                   scopes=tuple(scopes),
                   notes=tuple(raw.get("notes", [])),
                   declared_privacy=dict(raw.get("declared_privacy", {})))

    def scope(self, name: str) -> ScopeBlock | None:
        for s in self.scopes:
            if s.scope == name:
                return s
        return None

    def criterion(self, name: str, scope: str = "global") -> CriterionBlock | None:
        block = self.scope(scope)
        if block is None:
            return None
        for c in block.criteria:
            if c.criterion == name:
                return c
        return None


def _metric_entry(result: MetricResult, weight: float,
                  bounds: tuple[float, float] | None) -> dict:
    d = result.descriptor
    entry = {
        "name": d.name,
        "label": d.label,
        "direction": d.direction,
        "value": _value_to_json(result.value),
        "normalized": result.normalized,
        "weight": weight,
        "bounds": [float(bounds[0]), float(bounds[1])] if bounds else None,
        "excluded": result.normalized is None,
        "diagnostics": _clean_diagnostics(result.diagnostics),
    }
    return entry


def _clean_value(value):
    if isinstance(value, float):
        return _value_to_json(value)
    if isinstance(value, (list, tuple)):
        return [_clean_value(v) for v in value]
    if isinstance(value, dict):
        return {k: _clean_value(v) for k, v in sorted(value.items())}
    return value


def _clean_diagnostics(diagnostics: dict) -> dict:
    return {key: _clean_value(diagnostics[key]) for key in sorted(diagnostics)}


def assemble_report(results: list[MetricResult], config, seed: int,
                    config_digest: str, tool: dict,
                    declared_privacy: dict | None = None,
                    notes: list[str] | None = None) -> QualityReport:
    """Normalize every result, aggregate per criterion per scope, and build
    the full report (raw values and aggregates, global plus every region
    and subgroup scope, config digest, seed record)."""
    by_scope: dict[str, list[MetricResult]] = {}
    for result in results:
        by_scope.setdefault(result.scope, []).append(result)

    scope_blocks = []
    all_notes = list(notes or [])
    for scope in sorted(by_scope, key=_scope_sort_key):
        scope_results = sorted(by_scope[scope],
                               key=lambda r: _CATALOG_ORDER[r.descriptor.name])
        seen = set()
        for r in scope_results:
            key = r.descriptor.name
            if key in seen:
                raise PlanError(f"metric {key!r} appears twice in scope {scope!r}")
            seen.add(key)
        by_criterion: dict[str, list[MetricResult]] = {}
        for r in scope_results:
            by_criterion.setdefault(r.descriptor.criterion, []).append(r)
        criterion_blocks = []
        for criterion in catalog.CRITERIA:
            members = by_criterion.get(criterion)
            if not members:
                continue
            entries = []
            normalized_values = []
            weights = []
            excluded = 0
            for r in members:
                bounds = resolve_bounds(r, config)
                r = normalize(r, bounds)
                weight = config.weight(r.descriptor.name)
                entries.append(_metric_entry(r, weight, bounds))
                if r.normalized is None:
                    excluded += 1
                    reason = r.diagnostics.get("undefined_reason", "undefined")
                    all_notes.append(f"excluded {r.descriptor.name} "
                                     f"[{scope}]: {reason}")
                else:
                    normalized_values.append(r.normalized)
                    weights.append(weight)
            if normalized_values:
                score = aggregate_criterion(normalized_values, weights,
                                            config.aggregation)
            else:
                score = None
            criterion_blocks.append(CriterionBlock(
                criterion=criterion, score=score,
                verdict=verdict(score, config.thresholds),
                metrics=tuple(entries), excluded=excluded))
        scope_blocks.append(ScopeBlock(scope=scope,
                                       criteria=tuple(criterion_blocks)))

    return QualityReport(
        tool=tool, seed=seed, config_digest=config_digest,
        thresholds=dict(config.thresholds), aggregation=config.aggregation,
        scopes=tuple(scope_blocks), notes=tuple(all_notes),
        declared_privacy=dict(declared_privacy or {}))
