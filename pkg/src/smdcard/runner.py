"""Evaluation pipeline: plan validation, scoped metric computation,
consistency analysis, and report assembly.

Scopes: the global view always runs; per-region scopes run when the
synthetic set carries region tags (local evaluation); per-subgroup scopes
run when it carries subgroup labels and feed the consistency criterion.
Binary metrics inside a region/subgroup scope compare against the reference
rows with the same tag; slices that fail a metric's preconditions yield
explicit undefined markers, never silent omission.

Metric computation is pure, so tasks can run on a thread pool; results are
keyed and sorted before assembly, which keeps reports byte-identical for
any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, catalog, completeness, compliance, congruence, \
    consistency, coverage
from .aggregate import (QualityReport, assemble_report, has_bounds_source,
                        normalize, resolve_bounds)
from .config import EvalConfig, config_digest
from .constraint import (ConstraintRuleSet, derive_range_rules,
                         margin_to_boundary, validate_rules, violation_magnitude,
                         violation_rate)
from .errors import EvaluationError, PlanError
from .model import (EmbeddingSet, MetricResult, RecordTable, ValidationOutcome,
                    Violation, make_result, undefined_result, validate_inputs)
from .numerics import pca_fit

TOOL = {"name": "smdcard", "version": __version__}


@dataclass
class EvaluationInputs:
    synthetic: EmbeddingSet
    real: EmbeddingSet | None = None
    table: RecordTable | None = None
    real_table: RecordTable | None = None
    image_pairs: list | None = None          # [(real_img, synth_img, peak)]
    class_probs: np.ndarray | None = None


class PlanViolations(PlanError):
    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def plan(inputs: EvaluationInputs, config: EvalConfig) -> ValidationOutcome:
    """Full plan validation: core input checks plus metric-source checks."""
    outcome = validate_inputs(inputs.real, inputs.synthetic, config)
    violations = list(outcome.violations)

    def add(code, message):
        violations.append(Violation(code, message))

    selected = [catalog.descriptor(name) for name in config.metrics]
    for d in selected:
        if d.source == catalog.SOURCE_TABLE and inputs.table is None:
            add("E227", f"metric {d.name!r} needs a record table (--table)")
        if d.source == catalog.SOURCE_IMAGE_PAIRS and inputs.image_pairs is None:
            add("E227", f"metric {d.name!r} needs paired images (--images)")
        if (d.source == catalog.SOURCE_CLASS_PROBS
                and inputs.class_probs is None):
            add("E227", f"metric {d.name!r} needs a class-probability matrix "
                        "(params.inception_score.probs_path)")
        if d.source == catalog.SOURCE_MANIFEST:
            add("E227", f"metric {d.name!r} is computed at card-build time "
                        "from the manifest, not by evaluate")
        if not has_bounds_source(d.name, config):
            add("E228", f"metric {d.name!r} has no normalization bounds; "
                        "add bounds in the config or run calibrate")

    names = set(config.metrics)
    if names & {"k_anonymity", "l_diversity", "t_closeness"}:
        if not config.quasi_identifiers:
            add("E227", "anonymity metrics need compliance.quasi_identifiers")
    if names & {"l_diversity", "t_closeness"} and not config.sensitive_column:
        add("E227", "diversity/closeness metrics need "
                    "compliance.sensitive_column")

    constraint_selected = names & {"constraint_violation_rate",
                                   "constraint_boundary_distance",
                                   "nearest_invalid_datapoint"}
    if constraint_selected:
        if not config.constraint_rules and config.constraint_derive is None:
            add("E227", "constraint metrics need constraints.rules or "
                        "constraints.derive")
        if config.constraint_derive is not None and inputs.real_table is None:
            add("E227", "constraints.derive needs a reference table "
                        "(tables.real)")

    if "required_field_proportion" in names:
        if config.required_fields in (None, "auto") and inputs.real_table is None:
            add("E227", "required_field_proportion needs "
                        "completeness.required_fields or a reference table")

    consistency_selected = [d for d in selected
                            if d.source == catalog.SOURCE_SUBGROUP_METRICS]
    if consistency_selected:
        if inputs.synthetic.subgroup is None:
            add("E227", "consistency metrics need a subgroup column on the "
                        "synthetic set")
        for base in _consistency_base(config):
            d = catalog.descriptor(base)
            if d.source != catalog.SOURCE_EMBEDDING:
                add("E227", f"consistency base metric {base!r} must be an "
                            "embedding metric")
            elif not has_bounds_source(base, config):
                add("E228", f"consistency base metric {base!r} has no "
                            "normalization bounds")

    if config.pca_dim is not None and config.pca_dim > inputs.synthetic.d:
        add("E229", f"pca.target_dim={config.pca_dim} exceeds d="
                    f"{inputs.synthetic.d}")

    if inputs.table is not None:
        try:
            validate_rules(inputs.table, ConstraintRuleSet(config.constraint_rules))
        except PlanError as exc:
            add("E229", str(exc))

    return ValidationOutcome(tuple(violations))


def _consistency_base(config: EvalConfig) -> tuple[str, ...]:
    if config.consistency_base is not None:
        return config.consistency_base
    return tuple(name for name in config.metrics
                 if catalog.descriptor(name).source == catalog.SOURCE_EMBEDDING)


# ---------------------------------------------------------------------------
# per-metric computation


def _compute_embedding_metric(name: str, real: EmbeddingSet | None,
                              synthetic: EmbeddingSet, config: EvalConfig,
                              seed: int):
    p = config.param
    if name == "cosine_similarity":
        return congruence.cosine_centroid(real, synthetic)
    if name == "earth_movers_distance":
        return congruence.wasserstein1(real, synthetic,
                                       mode=p(name, "mode"))
    if name == "jensen_shannon_divergence":
        bins = p(name, "bins")
        return congruence.jensen_shannon(real, synthetic,
                                         bins=None if bins is None else int(bins))
    if name == "frechet_distance":
        if real.n < 2 or synthetic.n < 2:
            return None, {"undefined_reason": "insufficient samples (need at "
                                              "least 2 rows per set)"}
        return congruence.frechet_distance(real, synthetic)
    if name == "centroid_distance_congruence":
        return congruence.centroid_distance(real, synthetic)
    if name == "precision":
        return congruence.manifold_precision(real, synthetic, k=int(p(name, "k")))
    if name == "recall":
        return coverage.manifold_recall(real, synthetic, k=int(p(name, "k")))
    if name == "coverage":
        return coverage.manifold_coverage(real, synthetic, k=int(p(name, "k")))
    if name == "centroid_distance_coverage":
        return coverage.centroid_spread(real, synthetic)
    if name == "convex_hull_volume":
        return coverage.convex_hull_volume(synthetic,
                                           reduce_to=int(p(name, "reduce_to")),
                                           seed=seed)
    if name == "dpp_score":
        value, diag = coverage.dpp_logdet(synthetic, kernel=p(name, "kernel"),
                                          gamma=p(name, "gamma"),
                                          ridge=float(p(name, "ridge")))
        return value, diag
    if name == "vendi_score":
        value, diag = coverage.vendi_score(synthetic, kernel=p(name, "kernel"),
                                           gamma=p(name, "gamma"))
        diag["default_bounds"] = [1.0, float(max(2, synthetic.n))]
        return value, diag
    if name == "variance_coverage":
        return coverage.total_variance(synthetic)
    if name == "entropy_coverage":
        bins = p(name, "bins")
        return coverage.embedding_entropy(synthetic,
                                          bins=None if bins is None else int(bins))
    if name == "rarity_score":
        return coverage.rarity_score(real, synthetic, k=int(p(name, "k")))
    if name == "cluster_balance":
        kc = p(name, "k_clusters")
        return coverage.cluster_balance(synthetic,
                                        k_clusters=None if kc is None else int(kc),
                                        seed=seed)
    if name == "re_identification_risk":
        tau = p(name, "tau")
        return compliance.leakage_rate(real, synthetic,
                                       tau=None if tau is None else float(tau))
    raise PlanError(f"metric {name!r} is not an embedding metric")


def _compute_table_metric(name: str, table: RecordTable, config: EvalConfig,
                          rules: ConstraintRuleSet,
                          required_fields: tuple[str, ...] | None):
    if name == "constraint_violation_rate":
        return violation_rate(table, rules)
    if name == "constraint_boundary_distance":
        return violation_magnitude(table, rules)
    if name == "nearest_invalid_datapoint":
        value, diag = margin_to_boundary(table, rules)
        if value is None:
            diag.setdefault("undefined_reason", "no valid bounded rows")
        return value, diag
    if name == "required_field_proportion":
        return completeness.required_field_proportion(
            table, list(required_fields or ()),
            populated_threshold=config.populated_threshold)
    if name == "missing_data_percentage":
        return completeness.missing_data_percentage(table)
    if name == "k_anonymity":
        value, diag = compliance.k_anonymity(table, list(config.quasi_identifiers))
        diag["default_bounds"] = [1.0, float(max(2, table.n))]
        return value, diag
    if name == "l_diversity":
        value, diag = compliance.l_diversity(table,
                                             list(config.quasi_identifiers),
                                             config.sensitive_column)
        distinct = diag.get("distinct_sensitive_values", 2)
        diag["default_bounds"] = [1.0, float(max(2, distinct))]
        return value, diag
    if name == "t_closeness":
        return compliance.t_closeness(table, list(config.quasi_identifiers),
                                      config.sensitive_column)
    raise PlanError(f"metric {name!r} is not a table metric")


def _scoped_result(name: str, scope: str, real, synthetic, config, seed):
    """Embedding metric inside one scope; precondition failures become
    undefined markers."""
    d = catalog.descriptor(name)
    if d.arity == "binary" and real is None:
        return undefined_result(name, "insufficient samples: no reference "
                                      "rows in this slice", scope=scope)
    try:
        value, diagnostics = _compute_embedding_metric(name, real, synthetic,
                                                       config, seed)
    except EvaluationError as exc:
        return undefined_result(name, f"insufficient samples: {exc}",
                                scope=scope)
    if value is None:
        diagnostics.setdefault("undefined_reason", "undefined")
        return MetricResult(d, None, scope, None, diagnostics)
    return MetricResult(d, value, scope, None, diagnostics)


def _resample(eset: EmbeddingSet, row_indices) -> EmbeddingSet:
    """Bootstrap view: rows may repeat, so fresh ids replace the originals."""
    idx = np.asarray(row_indices, dtype=int)
    return EmbeddingSet(ids=tuple(f"b{i:06d}" for i in range(idx.size)),
                        data=eset.data[idx])


def _filter_by_label(eset: EmbeddingSet | None, attr: str, label: str):
    if eset is None:
        return None
    labels = getattr(eset, attr)
    if labels is None:
        return None
    idx = [i for i, v in enumerate(labels) if v == label]
    if not idx:
        return None
    return eset.subset(idx)


# ---------------------------------------------------------------------------
# consistency stage


def _consistency_results(inputs: EvaluationInputs, config: EvalConfig,
                         subgroup_results: dict, seed: int):
    """One result per selected consistency metric, worst case across base
    metrics; per-base detail goes to diagnostics."""
    selected = [n for n in config.metrics
                if catalog.descriptor(n).source == catalog.SOURCE_SUBGROUP_METRICS]
    if not selected:
        return []
    labels = sorted(set(inputs.synthetic.subgroup))
    bases = _consistency_base(config)
    per_base_normalized: dict[str, dict[str, float | None]] = {}
    for base in bases:
        values = {}
        for label in labels:
            result = subgroup_results.get((f"subgroup:{label}", base))
            if result is None or not result.defined:
                values[label] = None
                continue
            bounds = resolve_bounds(result, config)
            values[label] = normalize(result, bounds).normalized
        per_base_normalized[base] = values

    results = []
    for name in selected:
        if name in ("metric_variance", "max_min_difference"):
            key = "variance" if name == "metric_variance" else "max_min_difference"
            worst = None
            detail = {}
            excluded_total = 0
            for base, values in per_base_normalized.items():
                stats, diag = consistency.dispersion(list(values.values()))
                if stats is None:
                    detail[base] = "undefined: " + diag.get("undefined_reason", "")
                    continue
                excluded_total += diag.get("excluded", 0)
                detail[base] = stats[key]
                if worst is None or stats[key] > worst:
                    worst = stats[key]
            diagnostics = {"per_base": detail, "subgroups": labels,
                           "scale": "normalized scores",
                           "excluded_subgroup_values": excluded_total}
            if worst is None:
                results.append(undefined_result(
                    name, "fewer than 2 defined subgroup values", **diagnostics))
            else:
                results.append(make_result(name, worst, **diagnostics))
        elif name == "anova":
            results.append(_anova_result(inputs, config, labels, bases, seed))
    return results


def _anova_result(inputs: EvaluationInputs, config: EvalConfig,
                  labels: list[str], bases: tuple[str, ...], seed: int):
    """Bootstrap one-way ANOVA per base metric; keep the most significant."""
    synthetic = inputs.synthetic
    real = inputs.real
    worst = None  # (p, F, base)
    detail = {}
    index_by_label = {label: np.asarray([i for i, v in
                                         enumerate(synthetic.subgroup)
                                         if v == label])
                      for label in labels}
    for base in bases:
        def compute(label, row_indices, _base=base):
            synth_slice = _resample(synthetic, row_indices)
            real_slice = _filter_by_label(real, "subgroup", label)
            if (catalog.descriptor(_base).arity == "binary"
                    and real_slice is None):
                return None
            try:
                value, _ = _compute_embedding_metric(_base, real_slice,
                                                     synth_slice, config, seed)
            except EvaluationError:
                return None
            return value

        groups, used, skipped = consistency.bootstrap_groups(
            index_by_label, compute, config.bootstrap_replicates, seed)
        if len(groups) < 2:
            detail[base] = "undefined: fewer than 2 usable subgroups"
            continue
        try:
            stats, diag = consistency.one_way_anova(groups)
        except EvaluationError as exc:
            detail[base] = f"undefined: {exc}"
            continue
        if stats is None:
            detail[base] = "undefined: " + diag.get("undefined_reason", "")
            continue
        detail[base] = {"F": stats["F"], "p": stats["p"],
                        "subgroups": used, "skipped": skipped}
        if worst is None or stats["p"] < worst[0]:
            worst = (stats["p"], stats["F"], base)
    diagnostics = {"per_base": detail, "subgroups": labels,
                   "replicates": config.bootstrap_replicates}
    if worst is None:
        return undefined_result("anova", "no base metric produced "
                                         "two usable subgroups", **diagnostics)
    p_value, f_value, base = worst
    diagnostics["p"] = p_value
    diagnostics["worst_base"] = base
    return make_result("anova", f_value, **diagnostics)


# ---------------------------------------------------------------------------
# the pipeline


def run_evaluation(inputs: EvaluationInputs, config: EvalConfig,
                   workers: int = 1) -> QualityReport:
    outcome = plan(inputs, config)
    if not outcome.ok:
        raise PlanViolations(outcome.violations)

    seed = config.effective_seed()
    digest = config_digest(config)
    synthetic = inputs.synthetic
    real = inputs.real
    notes: list[str] = []

    if config.pca_dim is not None and config.pca_dim < synthetic.d:
        fit = (np.vstack([real.data, synthetic.data]) if real is not None
               else synthetic.data)
        basis = pca_fit(fit, config.pca_dim)
        synthetic = EmbeddingSet(synthetic.ids, basis.transform(synthetic.data),
                                 synthetic.subgroup, synthetic.region)
        if real is not None:
            real = EmbeddingSet(real.ids, basis.transform(real.data),
                                real.subgroup, real.region)
        notes.append(f"embeddings reduced to {config.pca_dim} shared "
                     f"principal components (explained ratio "
                     f"{sum(basis.explained_ratio):.6g})")
        if basis.padded:
            notes.append(f"projection padded {basis.padded} zero components "
                         "(rank deficiency)")
        inputs = EvaluationInputs(synthetic=synthetic, real=real,
                                  table=inputs.table,
                                  real_table=inputs.real_table,
                                  image_pairs=inputs.image_pairs,
                                  class_probs=inputs.class_probs)

    rules = _resolve_rules(inputs, config)
    required = _resolve_required_fields(inputs, config)

    embedding_names = [n for n in config.metrics
                       if catalog.descriptor(n).source == catalog.SOURCE_EMBEDDING]
    table_names = [n for n in config.metrics
                   if catalog.descriptor(n).source == catalog.SOURCE_TABLE]
    image_names = [n for n in config.metrics
                   if catalog.descriptor(n).source == catalog.SOURCE_IMAGE_PAIRS]
    probs_names = [n for n in config.metrics
                   if catalog.descriptor(n).source == catalog.SOURCE_CLASS_PROBS]

    tasks = []  # (scope, name, thunk)
    for name in embedding_names:
        tasks.append(("global", name,
                      lambda n=name: _scoped_result(n, "global", real,
                                                    synthetic, config, seed)))
    region_labels = sorted(set(synthetic.region)) if synthetic.region else []
    for label in region_labels:
        scope = f"region:{label}"
        synth_slice = _filter_by_label(synthetic, "region", label)
        real_slice = _filter_by_label(real, "region", label)
        for name in embedding_names:
            tasks.append((scope, name,
                          lambda n=name, s=scope, rs=real_slice,
                                 ss=synth_slice:
                          _scoped_result(n, s, rs, ss, config, seed)))
    subgroup_labels = sorted(set(synthetic.subgroup)) if synthetic.subgroup else []
    for label in subgroup_labels:
        scope = f"subgroup:{label}"
        synth_slice = _filter_by_label(synthetic, "subgroup", label)
        real_slice = _filter_by_label(real, "subgroup", label)
        for name in embedding_names:
            tasks.append((scope, name,
                          lambda n=name, s=scope, rs=real_slice,
                                 ss=synth_slice:
                          _scoped_result(n, s, rs, ss, config, seed)))

    for name in table_names:
        tasks.append(("global", name,
                      lambda n=name: _table_result(n, inputs.table, config,
                                                   rules, required)))
    for name in image_names:
        tasks.append(("global", name,
                      lambda n=name: _image_result(n, inputs.image_pairs)))
    for name in probs_names:
        tasks.append(("global", name,
                      lambda n=name: _probs_result(n, inputs.class_probs)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            computed = list(pool.map(lambda t: t[2](), tasks))
    else:
        computed = [t[2]() for t in tasks]
    results = {(t[0], t[1]): r for t, r in zip(tasks, computed)}

    all_results = list(results.values())
    if subgroup_labels:
        all_results.extend(_consistency_results(inputs, config, results, seed))

    if rules is not None and len(rules):
        notes.append(f"constraint rules in effect: {len(rules)} "
                     f"({rules.source})")

    declared = compliance.declared_privacy_record(config)
    return assemble_report(all_results, config, seed, digest, dict(TOOL),
                           declared_privacy=declared, notes=notes)


def _resolve_rules(inputs: EvaluationInputs,
                   config: EvalConfig) -> ConstraintRuleSet | None:
    rules = list(config.constraint_rules)
    source = "declared"
    if config.constraint_derive is not None:
        if inputs.real_table is None:
            raise PlanError("constraints.derive needs a reference table")
        derived = derive_range_rules(inputs.real_table,
                                     list(config.constraint_derive.fields),
                                     config.constraint_derive.quantile_margin)
        rules.extend(derived.rules)
        source = "derived-from-reference" if not config.constraint_rules \
            else "declared"
    if not rules:
        return None
    return ConstraintRuleSet(tuple(rules), source=source)


def _resolve_required_fields(inputs: EvaluationInputs,
                             config: EvalConfig) -> tuple[str, ...] | None:
    if isinstance(config.required_fields, tuple):
        return config.required_fields
    if inputs.real_table is not None:
        return inputs.real_table.column_names
    return None


def _table_result(name: str, table, config, rules, required) -> MetricResult:
    d = catalog.descriptor(name)
    try:
        value, diagnostics = _compute_table_metric(
            name, table, config,
            rules if rules is not None else ConstraintRuleSet(()), required)
    except EvaluationError as exc:
        return undefined_result(name, str(exc))
    if value is None:
        diagnostics.setdefault("undefined_reason", "undefined")
        return MetricResult(d, None, "global", None, diagnostics)
    return MetricResult(d, value, "global", None, diagnostics)


def _image_result(name: str, image_pairs) -> MetricResult:
    fn = congruence.psnr_pairs if name == "psnr" else congruence.ssim_pairs
    value, diagnostics = fn(image_pairs)
    d = catalog.descriptor(name)
    return MetricResult(d, value, "global", None, diagnostics)


def _probs_result(name: str, class_probs) -> MetricResult:
    value, diagnostics = coverage.inception_style_score(class_probs)
    diagnostics["default_bounds"] = [1.0, float(max(2, diagnostics["classes"]))]
    return MetricResult(catalog.descriptor(name), value, "global", None,
                        diagnostics)


# ---------------------------------------------------------------------------
# calibration

#: Analytic floors/ceilings applied to calibrated bounds where they exist.
_FLOORS = {"frechet_distance": 0.0, "earth_movers_distance": 0.0,
           "centroid_distance_congruence": 0.0,
           "centroid_distance_coverage": 0.0, "rarity_score": 0.0,
           "convex_hull_volume": 0.0, "variance_coverage": 0.0,
           "jensen_shannon_divergence": 0.0, "cosine_similarity": -1.0,
           "ssim": -1.0, "precision": 0.0, "recall": 0.0, "coverage": 0.0,
           "cluster_balance": 0.0, "re_identification_risk": 0.0,
           "t_closeness": 0.0, "vendi_score": 1.0, "psnr": 0.0}
_CEILS = {"cosine_similarity": 1.0, "ssim": 1.0,
          "jensen_shannon_divergence": 1.0, "precision": 1.0, "recall": 1.0,
          "coverage": 1.0, "cluster_balance": 1.0,
          "re_identification_risk": 1.0, "t_closeness": 1.0}


def calibrate_bounds(real: EmbeddingSet, config: EvalConfig
                     ) -> dict[str, tuple[float, float]]:
    """Suggested normalization bounds from seeded reference self-splits.

    Each split halves the reference set (seeded shuffle); binary metrics run
    half against half, unary metrics run on each half. Observed values are
    padded outward by one observed spread plus a 5% magnitude cushion,
    clamped to analytic floors/ceilings.
    """
    if real.n < 4:
        raise PlanError("reference set too small to split (need at least 4 rows)")
    seed = config.effective_seed()
    splits = max(1, config.calibration_splits)
    values: dict[str, list[float]] = {}
    for r in range(splits):
        rng = np.random.default_rng(consistency.task_seed(seed, "calibrate", r))
        perm = rng.permutation(real.n)
        half = real.n // 2
        first = real.subset([int(i) for i in perm[:half]])
        second = real.subset([int(i) for i in perm[half:]])
        for name in config.metrics:
            d = catalog.descriptor(name)
            if d.source != catalog.SOURCE_EMBEDDING:
                continue
            try:
                if d.arity == "binary":
                    outputs = [_compute_embedding_metric(name, first, second,
                                                         config, seed)]
                else:
                    outputs = [_compute_embedding_metric(name, None, first,
                                                         config, seed),
                               _compute_embedding_metric(name, None, second,
                                                         config, seed)]
            except EvaluationError:
                continue
            for value, _ in outputs:
                if value is not None and math.isfinite(value):
                    values.setdefault(name, []).append(float(value))
    bounds = {}
    for name, observed in sorted(values.items()):
        vmin, vmax = min(observed), max(observed)
        pad = (vmax - vmin) + max(1e-6, 0.05 * max(abs(vmin), abs(vmax)))
        lo, hi = vmin - pad, vmax + pad
        if name in _FLOORS:
            lo = max(lo, _FLOORS[name])
        if name in _CEILS:
            hi = min(hi, _CEILS[name])
        if not lo < hi:
            hi = lo + 1.0
        bounds[name] = (lo, hi)
    return bounds
