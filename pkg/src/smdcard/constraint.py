"""Declarative constraint rules and their adherence metrics.

Rules express clinical/technical validity over record-table columns:

- ``range``: numeric field within [lo, hi] (either bound optional)
- ``allowed_set``: categorical/text field drawn from an allowed value set
- ``linear``: weighted sum of numeric fields vs a bound (``<=`` or ``>=``)
- ``implication``: when a categorical predicate holds, a consequent rule
  must hold (nesting depth capped at 2)

Rows with missing values in a rule's fields satisfy it vacuously; the
vacuous count is reported so silent gaps stay visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EvaluationError, PlanError
from .model import RecordTable

RULE_KINDS = ("range", "allowed_set", "linear", "implication")
SENSES = ("<=", ">=")


@dataclass(frozen=True)
class ConstraintRule:
    id: str
    kind: str
    severity: str = "info"
    field_name: str | None = None
    lo: float | None = None
    hi: float | None = None
    values: tuple[str, ...] = ()
    weights: tuple[tuple[str, float], ...] = ()
    bound: float = 0.0
    sense: str = "<="
    when_field: str | None = None
    when_values: tuple[str, ...] = ()
    consequent: "ConstraintRule | None" = None

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ConfigError(f"rule {self.id!r}: unknown kind {self.kind!r}")
        if self.kind == "range" and self.lo is None and self.hi is None:
            raise ConfigError(f"rule {self.id!r}: range needs at least one bound")
        if self.kind == "allowed_set" and not self.values:
            raise ConfigError(f"rule {self.id!r}: allowed_set needs values")
        if self.kind == "linear":
            if not self.weights:
                raise ConfigError(f"rule {self.id!r}: linear needs weights")
            if self.sense not in SENSES:
                raise ConfigError(f"rule {self.id!r}: sense must be <= or >=")
        if self.kind == "implication":
            if self.when_field is None or not self.when_values:
                raise ConfigError(f"rule {self.id!r}: implication needs a "
                                  "categorical antecedent")
            if self.consequent is None:
                raise ConfigError(f"rule {self.id!r}: implication needs a consequent")
            if self._depth() > 2:
                raise ConfigError(f"rule {self.id!r}: implication nesting "
                                  "deeper than 2")

    def _depth(self) -> int:
        if self.kind != "implication":
            return 1
        return 1 + (self.consequent._depth() if self.consequent else 0)

    def referenced_fields(self) -> tuple[str, ...]:
        if self.kind in ("range", "allowed_set"):
            return (self.field_name,)
        if self.kind == "linear":
            return tuple(name for name, _ in self.weights)
        fields = (self.when_field,) + self.consequent.referenced_fields()
        return fields


@dataclass(frozen=True)
class ConstraintRuleSet:
    rules: tuple[ConstraintRule, ...]
    source: str = "declared"      # or "derived-from-reference"

    def __post_init__(self):
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate constraint rule ids")

    def __len__(self):
        return len(self.rules)


def rule_from_dict(raw: dict, *, _nested: bool = False) -> ConstraintRule:
    """Parse one rule from its config mapping (strict: unknown keys rejected)."""
    if not isinstance(raw, dict):
        raise ConfigError(f"constraint rule must be a mapping, got {type(raw).__name__}")
    known = {"id", "kind", "severity", "field", "min", "max", "values",
             "weights", "bound", "sense", "when", "then"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"constraint rule has unknown keys {unknown}")
    kind = raw.get("kind")
    rule_id = raw.get("id", "" if _nested else None)
    if rule_id is None:
        raise ConfigError("constraint rule missing an id")
    common = dict(id=str(rule_id), kind=str(kind),
                  severity=str(raw.get("severity", "info")))
    if kind == "range":
        lo = raw.get("min")
        hi = raw.get("max")
        return ConstraintRule(**common, field_name=str(raw["field"]),
                              lo=None if lo is None else float(lo),
                              hi=None if hi is None else float(hi))
    if kind == "allowed_set":
        return ConstraintRule(**common, field_name=str(raw["field"]),
                              values=tuple(str(v) for v in raw.get("values", ())))
    if kind == "linear":
        weights = raw.get("weights", {})
        if not isinstance(weights, dict):
            raise ConfigError("linear rule weights must map field -> weight")
        return ConstraintRule(
            **common,
            weights=tuple((str(k), float(v)) for k, v in weights.items()),
            bound=float(raw.get("bound", 0.0)),
            sense=str(raw.get("sense", "<=")))
    if kind == "implication":
        when = raw.get("when")
        if not isinstance(when, dict) or "field" not in when:
            raise ConfigError("implication rule needs when: {field, equals|in}")
        if "equals" in when:
            when_values = (str(when["equals"]),)
        elif "in" in when:
            when_values = tuple(str(v) for v in when["in"])
        else:
            raise ConfigError("implication antecedent needs equals: or in:")
        extra = sorted(set(when) - {"field", "equals", "in"})
        if extra:
            raise ConfigError(f"implication antecedent has unknown keys {extra}")
        consequent = rule_from_dict(raw.get("then", {}), _nested=True)
        return ConstraintRule(**common, when_field=str(when["field"]),
                              when_values=when_values, consequent=consequent)
    raise ConfigError(f"constraint rule has unknown kind {kind!r}")


def rule_to_dict(rule: ConstraintRule) -> dict:
    out: dict = {"id": rule.id, "kind": rule.kind, "severity": rule.severity}
    if rule.kind == "range":
        out["field"] = rule.field_name
        if rule.lo is not None:
            out["min"] = rule.lo
        if rule.hi is not None:
            out["max"] = rule.hi
    elif rule.kind == "allowed_set":
        out["field"] = rule.field_name
        out["values"] = list(rule.values)
    elif rule.kind == "linear":
        out["weights"] = dict(rule.weights)
        out["bound"] = rule.bound
        out["sense"] = rule.sense
    else:
        when: dict = {"field": rule.when_field}
        if len(rule.when_values) == 1:
            when["equals"] = rule.when_values[0]
        else:
            when["in"] = list(rule.when_values)
        out["when"] = when
        inner = rule_to_dict(rule.consequent)
        inner.pop("id", None)
        inner.pop("severity", None)
        out["then"] = inner
    return out


def validate_rules(table: RecordTable, rules: ConstraintRuleSet) -> None:
    """Plan-time check: every referenced field exists with a usable kind."""
    for rule in rules.rules:
        _validate_rule(table, rule)


def _validate_rule(table: RecordTable, rule: ConstraintRule) -> None:
    names = table.column_names
    if rule.kind in ("range", "allowed_set"):
        if rule.field_name not in names:
            raise PlanError(f"rule {rule.id!r} references unknown field "
                            f"{rule.field_name!r}")
        if rule.kind == "range" and table.kind(rule.field_name) != "numeric":
            raise PlanError(f"rule {rule.id!r}: range field "
                            f"{rule.field_name!r} is not numeric")
    elif rule.kind == "linear":
        for name, _ in rule.weights:
            if name not in names:
                raise PlanError(f"rule {rule.id!r} references unknown field {name!r}")
            if table.kind(name) != "numeric":
                raise PlanError(f"rule {rule.id!r}: linear field {name!r} "
                                "is not numeric")
    else:
        if rule.when_field not in names:
            raise PlanError(f"rule {rule.id!r} references unknown field "
                            f"{rule.when_field!r}")
        _validate_rule(table, rule.consequent)


def derive_range_rules(real: RecordTable, fields: list[str],
                       quantile_margin: float = 0.0) -> ConstraintRuleSet:
    """Range rules taken from the reference table's observed values.

    With margin q the observed range is widened outward by the distance from
    each extreme to the q / (1-q) quantile:

        lo = 2*min - Q(q),   hi = 2*max - Q(1-q)

    so q = 0 reproduces the exact observed range and larger q is strictly
    more permissive.
    """
    if not (0.0 <= quantile_margin < 0.5):
        raise ConfigError("quantile_margin must lie in [0, 0.5)")
    rules = []
    for name in fields:
        if name not in real.column_names or real.kind(name) != "numeric":
            raise PlanError(f"cannot derive a range rule for non-numeric or "
                            f"unknown field {name!r}")
        values = real.numeric_values(name)
        if values.size == 0:
            raise EvaluationError(f"field {name!r} is entirely missing in the "
                                  "reference table")
        vmin, vmax = float(values.min()), float(values.max())
        q_lo = float(np.quantile(values, quantile_margin))
        q_hi = float(np.quantile(values, 1.0 - quantile_margin))
        rules.append(ConstraintRule(
            id=f"range:{name}", kind="range", field_name=name,
            lo=2.0 * vmin - q_lo, hi=2.0 * vmax - q_hi))
    return ConstraintRuleSet(tuple(rules), source="derived-from-reference")


@dataclass(frozen=True)
class RowRuleOutcome:
    status: str              # "satisfied" | "violated" | "vacuous"
    residual: float = 0.0    # distance beyond the boundary when violated
    margin: float | None = None  # distance to the boundary when satisfied


def evaluate_rule(rule: ConstraintRule, table: RecordTable,
                  row_idx: int) -> RowRuleOutcome:
    """Evaluate one rule on one row; missing inputs are vacuous."""
    if rule.kind == "range":
        value = _cell(table, row_idx, rule.field_name)
        if value is None:
            return RowRuleOutcome("vacuous")
        v = float(value)
        below = (rule.lo - v) if rule.lo is not None else -math.inf
        above = (v - rule.hi) if rule.hi is not None else -math.inf
        overshoot = max(below, above)
        if overshoot > 0:
            return RowRuleOutcome("violated", residual=overshoot)
        margins = [abs(x) for x in (below, above) if x != -math.inf]
        return RowRuleOutcome("satisfied", margin=min(margins))
    if rule.kind == "allowed_set":
        value = _cell(table, row_idx, rule.field_name)
        if value is None:
            return RowRuleOutcome("vacuous")
        if str(value) in rule.values:
            return RowRuleOutcome("satisfied", margin=1.0)
        return RowRuleOutcome("violated", residual=1.0)
    if rule.kind == "linear":
        total = 0.0
        norm_sq = 0.0
        for name, w in rule.weights:
            value = _cell(table, row_idx, name)
            if value is None:
                return RowRuleOutcome("vacuous")
            total += w * float(value)
            norm_sq += w * w
        norm = math.sqrt(norm_sq)
        signed = (total - rule.bound) if rule.sense == "<=" else (rule.bound - total)
        distance = abs(signed) / norm if norm > 0 else 0.0
        if signed > 0:
            return RowRuleOutcome("violated", residual=distance)
        return RowRuleOutcome("satisfied", margin=distance)
    # implication
    antecedent = _cell(table, row_idx, rule.when_field)
    if antecedent is None:
        return RowRuleOutcome("vacuous")
    if str(antecedent) not in rule.when_values:
        return RowRuleOutcome("satisfied", margin=None)  # inactive, unbounded
    return evaluate_rule(rule.consequent, table, row_idx)


def _cell(table: RecordTable, row_idx: int, field_name: str):
    j = table.column_index(field_name)
    if table.missing_mask[row_idx, j]:
        return None
    return table.rows[row_idx][j]


def violation_rate(table: RecordTable, rules: ConstraintRuleSet):
    """Fraction of rows violating at least one rule, with per-rule counts."""
    validate_rules(table, rules)
    if table.n == 0:
        raise EvaluationError("violation rate is undefined on an empty table")
    per_rule = {rule.id: 0 for rule in rules.rules}
    vacuous = {rule.id: 0 for rule in rules.rules}
    violating_rows = 0
    for i in range(table.n):
        hit = False
        for rule in rules.rules:
            outcome = evaluate_rule(rule, table, i)
            if outcome.status == "violated":
                per_rule[rule.id] += 1
                hit = True
            elif outcome.status == "vacuous":
                vacuous[rule.id] += 1
        if hit:
            violating_rows += 1
    rate = violating_rows / table.n
    diagnostics = {
        "violating_rows": violating_rows,
        "per_rule_violations": per_rule,
        "per_rule_vacuous": vacuous,
        "rule_count": len(rules),
    }
    return rate, diagnostics


def violation_magnitude(table: RecordTable, rules: ConstraintRuleSet):
    """Mean, over violating rows, of the distance back to validity.

    Per row the distance combines the violated rules' residuals as an
    L2 norm (exact when the rules touch disjoint fields); categorical
    violations contribute unit magnitude.
    """
    validate_rules(table, rules)
    magnitudes = []
    for i in range(table.n):
        sq = 0.0
        violated = False
        for rule in rules.rules:
            outcome = evaluate_rule(rule, table, i)
            if outcome.status == "violated":
                violated = True
                sq += outcome.residual ** 2
        if violated:
            magnitudes.append(math.sqrt(sq))
    if not magnitudes:
        return 0.0, {"violating_rows": 0}
    return float(np.mean(magnitudes)), {"violating_rows": len(magnitudes)}


def margin_to_boundary(table: RecordTable, rules: ConstraintRuleSet):
    """Mean, over fully valid rows, of the distance to the nearest boundary.

    Returns (None, diagnostics) when no row is valid or no rule bounds the
    valid rows. The per-row distribution is reported in the diagnostics.
    """
    validate_rules(table, rules)
    margins = []
    invalid_rows = 0
    unbounded_rows = 0
    for i in range(table.n):
        row_margins = []
        violated = False
        for rule in rules.rules:
            outcome = evaluate_rule(rule, table, i)
            if outcome.status == "violated":
                violated = True
                break
            if outcome.status == "satisfied" and outcome.margin is not None:
                row_margins.append(outcome.margin)
        if violated:
            invalid_rows += 1
        elif row_margins:
            margins.append(min(row_margins))
        else:
            unbounded_rows += 1
    diagnostics = {
        "invalid_rows": invalid_rows,
        "unbounded_rows": unbounded_rows,
        "valid_rows": len(margins),
    }
    if not margins:
        return None, diagnostics
    arr = np.asarray(margins)
    diagnostics["margins"] = [float(v) for v in arr]
    diagnostics["margin_min"] = float(arr.min())
    diagnostics["margin_max"] = float(arr.max())
    diagnostics["margin_median"] = float(np.median(arr))
    return float(arr.mean()), diagnostics
