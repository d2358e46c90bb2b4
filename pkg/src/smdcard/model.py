"""Core data model: embedding sets, record tables, metric results.

All containers are immutable after construction; numpy buffers are marked
read-only so instances can be shared freely across worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .catalog import MetricDescriptor, descriptor
from .errors import InputError

COLUMN_KINDS = ("numeric", "categorical", "text")


def _frozen_array(values, dtype=np.float64, ndim=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise InputError(f"expected a {ndim}-dimensional array, got {arr.ndim}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EmbeddingSet:
    """n rows of d-dimensional feature coordinates with per-row identifiers.

    Optional per-row ``subgroup`` labels drive consistency breakdowns;
    optional ``region`` tags drive local (per-region) evaluation.
    """

    ids: tuple[str, ...]
    data: np.ndarray
    subgroup: tuple[str, ...] | None = None
    region: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "data", _frozen_array(self.data, ndim=2))
        n, d = self.data.shape
        if n < 1 or d < 1:
            raise InputError("embedding set needs at least one row and one column")
        if len(self.ids) != n:
            raise InputError(f"{len(self.ids)} ids for {n} rows")
        if len(set(self.ids)) != n:
            dup = sorted({i for i in self.ids if self.ids.count(i) > 1})[0]
            raise InputError(f"duplicate id {dup!r}")
        for attr in ("subgroup", "region"):
            labels = getattr(self, attr)
            if labels is not None:
                labels = tuple(str(v) for v in labels)
                if len(labels) != n:
                    raise InputError(f"{attr} has {len(labels)} entries for {n} rows")
                object.__setattr__(self, attr, labels)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def subset(self, indices: Iterable[int]) -> "EmbeddingSet":
        idx = list(indices)
        if not idx:
            raise InputError("cannot take an empty subset of an embedding set")
        return EmbeddingSet(
            ids=tuple(self.ids[i] for i in idx),
            data=self.data[idx],
            subgroup=tuple(self.subgroup[i] for i in idx) if self.subgroup else None,
            region=tuple(self.region[i] for i in idx) if self.region else None,
        )

    def labels_of(self, column: str) -> tuple[str, ...] | None:
        if column == "subgroup":
            return self.subgroup
        if column == "region":
            return self.region
        raise InputError(f"unknown label column {column!r}")


@dataclass(frozen=True)
class RecordTable:
    """Typed tabular records with an explicit missingness mask.

    ``columns`` is an ordered tuple of (name, kind) with kind in
    numeric / categorical / text. Masked cells hold None.
    """

    columns: tuple[tuple[str, str], ...]
    rows: tuple[tuple[Any, ...], ...]
    missing_mask: np.ndarray

    def __post_init__(self):
        cols = tuple((str(n), str(k)) for n, k in self.columns)
        object.__setattr__(self, "columns", cols)
        names = [n for n, _ in cols]
        if len(set(names)) != len(names):
            raise InputError("duplicate column names in record table")
        for name, kind in cols:
            if kind not in COLUMN_KINDS:
                raise InputError(f"column {name!r} has unknown kind {kind!r}")
        m = len(cols)
        rows = tuple(tuple(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        for i, row in enumerate(rows):
            if len(row) != m:
                raise InputError(f"row {i} has {len(row)} cells, expected {m}")
        mask = _frozen_array(self.missing_mask, dtype=bool, ndim=2)
        if mask.shape != (len(rows), m):
            raise InputError("missing mask shape does not match the table")
        object.__setattr__(self, "missing_mask", mask)
        for i, row in enumerate(rows):
            for j in range(m):
                if mask[i, j] and row[j] is not None:
                    raise InputError(f"masked cell ({i},{j}) carries a value")

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def m(self) -> int:
        return len(self.columns)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.columns)

    def column_index(self, name: str) -> int:
        for j, (n, _) in enumerate(self.columns):
            if n == name:
                return j
        raise InputError(f"no column named {name!r}")

    def kind(self, name: str) -> str:
        return self.columns[self.column_index(name)][1]

    def column(self, name: str) -> list:
        j = self.column_index(name)
        return [row[j] for row in self.rows]

    def numeric_values(self, name: str) -> np.ndarray:
        """Non-missing values of a numeric column."""
        if self.kind(name) != "numeric":
            raise InputError(f"column {name!r} is not numeric")
        j = self.column_index(name)
        vals = [row[j] for i, row in enumerate(self.rows) if not self.missing_mask[i, j]]
        return np.asarray(vals, dtype=np.float64)

    def observed_domain(self, name: str) -> tuple:
        """Sorted distinct non-missing values of a column."""
        j = self.column_index(name)
        vals = {row[j] for i, row in enumerate(self.rows) if not self.missing_mask[i, j]}
        return tuple(sorted(vals, key=repr))


@dataclass(frozen=True)
class MetricResult:
    """One computed metric value with provenance.

    ``value`` is a float, ``math.inf`` as an explicit sentinel, or None when
    the metric is undefined for the inputs (reason recorded in diagnostics).
    ``normalized`` is filled by the aggregation stage, on the 0-100 scale.
    """

    descriptor: MetricDescriptor
    value: float | None
    scope: str = "global"
    normalized: float | None = None
    diagnostics: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.value is not None:
            v = float(self.value)
            if v != v:  # NaN never allowed; undefined is expressed as None
                raise InputError(f"{self.descriptor.name}: NaN metric value")
            object.__setattr__(self, "value", v)
        if self.normalized is not None:
            nv = float(self.normalized)
            if not (0.0 <= nv <= 100.0):
                raise InputError(f"normalized value {nv} outside [0, 100]")
            object.__setattr__(self, "normalized", nv)
        object.__setattr__(self, "diagnostics", dict(self.diagnostics))

    @property
    def defined(self) -> bool:
        return self.value is not None

    def with_normalized(self, normalized: float | None) -> "MetricResult":
        return MetricResult(self.descriptor, self.value, self.scope,
                            normalized, self.diagnostics)


def make_result(name: str, value, scope: str = "global", **diagnostics) -> MetricResult:
    return MetricResult(descriptor(name), value, scope, None, diagnostics)


def undefined_result(name: str, reason: str, scope: str = "global",
                     **diagnostics) -> MetricResult:
    diagnostics = dict(diagnostics)
    diagnostics["undefined_reason"] = reason
    return MetricResult(descriptor(name), None, scope, None, diagnostics)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationOutcome:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def messages(self) -> list[str]:
        return [str(v) for v in self.violations]


def validate_inputs(real: EmbeddingSet | None, synthetic: EmbeddingSet,
                    config) -> ValidationOutcome:
    """Check the evaluation plan against the supplied embedding sets.

    Violations are returned as data (never raised): missing reference set for
    a binary metric, dimension mismatch, non-finite values, empty labels,
    neighborhood sizes too large for the data.
    """
    violations: list[Violation] = []

    def add(code, message):
        violations.append(Violation(code, message))

    if synthetic is None:
        add("E221", "synthetic embedding set is required")
        return ValidationOutcome(tuple(violations))

    for label, eset in (("synthetic", synthetic), ("real", real)):
        if eset is None:
            continue
        bad = np.argwhere(~np.isfinite(eset.data))
        if bad.size:
            i, j = (int(x) for x in bad[0])
            add("E222", f"{label} set has a non-finite value at id "
                        f"{eset.ids[i]!r}, column {j}")
        for attr in ("subgroup", "region"):
            labels = getattr(eset, attr)
            if labels is not None and any(v == "" for v in labels):
                add("E223", f"{label} set has an empty {attr} label")

    selected = [descriptor(name) for name in config.metrics]
    binary_embedding = [d for d in selected
                        if d.arity == "binary" and d.source == "embedding"]
    if real is None and binary_embedding:
        for d in binary_embedding:
            add("E224", f"metric {d.name!r} requires a reference set")
    elif real is not None and real.d != synthetic.d:
        add("E225", f"dimension mismatch: real d={real.d}, synthetic d={synthetic.d}")

    for d in selected:
        if d.source != "embedding":
            continue
        k = int(config.params.get(d.name, {}).get("k", 0) or 0)
        if not k:
            continue
        limit = None
        if d.name in ("precision", "rarity_score") and real is not None:
            limit = ("real", real.n - 1)
        elif d.name == "coverage" and real is not None:
            limit = ("real", real.n - 1)
        elif d.name == "recall":
            limit = ("synthetic", synthetic.n - 1)
        if limit is not None and k > limit[1]:
            add("E226", f"metric {d.name!r}: k={k} exceeds the "
                        f"{limit[0]} set's limit of {limit[1]}")

    return ValidationOutcome(tuple(violations))
