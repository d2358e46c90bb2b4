import csv
import pathlib

import pytest

from smdcard import catalog
from smdcard.errors import ConfigError

GOLDEN = pathlib.Path(__file__).parent / "data" / "metric_catalog_golden.csv"

_DIRECTION = {"Maximize": "maximize", "Minimize": "minimize",
              "Stat. Sig.": "stat-sig"}
_SPACE = {"Embedding": "embedding", "Image": "image", "Metadata": "metadata",
          "Data Attribute": "data-attribute", "Documentation": "documentation",
          "Quality Metrics": "quality-metrics"}


def _golden_rows():
    with open(GOLDEN, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_catalog_matches_golden_row_for_row():
    golden = _golden_rows()
    rows = catalog.catalog_rows()
    assert len(rows) == len(golden)
    for descriptor, expected in zip(rows, golden):
        assert descriptor.label == expected["metric"]
        assert descriptor.criterion == expected["criterion"].lower()
        assert descriptor.space == _SPACE[expected["space"]]
        assert descriptor.arity == expected["binary"].lower()
        assert descriptor.direction == _DIRECTION[expected["direction"]]
        assert descriptor.image_only == (expected["image_metric"] == "Yes")


def test_names_unique_and_resolvable():
    names = [d.name for d in catalog.CATALOG + catalog.EXTRAS]
    assert len(set(names)) == len(names)
    for name in names:
        assert catalog.descriptor(name).name == name


def test_unknown_metric_raises():
    with pytest.raises(ConfigError):
        catalog.descriptor("no_such_metric")


def test_score_direction_defaults_to_direction():
    flipped = {d.name for d in catalog.CATALOG + catalog.EXTRAS
               if d.score_direction != d.direction}
    assert flipped == {"t_closeness", "nearest_invalid_datapoint"}


def test_criteria_cover_all_seven():
    assert {d.criterion for d in catalog.CATALOG} == set(catalog.CRITERIA)


def test_declaration_only_metric_not_selectable():
    assert "differential_privacy_score" not in catalog.selectable_names()
    assert "k_anonymity" in catalog.selectable_names()
