import numpy as np
import pytest

from smdcard.harness import make_gaussian_mixture, make_record_table
from smdcard.model import EmbeddingSet, RecordTable


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gaussian_pair():
    """Reference and synthetic samples from the same 2-mode mixture."""
    modes = [{"mean": 0.0, "scale": 1.0, "weight": 0.5},
             {"mean": 6.0, "scale": 1.0, "weight": 0.5}]
    real = make_gaussian_mixture(120, 5, modes, seed=11)
    synth = make_gaussian_mixture(100, 5, modes, seed=22)
    return real, synth


@pytest.fixture
def identity_pair():
    """Synthetic set that is an exact copy of the reference set."""
    real = make_gaussian_mixture(150, 4, [{"mean": 0.0, "scale": 1.0,
                                           "weight": 1.0}], seed=5)
    synth = EmbeddingSet(ids=tuple(f"s{i}" for i in range(real.n)),
                         data=real.data.copy())
    return real, synth


@pytest.fixture
def small_table():
    return make_record_table(40, seed=7)


def embedding_from(rows, prefix="p") -> EmbeddingSet:
    data = np.asarray(rows, dtype=np.float64)
    return EmbeddingSet(ids=tuple(f"{prefix}{i}" for i in range(len(data))),
                        data=data)


def table_from(columns, rows) -> RecordTable:
    m = len(columns)
    if rows:
        mask = np.array([[(row[j] is None) if j < len(row) else False
                          for j in range(m)] for row in rows], dtype=bool)
    else:
        mask = np.zeros((0, m), dtype=bool)
    return RecordTable(columns=tuple(columns), rows=tuple(tuple(r) for r in rows),
                       missing_mask=mask)
