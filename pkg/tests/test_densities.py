import numpy as np
import pytest

from mixsel import (Dataset, EmptyWeight, UnsupportedValue, VariableKind,
                    column_loglik, log_density, weighted_mle)

CONT = VariableKind.continuous()
INT = VariableKind.integer()
CAT4 = VariableKind.categorical(4)


def test_log_density_reference_values():
    assert log_density(0.0, CONT, np.array([0.0, 1.0])) == pytest.approx(-0.9189385, abs=1e-7)
    assert log_density(0.0, INT, np.array([1.0])) == pytest.approx(-1.0)
    quarter = np.full(4, 0.25)
    assert log_density(2.0, CAT4, quarter) == pytest.approx(-1.3862944, abs=1e-7)


def test_log_density_support_checks():
    with pytest.raises(UnsupportedValue):
        log_density(-1.0, INT, np.array([1.0]))
    with pytest.raises(UnsupportedValue):
        log_density(2.5, INT, np.array([1.0]))
    with pytest.raises(UnsupportedValue):
        log_density(5.0, CAT4, np.full(4, 0.25))
    with pytest.raises(UnsupportedValue):
        log_density(np.nan, CONT, np.array([0.0, 1.0]))


def test_weighted_mle_two_point_examples():
    blk = weighted_mle([0.0, 2.0], [1.0, 1.0], CONT)
    assert blk[0] == pytest.approx(1.0) and blk[1] == pytest.approx(1.0)
    blk = weighted_mle([1.0, 3.0], [1.0, 1.0], INT)
    assert blk[0] == pytest.approx(2.0)
    blk = weighted_mle([1.0, 1.0, 2.0], [1.0, 1.0, 1.0], VariableKind.categorical(2))
    assert blk == pytest.approx([2.0 / 3.0, 1.0 / 3.0])


def test_weighted_mle_empty_weight():
    with pytest.raises(EmptyWeight):
        weighted_mle([1.0], [0.0], CONT)


def test_all_ones_weights_match_unweighted():
    rng = np.random.default_rng(7)
    x = rng.normal(size=25)
    blk = weighted_mle(x, np.ones(25), CONT)
    assert blk[0] == pytest.approx(x.mean(), abs=1e-12)
    assert blk[1] == pytest.approx(x.std(), abs=1e-12)


def _wll(values, weights, kind, block):
    return sum(w * log_density(v, kind, block) for v, w in zip(values, weights))


@pytest.mark.parametrize("kind", [CONT, INT, VariableKind.categorical(3)])
def test_weighted_mle_is_stationary(kind):
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(3, 15))
        if kind.tag == "cont":
            values = rng.normal(2.0, 1.5, n)
        elif kind.tag == "int":
            values = rng.poisson(4.0, n).astype(float)
        else:
            values = rng.integers(1, 4, n).astype(float)
        weights = rng.uniform(0.05, 1.0, n)
        block = weighted_mle(values, weights, kind)
        base = _wll(values, weights, kind, block)
        for pos in range(len(block)):
            for eps in (1e-3, -1e-3):
                pert = block.copy()
                pert[pos] += eps
                if kind.tag == "cat":
                    if (pert <= 0).any():
                        continue
                    pert = pert / pert.sum()
                elif pert[-1] <= 0:
                    continue
                assert _wll(values, weights, kind, pert) <= base + 1e-9


def test_categorical_masses_sum_to_one():
    rng = np.random.default_rng(3)
    for m in (2, 3, 5):
        kind = VariableKind.categorical(m)
        values = rng.integers(1, m + 1, 30).astype(float)
        block = weighted_mle(values, rng.uniform(0.1, 1, 30), kind)
        total = sum(np.exp(log_density(h + 1.0, kind, block)) for h in range(m))
        assert total == pytest.approx(1.0, abs=1e-12)


def test_column_loglik_additivity():
    X = np.array([[1.0], [np.nan], [2.0]])
    ds = Dataset(X, [CONT])
    blk = np.array([0.5, 1.2])
    single = column_loglik(ds, 0, [0], blk)
    assert single == pytest.approx(log_density(1.0, CONT, blk))
    assert column_loglik(ds, 0, [1], blk) == 0.0
    both = column_loglik(ds, 0, [0, 1, 2], blk)
    assert both == pytest.approx(single + log_density(2.0, CONT, blk))
