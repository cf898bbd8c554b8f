import numpy as np
import pytest

from mixsel import (Dataset, EmConfig, Model, VariableKind, aic, bic,
                    count_params, map_partition, observed_loglik, select_model)

CONT = VariableKind.continuous()
INT = VariableKind.integer()


def test_count_params_examples():
    assert count_params(Model(2, [1]), [CONT]) == 5
    assert count_params(Model(2, [0]), [CONT]) == 3
    assert count_params(Model(3, [1]), [VariableKind.categorical(4)]) == 11
    assert count_params(Model(2, [1, 0, 1]), [CONT, INT, VariableKind.categorical(3)]) == \
        1 + 2 * 2 + 1 + 2 * 2


def test_bic_aic_arithmetic():
    assert bic(-100.0, 5, 100) == pytest.approx(-111.51293, abs=1e-5)
    assert bic(-7.25, 0, 50) == -7.25
    assert bic(-7.25, 5, 1) == -7.25
    assert aic(-100.0, 5) == -105.0
    with pytest.raises(ValueError):
        bic(0.0, 1, 0)


def test_map_partition_rules():
    t = np.array([[0.9, 0.1], [0.5, 0.5], [0.0, 1.0]])
    assert list(map_partition(t)) == [1, 1, 2]
    one_hot = np.eye(3)
    assert list(map_partition(one_hot)) == [1, 2, 3]


def _noise_dataset(seed=0, n=200, d=5):
    rng = np.random.default_rng(seed)
    return Dataset(rng.normal(size=(n, d)), [CONT] * d)


def test_select_model_no_structure_picks_one_component():
    ds = _noise_dataset()
    report = select_model(ds, "bic", 3, EmConfig(seed=7, n_starts=8))
    assert report.best.g == 1
    assert not report.best.model.omega.any()
    assert (report.partition == 1).all()


def test_select_model_gmax_one_returns_empty_relevance():
    ds = _noise_dataset(seed=1, n=40, d=3)
    for crit in ("bic", "aic", "micl"):
        report = select_model(ds, crit, 1, EmConfig(seed=2, n_starts=3))
        assert report.best.g == 1
        assert not report.best.model.omega.any()


def test_select_model_bic_identity():
    ds = _noise_dataset(seed=2, n=80, d=4)
    report = select_model(ds, "bic", 3, EmConfig(seed=3, n_starts=5))
    for rec in report.records:
        ll = observed_loglik(ds, rec.model, rec.theta)
        assert rec.value == pytest.approx(
            bic(ll, count_params(rec.model, ds.kinds), ds.n), abs=1e-8)


def test_select_model_deterministic():
    ds = _noise_dataset(seed=3, n=60, d=3)
    cfg = EmConfig(seed=11, n_starts=4)
    a = select_model(ds, "bic", 2, cfg)
    b = select_model(ds, "bic", 2, cfg)
    assert [r.value for r in a.records] == [r.value for r in b.records]
    assert np.array_equal(a.partition, b.partition)


def test_select_model_noselect_variants():
    rng = np.random.default_rng(4)
    z = np.repeat([0, 1], 50)
    X = np.column_stack([
        rng.normal(3.0 * z, 1.0), rng.normal(-3.0 * z, 1.0), rng.normal(size=100),
    ])
    ds = Dataset(X, [CONT] * 3)
    for crit in ("bic-noselect", "icl-noselect"):
        report = select_model(ds, crit, 3, EmConfig(seed=5, n_starts=6))
        assert report.best.model.omega.all()
        assert report.best.g == 2
