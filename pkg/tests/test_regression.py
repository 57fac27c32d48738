import numpy as np
import pytest

import misoid as mi
from misoid.regression import _lagged_gram, _lagged_proj, toeplitz_block

from conftest import make_example1


def test_unit_impulse_block():
    d = mi.Dataset(y=np.zeros(3), inputs=np.array([[1.0, 0.0, 0.0]]))
    bank = mi.build_regressors(d, 2)
    np.testing.assert_array_equal(bank.block(0),
                                  np.array([[1, 0], [0, 1], [0, 0.0]]))


def test_toeplitz_layout():
    a, b, c = 1.5, -2.0, 0.3
    d = mi.Dataset(y=np.zeros(3), inputs=np.array([[a, b, c]]))
    bank = mi.build_regressors(d, 2)
    np.testing.assert_array_equal(bank.block(0),
                                  np.array([[a, 0], [b, a], [c, b]]))


def test_prediction_matches_direct_convolution():
    rng = np.random.default_rng(0)
    u = rng.standard_normal(100)
    theta = rng.standard_normal(10)
    d = mi.Dataset(y=np.zeros(100), inputs=u[None, :])
    bank = mi.build_regressors(d, 10)
    direct = np.array([
        sum(theta[j] * (u[i - j] if i - j >= 0 else 0.0) for j in range(10))
        for i in range(100)
    ])
    np.testing.assert_allclose(bank.predict(theta), direct, atol=1e-12)


def test_predict_zero_and_impulse():
    rng = np.random.default_rng(1)
    d = mi.Dataset(y=np.zeros(30),
                   inputs=np.r_[1.0, np.zeros(29)][None, :])
    bank = mi.build_regressors(d, 5)
    assert np.all(bank.predict(np.zeros(5)) == 0.0)
    theta = rng.standard_normal(5)
    np.testing.assert_allclose(bank.predict(theta)[:5], theta, atol=1e-14)


def test_predict_linear():
    rng = np.random.default_rng(2)
    d = mi.Dataset(y=np.zeros(40), inputs=rng.standard_normal((2, 40)))
    bank = mi.build_regressors(d, 4)
    t1, t2 = rng.standard_normal(8), rng.standard_normal(8)
    np.testing.assert_allclose(bank.predict(t1 + t2),
                               bank.predict(t1) + bank.predict(t2),
                               atol=1e-12)


def test_column_norms_match_truncated_input():
    rng = np.random.default_rng(3)
    u = rng.standard_normal(25)
    d = mi.Dataset(y=np.zeros(25), inputs=u[None, :])
    bank = mi.build_regressors(d, 6)
    G = bank.block(0)
    for j in range(6):
        assert np.linalg.norm(G[:, j]) == pytest.approx(
            np.linalg.norm(u[:25 - j]))


def test_true_theta_residual_variance():
    data, system = make_example1(data_seed=11)
    bank = mi.build_regressors(data, 50)
    resid = data.y - bank.predict(system.responses.ravel())
    assert np.var(resid) == pytest.approx(0.3, abs=0.06)


def test_lagged_path_matches_dense():
    rng = np.random.default_rng(4)
    n, m, p = 150, 3, 6
    d = mi.Dataset(y=rng.standard_normal(n),
                   inputs=rng.standard_normal((m, n)))
    dense = mi.build_regressors(d, p)
    lagged = mi.build_regressors(d, p, dense_budget=1)
    assert lagged._blocks is None
    np.testing.assert_allclose(lagged.gtg, dense.gtg, atol=1e-10)
    np.testing.assert_allclose(lagged.gty, dense.gty, atol=1e-10)


def test_lagged_helpers_against_blocks():
    rng = np.random.default_rng(5)
    n, p = 60, 5
    ui, uj = rng.standard_normal(n), rng.standard_normal(n)
    y = rng.standard_normal(n)
    Gi, Gj = toeplitz_block(ui, p), toeplitz_block(uj, p)
    np.testing.assert_allclose(_lagged_gram(ui, uj, p), Gi.T @ Gj, atol=1e-10)
    np.testing.assert_allclose(_lagged_proj(ui, y, p), Gi.T @ y, atol=1e-10)


def test_partial_projection():
    rng = np.random.default_rng(6)
    n, m, p = 50, 3, 4
    d = mi.Dataset(y=rng.standard_normal(n),
                   inputs=rng.standard_normal((m, n)))
    bank = mi.build_regressors(d, p)
    theta = rng.standard_normal(m * p)
    G1 = bank.block(1)
    others = bank.block(0) @ theta[:p] + bank.block(2) @ theta[2 * p:]
    expected = G1.T @ (d.y - others)
    np.testing.assert_allclose(bank.partial_projection((1,), theta),
                               expected, atol=1e-10)


def test_residual_sumsq_matches_direct():
    rng = np.random.default_rng(7)
    d = mi.Dataset(y=rng.standard_normal(80),
                   inputs=rng.standard_normal((2, 80)))
    bank = mi.build_regressors(d, 5)
    theta = rng.standard_normal(10)
    direct = float(np.sum((d.y - bank.predict(theta)) ** 2))
    assert bank.residual_sumsq(theta) == pytest.approx(direct, rel=1e-12)


def test_dataset_validation():
    with pytest.raises(ValueError):
        mi.Dataset(y=np.empty(0), inputs=np.empty((1, 0)))
    with pytest.raises(ValueError):
        mi.Dataset(y=np.ones(5), inputs=np.ones((2, 4)))


def test_order_exceeding_samples_warns():
    d = mi.Dataset(y=np.ones(3), inputs=np.ones((1, 3)))
    with pytest.warns(UserWarning):
        mi.build_regressors(d, 4)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    d = mi.Dataset(y=rng.standard_normal(20),
                   inputs=rng.standard_normal((3, 20)))
    path = tmp_path / "data.csv"
    mi.save_dataset_csv(d, path)
    back = mi.load_dataset_csv(path)
    np.testing.assert_array_equal(back.y, d.y)
    np.testing.assert_array_equal(back.inputs, d.inputs)


def test_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        mi.load_dataset_csv(path)
