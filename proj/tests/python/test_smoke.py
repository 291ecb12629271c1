import json

import numpy as np
import pytest

import flrr


def make_data(n=60, p=15, seed=0, sd=0.1):
    rng = np.random.default_rng(seed)
    t = (np.arange(p) + 0.5) / p
    j = np.arange(1, 21) - 0.5
    basis = np.sqrt(2) * np.sin(np.pi * np.outer(t, j)) / (np.pi * j)
    x = rng.standard_normal((n, 20)) @ basis.T
    beta = np.sin(2 * np.pi * t) + t
    y = 0.5 + x @ beta / p + sd * rng.standard_normal(n)
    return x, y, t


def test_square_fit_reproduces_and_round_trips(tmp_path):
    x, y, t = make_data()
    model = flrr.fit(x, y, t, loss="square", lam=1e-4, lower=[0.0], upper=[1.0])
    assert model.loss == "square"
    assert model.sigma == 1.0
    np.testing.assert_allclose(model.fitted + model.residuals, y, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(model.predict(x), model.fitted)

    path = tmp_path / "model.json"
    model.save(str(path))
    back = flrr.load_model(str(path))
    np.testing.assert_array_equal(back.predict(x), model.predict(x))
    assert json.loads(model.to_json())["format_version"] == 1
    np.testing.assert_allclose(model.volumes.sum(), 1.0, rtol=1e-14)


def test_huber_with_cross_validation():
    x, y, t = make_data(seed=1)
    y[::10] += 5.0
    grid = flrr.logspace_grid(1e-7, 1.0, 8)
    model = flrr.fit(x, y, t, loss="huber", lambda_grid=grid, lower=[0.0], upper=[1.0])
    assert model.rcv is not None
    assert model.lam in grid
    assert model.rcv["chosen_lambda"] == model.lam
    assert model.sigma > 0
    flagged = set(model.outliers()["indices"])
    assert set(range(0, 60, 10)) <= flagged
    knots = model.coefficient_function(t)
    np.testing.assert_allclose(knots, model.beta_at_knots, rtol=1e-10, atol=1e-10)


def test_m_scale_solves_its_equation():
    r = np.random.default_rng(3).standard_normal(200)
    s = flrr.m_scale(r)
    u = np.clip(np.abs(r / s) / 1.547, 0, 1)
    assert abs(np.mean(1 - (1 - u**2) ** 3) - 0.5) < 1e-10
    assert abs(flrr.m_scale(4.0 * r) - 4.0 * s) < 1e-10 * s
    assert flrr.tau_scale(r) > 0


def test_errors_map_to_python_exceptions():
    x, y, t = make_data(n=12, p=6)
    with pytest.raises(ValueError):
        flrr.fit(x, y, t, loss="bisquare", lam=1e-3)
    with pytest.raises(ValueError):
        flrr.fit(x, y[:5], t, loss="square", lam=1e-3)
    with pytest.raises(ValueError):
        flrr.m_scale(np.array([]))
    xs, ys, ts = make_data(n=6, p=15, seed=4)
    with pytest.raises(flrr.NumericalError):
        flrr.fit(xs, ys, ts, loss="huber", lam=1e-3, lower=[0.0], upper=[1.0])


def test_two_dimensional_volumes_fill_the_box():
    rng = np.random.default_rng(5)
    pts = rng.uniform(0.05, 0.95, size=(12, 2))
    vol = flrr.grid_volumes(pts, lower=[0.0, 0.0], upper=[1.0, 1.0])
    assert vol.shape == (12,)
    assert np.all(vol > 0)
    np.testing.assert_allclose(vol.sum(), 1.0, rtol=1e-12)


def test_simulate_is_thread_independent(tmp_path):
    kw = dict(model_ids=[2], n=40, p=[20], reps=3, seed=9, losses=["square", "huber"],
              lambda_grid=list(flrr.logspace_grid(1e-6, 1.0, 5)), timing=False)
    a = flrr.simulate(threads=1, out=str(tmp_path / "a.csv"), **kw)
    b = flrr.simulate(threads=2, out=str(tmp_path / "b.csv"), **kw)
    assert len(a) == 2
    assert [r["loss"] for r in a] == ["square", "huber"]
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a[0]["spe_mean"] == b[0]["spe_mean"]
