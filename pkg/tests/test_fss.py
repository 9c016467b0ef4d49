import numpy as np
import pytest

from cipt.analysis import CollapseInput, collapse_loss, fit_collapse
from cipt.errors import (FitFailureError, InsufficientDataError,
                         ParameterError, SingularLossError)


def _static_synthetic(rng, p_c=0.5, nu=1.0, beta=1.0, noise=0.01,
                      sizes=(8, 12, 16, 24, 32), lo=0.45, hi=0.55,
                      step=0.004):
    q, L, y, s = [], [], [], []
    for size in sizes:
        scale = 2.0 * size ** (-beta / nu)
        for p in np.arange(lo, hi + step / 2, step):
            x = (p - p_c) * size ** (1.0 / nu)
            val = (1 + np.tanh(1.5 * x)) * size ** (-beta / nu)
            sig = noise * scale
            q.append(p)
            L.append(size)
            y.append(val + rng.normal(0.0, sig))
            s.append(sig)
    return CollapseInput(q=q, L=L, y=y, sigma=s, ansatz="static",
                         beta_multiplier=1, window=(lo, hi))


def test_synthetic_recovery_within_two_percent(rng):
    data = _static_synthetic(rng)
    fit = fit_collapse(data, {"p_c": 0.5, "nu": 1.0, "beta": 1.0})
    assert fit.converged
    assert abs(fit.params["p_c"] - 0.5) / 0.5 < 0.02
    assert abs(fit.params["nu"] - 1.0) < 0.02
    assert abs(fit.params["beta"] - 1.0) < 0.02
    for name in ("p_c", "nu", "beta"):
        assert fit.errors[name] > 0.0


def test_loss_ordering_on_master_curve(rng):
    data = _static_synthetic(rng)
    truth = {"p_c": 0.5, "nu": 1.0, "beta": 1.0}
    l0 = collapse_loss(truth, data)
    assert 0.2 < l0 < 5.0  # chi2-per-point scale when sigma matches noise
    for dpc in (-0.05, 0.05):
        off = dict(truth, p_c=truth["p_c"] + dpc)
        assert collapse_loss(off, data) > l0


def test_loss_permutation_invariant(rng):
    data = _static_synthetic(rng, sizes=(8, 16), step=0.01)
    params = {"p_c": 0.49, "nu": 1.1, "beta": 0.9}
    l0 = collapse_loss(params, data)
    perm = rng.permutation(len(data.q))
    shuffled = CollapseInput(q=data.q[perm], L=data.L[perm], y=data.y[perm],
                             sigma=data.sigma[perm], ansatz="static",
                             beta_multiplier=1, window=data.window)
    assert collapse_loss(params, shuffled) == pytest.approx(l0, rel=1e-12)


def test_dynamic_recovery(rng):
    z, beta = 2.0, 1.0
    q, L, y, s = [], [], [], []
    for size in (16, 32, 64):
        for t in range(1, int(0.6 * size) + 1):
            u = t / size ** z
            g = np.tanh(400 * u) * (1 + 5 * u)
            sig = 0.01 * size ** (-2 * beta)
            q.append(float(t))
            L.append(size)
            y.append(g * size ** (-2 * beta) + rng.normal(0, sig))
            s.append(sig)
    data = CollapseInput(q=q, L=L, y=y, sigma=s, ansatz="dynamic",
                         beta_multiplier=2, window=(1.0, 0.6),
                         window_scale="per_size")
    fit = fit_collapse(data, {"z": 2.0, "beta": 1.0})
    assert fit.converged
    assert abs(fit.params["z"] - z) < 0.02
    assert abs(fit.params["beta"] - beta) < 0.02
    assert fit.params["p_c"] is None
    assert fit.errors["z"] >= 0.0


def test_dynamic_window_is_per_size():
    q = [1.0, 5.0, 9.0, 1.0, 5.0, 20.0]
    L = [8, 8, 8, 32, 32, 32]
    data = CollapseInput(q=q, L=L, y=np.zeros(6), sigma=np.ones(6),
                         ansatz="dynamic", beta_multiplier=1,
                         window=(1.0, 0.6), window_scale="per_size")
    qw, Lw, _, _ = data.windowed()
    # 0.6 L cuts: keeps t <= 4.8 at L=8, t <= 19.2 at L=32
    assert list(qw) == [1.0, 1.0, 5.0]
    assert list(Lw) == [8, 32, 32]


def test_fixed_parameters_pinned(rng):
    data = _static_synthetic(rng, beta=0.0, sizes=(8, 16, 24), step=0.01)
    fit = fit_collapse(data, {"p_c": 0.5, "nu": 1.0}, fixed={"beta": 0.0})
    assert fit.params["beta"] == 0.0
    assert fit.errors["beta"] is None
    assert abs(fit.params["p_c"] - 0.5) < 0.01


def test_window_filtering(rng):
    data = _static_synthetic(rng, sizes=(8, 16), lo=0.3, hi=0.7, step=0.02)
    narrow = CollapseInput(q=data.q, L=data.L, y=data.y, sigma=data.sigma,
                           ansatz="static", beta_multiplier=1,
                           window=(0.45, 0.55))
    qw = narrow.windowed()[0]
    assert qw.min() >= 0.45 - 1e-12 and qw.max() <= 0.55 + 1e-12
    assert len(qw) < len(data.q)


def test_loss_domain_errors(rng):
    data = _static_synthetic(rng, sizes=(8, 16), step=0.01)
    with pytest.raises(ParameterError):
        collapse_loss({"p_c": 0.5, "nu": -1.0, "beta": 0.0}, data)
    with pytest.raises(ParameterError):
        collapse_loss({"p_c": 0.5, "nu": 0.0, "beta": 0.0}, data)


def test_coincident_x_zero_sigma_is_singular():
    # two sizes at the same scaled position with conflicting y and sigma=0
    data = CollapseInput(q=[0.5, 0.5, 0.52, 0.52], L=[8, 16, 8, 16],
                         y=[0.1, 0.9, 0.2, 0.8],
                         sigma=[0.0, 0.0, 0.0, 0.0], ansatz="static",
                         beta_multiplier=1)
    with pytest.raises(SingularLossError):
        collapse_loss({"p_c": 0.5, "nu": 1.0, "beta": 0.0}, data)


def test_single_size_rejected():
    with pytest.raises(ParameterError):
        CollapseInput(q=[0.4, 0.5, 0.6], L=[8, 8, 8], y=[0.0, 0.1, 0.2],
                      sigma=[0.1, 0.1, 0.1])


def test_too_few_windowed_points(rng):
    data = _static_synthetic(rng, sizes=(8, 16), step=0.05)
    tiny = CollapseInput(q=data.q, L=data.L, y=data.y, sigma=data.sigma,
                         ansatz="static", beta_multiplier=1,
                         window=(0.499, 0.501))
    with pytest.raises(InsufficientDataError):
        fit_collapse(tiny, {"p_c": 0.5, "nu": 1.0, "beta": 0.0})


def test_fit_failure_carries_best(rng, monkeypatch):
    import cipt.analysis.fss as fss
    data = _static_synthetic(rng, sizes=(8, 16), step=0.01)
    monkeypatch.setattr(fss, "_MAX_ITER", 1)
    with pytest.raises(FitFailureError) as exc:
        fit_collapse(data, {"p_c": 0.46, "nu": 1.4, "beta": 0.5})
    assert exc.value.best is not None
    assert np.isfinite(exc.value.best.chi2_nu)


def test_result_json_shape(rng):
    data = _static_synthetic(rng, sizes=(8, 16, 24), step=0.01)
    fit = fit_collapse(data, {"p_c": 0.5, "nu": 1.0, "beta": 1.0})
    d = fit.to_json_dict()
    assert set(d) >= {"ansatz", "window", "params", "errors", "chi2_nu",
                      "n_points"}
    assert set(d["params"]) == {"p_c", "nu", "beta", "z"}
    assert d["ansatz"] == "static"
