import numpy as np
import pytest

from ramanqot import (ChannelPlan, FitError, FitOptions, ProfileFit, PumpSet, RamanGainCurve, Span, eval_rho,
                      fit_all, fit_channel, fit_to_csv, effective_length_errors, pooled_residual_db, solve_forward)
from ramanqot.fitting import integrated_rho, rho_model

from conftest import toy_fiber

Z = np.linspace(0.0, 80e3, 1001)


def test_eval_rho_boundary_and_lumped():
    fit = ProfileFit.lumped([193e12], 4.6e-5, 80e3)
    assert eval_rho(fit, 0, 0.0) == 1.0
    assert np.allclose(eval_rho(fit, 0, Z), np.exp(-4.6e-5 * Z), rtol=1e-14)
    # 80 km at 0.2 dB/km: exp(-3.68), about -16 dB
    assert eval_rho(fit, 0, 80e3) == pytest.approx(np.exp(-3.68), rel=1e-12)
    assert eval_rho(fit, 0, 80e3) == pytest.approx(0.0252, abs=5e-5)


@pytest.mark.parametrize("gf,gb", [(-3e-5, -1e-5), (2e-5, 0.0), (-1e-5, -4e-5)])
def test_eval_rho_is_one_at_origin_for_any_coefficients(gf, gb):
    r = rho_model(0.0, 4.6e-5, 5e-5, 6e-5, gf, gb, 80e3)
    assert r == pytest.approx(1.0, abs=1e-15)


def test_synthetic_profile_is_reproduced():
    truth = dict(alpha=4.6e-5, alpha_f=5e-5, alpha_b=6e-5, gain_f=-3e-5, gain_b=-1.5e-5)
    rho = rho_model(Z, truth["alpha"], truth["alpha_f"], truth["alpha_b"], truth["gain_f"], truth["gain_b"], 80e3)
    res = fit_channel(Z, rho, 4.6e-5, use_b=True)
    back = rho_model(Z, res.alpha, res.alpha_f, res.alpha_b, res.gain_f, res.gain_b, 80e3)
    # parameters may move along degenerate directions; the profile may not
    assert np.max(np.abs(10 * np.log10(back / rho))) < 1e-6
    assert res.max_db < 1e-6


def test_loss_only_ode_profile():
    span = Span(toy_fiber(0.2), ChannelPlan(np.array([193e12]), np.array([64e9]), np.array([1e-3])))
    prof = solve_forward(span)
    fit = fit_all(prof, span)
    assert fit.rms_db[0] < 0.01
    assert np.allclose(eval_rho(fit, 0, Z), np.exp(-fit.alpha[0] * Z), rtol=1e-6)


def test_single_channel_single_pump():
    g = RamanGainCurve.triangular(0.42e-3 / 13e12)
    span = Span(toy_fiber(0.2, gain=g), ChannelPlan(np.array([193e12]), np.array([64e9]), np.array([1e-3])),
                PumpSet(np.array([206e12]), ("FW",), np.array([0.3])))
    prof = solve_forward(span)
    fit = fit_all(prof, span)
    assert eval_rho(fit, 0, 0.0) == 1.0
    assert fit.converged.all()
    assert fit.f_hat == 206e12
    assert fit.c_f[0] > 0  # the channel sits below f_hat and is amplified


def test_zero_pump_recovers_lumped_form(scenario):
    _, prof, fit = scenario("zero_pump")
    assert fit.f_hat == 0.0
    assert np.all(fit.c_b == 0)
    assert np.all(fit.alpha_b == fit.alpha)
    assert effective_length_errors(fit, prof).max() < 0.01


def test_fw_pooled_residual(scenario):
    _, prof, fit = scenario("fw")
    assert len(fit) == 131
    assert pooled_residual_db(fit, prof) <= 0.5


def test_alpha_floor_is_respected(scenario):
    plan, _, fit = scenario("bw")
    a0 = plan.spans[0].fiber.attenuation(fit.frequency)
    floor = FitOptions().alpha_floor * a0
    for a in (fit.alpha, fit.alpha_f, fit.alpha_b):
        assert np.all(a >= floor * (1 - 1e-12))


def test_triangular_slope():
    assert RamanGainCurve.zero().triangular_slope() == 0.0
    assert RamanGainCurve.triangular(3e-17).triangular_slope() == pytest.approx(3e-17, rel=1e-12)


def test_integrated_rho_lumped():
    fit = ProfileFit.lumped([193e12], 4.6e-5, 80e3)
    leff = -np.expm1(-4.6e-5 * 80e3) / 4.6e-5
    assert integrated_rho(fit, 0) == pytest.approx(leff, rel=1e-10)


def test_degenerate_profile_raises():
    with pytest.raises(FitError):
        fit_channel(Z, np.zeros_like(Z), 4.6e-5)
    with pytest.raises(FitError):
        fit_channel(Z, np.full_like(Z, np.nan), 4.6e-5)


def test_fit_csv(scenario, tmp_path):
    _, _, fit = scenario("fw")
    path = tmp_path / "fit.csv"
    fit_to_csv(fit, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("wavelength_nm,alpha_1_m")
    assert len(lines) == 1 + 131
