from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from ramanqot import (DegenerateError, FiberSpec, LinkPlan, ProfileFit, Span, compute_terms, eta_spm, eta_total,
                      eta_xpm_pair, fit_all, link_function_closed, link_function_exact, nli_to_csv)
from ramanqot.closed import (_atan_over, coherence_factor, phase_mismatch_spm, phase_mismatch_xpm,
                             span_efficiencies)
from ramanqot.integral import FittedRho, entity_index, link_function_numeric

from conftest import toy_channels, toy_fiber

ALPHA = 4.6e-5
L = 80e3


def _lumped_terms():
    return compute_terms(ProfileFit.lumped([193e12], ALPHA, L))


def test_lumped_link_function_at_zero_phase():
    leff = -np.expm1(-ALPHA * L) / ALPHA
    assert link_function_closed(_lumped_terms(), 0, 0.0, L) == pytest.approx(leff ** 2, rel=1e-12)


@given(st.floats(-0.5, 0.5))
def test_lumped_link_function_general_phase(phi):
    expected = (1 + np.exp(-2 * ALPHA * L) - 2 * np.exp(-ALPHA * L) * np.cos(phi * L)) / (ALPHA ** 2 + phi ** 2)
    assert link_function_closed(_lumped_terms(), 0, phi, L) == pytest.approx(expected, rel=1e-10)


def test_closed_link_function_matches_modulus_form(scenario):
    _, _, fit = scenario("fwbw")
    terms = compute_terms(fit)
    phi = np.concatenate([[0.0], np.geomspace(1e-6, 0.5, 60), -np.geomspace(1e-6, 0.5, 20)])
    for j in (0, 40, 90, 130):
        a = link_function_closed(terms, j, phi, L)
        b = link_function_exact(terms, j, phi, L)
        assert np.max(np.abs(a / b - 1)) < 1e-9


def test_closed_link_function_matches_quadrature(scenario):
    plan, _, fit = scenario("bw")
    fiber = plan.spans[0].fiber
    src = FittedRho(fit)
    terms = compute_terms(fit)
    f = fit.frequency
    for i, k in ((10, 60), (65, 66), (120, 5)):
        f1, f2 = f[i] + 50e9, f[k] - 20e9
        # f1 + f2 - f_i lands in channel k's band: rho_1 rho_2 rho_3 / rho_i = rho_k^2
        assert entity_index(src, f1 + f2 - f[i]) == k
        phi = -4 * np.pi ** 2 * (f1 - f[i]) * (f2 - f[i]) * (
            fiber.beta2 + np.pi * fiber.beta3 * (f1 + f2 - 2 * fiber.ref_frequency))
        num = link_function_numeric(src, f1, f2, f[i], fiber)
        # the product integrand is rho_k(z) only when f1 and f_i share a band
        closed = link_function_closed(terms, k, phi, L)
        assert num == pytest.approx(closed, rel=0.02)


def test_xpm_scales_quadratically_with_interferer_power():
    fiber = toy_fiber()
    fit = ProfileFit.lumped(toy_channels(3).frequency, ALPHA, L)
    e = [eta_xpm_pair(fit, fiber, 0, 1, 1e-3, p, 96e9, 96e9) for p in (1e-3, 1e-4, 1e-5)]
    assert e[1] / e[0] == pytest.approx(1e-2, rel=1e-12)
    assert e[2] / e[0] == pytest.approx(1e-4, rel=1e-12)


def test_lumped_spm_matches_known_form():
    # long span so that exp(-alpha L) corrections are negligible
    length = 300e3
    fiber = toy_fiber(length=length)
    f = toy_channels(1).frequency
    fit = ProfileFit.lumped(f, ALPHA, length)
    b = 96e9
    phi = phase_mismatch_spm(f[0], fiber)
    known = 16 / 27 * fiber.gamma ** 2 / b ** 2 * 2 * np.pi / (phi * 2 * ALPHA) * 2 * np.arcsinh(
        3 * phi * b ** 2 / (8 * np.pi * ALPHA))
    assert eta_spm(fit, fiber, 0, b) == pytest.approx(known, rel=1e-6)


def test_gamma_squared_scaling(scenario):
    plan, _, fit = scenario("fw")
    fiber = plan.spans[0].fiber
    double = replace(fiber, gamma=2 * fiber.gamma)
    p = plan.channels.power
    assert eta_spm(fit, double, 7, 96e9) == pytest.approx(4 * eta_spm(fit, fiber, 7, 96e9), rel=1e-12)
    assert eta_xpm_pair(fit, double, 7, 8, p[7], p[8], 96e9, 96e9) == pytest.approx(
        4 * eta_xpm_pair(fit, fiber, 7, 8, p[7], p[8], 96e9, 96e9), rel=1e-12)


def test_atan_over_limit_is_continuous():
    x = np.array([-2e-6, -1e-6 * (1 + 1e-9), -1e-6 * (1 - 1e-9), 0.0, 1e-6 * (1 - 1e-9), 1e-6 * (1 + 1e-9), 2e-6])
    exact = np.where(x == 0, 1.0, np.arctan(np.where(x == 0, 1.0, x)) / np.where(x == 0, 1.0, x))
    assert np.allclose(_atan_over(x), exact, rtol=1e-15, atol=0)


def test_zero_dispersion_is_degenerate():
    fiber = replace(toy_fiber(), beta2=0.0, beta3=0.0)
    fit = ProfileFit.lumped(toy_channels(3).frequency, ALPHA, L)
    assert phase_mismatch_xpm(fit.frequency[0], fit.frequency[1], fiber) == 0.0
    with pytest.raises(DegenerateError):
        eta_xpm_pair(fit, fiber, 0, 1, 1e-3, 1e-3, 96e9, 96e9)
    with pytest.raises(DegenerateError):
        eta_spm(fit, fiber, 0, 96e9)


def test_normal_dispersion_spm_is_rejected():
    fiber = replace(toy_fiber(), beta2=2e-26)
    fit = ProfileFit.lumped(toy_channels(1).frequency, ALPHA, L)
    with pytest.raises(DegenerateError, match="integral"):
        eta_spm(fit, fiber, 0, 96e9)


def test_single_channel_is_spm_only(lumped_span):
    span = Span(lumped_span.fiber, toy_channels(1))
    fit = ProfileFit.lumped(span.channels.frequency, ALPHA, L)
    spec = eta_total(LinkPlan((span,)), [fit])
    assert spec.eta_xpm.shape == (1,) and spec.eta_xpm[0] == 0.0
    assert spec.eta_n[0] == spec.eta_spm[0] > 0


def test_single_span_ignores_epsilon(lumped_span):
    fit = ProfileFit.lumped(lumped_span.channels.frequency, ALPHA, L)
    a = eta_total(LinkPlan((lumped_span,), epsilon=0.0), [fit])
    b = eta_total(LinkPlan((lumped_span,), epsilon=0.7), [fit])
    assert np.array_equal(a.eta_n, b.eta_n)
    assert np.allclose(a.eta_n, a.eta_spm + a.eta_xpm, rtol=1e-15)


def test_multi_span_accumulation(lumped_span):
    fit = ProfileFit.lumped(lumped_span.channels.frequency, ALPHA, L)
    one = eta_total(LinkPlan((lumped_span,)), [fit])
    n, eps = 3, 0.2
    many = eta_total(LinkPlan((lumped_span,) * n, epsilon=eps), [fit] * n)
    assert np.allclose(many.eta_n, n * one.eta_spm * n ** eps + n * one.eta_xpm, rtol=1e-14)
    # a span launched 3 dB lower contributes a quarter
    low = Span(lumped_span.fiber, lumped_span.channels.with_power(lumped_span.channels.power / 2))
    mixed = eta_total(LinkPlan((lumped_span, low)), [fit, fit])
    assert np.allclose(mixed.eta_n, 1.25 * one.eta_n, rtol=1e-14)


def test_uniform_power_shift(lumped_span):
    fit = ProfileFit.lumped(lumped_span.channels.frequency, ALPHA, L)
    up = Span(lumped_span.fiber, lumped_span.channels.with_power(lumped_span.channels.power * 10 ** 0.1))
    a = eta_total(LinkPlan((lumped_span,)), [fit])
    b = eta_total(LinkPlan((up,)), [fit])
    assert np.allclose(b.snr_db - a.snr_db, -2.0, atol=1e-9)


def test_pump_interferers_add_xpm(scenario):
    plan, prof, fit = scenario("fw")
    span = plan.spans[0]
    fit_p = fit_all(prof, span, include_fw_pumps=True)
    base = span_efficiencies(span, fit)
    more = span_efficiencies(span, fit_p, pump_interferers=True)
    assert np.allclose(more[0], base[0], rtol=1e-9)
    assert np.all(more[1] > base[1])


def test_coherence_factor_range():
    fiber = toy_fiber()
    eps = coherence_factor(fiber, toy_channels(5).frequency, 96e9)
    assert np.all((eps > 0.01) & (eps < 0.3))


def test_nli_csv(lumped_span, tmp_path):
    fit = ProfileFit.lumped(lumped_span.channels.frequency, ALPHA, L)
    spec = eta_total(LinkPlan((lumped_span,)), [fit])
    path = tmp_path / "nli.csv"
    nli_to_csv(spec, path, extra={"delta_db": np.zeros(5)})
    lines = path.read_text().splitlines()
    assert lines[0] == "wavelength_nm,eta_spm_1_w2,eta_xpm_1_w2,eta_n_1_w2,snr_nli_db,delta_db,method"
    assert len(lines) == 6 and lines[1].endswith(",closed")
    assert float(lines[3].split(",")[0]) == pytest.approx(1550.0, abs=1e-6)
