"""Closed-form ISRS GN model for Raman-amplified spans.

The fitted profile of entity k is written as a sum of three exponentials,
``rho_k(z) = sum_l Upsilon_l kappa_b,l exp(-alpha_l z)`` over the index pairs
(l1, l2) in {(0,0), (1,0), (0,1)}, which turns the link function and the
XPM/SPM frequency integrals into elementary functions.

Frequencies entering the phase mismatch are offsets from the dispersion
reference frequency c / lambda_ref, where beta2 and beta3 are defined.
"""

from dataclasses import dataclass, field

import numpy as np

from .units import frequency_to_wavelength, lin_to_db

PAIRS = ((0, 0), (1, 0), (0, 1))
PUMP_BANDWIDTH = 1e9


class DegenerateError(ValueError):
    """A closed-form term is undefined (T = 0, zero phase mismatch, ...)."""


@dataclass(frozen=True)
class ClosedFormTerms:
    """Per-entity quantities for the three index pairs, each array of shape (..., 3)."""

    t: np.ndarray
    t_f: np.ndarray
    t_b: np.ndarray
    alpha_l: np.ndarray
    kappa_f: np.ndarray
    kappa_b: np.ndarray
    upsilon: np.ndarray


def compute_terms(fit, idx=None):
    """Closed-form terms for fitted entities ``idx`` (all when None).

    Raises
    ------
    DegenerateError
        If T = 0 for some entity.
    """
    sl = slice(None) if idx is None else idx
    a, af, ab = fit.alpha[sl], fit.alpha_f[sl], fit.alpha_b[sl]
    L = fit.span_length
    t_f = -fit.gain_f[sl] / af
    t_b = -fit.gain_b[sl] / ab
    t = 1.0 + t_f - t_b * np.exp(-ab * L)
    if np.any(t == 0):
        raise DegenerateError("T = 0: Upsilon undefined for this fit")
    l1 = np.array([p[0] for p in PAIRS], dtype=float)
    l2 = np.array([p[1] for p in PAIRS], dtype=float)
    a_, af_, ab_ = (np.asarray(v)[..., None] for v in (a, af, ab))
    alpha_l = a_ + l1 * af_ - l2 * ab_
    kappa_f = np.exp(-(a_ + l1 * af_) * L)
    kappa_b = np.exp(-l2 * ab_ * L)
    ups = np.stack(np.broadcast_arrays(t, -t_f, t_b), axis=-1)
    return ClosedFormTerms(np.asarray(t), np.asarray(t_f), np.asarray(t_b), alpha_l, kappa_f, kappa_b, ups)


def phase_mismatch_spm(f_i, fiber):
    """phi_i = -4 pi^2 (beta2 + 2 pi beta3 f_i), f_i relative to the dispersion reference."""
    f = np.asarray(f_i, dtype=float) - fiber.ref_frequency
    return -4 * np.pi ** 2 * (fiber.beta2 + 2 * np.pi * fiber.beta3 * f)


def phase_mismatch_xpm(f_i, f_k, fiber):
    """phi_ik = -4 pi^2 (f_k - f_i) [beta2 + pi beta3 (f_i + f_k)] with offset frequencies."""
    fi = np.asarray(f_i, dtype=float) - fiber.ref_frequency
    fk = np.asarray(f_k, dtype=float) - fiber.ref_frequency
    return -4 * np.pi ** 2 * (fk - fi) * (fiber.beta2 + np.pi * fiber.beta3 * (fi + fk))


def _live_alpha(upsilon, alpha_l):
    """alpha_l with inactive pairs (Upsilon = 0) moved off any singular value.

    Without BW pumps the (0,1) pair has Upsilon = 0 and alpha_l = 0; it
    contributes nothing, so it must not trip the degeneracy checks.
    """
    return np.where(upsilon == 0, 1.0, alpha_l)


def _pairwise(terms, j):
    """Unprimed/primed views over the 3x3 index-pair grid for entity ``j``."""
    g = lambda v: (v[j][:, None], v[j][None, :])
    alpha = _live_alpha(terms.upsilon, terms.alpha_l)
    return g(terms.upsilon), g(alpha), g(terms.kappa_f), g(terms.kappa_b)


def link_function_closed(terms, j, phi, length):
    """Closed-form link function of entity ``j`` at phase mismatch ``phi`` [m^2].

    ``phi`` may be an array; the result has the same shape.
    """
    (u, up), (a, ap), (kf, kfp), (kb, kbp) = _pairwise(terms, j)
    phi = np.asarray(phi, dtype=float)[..., None, None]
    den = (a ** 2 + phi ** 2) * (ap ** 2 + phi ** 2)
    main = (kf * kfp + kb * kbp) * (a * ap + phi ** 2)
    cos = (kf * kbp + kb * kfp) * (a * ap + phi ** 2) * np.cos(phi * length)
    # minus sign: this is what the modulus-squared expansion gives
    sin = (kf * kbp - kb * kfp) * (a - ap) * phi * np.sin(phi * length)
    return np.sum(u * up * (main - cos - sin) / den, axis=(-2, -1))


def link_function_exact(terms, j, phi, length):
    """|int_0^L rho(z) exp(j phi z) dz|^2 for the three-exponential profile (reference)."""
    phi = np.asarray(phi, dtype=float)[..., None]
    u, kf, kb = terms.upsilon[j], terms.kappa_f[j], terms.kappa_b[j]
    a = _live_alpha(u, terms.alpha_l[j])
    s = np.sum(u * (kb - kf * np.exp(1j * phi * length)) / (a - 1j * phi), axis=-1)
    return np.abs(s) ** 2


def _sign(x, what):
    if np.any(x == 0):
        raise DegenerateError(f"sign({what}) evaluated at exactly zero")
    return np.sign(x)


def _atan_over(x):
    """atan(x) / x with the analytic limit 1 near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x ** 2 / 3.0, np.arctan(safe) / safe)


def _bracket_terms(a, ap, kf, kfp, kb, kbp, phi, length):
    """The shared sign/exponential bracket of the XPM and SPM closed forms."""
    ea, eap = np.exp(-np.abs(a * length)), np.exp(-np.abs(ap * length))
    cross = -(kf * kbp + kb * kfp) * (_sign(a / phi, "alpha/phi") * ea + _sign(ap / phi, "alpha/phi") * eap)
    # same sign correction as in the link function
    anti = -(kf * kbp - kb * kfp) * (np.sign(-phi) * ea + np.sign(phi) * eap)
    return cross + anti


def eta_xpm_pairs(fit, fiber, i, ks, p_i, p_k, b_i, b_k, terms=None):
    """XPM efficiency of interferers ``ks`` on channel ``i`` [1/W^2].

    Parameters
    ----------
    fit : ProfileFit
        Fitted profiles; ``ks`` index into it.
    fiber : FiberSpec
    i : int
        Index of the COI in ``fit``.
    ks : array of int
        Interferer indices in ``fit`` (must not contain ``i``).
    p_i, p_k : float, array
        Launch powers [W] of the COI and of the interferers.
    b_i, b_k : float, array
        Bandwidths [Hz].
    """
    ks = np.atleast_1d(ks)
    if terms is None:
        terms = compute_terms(fit)
    L = fiber.span_length
    phi = phase_mismatch_xpm(fit.frequency[i], fit.frequency[ks], fiber)
    if np.any(phi == 0):
        raise DegenerateError("phi_ik = 0 (zero-dispersion resonance); closed form undefined")
    u, a = terms.upsilon[ks], _live_alpha(terms.upsilon, terms.alpha_l)[ks]
    kf, kb = terms.kappa_f[ks], terms.kappa_b[ks]
    u, up = u[:, :, None], u[:, None, :]
    a, ap = a[:, :, None], a[:, None, :]
    kf, kfp = kf[:, :, None], kf[:, None, :]
    kb, kbp = kb[:, :, None], kb[:, None, :]
    ph = phi[:, None, None]
    if np.any(a + ap == 0):
        raise DegenerateError("alpha_l + alpha_l' = 0")
    x, xp = ph * b_i / (2 * a), ph * b_i / (2 * ap)
    # atan(x)/(phi) written through atan(x)/x to keep the phi -> 0 limit finite
    atan_part = 2 * (kf * kfp + kb * kbp) * (b_i / 2) * (_atan_over(x) / a + _atan_over(xp) / ap)
    rest = np.pi * _bracket_terms(a, ap, kf, kfp, kb, kbp, ph, L) / ph
    total = np.sum(u * up * (atan_part + rest) / (a + ap), axis=(1, 2))
    pre = 32.0 / 27.0 * fiber.gamma ** 2 / np.asarray(b_k) * (np.asarray(p_k) / p_i) ** 2
    return pre * total


def eta_xpm_pair(fit, fiber, i, k, p_i, p_k, b_i, b_k, terms=None):
    """Scalar convenience wrapper of :func:`eta_xpm_pairs`."""
    return float(eta_xpm_pairs(fit, fiber, i, [k], p_i, np.array([p_k]), b_i, np.array([b_k]), terms)[0])


def eta_spm(fit, fiber, i, b_i, terms=None):
    """SPM efficiency of channel ``i`` [1/W^2].

    The two sign terms of the last bracket are summed.

    Raises
    ------
    DegenerateError
        If phi_i <= 0, where the logarithm has no real value; use the
        integral oracle for such low-dispersion corners.
    """
    if terms is None:
        terms = compute_terms(fit)
    L = fiber.span_length
    phi = float(phase_mismatch_spm(fit.frequency[i], fiber))
    if not phi > 0:
        raise DegenerateError(f"phi_i = {phi:.3e} <= 0: SPM closed form undefined, use the integral model")
    log_arg = np.sqrt(phi * L / (2 * np.pi)) * b_i
    (u, up), (a, ap), (kf, kfp), (kb, kbp) = _pairwise(terms, i)
    if np.any(a + ap == 0):
        raise DegenerateError("alpha_l + alpha_l' = 0")
    c = 3 * phi * b_i ** 2 / (8 * np.pi)
    asinh_part = 2 * (kf * kfp + kb * kbp) * (np.arcsinh(c / a) + np.arcsinh(c / ap))
    rest = 4 * np.log(log_arg) * _bracket_terms(a, ap, kf, kfp, kb, kbp, phi, L)
    total = np.sum(u * up * np.pi / (phi * (a + ap)) * (asinh_part + rest))
    return float(16.0 / 27.0 * fiber.gamma ** 2 / b_i ** 2 * total)


def coherence_factor(fiber, frequency, bandwidth, alpha=None):
    """SPM coherence exponent epsilon of the GN model for a lumped span."""
    if alpha is None:
        alpha = fiber.attenuation(frequency)
    f = np.asarray(frequency, dtype=float) - fiber.ref_frequency
    b2 = np.abs(fiber.beta2 + 2 * np.pi * fiber.beta3 * f)
    L = fiber.span_length
    return 3.0 / 10.0 * np.log(1 + (6 / alpha) / (L * np.arcsinh(np.pi ** 2 / 2 * b2 / alpha * bandwidth ** 2)))


@dataclass(frozen=True, eq=False)
class NliSpectrum:
    """Per-channel NLI efficiencies [1/W^2] and SNR_NLI [dB]."""

    frequency: np.ndarray
    eta_spm: np.ndarray
    eta_xpm: np.ndarray
    eta_n: np.ndarray
    snr_db: np.ndarray
    method: str
    num_spans: int
    epsilon: float
    info: dict = field(default_factory=dict)

    @property
    def wavelength_nm(self):
        return frequency_to_wavelength(self.frequency) * 1e9


def interferer_set(span, fit, pump_interferers):
    """Indices into ``fit`` plus powers and bandwidths of every XPM source."""
    n = len(span.channels)
    idx = list(range(n))
    power = list(span.channels.power)
    band = list(span.channels.bandwidth)
    if pump_interferers:
        fw = span.pumps.forward
        for f, p in zip(fw.frequency, fw.power):
            j = int(np.nonzero(fit.frequency == f)[0][0])
            idx.append(j)
            power.append(p)
            band.append(PUMP_BANDWIDTH)
    return np.array(idx), np.array(power), np.array(band)


def span_efficiencies(span, fit, pump_interferers=False):
    """(eta_SPM, eta_XPM) per channel for one span, closed form."""
    terms = compute_terms(fit)
    fib = span.fiber
    ch = span.channels
    idx, power, band = interferer_set(span, fit, pump_interferers)
    n = len(ch)
    spm = np.empty(n)
    xpm = np.empty(n)
    for i in range(n):
        others = idx != i
        spm[i] = eta_spm(fit, fib, i, ch.bandwidth[i], terms)
        xpm[i] = np.sum(eta_xpm_pairs(fit, fib, i, idx[others], ch.power[i], power[others],
                                      ch.bandwidth[i], band[others], terms))
    return spm, xpm


def accumulate(plan, per_span, method):
    """Combine per-span (eta_SPM, eta_XPM) into eta_n and SNR_NLI.

    ``eta_n = sum_j (P_ij/P_i)^2 [eta_SPM,j n^eps + eta_XPM,j]`` with P_i the
    launch power into the first span.
    """
    n = plan.num_spans
    p_i = plan.spans[0].channels.power
    spm_tot = np.zeros_like(p_i)
    xpm_tot = np.zeros_like(p_i)
    for span, (spm, xpm) in zip(plan.spans, per_span):
        r = (span.channels.power / p_i) ** 2
        spm_tot += r * spm
        xpm_tot += r * xpm
    eta = spm_tot * n ** plan.epsilon + xpm_tot
    snr = lin_to_db(1.0 / (eta * p_i ** 2))
    return NliSpectrum(plan.channels.frequency, spm_tot, xpm_tot, eta, snr, method, n, plan.epsilon)


def eta_total(plan, fits):
    """Closed-form NLI spectrum of a link.

    Parameters
    ----------
    plan : LinkPlan
    fits : sequence of ProfileFit
        One fit per span, aligned with ``plan.spans``.  Repeated span
        objects with the same fit object are evaluated once.
    """
    if len(fits) != plan.num_spans:
        raise ValueError(f"need one fit per span ({plan.num_spans}), got {len(fits)}")
    cache = {}
    per_span = []
    for span, fit in zip(plan.spans, fits):
        if fit is None:
            raise ValueError("missing fit for a span")
        key = (id(span), id(fit))
        if key not in cache:
            cache[key] = span_efficiencies(span, fit, plan.pump_interferers)
        per_span.append(cache[key])
    return accumulate(plan, per_span, "closed")


def nli_to_csv(spectrum, path, extra=None):
    """Write wavelength_nm, eta_spm, eta_xpm, eta_n, snr_nli_db, method (+ extra columns)."""
    cols = ["wavelength_nm", "eta_spm_1_w2", "eta_xpm_1_w2", "eta_n_1_w2", "snr_nli_db"]
    data = [spectrum.wavelength_nm, spectrum.eta_spm, spectrum.eta_xpm, spectrum.eta_n, spectrum.snr_db]
    for name, values in (extra or {}).items():
        cols.append(name)
        data.append(np.asarray(values, dtype=float))
    cols.append("method")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in zip(*data):
            fh.write(",".join(f"{v:.10e}" for v in row) + f",{spectrum.method}\n")
