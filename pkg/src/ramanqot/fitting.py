"""Semi-analytical signal power profile and its least-squares fit.

For channel i the normalized profile is modelled as::

    rho(z) = exp(-a z) [1 - C_f P_f (f - f_hat) Leff(z) - C_b P_b (f - f_hat) Leff_b(z)]
    Leff(z)   = (1 - exp(-a_f z)) / a_f
    Leff_b(z) = (exp(-a_b (L - z)) - exp(-a_b L)) / a_b

with f_hat the mean pump frequency, P_f the total z=0 power of channels and
FW pumps and P_b the total z=L power of BW pumps.  The five coefficients are
fitted per channel in the dB domain with power weights.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .raman import CHANNEL, FW_PUMP, normalized_profile
from .units import frequency_to_wavelength

_KM = 1e3
_FLOOR = 1e-30


class FitError(RuntimeError):
    """Profile could not be fitted (degenerate input)."""


@dataclass(frozen=True)
class FitOptions:
    """Controls for :func:`fit_channel`.

    ``xtol``/``ftol`` are the step-norm and relative-cost stopping tests of
    the Levenberg-Marquardt iteration, ``max_iter`` bounds the iterations.
    ``alpha_floor`` bounds all three alphas from below, as a fraction of the
    fibre attenuation at the entity frequency.  The profile is nearly flat
    along a direction where alpha -> 0 and C compensates, but the closed form
    relies on every alpha_l L being sizeable: with alpha near zero the
    SPM/XPM expressions subtract terms of order 1/alpha^2 and lose accuracy.
    """

    xtol: float = 1e-10
    ftol: float = 1e-12
    max_iter: int = 200
    weighted: bool = True
    alpha_floor: float = 0.25


@dataclass(frozen=True, eq=False)
class ProfileFit:
    """Fitted coefficients for every fitted entity of one span (SI units).

    Arrays are indexed like ``frequency``; the first entries are the
    channels, optionally followed by FW pumps when they were fitted as
    interferers.
    """

    frequency: np.ndarray
    alpha: np.ndarray
    alpha_f: np.ndarray
    alpha_b: np.ndarray
    c_f: np.ndarray
    c_b: np.ndarray
    f_hat: float
    p_f: float
    p_b: float
    span_length: float
    rms_db: np.ndarray
    max_db: np.ndarray
    mean_db: np.ndarray
    converged: np.ndarray
    kind: tuple = ()
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.frequency.size

    @property
    def gain_f(self):
        """C_f P_f (f - f_hat) [1/m]."""
        return self.c_f * self.p_f * (self.frequency - self.f_hat)

    @property
    def gain_b(self):
        """C_b P_b (f - f_hat) [1/m]."""
        return self.c_b * self.p_b * (self.frequency - self.f_hat)

    @classmethod
    def lumped(cls, frequency, alpha, span_length):
        """Pure-loss profiles rho = exp(-alpha z) (C_f = C_b = 0)."""
        f = np.atleast_1d(np.asarray(frequency, dtype=float))
        a = np.broadcast_to(np.asarray(alpha, dtype=float), f.shape).copy()
        zero = np.zeros_like(f)
        return cls(f, a, a.copy(), a.copy(), zero, zero.copy(), 0.0, 0.0, 0.0, float(span_length),
                   zero.copy(), zero.copy(), zero.copy(), np.ones(f.shape, dtype=bool), (CHANNEL,) * f.size)

    def subset(self, idx):
        idx = np.asarray(idx)
        pick = lambda a: np.asarray(a)[idx]
        return ProfileFit(pick(self.frequency), pick(self.alpha), pick(self.alpha_f), pick(self.alpha_b),
                          pick(self.c_f), pick(self.c_b), self.f_hat, self.p_f, self.p_b, self.span_length,
                          pick(self.rms_db), pick(self.max_db), pick(self.mean_db), pick(self.converged),
                          tuple(np.asarray(self.kind, dtype=object)[idx]) if self.kind else ())


def rho_model(z, alpha, alpha_f, alpha_b, gain_f, gain_b, length):
    """Evaluate the semi-analytical profile (broadcasts over all arguments)."""
    z = np.asarray(z, dtype=float)
    leff = -np.expm1(-alpha_f * z) / alpha_f
    leff_b = (np.exp(-alpha_b * (length - z)) - np.exp(-alpha_b * length)) / alpha_b
    return np.exp(-alpha * z) * (1.0 - gain_f * leff - gain_b * leff_b)


def eval_rho(fit, i, z):
    """rho(z) of fitted entity ``i``; rho(0) is exactly 1."""
    z = np.asarray(z, dtype=float)
    rho = rho_model(z, fit.alpha[i], fit.alpha_f[i], fit.alpha_b[i], fit.gain_f[i], fit.gain_b[i],
                    fit.span_length)
    return np.where(z == 0.0, 1.0, rho)


def integrated_rho(fit, i, num=4001):
    """Integral of rho over the span [m], by Simpson on a fine grid."""
    from scipy.integrate import simpson
    z = np.linspace(0.0, fit.span_length, num)
    return simpson(eval_rho(fit, i, z), x=z)


def _db(x):
    return 10.0 * np.log10(np.maximum(x, _FLOOR))


@dataclass(frozen=True)
class ChannelFit:
    alpha: float
    alpha_f: float
    alpha_b: float
    gain_f: float
    gain_b: float
    rms_db: float
    max_db: float
    mean_db: float
    converged: bool


def _linear_gains(zk, rho, w, alpha, alpha_f, alpha_b, length, use_b):
    """Weighted linear least squares for (gain_f, gain_b) with the alphas fixed."""
    ea = np.exp(-alpha * zk)
    leff = -np.expm1(-alpha_f * zk) / alpha_f
    leff_b = (np.exp(-alpha_b * (length - zk)) - np.exp(-alpha_b * length)) / alpha_b
    cols = [ea * leff] + ([ea * leff_b] if use_b else [])
    A = np.column_stack(cols) * np.sqrt(w)[:, None]
    y = (ea - rho) * np.sqrt(w)
    sol = np.linalg.lstsq(A, y, rcond=None)[0]
    return sol[0], (sol[1] if use_b else 0.0)


def fit_channel(z, rho, alpha0, gain_f0=0.0, gain_b0=0.0, use_b=False, options=FitOptions()):
    """Fit the five profile coefficients to one normalized profile.

    Parameters
    ----------
    z : ndarray
        Grid [m] starting at 0.
    rho : ndarray
        Normalized numerical profile on ``z``.
    alpha0 : float
        Fibre attenuation at the channel frequency [1/m]; seeds all three
        alphas and sets their floor ``options.alpha_floor * alpha0``.
    gain_f0, gain_b0 : float
        Initial C P (f - f_hat) products [1/m].
    use_b : bool
        Fit the backward term; otherwise gain_b = 0 and alpha_b = alpha.

    Returns
    -------
    ChannelFit
        Coefficients in SI units plus dB residual diagnostics (RMS, max and
        power-weighted mean of |residual|).
    """
    z = np.asarray(z, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho)) or not np.any(rho[1:] > 0):
        raise FitError("degenerate profile (no positive samples)")
    length = z[-1] / _KM
    zk = z / _KM
    w = rho / rho.mean() if options.weighted else np.ones_like(rho)
    sw = np.sqrt(w)
    target = _db(rho)
    a0 = alpha0 * _KM

    a_min = options.alpha_floor * a0
    # trial steps of the LM iteration may wander far in log space
    up = lambda v: a_min + np.exp(np.clip(v, -60.0, 10.0))

    def unpack(t):
        a, af = up(t[0]), up(t[1])
        if use_b:
            return a, af, up(t[2]), t[3], t[4]
        return a, af, a, t[2], 0.0

    def pack_alpha(x):
        return np.log(max(x - a_min, 1e-3 * a_min))

    def resid(t):
        a, af, ab, gf, gb = unpack(t)
        return sw * (_db(rho_model(zk, a, af, ab, gf, gb, length)) - target)

    starts = []
    for sf in (1.0, 0.3, 3.0):
        for sb in ((1.0, 0.3, 3.0) if use_b else (1.0,)):
            af, ab = a0 * sf, a0 * sb
            gf, gb = _linear_gains(zk, rho, w, a0, af, ab, length, use_b)
            starts.append([pack_alpha(a0), pack_alpha(af)] + ([pack_alpha(ab)] if use_b else [])
                          + [gf] + ([gb] if use_b else []))
    # seed from the triangular-gain estimate as well
    starts.append([pack_alpha(a0), pack_alpha(a0)] + ([pack_alpha(a0)] if use_b else [])
                  + [gain_f0 * _KM] + ([gain_b0 * _KM] if use_b else []))

    # short screening run from every start, full run from the two best
    n = len(starts[0])
    screen = [least_squares(resid, np.asarray(t0, dtype=float), method="lm", xtol=options.xtol,
                            ftol=options.ftol, max_nfev=10 * (n + 1)) for t0 in starts]
    screen.sort(key=lambda r: r.cost)
    best = None
    for r in screen[:2]:
        res = least_squares(resid, r.x, method="lm", xtol=options.xtol, ftol=options.ftol,
                            max_nfev=options.max_iter * (n + 1))
        if best is None or res.cost < best.cost:
            best = res
    a, af, ab, gf, gb = unpack(best.x)
    err = np.abs(_db(rho_model(zk, a, af, ab, gf, gb, length)) - target)
    return ChannelFit(a / _KM, af / _KM, ab / _KM, gf / _KM, gb / _KM,
                      float(np.sqrt(np.mean(err ** 2))), float(err.max()),
                      float(np.sum(rho * err) / np.sum(rho)), bool(best.status > 0))


def fit_all(profile, span, options=FitOptions(), include_fw_pumps=False):
    """Fit every channel (and optionally every FW pump) of a solved span.

    ``f_hat`` is the unweighted mean of all pump frequencies (0 without
    pumps), ``P_f`` the total z=0 power of channels plus FW pumps, ``P_b``
    the total prescribed z=L power of BW pumps.
    """
    pumps = span.pumps
    n_ch = len(span.channels)
    f_hat = float(pumps.frequency.mean()) if len(pumps) else 0.0
    bw = pumps.is_backward
    p_f = float(span.channels.power.sum() + pumps.power[~bw].sum())
    p_b = float(pumps.power[bw].sum())
    use_b = p_b > 0
    idx = list(range(n_ch))
    if include_fw_pumps:
        idx += [n_ch + j for j in np.nonzero(~bw)[0]]
    freq = profile.frequency
    p0 = profile.powers[:, 0]
    pL = profile.powers[:, -1]
    c_r = span.fiber.raman_gain.triangular_slope()
    is_bw_row = np.array([k == "bw_pump" for k in profile.kind])
    alpha_curve = span.fiber.attenuation(freq)
    fits = []
    for i in idx:
        rho = normalized_profile(profile, i)
        fw_rows = ~is_bw_row
        g_f0 = c_r * np.sum(p0[fw_rows] * (freq[i] - freq[fw_rows]))
        g_b0 = c_r * np.sum(pL[is_bw_row] * (freq[i] - freq[is_bw_row])) if use_b else 0.0
        try:
            fits.append(fit_channel(profile.z, rho, alpha_curve[i], g_f0, g_b0, use_b, options))
        except FitError as exc:
            raise FitError(f"entity {i}: {exc}") from None
    f = freq[idx]
    gf = np.array([c.gain_f for c in fits])
    gb = np.array([c.gain_b for c in fits])
    diff = f - f_hat
    if np.any(diff == 0):
        raise FitError("entity frequency equals f_hat; C coefficients undefined")
    c_f = gf / (p_f * diff)
    c_b = gb / (p_b * diff) if use_b else np.zeros_like(gf)
    kind = tuple(profile.kind[i] for i in idx)
    return ProfileFit(f, np.array([c.alpha for c in fits]), np.array([c.alpha_f for c in fits]),
                      np.array([c.alpha_b for c in fits]), c_f, c_b, f_hat, p_f, p_b,
                      profile.span_length, np.array([c.rms_db for c in fits]),
                      np.array([c.max_db for c in fits]), np.array([c.mean_db for c in fits]),
                      np.array([c.converged for c in fits]), kind)


def effective_length_errors(fit, profile):
    """Per fitted channel |int rho_fit - int rho_num| / int rho_num."""
    from scipy.integrate import simpson
    out = np.empty(len(fit))
    for i in range(len(fit)):
        if fit.kind and fit.kind[i] == FW_PUMP:
            row = int(np.nonzero(profile.frequency == fit.frequency[i])[0][0])
        else:
            row = i
        num = simpson(normalized_profile(profile, row), x=profile.z)
        out[i] = abs(integrated_rho(fit, i) - num) / num
    return out


def pooled_residual_db(fit, profile):
    """Power-weighted mean |dB residual| pooled over all channels and z."""
    z = profile.z
    tot = wsum = 0.0
    for i in range(len(fit)):
        if fit.kind and fit.kind[i] != CHANNEL:
            continue
        rho = normalized_profile(profile, i)
        err = np.abs(_db(eval_rho(fit, i, z)) - _db(rho))
        tot += np.sum(rho * err)
        wsum += np.sum(rho)
    return tot / wsum


def fit_to_csv(fit, path):
    """Per fitted entity: wavelength, five coefficients (SI), residual diagnostics."""
    wl = frequency_to_wavelength(fit.frequency) * 1e9
    header = ("wavelength_nm,alpha_1_m,alpha_f_1_m,alpha_b_1_m,c_f_1_m_w_hz,c_b_1_m_w_hz,"
              "rms_residual_db,max_residual_db")
    data = np.column_stack([wl, fit.alpha, fit.alpha_f, fit.alpha_b, fit.c_f, fit.c_b, fit.rms_db, fit.max_db])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.10e")
