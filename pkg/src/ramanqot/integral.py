"""Numerical XPM/SPM integrals of the ISRS GN model (reference oracle).

The per-channel decomposition integrates the link function

    mu(f1, f2, f_i) = | int_0^L sqrt(rho(f1) rho(f2) rho(f1 + f2 - f_i) / rho(f_i)) exp(j phi z) dz |^2

over the rectangle spanned by the COI and the interferer.  Profiles are
taken constant over each channel band, so for the XPM term of interferer k
the amplitude reduces to rho_k(z) whenever f1 + f2 - f_i lies inside band k
(which is what the rectangular window enforces).  The link function then
depends on (k, phi) only, and

    G_k(phi) = | int_0^L rho_k(z) exp(j phi z) dz |^2

is tabulated once per interferer with a Filon-trapezoid FFT.  For a fixed
f2 the phase is a quadratic in f1 that vanishes at f1 = 0, so the f1
integral becomes an integral of G_k against a smooth Jacobian in phi; it is
done by product integration with cumulative moments of G_k.  This resolves
the ~ MHz-scale structure in f1 exactly.  The remaining f2 integral is a
composite Simpson rule.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.fft import ifft, next_fast_len
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicSpline

from .closed import PUMP_BANDWIDTH, accumulate
from .fitting import eval_rho
from .raman import normalized_profile


class IntegralError(RuntimeError):
    """Quadrature could not reach the requested accuracy or hit a singular profile."""


@dataclass(frozen=True)
class QuadratureSettings:
    """Resolution controls of the numerical model.

    Attributes
    ----------
    num_points : int
        Simpson nodes along f2 (odd, >= 3).
    rtol : float
        Relative target of :func:`link_function_numeric` refinement.
    window : bool
        Apply the rectangular window Pi((f1 + f2) / B_k).
    z_step : float
        Step [m] of the refined z grid behind the G_k tables.
    phi_oversample : int
        Table samples per 2 pi / L in phi (G_k oscillates with that period).
    spm_stretch : float
        sinh grading of the f2 grid for SPM, where the f1 integral has a
        ~ 1/|f2| cusp at f2 = 0.
    max_points : int
        Cap on z samples in :func:`link_function_numeric`.
    """

    num_points: int = 201
    rtol: float = 1e-6
    window: bool = False
    z_step: float = 5.0
    phi_oversample: int = 32
    spm_stretch: float = 6.0
    max_points: int = 2 ** 22

    def __post_init__(self):
        if self.num_points < 3 or self.num_points % 2 == 0:
            raise ValueError(f"num_points must be odd and >= 3, got {self.num_points}")
        if not self.rtol > 0:
            raise ValueError("rtol must be > 0")
        if not self.z_step > 0:
            raise ValueError("z_step must be > 0")
        if self.phi_oversample < 4:
            raise ValueError("phi_oversample must be >= 4")
        if self.spm_stretch < 0:
            raise ValueError("spm_stretch must be >= 0")

    def refined(self, factor=2):
        """Settings with every resolution knob tightened by ``factor``."""
        return replace(self, num_points=factor * (self.num_points - 1) + 1, z_step=self.z_step / factor,
                       phi_oversample=self.phi_oversample * factor)


# -- profile sources ---------------------------------------------------------

class FittedRho:
    """rho_k(z) from a :class:`ProfileFit` (the default oracle input)."""

    method = "fit"

    def __init__(self, fit):
        self.fit = fit
        self.frequency = np.asarray(fit.frequency)
        self.length = float(fit.span_length)

    def __call__(self, k, z):
        return eval_rho(self.fit, k, z)


class OdeRho:
    """rho_k(z) interpolated (cubic spline) from the raw solver profile."""

    method = "ode"

    def __init__(self, profile):
        self.profile = profile
        self.frequency = np.asarray(profile.frequency)
        self.length = float(profile.z[-1])
        self._splines = {}

    def __call__(self, k, z):
        if k not in self._splines:
            self._splines[k] = CubicSpline(self.profile.z, normalized_profile(self.profile, k))
        return self._splines[k](z)


class FunctionRho:
    """rho_k(z) = func(k, z) for analytic test profiles."""

    method = "function"

    def __init__(self, frequency, length, func):
        self.frequency = np.atleast_1d(np.asarray(frequency, dtype=float))
        self.length = float(length)
        self.func = func

    @classmethod
    def lumped(cls, frequency, alpha, length):
        """Pure loss, rho_k = exp(-alpha_k z)."""
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), np.shape(np.atleast_1d(frequency)))
        return cls(frequency, length, lambda k, z: np.exp(-alpha[k] * np.asarray(z, dtype=float)))

    def __call__(self, k, z):
        return self.func(k, z)


def entity_index(source, frequency):
    """Index of the entity whose band holds ``frequency`` (nearest centre)."""
    return int(np.argmin(np.abs(source.frequency - frequency)))


# -- link function -------------------------------------------------------------

def _phase(f1, f2, f_i, fiber):
    """phi(f1, f2, f_i) with frequencies as offsets from the dispersion reference."""
    r = fiber.ref_frequency
    a, b, c = f1 - r, f2 - r, f_i - r
    return -4 * np.pi ** 2 * (a - c) * (b - c) * (fiber.beta2 + np.pi * fiber.beta3 * (a + b))


def link_function_numeric(source, f1, f2, f_i, fiber, settings=QuadratureSettings()):
    """Link function by complex composite Simpson in z [m^2].

    The grid starts with at least 1001 points and 20 points per phase
    period, then doubles until two successive values agree to
    ``settings.rtol``.

    Raises
    ------
    IntegralError
        If rho(z, f_i) vanishes or the refinement cap is hit.
    """
    L = source.length
    ks = [entity_index(source, f) for f in (f1, f2, f1 + f2 - f_i, f_i)]
    phi = float(_phase(f1, f2, f_i, fiber))

    def integral(n):
        z = np.linspace(0.0, L, n)
        r1, r2, r3, ri = (source(k, z) for k in ks)
        if np.any(ri <= 0):
            raise IntegralError("rho(z, f_i) vanishes; link function undefined")
        amp = np.sqrt(np.maximum(r1 * r2 * r3, 0.0) / ri)
        y = amp * np.exp(1j * phi * z)
        return simpson(y.real, x=z) + 1j * simpson(y.imag, x=z)

    n = max(1001, int(20 * abs(phi) * L / (2 * np.pi)) + 1)
    n += (n + 1) % 2
    prev = integral(n)
    while True:
        n = 2 * n - 1
        if n > settings.max_points:
            raise IntegralError(f"link function not converged at {settings.max_points} z samples (phi = {phi:.3e})")
        cur = integral(n)
        if abs(cur - prev) <= settings.rtol * abs(cur):
            return float(abs(cur) ** 2)
        prev = cur


@dataclass(frozen=True, eq=False)
class LinkTable:
    """G_k(phi) on phi = m * dphi, m = 0..M-1, with cumulative moments.

    ``moments[j, m] = int_0^{m dphi} G(t) t^j dt`` for j = 0, 1, 2.
    """

    dphi: float
    g: np.ndarray
    moments: np.ndarray

    @property
    def phi(self):
        return np.arange(self.g.size) * self.dphi

    @property
    def phi_max(self):
        return (self.g.size - 1) * self.dphi

    def g_at(self, phi):
        return np.interp(np.abs(phi), self.phi, self.g)

    def moment(self, j, phi):
        return np.interp(phi, self.phi, self.moments[j])


def _filon_end_weight(theta):
    """int_0^1 (1 - u) exp(j theta u) du, with the series near 0."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 1e-3
    t = np.where(small, 1.0, theta)
    exact = (1 - np.exp(1j * t) + 1j * t) / t ** 2
    series = 0.5 + 1j * theta / 6 - theta ** 2 / 24 - 1j * theta ** 3 / 120
    return np.where(small, series, exact)


def link_table(source, k, phi_max, settings=QuadratureSettings()):
    """Tabulate G_k(phi) on [0, phi_max] (Filon-trapezoid on a refined z grid).

    rho_k is sampled every ``z_step`` and interpolated linearly; the
    Fourier integral of that interpolant is exact for any phi, so the table
    is not limited by the sampling Nyquist rate.
    """
    L = source.length
    n_seg = max(int(math.ceil(L / settings.z_step)), 16)
    h = L / n_seg
    rho = np.asarray(source(k, np.linspace(0.0, L, n_seg + 1)), dtype=float)
    if not np.all(np.isfinite(rho)):
        raise IntegralError(f"entity {k}: non-finite profile")
    n_fft = next_fast_len(settings.phi_oversample * n_seg)
    dphi = 2 * np.pi / (n_fft * h)
    count = int(math.ceil(phi_max / dphi)) + 3
    count += (count + 1) % 2
    s = n_fft * ifft(rho, n=n_fft)
    m = np.arange(count)
    s = s[m % n_fft]
    theta = 2 * np.pi * m / n_fft
    w = np.sinc(theta / (2 * np.pi)) ** 2
    e = _filon_end_weight(theta)
    f = h * (w * s + (e - w) * rho[0] + (np.conj(e) - w) * rho[-1] * np.exp(1j * theta * n_seg))
    g = np.abs(f) ** 2
    t = m * dphi
    moments = np.stack([cumulative_simpson(g * t ** j, dx=dphi, initial=0.0) for j in range(3)])
    return LinkTable(dphi, g, moments)


# -- frequency integrals -------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _half_integral(table, amp, b0, b1, e):
    """Signed int_0^e G(amp f (b0 + b1 f)) df, elementwise over broadcast arrays.

    phi is monotone between 0 and e, so the integral is taken in phi with
    the Jacobian |df/dphi| interpolated quadratically.  Spans shorter than
    a few table steps fall back to Gauss-Legendre in f.
    """
    amp, b0, b1, e = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (amp, b0, b1, e)))
    psi_e = np.abs(amp * e * (b0 + b1 * e))
    out = np.zeros(amp.shape)
    short = psi_e < 16 * table.dphi
    if np.any(short):
        a, c0, c1, es = (v[short][..., None] for v in (amp, b0, b1, e))
        f = 0.5 * es * (_GL_X + 1)
        out[short] = 0.5 * es[..., 0] * np.sum(_GL_W * table.g_at(a * f * (c0 + c1 * f)), axis=-1)
    sel = ~short
    if np.any(sel):
        a, c0, c1, ee, pe = amp[sel], b0[sel], b1[sel], e[sel], psi_e[sel]
        s1 = np.abs(a * ee / 2 * (c0 + c1 * ee / 2)) / pe
        j0 = 1.0 / np.abs(a * c0)
        j1 = 1.0 / np.abs(a * (c0 + c1 * ee))
        j2 = 1.0 / np.abs(a * (c0 + 2 * c1 * ee))
        q2 = ((j1 - j0) - s1 * (j2 - j0)) / (s1 ** 2 - s1)
        q1 = (j2 - j0) - q2
        val = j0 * table.moment(0, pe) + q1 * table.moment(1, pe) / pe + q2 * table.moment(2, pe) / pe ** 2
        out[sel] = np.sign(ee) * val
    return out


def _f2_grid(b_k, n, stretch):
    """Nodes and weights over [-B_k/2, B_k/2] (Simpson in a sinh-graded variable)."""
    s = np.linspace(-1.0, 1.0, n)
    w = simpson_weights(n, s[1] - s[0])
    if stretch == 0:
        return 0.5 * b_k * s, 0.5 * b_k * w
    scale = 0.5 * b_k / np.sinh(stretch)
    return scale * np.sinh(stretch * s), w * scale * stretch * np.cosh(stretch * s)


def simpson_weights(n, h):
    """Composite Simpson weights for ``n`` (odd) equispaced nodes of spacing ``h``."""
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson needs an odd number of nodes >= 3")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def _xpm_integral(table, fiber, f_i, f_k, b_i, b_k, settings, stretch=0.0):
    """int df2 int df1 [Pi] G_k(phi) for COIs ``f_i`` (array) and interferer ``f_k``."""
    f_i = np.atleast_1d(np.asarray(f_i, dtype=float))[:, None]
    b_i = np.broadcast_to(np.asarray(b_i, dtype=float), f_i.shape[:1])[:, None]
    f2, w2 = _f2_grid(b_k, settings.num_points, stretch)
    r = fiber.ref_frequency
    amp = -4 * np.pi ** 2 * (f2 + f_k - f_i)
    b0 = fiber.beta2 + np.pi * fiber.beta3 * (f2 + (f_i - r) + (f_k - r))
    b1 = np.pi * fiber.beta3
    lo = np.broadcast_to(-b_i / 2, amp.shape)
    hi = np.broadcast_to(b_i / 2, amp.shape)
    if settings.window:
        lo = np.maximum(lo, -b_k / 2 - f2)
        hi = np.minimum(hi, b_k / 2 - f2)
    inner = _half_integral(table, amp, b0, b1, hi) - _half_integral(table, amp, b0, b1, lo)
    inner = np.where(hi > lo, inner, 0.0)
    return inner @ w2


def _phi_reach(fiber, f_i, f_k, b_i, b_k):
    """Upper bound of |phi| over the integration rectangles."""
    r = fiber.ref_frequency
    f_i = np.atleast_1d(np.asarray(f_i, dtype=float))
    b_i = np.broadcast_to(np.asarray(b_i, dtype=float), f_i.shape)
    d = np.abs(f_k - f_i) + b_k / 2
    b = abs(fiber.beta2) + abs(np.pi * fiber.beta3) * (np.abs(f_i - r) + abs(f_k - r) + b_k / 2 + b_i / 2)
    return float(np.max(4 * np.pi ** 2 * d * b * b_i / 2)) * 1.01


def eta_xpm_numeric(source, fiber, i, k, p_i, p_k, b_i, b_k, settings=QuadratureSettings(), table=None):
    """XPM efficiency of interferer ``k`` on COI ``i`` by quadrature [1/W^2].

    ``i`` and ``k`` index ``source.frequency``.
    """
    if p_k == 0:
        return 0.0
    f_i, f_k = source.frequency[i], source.frequency[k]
    if table is None:
        table = link_table(source, k, _phi_reach(fiber, f_i, f_k, b_i, b_k), settings)
    val = _xpm_integral(table, fiber, f_i, f_k, b_i, b_k, settings)[0]
    return float(32.0 / 27.0 * fiber.gamma ** 2 / b_k ** 2 * (p_k / p_i) ** 2 * val)


def eta_spm_numeric(source, fiber, i, b_i, settings=QuadratureSettings(), table=None):
    """SPM efficiency of channel ``i`` by quadrature [1/W^2] (half the k = i XPM term)."""
    f_i = source.frequency[i]
    if table is None:
        table = link_table(source, i, _phi_reach(fiber, f_i, f_i, b_i, b_i), settings)
    val = _xpm_integral(table, fiber, f_i, f_i, b_i, b_i, settings, settings.spm_stretch)[0]
    return float(16.0 / 27.0 * fiber.gamma ** 2 / b_i ** 2 * val)


def span_efficiencies_numeric(span, source, pump_interferers=False, settings=QuadratureSettings()):
    """(eta_SPM, eta_XPM) per channel of one span, by quadrature.

    One G table is built per interferer and shared by every COI.
    """
    fib = span.fiber
    ch = span.channels
    n = len(ch)
    coi = np.array([entity_index(source, f) for f in ch.frequency])
    freq = [*ch.frequency]
    power = [*ch.power]
    band = [*ch.bandwidth]
    if pump_interferers:
        fw = span.pumps.forward
        freq += list(fw.frequency)
        power += list(fw.power)
        band += [PUMP_BANDWIDTH] * len(fw)
    spm = np.empty(n)
    xpm = np.zeros(n)
    for j, (f_k, p_k, b_k) in enumerate(zip(freq, power, band)):
        k = entity_index(source, f_k)
        others = np.arange(n) != j
        reach = _phi_reach(fib, ch.frequency, f_k, ch.bandwidth, b_k)
        table = link_table(source, k, reach, settings)
        if j < n:
            spm[j] = eta_spm_numeric(source, fib, coi[j], ch.bandwidth[j], settings, table)
        if p_k == 0:
            continue
        val = _xpm_integral(table, fib, ch.frequency[others], f_k, ch.bandwidth[others], b_k, settings)
        xpm[others] += 32.0 / 27.0 * fib.gamma ** 2 / b_k ** 2 * (p_k / ch.power[others]) ** 2 * val
    return spm, xpm


def eta_total_numeric(plan, sources, settings=QuadratureSettings()):
    """NLI spectrum of a link by quadrature, method tag "integral".

    Parameters
    ----------
    plan : LinkPlan
    sources : sequence
        One profile source per span (:class:`FittedRho`, :class:`OdeRho`,
        ...).  Repeated (span, source) pairs are evaluated once.
    """
    if len(sources) != plan.num_spans:
        raise ValueError(f"need one profile source per span ({plan.num_spans}), got {len(sources)}")
    cache = {}
    per_span = []
    for span, src in zip(plan.spans, sources):
        key = (id(span), id(src))
        if key not in cache:
            cache[key] = span_efficiencies_numeric(span, src, plan.pump_interferers, settings)
        per_span.append(cache[key])
    out = accumulate(plan, per_span, "integral")
    info = {"rho": sorted({getattr(s, "method", "custom") for s in sources}), "settings": settings}
    return replace(out, info=info)


# -- lumped cross-check ----------------------------------------------------------

def lumped_toy(count=5, spacing=200e9, symbol_rate=96e9, power=1e-3, alpha_db_km=0.2,
               gamma=1.3e-3, dispersion=17.0, slope=0.0, length=80e3):
    """Pure-loss C-band span around 1550 nm plus its exact lumped profiles.

    Returns
    -------
    (Span, ProfileFit)
    """
    from .fitting import ProfileFit
    from .model import AttenuationCurve, ChannelPlan, FiberSpec, PumpSet, RamanGainCurve, Span
    from .units import db_km_to_neper_m, nm_to_hz

    alpha = db_km_to_neper_m(alpha_db_km)
    fiber = FiberSpec.from_dispersion(AttenuationCurve.flat(alpha), RamanGainCurve.zero(), gamma,
                                      dispersion, slope, length)
    ch = ChannelPlan.uniform(count, spacing, nm_to_hz(1550.0), symbol_rate, power)
    span = Span(fiber, ch, PumpSet.empty())
    return span, ProfileFit.lumped(ch.frequency, alpha, length)


def lumped_reduction_check(settings=QuadratureSettings(), **toy):
    """Closed form vs quadrature on :func:`lumped_toy`.

    Returns
    -------
    dict
        Max relative deviation of per-channel eta_XPM and eta_SPM.
    """
    from .closed import span_efficiencies

    span, fit = lumped_toy(**toy)
    c_spm, c_xpm = span_efficiencies(span, fit)
    n_spm, n_xpm = span_efficiencies_numeric(span, FittedRho(fit), False, settings)
    return {"xpm": float(np.max(np.abs(c_xpm / n_xpm - 1))), "spm": float(np.max(np.abs(c_spm / n_spm - 1)))}
