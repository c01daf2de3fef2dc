"""Coupled Raman power evolution for WDM channels and FW/BW pumps.

Every entity e (channel or pump) obeys::

    s_e dP_e/dz = P_e * sum_k G[e, k] P_k - alpha_e P_e

with s_e = -1 for backward pumps.  ``G[e, k] = g_r(f_k - f_e)`` when k sits
above e in frequency (e gains) and ``-(f_e/f_k) g_r(f_e - f_k)`` when k sits
below (e donates), so the photon flux sum P/f is conserved when alpha = 0.

Backward pumps turn the problem into a two-point boundary value problem,
solved by shooting on their unknown z=0 powers.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .model import BW, FW
from .units import frequency_to_wavelength

CHANNEL = "channel"
FW_PUMP = "fw_pump"
BW_PUMP = "bw_pump"
LOCAL_MARGIN = 0.1


class RamanSolverError(RuntimeError):
    """Integration failed (step-size underflow or unphysical negative power)."""


class BvpConvergenceError(RamanSolverError):
    def __init__(self, message, worst_mismatch, profile=None):
        super().__init__(message)
        self.worst_mismatch = worst_mismatch
        self.profile = profile


@dataclass(frozen=True)
class SolverSettings:
    """Integration and shooting controls.

    Parameters
    ----------
    first_step : float
        Initial trial step [m]; ``None`` lets the integrator choose.
    rtol, atol : float
        Accuracy targets for the returned powers (relative, absolute in W).
        The integrator's local error tests run ``LOCAL_MARGIN`` times
        tighter, since RK45's global error over a span is several times its
        local tolerance.
    num_points : int
        Size of the uniform output grid over [0, L].
    bvp_max_iter : int
        Maximum number of shooting iterations.
    bvp_tol : float
        Relative tolerance on the BW pump powers at z=L.
    damping : float
        Exponent of the multiplicative shooting update, in (0, 1].
    negative_tol : float
        Largest negative excursion [W] silently clamped to zero.
    """

    first_step: float = None
    rtol: float = 1e-8
    atol: float = 1e-12
    num_points: int = 1001
    bvp_max_iter: int = 200
    bvp_tol: float = 1e-6
    damping: float = 0.5
    negative_tol: float = 1e-9

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.bvp_tol > 0):
            raise ValueError("solver tolerances must be > 0")
        if self.bvp_max_iter < 1:
            raise ValueError("bvp_max_iter must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.num_points < 2:
            raise ValueError("num_points must be >= 2")
        if self.first_step is not None and not self.first_step > 0:
            raise ValueError("first_step must be > 0")


@dataclass(frozen=True, eq=False)
class PowerProfile:
    """Powers [W] of every entity on a z-grid [m].

    Rows are channels first, then pumps in the order of the span's PumpSet.
    """

    z: np.ndarray
    powers: np.ndarray
    frequency: np.ndarray
    kind: tuple
    clamped: bool = False
    iterations: int = 0
    bvp_mismatch: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def span_length(self):
        return float(self.z[-1])

    @property
    def n_channels(self):
        return sum(k == CHANNEL for k in self.kind)

    @property
    def channel_powers(self):
        return self.powers[: self.n_channels]

    def entity_mask(self, kind):
        return np.array([k == kind for k in self.kind], dtype=bool)

    def at_end(self):
        return self.powers[:, -1]


@dataclass(frozen=True)
class _System:
    frequency: np.ndarray
    kind: tuple
    alpha: np.ndarray
    gain: np.ndarray
    sign: np.ndarray


def _entities(span):
    ch, pumps = span.channels, span.pumps
    f = np.concatenate([ch.frequency, pumps.frequency])
    kind = (CHANNEL,) * len(ch) + tuple(FW_PUMP if d == FW else BW_PUMP for d in pumps.direction)
    return f, kind


def gain_matrix(frequency, raman_gain):
    """Matrix G with G @ P giving the net Raman rate per unit power of each entity."""
    f = np.asarray(frequency, dtype=float)
    df = f[None, :] - f[:, None]          # f_k - f_e
    g = raman_gain(np.abs(df))
    ratio = f[:, None] / f[None, :]
    return np.where(df > 0, g, -ratio * g)


def build_system(span):
    f, kind = _entities(span)
    alpha = span.fiber.attenuation(f)
    G = gain_matrix(f, span.fiber.raman_gain)
    sign = np.array([-1.0 if k == BW_PUMP else 1.0 for k in kind])
    return _System(f, kind, alpha, G, sign)


def rhs(z, powers, system):
    """dP/dz for every entity; negative inputs are treated as zero power."""
    p = np.maximum(powers, 0.0)
    return system.sign * (p * (system.gain @ p) - system.alpha * p)


class _BlowUp(Exception):
    pass


def _integrate(system, p0, length, settings, ceiling=None):
    z_grid = np.linspace(0.0, length, settings.num_points)
    kw = {}
    if settings.first_step is not None:
        kw["first_step"] = settings.first_step
    if ceiling is not None:
        # a too-large shooting guess makes the backward rows run away in finite z
        def runaway(z, p, system):
            return ceiling - p.max()
        runaway.terminal = True
        kw["events"] = runaway
    # dense output keeps the step control independent of the output grid
    sol = solve_ivp(rhs, (0.0, length), p0, method="RK45", args=(system,),
                    rtol=settings.rtol * LOCAL_MARGIN, atol=settings.atol * LOCAL_MARGIN, dense_output=True, **kw)
    if sol.status == 1:
        raise _BlowUp()
    if not sol.success:
        raise RamanSolverError(f"Raman integration failed: {sol.message}")
    p = sol.sol(z_grid)
    p[:, 0] = p0
    p[:, -1] = sol.y[:, -1]
    low = p.min()
    if low < -settings.negative_tol:
        raise RamanSolverError(f"negative power excursion {low:.3e} W beyond tolerance")
    clamped = bool(low < 0)
    return z_grid, np.maximum(p, 0.0), clamped, sol.nfev


def _launch(span, bw_start=None):
    p0 = np.concatenate([span.channels.power, span.pumps.power])
    bw = span.pumps.is_backward
    if bw.any():
        if bw_start is None:
            raise ValueError("backward pumps need z=0 powers; use solve_bvp")
        p0[len(span.channels) + np.nonzero(bw)[0]] = bw_start
    return p0


def solve_forward(span, settings=SolverSettings(), bw_start=None):
    """Integrate from z=0 to z=L.

    Parameters
    ----------
    span : Span
    settings : SolverSettings
    bw_start : array_like, optional
        z=0 powers of the BW pumps.  Only meaningful for checking a converged
        shooting solution; normal callers leave it out and have no BW pumps.
    """
    system = build_system(span)
    p0 = _launch(span, bw_start)
    z, p, clamped, nfev = _integrate(system, p0, span.fiber.span_length, settings)
    return PowerProfile(z, p, system.frequency, system.kind, clamped, info={"nfev": nfev})


def _relax(system, rows, target, p_launch, length, settings, sweeps=60, tol=1e-4):
    """Alternate forward and backward sweeps, each entity integrated along its
    own propagation direction with the counter-propagating powers frozen.

    Cheap and unconditionally stable, so it gives the shooting stage a start
    point close enough for Newton to take over.
    """
    n = system.frequency.size
    bwm = np.zeros(n, dtype=bool)
    bwm[rows] = True
    fw = np.nonzero(~bwm)[0]
    z = np.linspace(0.0, length, settings.num_points)
    G, a = system.gain, system.alpha
    Gff, Gfb = G[np.ix_(fw, fw)], G[np.ix_(fw, rows)]
    Gbb, Gbf = G[np.ix_(rows, rows)], G[np.ix_(rows, fw)]
    pb = target[:, None] * np.exp(-a[rows, None] * (length - z[None, :]))
    loose = dict(rtol=max(settings.rtol, 1e-7), atol=settings.atol)

    def frozen(grid):
        return lambda x: np.array([np.interp(x, z, g) for g in grid])

    x = pb[:, 0].copy()
    for _ in range(sweeps):
        ext = frozen(pb)
        sol = solve_ivp(lambda zz, p: p * (Gff @ p + Gfb @ ext(zz)) - a[fw] * p,
                        (0.0, length), p_launch[fw], t_eval=z, **loose)
        if not sol.success:
            break
        pf = np.maximum(sol.y, 0.0)
        ext = frozen(pf)
        # s = L - z runs along the BW pumps' propagation direction
        sol = solve_ivp(lambda s, p: p * (Gbb @ p + Gbf @ ext(length - s)) - a[rows] * p,
                        (0.0, length), target, t_eval=z, **loose)
        if not sol.success:
            break
        pb = np.maximum(sol.y[:, ::-1], 1e-300)
        new = pb[:, 0]
        change = np.max(np.abs(np.log(new / x)))
        x = new.copy()
        if change < tol:
            break
    return x


def solve_bvp(span, settings=SolverSettings(), initial_guess=None):
    """Shooting solution for spans with BW pumps (FW pumps optional).

    The unknowns are the z=0 powers x of the BW pumps.  Every iteration
    integrates the full coupled system forward and applies a damped
    multiplicative correction ``x <- x * exp(damping * dlog x)``, where
    ``dlog x`` solves ``J dlog x = log(target) - log(P(L))`` with J the
    finite-difference Jacobian of log P(L) in log x (chord method: J is
    rebuilt only when the mismatch stops shrinking).  Pump-pump coupling
    makes J strongly non-diagonal, which is why a per-pump update is not
    used.  The start point comes from a forward/backward relaxation sweep.
    """
    bw = span.pumps.is_backward
    if not bw.any():
        raise ValueError("solve_bvp needs at least one BW pump; use solve_forward")
    system = build_system(span)
    rows = len(span.channels) + np.nonzero(bw)[0]
    target = span.pumps.power[bw]
    length = span.fiber.span_length
    p0 = _launch(span, target * np.exp(-system.alpha[rows] * length))
    if initial_guess is None:
        x = _relax(system, rows, target, p0, length, settings)
    else:
        x = np.asarray(initial_guess, dtype=float).copy()
    ceiling = 100.0 * max(p0.max(), target.max())
    log_t = np.log(target)

    def shoot(xv):
        p0[rows] = xv
        out = _integrate(system, p0.copy(), length, settings, ceiling)
        return out, np.log(np.maximum(out[1][rows, -1], 1e-300))

    def jacobian(xv, base):
        h = 1e-4
        J = np.empty((xv.size, xv.size))
        for j in range(xv.size):
            xp = xv.copy()
            xp[j] *= np.exp(h)
            J[:, j] = (shoot(xp)[1] - base) / h
        return J

    best, J, prev = None, None, np.inf
    step = settings.damping
    for it in range(1, settings.bvp_max_iter + 1):
        try:
            (z, p, clamped, nfev), log_end = shoot(x)
        except _BlowUp:
            x = x * 0.5
            J = None
            continue
        worst = float(np.max(np.abs(np.exp(log_end - log_t) - 1.0)))
        prof = PowerProfile(z, p, system.frequency, system.kind, clamped, it, worst,
                            info={"bw_start": x.copy()})
        if best is None or worst < best.bvp_mismatch:
            best = prof
        if worst < settings.bvp_tol:
            return prof
        if J is None or worst > 0.7 * prev:
            try:
                J = jacobian(x, log_end)
            except _BlowUp:
                J = np.eye(x.size)
        prev = worst
        try:
            dlog = np.linalg.solve(J, log_t - log_end)
        except np.linalg.LinAlgError:
            dlog = log_t - log_end
        # near the solution the chord step is accurate; take it whole
        frac = 1.0 if worst < 1e-2 else step
        x = x * np.exp(np.clip(frac * dlog, -2.0, 2.0))
    worst = np.inf if best is None else best.bvp_mismatch
    raise BvpConvergenceError(
        f"shooting did not converge in {settings.bvp_max_iter} iterations; "
        f"worst relative mismatch {worst:.3e}", worst, best)


def solve_span(span, settings=SolverSettings()):
    """Dispatch to :func:`solve_forward` or :func:`solve_bvp`."""
    if span.pumps.is_backward.any():
        return solve_bvp(span, settings)
    return solve_forward(span, settings)


def normalized_profile(profile, i):
    """rho(z) = P_i(z) / P_i(0) on the profile grid."""
    p = profile.powers[i]
    if not p[0] > 0:
        raise ValueError(f"entity {i} has zero launch power")
    rho = p / p[0]
    rho[0] = 1.0
    return rho


def profile_to_csv(profile, path):
    """Write z in km plus one power column [W] per entity."""
    wl = frequency_to_wavelength(profile.frequency) * 1e9
    header = ["z_km"] + [f"P_{w:.3f}nm_{k}_W" for w, k in zip(wl, profile.kind)]
    data = np.column_stack([profile.z / 1e3, profile.powers.T])
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt="%.10e")
