"""Physical data types for a Raman-amplified link.

All containers are frozen dataclasses holding read-only numpy arrays, so a
plan can be shared between workers without copying.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from .units import C_LIGHT, dispersion_to_beta, beta_to_dispersion

FW = "FW"
BW = "BW"


class InvariantError(ValueError):
    """A physical data type was constructed in violation of one of its rules."""

    def __init__(self, rule, detail=""):
        self.rule = rule
        self.detail = detail
        super().__init__(f"{rule}: {detail}" if detail else rule)


def _frozen_array(x, dtype=float):
    a = np.array(x, dtype=dtype, copy=True)
    a = np.atleast_1d(a)
    a.flags.writeable = False
    return a


class _ArrayEq:
    """Field-wise equality that understands numpy arrays."""

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        for f in fields(self):
            if not f.compare:
                continue
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


@dataclass(frozen=True, eq=False)
class AttenuationCurve(_ArrayEq):
    """Power attenuation coefficient [1/m] sampled against absolute frequency [Hz].

    Linear interpolation in frequency; queries outside the sampled band raise.
    """

    frequency: np.ndarray
    alpha: np.ndarray
    source: str = field(default=None, compare=False)

    def __post_init__(self):
        f = _frozen_array(self.frequency)
        a = _frozen_array(self.alpha)
        if f.shape != a.shape or f.size < 2:
            raise InvariantError("attenuation samples", "need >= 2 matching (frequency, alpha) samples")
        if np.any(np.diff(f) <= 0):
            raise InvariantError("attenuation samples strictly increasing in frequency")
        if np.any(~(a > 0)):
            raise InvariantError("attenuation alpha > 0 at every sample")
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "alpha", a)

    def __call__(self, frequency):
        f = np.asarray(frequency, dtype=float)
        if np.any(f < self.frequency[0]) or np.any(f > self.frequency[-1]):
            raise ValueError(
                f"frequency outside attenuation curve domain "
                f"[{self.frequency[0]:.6e}, {self.frequency[-1]:.6e}] Hz")
        return np.interp(f, self.frequency, self.alpha)

    @classmethod
    def flat(cls, alpha, f_min=150e12, f_max=250e12):
        return cls(np.array([f_min, f_max]), np.array([alpha, alpha]))


@dataclass(frozen=True, eq=False)
class RamanGainCurve(_ArrayEq):
    """Raman gain g_r(delta_f) [1/(W m)], already normalized by the effective area."""

    delta_f: np.ndarray
    gain: np.ndarray
    source: str = field(default=None, compare=False)

    def __post_init__(self):
        df = _frozen_array(self.delta_f)
        g = _frozen_array(self.gain)
        if df.shape != g.shape or df.size < 2:
            raise InvariantError("raman gain samples", "need >= 2 matching samples")
        if df[0] != 0.0 or g[0] != 0.0:
            raise InvariantError("raman gain g_r(0) = 0", "first sample must be (0, 0)")
        if np.any(np.diff(df) <= 0):
            raise InvariantError("raman gain samples strictly increasing in delta_f")
        if np.any(g < 0):
            raise InvariantError("raman gain g_r >= 0")
        if df[-1] < 26e12:
            raise InvariantError("raman gain domain covers [0, 26 THz]", f"ends at {df[-1]:.4e} Hz")
        object.__setattr__(self, "delta_f", df)
        object.__setattr__(self, "gain", g)

    @property
    def max_delta_f(self):
        return float(self.delta_f[-1])

    def __call__(self, delta_f):
        d = np.abs(np.asarray(delta_f, dtype=float))
        if np.any(d > self.delta_f[-1]):
            raise ValueError(f"frequency separation beyond Raman gain curve ({self.delta_f[-1]:.4e} Hz)")
        return np.interp(d, self.delta_f, self.gain)

    def triangular_slope(self, upto=15e12):
        """Least-squares slope through the origin of g_r over [0, upto] [1/(W m Hz)]."""
        # sample the interpolant: the curve's own samples may be sparse in [0, upto]
        x = np.linspace(0.0, upto, 301)
        return float(np.dot(x, self(x)) / np.dot(x, x))

    @classmethod
    def zero(cls, max_delta_f=40e12):
        return cls(np.array([0.0, max_delta_f]), np.array([0.0, 0.0]))

    @classmethod
    def triangular(cls, slope, peak_delta_f=13e12, max_delta_f=40e12):
        """Linear ramp up to ``peak_delta_f`` then zero; handy for toy problems."""
        df = np.array([0.0, peak_delta_f, peak_delta_f * (1 + 1e-9), max_delta_f])
        return cls(df, np.array([0.0, slope * peak_delta_f, 0.0, 0.0]))


@dataclass(frozen=True, eq=False)
class FiberSpec(_ArrayEq):
    """One fibre span.

    ``gamma`` in 1/(W m), ``beta2`` in s^2/m, ``beta3`` in s^3/m, both defined at
    ``ref_wavelength`` [m]; ``span_length`` in m.
    """

    attenuation: AttenuationCurve
    raman_gain: RamanGainCurve
    gamma: float
    beta2: float
    beta3: float
    span_length: float
    ref_wavelength: float = 1550e-9

    def __post_init__(self):
        if not self.span_length > 0:
            raise InvariantError("span length L > 0", str(self.span_length))
        if not self.gamma >= 0:
            raise InvariantError("nonlinear parameter gamma >= 0", str(self.gamma))
        for name in ("gamma", "beta2", "beta3", "span_length", "ref_wavelength"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_dispersion(cls, attenuation, raman_gain, gamma, d_ps_nm_km, s_ps_nm2_km,
                        span_length, ref_wavelength=1550e-9):
        beta2, beta3 = dispersion_to_beta(d_ps_nm_km, s_ps_nm2_km, ref_wavelength)
        return cls(attenuation, raman_gain, gamma, beta2, beta3, span_length, ref_wavelength)

    @property
    def ref_frequency(self):
        return C_LIGHT / self.ref_wavelength

    @property
    def dispersion(self):
        """(D [ps/(nm km)], S [ps/(nm^2 km)]) at the reference wavelength."""
        return beta_to_dispersion(self.beta2, self.beta3, self.ref_wavelength)


@dataclass(frozen=True, eq=False)
class ChannelPlan(_ArrayEq):
    """WDM grid: centre frequency [Hz], bandwidth (= symbol rate) [Hz], launch power [W]."""

    frequency: np.ndarray
    bandwidth: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        f = _frozen_array(self.frequency)
        b = _frozen_array(self.bandwidth)
        p = _frozen_array(self.power)
        if not (f.shape == b.shape == p.shape) or f.ndim != 1 or f.size == 0:
            raise InvariantError("channel plan shape", "frequency, bandwidth and power must be equal-length vectors")
        if np.any(~(p > 0)):
            raise InvariantError("channel power P_i > 0")
        if np.any(~(b > 0)):
            raise InvariantError("channel bandwidth B_i > 0")
        if np.any(np.diff(f) <= 0):
            raise InvariantError("channels sorted by frequency")
        gap = np.diff(f)
        need = 0.5 * (b[1:] + b[:-1])
        bad = np.nonzero(gap < need * (1 - 1e-12))[0]
        if bad.size:
            j = int(bad[0])
            raise InvariantError("channels non-overlapping",
                                 f"channels {j} and {j + 1}: spacing {gap[j]:.4e} Hz < {need[j]:.4e} Hz")
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "bandwidth", b)
        object.__setattr__(self, "power", p)

    def __len__(self):
        return self.frequency.size

    @classmethod
    def uniform(cls, count, spacing, center_frequency, symbol_rate, power):
        offsets = (np.arange(count) - (count - 1) / 2) * spacing
        return cls(center_frequency + offsets, np.full(count, float(symbol_rate)), np.full(count, float(power)))

    def with_power(self, power):
        return ChannelPlan(self.frequency, self.bandwidth, np.broadcast_to(power, self.frequency.shape))


@dataclass(frozen=True, eq=False)
class PumpSet(_ArrayEq):
    """Raman pumps.

    ``power`` is the boundary power: at z=0 for FW pumps, at z=L for BW pumps.
    """

    frequency: np.ndarray = ()
    direction: tuple = ()
    power: np.ndarray = ()

    def __post_init__(self):
        f = _frozen_array(self.frequency) if len(self.frequency) else _frozen_array(np.zeros(0))
        p = _frozen_array(self.power) if len(self.power) else _frozen_array(np.zeros(0))
        d = tuple(str(x).upper() for x in self.direction)
        if not (f.size == p.size == len(d)):
            raise InvariantError("pump set shape", "frequency, direction and power must have equal length")
        if any(x not in (FW, BW) for x in d):
            raise InvariantError("pump direction is FW or BW", str(d))
        if np.any(~(p > 0)):
            raise InvariantError("pump boundary_power > 0")
        if np.unique(f).size != f.size:
            raise InvariantError("pump frequencies distinct")
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "power", p)
        object.__setattr__(self, "direction", d)

    def __len__(self):
        return self.frequency.size

    @property
    def is_backward(self):
        return np.array([d == BW for d in self.direction], dtype=bool)

    @property
    def forward(self):
        return self.subset(~self.is_backward)

    @property
    def backward(self):
        return self.subset(self.is_backward)

    def subset(self, mask):
        idx = np.nonzero(mask)[0]
        return PumpSet(self.frequency[idx], tuple(self.direction[i] for i in idx), self.power[idx])

    @classmethod
    def empty(cls):
        return cls(np.zeros(0), (), np.zeros(0))


@dataclass(frozen=True, eq=False)
class Span(_ArrayEq):
    fiber: FiberSpec
    channels: ChannelPlan
    pumps: PumpSet = field(default_factory=PumpSet.empty)

    def __post_init__(self):
        if len(self.pumps) and np.any(np.isin(self.pumps.frequency, self.channels.frequency)):
            raise InvariantError("pump frequencies distinct from channel frequencies")


@dataclass(frozen=True, eq=False)
class LinkPlan(_ArrayEq):
    """Ordered spans plus the SPM coherence exponent ``epsilon``."""

    spans: tuple
    epsilon: float = 0.0
    pump_interferers: bool = False

    def __post_init__(self):
        spans = tuple(self.spans)
        if not spans:
            raise InvariantError("link has at least one span")
        ref = spans[0].channels.frequency
        for j, s in enumerate(spans[1:], start=2):
            if not np.array_equal(s.channels.frequency, ref):
                raise InvariantError("every span has the same channel frequencies", f"span {j} differs")
        if not self.epsilon >= 0:
            raise InvariantError("coherence factor epsilon >= 0", str(self.epsilon))
        object.__setattr__(self, "spans", spans)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "pump_interferers", bool(self.pump_interferers))

    @property
    def num_spans(self):
        return len(self.spans)

    @property
    def channels(self):
        return self.spans[0].channels

    def with_spans(self, n):
        """Same first span repeated ``n`` times (ideal, identical amplified spans)."""
        return LinkPlan((self.spans[0],) * n, self.epsilon, self.pump_interferers)
