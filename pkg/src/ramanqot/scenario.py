"""Scenario files and curve CSV ingestion.

A scenario is a UTF-8 JSON document::

    {
      "fiber": {"attenuation_csv": "g652d_attenuation.csv",
                "raman_gain_csv": "g652d_raman_gain.csv",
                "gamma": 1.16, "D": 16.5, "S": 0.09,
                "ref_wavelength_nm": 1550, "span_km": 80},
      "channels": {"count": 131, "spacing_ghz": 100, "center_nm": 1550,
                   "symbol_rate_gbd": 96, "power_dbm": -4},
      "pumps": [{"wavelength_nm": 1402.1, "direction": "FW", "power_mw": 150.9}],
      "link": {"num_spans": 1, "epsilon": 0.0, "pump_interferers": false},
      "settings": {}
    }

Curve paths are resolved relative to the scenario file.  ``gamma`` is in
1/(W km).  Instead of ``D``/``S`` a fibre may give ``beta2_s2_m`` and
``beta3_s3_m``.  ``channels`` may instead hold a ``list`` of channel objects.
Every boundary quantity also has an SI spelling (``frequency_hz``,
``power_w``, ``gamma_per_w_m`` ...), which is what :func:`dump_scenario`
writes so that dump/load round-trips bit-exactly.  A top-level ``spans``
list of ``{fiber, channels, pumps}`` objects describes heterogeneous links.
"""

import json
from pathlib import Path

import numpy as np

from . import units
from .model import (AttenuationCurve, ChannelPlan, FiberSpec, InvariantError,
                    LinkPlan, PumpSet, RamanGainCurve, Span)

DATA_DIR = Path(__file__).resolve().parent / "data"

BUNDLED = {
    "fw": "fw.json",
    "bw": "bw.json",
    "fwbw": "fwbw.json",
    "zero_pump": "zero_pump.json",
}


class ScenarioError(ValueError):
    """Scenario could not be parsed; ``location`` names the offending field or line."""

    def __init__(self, location, message):
        self.location = location
        super().__init__(f"{location}: {message}")


def bundled_scenario(name):
    """Path of one of the shipped scenarios (``fw``, ``bw``, ``fwbw``, ``zero_pump``)."""
    try:
        return DATA_DIR / BUNDLED[name]
    except KeyError:
        raise ValueError(f"unknown bundled scenario {name!r}; choose from {sorted(BUNDLED)}") from None


# -- curves -----------------------------------------------------------------

def _read_two_columns(path, header):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip().replace(" ", "")
    if first != header:
        raise ScenarioError(f"{path}:1", f"expected header {header!r}, found {first!r}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ScenarioError(str(path), f"bad numeric data ({exc})") from None
    if data.shape[1] != 2:
        raise ScenarioError(str(path), "expected two columns")
    return data[:, 0], data[:, 1]


def load_attenuation_csv(path):
    """Read ``wavelength_nm,alpha_db_km`` and return a frequency-sorted curve in 1/m."""
    wl, a_db = _read_two_columns(path, "wavelength_nm,alpha_db_km")
    f = units.nm_to_hz(wl)
    order = np.argsort(f)
    return AttenuationCurve(f[order], units.db_km_to_neper_m(a_db[order]), source=str(path))


def load_raman_gain_csv(path):
    """Read ``delta_f_thz,gain_1_km_w`` and return the curve in Hz and 1/(W m)."""
    df, g = _read_two_columns(path, "delta_f_thz,gain_1_km_w")
    return RamanGainCurve(df * 1e12, g * 1e-3, source=str(path))


# -- parsing helpers ----------------------------------------------------------

def _get(d, key, loc, default=KeyError):
    if key in d:
        return d[key]
    if default is KeyError:
        raise ScenarioError(f"{loc}.{key}", "missing required field")
    return default


def _num(d, key, loc, default=KeyError):
    v = _get(d, key, loc, default)
    if v is default and default is not KeyError:
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{loc}.{key}", f"expected a number, got {v!r}")
    return float(v)


def _one_of(d, loc, options):
    """Return (key, value) for the first present key among ``options``."""
    for k in options:
        if k in d:
            return k, _num(d, k, loc)
    raise ScenarioError(f"{loc}.{options[0]}", f"missing; give one of {', '.join(options)}")


def _section(doc, key, loc, kind=dict):
    v = _get(doc, key, loc)
    if not isinstance(v, kind):
        raise ScenarioError(f"{loc}.{key}", f"expected a JSON {kind.__name__}")
    return v


def _curve(fib, base, loc, csv_key, inline_key, loader, cls, cols):
    if csv_key in fib:
        p = Path(fib[csv_key])
        if not p.is_absolute():
            p = base / p
        if not p.exists():
            raise ScenarioError(f"{loc}.{csv_key}", f"file not found: {p}")
        return loader(p)
    if inline_key in fib:
        d = fib[inline_key]
        try:
            return cls(np.asarray(d[cols[0]], float), np.asarray(d[cols[1]], float))
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"{loc}.{inline_key}", f"expected keys {cols} ({exc})") from None
    raise ScenarioError(f"{loc}.{csv_key}", "missing curve")


def _parse_fiber(fib, base, loc):
    att = _curve(fib, base, loc, "attenuation_csv", "attenuation",
                 load_attenuation_csv, AttenuationCurve, ("frequency_hz", "alpha_per_m"))
    gain = _curve(fib, base, loc, "raman_gain_csv", "raman_gain",
                  load_raman_gain_csv, RamanGainCurve, ("delta_f_hz", "gain_per_w_m"))
    if "gamma_per_w_m" in fib:
        gamma = _num(fib, "gamma_per_w_m", loc)
    else:
        gamma = _num(fib, "gamma", loc) * 1e-3
    if "span_m" in fib:
        length = _num(fib, "span_m", loc)
    else:
        length = _num(fib, "span_km", loc) * 1e3
    if "ref_wavelength_m" in fib:
        ref = _num(fib, "ref_wavelength_m", loc)
    else:
        ref = _num(fib, "ref_wavelength_nm", loc, 1550.0) * 1e-9
    if "beta2_s2_m" in fib:
        beta2 = _num(fib, "beta2_s2_m", loc)
        beta3 = _num(fib, "beta3_s3_m", loc, 0.0)
    else:
        beta2, beta3 = units.dispersion_to_beta(_num(fib, "D", loc), _num(fib, "S", loc, 0.0), ref)
    return FiberSpec(att, gain, gamma, beta2, beta3, length, ref)


def _parse_channels(ch, loc):
    if "list" in ch:
        items = ch["list"]
        if not isinstance(items, list) or not items:
            raise ScenarioError(f"{loc}.list", "expected a non-empty list")
        f, b, p = [], [], []
        for j, c in enumerate(items):
            cl = f"{loc}.list[{j}]"
            k, v = _one_of(c, cl, ("frequency_hz", "frequency_thz", "wavelength_nm"))
            f.append({"frequency_hz": v, "frequency_thz": v * 1e12}.get(k, float(units.nm_to_hz(v))))
            k, v = _one_of(c, cl, ("bandwidth_hz", "symbol_rate_gbd"))
            b.append(v if k == "bandwidth_hz" else v * 1e9)
            k, v = _one_of(c, cl, ("power_w", "power_dbm"))
            p.append(v if k == "power_w" else float(units.dbm_to_watt(v)))
        return ChannelPlan(np.array(f), np.array(b), np.array(p))
    count = _num(ch, "count", loc)
    if count != int(count) or count < 1:
        raise ScenarioError(f"{loc}.count", "expected a positive integer")
    center = units.nm_to_hz(_num(ch, "center_nm", loc))
    return ChannelPlan.uniform(int(count), _num(ch, "spacing_ghz", loc) * 1e9, float(center),
                               _num(ch, "symbol_rate_gbd", loc) * 1e9,
                               float(units.dbm_to_watt(_num(ch, "power_dbm", loc))))


def _parse_pumps(pumps, loc):
    if not isinstance(pumps, list):
        raise ScenarioError(loc, "expected a list")
    f, d, p = [], [], []
    for j, q in enumerate(pumps):
        ql = f"{loc}[{j}]"
        k, v = _one_of(q, ql, ("frequency_hz", "wavelength_nm"))
        f.append(v if k == "frequency_hz" else float(units.nm_to_hz(v)))
        direction = _get(q, "direction", ql)
        if str(direction).upper() not in ("FW", "BW"):
            raise ScenarioError(f"{ql}.direction", f"expected FW or BW, got {direction!r}")
        d.append(str(direction).upper())
        k, v = _one_of(q, ql, ("power_w", "power_mw"))
        p.append(v if k == "power_w" else v * 1e-3)
    if not f:
        return PumpSet.empty()
    return PumpSet(np.array(f), tuple(d), np.array(p))


def _with_location(fn, loc, *args):
    try:
        return fn(*args)
    except InvariantError as exc:
        raise InvariantError(exc.rule, f"{loc}: {exc.detail}" if exc.detail else loc) from None


def parse_scenario(doc, base=Path(".")):
    """Build ``(LinkPlan, settings)`` from an already decoded JSON object."""
    if not isinstance(doc, dict):
        raise ScenarioError("$", "top level must be a JSON object")
    link = doc.get("link", {})
    if not isinstance(link, dict):
        raise ScenarioError("$.link", "expected a JSON object")
    if "spans" in doc:
        raw = _section(doc, "spans", "$", list)
        spans = []
        for j, s in enumerate(raw):
            loc = f"$.spans[{j}]"
            fiber = _with_location(_parse_fiber, loc, _section(s, "fiber", loc), base, f"{loc}.fiber")
            chans = _with_location(_parse_channels, loc, _section(s, "channels", loc), f"{loc}.channels")
            pumps = _with_location(_parse_pumps, loc, s.get("pumps", []), f"{loc}.pumps")
            spans.append(_with_location(Span, loc, fiber, chans, pumps))
    else:
        fiber = _with_location(_parse_fiber, "$.fiber", _section(doc, "fiber", "$"), base, "$.fiber")
        chans = _with_location(_parse_channels, "$.channels", _section(doc, "channels", "$"), "$.channels")
        pumps = _with_location(_parse_pumps, "$.pumps", doc.get("pumps", []), "$.pumps")
        n = _num(link, "num_spans", "$.link", 1.0)
        if n != int(n) or n < 1:
            raise ScenarioError("$.link.num_spans", "expected a positive integer")
        spans = [_with_location(Span, "$", fiber, chans, pumps)] * int(n)
    plan = _with_location(LinkPlan, "$.link", tuple(spans), _num(link, "epsilon", "$.link", 0.0),
                          bool(link.get("pump_interferers", False)))
    settings = doc.get("settings", {})
    if not isinstance(settings, dict):
        raise ScenarioError("$.settings", "expected a JSON object")
    return plan, settings


def read_scenario(path):
    """Load a scenario file and return ``(LinkPlan, settings dict)``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(str(path), f"cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return parse_scenario(doc, path.parent)


def load_scenario(path):
    """Load and validate a scenario file into a :class:`LinkPlan`."""
    return read_scenario(path)[0]


# -- serialisation ------------------------------------------------------------

def _fiber_doc(fiber, base):
    def curve(c, csv_key, inline_key, cols, arrays):
        if c.source is not None:
            p = Path(c.source).resolve()
            try:
                return {csv_key: str(p.relative_to(base))}
            except ValueError:
                return {csv_key: str(p)}
        return {inline_key: {cols[0]: arrays[0].tolist(), cols[1]: arrays[1].tolist()}}

    doc = {}
    doc.update(curve(fiber.attenuation, "attenuation_csv", "attenuation",
                     ("frequency_hz", "alpha_per_m"), (fiber.attenuation.frequency, fiber.attenuation.alpha)))
    doc.update(curve(fiber.raman_gain, "raman_gain_csv", "raman_gain",
                     ("delta_f_hz", "gain_per_w_m"), (fiber.raman_gain.delta_f, fiber.raman_gain.gain)))
    doc.update(gamma_per_w_m=fiber.gamma, beta2_s2_m=fiber.beta2, beta3_s3_m=fiber.beta3,
               ref_wavelength_m=fiber.ref_wavelength, span_m=fiber.span_length)
    return doc


def _span_doc(span, base):
    ch = span.channels
    return {
        "fiber": _fiber_doc(span.fiber, base),
        "channels": {"list": [{"frequency_hz": float(f), "bandwidth_hz": float(b), "power_w": float(p)}
                              for f, b, p in zip(ch.frequency, ch.bandwidth, ch.power)]},
        "pumps": pumps_to_doc(span.pumps),
    }


def pumps_to_doc(pumps, si=True):
    """Pump list in scenario syntax; ``si=False`` gives the nm/mW spelling."""
    out = []
    for f, d, p in zip(pumps.frequency, pumps.direction, pumps.power):
        if si:
            out.append({"frequency_hz": float(f), "direction": d, "power_w": float(p)})
        else:
            out.append({"wavelength_nm": round(float(units.hz_to_nm(f)), 6), "direction": d,
                        "power_mw": round(float(p) * 1e3, 9)})
    return out


def scenario_to_doc(plan, base=Path("."), settings=None):
    base = Path(base).resolve()
    link = {"epsilon": plan.epsilon, "pump_interferers": plan.pump_interferers}
    if all(s is plan.spans[0] or s == plan.spans[0] for s in plan.spans):
        doc = _span_doc(plan.spans[0], base)
        link["num_spans"] = plan.num_spans
    else:
        doc = {"spans": [_span_doc(s, base) for s in plan.spans]}
    doc["link"] = link
    if settings:
        doc["settings"] = settings
    return doc


def dump_scenario(plan, path, settings=None):
    """Write ``plan`` as a scenario file that reloads to an equal :class:`LinkPlan`."""
    path = Path(path)
    doc = scenario_to_doc(plan, path.parent, settings)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path
