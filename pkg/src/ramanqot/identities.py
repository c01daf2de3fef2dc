"""Numerical verification of the identities behind the closed-form model.

Each identity is checked on randomized parameter draws: algebraic ones
directly, definite integrals against adaptive quadrature (QUADPACK; the
semi-infinite oscillatory ones with Fourier weights).
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.integrate import quad

TOLERANCE = 1e-6


@dataclass
class IdentityReport:
    """Per-identity maximum relative error over the draws."""

    max_error: dict = field(default_factory=dict)
    draws: int = 0
    tolerance: float = TOLERANCE

    @property
    def failures(self):
        return [k for k, v in self.max_error.items() if not v <= self.tolerance]

    @property
    def ok(self):
        return not self.failures

    def lines(self):
        return [f"{'PASS' if v <= self.tolerance else 'FAIL'} {k}: max rel err {v:.2e}"
                for k, v in self.max_error.items()]


def multinomial(x, y, z, i):
    """(x + y + z)^i expanded over l1 + l2 <= i."""
    out = 0.0
    for l1 in range(i + 1):
        for l2 in range(i + 1 - l1):
            coef = factorial(i) / (factorial(l1) * factorial(l2) * factorial(i - l1 - l2))
            out += coef * x ** l1 * y ** l2 * z ** (i - l1 - l2)
    return out


def atan_integral(a, b, c, X):
    """int_0^X (ab + c^2x^2) / ((a^2 + c^2x^2)(b^2 + c^2x^2)) dx."""
    return (np.arctan(c * X / a) + np.arctan(c * X / b)) / (c * (a + b))


def sin2_integral(a, b, c):
    """int_0^{pi/2} of the same rational function of c sin(x)."""
    return np.pi / (2 * (a + b)) * (1 / np.sqrt(a ** 2 + c ** 2) + 1 / np.sqrt(b ** 2 + c ** 2))


def asinh_integral(d, X):
    """int_0^X x / sqrt(1 + d^2 x^4) dx."""
    return np.arcsinh(d * X ** 2) / (2 * d)


def cos_integral(a, b, c, L):
    """int_0^inf (ab + c^2x^2) cos(cxL) / ((a^2 + c^2x^2)(b^2 + c^2x^2)) dx."""
    return np.pi / 2 * (np.exp(-abs(a * L)) * np.sign(c / a) + np.exp(-abs(b * L)) * np.sign(c / b)) / (c * (a + b))


def sin_integral(a, b, c, L):
    """int_0^inf (a - b) c x sin(cxL) / ((a^2 + c^2x^2)(b^2 + c^2x^2)) dx."""
    return np.pi / 2 * (np.exp(-abs(a * L)) * np.sign(-c) + np.exp(-abs(b * L)) * np.sign(c)) / (c * (a + b))


def _rational(a, b, c):
    return lambda x: (a * b + c ** 2 * x ** 2) / ((a ** 2 + c ** 2 * x ** 2) * (b ** 2 + c ** 2 * x ** 2))


def _rel(lhs, rhs):
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


def _fourier(f, omega, kind, head):
    """int_0^inf f(x) cos|sin(omega x) dx for either sign of omega.

    The head [0, head] goes through QAWO (where the rational factor still
    has structure), the tail through QAWF.
    """
    w = abs(omega)
    sgn = np.sign(omega) if kind == "sin" else 1.0
    h = quad(f, 0, head, weight=kind, wvar=w, epsabs=0, epsrel=1e-11, limit=2000)[0]
    t = quad(f, head, np.inf, weight=kind, wvar=w, epsabs=1e-13, limlst=500)[0]
    return sgn * (h + t)


def verify_identities(draws=100, seed=0, perturb=None):
    """Check every identity on ``draws`` random parameter sets.

    Parameters
    ----------
    perturb : dict, optional
        Maps identity names to a relative offset added to the right-hand
        side; used to confirm the check detects a wrong identity.

    Returns
    -------
    IdentityReport
    """
    rng = np.random.default_rng(seed)
    perturb = perturb or {}
    rep = IdentityReport(draws=draws)
    logu = lambda lo, hi: float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    errs = {k: [] for k in ("multinomial", "modulus", "cross_term", "atan_integral", "sin2_integral",
                            "asinh_integral", "cos_integral", "sin_integral")}
    for n in range(draws):
        bump = lambda name, v: v * (1 + perturb.get(name, 0.0))
        x, y, z = rng.normal(size=3)
        for i in (1, 2, 3):
            # relative to the term magnitude: (x + y + z)^i itself may nearly cancel
            scale = (abs(x) + abs(y) + abs(z)) ** i
            err = abs(multinomial(x, y, z, i) - bump("multinomial", (x + y + z) ** i)) / scale
            errs["multinomial"].append(err)
        zk, zj = rng.normal(size=2) + 1j * rng.normal(size=2)
        errs["modulus"].append(_rel(abs(zk) ** 2, bump("modulus", (zk * np.conj(zk)).real)))
        errs["cross_term"].append(_rel((zk * np.conj(zj) + zj * np.conj(zk)).real,
                                       bump("cross_term", 2 * (zk * np.conj(zj)).real)))

        a, b = logu(0.1, 10), logu(0.1, 10)
        # half of the draws flip the sign of c
        c = logu(0.1, 10) * (-1 if n % 2 else 1)
        # keep max(a, b) L moderate: the oscillatory integrals equal
        # exp(-|aL|)-sized remainders of O(1) integrands, so for large aL
        # no quadrature resolves them to a relative 1e-6
        L = logu(0.1, 3) / max(a, b)
        X, d = logu(0.1, 10), logu(0.1, 10)
        f = _rational(a, b, c)
        lhs = quad(f, 0, X, epsabs=0, epsrel=1e-12, limit=200)[0]
        errs["atan_integral"].append(_rel(lhs, bump("atan_integral", atan_integral(a, b, c, X))))
        lhs = quad(lambda t: f(np.sin(t)), 0, np.pi / 2, epsabs=0, epsrel=1e-12, limit=200)[0]
        errs["sin2_integral"].append(_rel(lhs, bump("sin2_integral", sin2_integral(a, b, c))))
        lhs = quad(lambda t: t / np.sqrt(1 + d ** 2 * t ** 4), 0, X, epsabs=0, epsrel=1e-12, limit=200)[0]
        errs["asinh_integral"].append(_rel(lhs, bump("asinh_integral", asinh_integral(d, X))))
        head = 50 * max(a, b) / abs(c) + 20 * np.pi / abs(c * L)
        lhs = _fourier(f, c * L, "cos", head)
        errs["cos_integral"].append(_rel(lhs, bump("cos_integral", cos_integral(a, b, c, L))))
        g = lambda t: (a - b) * c * t / ((a ** 2 + c ** 2 * t ** 2) * (b ** 2 + c ** 2 * t ** 2))
        lhs = _fourier(g, c * L, "sin", head)
        errs["sin_integral"].append(_rel(lhs, bump("sin_integral", sin_integral(a, b, c, L))))
    rep.max_error = {k: float(max(v)) for k, v in errs.items()}
    return rep
