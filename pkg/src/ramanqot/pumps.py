"""Pump power design on a fixed wavelength comb.

Minimize the total pump power subject to every channel receiving at least a
given fraction of its launch power after one span.  The search is
derivative-free (penalized Nelder-Mead with restarts) since each objective
evaluation runs the Raman solver, possibly through the BVP.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .model import PumpSet, Span
from .raman import RamanSolverError, SolverSettings, solve_span


@dataclass(frozen=True)
class PumpDesignProblem:
    """Comb, constraint and optimizer controls.

    Attributes
    ----------
    comb : PumpSet
        Candidate pump frequencies and directions; powers are ignored
        (a PumpSet needs positive placeholders).
    floor : float
        Required min_i P_i(L) / P_i(0) over channels, in (0, 1].
    p_max : float
        Upper bound of each pump power [W].
    start : float
        Initial power of every pump [W].
    restarts : int
        Nelder-Mead runs; the first starts at ``start``, later ones from a
        random perturbation of the best point so far.
    max_evals : int
        Solver evaluations per run.
    penalty : float
        Weight [W per unit of floor shortfall] of the constraint penalty.
    prune : float
        Pumps below this power [W] are switched off at the end.
    seed : int
    """

    comb: PumpSet
    floor: float
    p_max: float = 1.0
    start: float = 0.05
    restarts: int = 3
    max_evals: int = 3000
    penalty: float = 100.0
    prune: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if len(self.comb) == 0:
            raise ValueError("candidate comb is empty")
        if not 0 < self.floor <= 1:
            raise ValueError(f"floor must lie in (0, 1], got {self.floor}")
        if not self.p_max > 0:
            raise ValueError("p_max must be > 0")
        if not 0 <= self.start <= self.p_max:
            raise ValueError("start must lie in [0, p_max]")
        if self.restarts < 1 or self.max_evals < 1:
            raise ValueError("restarts and max_evals must be >= 1")


@dataclass
class PumpDesignReport:
    """Outcome of :func:`optimize_pumps`; ``power`` covers the whole comb (0 = pruned)."""

    feasible: bool
    achieved_floor: float
    total_power: float
    violation: float
    evaluations: int
    power: np.ndarray
    run_totals: list = field(default_factory=list)


def pump_comb(channels, count, spacing=1e12, gap=2e12, direction="FW"):
    """Equally spaced comb above the channel band.

    The lowest-frequency pump sits ``gap`` above the highest channel
    frequency; the others follow every ``spacing`` upwards.
    """
    f = channels.frequency.max() + gap + spacing * np.arange(count)
    return PumpSet(f, (direction,) * count, np.full(count, 1e-3))


def received_fraction(span, settings=SolverSettings()):
    """P_i(L) / P_i(0) of every channel after one span."""
    prof = solve_span(span, settings)
    ch = prof.channel_powers
    return ch[:, -1] / ch[:, 0]


def _with_power(comb, power):
    """Comb with ``power`` applied; pumps at exactly zero are left out."""
    power = np.asarray(power, dtype=float)
    on = power > 0
    if not on.any():
        return PumpSet.empty()
    return PumpSet(comb.frequency[on], tuple(np.asarray(comb.direction, dtype=object)[on]), power[on])


def optimize_pumps(problem, span, settings=SolverSettings()):
    """Minimize total pump power under the received-power floor.

    Parameters
    ----------
    problem : PumpDesignProblem
    span : Span
        Base span; its pumps are replaced by the comb.

    Returns
    -------
    (PumpSet, PumpDesignReport)
        Surviving (unpruned) pumps of the best point found.  When no run
        meets the floor the least-violating point is returned with
        ``feasible=False``.
    """
    comb = problem.comb
    n = len(comb)
    p_max = problem.p_max
    evals = [0]

    def shortfall(power):
        trial = Span(span.fiber, span.channels, _with_power(comb, power))
        evals[0] += 1
        try:
            got = float(received_fraction(trial, settings).min())
        except RamanSolverError:
            return np.inf, 0.0
        return max(problem.floor - got, 0.0), got

    # bounds through P = p_max sin^2(x)
    to_power = lambda x: p_max * np.sin(x) ** 2
    to_x = lambda p: np.arcsin(np.sqrt(np.clip(p / p_max, 0.0, 1.0)))

    def cost(x):
        p = to_power(x)
        short, _ = shortfall(p)
        return p.sum() + problem.penalty * short

    rng = np.random.default_rng(problem.seed)
    best_x = to_x(np.full(n, problem.start))
    best_f = cost(best_x)
    totals = []
    for run in range(problem.restarts):
        if run == 0:
            x0 = best_x
        else:
            x0 = to_x(np.clip(to_power(best_x) * np.exp(rng.normal(0.0, 0.5, n)) + rng.uniform(0, 0.01, n) * p_max,
                              0.0, p_max))
        res = minimize(cost, x0, method="Nelder-Mead",
                       options={"maxfev": problem.max_evals, "xatol": 1e-4, "fatol": 1e-6, "adaptive": True})
        totals.append(float(to_power(res.x).sum()))
        if res.fun < best_f:
            best_f, best_x = res.fun, res.x

    power = to_power(best_x)
    short, got = shortfall(power)
    pruned = np.where(power < problem.prune, 0.0, power)
    if np.any(pruned != power):
        p_short, p_got = shortfall(pruned)
        # keep the pruned vector only if it does not lose feasibility
        if p_short <= short or p_short == 0:
            power, short, got = pruned, p_short, p_got
    report = PumpDesignReport(short == 0, got, float(power.sum()), float(short), evals[0], power, totals)
    return _with_power(comb, power), report
