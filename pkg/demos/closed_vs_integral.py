"""Closed-form NLI against the numerical integral oracle on one scenario, and
how the gap behaves as spans accumulate.

    python3 demos/closed_vs_integral.py [scenario]

The integral oracle takes ~15 s per span configuration.
"""

import sys
import time
from dataclasses import replace

import numpy as np

from ramanqot import FittedRho, bundled_scenario, eta_total, eta_total_numeric, fit_all, read_scenario, solve_span
from ramanqot.closed import accumulate, coherence_factor
from ramanqot.units import hz_to_nm


def main(name="fw"):
    plan, _ = read_scenario(bundled_scenario(name))
    span = plan.spans[0]
    fit = fit_all(solve_span(span), span)

    t0 = time.perf_counter()
    closed = eta_total(plan, [fit])
    t1 = time.perf_counter()
    integral = eta_total_numeric(plan, [FittedRho(fit)])
    t2 = time.perf_counter()
    print(f"{name}: closed form {t1 - t0:.2f} s, integral oracle {t2 - t1:.1f} s")

    delta = closed.snr_db - integral.snr_db
    print(f"SNR_NLI closed - integral: max |d| {np.abs(delta).max():.2f} dB, mean {delta.mean():+.2f} dB")
    print("\n  lambda [nm]   closed [dB]   integral [dB]")
    for i in np.linspace(0, len(delta) - 1, 7).astype(int):
        print(f"  {hz_to_nm(closed.frequency[i]):10.1f}   {closed.snr_db[i]:11.2f}   {integral.snr_db[i]:13.2f}")

    # identical spans: reuse the one-span efficiencies, with coherent SPM build-up
    eps = float(np.mean(coherence_factor(span.fiber, span.channels.frequency, span.channels.bandwidth)))
    print(f"\nmulti-span, epsilon = {eps:.3f}")
    for n in (1, 3, 10, 30):
        p = replace(plan.with_spans(n), epsilon=eps)
        c = accumulate(p, [(closed.eta_spm, closed.eta_xpm)] * n, "closed")
        i = accumulate(p, [(integral.eta_spm, integral.eta_xpm)] * n, "integral")
        print(f"  {n:3d} spans: mean SNR_NLI {c.snr_db.mean():6.2f} dB, max |d| {np.abs(c.snr_db - i.snr_db).max():.2f} dB")


if __name__ == "__main__":
    main(*sys.argv[1:])
