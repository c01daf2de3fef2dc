"""Solve the bundled FW+BW span, fit every channel and print how well the fit
reproduces the solver's power profile.

    python3 demos/profile_and_fit.py [scenario]
"""

import sys

import numpy as np

from ramanqot import (bundled_scenario, effective_length_errors, eval_rho, fit_all, normalized_profile,
                      pooled_residual_db, read_scenario, solve_span)
from ramanqot.units import hz_to_nm


def main(name="fwbw"):
    plan, _ = read_scenario(bundled_scenario(name))
    span = plan.spans[0]
    prof = solve_span(span)
    fit = fit_all(prof, span)
    print(f"{name}: {len(span.channels)} channels, {len(span.pumps)} pumps, "
          f"BVP iterations {prof.iterations}")

    leff = effective_length_errors(fit, prof)
    print(f"max effective-length error {leff.max():.2%}, pooled residual {pooled_residual_db(fit, prof):.3f} dB")

    z = prof.z
    print("\n  lambda [nm]   rho(L) ODE [dB]   rho(L) fit [dB]   min rho [dB] at z [km]")
    for i in np.linspace(0, len(fit) - 1, 7).astype(int):
        rho = normalized_profile(prof, i)
        end_fit = eval_rho(fit, i, z[-1])
        j = np.argmin(rho)
        print(f"  {hz_to_nm(fit.frequency[i]):10.1f}   {10 * np.log10(rho[-1]):15.2f}   "
              f"{10 * np.log10(end_fit):15.2f}   {10 * np.log10(rho[j]):8.2f} at {z[j] / 1e3:5.1f}")


if __name__ == "__main__":
    main(*sys.argv[1:])
