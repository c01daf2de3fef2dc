"""Raman-amplified ultra-wideband links: ISRS/Raman power profiles, their
semi-analytical fit, and closed-form vs. numerical GN-model NLI estimates."""

__version__ = "0.1.0"

from .closed import (ClosedFormTerms, DegenerateError, NliSpectrum, compute_terms, eta_spm, eta_total,
                     eta_xpm_pair, eta_xpm_pairs, link_function_closed, link_function_exact, nli_to_csv)
from .fitting import (FitError, FitOptions, ProfileFit, eval_rho, fit_all, fit_channel, fit_to_csv,
                      effective_length_errors, pooled_residual_db)
from .identities import IdentityReport, verify_identities
from .integral import (FittedRho, FunctionRho, IntegralError, OdeRho, QuadratureSettings, eta_spm_numeric,
                       eta_total_numeric, eta_xpm_numeric, link_function_numeric, link_table)
from .model import (AttenuationCurve, ChannelPlan, FiberSpec, InvariantError, LinkPlan, PumpSet,
                    RamanGainCurve, Span)
from .pumps import PumpDesignProblem, PumpDesignReport, optimize_pumps, pump_comb, received_fraction
from .raman import (BvpConvergenceError, PowerProfile, RamanSolverError, SolverSettings, normalized_profile,
                    solve_bvp, solve_forward, solve_span)
from .scenario import ScenarioError, bundled_scenario, dump_scenario, load_scenario, read_scenario
