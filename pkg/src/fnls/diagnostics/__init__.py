from .absorbing import (AbsorbingProbe, InitialFamily, ProbeCell, absorbing_radius,
                        linear_entry_time, pullback_absorption_probe)
from .ledger import (MassLedger, gauge_contribution, ito_mass_residual, ledger_convergence,
                     mass_ledger, noise_quadratic_term)
from .moments import (c1, c2, expected_mass_check, gap_decay_rate, linear_mean_mass,
                      moment_bound, moment_bound_check)
from .stats import EnsembleStats, ensemble_stats, fit_decay_rate, observed_orders
from .strichartz import strichartz_corpus, strichartz_norm, strichartz_ratio
