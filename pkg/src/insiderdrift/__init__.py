"""Insider information drifts and the value of information in a Brownian-Poisson market."""

from .condlaw import RunMaxTable, RunMaxTables, build_runmax_table, cpois_runmax_cdf
from .errors import (InconsistentOutcome, InvalidConfiguration, InvalidInput, InvalidRegime, MissingTable,
                     UnsupportedConfiguration, WealthRuin)
from .infodrift import (DriftSeries, PoissonInterval, PoissonUpper, RectangleRunMax, RectangleTerminal,
                        clark_ocone_integrands, cond_prob_G, density_process, drift_mixed, drift_series,
                        gamma_pure)
from .market import (AdmissibilityConfig, MarketCoefficients, PiecewiseConstant, check_strategy_admissible,
                     validate_coefficients)
from .paths import GridSpec, PathBatch, SamplePath, cumulative_intensity, running_max_at, simulate_batch, simulate_path
from .strategy import (StrategySeries, WealthSeries, evolve_log_wealth, merton_strategy, mixed_informed,
                       mixed_uninformed, pure_jump_informed, pure_jump_uninformed)
from .valueinfo import (Estimate, MCConfig, ValueReport, delta_v_theoretical, mc_expected_log_wealth,
                        v_f_closed_pure_jump, value_report)

__version__ = "0.1.0"
