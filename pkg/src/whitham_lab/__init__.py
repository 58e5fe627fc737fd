"""Pseudo-spectral workbench for a family of dispersive shallow-water
systems with Fourier-multiplier dispersion.

The layers, bottom up: spectral (grids and transforms), symbols (the
multiplier catalog and admissibility checks), operators (the quasilinear
system, its symmetrizer, and the weighted operator algebra), diagnostics
(norm reports, coercivity and energy-identity checks), stepping (RK4,
the exact linear propagator, Picard iteration), io (configs, snapshots,
CSV, figures), studies (parameter sweeps), cli (the command line).
"""

__version__ = "0.1.0"

from .spectral import (ScalarField, SpectralGrid, VectorField,  # noqa: F401
                       apply_symbol, inner_product, make_grid,
                       sobolev_norm, spectral_derivative)
from .symbols import (AdmissibilityReport, MultiplierPair,  # noqa: F401
                      SymbolSpec, preset, symbol_eval, validate_admissible)
from .operators import (ModelParams, State, energy_norm,  # noqa: F401
                        make_state, rhs, zero_state)
from .diagnostics import (EnergyReport, coercivity_check,  # noqa: F401
                          energy_report, estimate_ratio_suite)
from .stepping import (StepperConfig, Trajectory,  # noqa: F401
                       linear_propagator, linearized_solve, picard_solve,
                       run)
from .io import (RunConfig, load_config, read_snapshot,  # noqa: F401
                 write_config, write_snapshot)
from .studies import (StudySpec, model_compare, run_study)  # noqa: F401
