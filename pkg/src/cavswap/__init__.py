"""Rate-fidelity trade-off of cavity-mediated remote entanglement generation."""
from .errors import (CavswapError, ConfigError, EmissionZero, InfiniteCooperativity,
                     IntegrationError, NoHighEmissionPoint, NonConvergence,
                     PostSelectionImpossible, StepRejection)
from .lindblad import (DensityTrajectory, cumulative_emission, evolve_density,
                       photon_emission_probability, pure_photon_probability)
from .metrics import (BoundReport, SwapResult, analytic_bound, bell_fidelity, bound_from_moments,
                      correlation_J, entanglement_rate, evaluate_point, evaluate_swap)
from .model import (TABLE1, AsymmetricGaussian, SymmetricGaussian, SystemParams, Tabulated,
                    adiabaticity_report, cooperativity, effective_hamiltonian, eval_pulse,
                    pulse_area)
from .multipartite import (KernelTable, PostSelectedScheme, WaveformTable, averaged_fidelity,
                           build_network_scheme, overlap_matrix, preset_scheme, surviving_terms)
from .qrt import (CorrelationMoments, TwoTimeCorrelation, correlation_moments,
                  norm_squared_double_integral, two_time_correlation)
from .sweep import (ParetoScan, TradeoffCurve, loop_orientation, run_asymmetric_scan,
                    run_bound_check, run_tradeoff_sweep)

__version__ = "0.1.0"
