"""Radiation-pressure feedback cooling toolkit for a low-frequency
optomechanical inertial sensor.

Models the mechanical resonator, both optical readouts (Fabry-Perot
frequency readout and long-range heterodyne interferometer), and the
radiation-pressure feedback chain; computes cooling gains and effective
temperatures; and runs single-step and cascaded cooling both analytically
and by seeded Langevin simulation.
"""

from .cascade import (CascadeConfig, CascadeSchedule, CascadeStage,
                      SingleStepComparison, compare_single_step,
                      handover_check, plan_cascade, variance_evolution)
from .constants import C_LIGHT, KB
from .cooling import (ClosedLoopVariance, CoolingResult, CoolingSetup,
                      OptimalGain, closed_loop_psd, closed_loop_variance,
                      derivative_feedback, effective_susceptibility,
                      effective_temperature, effective_temperature_floor,
                      noise_temperature, optimal_gain)
from .errors import (ConfigError, DivergenceError, DomainError, FitError,
                     InfeasibleError, NumericalError, PowerLimitError,
                     RangeError)
from .feedback import Eoam, FeedbackChain, actuator_gain, max_dac_gain
from .psd import estimate_psd
from .readout import (FpiReadout, HliReadout, Phasemeter, phase_from_csv,
                      phasemeter_extract)
from .resonator import (MechanicalResonator, RingdownFit, extract_envelope,
                        fit_q_from_ringdown)
from .simulate import (MonteCarloResult, SimConfig, SimTrace,
                       monte_carlo_variance, preset_resonator, simulate,
                       steady_state_variance, stream_rng)
from .spectrum import (SpectrumRecord, read_noise_csv, read_spectrum_csv,
                       write_spectrum_csv)

__version__ = "0.1.0"

__all__ = [
    "C_LIGHT", "KB",
    "CascadeConfig", "CascadeSchedule", "CascadeStage",
    "ClosedLoopVariance", "ConfigError", "CoolingResult", "CoolingSetup",
    "DivergenceError", "DomainError", "Eoam", "FeedbackChain", "FitError",
    "FpiReadout", "HliReadout", "InfeasibleError", "MechanicalResonator",
    "MonteCarloResult", "NumericalError", "OptimalGain", "Phasemeter",
    "PowerLimitError", "RangeError", "RingdownFit", "SimConfig", "SimTrace",
    "SingleStepComparison", "SpectrumRecord",
    "actuator_gain", "closed_loop_psd", "closed_loop_variance",
    "compare_single_step", "derivative_feedback", "effective_susceptibility",
    "effective_temperature", "effective_temperature_floor", "estimate_psd",
    "extract_envelope", "fit_q_from_ringdown", "handover_check",
    "max_dac_gain", "monte_carlo_variance", "noise_temperature",
    "optimal_gain", "phase_from_csv", "phasemeter_extract", "plan_cascade",
    "preset_resonator",
    "read_noise_csv", "read_spectrum_csv", "simulate",
    "steady_state_variance", "stream_rng", "variance_evolution",
    "write_spectrum_csv",
]
