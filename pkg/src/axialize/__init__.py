"""Axialization of a laser-cooled ion in a Penning trap.

Closed-form mode model, RK4 dynamics, a simulated photon-correlation
measurement chain and the fits that connect them.
"""
from .beam import LaserBeam
from .dynamics import (ForceConfig, Frame, Probe, RadialState, Trajectory, epicycle_state,
                       equation_of_motion, exact_modes, extract_modes, integrate,
                       steady_state_phase, steady_state_response)
from .estimators import (ArctanPhaseFitter, AvoidedCrossingRegressor, CorrelationFitter,
                         DampedExponentialModes, fit_avoided_crossing)
from .exceptions import (AxializeError, BranchAmbiguousError, BranchDegenerateError, ConfigError,
                        DivergenceError, EmptyStreamError, FitError, FitFailureError,
                        InsufficientDataError, InvalidConfigError, NoSteadyStateError,
                        PhysicsError, RateUndersampledError, SingularJacobianError,
                        StepTooLargeError, UnstableTrapError)
from .fitting import FitProblem, FitResult, least_squares
from .modes import (AxializationDrive, CoolingCoefficients, DressedModeTable, Regime,
                    avoided_crossing_curve, beam_linearization, cooling_strength,
                    cooling_window, dressed_modes, regime_classify, unaxialized_rates)
from .photons import (CorrelationHistogram, EventStream, PhaseScan, correlation_histogram,
                      fit_correlation, generate_photons, phase_scan, scattering_rate)
from .trap import (CALCIUM_40, IonSpecies, ModeSet, TrapConfig, axial_frequency,
                   calibrate_R_squared, mode_set, true_cyclotron_frequency)

__all__ = ["ArctanPhaseFitter", "AvoidedCrossingRegressor", "AxializationDrive", "AxializeError",
           "BranchAmbiguousError", "BranchDegenerateError", "CALCIUM_40", "ConfigError",
           "CoolingCoefficients", "CorrelationFitter", "CorrelationHistogram",
           "DampedExponentialModes", "DivergenceError", "DressedModeTable", "EmptyStreamError",
           "EventStream", "FitError", "FitFailureError", "FitProblem", "FitResult", "ForceConfig",
           "Frame", "InsufficientDataError", "InvalidConfigError", "IonSpecies", "LaserBeam",
           "ModeSet", "NoSteadyStateError", "PhaseScan", "PhysicsError", "Probe", "RadialState",
           "RateUndersampledError", "Regime", "SingularJacobianError", "StepTooLargeError",
           "Trajectory", "TrapConfig", "UnstableTrapError", "avoided_crossing_curve",
           "axial_frequency", "beam_linearization", "calibrate_R_squared", "cooling_strength",
           "cooling_window", "correlation_histogram", "dressed_modes", "epicycle_state",
           "equation_of_motion", "exact_modes", "extract_modes", "fit_avoided_crossing",
           "fit_correlation", "generate_photons", "integrate", "least_squares", "mode_set",
           "phase_scan", "regime_classify", "scattering_rate", "steady_state_phase",
           "steady_state_response", "true_cyclotron_frequency", "unaxialized_rates"]

__version__ = "0.1.0"
