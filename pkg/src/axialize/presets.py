"""Reference parameter sets for the Ca+ Penning trap experiment.

The measured values are kept here as plain numbers for comparison reports;
none of them is fed back into the ideal-trap model.
"""
from .beam import LaserBeam
from .constants import TWO_PI, from_khz
from .modes import CoolingCoefficients
from .trap import CALCIUM_40, ModeSet, TrapConfig, calibrate_R_squared

U0 = 4.0  # V
B = 0.98  # T
AXIAL_KHZ = 141.0
# ring radius is not an experimental input; only used for V0 -> epsilon
R0 = 5e-3  # m

# measured reference frequencies, kHz
REFERENCE_KHZ = {
    "axial": 141.0,
    "true_cyclotron": 376.0,
    "modified_cyclotron": 348.0,
    "magnetron_measured": 23.9,
}

# avoided-crossing fit quoted for the experiment, kHz
CROSSING_KHZ = {"true_cyclotron": 379.5, "magnetron": 23.9, "coupling": 5.6}

# field-simulation estimate of the coupling at 200 mV drive: (8.2 +/- 0.8) kHz
SIMION_COUPLING_KHZ = 8.2
SIMION_COUPLING_ERR_KHZ = 0.8
SIMION_DRIVE_MV = 200.0

CA_LINEWIDTH = TWO_PI * 23e6  # rad/s


def reference_trap(U0=U0, B=B, axial_khz=AXIAL_KHZ, r0=R0, ion=CALCIUM_40):
    """TrapConfig with the geometry factor calibrated to the measured axial frequency."""
    R2 = calibrate_R_squared(from_khz(axial_khz), U0, ion)
    return TrapConfig(U0=U0, B=B, R_squared=R2, r0=r0, ion=ion,
                      omega_m_measured=from_khz(REFERENCE_KHZ["magnetron_measured"]))


def crossing_modes():
    """ModeSet built from the fitted crossing frequencies."""
    return ModeSet.from_frequencies(from_khz(CROSSING_KHZ["true_cyclotron"]),
                                    from_khz(CROSSING_KHZ["magnetron"]))


def simion_coupling(V0_mV):
    """epsilon/omega_1 (rad/s) from the linear field-simulation calibration."""
    return from_khz(SIMION_COUPLING_KHZ) * V0_mV / SIMION_DRIVE_MV


def detection_beam(saturation_rate=3e4, offset_y=50e-6, waist=100e-6, detuning_linewidths=-0.5):
    """Probe-sensitive detection beam: half a linewidth red, offset by half a waist."""
    return LaserBeam(detuning=detuning_linewidths * CA_LINEWIDTH, linewidth=CA_LINEWIDTH,
                     waist=waist, offset_y=offset_y, saturation_rate=saturation_rate)


def cooling_for_rates(modes, beta, magnetron_rate):
    """(alpha, beta) giving the requested unaxialized magnetron damping rate."""
    return CoolingCoefficients(alpha=beta * modes.omega_m + 2.0 * modes.omega_1 * magnetron_rate,
                               beta=beta)


def balanced_cooling(modes, beta):
    """alpha = beta omega_c / 2, which makes M vanish."""
    return CoolingCoefficients(alpha=0.5 * beta * modes.omega_c, beta=beta)
