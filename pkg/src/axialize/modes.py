"""Closed-form laser cooling and axialization model.

Cooling enters through two linear coefficients (alpha, beta). With the
quadrupole drive the radial motions are dressed: in the frame rotating at
omega_a / 2 each mode oscillates at omega_1 + delta0 with damping gamma0, and
shows up in the laboratory at omega_cp + Delta + delta0 and
omega_m + Delta - delta0.
"""
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import check_finite, check_positive
from .beam import LaserBeam
from .exceptions import BranchDegenerateError, InvalidConfigError
from .trap import CALCIUM_40, IonSpecies


class Regime(str, enum.Enum):
    WEAK = "WEAK"
    INTERMEDIATE = "INTERMEDIATE"
    STRONG = "STRONG"


@dataclass(frozen=True)
class CoolingCoefficients:
    """F_alpha = -2 alpha m y (alpha in s**-2), F_beta = -2 beta m x_dot (beta in s**-1)."""

    alpha: float
    beta: float

    def __post_init__(self):
        check_finite("alpha", self.alpha)
        check_finite("beta", self.beta)

    def validity(self, modes, ratio=1e-2):
        """Flags for the small-perturbation assumptions alpha << omega_z**2, beta << omega_c."""
        return {
            "alpha_small": abs(self.alpha) < ratio * modes.omega_z ** 2,
            "beta_small": abs(self.beta) < ratio * modes.omega_c,
        }

    def is_valid(self, modes, ratio=1e-2):
        return all(self.validity(modes, ratio).values())


@dataclass(frozen=True)
class AxializationDrive:
    """Quadrupole drive of strength epsilon = e V0 / (2 m r0**2) (s**-2) at omega_a.

    ``delta`` is half the detuning from the true cyclotron frequency ``omega_c``
    stored alongside, so that omega_a = omega_c + 2 delta always holds.
    """

    epsilon: float
    omega_a: float
    delta: float
    omega_c: float
    V0: Optional[float] = None
    r0: Optional[float] = None
    ion: Optional[IonSpecies] = None

    def __post_init__(self):
        check_positive("epsilon", self.epsilon, allow_zero=True)
        check_finite("omega_a", self.omega_a)
        mismatch = abs(self.omega_a - (self.omega_c + 2.0 * self.delta))
        if mismatch > 1e-12 * max(abs(self.omega_a), abs(self.omega_c)):
            raise InvalidConfigError(
                f"omega_a={self.omega_a} inconsistent with omega_c + 2 delta="
                f"{self.omega_c + 2.0 * self.delta}")
        if self.V0 is not None:
            if self.r0 is None or self.ion is None:
                raise InvalidConfigError("V0 given without r0 and ion")
            expected = epsilon_from_voltage(self.V0, self.r0, self.ion)
            if abs(expected - self.epsilon) > 1e-12 * max(expected, abs(self.epsilon)):
                raise InvalidConfigError(
                    f"epsilon={self.epsilon} inconsistent with V0={self.V0} V, r0={self.r0} m")

    @classmethod
    def at_detuning(cls, epsilon, delta, modes):
        return cls(epsilon=epsilon, omega_a=modes.omega_c + 2.0 * delta, delta=delta,
                   omega_c=modes.omega_c)

    @classmethod
    def at_frequency(cls, epsilon, omega_a, modes):
        return cls(epsilon=epsilon, omega_a=omega_a,
                   delta=0.5 * (omega_a - modes.omega_c), omega_c=modes.omega_c)

    @classmethod
    def from_coupling(cls, epsilon_over_omega1, modes, *, delta=0.0):
        """Specify the drive by its coupling rate epsilon/omega_1 (rad/s)."""
        return cls.at_detuning(epsilon_over_omega1 * modes.omega_1, delta, modes)

    @classmethod
    def from_voltage(cls, V0, r0, ion, modes, *, delta=0.0):
        check_positive("V0", V0, allow_zero=True)
        check_positive("r0", r0)
        eps = epsilon_from_voltage(V0, r0, ion)
        return cls(epsilon=eps, omega_a=modes.omega_c + 2.0 * delta, delta=delta,
                   omega_c=modes.omega_c, V0=V0, r0=r0, ion=ion)

    def with_frequency(self, omega_a):
        return AxializationDrive(epsilon=self.epsilon, omega_a=omega_a,
                                 delta=0.5 * (omega_a - self.omega_c), omega_c=self.omega_c,
                                 V0=self.V0, r0=self.r0, ion=self.ion)

    def with_epsilon(self, epsilon):
        return AxializationDrive(epsilon=epsilon, omega_a=self.omega_a, delta=self.delta,
                                 omega_c=self.omega_c)

    def coupling(self, modes):
        """epsilon / omega_1, the minimum gap of the avoided crossing (rad/s)."""
        return self.epsilon / modes.omega_1


def epsilon_from_voltage(V0, r0, ion):
    return ion.q * V0 / (2.0 * ion.mass * r0 ** 2)


@dataclass(frozen=True)
class DressedModeTable:
    """Dressed frequency shifts and damping rates, paired by branch.

    ``lab_frequencies`` is ordered (cyclotron-side +, cyclotron-side -,
    magnetron-side +, magnetron-side -), where + / - label the sign of delta0;
    ``lab_damping`` carries the matching rates.
    """

    M: float
    N: float
    delta0_plus: float
    delta0_minus: float
    gamma0_plus: float
    gamma0_minus: float
    lab_frequencies: tuple = field(default=())
    lab_damping: tuple = field(default=())

    @property
    def magnetron_branches(self):
        """((freq, damping) lower, (freq, damping) upper) near omega_m."""
        lo = (self.lab_frequencies[2], self.lab_damping[2])
        hi = (self.lab_frequencies[3], self.lab_damping[3])
        return (lo, hi) if lo[0] <= hi[0] else (hi, lo)

    @property
    def cyclotron_branches(self):
        a = (self.lab_frequencies[0], self.lab_damping[0])
        b = (self.lab_frequencies[1], self.lab_damping[1])
        return (a, b) if a[0] <= b[0] else (b, a)


# --- cooling -------------------------------------------------------------

def beam_linearization(beam, modes, ion=CALCIUM_40, *, rel_step=1e-4):
    """Linearize the beam force about the trap centre at rest.

    alpha = -(1/2m) dF/dy and beta = -(1/2m) dF/dx_dot, with the derivatives
    taken by central differences. Warns when the result violates the
    small-perturbation assumptions for ``modes``.
    """
    if not isinstance(beam, LaserBeam):
        raise InvalidConfigError("beam must be a LaserBeam")
    if beam.waist <= 0 or beam.linewidth <= 0:
        raise InvalidConfigError("degenerate beam: waist and linewidth must be > 0")
    hy = rel_step * beam.waist
    hv = rel_step * beam.linewidth / beam.wavevector
    dF_dy = (beam.force(hy, 0.0) - beam.force(-hy, 0.0)) / (2.0 * hy)
    dF_dv = (beam.force(0.0, hv) - beam.force(0.0, -hv)) / (2.0 * hv)
    m = ion.mass
    cool = CoolingCoefficients(alpha=-dF_dy / (2.0 * m), beta=-dF_dv / (2.0 * m))
    if modes is not None and not cool.is_valid(modes):
        warnings.warn(f"cooling coefficients outside model validity: {cool.validity(modes)}")
    return cool


def unaxialized_rates(cool, modes):
    """(cyclotron, magnetron) damping rates without the drive; positive = damped."""
    w1 = modes.omega_1
    gamma_c = (cool.beta * modes.omega_cp - cool.alpha) / (2.0 * w1)
    gamma_m = (cool.alpha - cool.beta * modes.omega_m) / (2.0 * w1)
    return gamma_c, gamma_m


def cooling_window(cool, modes):
    """True when both radial motions are cooled: omega_m < alpha/beta < omega_cp."""
    if cool.beta == 0:
        raise InvalidConfigError("alpha/beta undefined for beta = 0")
    ratio = cool.alpha / cool.beta
    return modes.omega_m < ratio < modes.omega_cp


# --- axialization --------------------------------------------------------

def cooling_strength(cool, modes):
    """M = (2 alpha - beta omega_c) / (2 omega_1)."""
    return (2.0 * cool.alpha - cool.beta * modes.omega_c) / (2.0 * modes.omega_1)


def dressed_modes(cool, drive, modes):
    w1 = modes.omega_1
    if not w1 > 0:
        raise InvalidConfigError("omega_1 must be positive")
    D = drive.delta
    M = cooling_strength(cool, modes)
    N = D ** 2 - 0.25 * M ** 2 + drive.epsilon ** 2 / (4.0 * w1 ** 2)
    root = math.hypot(N, D * M)
    # N + sqrt(N**2 + D**2 M**2) cancels when N < 0
    s = N + root if N >= 0 else (D * M) ** 2 / (root - N) if root > 0 else 0.0
    d0 = math.sqrt(0.5 * s)
    if d0 == 0.0:
        raise BranchDegenerateError(
            f"delta0 = 0 (Delta={D}, M={M}, N={N}); damping formula singular")
    g_plus = 0.5 * cool.beta + D * M / (2.0 * d0)
    g_minus = 0.5 * cool.beta - D * M / (2.0 * d0)
    freqs = (modes.omega_cp + D + d0, modes.omega_cp + D - d0,
             modes.omega_m + D - d0, modes.omega_m + D + d0)
    return DressedModeTable(M=M, N=N, delta0_plus=d0, delta0_minus=-d0,
                            gamma0_plus=g_plus, gamma0_minus=g_minus,
                            lab_frequencies=freqs,
                            lab_damping=(g_plus, g_minus, g_plus, g_minus))


def regime_classify(cool, drive, modes, dominance=100.0):
    coupling_sq = (drive.epsilon / modes.omega_1) ** 2
    m_sq = cooling_strength(cool, modes) ** 2
    if coupling_sq > dominance * m_sq:
        return Regime.STRONG
    if coupling_sq < m_sq / dominance:
        return Regime.WEAK
    return Regime.INTERMEDIATE


@dataclass
class AvoidedCrossingCurve:
    """Branch-tracked dressed frequencies over a drive-frequency grid.

    ``magnetron`` and ``cyclotron`` have shape (n, 2); ``magnetron_damping``
    and ``cyclotron_damping`` carry the rates of the same branches.
    """

    omega_a: np.ndarray
    magnetron: np.ndarray
    cyclotron: np.ndarray
    magnetron_damping: np.ndarray
    cyclotron_damping: np.ndarray

    def separation(self):
        return np.abs(self.magnetron[:, 1] - self.magnetron[:, 0])


def avoided_crossing_curve(cool, drive, modes, omega_a_grid):
    """Dressed branches for every drive frequency in ``omega_a_grid``.

    The drive template supplies epsilon; its frequency is replaced per point.
    """
    grid = np.asarray(omega_a_grid, dtype=float)
    if grid.size == 0:
        raise InvalidConfigError("omega_a grid is empty")
    n = grid.size
    mag = np.empty((n, 2))
    cyc = np.empty((n, 2))
    mag_g = np.empty((n, 2))
    cyc_g = np.empty((n, 2))
    for i, wa in enumerate(grid):
        t = dressed_modes(cool, drive.with_frequency(wa), modes)
        # raw order: index 0 is the delta0+ branch, 1 the delta0- branch
        cyc[i] = t.lab_frequencies[0:2]
        mag[i] = t.lab_frequencies[2:4]
        cyc_g[i] = t.lab_damping[0:2]
        mag_g[i] = t.lab_damping[2:4]
    for f, g in ((mag, mag_g), (cyc, cyc_g)):
        _track_branches(grid, f, g)
    return AvoidedCrossingCurve(omega_a=grid, magnetron=mag, cyclotron=cyc,
                                magnetron_damping=mag_g, cyclotron_damping=cyc_g)


def _track_branches(x, f, g):
    """Reorder each row of the pair arrays in place so branches stay continuous.

    Each point is matched to a linear extrapolation of the previous two, which
    keeps genuinely crossing lines straight through the crossing.
    """
    order = np.argsort(x, kind="stable")
    for k in range(1, len(order)):
        i, j = order[k], order[k - 1]
        if k >= 2 and x[j] != x[order[k - 2]]:
            h = order[k - 2]
            slope = (f[j] - f[h]) / (x[j] - x[h])
            pred = f[j] + slope * (x[i] - x[j])
        else:
            pred = f[j]
        keep = abs(f[i, 0] - pred[0]) + abs(f[i, 1] - pred[1])
        swap = abs(f[i, 1] - pred[0]) + abs(f[i, 0] - pred[1])
        if swap < keep:
            f[i] = f[i, ::-1]
            g[i] = g[i, ::-1]
