"""Ideal Penning trap: static parameters and the unperturbed mode frequencies.

All frequencies are angular (rad/s). Conversion to kHz happens only where
results are written out.
"""
import math
from dataclasses import dataclass
from typing import Optional

from ._validation import check_positive
from .constants import ATOMIC_MASS, ELEMENTARY_CHARGE
from .exceptions import InvalidConfigError, UnstableTrapError


@dataclass(frozen=True)
class IonSpecies:
    """Charge in elementary-charge units and mass in kg."""

    charge: int
    mass: float

    def __post_init__(self):
        if int(self.charge) != self.charge or self.charge < 1:
            raise InvalidConfigError(f"ion charge must be an integer >= 1, got {self.charge!r}")
        check_positive("ion mass", self.mass)

    @classmethod
    def from_mass_number(cls, mass_u, charge=1):
        return cls(charge=charge, mass=mass_u * ATOMIC_MASS)

    @property
    def q(self):
        """Charge in coulombs."""
        return self.charge * ELEMENTARY_CHARGE


CALCIUM_40 = IonSpecies.from_mass_number(40.0)


@dataclass(frozen=True)
class TrapConfig:
    """Static trap parameters.

    ``R_squared`` is the geometry factor r0**2 + 2*z0**2 (m**2) and ``r0`` the
    ring inner radius (m). ``B`` is the field magnitude; its direction is
    fixed by the sign conventions of the equation of motion.

    ``omega_m_measured`` is carried only for comparison reports. It never
    enters the model.
    """

    U0: float
    B: float
    R_squared: float
    r0: float
    ion: IonSpecies = CALCIUM_40
    omega_m_measured: Optional[float] = None

    def __post_init__(self):
        check_positive("U0", self.U0)
        # B = 0 is representable (free-space limit) but has no stable mode set.
        check_positive("B", self.B, allow_zero=True)
        check_positive("R_squared", self.R_squared)
        check_positive("r0", self.r0)
        if not isinstance(self.ion, IonSpecies):
            raise InvalidConfigError("ion must be an IonSpecies")
        if self.omega_m_measured is not None:
            check_positive("omega_m_measured", self.omega_m_measured)


@dataclass(frozen=True)
class ModeSet:
    """The characteristic angular frequencies of the ideal trap."""

    omega_z: float
    omega_c: float
    omega_1: float
    omega_m: float
    omega_cp: float

    @classmethod
    def from_frequencies(cls, omega_c, omega_m):
        """Build the mode set from a true cyclotron and a magnetron frequency.

        Useful when a trap is specified by fitted frequencies rather than by
        voltages and geometry.
        """
        check_positive("omega_c", omega_c, error=UnstableTrapError)
        check_positive("omega_m", omega_m, error=UnstableTrapError)
        if 2.0 * omega_m >= omega_c:
            raise UnstableTrapError(
                f"omega_m must be below omega_c/2 (omega_m={omega_m}, omega_c={omega_c})")
        omega_cp = omega_c - omega_m
        omega_1 = 0.5 * (omega_cp - omega_m)
        omega_z = math.sqrt(2.0 * omega_m * omega_cp)
        return cls(omega_z=omega_z, omega_c=omega_c, omega_1=omega_1,
                   omega_m=omega_m, omega_cp=omega_cp)

    def identity_residuals(self):
        """Relative residuals of the two exact mode identities."""
        sum_res = (self.omega_m + self.omega_cp - self.omega_c) / self.omega_c
        prod_res = (self.omega_m * self.omega_cp - 0.5 * self.omega_z ** 2) / (0.5 * self.omega_z ** 2)
        return sum_res, prod_res


def axial_frequency(cfg):
    """omega_z = sqrt(4 e U0 / (m R**2))."""
    _require_config(cfg)
    return math.sqrt(4.0 * cfg.ion.q * cfg.U0 / (cfg.ion.mass * cfg.R_squared))


def true_cyclotron_frequency(cfg):
    """omega_c = e B / m."""
    _require_config(cfg)
    return cfg.ion.q * cfg.B / cfg.ion.mass


def mode_set(cfg):
    _require_config(cfg)
    omega_z = axial_frequency(cfg)
    omega_c = true_cyclotron_frequency(cfg)
    # Written as a difference so the boundary case is decided exactly.
    disc = 0.25 * omega_c ** 2 - 0.5 * omega_z ** 2
    if not disc > 0.0:
        raise UnstableTrapError(
            f"unstable trap: omega_c**2 = {omega_c ** 2:.6e} <= 2 omega_z**2 = {2 * omega_z ** 2:.6e}")
    omega_1 = math.sqrt(disc)
    omega_cp = 0.5 * omega_c + omega_1
    # omega_c/2 - omega_1 cancels badly for weak traps; use the product identity.
    omega_m = 0.5 * omega_z ** 2 / omega_cp
    return ModeSet(omega_z=omega_z, omega_c=omega_c, omega_1=omega_1,
                   omega_m=omega_m, omega_cp=omega_cp)


def calibrate_R_squared(target_omega_z, U0, ion=CALCIUM_40):
    """Geometry factor R**2 that gives ``target_omega_z`` at voltage ``U0``."""
    check_positive("target_omega_z", target_omega_z)
    check_positive("U0", U0)
    return 4.0 * ion.q * U0 / (ion.mass * target_omega_z ** 2)


def _require_config(cfg):
    if not isinstance(cfg, TrapConfig):
        raise InvalidConfigError(f"expected TrapConfig, got {type(cfg).__name__}")
