"""Cooling/detection beam: Lorentzian lineshape times Gaussian profile.

The beam propagates along +x. An ion at transverse position ``y`` moving with
velocity ``x_dot`` scatters photons at

    S = S0 * L(detuning - k x_dot) * G(y - offset_y)

with L(d) = 1 / (1 + (2 d / linewidth)**2) and G(s) = exp(-2 s**2 / waist**2),
and feels the radiation-pressure force hbar k S along +x.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import check_finite, check_positive
from .constants import HBAR, TWO_PI
from .exceptions import InvalidConfigError

CA_COOLING_WAVELENGTH = 397e-9


@dataclass(frozen=True)
class LaserBeam:
    """Beam parameters.

    detuning and linewidth are angular (rad/s); waist and offset_y in m;
    saturation_rate is the peak scattering rate S0 (photons/s); wavevector in
    1/m.
    """

    detuning: float
    linewidth: float
    waist: float
    offset_y: float
    saturation_rate: float
    wavevector: float = TWO_PI / CA_COOLING_WAVELENGTH

    def __post_init__(self):
        check_finite("detuning", self.detuning)
        check_finite("offset_y", self.offset_y)
        check_positive("saturation_rate", self.saturation_rate, allow_zero=True)
        check_finite("wavevector", self.wavevector)
        # zero waist/linewidth is a degenerate beam, reported by the users of
        # the profile rather than here
        if self.waist < 0 or self.linewidth < 0:
            raise InvalidConfigError("waist and linewidth must be non-negative")

    def lorentzian(self, detuning):
        return 1.0 / (1.0 + (2.0 * detuning / self.linewidth) ** 2)

    def gaussian(self, s):
        return np.exp(-2.0 * s ** 2 / self.waist ** 2)

    def rate(self, y, x_dot):
        """Scattering rate (photons/s) at transverse position y and velocity x_dot."""
        return (self.saturation_rate
                * self.lorentzian(self.detuning - self.wavevector * x_dot)
                * self.gaussian(y - self.offset_y))

    def force(self, y, x_dot):
        """Radiation-pressure force along +x, N."""
        return HBAR * self.wavevector * self.rate(y, x_dot)

    def log_rate_gradient(self, y=0.0, x_dot=0.0):
        """(d ln S / dy, d ln S / d x_dot) at the given point."""
        s = y - self.offset_y
        d = self.detuning - self.wavevector * x_dot
        g_y = -4.0 * s / self.waist ** 2
        dlnl = -(8.0 * d / self.linewidth ** 2) * self.lorentzian(d)
        return g_y, -self.wavevector * dlnl

    def modulation_coefficient(self, omega):
        """Relative rate change per metre of co-rotating circular motion at omega.

        For u = A exp(i psi) the rate varies as S (1 + A * kappa * sin(psi)) to
        first order, with kappa = dlnS/dy - omega dlnS/dx_dot.
        """
        g_y, g_v = self.log_rate_gradient()
        return g_y - omega * g_v
