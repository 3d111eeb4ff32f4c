"""Physical constants shared by every module (CODATA 2018).

Stored as literals so results do not depend on the installed scipy version.
"""

#: Elementary charge, C (exact by SI definition).
ELEMENTARY_CHARGE = 1.602176634e-19
#: Atomic mass constant, kg.
ATOMIC_MASS = 1.66053906660e-27
#: Reduced Planck constant, J s.
HBAR = 1.054571817e-34

TWO_PI = 6.283185307179586


def khz(omega):
    """Angular frequency (rad/s) -> cyclic frequency in kHz."""
    return omega / TWO_PI / 1e3


def from_khz(f_khz):
    """Cyclic frequency in kHz -> angular frequency (rad/s)."""
    return f_khz * 1e3 * TWO_PI
