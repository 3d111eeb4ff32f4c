import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from axialize import presets
from axialize.exceptions import InvalidConfigError, UnstableTrapError
from axialize.trap import (CALCIUM_40, IonSpecies, ModeSet, TrapConfig, axial_frequency,
                           calibrate_R_squared, mode_set, true_cyclotron_frequency)

# hand-typed CODATA values, independent of the package constants table
E = 1.602176634e-19
AMU = 1.66053906660e-27


def test_ion_species_validation():
    with pytest.raises(InvalidConfigError):
        IonSpecies(charge=0, mass=1e-26)
    with pytest.raises(InvalidConfigError):
        IonSpecies(charge=1, mass=-1.0)
    assert CALCIUM_40.mass == pytest.approx(40 * AMU, rel=1e-15)


@pytest.mark.parametrize("field,value", [("U0", 0.0), ("U0", -1.0), ("R_squared", 0.0),
                                         ("r0", 0.0), ("B", -0.1), ("B", float("nan"))])
def test_trap_config_rejects_bad_fields(field, value):
    kw = dict(U0=4.0, B=0.98, R_squared=1e-4, r0=5e-3)
    kw[field] = value
    with pytest.raises(InvalidConfigError):
        TrapConfig(**kw)


def test_axial_frequency_reference_value():
    cfg = presets.reference_trap()
    assert axial_frequency(cfg) / (2 * math.pi) == pytest.approx(141e3, rel=1e-12)


def test_axial_frequency_direct_formula():
    cfg = TrapConfig(U0=4.0, B=0.98, R_squared=1.0e-4, r0=5e-3)
    want = math.sqrt(4 * E * 4.0 / (40 * AMU * 1.0e-4))
    assert axial_frequency(cfg) == pytest.approx(want, rel=1e-14)


def test_axial_frequency_voltage_scaling():
    a = TrapConfig(U0=1.0, B=0.98, R_squared=1e-4, r0=5e-3)
    b = TrapConfig(U0=4.0, B=0.98, R_squared=1e-4, r0=5e-3)
    assert axial_frequency(b) == pytest.approx(2 * axial_frequency(a), rel=1e-15)


def test_true_cyclotron_frequency():
    cfg = presets.reference_trap()
    assert true_cyclotron_frequency(cfg) / (2 * math.pi) == pytest.approx(376e3, rel=1e-3)
    unit = TrapConfig(U0=1.0, B=1.0, R_squared=1.0, r0=1.0, ion=IonSpecies(1, AMU))
    assert true_cyclotron_frequency(unit) == pytest.approx(E / AMU, rel=1e-15)


def test_zero_field_gives_zero_cyclotron():
    cfg = TrapConfig(U0=1.0, B=0.0, R_squared=1e-4, r0=5e-3)
    assert true_cyclotron_frequency(cfg) == 0.0
    with pytest.raises(UnstableTrapError):
        mode_set(cfg)


def test_reference_mode_set(ref_modes):
    m = ref_modes
    assert m.omega_cp / (2 * math.pi) == pytest.approx(348e3, rel=2e-3)
    # ideal-trap magnetron frequency from the identities
    wc, wz = m.omega_c, 2 * math.pi * 141e3
    want = wc / 2 - math.sqrt(wc ** 2 / 4 - wz ** 2 / 2)
    assert m.omega_m == pytest.approx(want, rel=1e-9)
    assert m.omega_m / (2 * math.pi) == pytest.approx(28.6e3, rel=2e-3)


def test_free_cyclotron_limit():
    cfg = TrapConfig(U0=1e-12, B=0.98, R_squared=1e-4, r0=5e-3)
    m = mode_set(cfg)
    assert m.omega_1 == pytest.approx(m.omega_c / 2, rel=1e-9)
    assert m.omega_cp == pytest.approx(m.omega_c, rel=1e-9)
    assert m.omega_m / m.omega_c < 1e-9


def test_calibrate_round_trip_and_scaling():
    R2 = 2.345e-5
    cfg = TrapConfig(U0=4.0, B=0.98, R_squared=R2, r0=5e-3)
    back = calibrate_R_squared(axial_frequency(cfg), 4.0, CALCIUM_40)
    assert back == pytest.approx(R2, rel=1e-12)
    w = 2 * math.pi * 141e3
    r1 = calibrate_R_squared(w, 4.0, CALCIUM_40)
    assert r1 == pytest.approx(4 * E * 4.0 / (40 * AMU * w ** 2), rel=1e-14)
    assert calibrate_R_squared(2 * w, 4.0, CALCIUM_40) == pytest.approx(r1 / 4, rel=1e-14)
    with pytest.raises(InvalidConfigError):
        calibrate_R_squared(-1.0, 4.0, CALCIUM_40)
    with pytest.raises(InvalidConfigError):
        calibrate_R_squared(w, 0.0, CALCIUM_40)


trap_strategy = st.builds(
    lambda f_z, B, mass: (f_z, B, mass),
    st.floats(1e3, 5e5), st.floats(0.1, 8.0), st.floats(1.0, 250.0))


@given(trap_strategy)
def test_identities_hold(params):
    f_z, B, mass = params
    ion = IonSpecies.from_mass_number(mass)
    R2 = calibrate_R_squared(2 * math.pi * f_z, 4.0, ion)
    cfg = TrapConfig(U0=4.0, B=B, R_squared=R2, r0=5e-3, ion=ion)
    try:
        m = mode_set(cfg)
    except UnstableTrapError:
        wc = E * B / ion.mass
        assert wc ** 2 <= 2 * (2 * math.pi * f_z) ** 2 * (1 + 1e-12)
        return
    s, p = m.identity_residuals()
    assert abs(s) <= 1e-12 and abs(p) <= 1e-12
    assert m.omega_1 ** 2 == pytest.approx(m.omega_c ** 2 / 4 - m.omega_z ** 2 / 2, rel=1e-9)
    assert 0 < m.omega_m < m.omega_cp < m.omega_c


@given(st.floats(0.6, 4.0), st.floats(1.01, 2.0))
def test_monotone_in_field(B, factor):
    R2 = calibrate_R_squared(2 * math.pi * 141e3, 4.0, CALCIUM_40)
    lo = mode_set(TrapConfig(U0=4.0, B=B, R_squared=R2, r0=5e-3))
    hi = mode_set(TrapConfig(U0=4.0, B=B * factor, R_squared=R2, r0=5e-3))
    assert hi.omega_cp > lo.omega_cp
    assert hi.omega_m < lo.omega_m


def test_stability_boundary():
    R2 = 1e-4
    cfg0 = TrapConfig(U0=4.0, B=1.0, R_squared=R2, r0=5e-3)
    wz = axial_frequency(cfg0)
    # B at which omega_c**2 == 2 omega_z**2 exactly
    B_crit = math.sqrt(2.0) * wz * CALCIUM_40.mass / CALCIUM_40.q
    with pytest.raises(UnstableTrapError):
        mode_set(TrapConfig(U0=4.0, B=B_crit * (1 - 1e-9), R_squared=R2, r0=5e-3))
    mode_set(TrapConfig(U0=4.0, B=B_crit * (1 + 1e-9), R_squared=R2, r0=5e-3))


def test_mode_set_from_frequencies():
    m = ModeSet.from_frequencies(2 * np.pi * 379.5e3, 2 * np.pi * 23.9e3)
    assert m.omega_cp == pytest.approx(2 * np.pi * (379.5e3 - 23.9e3), rel=1e-14)
    s, p = m.identity_residuals()
    assert abs(s) < 1e-15 and abs(p) < 1e-12
    with pytest.raises(UnstableTrapError):
        ModeSet.from_frequencies(1.0, 0.6)
