"""Acceptance criteria 1-9.

Each test records one PASS/FAIL line, printed in the "acceptance criteria"
section of the pytest summary, before asserting.
"""
import math
import time

import numpy as np
from axialize import presets
from axialize.config import load_config_text
from axialize.dynamics import ForceConfig, epicycle_state, extract_modes, integrate, max_step
from axialize.estimators import fit_avoided_crossing
from axialize.exceptions import UnstableTrapError
from axialize.experiments import Outputs, run_avoided_crossing, scan_grid
from axialize.modes import (AxializationDrive, CoolingCoefficients, Regime, avoided_crossing_curve,
                            cooling_strength, dressed_modes, regime_classify, unaxialized_rates)
from axialize.photons import (ScanSettings, correlation_histogram, fit_correlation,
                              generate_photons, phase_scan)
from axialize.trap import IonSpecies, ModeSet, TrapConfig, mode_set, true_cyclotron_frequency

from conftest import record_acceptance

TWO_PI = 2 * math.pi
AMU = 1.66053906660e-27


def test_1_frequency_reproduction():
    t0 = time.perf_counter()
    trap = presets.reference_trap()
    m = mode_set(trap)
    fc = true_cyclotron_frequency(trap) / TWO_PI / 1e3
    fcp = m.omega_cp / TWO_PI / 1e3
    dt = time.perf_counter() - t0
    ok = abs(fc / 376 - 1) < 0.01 and abs(fcp / 348 - 1) < 0.01 and dt < 1
    record_acceptance(1, ok, f"f_c = {fc:.3f} kHz (376 +/- 1%), f_c' = {fcp:.3f} kHz "
                             f"(348 +/- 1%), {dt:.3f} s")
    assert ok


def test_2_identity_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst, n = 0.0, 0
    while n < 1000:
        ion = IonSpecies(charge=int(rng.integers(1, 4)), mass=rng.uniform(1, 250) * AMU)
        cfg = TrapConfig(U0=rng.uniform(0.1, 100), B=rng.uniform(0.1, 10),
                         R_squared=10 ** rng.uniform(-6, -2), r0=5e-3, ion=ion)
        try:
            m = mode_set(cfg)
        except UnstableTrapError:
            continue
        n += 1
        worst = max(worst, abs((m.omega_m + m.omega_cp) / m.omega_c - 1),
                    abs(m.omega_m * m.omega_cp / (0.5 * m.omega_z ** 2) - 1))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 1
    record_acceptance(2, ok, f"{n} stable configs, worst relative identity error {worst:.1e} "
                             f"(<= 1e-12), {dt:.3f} s")
    assert ok


def test_3_decoupled_reduction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        fc_ = TWO_PI * rng.uniform(1e5, 2e6)
        m = ModeSet.from_frequencies(fc_, fc_ * rng.uniform(0.01, 0.3))
        cool = CoolingCoefficients(alpha=10 ** rng.uniform(3, 10), beta=10 ** rng.uniform(0, 3))
        delta = rng.choice([-1, 1]) * 10 ** rng.uniform(0, 4.5)
        t = dressed_modes(cool, AxializationDrive.at_detuning(0.0, delta, m), m)
        want = unaxialized_rates(cool, m)
        scale = max(abs(w) for w in want)
        for a, b in zip(sorted((t.gamma0_plus, t.gamma0_minus)), sorted(want)):
            worst = max(worst, abs(a - b) / scale)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 1
    record_acceptance(3, ok, f"1000 random (alpha, beta, modes), worst relative error "
                             f"{worst:.1e} (<= 1e-12), {dt:.3f} s")
    assert ok


def test_4_numeric_analytic_equivalence(ref_modes):
    t0 = time.perf_counter()
    m = ref_modes
    h = max_step(m)
    worst_f, worst_g = 0.0, 0.0
    n = 0
    for alpha in (0.6e8, 1.2e8, 1.8e8):
        for beta in (100.0, 200.0, 300.0):
            cool = CoolingCoefficients(alpha, beta)
            assert cool.is_valid(m)
            for coupling_khz in (1.0, 2.0, 3.0):
                for detuning_khz in (-0.5, 0.0, 0.5):
                    d = AxializationDrive.from_coupling(TWO_PI * 1e3 * coupling_khz, m,
                                                        delta=TWO_PI * 1e3 * detuning_khz)
                    table = dressed_modes(cool, d, m)
                    traj = integrate(epicycle_state(m, 1e-5, 1e-5), ForceConfig(m, cool, d),
                                     5e-3, h, substeps=4)
                    got = sorted(extract_modes(traj, 4), key=lambda e: e.frequency)
                    want = sorted(zip(table.lab_frequencies, table.lab_damping))
                    for e, (f, g) in zip(got, want):
                        worst_f = max(worst_f, abs(e.frequency / f - 1))
                        worst_g = max(worst_g, abs(e.damping / g - 1))
                    n += 1
    dt = time.perf_counter() - t0
    ok = worst_f < 5e-3 and worst_g < 0.02 and dt < 60
    record_acceptance(4, ok, f"{n} grid points: worst frequency error {100 * worst_f:.3f}% "
                             f"(< 0.5%), worst damping error {100 * worst_g:.3f}% (< 2%), {dt:.1f} s")
    assert ok


def crossing_setup():
    m = presets.crossing_modes()
    cool = presets.balanced_cooling(m, 200.0)
    coupling = TWO_PI * presets.CROSSING_KHZ["coupling"] * 1e3
    return m, cool, AxializationDrive.from_coupling(coupling, m), coupling


def test_5a_avoided_crossing_analytic():
    t0 = time.perf_counter()
    m, cool, d, coupling = crossing_setup()
    offsets = TWO_PI * np.linspace(-30e3, 30e3, 601)
    curve = avoided_crossing_curve(cool, d, m, m.omega_c + offsets)
    min_sep = curve.separation().min() / TWO_PI / 1e3
    x = np.concatenate([curve.omega_a, curve.omega_a])
    f = np.concatenate([curve.magnetron[:, 0], curve.magnetron[:, 1]])
    fit = fit_avoided_crossing(x, f)
    errs = [abs(fit.omega_c / m.omega_c - 1), abs(fit.omega_m / m.omega_m - 1),
            abs(fit.coupling / coupling - 1)]
    dt = time.perf_counter() - t0
    ok = abs(min_sep / 5.6 - 1) <= 1e-3 and max(errs) <= 1e-8 and dt < 1
    record_acceptance("5a", ok, f"analytic: min separation {min_sep:.6f} kHz (5.6 +/- 0.1%), "
                                f"fit (f_c, f_m, eps/w1) worst relative error {max(errs):.1e} "
                                f"(<= 1e-8), {dt:.3f} s")
    assert ok


def test_5b_avoided_crossing_stochastic(tmp_path):
    t0 = time.perf_counter()
    text = """
experiment = "avoided-crossing"
seed = 500
[trap]
cyclotron_frequency_kHz = 379.5
magnetron_frequency_kHz = 23.9
[cooling]
beta_per_s = 200.0
balanced = true
[drive]
coupling_kHz = 5.6
[statistics]
photons_per_point = 100000
"""
    cfg = load_config_text(text, "acceptance-5.toml")
    res = run_avoided_crossing(cfg, Outputs(str(tmp_path)))
    got = res.report["fit"]["coupling_kHz"]
    n_fail = len(res.report["failures"])
    dt = time.perf_counter() - t0
    ok = abs(got / 5.6 - 1) < 0.05 and dt < 600
    record_acceptance("5b", ok, f"stochastic (1e5 photons/point, 9 drive frequencies x 2 branches): "
                                f"eps/w1 = {got:.3f} kHz (5.6 +/- 5%), {n_fail} failed scan(s), {dt:.1f} s")
    assert ok


def scan_case(m, cool, drive, branch, seed):
    fc = ForceConfig(m, cool, drive)
    if drive is None:
        f0, g0 = m.omega_m, unaxialized_rates(cool, m)[1]
    else:
        lo, hi = dressed_modes(cool, drive, m).magnetron_branches
        f0, g0 = hi if branch == "upper" else lo
    grid = scan_grid(f0, g0, 12.0, 31)
    scan = phase_scan(fc, presets.detection_beam(), grid, seed=seed, settings=ScanSettings())
    return scan, g0


def test_6_phase_step(ref_modes):
    t0 = time.perf_counter()
    m = ref_modes
    cool = presets.cooling_for_rates(m, 200.0, 3.0)
    coupling = presets.simion_coupling(200.0)
    cases = [
        ("unaxialized magnetron", None, "upper"),
        ("axialized, Delta = 0, upper branch", AxializationDrive.from_coupling(coupling, m), "upper"),
        ("axialized, f_a - f_c = 4 kHz, lower branch",
         AxializationDrive.from_coupling(coupling, m, delta=TWO_PI * 2e3), "lower"),
    ]
    lines, ok = [], True
    for k, (name, d, branch) in enumerate(cases):
        scan, g0 = scan_case(m, cool, d, branch, seed=600 + 1000 * k)
        h_err = abs(scan.height / math.pi - 1)
        w_err = abs(scan.width / g0 - 1)
        good = h_err < 0.05 and w_err < 0.15
        ok &= good
        lines.append(f"{name}: step {scan.height / math.pi:.3f} pi, width {scan.width:.2f} "
                     f"vs {g0:.2f} s^-1")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    record_acceptance(6, ok, "; ".join(lines) + f" (pi +/- 5%, width +/- 15%), {dt:.1f} s")
    assert ok


def test_7_order_of_magnitude(ref_modes):
    t0 = time.perf_counter()
    m = ref_modes
    cool = presets.cooling_for_rates(m, 200.0, 3.0)
    _, g_m = unaxialized_rates(cool, m)
    d = AxializationDrive.from_coupling(presets.simion_coupling(200.0), m)
    regime = regime_classify(cool, d, m)
    before, _ = scan_case(m, cool, None, "upper", seed=700)
    after, _ = scan_case(m, cool, d, "upper", seed=1700)
    ratio = after.width / before.width
    dt = time.perf_counter() - t0
    ok = 2 <= g_m <= 5 and regime is Regime.STRONG and ratio >= 10 and dt < 300
    record_acceptance(7, ok, f"unaxialized {before.width:.2f} s^-1 (model {g_m:.1f}), axialized "
                             f"({regime.value}, Delta = 0) {after.width:.1f} s^-1, ratio "
                             f"{ratio:.1f} (>= 10), {dt:.1f} s")
    assert ok


def test_8_strong_regime_insensitivity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst, n = 0.0, 0
    m = presets.crossing_modes()
    for _ in range(200):
        beta = rng.uniform(10, 500)
        cool = CoolingCoefficients(0.5 * beta * m.omega_c + rng.uniform(-20, 20) * m.omega_1, beta)
        M = cooling_strength(cool, m)
        coupling = abs(M) * rng.uniform(10, 100)
        for delta in np.linspace(-coupling / 4, coupling / 4, 41):
            t = dressed_modes(cool, AxializationDrive.from_coupling(coupling, m, delta=delta), m)
            dev = max(abs(t.gamma0_plus - beta / 2), abs(t.gamma0_minus - beta / 2))
            worst = max(worst, dev / (abs(M) / 2))
            n += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1 + 1e-12 and dt < 1
    record_acceptance(8, ok, f"{n} points with (eps/w1)^2 >= 100 M^2: max |gamma0 - beta/2| = "
                             f"{worst:.3f} |M|/2 (<= 1), {dt:.3f} s")
    assert ok


def test_9_pipeline_consistency():
    t0 = time.perf_counter()
    beam = presets.detection_beam()
    ev = generate_photons(None, beam, seed=9, t_start=0.0, n_photons=100_000)
    rate = ev.mean_rate
    fit = fit_correlation(correlation_histogram(ev, 0.02 / rate, 8 / rate), None)
    again = generate_photons(None, beam, seed=9, t_start=0.0, n_photons=100_000)
    same = again.times.tobytes() == ev.times.tobytes()
    err = abs(fit.a / rate - 1)
    dt = time.perf_counter() - t0
    ok = err < 0.05 and same and dt < 30
    record_acceptance(9, ok, f"fitted a = {fit.a:.1f} s^-1 vs mean rate {rate:.1f} s^-1 "
                             f"({100 * err:.2f}% < 5%), identical seeds bit-identical: {same}, {dt:.2f} s")
    assert ok
