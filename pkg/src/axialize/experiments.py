"""The virtual experiments behind the command-line interface.

Each ``run_*`` function takes a resolved :class:`ExperimentConfig`, writes
its tables to ``out_dir`` and returns a :class:`RunResult` with a JSON-able
report. Frequencies in files are kHz; damping rates are s**-1.
"""
import csv
import hashlib
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from .constants import TWO_PI, from_khz, khz
from .config import voltage_to_epsilon
from .dynamics import (ForceConfig, Frame, Probe, epicycle_state, exact_modes, integrate,
                       max_step, steady_state_response)
from .estimators import fit_avoided_crossing
from .exceptions import BranchDegenerateError, FitError, InvalidConfigError, PhysicsError
from .modes import (AxializationDrive, Regime, cooling_window,
                    dressed_modes, regime_classify, unaxialized_rates)
from .photons import fit_phase_scan, phase_scan

IDENTITY_TOL = 1e-12


@dataclass
class RunResult:
    name: str
    report: dict
    text: str
    files: list = field(default_factory=list)


class Outputs:
    """Writes CSV (and optionally gnuplot .dat) tables into one directory."""

    def __init__(self, out_dir, dat=False):
        self.out_dir = out_dir
        self.dat = dat
        self.files = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def table(self, stem, header, rows):
        p = self.path(stem + ".csv")
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])
        self.files.append(p)
        if self.dat:
            p = self.path(stem + ".dat")
            with open(p, "w") as fh:
                fh.write("# " + " ".join(header) + "\n")
                for r in rows:
                    fh.write(" ".join(_cell(v) if v is not None else "nan" for v in r) + "\n")
            self.files.append(p)

    def json(self, name, obj):
        p = self.path(name)
        with open(p, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        self.files.append(p)

    def text(self, name, body):
        p = self.path(name)
        with open(p, "w") as fh:
            fh.write(body)
        self.files.append(p)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


# --- modes ------------------------------------------------------------------

def run_modes(cfg, out):
    m = cfg.modes
    lines = []
    rep = {"modes_kHz": {k: khz(getattr(m, k)) for k in
                         ("omega_z", "omega_c", "omega_1", "omega_m", "omega_cp")}}
    lines.append("Mode frequencies (kHz)")
    for k, v in rep["modes_kHz"].items():
        lines.append(f"  {k:9s} {v:12.4f}")
    s_res, p_res = m.identity_residuals()
    ident = {"sum_residual": s_res, "product_residual": p_res,
             "pass": abs(s_res) <= IDENTITY_TOL and abs(p_res) <= IDENTITY_TOL}
    rep["identities"] = ident
    lines.append(f"  omega_m + omega_cp = omega_c      rel. residual {s_res:+.2e}")
    lines.append(f"  omega_m * omega_cp = omega_z^2/2  rel. residual {p_res:+.2e}")
    lines.append(f"  identities: {'PASS' if ident['pass'] else 'FAIL'}")
    if cfg.trap is not None and cfg.trap.omega_m_measured is not None:
        meas = khz(cfg.trap.omega_m_measured)
        rep["magnetron_measured_kHz"] = meas
        lines.append(f"  measured magnetron {meas:.3f} kHz vs ideal {khz(m.omega_m):.3f} kHz "
                     f"(reported only, not used)")

    c = cfg.cool
    g_c, g_m = unaxialized_rates(c, m)
    rep["cooling"] = {"alpha_per_s2": c.alpha, "beta_per_s": c.beta, "validity": c.validity(m),
                      "gamma_cyclotron_per_s": g_c, "gamma_magnetron_per_s": g_m}
    lines.append("Cooling")
    lines.append(f"  alpha = {c.alpha:.6g} s^-2, beta = {c.beta:.6g} s^-1")
    lines.append(f"  unaxialized rates: cyclotron {g_c:.4g} s^-1, magnetron {g_m:.4g} s^-1")
    if c.beta != 0:
        rep["cooling"]["window"] = cooling_window(c, m)
        lines.append(f"  both motions cooled: {rep['cooling']['window']}")

    # decoupled reduction: epsilon = 0 must give the unaxialized rates
    delta = cfg.drive.delta if cfg.drive is not None and cfg.drive.delta != 0 else TWO_PI * 1e3
    t0 = dressed_modes(c, AxializationDrive.at_detuning(0.0, delta, m), m)
    got = sorted((t0.gamma0_plus, t0.gamma0_minus))
    want = sorted((g_c, g_m))
    err = max(abs(a - b) / max(abs(b), 1e-300) for a, b in zip(got, want))
    rep["reduction"] = {"delta_kHz": khz(delta), "max_rel_error": err, "pass": err <= IDENTITY_TOL}
    lines.append(f"  epsilon=0 reduction at Delta/2pi={khz(delta):.3f} kHz: rel. error {err:.1e} "
                 f"{'PASS' if err <= IDENTITY_TOL else 'FAIL'}")

    if cfg.drive is not None:
        d = cfg.drive
        regime = regime_classify(c, d, m)
        rep["drive"] = {"epsilon_per_s2": d.epsilon, "coupling_kHz": khz(d.coupling(m)),
                        "f_a_kHz": khz(d.omega_a), "delta_kHz": khz(d.delta), "regime": regime.value}
        lines.append("Axialization")
        lines.append(f"  coupling eps/omega_1 = {khz(d.coupling(m)):.4f} kHz, f_a = "
                     f"{khz(d.omega_a):.4f} kHz, regime {regime.value}")
        try:
            t = dressed_modes(c, d, m)
            rep["dressed"] = {"M": t.M, "N": t.N, "delta0_kHz": khz(t.delta0_plus),
                              "gamma0_plus": t.gamma0_plus, "gamma0_minus": t.gamma0_minus,
                              "lab_kHz": [khz(f) for f in t.lab_frequencies],
                              "lab_damping": list(t.lab_damping)}
            lines.append(f"  M = {t.M:.4g} s^-1, delta0/2pi = {khz(t.delta0_plus):.4f} kHz")
            for f, g in zip(t.lab_frequencies, t.lab_damping):
                lines.append(f"    {khz(f):12.4f} kHz   gamma {g:9.4f} s^-1")
        except BranchDegenerateError as exc:
            rep["dressed"] = {"error": str(exc)}
            lines.append(f"  dressed modes: {exc}")
    fr, dm = exact_modes(ForceConfig(m, c, cfg.drive))
    rep["exact_modes"] = {"lab_kHz": [khz(f) for f in fr], "damping": dm.tolist()}
    out.json("modes.json", rep)
    text = "\n".join(lines) + "\n"
    out.text("modes_report.txt", text)
    return RunResult("modes", rep, text)


# --- phase scans --------------------------------------------------------------

def target_mode(cool, drive, modes, branch="upper"):
    """(frequency, damping) of the magnetron-side mode a scan should cover."""
    if drive is None:
        return modes.omega_m, unaxialized_rates(cool, modes)[1]
    try:
        lo, hi = dressed_modes(cool, drive, modes).magnetron_branches
    except BranchDegenerateError:
        # equal frequencies: scan the less damped exact mode
        fr, dm = exact_modes(ForceConfig(modes, cool, drive))
        side = fr < 0.5 * modes.omega_c
        k = np.flatnonzero(side)[np.argmin(dm[side])]
        return fr[k], dm[k]
    if branch == "upper":
        return hi
    if branch == "lower":
        return lo
    raise InvalidConfigError(f"phase_scan: branch must be 'upper' or 'lower', got {branch!r}")


def scan_grid(center, width, half_span, points):
    if not width > 0:
        raise PhysicsError(f"target mode damping {width} s^-1 is not positive; no phase step")
    return center + np.linspace(-half_span, half_span, points) * width


def analytic_scan(fc, grid, polarization="linear"):
    ph = [steady_state_response(fc.replace(probe=Probe(1.0, float(w), polarization))).phase
          for w in grid]
    return fit_phase_scan(grid, ph)


def _scan(cfg, fc, grid, seed, jobs):
    if cfg.analytic:
        return analytic_scan(fc, grid, cfg.settings.polarization)
    return phase_scan(fc, cfg.detection, grid, seed=seed, settings=cfg.settings, jobs=jobs)


def run_phase_scan(cfg, out, jobs=1):
    ps = cfg.sections["phase_scan"]
    m = cfg.modes
    center, width = target_mode(cfg.cool, cfg.drive, m, ps["branch"])
    if ps["center_kHz"] is not None:
        center = from_khz(ps["center_kHz"])
    if ps["width_guess_per_s"] is not None:
        width = ps["width_guess_per_s"]
    grid = scan_grid(center, width, ps["half_span_widths"], ps["points"])
    fc = ForceConfig(m, cfg.cool, cfg.drive)
    scan = _scan(cfg, fc, grid, cfg.seed, jobs)
    rows = [(khz(w), p, e) for w, p, e in zip(scan.omega, scan.phase, scan.phase_err)]
    out.table("phase_scan", ["f_excit_kHz", "phase_rad", "phase_err_rad"], rows)
    rep = {
        "resonance_kHz": khz(scan.resonance), "resonance_err_kHz": khz(scan.resonance_err),
        "width_per_s": scan.width, "width_err_per_s": scan.width_err,
        "step_height_over_pi": scan.height / np.pi, "model_resonance_kHz": khz(center),
        "model_damping_per_s": width, "n_points": int(scan.omega.size),
        "failures": scan.failures, "analytic": cfg.analytic, "seed": cfg.seed,
    }
    out.json("phase_scan_fit.json", rep)
    text = (f"phase scan: resonance {rep['resonance_kHz']:.5f} kHz (model "
            f"{rep['model_resonance_kHz']:.5f}), width {scan.width:.4g} s^-1 (model {width:.4g}), "
            f"step {rep['step_height_over_pi']:.3f} pi, {len(scan.failures)} failed point(s)\n")
    return RunResult("phase-scan", rep, text)


# --- amplitude sweep ---------------------------------------------------------

def run_amplitude_sweep(cfg, out, jobs=1):
    sw = cfg.sections["amplitude_sweep"]
    dsec = cfg.sections["drive"]
    m, cool = cfg.modes, cfg.cool
    V0s = [float(v) for v in sw["V0_mV"]]
    if not V0s:
        raise InvalidConfigError("amplitude_sweep: V0_mV grid is empty")
    delta = cfg.drive.delta if cfg.drive is not None else 0.5 * from_khz(dsec["detuning_kHz"])
    ps = cfg.sections["phase_scan"]
    rows, points = [], []
    for i, V0 in enumerate(V0s):
        eps = voltage_to_epsilon(V0, dsec["calibration"], m, cfg.trap)
        drive = None if eps == 0 else AxializationDrive.at_detuning(eps, delta, m)
        point = {"V0_mV": V0, "coupling_kHz": khz(eps / m.omega_1)}
        regime = (Regime.WEAK if drive is None else regime_classify(cool, drive, m)).value
        point["regime"] = regime
        try:
            center, model_rate = target_mode(cool, drive, m, sw["branch"])
            point["model_rate_per_s"] = model_rate
            if cfg.analytic:
                point["rate_per_s"] = model_rate
                point["rate_err_per_s"] = 0.0
            else:
                grid = scan_grid(center, model_rate, ps["half_span_widths"], ps["points"])
                scan = _scan(cfg, ForceConfig(m, cool, drive), grid, cfg.seed + 1000 * i, jobs)
                point["rate_per_s"] = scan.width
                point["rate_err_per_s"] = scan.width_err
            point["status"] = "ok"
        except (PhysicsError, FitError) as exc:
            point.update(rate_per_s=float("nan"), rate_err_per_s=float("nan"),
                         status=f"{type(exc).__name__}: {exc}")
            point.setdefault("model_rate_per_s", float("nan"))
        points.append(point)
        rows.append((V0, point["coupling_kHz"], point["rate_per_s"], point["rate_err_per_s"],
                     point["model_rate_per_s"], regime, point["status"]))
    out.table("amplitude_sweep", ["V0_mV", "coupling_kHz", "rate_per_s", "rate_err_per_s",
                                  "model_rate_per_s", "regime", "status"], rows)
    mono = _monotone_small_drive(points, 0.5 * cool.beta)
    rep = {"points": points, "monotone_small_drive": mono, "plateau_per_s": 0.5 * cool.beta,
           "analytic": cfg.analytic, "seed": cfg.seed}
    out.json("amplitude_sweep.json", rep)
    lines = ["V0 (mV)  coupling (kHz)  rate (s^-1)  model (s^-1)  status"]
    for p in points:
        lines.append(f"{p['V0_mV']:8.2f}  {p['coupling_kHz']:14.4f}  {p['rate_per_s']:11.4g}  "
                     f"{p['model_rate_per_s']:12.4g}  {p['status']}")
    lines.append(f"monotone increase over the small-drive range: {mono}")
    return RunResult("amplitude-sweep", rep, "\n".join(lines) + "\n")


def _monotone_small_drive(points, plateau):
    """Rates increase with V0 until the model rate first reaches 90% of the plateau."""
    ok = sorted((p for p in points if p["status"] == "ok"), key=lambda p: p["V0_mV"])
    seq = []
    for p in ok:
        seq.append(p["rate_per_s"])
        if p["model_rate_per_s"] >= 0.9 * plateau:
            break
    return bool(all(b > a for a, b in zip(seq, seq[1:])))


# --- avoided crossing ---------------------------------------------------------

def run_avoided_crossing(cfg, out, jobs=1):
    if cfg.drive is None:
        raise InvalidConfigError("avoided-crossing needs a [drive] amplitude")
    sec = cfg.sections["avoided_crossing"]
    m, cool, drive = cfg.modes, cfg.cool, cfg.drive
    grid = m.omega_c + from_khz(np.asarray(sec["drive_offsets_kHz"], dtype=float))
    if grid.size == 0:
        raise InvalidConfigError("avoided_crossing: drive_offsets_kHz is empty")
    ps = cfg.sections["phase_scan"]
    xs, fs, errs, labels, failures = [], [], [], [], []
    model_rows = []
    for i, wa in enumerate(grid):
        d = drive.with_frequency(float(wa))
        try:
            lo, hi = dressed_modes(cool, d, m).magnetron_branches
        except BranchDegenerateError as exc:
            failures.append({"f_a_kHz": khz(wa), "error": str(exc)})
            continue
        model_rows.append((khz(wa), khz(lo[0]), khz(hi[0])))
        for j, (f0, g0) in enumerate((lo, hi)):
            if cfg.analytic:
                xs.append(wa), fs.append(f0), errs.append(0.0), labels.append(j)
                continue
            try:
                g = scan_grid(f0, g0, ps["half_span_widths"], ps["points"])
                scan = _scan(cfg, ForceConfig(m, cool, d), g, cfg.seed + 1000 * (2 * i + j), jobs)
            except (PhysicsError, FitError) as exc:
                failures.append({"f_a_kHz": khz(wa), "branch": j, "error": str(exc)})
                continue
            xs.append(wa), fs.append(scan.resonance), errs.append(scan.resonance_err)
            labels.append(j)
    out.table("branches", ["f_a_kHz", "branch_kHz", "branch_err_kHz", "label"],
              [(khz(x), khz(f), khz(e), lab) for x, f, e, lab in zip(xs, fs, errs, labels)])
    out.table("model_branches", ["f_a_kHz", "lower_kHz", "upper_kHz"], model_rows)
    rep = {"injected": {"f_c_kHz": khz(m.omega_c), "f_m_kHz": khz(m.omega_m),
                        "coupling_kHz": khz(drive.coupling(m))},
           "failures": failures, "analytic": cfg.analytic, "seed": cfg.seed}
    if model_rows:
        rep["model_min_separation_kHz"] = min(h - l for _, l, h in model_rows)
    try:
        fit = fit_avoided_crossing(np.array(xs), np.array(fs), m, fit_M=sec["fit_M"])
    except FitError as exc:
        rep["fit_error"] = str(exc)
        out.json("crossing_fit.json", rep)
        raise
    rep["fit"] = {"f_c_kHz": khz(fit.omega_c), "f_m_kHz": khz(fit.omega_m),
                  "coupling_kHz": khz(fit.coupling), "M_per_s": fit.M,
                  "stderr_kHz": [khz(s) for s in fit.stderr[:3]]}
    out.json("crossing_fit.json", rep)
    f = rep["fit"]
    text = (f"avoided crossing fit: f_c = {f['f_c_kHz']:.6f} kHz, f_m = {f['f_m_kHz']:.6f} kHz, "
            f"eps/omega_1 = {f['coupling_kHz']:.6f} kHz ({len(xs)} points, "
            f"{len(failures)} failure(s))\n")
    return RunResult("avoided-crossing", rep, text)


# --- trajectory -------------------------------------------------------------

def run_trajectory(cfg, out, jobs=1):
    tr = cfg.sections["trajectory"]
    m = cfg.modes
    probe = None
    if tr["probe_kHz"] is not None:
        probe = Probe(tr["probe_amplitude_m_per_s2"], from_khz(tr["probe_kHz"]),
                      cfg.settings.polarization)
    try:
        frame = Frame(tr["frame"].upper())
    except ValueError:
        raise InvalidConfigError(f"trajectory: frame must be LAB or ROTATING, got {tr['frame']!r}")
    fc = ForceConfig(m, cfg.cool, cfg.drive, probe, frame)
    if tr["steps_per_period"] < 20:
        raise InvalidConfigError("trajectory: steps_per_period must be >= 20")
    h = max_step(m) * 20.0 / tr["steps_per_period"]
    every = tr["sample_every"]
    init = epicycle_state(m, tr["r_magnetron_um"] * 1e-6, tr["r_cyclotron_um"] * 1e-6)
    traj = integrate(init, fc, tr["duration_ms"] * 1e-3, h * every, substeps=every).to_lab()
    out.table("trajectory", ["t_s", "re_u_m", "im_u_m", "re_udot_m_per_s", "im_udot_m_per_s"],
              zip(traj.t, traj.u.real, traj.u.imag, traj.u_dot.real, traj.u_dot.imag))
    r = np.abs(traj.u)
    n = max(1, len(r) // 20)
    rep = {"n_samples": len(traj), "dt_s": traj.dt, "radius_start_m": float(r[:n].max()),
           "radius_end_m": float(r[-n:].max()), "frame": frame.value}
    out.json("trajectory_summary.json", rep)
    text = (f"trajectory: {len(traj)} samples, max radius {rep['radius_start_m']:.3e} m at start, "
            f"{rep['radius_end_m']:.3e} m at end\n")
    return RunResult("trajectory", rep, text)


RUNNERS = {
    "modes": lambda cfg, out, jobs: run_modes(cfg, out),
    "phase-scan": run_phase_scan,
    "amplitude-sweep": run_amplitude_sweep,
    "avoided-crossing": run_avoided_crossing,
    "trajectory": run_trajectory,
}


def run_experiment(cfg, out_dir, *, jobs=1, dat=False, argv=None, config_text=None):
    """Run the configured experiment and write the manifest next to its outputs."""
    out = Outputs(out_dir, dat=dat)
    t0 = time.perf_counter()
    result = RUNNERS[cfg.experiment](cfg, out, jobs)
    elapsed = time.perf_counter() - t0
    result.files = list(out.files)
    write_manifest(out, cfg, elapsed, argv, config_text)
    return result


def _version(dist):
    try:
        return metadata.version(dist)
    except metadata.PackageNotFoundError:
        return None


def write_manifest(out, cfg, elapsed, argv=None, config_text=None):
    outputs = {}
    for p in out.files:
        with open(p, "rb") as fh:
            outputs[os.path.basename(p)] = hashlib.sha256(fh.read()).hexdigest()
    manifest = {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "analytic": cfg.analytic,
        "config_source": cfg.source,
        "config_text": config_text,
        "resolved_config": cfg.snapshot(),
        "argv": list(argv) if argv is not None else None,
        "versions": {"python": sys.version.split()[0], "platform": platform.platform(),
                     "numpy": np.__version__, "numba": _version("numba"),
                     "scikit-learn": _version("scikit-learn"), "artifact": _version("artifact")},
        "timings_s": {"total": elapsed},
        "outputs_sha256": outputs,
    }
    p = out.path("manifest.json")
    with open(p, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return p
