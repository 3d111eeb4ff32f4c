"""Experiment configuration files.

A configuration is a TOML document. Every numeric key carries its unit as a
suffix (``_kHz``, ``_per_s``, ``_mV`` ...). Frequencies in the file are
ordinary frequencies in kHz; they are converted to angular frequencies on
load. Command-line overrides (``--set section.key=value``) are applied on top
of the file, and built-in defaults fill whatever neither supplies.

Example::

    experiment = "phase-scan"
    seed = 7

    [trap]
    U0_V = 4.0
    B_T = 0.98
    axial_frequency_kHz = 141.0

    [cooling]
    beta_per_s = 200.0
    magnetron_rate_per_s = 3.0

    [drive]
    coupling_kHz = 5.6
    detuning_kHz = 0.0

``drive.detuning_kHz`` is f_a - f_c, twice the half-detuning Delta used by
the model. ``drive.calibration`` maps ``V0_mV`` to epsilon either through the
ring radius (``geometry``) or through the field-simulation reference of
8.2 kHz coupling at 200 mV (``simion``).
"""
import copy
import re
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import presets
from .beam import LaserBeam
from .constants import TWO_PI, from_khz
from .exceptions import InvalidConfigError
from .modes import AxializationDrive, CoolingCoefficients, beam_linearization
from .photons import ScanSettings
from .trap import IonSpecies, ModeSet, TrapConfig, calibrate_R_squared, mode_set

EXPERIMENTS = ("modes", "amplitude-sweep", "phase-scan", "avoided-crossing", "trajectory")

NUM = (int, float)
LIST = list

# section -> key -> (accepted types, default)
SCHEMA = {
    "": {
        "experiment": (str, None),
        "seed": (int, 0),
        "out": (str, "results"),
        "analytic": (bool, False),
        "jobs": (int, 0),
    },
    "trap": {
        "U0_V": (NUM, presets.U0),
        "B_T": (NUM, presets.B),
        "mass_u": (NUM, 40.0),
        "charge": (int, 1),
        "r0_m": (NUM, presets.R0),
        "R_squared_m2": (NUM, None),
        "axial_frequency_kHz": (NUM, presets.AXIAL_KHZ),
        "cyclotron_frequency_kHz": (NUM, None),
        "magnetron_frequency_kHz": (NUM, None),
        "magnetron_measured_kHz": (NUM, None),
    },
    "cooling": {
        "alpha_per_s2": (NUM, None),
        "beta_per_s": (NUM, 200.0),
        "magnetron_rate_per_s": (NUM, None),
        "balanced": (bool, False),
    },
    # alpha/beta ~ (offset/waist**2)(Gamma/k)(1 + x**2)/x for detuning -x Gamma/2,
    # so these defaults put a one-linewidth red detuning inside the cooling
    # window; alpha > 0 needs the beam centre on the -y side
    "cooling.beam": {
        "detuning_MHz": (NUM, None),
        "linewidth_MHz": (NUM, 23.0),
        "waist_um": (NUM, 50.0),
        "offset_um": (NUM, -25.0),
        "saturation_rate_per_s": (NUM, 1e7),
        "wavelength_nm": (NUM, 397.0),
    },
    "drive": {
        "coupling_kHz": (NUM, None),
        "epsilon_per_s2": (NUM, None),
        "V0_mV": (NUM, None),
        "calibration": (str, "geometry"),
        "detuning_kHz": (NUM, 0.0),
        "frequency_kHz": (NUM, None),
    },
    "detection": {
        "detuning_linewidths": (NUM, -0.5),
        "linewidth_MHz": (NUM, 23.0),
        "waist_um": (NUM, 100.0),
        "offset_um": (NUM, 50.0),
        "saturation_rate_per_s": (NUM, 3e4),
        "wavelength_nm": (NUM, 397.0),
    },
    "statistics": {
        "photons_per_point": (int, 100_000),
        "bins_per_period": (int, 50),
        "decay_lengths": (NUM, 5.0),
        "target_depth": (NUM, 0.3),
        "polarization": (str, "linear"),
    },
    "phase_scan": {
        "branch": (str, "upper"),
        "points": (int, 31),
        "half_span_widths": (NUM, 12.0),
        "center_kHz": (NUM, None),
        "width_guess_per_s": (NUM, None),
    },
    "amplitude_sweep": {
        "V0_mV": (LIST, [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 25.0, 100.0, 200.0]),
        "branch": (str, "upper"),
    },
    "avoided_crossing": {
        "drive_offsets_kHz": (LIST, [-12.0, -8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0, 12.0]),
        "fit_M": (bool, False),
    },
    "trajectory": {
        "duration_ms": (NUM, 2.0),
        "steps_per_period": (int, 80),
        "sample_every": (int, 1),
        "r_magnetron_um": (NUM, 10.0),
        "r_cyclotron_um": (NUM, 10.0),
        "frame": (str, "LAB"),
        "probe_kHz": (NUM, None),
        "probe_amplitude_m_per_s2": (NUM, 0.0),
    },
}


def _decode(text, source):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidConfigError(f"{source}: {exc}") from None


def load_config_text(text, source="<config>", overrides=()):
    raw = _decode(text, source)
    for item in overrides:
        _apply_override(raw, item)
    try:
        return ExperimentConfig.from_dict(raw, source)
    except InvalidConfigError as exc:
        dotted = getattr(exc, "field", None)
        line = _line_of(text, dotted) if dotted else None
        if line is None:
            raise
        err = InvalidConfigError(f"{exc} (line {line})")
        err.field = dotted
        raise err from None


def _line_of(text, dotted):
    """1-based line defining ``dotted`` (section.key) in the TOML text, if found."""
    *sec, key = dotted.split(".")
    want = ".".join(sec)
    current = ""
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        if current == want and re.match(rf"\s*{re.escape(key)}\s*=", line):
            return n
    return None


def _field_error(msg, dotted):
    err = InvalidConfigError(msg)
    err.field = dotted
    return err


def load_config(path, overrides=()):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from None
    return load_config_text(text, str(path), overrides)


def _apply_override(raw, item):
    """``section.key=value`` with the value parsed as a TOML literal."""
    if "=" not in item:
        raise InvalidConfigError(f"override {item!r} must look like section.key=value")
    path, value = item.split("=", 1)
    try:
        parsed = tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()
    keys = path.strip().split(".")
    d = raw
    for k in keys[:-1]:
        d = d.setdefault(k, {})
        if not isinstance(d, dict):
            raise InvalidConfigError(f"override {path}: {k} is not a table")
    d[keys[-1]] = parsed


def _flatten(raw, source):
    """Validate keys and types; return {section: {key: value}} with defaults."""
    out = {sec: {k: copy.deepcopy(v[1]) for k, v in keys.items()} for sec, keys in SCHEMA.items()}
    given = {sec: set() for sec in SCHEMA}

    def visit(table, prefix):
        for key, value in table.items():
            dotted = f"{prefix}.{key}" if prefix else key
            if isinstance(value, dict):
                if dotted not in SCHEMA:
                    raise InvalidConfigError(f"{source}: unknown section [{dotted}]")
                visit(value, dotted)
                continue
            sec = prefix
            if sec not in SCHEMA or key not in SCHEMA[sec]:
                raise _field_error(f"{source}: unknown field {dotted!r}", dotted)
            types, _ = SCHEMA[sec][key]
            ok = isinstance(value, types) and not (types is NUM and isinstance(value, bool))
            if types == int and isinstance(value, bool):
                ok = False
            if not ok:
                raise _field_error(
                    f"{source}: field {dotted!r} has type {type(value).__name__}, "
                    f"expected {_type_name(types)}", dotted)
            if types is LIST and not all(isinstance(v, NUM) and not isinstance(v, bool) for v in value):
                raise _field_error(f"{source}: field {dotted!r} must be a list of numbers", dotted)
            out[sec][key] = value
            given[sec].add(key)

    visit(raw, "")
    return out, given


def _type_name(types):
    if types is NUM:
        return "number"
    if types is LIST:
        return "list of numbers"
    return types.__name__


@dataclass
class ExperimentConfig:
    """Resolved configuration: physics objects plus experiment settings."""

    experiment: str
    seed: int
    out: str
    analytic: bool
    jobs: int
    trap: Optional[TrapConfig]
    modes: ModeSet
    cool: CoolingCoefficients
    drive: Optional[AxializationDrive]
    detection: LaserBeam
    settings: ScanSettings
    sections: dict = field(default_factory=dict)
    source: str = "<config>"
    cooling_beam: Optional[LaserBeam] = None

    @classmethod
    def from_dict(cls, raw, source="<config>"):
        sec, given = _flatten(raw, source)
        top = sec[""]
        exp = top["experiment"]
        if exp is None:
            raise InvalidConfigError(f"{source}: field 'experiment' is required "
                                     f"(one of {', '.join(EXPERIMENTS)})")
        if exp not in EXPERIMENTS:
            raise InvalidConfigError(f"{source}: field 'experiment' = {exp!r}; "
                                     f"expected one of {', '.join(EXPERIMENTS)}")
        if top["seed"] < 0 or top["seed"] >= 2 ** 64:
            raise InvalidConfigError(f"{source}: field 'seed' must be an unsigned 64-bit integer")
        try:
            trap, modes = _resolve_trap(sec["trap"], given["trap"])
            cool, cbeam = _resolve_cooling(sec["cooling"], given["cooling"], sec["cooling.beam"],
                                           given["cooling.beam"], modes, trap)
            drive = _resolve_drive(sec["drive"], given["drive"], modes, trap)
            det = _detection_beam(sec["detection"])
            st = sec["statistics"]
            settings = ScanSettings(n_photons=st["photons_per_point"],
                                    bins_per_period=st["bins_per_period"],
                                    decay_lengths=st["decay_lengths"],
                                    target_depth=st["target_depth"],
                                    polarization=st["polarization"])
        except InvalidConfigError as exc:
            raise InvalidConfigError(f"{source}: {exc}") from None
        return cls(experiment=exp, seed=top["seed"], out=top["out"], analytic=top["analytic"],
                   jobs=top["jobs"], trap=trap, modes=modes, cool=cool, drive=drive,
                   detection=det, settings=settings, sections=sec, source=source,
                   cooling_beam=cbeam)

    def snapshot(self):
        """Plain-data view of every resolved field, for manifests."""
        return {k: v for k, v in self.sections.items()}


def _resolve_trap(t, given):
    direct = {"cyclotron_frequency_kHz", "magnetron_frequency_kHz"} & given
    if direct:
        if len(direct) != 2:
            raise InvalidConfigError("trap: give both cyclotron_frequency_kHz and "
                                     "magnetron_frequency_kHz, or neither")
        modes = ModeSet.from_frequencies(from_khz(t["cyclotron_frequency_kHz"]),
                                         from_khz(t["magnetron_frequency_kHz"]))
        return None, modes
    ion = IonSpecies.from_mass_number(t["mass_u"], t["charge"])
    if "R_squared_m2" in given:
        if "axial_frequency_kHz" in given:
            raise InvalidConfigError("trap: R_squared_m2 and axial_frequency_kHz are exclusive")
        R2 = t["R_squared_m2"]
    else:
        R2 = calibrate_R_squared(from_khz(t["axial_frequency_kHz"]), t["U0_V"], ion)
    measured = t["magnetron_measured_kHz"]
    cfg = TrapConfig(U0=t["U0_V"], B=t["B_T"], R_squared=R2, r0=t["r0_m"], ion=ion,
                     omega_m_measured=None if measured is None else from_khz(measured))
    return cfg, mode_set(cfg)


def _laser(detuning, b):
    return LaserBeam(detuning=detuning, linewidth=TWO_PI * b["linewidth_MHz"] * 1e6,
                     waist=b["waist_um"] * 1e-6, offset_y=b["offset_um"] * 1e-6,
                     saturation_rate=b["saturation_rate_per_s"],
                     wavevector=TWO_PI / (b["wavelength_nm"] * 1e-9))


def _detection_beam(d):
    gamma = TWO_PI * d["linewidth_MHz"] * 1e6
    return _laser(d["detuning_linewidths"] * gamma, d)


def _resolve_cooling(c, given, b, bgiven, modes, trap):
    choices = [bool(bgiven), "alpha_per_s2" in given, "magnetron_rate_per_s" in given, c["balanced"]]
    if sum(choices) > 1:
        raise InvalidConfigError("cooling: choose one of [cooling.beam], alpha_per_s2, "
                                 "magnetron_rate_per_s, balanced")
    if bgiven:
        if b["detuning_MHz"] is None:
            raise InvalidConfigError("cooling.beam: detuning_MHz is required")
        beam = _laser(TWO_PI * b["detuning_MHz"] * 1e6, b)
        ion = trap.ion if trap is not None else IonSpecies.from_mass_number(40.0)
        return beam_linearization(beam, modes, ion), beam
    beta = c["beta_per_s"]
    if "alpha_per_s2" in given:
        return CoolingCoefficients(alpha=c["alpha_per_s2"], beta=beta), None
    if "magnetron_rate_per_s" in given:
        return presets.cooling_for_rates(modes, beta, c["magnetron_rate_per_s"]), None
    if c["balanced"]:
        return presets.balanced_cooling(modes, beta), None
    # default: a magnetron rate of a few per second
    return presets.cooling_for_rates(modes, beta, 3.0), None


def _resolve_drive(d, given, modes, trap):
    amp = [k for k in ("coupling_kHz", "epsilon_per_s2", "V0_mV") if k in given]
    if not amp:
        return None
    if len(amp) > 1:
        raise InvalidConfigError(f"drive: {', '.join(amp)} are mutually exclusive")
    if "frequency_kHz" in given and "detuning_kHz" in given:
        raise InvalidConfigError("drive: frequency_kHz and detuning_kHz are mutually exclusive")
    key = amp[0]
    if key == "coupling_kHz":
        eps = from_khz(d["coupling_kHz"]) * modes.omega_1
    elif key == "epsilon_per_s2":
        eps = d["epsilon_per_s2"]
    else:
        eps = voltage_to_epsilon(d["V0_mV"], d["calibration"], modes, trap)
    if "frequency_kHz" in given:
        return AxializationDrive.at_frequency(eps, from_khz(d["frequency_kHz"]), modes)
    return AxializationDrive.at_detuning(eps, 0.5 * from_khz(d["detuning_kHz"]), modes)


def voltage_to_epsilon(V0_mV, calibration, modes, trap):
    """epsilon from a drive amplitude, by ring geometry or the field-simulation reference."""
    if V0_mV < 0:
        raise InvalidConfigError("drive: V0_mV must be >= 0")
    if calibration == "simion":
        return presets.simion_coupling(V0_mV) * modes.omega_1
    if calibration == "geometry":
        if trap is None:
            raise InvalidConfigError("drive: V0_mV with geometry calibration needs the trap "
                                     "specified by voltages (r0_m, U0_V, B_T)")
        return trap.ion.q * V0_mV * 1e-3 / (2.0 * trap.ion.mass * trap.r0 ** 2)
    raise InvalidConfigError(f"drive: calibration must be 'geometry' or 'simion', got {calibration!r}")


def frequency_list(values_khz, offset=0.0):
    return offset + from_khz(np.asarray(values_khz, dtype=float))
