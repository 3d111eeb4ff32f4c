"""Photon detection chain: emission, start-stop histogramming, phase fits.

Photons are drawn from the inhomogeneous Poisson process with the
position- and velocity-dependent scattering rate of the detection beam, by
thinning a homogeneous stream at the peak rate S0. All randomness comes from
numpy's PCG64 generator seeded explicitly, so a (motion, beam, seed) triple
reproduces the same arrival times on any platform.

Two converter modes are provided. ``photon-photon`` starts on a photon and
stops on the next one. ``photon-rf`` starts on each zero crossing of the
probe phase and stops on the next photon, which is what carries the phase of
the driven motion relative to the probe.
"""
import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._validation import check_positive
from .dynamics import Probe, Trajectory, steady_state_response
from .estimators import ArctanPhaseFitter, CorrelationFitter
from .exceptions import (EmptyStreamError, FitError, FitFailureError, InsufficientDataError,
                         InvalidConfigError, RateUndersampledError)

CHUNK = 1 << 16


def scattering_rate(state, beam):
    """Photons/s for a lab-frame RadialState (or arrays of u, u_dot)."""
    u = np.asarray(state.u)
    ud = np.asarray(state.u_dot)
    return beam.rate(u.imag, ud.real)


@dataclass
class EventStream:
    times: np.ndarray
    seed: int
    t_start: float
    t_end: float
    config: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size

    @property
    def mean_rate(self):
        return self.times.size / (self.t_end - self.t_start)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s"])
            for t in self.times:
                w.writerow([repr(float(t))])

    def to_binary(self, path):
        """Little-endian float64 arrival times, no header."""
        self.times.astype("<f8").tofile(path)

    @staticmethod
    def read_binary(path):
        return np.fromfile(path, dtype="<f8")


class _MotionSource:
    """Adapter giving (u, u_dot) at arbitrary times for either motion type."""

    def __init__(self, motion):
        self.motion = motion
        if motion is None:
            self.t_start, self.t_end = -np.inf, np.inf
        elif isinstance(motion, Trajectory):
            self.t_start, self.t_end = motion.t[0], motion.t[-1]
        else:
            self.t_start, self.t_end = -np.inf, np.inf

    def __call__(self, t):
        if self.motion is None:
            z = np.zeros(np.shape(t), dtype=complex)
            return z, z
        if isinstance(self.motion, Trajectory):
            return self.motion.position_velocity(t)
        return self.motion.evaluate(t)


def generate_photons(motion, beam, seed, *, t_start=None, t_end=None, n_photons=None,
                     modulation_omega=None):
    """Arrival times for an ion following ``motion``.

    ``motion`` is a Trajectory (interpolated linearly), a SteadyStateResponse
    (evaluated exactly) or None for an ion at rest at the trap centre.
    Generation stops at ``t_end`` or, when ``n_photons`` is set, after exactly
    that many accepted photons.
    """
    if beam.saturation_rate <= 0:
        raise InvalidConfigError("beam saturation_rate must be > 0 to emit photons")
    src = _MotionSource(motion)
    if isinstance(motion, Trajectory):
        w = modulation_omega or motion.metadata.get("omega_max")
        if w and motion.dt > 2 * np.pi / abs(w) / 10:
            raise RateUndersampledError(
                f"trajectory dt={motion.dt:.3e} s is coarser than 1/10 of the "
                f"modulation period {2 * np.pi / abs(w):.3e} s")
    t0 = src.t_start if t_start is None else t_start
    if not np.isfinite(t0):
        t0 = 0.0
    t1 = src.t_end if t_end is None else t_end
    if t1 > src.t_end or t0 < src.t_start:
        raise InvalidConfigError("requested interval extends beyond the trajectory")
    if not np.isfinite(t1) and n_photons is None:
        raise InvalidConfigError("need t_end or n_photons for an unbounded motion")

    rng = np.random.Generator(np.random.PCG64(seed))
    S0 = beam.saturation_rate
    out = []
    n_acc = 0
    last = t0
    while True:
        cand = last + np.cumsum(rng.exponential(1.0 / S0, CHUNK))
        accept_u = rng.random(CHUNK)
        last = cand[-1]
        stop = cand.size
        if cand[-1] > t1:
            stop = int(np.searchsorted(cand, t1, side="right"))
        cand, accept_u = cand[:stop], accept_u[:stop]
        if cand.size:
            u, ud = src(cand)
            keep = cand[accept_u * S0 < beam.rate(u.imag, ud.real)]
            if n_photons is not None and n_acc + keep.size >= n_photons:
                out.append(keep[: n_photons - n_acc])
                n_acc = n_photons
                break
            out.append(keep)
            n_acc += keep.size
        if stop < CHUNK:
            break
    times = np.concatenate(out) if out else np.empty(0)
    end = times[-1] if n_photons is not None and times.size == n_photons else t1
    cfg = dict(motion.metadata) if isinstance(motion, Trajectory) else {}
    cfg.update(beam=_beam_dict(beam))
    return EventStream(times=times, seed=seed, t_start=float(t0), t_end=float(end), config=cfg)


def _beam_dict(beam):
    return {k: getattr(beam, k) for k in
            ("detuning", "linewidth", "waist", "offset_y", "saturation_rate", "wavevector")}


@dataclass
class CorrelationHistogram:
    edges: np.ndarray
    counts: np.ndarray
    n_starts: int
    mode: str

    @property
    def bin_width(self):
        return self.edges[1] - self.edges[0]

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delay_lo_s", "delay_hi_s", "counts"])
            for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c)])


def correlation_histogram(events, bin_width, max_delay, *, mode="photon-photon",
                          reference_omega=None, overlapping=False):
    """Emulate the start-stop converter and bin the delays.

    ``photon-rf`` needs ``reference_omega``; its starts are the instants where
    the probe phase reference_omega * t is a multiple of 2 pi.
    """
    check_positive("bin_width", bin_width)
    check_positive("max_delay", max_delay)
    times = np.ascontiguousarray(events.times, dtype=float)
    if times.size == 0:
        raise EmptyStreamError("event stream is empty")
    if mode == "photon-photon":
        if times.size < 2:
            raise EmptyStreamError("need at least 2 events")
        delays, n_starts = _kernels.tac_photon_pairs(times, float(max_delay), bool(overlapping))
    elif mode == "photon-rf":
        if not reference_omega:
            raise InvalidConfigError("photon-rf mode needs reference_omega")
        period = 2 * np.pi / abs(reference_omega)
        first = math.ceil(events.t_start / period) * period
        delays, n_starts = _kernels.tac_rf_start(times, period, first, float(max_delay))
    else:
        raise InvalidConfigError(f"unknown converter mode {mode!r}")
    n_bins = max(1, int(math.floor(max_delay / bin_width + 1e-9)))
    edges = np.arange(n_bins + 1) * bin_width
    counts, _ = np.histogram(delays, bins=edges)
    return CorrelationHistogram(edges=edges, counts=counts.astype(np.int64), n_starts=int(n_starts),
                                mode=mode)


@dataclass
class CorrelationFit:
    a: float
    b: float
    c: float
    phi: float
    covariance: np.ndarray
    stderr: np.ndarray
    residual_norm: float

    @property
    def phi_err(self):
        return float(self.stderr[3]) if self.stderr.size > 3 else float("nan")


def fit_correlation(hist, omega_excit):
    """Fit exp(-a t)[b + |c| sin(omega_excit t - phi)] to the histogram.

    ``omega_excit=None`` fits the bare exponential.
    """
    est = CorrelationFitter(omega_excit=omega_excit).fit(hist.centers, hist.counts)
    return CorrelationFit(a=est.a_, b=est.b_, c=est.c_, phi=est.phi_,
                          covariance=est.covariance_, stderr=est.stderr_,
                          residual_norm=est.residual_norm_)


@dataclass
class PhaseScan:
    """Per-point phases (unwrapped, ordered by omega) and the arctan fit.

    ``width`` is the half-width of the step, identified with the damping
    rate; ``height`` is the total phase change from a free-amplitude refit.
    """

    omega: np.ndarray
    phase: np.ndarray
    phase_err: np.ndarray
    resonance: float
    width: float
    offset: float
    sign: float
    height: float
    resonance_err: float = float("nan")
    width_err: float = float("nan")
    failures: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["f_excit_kHz", "phase_rad", "phase_err_rad"])
            for om, ph, er in zip(self.omega, self.phase, self.phase_err):
                w.writerow([repr(float(om / (2e3 * np.pi))), repr(float(ph)), repr(float(er))])


def unwrap_phases(phase):
    """Nearest-multiple-of-2pi continuation (input already ordered by omega)."""
    return np.unwrap(np.asarray(phase, dtype=float))


def fit_phase_scan(omega, phase, phase_err=None, failures=None):
    omega = np.asarray(omega, dtype=float)
    phase = np.asarray(phase, dtype=float)
    order = np.argsort(omega)
    omega, phase = omega[order], phase[order]
    err = None if phase_err is None else np.asarray(phase_err, dtype=float)[order]
    if omega.size < 5:
        raise FitFailureError(f"scan has {omega.size} valid points; need 5")
    phase = unwrap_phases(phase)
    sig = None
    if err is not None and np.all(np.isfinite(err)) and np.all(err > 0):
        sig = err
    est = ArctanPhaseFitter().fit(omega, phase, sig)
    try:
        height = ArctanPhaseFitter(free_height=True).fit(omega, phase, sig).height_
    except FitError:
        height = float("nan")
    return PhaseScan(omega=omega, phase=phase,
                     phase_err=err if err is not None else np.full(omega.size, np.nan),
                     resonance=est.resonance_, width=est.width_, offset=est.offset_,
                     sign=est.sign_, height=height, resonance_err=float(est.stderr_[1]),
                     width_err=float(est.stderr_[2]), failures=list(failures or []))


# --- scan orchestration ------------------------------------------------------

@dataclass(frozen=True)
class ScanSettings:
    """Statistics and converter settings for a simulated phase scan.

    ``target_depth`` sets the probe strength: the largest relative rate
    modulation over the grid. Bin width is 1/(bins_per_period f_excit) and the
    histogram extends to ``decay_lengths`` mean photon intervals.
    """

    n_photons: int = 100_000
    bins_per_period: int = 50
    decay_lengths: float = 5.0
    target_depth: float = 0.3
    polarization: str = "linear"
    mode: str = "photon-rf"


def modulation_depth(response, beam, probe_only=True):
    """First-order relative rate modulation at the probe frequency.

    With ``probe_only=False`` the drive-mixed image components are included.
    """
    comps = response.components[:1] if probe_only else response.components
    return float(sum(abs(a) * abs(beam.modulation_coefficient(w)) for a, w in comps))


def level_probe(fc, beam, omega_grid, target_depth, polarization="linear"):
    """Probe amplitude giving ``target_depth`` at the most responsive grid point."""
    worst = 0.0
    for w in omega_grid:
        r = steady_state_response(fc.replace(probe=Probe(1.0, float(w), polarization)))
        worst = max(worst, modulation_depth(r, beam))
    if worst == 0:
        raise InvalidConfigError("probe has no effect on the scattering rate")
    return target_depth / worst


def scan_point(fc, beam, omega, amplitude, seed, settings):
    """One scan point: steady state, photons, histogram, correlation fit."""
    pfc = fc.replace(probe=Probe(amplitude, float(omega), settings.polarization))
    response = steady_state_response(pfc)
    events = generate_photons(response, beam, seed, t_start=0.0, n_photons=settings.n_photons)
    if len(events) < settings.n_photons:
        raise InsufficientDataError("photon budget not reached")
    rate = events.mean_rate
    f = abs(omega) / (2 * np.pi)
    hist = correlation_histogram(events, 1.0 / (settings.bins_per_period * f),
                                 settings.decay_lengths / rate, mode=settings.mode,
                                 reference_omega=omega)
    fit = fit_correlation(hist, abs(omega))
    return fit, response


def _scan_job(args):
    fc, beam, omega, amplitude, seed, settings = args
    try:
        fit, _ = scan_point(fc, beam, omega, amplitude, seed, settings)
        return float(omega), fit.phi, fit.phi_err, None
    except (FitError, InsufficientDataError) as exc:
        return float(omega), float("nan"), float("nan"), f"{type(exc).__name__}: {exc}"


def phase_scan(fc, beam, omega_grid, *, seed=0, settings=ScanSettings(), jobs=1,
               probe_amplitude=None):
    """Step the probe across ``omega_grid`` and fit the phase response.

    Point k uses seed ``seed + k``. The probe amplitude is fixed over the scan
    and, unless given, levelled from ``settings.target_depth``.
    """
    grid = np.asarray(omega_grid, dtype=float)
    if grid.size < 8:
        raise InvalidConfigError(f"phase scan needs at least 8 grid points, got {grid.size}")
    amp = probe_amplitude
    if amp is None:
        amp = level_probe(fc, beam, grid, settings.target_depth, settings.polarization)
    tasks = [(fc, beam, w, amp, seed + k, settings) for k, w in enumerate(grid)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_scan_job, tasks))
    else:
        rows = [_scan_job(t) for t in tasks]
    ok = [r for r in rows if r[3] is None]
    failures = [(r[0], r[3]) for r in rows if r[3] is not None]
    om = np.array([r[0] for r in ok])
    ph = np.array([r[1] for r in ok])
    er = np.array([r[2] for r in ok])
    return fit_phase_scan(om, ph, er, failures)
