"""Radial equation of motion, RK4 integration and mode extraction.

Coordinates are complex, u = x + i y. In the laboratory frame

    u'' = -(beta - i omega_c) u' + (omega_z**2/2 + i alpha) u
          - epsilon conj(u) exp(i omega_a t) + probe(t)

whose free solutions are exp(+i omega t) with omega = omega_m, omega_cp. The
rotating coordinate is v = u exp(-i omega_r t) with omega_r = omega_a / 2; in
that frame the drive term becomes the time-independent -epsilon conj(v) and
the free solutions rotate at -omega_1 and +omega_1.
"""
import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from ._validation import check_finite, check_positive
from .estimators import DampedExponentialModes
from .exceptions import DivergenceError, InvalidConfigError, NoSteadyStateError, StepTooLargeError
from .modes import AxializationDrive, CoolingCoefficients
from .trap import ModeSet


class Frame(str, enum.Enum):
    LAB = "LAB"
    ROTATING = "ROTATING"


@dataclass(frozen=True)
class Probe:
    """Dipolar excitation per unit mass (m/s**2) at angular frequency omega.

    ``linear`` drives x only, F cos(omega t) = F/2 (e^{i omega t} + e^{-i omega t});
    ``circular`` is the co-rotating F e^{i omega t}.
    """

    amplitude: float
    omega: float
    polarization: str = "linear"

    def __post_init__(self):
        check_positive("probe amplitude", self.amplitude, allow_zero=True)
        check_finite("probe omega", self.omega)
        if self.polarization not in ("linear", "circular"):
            raise InvalidConfigError(f"unknown probe polarization {self.polarization!r}")

    def components(self):
        """((f_plus, w_plus), (f_minus, w_minus)) complex forcing terms."""
        if self.polarization == "linear":
            half = 0.5 * self.amplitude
            return (half, self.omega), (half, -self.omega)
        return (complex(self.amplitude), self.omega), (0.0, 0.0)


@dataclass(frozen=True)
class RadialState:
    u: complex
    u_dot: complex
    t: float = 0.0


def epicycle_state(modes, r_magnetron, r_cyclotron, t=0.0):
    """Lab-frame state of superposed circular magnetron and cyclotron orbits."""
    u = complex(r_magnetron) + complex(r_cyclotron)
    ud = 1j * modes.omega_m * r_magnetron + 1j * modes.omega_cp * r_cyclotron
    return RadialState(u=u, u_dot=ud, t=t)


@dataclass(frozen=True)
class ForceConfig:
    modes: ModeSet
    cool: CoolingCoefficients
    drive: Optional[AxializationDrive] = None
    probe: Optional[Probe] = None
    frame: Frame = Frame.LAB

    def __post_init__(self):
        object.__setattr__(self, "frame", Frame(self.frame))

    @property
    def omega_r(self):
        """Rotation rate of the rotating frame: omega_a/2, or omega_c/2 undriven."""
        if self.drive is not None:
            return 0.5 * self.drive.omega_a
        return 0.5 * self.modes.omega_c

    @property
    def epsilon(self):
        return 0.0 if self.drive is None else self.drive.epsilon

    def replace(self, **changes):
        kw = dict(modes=self.modes, cool=self.cool, drive=self.drive, probe=self.probe,
                  frame=self.frame)
        kw.update(changes)
        return ForceConfig(**kw)

    def snapshot(self):
        m = self.modes
        out = {
            "frame": self.frame.value,
            "omega_z": m.omega_z, "omega_c": m.omega_c, "omega_1": m.omega_1,
            "omega_m": m.omega_m, "omega_cp": m.omega_cp,
            "alpha": self.cool.alpha, "beta": self.cool.beta,
            "epsilon": self.epsilon, "omega_r": self.omega_r,
        }
        if self.drive is not None:
            out.update(omega_a=self.drive.omega_a, delta=self.drive.delta)
        if self.probe is not None:
            out.update(probe_amplitude=self.probe.amplitude, probe_omega=self.probe.omega,
                       probe_polarization=self.probe.polarization)
        return out


def _coefficients(fc):
    """(c1, c0, w_q, (fp, wp), (fm, wm)) for the kernel in the config's frame."""
    m, c = fc.modes, fc.cool
    c1 = complex(c.beta, -m.omega_c)
    c0 = complex(0.5 * m.omega_z ** 2, c.alpha)
    forcing = fc.probe.components() if fc.probe is not None else ((0.0, 0.0), (0.0, 0.0))
    if fc.frame is Frame.LAB:
        w_q = fc.drive.omega_a if fc.drive is not None else 0.0
        return c1, c0, w_q, forcing[0], forcing[1]
    wr = fc.omega_r
    c0 = c0 + wr ** 2 - 1j * wr * c1
    c1 = c1 + 2j * wr
    # w_q = omega_a - 2 omega_r vanishes by construction
    (fp, wp), (fm, wm) = forcing
    return c1, c0, 0.0, (fp, wp - wr), (fm, wm - wr)


def equation_of_motion(state, fc):
    """Complex acceleration for a state given in the frame of ``fc``."""
    c1, c0, w_q, (fp, wp), (fm, wm) = _coefficients(fc)
    return complex(_kernels._acc(complex(state.u), complex(state.u_dot), float(state.t), c1, c0,
                                 fc.epsilon, w_q, complex(fp), wp, complex(fm), wm))


def lab_to_rotating(state, omega_r):
    ph = np.exp(-1j * omega_r * state.t)
    return RadialState(u=state.u * ph, u_dot=(state.u_dot - 1j * omega_r * state.u) * ph,
                       t=state.t)


def rotating_to_lab(state, omega_r):
    ph = np.exp(1j * omega_r * state.t)
    return RadialState(u=state.u * ph, u_dot=(state.u_dot + 1j * omega_r * state.u) * ph,
                       t=state.t)


@dataclass
class Trajectory:
    """Uniformly sampled states in ``frame``; ``metadata`` holds the force snapshot
    and integrator settings."""

    t: np.ndarray
    u: np.ndarray
    u_dot: np.ndarray
    frame: Frame
    omega_r: float
    dt: float
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, k):
        return RadialState(u=complex(self.u[k]), u_dot=complex(self.u_dot[k]), t=float(self.t[k]))

    @property
    def duration(self):
        return self.t[-1] - self.t[0]

    def to_lab(self):
        if self.frame is Frame.LAB:
            return self
        ph = np.exp(1j * self.omega_r * self.t)
        return Trajectory(t=self.t, u=self.u * ph, u_dot=(self.u_dot + 1j * self.omega_r * self.u) * ph,
                          frame=Frame.LAB, omega_r=self.omega_r, dt=self.dt,
                          metadata=dict(self.metadata))

    def position_velocity(self, times):
        """Lab-frame (u, u_dot) at arbitrary times by linear interpolation."""
        lab = self.to_lab()
        times = np.asarray(times, dtype=float)
        if times.size and (times.min() < lab.t[0] or times.max() > lab.t[-1]):
            raise InvalidConfigError("requested times outside the trajectory")
        x = (times - lab.t[0]) / lab.dt
        k = np.clip(np.floor(x).astype(np.int64), 0, len(lab.t) - 2)
        f = x - k
        u = lab.u[k] * (1 - f) + lab.u[k + 1] * f
        ud = lab.u_dot[k] * (1 - f) + lab.u_dot[k + 1] * f
        return u, ud

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "re_u_m", "im_u_m", "re_udot_m_per_s", "im_udot_m_per_s"])
            for row in zip(self.t, self.u.real, self.u.imag, self.u_dot.real, self.u_dot.imag):
                w.writerow([repr(float(v)) for v in row])


def max_step(modes):
    """Largest accepted RK4 step: 1/20 of the modified cyclotron period."""
    return 2 * np.pi / modes.omega_cp / 20.0


def integrate(initial, fc, t_end, dt, *, substeps=1, bound=1.0):
    """RK4 from the lab-frame ``initial`` state to ``t_end``.

    Samples are stored every ``dt``; each sample interval is split into
    ``substeps`` RK4 steps. The trajectory is returned in the frame of ``fc``.
    """
    check_positive("dt", dt)
    if int(substeps) != substeps or substeps < 1:
        raise InvalidConfigError("substeps must be a positive integer")
    if dt / substeps > max_step(fc.modes) * (1 + 1e-12):
        raise StepTooLargeError(
            f"step {dt / substeps:.3e} s exceeds T_cp/20 = {max_step(fc.modes):.3e} s")
    n = int(round((t_end - initial.t) / dt))
    if n < 1:
        raise InvalidConfigError("t_end must be at least one step after the initial time")
    state = initial if fc.frame is Frame.LAB else lab_to_rotating(initial, fc.omega_r)
    c1, c0, w_q, (fp, wp), (fm, wm) = _coefficients(fc)
    h = dt / substeps
    U, UD, k, status = _kernels.rk4_complex(
        complex(state.u), complex(state.u_dot), float(state.t), h, n * substeps, int(substeps),
        c1, c0, float(fc.epsilon), float(w_q), complex(fp), float(wp), complex(fm), float(wm),
        float(bound))
    if status != _kernels.OK:
        raise DivergenceError(f"|u| exceeded {bound} m near t = {initial.t + k * dt:.4g} s")
    t = initial.t + dt * np.arange(n + 1)
    meta = fc.snapshot()
    meta.update(dt=dt, substeps=int(substeps), t_end=float(t[-1]), bound=bound,
                omega_max=_fastest(fc))
    return Trajectory(t=t, u=U, u_dot=UD, frame=fc.frame, omega_r=fc.omega_r, dt=dt, metadata=meta)


def _fastest(fc):
    """Upper estimate of the largest lab-frame frequency present."""
    w = fc.modes.omega_cp + fc.epsilon / max(fc.modes.omega_1, 1e-300)
    if fc.drive is not None:
        w += abs(fc.drive.delta)
        w = max(w, abs(fc.drive.omega_a))
    if fc.probe is not None:
        w = max(w, abs(fc.probe.omega))
    return w


def exact_modes(fc):
    """Eigen-decomposition of the undriven linear system.

    Returns (frequencies, damping) of the lab-frame components, sorted by
    frequency; positive damping means decay. With a drive there are four
    components; without one the mirrored images carry no amplitude and only
    the two physical modes are returned.
    """
    rot = fc.replace(frame=Frame.ROTATING, probe=None)
    c1, c0, *_ = _coefficients(rot)
    eps = rot.epsilon
    if eps == 0.0:
        lam = np.roots([1.0, c1, -c0])
        freqs = rot.omega_r + lam.imag
        order = np.argsort(freqs)
        return freqs[order], -lam.real[order]
    A = np.zeros((4, 4))
    A[0, 2] = A[1, 3] = 1.0
    # v = a + i b; rows give a'' and b''
    A[2] = [c0.real - eps, -c0.imag, -c1.real, c1.imag]
    A[3] = [c0.imag, c0.real + eps, -c1.imag, -c1.real]
    lam = np.linalg.eigvals(A)
    lam = lam[lam.imag >= 0] if np.sum(lam.imag >= 0) == 2 else lam[np.argsort(-lam.imag)][:2]
    wr = rot.omega_r
    freqs, damp = [], []
    for z in lam:
        for s in (1, -1):
            freqs.append(wr + s * abs(z.imag))
            damp.append(-z.real)
    order = np.argsort(freqs)
    return np.asarray(freqs)[order], np.asarray(damp)[order]


@dataclass(frozen=True)
class ExtractedMode:
    frequency: float
    damping: float
    amplitude: complex


def extract_modes(traj, n_expected, *, max_samples=8192, residual_tol=1e-3, min_periods=10.0):
    """Fit n_expected damped exponentials to the lab-frame trajectory.

    Long records are decimated to at most ``max_samples`` points as long as
    the fastest component stays below 0.4 of the sampling rate.
    """
    lab = traj.to_lab()
    q = max(1, math.ceil(len(lab.t) / max_samples))
    w_max = traj.metadata.get("omega_max")
    if w_max:
        q = max(1, min(q, int(0.8 * np.pi / (w_max * lab.dt))))
    else:
        q = 1
    est = DampedExponentialModes(n_modes=n_expected, min_periods=min_periods,
                                 residual_tol=residual_tol)
    est.fit(lab.t[::q], lab.u[::q])
    return [ExtractedMode(float(w), float(g), complex(a))
            for w, g, a in zip(est.frequencies_, est.damping_, est.amplitudes_)]


# --- driven steady state ---------------------------------------------------

def _response_denominator(w, fc):
    m, c = fc.modes, fc.cool
    return -w ** 2 + 1j * c.beta * w + m.omega_c * w - 0.5 * m.omega_z ** 2 - 1j * c.alpha


@dataclass(frozen=True)
class SteadyStateResponse:
    """Driven lab-frame motion as a sum of components A_k exp(i w_k t).

    ``components`` lists (A_k, w_k); the first entry is the response at the
    probe frequency, the second the drive-mixed image at omega_a - omega_probe.
    ``forcing`` is the probe component that produced the first entry.
    """

    components: tuple
    forcing: complex

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        u = np.zeros(t.shape, dtype=complex)
        ud = np.zeros(t.shape, dtype=complex)
        for a, w in self.components:
            e = a * np.exp(1j * w * t)
            u += e
            ud += 1j * w * e
        return u, ud

    @property
    def phase(self):
        """Phase of the driven motion relative to the probe, in (-pi, pi]."""
        return _wrap(np.angle(self.components[0][0] / self.forcing))

    @property
    def amplitude(self):
        """Largest instantaneous |u| bound: the sum of component magnitudes."""
        return float(sum(abs(a) for a, _ in self.components))


def _wrap(phi):
    return float(np.pi - np.mod(np.pi - phi, 2 * np.pi))


def require_steady_state(fc):
    _, damp = exact_modes(fc)
    if np.any(damp <= 0):
        raise NoSteadyStateError(f"mode damping rates {damp} are not all positive")
    return damp


def steady_state_response(fc):
    """Closed-form steady state of the driven linear system (exact at any epsilon)."""
    if fc.probe is None:
        raise InvalidConfigError("steady state needs a probe")
    require_steady_state(fc)
    eps = fc.epsilon
    wa = fc.drive.omega_a if fc.drive is not None else 0.0
    comps = []
    first = None
    for f, w in fc.probe.components():
        if f == 0:
            continue
        Lw = _response_denominator(w, fc)
        Li = _response_denominator(wa - w, fc)
        P = f / (Lw - eps ** 2 / np.conj(Li))
        Q = -eps * np.conj(P) / Li
        comps.append((complex(P), float(w)))
        if eps != 0:
            comps.append((complex(Q), float(wa - w)))
        if first is None:
            first = complex(f)
    # keep the probe-frequency term first, its image second
    return SteadyStateResponse(components=tuple(comps), forcing=first)


def steady_state_phase(fc, settle_periods=10.0, *, method="integrate", demod_periods=200,
                       steps_per_period=80):
    """Phase of the driven motion at the probe frequency relative to the probe.

    With ``method="integrate"`` the ion starts at rest at the centre, is
    integrated for ``settle_periods`` of the slowest damping time and then
    demodulated synchronously over ``demod_periods`` probe periods.
    ``method="analytic"`` evaluates the closed-form steady state instead.
    """
    if fc.probe is None or fc.probe.amplitude == 0:
        raise InvalidConfigError("steady_state_phase needs a probe")
    damp = require_steady_state(fc)
    if method == "analytic":
        return steady_state_response(fc).phase
    if method != "integrate":
        raise InvalidConfigError(f"unknown method {method!r}")
    nu = fc.probe.omega
    if nu == 0:
        raise InvalidConfigError("probe frequency must be non-zero")
    t_settle = settle_periods / damp.min()
    T_probe = 2 * np.pi / abs(nu)
    dt = max_step(fc.modes) * 20.0 / steps_per_period
    # sample interval commensurate with the probe period
    per = max(1, math.ceil(T_probe / dt))
    dt = T_probe / per
    t0 = math.ceil(t_settle / T_probe) * T_probe
    lab = fc.replace(frame=Frame.LAB)
    settle = integrate(RadialState(0j, 0j, 0.0), lab, t0, dt * per, substeps=per, bound=1.0)
    start = settle[-1]
    record = integrate(start, lab, start.t + demod_periods * T_probe, dt)
    t, u = record.t[:-1], record.u[:-1]
    z = np.mean(u * np.exp(-1j * nu * t))
    f0 = fc.probe.components()[0][0]
    return _wrap(np.angle(z / f0))
