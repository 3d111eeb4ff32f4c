"""Compiled inner loops."""
import numpy as np
from numba import njit

# status codes returned by rk4_complex
OK = 0
DIVERGED = 1


@njit(cache=True)
def _acc(u, ud, t, c1, c0, eps, w_q, fp, wp, fm, wm):
    return (-c1 * ud + c0 * u - eps * np.conj(u) * np.exp(1j * w_q * t)
            + fp * np.exp(1j * wp * t) + fm * np.exp(1j * wm * t))


@njit(cache=True)
def rk4_complex(u0, ud0, t0, h, nsteps, every, c1, c0, eps, w_q, fp, wp, fm, wm, bound):
    """Fixed-step RK4 for  u'' = -c1 u' + c0 u - eps conj(u) e^{i w_q t} + forcing.

    forcing = fp e^{i wp t} + fm e^{i wm t}. Every ``every``-th step is stored.
    Returns (u, u_dot, n_stored, status).
    """
    n_out = nsteps // every + 1
    U = np.empty(n_out, np.complex128)
    UD = np.empty(n_out, np.complex128)
    u = u0
    ud = ud0
    U[0] = u
    UD[0] = ud
    k = 1
    for i in range(nsteps):
        t = t0 + i * h
        th = t + 0.5 * h
        a1 = _acc(u, ud, t, c1, c0, eps, w_q, fp, wp, fm, wm)
        u2 = u + 0.5 * h * ud
        ud2 = ud + 0.5 * h * a1
        a2 = _acc(u2, ud2, th, c1, c0, eps, w_q, fp, wp, fm, wm)
        u3 = u + 0.5 * h * ud2
        ud3 = ud + 0.5 * h * a2
        a3 = _acc(u3, ud3, th, c1, c0, eps, w_q, fp, wp, fm, wm)
        u4 = u + h * ud3
        ud4 = ud + h * a3
        a4 = _acc(u4, ud4, t + h, c1, c0, eps, w_q, fp, wp, fm, wm)
        u = u + (h / 6.0) * (ud + 2.0 * ud2 + 2.0 * ud3 + ud4)
        ud = ud + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if not (abs(u) <= bound) or not np.isfinite(ud.real + ud.imag):
            return U, UD, k, DIVERGED
        if (i + 1) % every == 0:
            U[k] = u
            UD[k] = ud
            k += 1
    return U, UD, k, OK


@njit(cache=True)
def tac_rf_start(photons, period, t_first, max_delay):
    """Start on reference ticks t_first + n*period, stop on the next photon.

    Starts arriving while the converter waits for a stop are ignored; a start
    with no photon within ``max_delay`` times out. Returns (delays, n_starts).
    """
    n = photons.size
    out = np.empty(n, np.float64)
    n_out = 0
    n_starts = 0
    j = 0
    start = t_first
    while True:
        while j < n and photons[j] <= start:
            j += 1
        if j >= n:
            break
        n_starts += 1
        d = photons[j] - start
        if d <= max_delay:
            out[n_out] = d
            n_out += 1
            ref = photons[j]
        else:
            ref = start + max_delay
        start = t_first + (np.floor((ref - t_first) / period) + 1.0) * period
    return out[:n_out], n_starts


@njit(cache=True)
def tac_photon_pairs(photons, max_delay, overlapping):
    """Each photon starts, the next one stops.

    Non-overlapping pairs: a photon that stops a measurement does not start
    the next one. A start that times out is replaced by the next photon.
    Returns (delays, n_starts).
    """
    n = photons.size
    out = np.empty(max(n - 1, 0), np.float64)
    n_out = 0
    n_starts = 0
    i = 0
    while i + 1 < n:
        n_starts += 1
        d = photons[i + 1] - photons[i]
        if d <= max_delay:
            out[n_out] = d
            n_out += 1
            i += 1 if overlapping else 2
        else:
            i += 1
    return out[:n_out], n_starts
