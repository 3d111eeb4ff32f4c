"""Estimators with the scikit-learn fit/predict interface.

Each one wraps :func:`axialize.fitting.least_squares` around a model from the
package, so they clone, expose ``get_params`` and compose like any other
scikit-learn estimator.
"""
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_1d, check_consistent_length, check_is_fitted
from .exceptions import (BranchAmbiguousError, FitFailureError, InsufficientDataError,
                         InvalidConfigError)
from .fitting import FitProblem, least_squares


def wrap_phase(phi):
    """Map angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2.0 * np.pi)


class DampedExponentialModes(BaseEstimator):
    """Fit u(t) = sum_k A_k exp((i w_k - g_k)(t - t0)) to complex samples.

    Modes are added one at a time: the next frequency guess is the tallest
    peak of the Hann-windowed, zero-padded spectrum of the current residual,
    so sidelobes of a strong line are never mistaken for a weak one. After
    each addition all frequencies and damping rates are refined by
    Levenberg-Marquardt with the amplitudes solved linearly at every step
    (variable projection).

    Parameters
    ----------
    n_modes : int
        Number of exponentials, chosen by the caller.
    min_periods : float
        Required record length in periods of the slowest component.
    residual_tol : float
        Largest acceptable rms residual relative to the rms signal.
    """

    def __init__(self, n_modes=2, min_periods=10.0, residual_tol=1e-3, max_iter=100, pad_factor=16):
        self.n_modes = n_modes
        self.min_periods = min_periods
        self.residual_tol = residual_tol
        self.max_iter = max_iter
        self.pad_factor = pad_factor

    def fit(self, t, u):
        t = check_1d("t", t, min_length=4 * self.n_modes)
        u = check_1d("u", u, dtype=complex, min_length=4 * self.n_modes)
        check_consistent_length(t, u)
        dt = np.diff(t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * dt.mean():
            raise InvalidConfigError("samples must be uniformly spaced in time")
        tau = t - t[0]
        scale = np.max(np.abs(u))
        if scale == 0:
            raise InsufficientDataError("signal is identically zero")
        y = u / scale
        T = tau[-1]

        def basis(p, k):
            return np.exp(np.outer(tau, 1j * p[:k] - p[k:]))

        def solve(p, k):
            E = basis(p, k)
            c, *_ = np.linalg.lstsq(E, y, rcond=None)
            return E, c

        # growth faster than 20 e-folds per record is not a mode, and bounding
        # it keeps the trial bases finite
        g_lo, g_hi = -20.0 / T, np.pi / dt.mean()
        w, g = np.empty(0), np.empty(0)
        resid = y
        res = None
        for k in range(1, self.n_modes + 1):
            w = np.append(w, self._spectral_peaks(resid, dt.mean(), 1)[0])
            g = np.append(g, 0.0)
            p0 = np.concatenate([w, g])
            lo = np.concatenate([np.full(k, -np.inf), np.full(k, g_lo)])
            hi = np.concatenate([np.full(k, np.inf), np.full(k, g_hi)])

            def model(p, x, k=k):
                E, c = solve(p, k)
                return E @ c

            res = least_squares(FitProblem(model=model, x=tau, y=y, p0=p0, bounds=(lo, hi),
                                           max_iter=self.max_iter))
            w, g = res.params[:k], res.params[k:]
            E, c = solve(res.params, k)
            resid = y - E @ c
        slowest = np.min(np.abs(w))
        if slowest > 0 and T * slowest / (2 * np.pi) < self.min_periods:
            raise InsufficientDataError(
                f"record covers {T * slowest / (2 * np.pi):.1f} periods of the "
                f"slowest component; need {self.min_periods}")
        p = res.params
        n = self.n_modes
        rel = np.linalg.norm(resid) / np.linalg.norm(y)
        if not np.isfinite(rel) or rel > self.residual_tol:
            raise FitFailureError(f"relative residual {rel:.2e} exceeds {self.residual_tol:.1e}")
        order = np.argsort(-np.abs(c), kind="stable")
        self.t0_ = t[0]
        self.frequencies_ = p[:n][order]
        self.damping_ = p[n:][order]
        self.amplitudes_ = c[order] * scale
        self.relative_residual_ = rel
        self.fit_result_ = res
        return self

    def predict(self, t):
        check_is_fitted(self, "frequencies_")
        tau = np.asarray(t, dtype=float) - self.t0_
        return np.exp(np.outer(tau, 1j * self.frequencies_ - self.damping_)) @ self.amplitudes_

    def _spectral_peaks(self, y, dt, n_peaks):
        n_fft = 1 << int(math.ceil(math.log2(len(y) * self.pad_factor)))
        spec = np.abs(np.fft.fft(y * np.hanning(len(y)), n_fft))
        freq = np.fft.fftfreq(n_fft, dt) * 2 * np.pi
        left, right = np.roll(spec, 1), np.roll(spec, -1)
        peaks = np.flatnonzero((spec > left) & (spec >= right))
        if peaks.size < n_peaks:
            raise FitFailureError(f"found {peaks.size} spectral peaks, expected {n_peaks}")
        peaks = peaks[np.argsort(-spec[peaks], kind="stable")][:n_peaks]
        out = []
        df = freq[1] - freq[0]
        for k in peaks:
            a, b, c = np.log(spec[[k - 1, k, (k + 1) % n_fft]] + 1e-300)
            denom = a - 2 * b + c
            shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
            out.append(freq[k] + shift * df)
        return np.array(out)


def correlation_model(p, tau, omega_excit):
    """exp(-a tau) [b + |c| sin(omega_excit tau - phi)] with p = (a, b, c, phi)."""
    a, b, c, phi = p
    return np.exp(-a * tau) * (b + abs(c) * np.sin(omega_excit * tau - phi))


class CorrelationFitter(BaseEstimator):
    """Fit a start-stop delay histogram.

    With ``omega_excit`` set the model is exp(-a t)[b + |c| sin(omega_excit t - phi)];
    with ``omega_excit=None`` it is the bare exponential b exp(-a t). Counts
    are weighted as Poisson variables, by the model of a first pass.
    """

    def __init__(self, omega_excit=None, max_iter=200, gtol=1e-6):
        self.omega_excit = omega_excit
        self.max_iter = max_iter
        self.gtol = gtol

    def fit(self, tau, counts):
        tau = check_1d("tau", tau, min_length=3)
        counts = check_1d("counts", counts)
        check_consistent_length(tau, counts)
        if np.any(counts < 0):
            raise InvalidConfigError("counts must be non-negative")
        if counts.sum() == 0:
            raise InsufficientDataError("histogram is empty")
        w_ex = self.omega_excit
        if w_ex is not None:
            if tau.size < 10:
                raise InsufficientDataError("need at least 10 bins")
            if (tau[-1] - tau[0]) * w_ex / (2 * np.pi) < 2:
                raise InsufficientDataError("histogram must span at least 2 modulation periods")

        p0 = self._initial(tau, counts)
        if w_ex is None:
            p0 = p0[:2]

            def model(p, x):
                return p[1] * np.exp(-p[0] * x)
        else:
            def model(p, x):
                return correlation_model(p, x, w_ex)

        weights = 1.0 / np.maximum(counts, 1.0)
        for _ in range(2):
            res = least_squares(FitProblem(model=model, x=tau, y=counts, p0=p0, weights=weights,
                                           max_iter=self.max_iter, gtol=self.gtol,
                                           absolute_sigma=True))
            p0 = res.params
            weights = 1.0 / np.maximum(model(p0, tau), 1e-3)
        if not res.converged:
            raise FitFailureError(f"correlation fit did not converge: {res.message}")
        p = res.params
        self.a_, self.b_ = p[0], p[1]
        if w_ex is None:
            self.c_, self.phi_ = 0.0, 0.0
        else:
            self.c_ = abs(p[2])
            self.phi_ = float(wrap_phase(p[3]))
        if not (self.a_ > 0 and self.b_ > 0):
            raise FitFailureError(f"unphysical fit: a={self.a_}, b={self.b_}")
        self.covariance_ = res.covariance
        self.stderr_ = np.sqrt(np.abs(np.diag(res.covariance)))
        self.residual_norm_ = math.sqrt(res.cost)
        self.fit_result_ = res
        return self

    def predict(self, tau):
        check_is_fitted(self, "a_")
        tau = np.asarray(tau, dtype=float)
        if self.omega_excit is None:
            return self.b_ * np.exp(-self.a_ * tau)
        return correlation_model((self.a_, self.b_, self.c_, self.phi_), tau, self.omega_excit)

    def _initial(self, tau, counts):
        good = counts > 0
        # log-linear envelope, Poisson-weighted
        slope, icpt = np.polyfit(tau[good], np.log(counts[good]), 1, w=np.sqrt(counts[good]))
        a = max(-slope, 1e-12 / max(tau[-1], 1e-300))
        env = np.exp(-a * tau)
        flat = counts / env
        b = np.average(flat, weights=env)
        if self.omega_excit is None:
            return np.array([a, b])
        rho = flat - b
        z = 2j * np.sum(env * rho * np.exp(-1j * self.omega_excit * tau)) / np.sum(env)
        c = abs(z)
        if c == 0:
            c = 1e-3 * b
        return np.array([a, b, c, -np.angle(z)])


def arctan_model(p, omega, sign):
    """phi0 + sign * arctan((omega - omega0) / gamma) with p = (phi0, omega0, gamma)."""
    return p[0] + sign * np.arctan((omega - p[1]) / p[2])


class ArctanPhaseFitter(BaseEstimator):
    """Fit the phase step of a driven damped resonance.

    The model is phi0 + s * arctan((omega - omega0) / gamma); gamma is the
    half-width of the step, i.e. the amplitude damping rate. s = +/-1 follows
    the sign of the overall slope. With ``free_height`` the step amplitude is a
    fourth parameter instead, so the total phase change is measured.
    """

    def __init__(self, free_height=False, min_points=5, gtol=1e-6):
        self.free_height = free_height
        self.min_points = min_points
        self.gtol = gtol

    def fit(self, omega, phase, sigma=None):
        omega = check_1d("omega", omega)
        phase = check_1d("phase", phase)
        check_consistent_length(omega, phase)
        if omega.size < self.min_points:
            raise FitFailureError(f"phase scan has {omega.size} valid points; need {self.min_points}")
        order = np.argsort(omega)
        omega, phase = omega[order], phase[order]
        if sigma is None:
            w = np.ones_like(phase)
        else:
            sigma = check_1d("sigma", sigma)[order]
            w = 1.0 / np.maximum(sigma, 1e-12) ** 2
        # fit on offsets from the grid centre to keep (omega - omega0) precise
        ref = 0.5 * (omega[0] + omega[-1])
        omega = omega - ref
        sign = 1.0 if phase[-1] >= phase[0] else -1.0
        slopes = np.diff(phase) / np.diff(omega)
        k = int(np.argmax(np.abs(slopes)))
        omega0 = 0.5 * (omega[k] + omega[k + 1])
        gamma0 = min(1.0 / abs(slopes[k]), 0.5 * np.ptp(omega))
        phi0 = 0.5 * (phase[0] + phase[-1])
        span = np.ptp(omega)
        lo = [-np.inf, omega[0] - span, 1e-9 * span]
        hi = [np.inf, omega[-1] + span, 10 * span]
        if self.free_height:
            def model(p, x):
                return p[0] + p[3] * np.arctan((x - p[1]) / p[2])
            p0 = [phi0, omega0, gamma0, sign]
            lo.append(-np.inf)
            hi.append(np.inf)
        else:
            def model(p, x):
                return arctan_model(p, x, sign)
            p0 = [phi0, omega0, gamma0]
        # analytic derivatives: a difference step on omega0 scaled by omega0
        # itself would be far wider than a narrow resonance
        def jac(p, x):
            h = p[3] if self.free_height else sign
            d = x - p[1]
            q = 1.0 / (p[2] ** 2 + d ** 2)
            cols = [np.ones_like(x), -h * p[2] * q, -h * d * q]
            if self.free_height:
                cols.append(np.arctan(d / p[2]))
            return np.column_stack(cols)

        res = least_squares(FitProblem(model=model, x=omega, y=phase, p0=p0, weights=w,
                                       bounds=(lo, hi), gtol=self.gtol, jac=jac,
                                       absolute_sigma=sigma is not None))
        if not res.converged:
            raise FitFailureError(f"arctan fit did not converge: {res.message}")
        p = res.params.copy()
        p[1] += ref
        self.offset_, self.resonance_, self.width_ = p[0], p[1], p[2]
        self.sign_ = sign if not self.free_height else float(np.sign(p[3]))
        self.height_ = np.pi * (abs(p[3]) if self.free_height else 1.0)
        self.covariance_ = res.covariance
        self.stderr_ = np.sqrt(np.abs(np.diag(res.covariance)))
        self._model = model
        self._params = p
        return self

    def predict(self, omega):
        check_is_fitted(self, "resonance_")
        return self._model(self._params, np.asarray(omega, dtype=float))


def crossing_branches(omega_a, omega_c, omega_m, coupling, M=0.0):
    """Near-magnetron dressed branches (lower, upper) versus drive frequency.

    coupling is epsilon/omega_1; M the cooling-strength parameter.
    """
    D = 0.5 * (np.asarray(omega_a, dtype=float) - omega_c)
    N = D ** 2 - 0.25 * M ** 2 + 0.25 * coupling ** 2
    root = np.hypot(N, D * M)
    s = np.where(N >= 0, N + root, (D * M) ** 2 / np.where(root - N > 0, root - N, 1.0))
    d0 = np.sqrt(0.5 * s)
    return np.stack([omega_m + D - d0, omega_m + D + d0], axis=-1)


class AvoidedCrossingRegressor(BaseEstimator):
    """Fit unlabeled branch frequencies measured against drive frequency.

    Each point is assigned to the nearer model branch and the assignment is
    iterated with the fit, so input labels and ordering do not matter. By
    default M is fixed to zero (strong-drive regime); ``fit_M`` frees it.

    Attributes after fitting: ``omega_c_``, ``omega_m_``, ``coupling_``
    (epsilon/omega_1), ``M_`` (magnitude only; the branches are even in M),
    ``covariance_``, ``labels_`` (0 lower, 1 upper).
    """

    def __init__(self, fit_M=False, ambiguity_tol=0.25, max_assign_iter=20):
        self.fit_M = fit_M
        self.ambiguity_tol = ambiguity_tol
        self.max_assign_iter = max_assign_iter

    def fit(self, omega_a, freq, omega_m_prior=None):
        x = check_1d("omega_a", omega_a, min_length=4)
        f = check_1d("freq", freq, min_length=4)
        check_consistent_length(x, f)
        order = np.lexsort((f, x))
        x, f = x[order], f[order]
        p0 = self._initial(x, f, omega_m_prior)
        labels = self._assign(x, f, p0)
        n_par = 4 if self.fit_M else 3

        for _ in range(self.max_assign_iter):
            lab = labels

            def model(p, xx):
                br = crossing_branches(xx, p[0], p[1], p[2], p[3] if n_par == 4 else 0.0)
                return br[np.arange(len(xx)), lab]

            res = least_squares(FitProblem(model=model, x=x, y=f, p0=p0[:n_par],
                                           max_iter=500))
            p0 = np.concatenate([res.params, p0[n_par:]])
            new = self._assign(x, f, p0)
            if np.array_equal(new, labels):
                break
            labels = new
        if not res.converged:
            raise FitFailureError(f"avoided-crossing fit did not converge: {res.message}")
        self._check_ambiguity(x, f, p0, res)
        p = res.params
        self.omega_c_, self.omega_m_ = p[0], p[1]
        self.coupling_ = abs(p[2])
        self.M_ = abs(p[3]) if self.fit_M else 0.0
        self.covariance_ = res.covariance
        self.stderr_ = np.sqrt(np.abs(np.diag(res.covariance)))
        self.labels_ = np.empty_like(labels)
        self.labels_[order] = labels
        self.fit_result_ = res
        return self

    def predict(self, omega_a):
        """(n, 2) array of (lower, upper) branch frequencies."""
        check_is_fitted(self, "omega_c_")
        return crossing_branches(omega_a, self.omega_c_, self.omega_m_, self.coupling_, self.M_)

    def _initial(self, x, f, omega_m_prior):
        xs, idx, cnt = np.unique(x, return_index=True, return_counts=True)
        pairs = [(xs[i], f[idx[i]], f[idx[i] + cnt[i] - 1]) for i in range(len(xs)) if cnt[i] >= 2]
        if not pairs:
            if omega_m_prior is None:
                raise InsufficientDataError("no drive frequency has both branches measured")
            # without a measured pair, start from the prior at the data centre
            return np.array([np.median(x), omega_m_prior, 0.5 * np.ptp(f) or 1.0, 0.0])
        seps = np.array([hi - lo for _, lo, hi in pairs])
        k = int(np.argmin(seps))
        xc, lo, hi = pairs[k]
        coupling = seps[k]
        if coupling <= 0:
            step = np.min(np.diff(xs)) if len(xs) > 1 else abs(xc) * 1e-6
            coupling = 1e-3 * step
        omega_m = 0.5 * (lo + hi)
        # the branches are even in M, so M = 0 is a stationary point; start off it
        return np.array([xc, omega_m, coupling, 0.1 * coupling])

    def _assign(self, x, f, p):
        br = crossing_branches(x, p[0], p[1], p[2], p[3] if self.fit_M else 0.0)
        return (np.abs(f - br[:, 1]) < np.abs(f - br[:, 0])).astype(int)

    def _check_ambiguity(self, x, f, p, res):
        br = crossing_branches(x, p[0], p[1], p[2], p[3] if self.fit_M else 0.0)
        sep = br[:, 1] - br[:, 0]
        r = np.sort(np.abs(f[:, None] - br), axis=1)
        noise = 3.0 * math.sqrt(res.cost / max(res.n_residuals - res.params.size, 1))
        bad = (sep > noise) & (r[:, 1] - r[:, 0] < self.ambiguity_tol * sep)
        if np.any(bad):
            raise BranchAmbiguousError(
                f"{int(bad.sum())} point(s) lie midway between branches; assignment is ambiguous")


@dataclass(frozen=True)
class AvoidedCrossingFit:
    omega_c: float
    omega_m: float
    coupling: float
    M: float
    covariance: np.ndarray
    stderr: np.ndarray
    labels: np.ndarray


def fit_avoided_crossing(omega_a, freq, modes_prior=None, *, fit_M=False, ambiguity_tol=0.25):
    """Functional front end of :class:`AvoidedCrossingRegressor`.

    ``modes_prior`` only supplies a fallback magnetron frequency for the
    initial guess.
    """
    prior = None if modes_prior is None else modes_prior.omega_m
    est = AvoidedCrossingRegressor(fit_M=fit_M, ambiguity_tol=ambiguity_tol).fit(
        omega_a, freq, omega_m_prior=prior)
    return AvoidedCrossingFit(omega_c=est.omega_c_, omega_m=est.omega_m_, coupling=est.coupling_,
                              M=est.M_, covariance=est.covariance_, stderr=est.stderr_,
                              labels=est.labels_)
