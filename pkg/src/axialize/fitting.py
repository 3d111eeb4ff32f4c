"""Damped Gauss-Newton (Levenberg-Marquardt) least squares.

Residuals are ``sqrt(w) * (model(p, x) - y)``; complex models are fitted on
the stacked real and imaginary parts. Jacobians are central differences with
a relative step unless the problem supplies an analytic one; the step never
drops below ``rel_step * x_scale`` so parameters sitting at zero still get a
usable derivative.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import InsufficientDataError, InvalidConfigError, SingularJacobianError

# relative residual below which noiseless data counts as fitted exactly; the
# abscissae themselves carry rounding error of this order
EXACT_FIT = 1e-10


@dataclass
class FitProblem:
    model: Callable
    x: np.ndarray
    y: np.ndarray
    p0: np.ndarray
    weights: Optional[np.ndarray] = None
    bounds: Optional[tuple] = None
    jac: Optional[Callable] = None
    gtol: float = 1e-8
    xtol: float = 1e-12
    ftol: float = 1e-15
    max_iter: int = 200
    rel_step: float = 1e-6
    absolute_sigma: bool = False
    x_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        self.p0 = np.atleast_1d(np.asarray(self.p0, dtype=float))
        if self.x_scale is None:
            self.x_scale = np.ones_like(self.p0)
        self.x_scale = np.broadcast_to(np.asarray(self.x_scale, dtype=float), self.p0.shape)
        self.y = np.asarray(self.y)
        if self.weights is None:
            self.weights = np.ones(self.y.shape, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != self.y.shape:
            raise InvalidConfigError("weights must match the data shape")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise InvalidConfigError("weights must be finite and > 0")
        n_res = self.y.size * (2 if np.iscomplexobj(self.y) else 1)
        if n_res < self.p0.size:
            raise InsufficientDataError(
                f"{n_res} residuals cannot determine {self.p0.size} parameters")
        if self.bounds is not None:
            lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), self.p0.shape)
                      for b in self.bounds)
            if np.any(self.p0 < lo) or np.any(self.p0 > hi):
                raise InvalidConfigError("initial parameters outside bounds")
            self.bounds = (lo, hi)


@dataclass
class FitResult:
    params: np.ndarray
    covariance: np.ndarray
    cost: float  # weighted residual sum of squares
    iterations: int
    converged: bool
    grad_norm: float
    n_residuals: int
    message: str = ""
    residuals: np.ndarray = field(default=None, repr=False)

    @property
    def stderr(self):
        return np.sqrt(np.diag(self.covariance))


def _stack(z):
    if np.iscomplexobj(z):
        return np.concatenate([z.real.ravel(), z.imag.ravel()])
    return np.asarray(z, dtype=float).ravel()


def least_squares(problem):
    pr = problem
    sw = np.sqrt(pr.weights)

    def resid(p):
        return _stack(sw * (pr.model(p, pr.x) - pr.y))

    if pr.jac is not None:
        def jac(p, r0):
            J = np.asarray(pr.jac(p, pr.x))
            J = J * sw.reshape(sw.shape + (1,) * (J.ndim - sw.ndim))
            return np.concatenate([J.real, J.imag]) if np.iscomplexobj(J) else J
    else:
        def jac(p, r0):
            cols = []
            for j in range(p.size):
                h = pr.rel_step * max(abs(p[j]), pr.x_scale[j])
                pp = p.copy()
                pm = p.copy()
                pp[j] += h
                pm[j] -= h
                cols.append((resid(pp) - resid(pm)) / (pp[j] - pm[j]))
            return np.column_stack(cols)

    def clip(p):
        if pr.bounds is None:
            return p
        return np.clip(p, pr.bounds[0], pr.bounds[1])

    p = pr.p0.copy()
    r = resid(p)
    if not np.all(np.isfinite(r)):
        raise InvalidConfigError("model is not finite at the initial parameters")
    cost = float(r @ r)
    J = jac(p, r)
    n_par = p.size
    if np.linalg.matrix_rank(J) < n_par:
        raise SingularJacobianError(
            "Jacobian is rank deficient at the initial parameters; "
            "some parameters have no effect on the model")
    data_scale = float(np.linalg.norm(_stack(sw * pr.y))) or 1.0
    D = np.sqrt(np.sum(J * J, axis=0))
    D[D == 0] = 1.0
    # Start undamped: the first step is pure Gauss-Newton, damping is added
    # only after a rejected step.
    lam = 0.0
    nu = 2.0
    message = "maximum iterations reached"
    n_steps = 0
    eps_floor = 100.0 * np.finfo(float).eps * np.sqrt(r.size) * data_scale

    def gtol_at(res):
        # the cosine test cannot beat the rounding of the residuals themselves;
        # the factor 100 covers rounding inside the model evaluation
        rn = np.linalg.norm(res)
        return max(pr.gtol, eps_floor / rn) if rn > 0 else pr.gtol

    for _ in range(pr.max_iter):
        g = J.T @ r
        gnorm = _scaled_gradient(J, r, g)
        if gnorm <= gtol_at(r):
            message = "gradient tolerance reached"
            break
        if np.sqrt(cost) <= 1e-15 * data_scale:
            message = "residual vanished"
            break
        D = np.maximum(D, np.sqrt(np.sum(J * J, axis=0)))
        A = np.vstack([J, np.sqrt(lam) * np.diag(D)])
        b = np.concatenate([-r, np.zeros(n_par)])
        step, *_ = np.linalg.lstsq(A, b, rcond=None)
        p_new = clip(p + step)
        step = p_new - p
        r_new = resid(p_new)
        cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
        predicted = -(2.0 * g @ step + np.sum((J @ step) ** 2))
        if cost_new < cost:
            rho = (cost - cost_new) / predicted if predicted > 0 else 1.0
            lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            n_steps += 1
            small_step = np.all(np.abs(step) <= pr.xtol * (np.abs(p) + pr.xtol))
            small_gain = (cost - cost_new) <= pr.ftol * cost
            p, r, cost = p_new, r_new, cost_new
            J = jac(p, r)
            if small_step or small_gain:
                message = "step tolerance reached" if small_step else "cost tolerance reached"
                break
        else:
            lam = max(lam * nu, 1e-3)
            nu *= 2.0
            if lam > 1e16:
                message = "damping diverged; no further decrease possible"
                break
    gnorm = _scaled_gradient(J, r, J.T @ r)
    # An exact fit leaves rounding-noise residuals whose direction is arbitrary.
    converged = bool(gnorm <= gtol_at(r) or np.sqrt(cost) <= EXACT_FIT * data_scale)
    n_res = r.size
    JTJ = J.T @ J
    cov = np.linalg.pinv(JTJ)
    null = np.abs(np.diag(cov) * np.diag(JTJ)) > 1e12
    if not pr.absolute_sigma:
        dof = n_res - n_par
        cov = cov * (cost / dof) if dof > 0 else np.full_like(cov, np.inf)
    cov[null, :] = np.inf
    cov[:, null] = np.inf
    return FitResult(params=p, covariance=cov, cost=cost, iterations=n_steps,
                     converged=converged, grad_norm=float(gnorm), n_residuals=n_res,
                     message=message, residuals=r)


def _scaled_gradient(J, r, g):
    """max_j |J_j . r| / (|J_j| |r|): the cosine between residual and columns."""
    rn = np.linalg.norm(r)
    if rn == 0:
        return 0.0
    cn = np.sqrt(np.sum(J * J, axis=0))
    cn[cn == 0] = np.inf
    return float(np.max(np.abs(g) / (cn * rn)))
