"""Fringe fitting and the physical fits built on top of it.

``fit_fringe`` maximises the binomial likelihood of Ramsey counts under
``p(phi) = (1 - gamma)/2 * (1 + C cos(Phi + phi))``. Contrast and loss are
optimised as ``C = sin(u)**2`` and ``gamma = sin(v)**2``, which keeps them
inside [0, 1] while still reaching the boundaries at finite parameter values.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import least_squares

from .constants import HBAR, TimingParams
from .measurement import FringeData
from .paths import diamond_area_factor

_P_EPS = 1e-15


class DegenerateGridError(ValueError):
    pass


class UnderdeterminedError(ValueError):
    pass


@dataclass
class FringeFit:
    Phi_hat: float
    C_hat: float
    gamma_hat: float
    covariance: np.ndarray  # order (Phi, C, gamma)
    log_likelihood: float
    converged: bool
    iterations: int = 0
    degenerate: bool = False

    @property
    def sigma_Phi(self) -> float:
        return float(math.sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self) -> dict:
        return {
            "Phi_hat": self.Phi_hat,
            "C_hat": self.C_hat,
            "gamma_hat": self.gamma_hat,
            "sigmas": self.sigmas.tolist(),
            "covariance": self.covariance.tolist(),
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
            "degenerate": self.degenerate,
        }


def wrap_phase(phi):
    """Map to the principal branch (-pi, pi]."""
    w = np.mod(np.asarray(phi, float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def initial_fringe_guess(data: FringeData) -> tuple[float, float, float]:
    phi = data.phi_grid
    distinct = np.unique(np.round(np.mod(phi, 2 * np.pi), 12))
    span = _circular_span(distinct)
    if distinct.size < 4 or not span > np.pi:
        raise DegenerateGridError(
            f"need >= 4 distinct phase points spanning more than pi, got {distinct.size} spanning {span:.3g}"
        )
    y = data.fractions
    mean = float(np.mean(y))
    yc = y - mean
    cs, sn = np.cos(phi), np.sin(phi)
    a = float(np.sum(yc * cs))
    b = float(np.sum(yc * sn))
    Phi0 = math.atan2(-b, a)
    # least-squares first-harmonic amplitude; equals 2/N * |sum| on a uniform grid
    design = np.column_stack([np.ones_like(phi), cs, sn])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    offset, amp = coef[0], math.hypot(coef[1], coef[2])
    gamma0 = float(np.clip(1 - 2 * offset, 0.0, 0.99))
    C0 = float(np.clip(amp / max(offset, 1e-12), 0.0, 1.0))
    return Phi0, C0, gamma0


def _circular_span(angles: np.ndarray) -> float:
    """Length of the smallest arc containing all angles (in [0, 2 pi))."""
    if angles.size < 2:
        return 0.0
    a = np.sort(angles)
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
    return float(2 * np.pi - gaps.max())


def _prob_and_jac(Phi, C, gamma, phi):
    psi = Phi + phi
    c, s = np.cos(psi), np.sin(psi)
    A = (1 - gamma) / 2
    p = A * (1 + C * c)
    jac = np.column_stack([-A * C * s, A * c, -(1 + C * c) / 2])
    return p, jac, c, s


def _loglik(p, s, n):
    p = np.clip(p, _P_EPS, 1 - _P_EPS)
    return float(np.sum(s * np.log(p) + (n - s) * np.log1p(-p)))


def _observed_information(Phi, C, gamma, data: FringeData) -> np.ndarray:
    phi, s, n = data.phi_grid, data.successes, data.shots
    p, J, c, sn = _prob_and_jac(Phi, C, gamma, phi)
    p = np.clip(p, _P_EPS, 1 - _P_EPS)
    A = (1 - gamma) / 2
    r1 = s / p - (n - s) / (1 - p)
    r2 = s / p**2 + (n - s) / (1 - p) ** 2
    H2 = np.zeros((len(phi), 3, 3))
    H2[:, 0, 0] = -A * C * c
    H2[:, 0, 1] = H2[:, 1, 0] = -A * sn
    H2[:, 0, 2] = H2[:, 2, 0] = C * sn / 2
    H2[:, 1, 2] = H2[:, 2, 1] = -c / 2
    hess = -np.einsum("i,ij,ik->jk", r2, J, J) + np.einsum("i,ijk->jk", r1, H2)
    return -hess


def _expected_information(Phi, C, gamma, data: FringeData) -> np.ndarray:
    p, J, _, _ = _prob_and_jac(Phi, C, gamma, data.phi_grid)
    p = np.clip(p, _P_EPS, 1 - _P_EPS)
    w = data.shots / (p * (1 - p))
    return np.einsum("i,ij,ik->jk", w, J, J)


def _covariance(Phi, C, gamma, data) -> np.ndarray:
    for info in (_observed_information(Phi, C, gamma, data), _expected_information(Phi, C, gamma, data)):
        try:
            evals = np.linalg.eigvalsh(info)
            if evals.min() > 1e-12 * max(evals.max(), 1e-300):
                cov = np.linalg.inv(info)
                return 0.5 * (cov + cov.T)
        except np.linalg.LinAlgError:
            pass
    # boundary fits: pseudo-inverse of the expected information, projected to PSD
    cov = np.linalg.pinv(_expected_information(Phi, C, gamma, data))
    evals, evecs = np.linalg.eigh(0.5 * (cov + cov.T))
    return (evecs * np.clip(evals, 0.0, None)) @ evecs.T


def fit_fringe(data: FringeData, guess=None, max_iter: int = 100, tol: float = 1e-10) -> FringeFit:
    """Binomial maximum-likelihood fit of (Phi, C, gamma) by damped Gauss-Newton.

    Counts may be fractional (expected counts), which is how noiseless data is fitted.
    Non-convergence is reported through ``converged``; degenerate data (all
    detections zero or all full) through ``degenerate``.
    """
    if guess is None:
        guess = initial_fringe_guess(data)
    Phi, C, gamma = map(float, guess)
    if not all(math.isfinite(v) for v in (Phi, C, gamma)):
        raise ValueError("initial guess must be finite")
    s, n, phi = data.successes.astype(float), data.shots.astype(float), data.phi_grid
    degenerate = bool(np.all(s == 0) or np.all(s == n))

    # interior start keeps the sin^2 maps away from their flat points
    C = min(max(C, 0.05), 0.95)
    gamma = min(max(gamma, 0.01), 0.95)
    theta = np.array([Phi, math.asin(math.sqrt(C)), math.asin(math.sqrt(gamma))])

    def natural(th):
        return th[0], math.sin(th[1]) ** 2, math.sin(th[2]) ** 2

    def objective(th):
        P, Cc, g = natural(th)
        return _loglik(_prob_and_jac(P, Cc, g, phi)[0], s, n)

    ll = objective(theta)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        P, Cc, g = natural(theta)
        p, J, _, _ = _prob_and_jac(P, Cc, g, phi)
        p = np.clip(p, _P_EPS, 1 - _P_EPS)
        chain = np.array([1.0, math.sin(2 * theta[1]), math.sin(2 * theta[2])])
        Jt = J * chain
        grad = Jt.T @ ((s - n * p) / (p * (1 - p)))
        F = np.einsum("i,ij,ik->jk", n / (p * (1 - p)), Jt, Jt)
        scale = np.diag(F).copy()
        scale = np.maximum(scale, 1e-12 * max(scale.max(), 1e-300))
        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(F + lam * np.diag(scale), grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = theta + step
            ll_trial = objective(trial)
            if ll_trial >= ll - 1e-12 * abs(ll):
                accepted = True
                break
            lam *= 10
        if not accepted:
            break
        moved = np.subtract(natural(trial), natural(theta))
        theta, ll = trial, ll_trial
        lam = max(lam / 10, 1e-12)
        # measured on (Phi, C, gamma); the sin^2 coordinates crawl near the bounds
        if np.max(np.abs(moved)) < tol:
            converged = True
            break
    P, Cc, g = natural(theta)
    Phi_hat = wrap_phase(P)
    cov = _covariance(Phi_hat, Cc, g, data)
    return FringeFit(Phi_hat, Cc, g, cov, objective(theta), converged, it, degenerate)


def fit_fringe_lsq(data: FringeData, guess=None) -> FringeFit:
    """Cross-check fit: minimum Pearson chi-square on the detected fractions."""
    if guess is None:
        guess = initial_fringe_guess(data)
    phi, y, n = data.phi_grid, data.fractions, data.shots

    def resid(x):
        p = (1 - x[2]) / 2 * (1 + x[1] * np.cos(x[0] + phi))
        p = np.clip(p, 1e-9, 1 - 1e-9)
        return (y - p) / np.sqrt(p * (1 - p) / n)

    x0 = np.array([guess[0], min(max(guess[1], 0.0), 1.0), min(max(guess[2], 0.0), 1.0)])
    res = least_squares(resid, x0, bounds=([-np.inf, 0.0, 0.0], [np.inf, 1.0, 1.0]), xtol=1e-14, ftol=1e-14)
    Phi, C, g = res.x
    Phi = wrap_phase(Phi)
    cov = _covariance(Phi, C, g, data)
    s = data.successes
    return FringeFit(Phi, float(C), float(g), cov, _loglik(_prob_and_jac(Phi, C, g, phi)[0], s, n), bool(res.success), int(res.nfev))


# ---------------------------------------------------------------------------
# Phase series


@dataclass
class UnwrapResult:
    phases: np.ndarray
    flagged: list  # indices where two branches were nearly equidistant from the prediction


def unwrap_phase_series(n_list, wrapped, timing: TimingParams | None = None, d: float | None = None,
                        ambiguity: float = 0.1) -> UnwrapResult:
    """Unwrap diamond phases measured at increasing shift counts.

    Each point takes the ``2 pi`` branch closest to a polynomial continuation
    (quadratic in ``n/2`` once three points are known, linear before that) of
    the points already unwrapped. The first point goes to the branch nearest
    zero. A point is flagged when the two closest branches are within
    ``ambiguity`` rad of being equally close. ``timing`` and ``d`` are accepted
    for interface symmetry with :func:`fit_gradient` and are not needed.
    """
    m = np.asarray(n_list, float) / 2
    w = np.asarray(wrapped, float)
    if m.shape != w.shape:
        raise ValueError("n_list and wrapped must have the same length")
    if np.any(np.diff(m) <= 0):
        raise ValueError("n_list must be strictly ascending")
    out = np.zeros_like(w)
    flagged = []
    for i in range(len(w)):
        if i == 0:
            pred = 0.0
        elif i == 1:
            pred = out[0]
        else:
            deg = min(2, i - 1)
            coef = np.polyfit(m[:i], out[:i], deg)
            pred = float(np.polyval(coef, m[i]))
        k = (pred - w[i]) / (2 * np.pi)
        k_near = round(k)
        out[i] = w[i] + 2 * np.pi * k_near
        # distance gap between nearest and second-nearest branch
        gap = 2 * np.pi * (1 - 2 * abs(k - k_near))
        if gap < ambiguity:
            flagged.append(i)
    return UnwrapResult(out, flagged)


@dataclass
class GradientFit:
    gradU_hat: float  # J/m
    sigma: float
    chi2_per_dof: float
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def fit_gradient(n_list, phases, phase_sigmas, timing: TimingParams, d: float) -> GradientFit:
    """Weighted least squares of diamond phases against ``gradU``; the model is linear so this is closed form."""
    n_list = list(n_list)
    y = np.asarray(phases, float)
    sig = np.asarray(phase_sigmas, float)
    if len(n_list) < 3 or y.size != len(n_list) or sig.size != len(n_list):
        raise UnderdeterminedError("need at least 3 points with matching phases and sigmas")
    if np.any(~(sig > 0)):
        raise ValueError("phase sigmas must be positive")
    k = np.array([d * diamond_area_factor(n, timing) / HBAR for n in n_list])
    w = 1 / sig**2
    info = float(np.sum(w * k * k))
    G = float(np.sum(w * k * y) / info)
    chi2 = float(np.sum(w * (y - G * k) ** 2))
    return GradientFit(G, 1 / math.sqrt(info), chi2 / (len(n_list) - 1), len(n_list))


def fit_slope(x_list, phases, sigmas=None) -> tuple[float, float]:
    """Weighted straight-line fit with free intercept; returns ``(slope, sigma_slope)``.

    Without ``sigmas`` the slope error is scaled from the residual scatter.
    """
    x = np.asarray(x_list, float)
    y = np.asarray(phases, float)
    if x.size < 2 or x.size != y.size or np.ptp(x) == 0:
        raise UnderdeterminedError("need at least two distinct x values")
    if sigmas is None:
        w = np.ones_like(x)
    else:
        sig = np.asarray(sigmas, float)
        if np.any(~(sig > 0)):
            raise ValueError("sigmas must be positive")
        w = 1 / sig**2
    S, Sx, Sy = w.sum(), (w * x).sum(), (w * y).sum()
    Sxx, Sxy = (w * x * x).sum(), (w * x * y).sum()
    det = S * Sxx - Sx * Sx
    slope = (S * Sxy - Sx * Sy) / det
    var = S / det
    if sigmas is None:
        intercept = (Sy - slope * Sx) / S
        dof = x.size - 2
        var *= float(np.sum((y - slope * x - intercept) ** 2)) / dof if dof > 0 else 0.0
    return float(slope), float(math.sqrt(var))
