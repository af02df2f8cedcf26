"""Exponential-decay fits of the form a + b exp(-gamma t)."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitResult:
    a: float
    b: float
    gamma: float
    a_err: float
    b_err: float
    gamma_err: float
    residual_norm: float
    converged: bool
    baseline_fixed: bool = False
    indeterminate: bool = False

    @property
    def lifetime(self) -> float:
        return 1.0 / self.gamma if self.gamma > 0 else float("inf")

    @property
    def lifetime_err(self) -> float:
        return self.gamma_err / self.gamma**2 if self.gamma > 0 else float("inf")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lifetime"] = self.lifetime
        d["lifetime_err"] = self.lifetime_err
        return d


def _model(t, a, b, g):
    return a + b * np.exp(-g * t)


def _model_zero(t, b, g):
    return b * np.exp(-g * t)


def _std_errors(x, y, sigma, a, b, g, free_baseline: bool) -> tuple[float, float, float]:
    """Parameter standard errors from the Jacobian at the optimum, scaled by the residual variance."""
    e = np.exp(-g * x)
    cols = [np.ones_like(x)] if free_baseline else []
    jac = np.column_stack(cols + [e, -b * x * e])
    resid = y - (a + b * e)
    w = np.ones_like(x) if sigma is None else 1.0 / sigma
    jac, resid = jac * w[:, None], resid * w
    dof = len(x) - jac.shape[1]
    s_sq = float(resid @ resid) / dof if dof > 0 else float("inf")
    try:
        cov = np.linalg.inv(jac.T @ jac) * s_sq
    except np.linalg.LinAlgError:
        cov = np.full((jac.shape[1],) * 2, np.inf)
    err = list(np.sqrt(np.clip(np.diag(cov), 0, None)))
    if not free_baseline:
        err = [0.0] + err
    return err[0], err[1], err[2]


def fit_exp_decay(
    t: Sequence[float],
    y: Sequence[float],
    sigma: Optional[Sequence[float]] = None,
    baseline: Optional[float] = None,
    max_iter: int = 2000,
) -> FitResult:
    """Least-squares fit of a + b exp(-gamma t) (Levenberg-Marquardt).

    ``baseline`` fixes a (e.g. 0 for curves known to decay to zero).
    Standard errors come from the covariance at the optimum.  Data with no
    variation give an ``indeterminate`` result with gamma = nan.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-D arrays of equal length")
    if len(t) < 4:
        raise ValueError("fit_exp_decay needs at least 4 points")
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        sigma = None if np.any(sigma <= 0) else sigma
    base = 0.0 if baseline is None else float(baseline)
    if np.ptp(y) <= 1e-12 * max(1.0, np.abs(y).max()):
        nan = float("nan")
        return FitResult(float(y.mean()) if baseline is None else base, nan, nan, nan, nan, nan, 0.0, False, baseline is not None, True)

    t0 = t.min()
    span = max(t.max() - t0, np.finfo(float).tiny)
    # initial guess: first and last points set the amplitude, 1/e crossing the rate
    a0 = y[np.argmax(t)] if baseline is None else base
    b0 = y[np.argmin(t)] - a0
    target = a0 + b0 / np.e
    below = np.nonzero((y - target) * np.sign(b0 or 1.0) <= 0)[0]
    g0 = 1.0 / (t[below[0]] - t0) if len(below) and t[below[0]] > t0 else 1.0 / span
    x = t - t0
    try:
        with warnings.catch_warnings():
            # covariance is recomputed below; curve_fit's estimate is inf on exact data
            warnings.simplefilter("ignore", OptimizeWarning)
            if baseline is None:
                p, _ = curve_fit(_model, x, y, p0=(a0, b0, g0), sigma=sigma, method="lm", maxfev=max_iter)
                a, b, g = p
            else:
                p, _ = curve_fit(lambda x, b, g: base + _model_zero(x, b, g), x, y, p0=(b0, g0), sigma=sigma, method="lm", maxfev=max_iter)
                b, g = p
                a = base
    except RuntimeError as exc:
        raise FitError(f"fit did not converge: {exc}") from exc
    a_err, b_err, g_err = _std_errors(x, y, sigma, a, b, g, baseline is None)
    b = b * np.exp(g * t0)  # refer amplitude back to t = 0
    b_err = b_err * np.exp(g * t0)
    resid = y - _model(t, a, b, g)
    converged = bool(np.all(np.isfinite([a, b, g, a_err, b_err, g_err])) and g > 0)
    return FitResult(float(a), float(b), float(g), float(a_err), float(b_err), float(g_err), float(np.linalg.norm(resid)), converged, baseline is not None)
