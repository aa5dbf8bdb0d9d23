"""Shared nonlinear least-squares engine.

Every fit in the package (waist inversion, transmission scans, beam profiles,
spot localization) goes through :func:`least_squares_fit`.  It wraps the
Levenberg-Marquardt solver in :mod:`scipy.optimize` with a fixed termination
policy: relative step below ``1e-8`` or 200 iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

XTOL = 1e-8
MAX_ITERATIONS = 200


class FitError(RuntimeError):
    """Raised when a fit fails to converge; carries residual diagnostics."""

    def __init__(self, message: str, residual_norm: float = float("nan"), nfev: int = 0):
        super().__init__(f"{message} (residual norm {residual_norm:.3g}, {nfev} evaluations)")
        self.residual_norm = residual_norm
        self.nfev = nfev


@dataclass
class FitOutcome:
    params: np.ndarray
    uncertainties: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    nfev: int
    message: str = ""
    dof: int = 0
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def reduced_chi2(self) -> float:
        if self.dof <= 0:
            return float("nan")
        return self.residual_norm**2 / self.dof


def least_squares_fit(
    residual: Callable[[np.ndarray], np.ndarray],
    p0: Sequence[float],
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    absolute_sigma: bool = False,
    x_scale: Optional[Sequence[float]] = None,
) -> FitOutcome:
    """Minimise ``sum(residual(p)**2)`` starting from ``p0``.

    ``residual`` should already be weighted (divided by the measurement
    errors).  With ``absolute_sigma=False`` the covariance is rescaled by the
    reduced chi-square, as is customary when the error bars are only known up
    to a factor.  Without ``jac`` a two-point finite-difference Jacobian is
    used.
    """
    p0 = np.asarray(p0, dtype=float)
    n = p0.size
    res = least_squares(
        residual,
        p0,
        jac=jac if jac is not None else "2-point",
        method="lm",
        xtol=XTOL,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=MAX_ITERATIONS * (n + 1),
        x_scale=np.asarray(x_scale, dtype=float) if x_scale is not None else 1.0,
    )
    r = np.asarray(res.fun, dtype=float)
    m = r.size
    dof = m - n
    norm = float(np.sqrt(np.sum(r**2)))
    J = np.atleast_2d(res.jac)
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((n, n), np.inf)
    if not absolute_sigma:
        cov = cov * (norm**2 / dof if dof > 0 else np.inf)
    diag = np.diag(cov).copy()
    diag[~np.isfinite(diag)] = np.inf
    unc = np.sqrt(np.clip(diag, 0.0, None))
    converged = bool(res.status > 0) and np.all(np.isfinite(res.x)) and np.isfinite(norm)
    return FitOutcome(
        params=np.asarray(res.x, dtype=float),
        uncertainties=unc,
        covariance=cov,
        residual_norm=norm,
        converged=converged,
        nfev=int(res.nfev),
        message=str(res.message),
        dof=dof,
        residuals=r,
    )
