"""Closed-form linear regression and the two market loss functions.

The fit keeps the sufficient statistics (X'X, X'y, y'y, n) next to the
solution, so adding one labelled row is an O(p^3) re-solve that goes through
exactly the same code path as a fresh fit.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, EmptyDesign, SingularDesign

# ridge fallback: lambda = RIDGE_FACTOR * trace(X'X) / cols
RIDGE_FACTOR = 1e-6
COND_LIMIT = 1e10


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FitState:
    """Immutable result of a (possibly ridge-regularized) least squares fit.

    ``info_inverse`` is ``(X'X + ridge_lambda * I)^-1``. ``sigma2_hat`` is
    RSS / (rows - cols) when rows > cols; otherwise it is 0 and
    ``sigma2_degenerate`` is set.
    """

    beta: np.ndarray
    info_inverse: np.ndarray
    sigma2_hat: float
    ridge_lambda: float
    xtx: np.ndarray
    xty: np.ndarray
    yty: float
    n_rows: int
    sigma2_degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.beta.shape[0]

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim} columns, got {X.shape[1]}")
        return X @ self.beta


def _ridge_lambda(xtx, n_rows):
    cols = xtx.shape[0]
    if n_rows >= cols:
        try:
            cond = np.linalg.cond(xtx)
        except np.linalg.LinAlgError:
            cond = np.inf
        if np.isfinite(cond) and cond <= COND_LIMIT:
            return 0.0
    lam = RIDGE_FACTOR * float(np.trace(xtx)) / cols
    return lam


def _solve(xtx, xty, yty, n_rows, rss=None) -> FitState:
    cols = xtx.shape[0]
    lam = _ridge_lambda(xtx, n_rows)
    reg = xtx + lam * np.eye(cols) if lam > 0 else xtx
    try:
        chol = np.linalg.cholesky(reg)
    except np.linalg.LinAlgError:
        raise SingularDesign("information matrix not positive definite after ridge fallback")
    eye = np.eye(cols)
    lower_inv = np.linalg.solve(chol, eye)
    inv = lower_inv.T @ lower_inv
    inv = 0.5 * (inv + inv.T)
    beta = inv @ xty

    degenerate = n_rows <= cols
    if degenerate:
        sigma2 = 0.0
    else:
        if rss is None:
            rss = yty - 2.0 * beta @ xty + beta @ xtx @ beta
        sigma2 = max(float(rss), 0.0) / (n_rows - cols)
    return FitState(
        beta=_readonly(beta),
        info_inverse=_readonly(inv),
        sigma2_hat=sigma2,
        ridge_lambda=lam,
        xtx=_readonly(xtx),
        xty=_readonly(xty),
        yty=float(yty),
        n_rows=int(n_rows),
        sigma2_degenerate=degenerate,
    )


def _as_design(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionMismatch(f"design matrix must be 2-D with >= 1 column, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyDesign("design matrix has no rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("design matrix contains non-finite entries")
    if y is None:
        return X
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.shape[0]} responses")
    return X, y


def ols_fit(X, y) -> FitState:
    """Least squares fit of ``y`` on ``X`` with the ridge fallback.

    The ridge term is only added when X'X is ill-conditioned (condition number
    above 1e10) or there are fewer rows than columns.
    """
    X, y = _as_design(X, y)
    xtx = X.T @ X
    xty = X.T @ y
    yty = float(y @ y)
    fit = _solve(xtx, xty, yty, X.shape[0])
    if not fit.sigma2_degenerate:
        # direct residuals are more accurate than the sufficient-statistic form
        resid = y - X @ fit.beta
        sigma2 = float(resid @ resid) / (X.shape[0] - X.shape[1])
        fit = _replace_sigma2(fit, sigma2)
    return fit


def _replace_sigma2(fit, sigma2):
    return FitState(
        beta=fit.beta,
        info_inverse=fit.info_inverse,
        sigma2_hat=sigma2,
        ridge_lambda=fit.ridge_lambda,
        xtx=fit.xtx,
        xty=fit.xty,
        yty=fit.yty,
        n_rows=fit.n_rows,
        sigma2_degenerate=fit.sigma2_degenerate,
    )


def rank_one_refit(fit: FitState, x_new, y_new) -> FitState:
    """Return the fit obtained by appending the row ``(x_new, y_new)``."""
    x = np.asarray(x_new, dtype=float).ravel()
    if x.shape[0] != fit.dim:
        raise DimensionMismatch(f"new row has {x.shape[0]} entries, fit has {fit.dim}")
    y_new = float(y_new)
    xtx = fit.xtx + np.outer(x, x)
    xty = fit.xty + x * y_new
    yty = fit.yty + y_new * y_new
    return _solve(xtx, xty, yty, fit.n_rows + 1)


def param_variance_loss(fit: FitState, sigma2: Optional[float] = None) -> float:
    """Scalar parameter variance: trace(info_inverse) * sigma2.

    ``sigma2`` defaults to the fit's own residual variance; the market passes
    the value frozen at market start.
    """
    s2 = fit.sigma2_hat if sigma2 is None else float(sigma2)
    if s2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    return float(np.trace(fit.info_inverse)) * s2


def validation_mse(fit: FitState, Xval, yval) -> float:
    Xval, yval = _as_design(Xval, yval)
    if Xval.shape[1] != fit.dim:
        raise DimensionMismatch(f"validation has {Xval.shape[1]} columns, fit has {fit.dim}")
    resid = yval - Xval @ fit.beta
    return float(resid @ resid) / yval.shape[0]


class LossKind(str, Enum):
    PARAM_VARIANCE = "param_variance"
    VALIDATION_MSE = "validation_mse"


@dataclass(frozen=True, eq=False)
class LossSpec:
    """Which loss the market minimizes.

    ``validation`` is an ``(X, y)`` pair and is required for the MSE loss.
    """

    kind: LossKind = LossKind.PARAM_VARIANCE
    validation: Optional[tuple] = None

    def __post_init__(self):
        kind = LossKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is LossKind.VALIDATION_MSE:
            if self.validation is None:
                raise ValueError("validation MSE loss needs a validation set")
            Xv, yv = _as_design(*self.validation)
            object.__setattr__(self, "validation", (_readonly(Xv), _readonly(yv)))

    @classmethod
    def param_variance(cls):
        return cls(LossKind.PARAM_VARIANCE)

    @classmethod
    def mse(cls, Xval, yval):
        return cls(LossKind.VALIDATION_MSE, (Xval, yval))

    def evaluate(self, fit: FitState, sigma2: Optional[float] = None) -> float:
        if self.kind is LossKind.PARAM_VARIANCE:
            return param_variance_loss(fit, sigma2)
        return validation_mse(fit, *self.validation)
