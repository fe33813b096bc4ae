import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearModel:
    """y = intercept + coef . x"""

    coef: np.ndarray
    intercept: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef + self.intercept

    def to_state(self) -> dict:
        return {"coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_state(cls, state: dict) -> "LinearModel":
        return cls(coef=np.asarray(state["coef"], dtype=float), intercept=float(state["intercept"]))

    def describe(self) -> dict:
        return {"n_coef": int(self.coef.size),
                "n_nonzero": int(np.count_nonzero(self.coef)),
                "intercept": self.intercept}


def _centre(X, y):
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    return X - x_mean, y - y_mean, x_mean, y_mean


def fit_ols(X, y) -> LinearModel:
    """Least squares through an SVD-based solver; rank-deficient designs get the minimum-norm solution."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    Xc, yc, x_mean, y_mean = _centre(X, y)
    coef, _, rank, _ = linalg.lstsq(Xc, yc, lapack_driver="gelsd")
    if rank < X.shape[1]:
        log.debug("OLS design is rank deficient (rank %d < %d)", rank, X.shape[1])
    return LinearModel(coef=coef, intercept=y_mean - float(x_mean @ coef))


def fit_elastic_net(X, y, lambda1: float, lambda2: float, tol: float = 1e-10,
                    max_iter: int = 10000, standardize: bool = True):
    """Cyclic coordinate descent on

        1/2 ||y - b - Zw||^2 + lambda1 ||w||_1 + lambda2 ||w||_2^2

    where Z holds the centred columns, divided by their standard deviation
    when `standardize` is set (constant columns are left unscaled). The
    coefficients are mapped back to the original scale. Returns
    (model, warnings); hitting `max_iter` before the largest coefficient
    change drops below `tol` is a warning.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    Xc, yc, x_mean, y_mean = _centre(X, y)
    scale = np.ones(X.shape[1])
    if standardize:
        scale = Xc.std(axis=0)
        scale[scale == 0] = 1.0
    Z = Xc / scale
    n, d = Z.shape
    col_sq = np.einsum("ij,ij->j", Z, Z)
    denom = col_sq + 2.0 * lambda2
    w = np.zeros(d)
    residual = yc.copy()
    warnings = []
    converged = False
    for sweep in range(max_iter):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0:
                continue
            old = w[j]
            rho = Z[:, j] @ residual + col_sq[j] * old
            new = np.sign(rho) * max(abs(rho) - lambda1, 0.0) / denom[j]
            if new != old:
                residual -= Z[:, j] * (new - old)
                w[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < tol:
            converged = True
            break
    if not converged:
        message = (f"coordinate descent did not converge in {max_iter} sweeps "
                   f"(last max change {max_delta:.3g})")
        log.warning(message)
        warnings.append(message)
    else:
        log.debug("Coordinate descent converged after %d sweeps", sweep + 1)
    coef = w / scale
    return LinearModel(coef=coef, intercept=y_mean - float(x_mean @ coef)), warnings


def fit_lasso(X, y, lam: float, tol: float = 1e-10, max_iter: int = 10000,
              standardize: bool = True):
    return fit_elastic_net(X, y, lam, 0.0, tol=tol, max_iter=max_iter, standardize=standardize)


def fit_sgd(X, y, learning_rate: float, epochs: int, rng: np.random.Generator) -> LinearModel:
    """Per-sample gradient descent w <- w + lr (y_i - w.x_i) x_i in shuffled order.

    Runs on standardised features and target; the coefficients are mapped
    back to the original scale.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    x_mean = X.mean(axis=0)
    x_std = X.std(axis=0)
    x_std[x_std == 0] = 1.0
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    Z = (X - x_mean) / x_std
    t = (y - y_mean) / y_std

    w = np.zeros(X.shape[1])
    b = 0.0
    for epoch in range(epochs):
        for i in rng.permutation(X.shape[0]):
            err = t[i] - (Z[i] @ w + b)
            w += learning_rate * err * Z[i]
            b += learning_rate * err
    coef = w * y_std / x_std
    intercept = y_mean + y_std * b - float(coef @ x_mean)
    return LinearModel(coef=coef, intercept=intercept)
