"""Gaussian-kernel soft-margin SVM trained by SMO.

The solver minimizes ``0.5 a'Qa - sum(a)`` subject to ``0 <= a <= C`` and
``y'a = 0`` with ``Q = (y y') * K``, using maximal-violating-pair selection
for the first index and second-order gain for the second (the LIBSVM
working-set rule).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LabeledSet, TrainedModel

TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@dataclass
class SMOResult:
    alpha: np.ndarray
    rho: float
    grad: np.ndarray
    iterations: int
    converged: bool
    dual_objective: float


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int | None = None) -> SMOResult:
    """Solve the SVM dual for a precomputed kernel matrix."""
    n = y.size
    y = y.astype(np.float64)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q a - e
    diag = np.diag(K).copy()
    if max_iter is None:
        max_iter = max(10_000_000, 100 * n)
    it = 0
    converged = False
    while it < max_iter:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        viol = -y * grad
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, viol, -np.inf)))
        g_max = viol[i]
        g_min = np.where(low, viol, np.inf).min()
        if g_max - g_min < tol:
            converged = True
            break
        b = g_max - viol
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        cand = low & (b > 0)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))
        # move a_i by +y_i t and a_j by -y_j t, t > 0
        t = b[j] / a[j]
        lim_i = C - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min(t, lim_i, lim_j)
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        # land exactly on the box edge that stopped the step
        if t == lim_i:
            alpha[i] = C if y[i] > 0 else 0.0
        if t == lim_j:
            alpha[j] = 0.0 if y[j] > 0 else C
        grad += t * y * (K[:, i] - K[:, j])
        it += 1
    rho = _rho(alpha, grad, y, C)
    dual = float(0.5 * alpha @ (grad + 1.0) - alpha.sum())
    return SMOResult(alpha, rho, grad, it, converged, dual)


def _rho(alpha, grad, y, C):
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yg[free].mean())
    at_upper = alpha >= C
    ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lb_mask = ~ub_mask
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    if np.isinf(ub) or np.isinf(lb):
        return float(lb if np.isinf(ub) else ub)
    return float(0.5 * (ub + lb))


def dual_objective(alpha: np.ndarray, K: np.ndarray, y: np.ndarray) -> float:
    """``0.5 a'Qa - sum(a)`` (the minimized form)."""
    v = alpha * y
    return float(0.5 * v @ K @ v - alpha.sum())


def train_svm(
    data: LabeledSet,
    C: float = 1.0,
    gamma: float | None = None,
    tol: float = 1e-3,
    seed: int = 0,
    standardize: bool = False,
) -> TrainedModel:
    """Fit an RBF SVM; ``gamma`` defaults to ``1 / n_features``.

    With ``standardize`` the columns are z-scored using training statistics,
    which are stored with the model and reapplied at prediction time.
    """
    data.require_trainable()
    if C <= 0:
        raise ValueError("C must be positive")
    if not 0 < tol <= 0.1:
        raise ValueError("tol must lie in (0, 0.1]")
    X = data.X
    gamma = 1.0 / X.shape[1] if gamma is None else gamma
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    scaler = None
    if standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        X = (X - mean) / scale
        scaler = {"mean": mean.tolist(), "scale": scale.tolist()}
    K = rbf_kernel(X, X, gamma)
    res = smo(K, data.y, C, tol)
    sv = res.alpha > 0
    params = {
        "support_vectors": X[sv].tolist(),
        "dual_coef": (res.alpha[sv] * data.y[sv]).tolist(),
        "bias": -res.rho,
        "gamma": gamma,
        "n_iter": res.iterations,
        "converged": res.converged,
        "dual_objective": dual_objective(res.alpha, K, data.y),
        "scaler": scaler,
    }
    config = {"C": C, "gamma": gamma, "tol": tol, "standardize": standardize}
    return TrainedModel("svm", params, config, seed, data.spec_id)


def svm_scores(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    p = model.params
    if p.get("scaler"):
        X = (X - np.asarray(p["scaler"]["mean"])) / np.asarray(p["scaler"]["scale"])
    sv = np.asarray(p["support_vectors"], dtype=np.float64)
    if sv.size == 0:
        return np.full(X.shape[0], p["bias"])
    K = rbf_kernel(X, sv.reshape(-1, X.shape[1]), p["gamma"])
    return K @ np.asarray(p["dual_coef"]) + p["bias"]
