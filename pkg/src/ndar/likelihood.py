"""Gaussian quasi-log-likelihood of the NDAR(p, q) model and its analytic
first and second derivatives.

For node ``i`` at time ``t`` the regressors are

    z1 = (w_i'y_{t-1}, ..., w_i'y_{t-p}, y_{i,t-1}, ..., y_{i,t-q})
    z2 = (1, w_i'x_{t-1}, ..., w_i'x_{t-p}, x_{i,t-1}, ..., x_{i,t-q})

so that ``eps = y - z1'mu`` and ``h = z2'sigma``.  The per-observation
contribution is ``-(log h + eps**2 / h) / 2``.
"""
from __future__ import annotations

from typing import Any

import numpy as np

from ndar.exceptions import DomainError, ShapeError
from ndar.model import NdarParams, Panel
from ndar.network import Network

__all__ = [
    "LikelihoodWorkspace",
    "build_regressors",
    "loglik",
    "score",
    "hessian",
]

H_FLOOR = 1e-300


class LikelihoodWorkspace:
    """Lagged network aggregates and stacked regressors for one panel.

    Rows of ``z1``/``z2`` are ordered time-major: row ``(t - 1) * N + i``
    holds node ``i`` at time ``t``.

    Attributes
    ----------
    wy, wx : ndarray, shape (p, T, N)
        ``W y_{t-r}`` and ``W x_{t-r}`` for ``r = 1..p``.
    z1 : ndarray, shape (N T, p + q)
    z2 : ndarray, shape (N T, 1 + p + q)
    y : ndarray, shape (N T,)
    """

    def __init__(self, panel: Panel, net: Network, p: int, q: int):
        if panel.n_nodes != net.n_nodes:
            raise ShapeError(
                f"panel has {panel.n_nodes} columns but network has {net.n_nodes} nodes"
            )
        m = max(p, q)
        if panel.depth < m:
            raise ShapeError(f"presample depth {panel.depth} is below max(p, q) = {m}")
        self.p, self.q = p, q
        self.n_nodes, self.t_len = panel.n_nodes, panel.t_len
        full = panel.full()
        d, t_len = panel.depth, panel.t_len
        sq = full * full
        w = net.weights

        def lagged(arr: np.ndarray, r: int) -> np.ndarray:
            return arr[d - r:d - r + t_len]

        self.wy = np.stack([lagged(full, r) @ w.T for r in range(1, p + 1)]) if p else np.zeros((0, t_len, self.n_nodes))
        self.wx = np.stack([lagged(sq, r) @ w.T for r in range(1, p + 1)]) if p else np.zeros((0, t_len, self.n_nodes))
        n_obs = t_len * self.n_nodes
        cols1 = [self.wy[r] for r in range(p)] + [lagged(full, r) for r in range(1, q + 1)]
        cols2 = [np.ones((t_len, self.n_nodes))] + [self.wx[r] for r in range(p)] + [lagged(sq, r) for r in range(1, q + 1)]
        self.z1 = np.stack([c.reshape(n_obs) for c in cols1], axis=1) if cols1 else np.zeros((n_obs, 0))
        self.z2 = np.stack([c.reshape(n_obs) for c in cols2], axis=1)
        self.y = panel.observations.reshape(n_obs).copy()
        self.n_obs = n_obs
        self.k1 = p + q
        self.n_params = 2 * p + 2 * q + 1

    # ------------------------------------------------------------------
    def _split(self, theta: Any) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(theta, NdarParams):
            if (theta.p, theta.q) != (self.p, self.q):
                raise ShapeError(
                    f"params of order ({theta.p},{theta.q}) used with a ({self.p},{self.q}) workspace"
                )
            theta = theta.to_vector()
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ShapeError(f"theta must have length {self.n_params}")
        return theta[:self.k1], theta[self.k1:]

    def residuals(self, theta: Any) -> tuple[np.ndarray, np.ndarray]:
        """``eps`` and ``h`` for every (t, i), time-major.

        Raises
        ------
        DomainError
            If any ``h`` is not strictly positive and finite.
        """
        mu, sigma = self._split(theta)
        eps = self.y - self.z1 @ mu
        h = self.z2 @ sigma
        if not np.all(h > H_FLOOR) or not np.all(np.isfinite(h)):
            bad = int(np.flatnonzero(~(h > H_FLOOR))[0]) if np.any(~(h > H_FLOOR)) else -1
            t, i = divmod(bad, self.n_nodes)
            raise DomainError(
                f"conditional variance not positive at t={t + 1}, node={i} (h={h[bad]!r})"
            )
        return eps, h

    def loglik(self, theta: Any) -> float:
        eps, h = self.residuals(theta)
        return -0.5 * float(np.sum(np.log(h) + eps * eps / h))

    def loglik_terms(self, theta: Any) -> np.ndarray:
        """Per-period contributions ``L_t``, shape ``(T,)``."""
        eps, h = self.residuals(theta)
        return -0.5 * (np.log(h) + eps * eps / h).reshape(self.t_len, self.n_nodes).sum(axis=1)

    def score(self, theta: Any) -> np.ndarray:
        eps, h = self.residuals(theta)
        u = eps / h
        g_mu = self.z1.T @ u
        g_sigma = self.z2.T @ (0.5 * (u * eps - 1.0) / h)
        return np.concatenate([g_mu, g_sigma])

    def hessian(self, theta: Any) -> np.ndarray:
        eps, h = self.residuals(theta)
        inv_h = 1.0 / h
        k1 = self.k1
        out = np.empty((self.n_params, self.n_params))
        out[:k1, :k1] = -(self.z1 * inv_h[:, None]).T @ self.z1
        cross = -(self.z1 * (eps * inv_h * inv_h)[:, None]).T @ self.z2
        out[:k1, k1:] = cross
        out[k1:, :k1] = cross.T
        wss = inv_h * inv_h * (0.5 - eps * eps * inv_h)
        out[k1:, k1:] = (self.z2 * wss[:, None]).T @ self.z2
        # blocks are assembled symmetric; enforce exactly against BLAS rounding
        return 0.5 * (out + out.T)

    def fisher_information(self, theta: Any) -> np.ndarray:
        """Sum of ``Gamma Gamma'``: the expected negative Hessian, block diagonal."""
        _, h = self.residuals(theta)
        k1 = self.k1
        out = np.zeros((self.n_params, self.n_params))
        out[:k1, :k1] = (self.z1 / h[:, None]).T @ self.z1
        out[k1:, k1:] = (self.z2 * (0.5 / (h * h))[:, None]).T @ self.z2
        return 0.5 * (out + out.T)


def build_regressors(panel: Panel, net: Network, p: int, q: int) -> LikelihoodWorkspace:
    """Precompute the lagged aggregates used by loglik, score and hessian."""
    return LikelihoodWorkspace(panel, net, p, q)


def _workspace(panel: Panel, net: Network, params: NdarParams, ws: LikelihoodWorkspace | None) -> LikelihoodWorkspace:
    if ws is None:
        return LikelihoodWorkspace(panel, net, params.p, params.q)
    return ws


def loglik(panel: Panel, net: Network, params: NdarParams, ws: LikelihoodWorkspace | None = None) -> float:
    """Total quasi-log-likelihood ``sum_t L_t``."""
    return _workspace(panel, net, params, ws).loglik(params)


def score(panel: Panel, net: Network, params: NdarParams, ws: LikelihoodWorkspace | None = None) -> np.ndarray:
    """Gradient of :func:`loglik` in the flattened parameter order."""
    return _workspace(panel, net, params, ws).score(params)


def hessian(panel: Panel, net: Network, params: NdarParams, ws: LikelihoodWorkspace | None = None) -> np.ndarray:
    """Hessian of :func:`loglik` in the flattened parameter order."""
    return _workspace(panel, net, params, ws).hessian(params)
