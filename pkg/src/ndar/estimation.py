"""Box-constrained QMLE, sandwich covariance and Wald inference."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import linalg, stats

from ndar.exceptions import (
    DegenerateInferenceError,
    DomainError,
    ParameterError,
    ShapeError,
    SingularInformationError,
)
from ndar.likelihood import LikelihoodWorkspace
from ndar.model import NdarParams, Panel
from ndar.network import Network

__all__ = [
    "FitConfig",
    "FitResult",
    "fit",
    "initial_params",
    "sandwich_covariance",
    "wald_inference",
    "confidence_interval",
]

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class FitConfig:
    """Bounds and stopping rules for :func:`fit`.

    ``gtol`` applies to the sup-norm of the projected gradient of the
    *average* log-likelihood ``loglik / (N T)``.
    """

    floor_omega: float = 1e-10
    box_mean: float = 10.0
    upper_sigma: float = math.inf
    gtol: float = 1e-6
    xtol: float = 1e-14
    max_iter: int = 200
    n_starts: int = 1
    init: str = "ols"

    def __post_init__(self) -> None:
        if not self.floor_omega > 0:
            raise ParameterError("floor_omega must be > 0")
        if not (self.gtol > 0 and self.xtol > 0):
            raise ParameterError("tolerances must be > 0")
        if self.box_mean <= 0 or self.upper_sigma <= self.floor_omega:
            raise ParameterError("invalid parameter box")
        if self.n_starts < 1 or self.max_iter < 1:
            raise ParameterError("n_starts and max_iter must be >= 1")
        if self.init not in ("ols", "zero"):
            raise ParameterError(f"unknown init rule {self.init!r}")

    def bounds(self, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
        k1 = p + q
        k = 2 * k1 + 1
        lb = np.empty(k)
        ub = np.empty(k)
        lb[:k1], ub[:k1] = -self.box_mean, self.box_mean
        lb[k1] = self.floor_omega
        lb[k1 + 1:] = 0.0
        ub[k1:] = self.upper_sigma
        return lb, ub


@dataclass
class FitResult:
    theta_hat: NdarParams
    loglik: float
    covariance: np.ndarray
    std_errors: np.ndarray
    z_stats: np.ndarray
    p_values: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    d_hat: np.ndarray
    n_nodes: int
    t_len: int
    start_index: int = 0
    message: str = ""
    history: list[dict] = field(default_factory=list, repr=False)

    @property
    def p(self) -> int:
        return self.theta_hat.p

    @property
    def q(self) -> int:
        return self.theta_hat.q

    @property
    def names(self) -> list[str]:
        return self.theta_hat.names()

    def to_dict(self) -> dict:
        names = self.names
        theta = self.theta_hat.to_vector()
        return {
            "order": {"p": self.p, "q": self.q},
            "parameters": {
                name: {
                    "estimate": _num(theta[k]),
                    "std_error": _num(self.std_errors[k]),
                    "z": _num(self.z_stats[k]),
                    "p_value": _num(self.p_values[k]),
                }
                for k, name in enumerate(names)
            },
            "loglik": _num(self.loglik),
            "n_nodes": self.n_nodes,
            "t_len": self.t_len,
            "convergence": {
                "converged": self.converged,
                "iterations": self.iterations,
                "grad_norm": _num(self.grad_norm),
                "start_index": self.start_index,
                "message": self.message,
            },
            "d_hat": [[_num(v) for v in row] for row in np.asarray(self.d_hat)],
            "covariance": [[_num(v) for v in row] for row in np.asarray(self.covariance)],
        }

    def table(self) -> str:
        """Estimate (SE) and p-value per parameter."""
        lines = [f"{'Parameter':<10} {'Estimate':>12} {'(SE)':>12} {'p-value':>9}"]
        theta = self.theta_hat.to_vector()
        for k, name in enumerate(self.names):
            pv = self.p_values[k]
            ptxt = "nan" if not np.isfinite(pv) else ("<.001" if pv < 0.001 else f"{pv:.3f}")
            lines.append(
                f"{name:<10} {theta[k]:>12.4f} {'(' + format(self.std_errors[k], '.4f') + ')':>12} {ptxt:>9}"
            )
        lines.append(f"loglik = {self.loglik:.6f}   converged = {self.converged}   iterations = {self.iterations}")
        return "\n".join(lines)


def _num(v: float) -> float | None:
    v = float(v)
    return v if math.isfinite(v) else None


# ----------------------------------------------------------------------
# Optimizer

def initial_params(ws: LikelihoodWorkspace, config: FitConfig) -> np.ndarray:
    """Least-squares mean coefficients, residual variance for omega,
    0.01 for every phi and psi."""
    p, q = ws.p, ws.q
    lb, ub = config.bounds(p, q)
    if ws.k1 and config.init == "ols":
        mu, *_ = np.linalg.lstsq(ws.z1, ws.y, rcond=None)
    else:
        mu = np.zeros(ws.k1)
    resid = ws.y - ws.z1 @ mu
    omega = float(np.mean(resid * resid))
    theta = np.concatenate([mu, [omega], np.full(p + q, 0.01)])
    return np.clip(theta, lb, ub)


def _perturbed_start(base: np.ndarray, k1: int, index: int) -> np.ndarray:
    rng = np.random.default_rng(index)
    theta = base.copy()
    theta[:k1] += 0.1 * rng.standard_normal(k1)
    theta[k1] *= math.exp(0.5 * rng.standard_normal())
    theta[k1 + 1:] = rng.uniform(0.0, 0.3, size=theta.size - k1 - 1)
    return theta


def _projected_gradient(x: np.ndarray, g: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    """Gradient of the minimization objective with blocked directions zeroed."""
    pg = g.copy()
    pg[(x <= lb) & (g > 0)] = 0.0
    pg[(x >= ub) & (g < 0)] = 0.0
    return pg


def _minimize(
    ws: LikelihoodWorkspace,
    x0: np.ndarray,
    config: FitConfig,
) -> tuple[np.ndarray, float, bool, int, float, str]:
    """Projected Newton on ``-loglik / (N T)`` over the box.

    Free coordinates take a Newton step when the Hessian restricted to them
    is positive definite and a Fisher-scoring step otherwise; coordinates
    within ``eps`` of a bound with the gradient pushing outward are moved
    by a diagonally scaled gradient step.  The step is projected onto the
    box and backtracked until the Armijo condition holds.
    """
    lb, ub = config.bounds(ws.p, ws.q)
    n = ws.n_obs
    x = np.clip(np.asarray(x0, dtype=float), lb, ub)

    def fval(theta: np.ndarray) -> float:
        try:
            return -ws.loglik(theta) / n
        except DomainError:
            return math.inf

    f = fval(x)
    if not math.isfinite(f):
        return x, f, False, 0, math.inf, "infeasible start"
    g = -ws.score(x) / n
    message = "max_iter reached"
    converged = False
    it = 0
    gnorm = math.inf
    for it in range(config.max_iter + 1):
        pg = _projected_gradient(x, g, lb, ub)
        gnorm = float(np.max(np.abs(pg))) if pg.size else 0.0
        if gnorm < config.gtol:
            converged = True
            message = "projected gradient below tolerance"
            break
        if it == config.max_iter:
            break
        width = min(1e-3, gnorm)
        active = ((x - lb <= width) & (g > 0)) | ((ub - x <= width) & (g < 0))
        free = ~active
        hess = -ws.hessian(x) / n
        d = np.zeros_like(x)
        diag = np.diag(hess).copy()
        if np.any(free):
            hff = hess[np.ix_(free, free)]
            try:
                cf = linalg.cho_factor(hff, check_finite=True)
                d[free] = -linalg.cho_solve(cf, g[free])
            except (linalg.LinAlgError, ValueError):
                fisher = ws.fisher_information(x) / n
                diag = np.diag(fisher).copy()
                fff = fisher[np.ix_(free, free)]
                ridge = 1e-10 * max(1.0, float(np.max(np.abs(np.diag(fff)))))
                d[free] = -linalg.solve(fff + ridge * np.eye(fff.shape[0]), g[free], assume_a="pos")
        diag[diag <= 0] = 1.0
        d[active] = -g[active] / diag[active]

        step = 1.0
        accepted = False
        gn_new = None
        for _ in range(60):
            xn = np.clip(x + step * d, lb, ub)
            decrease = float(g @ (xn - x))
            if decrease >= 0 and step == 1.0:
                # projected Newton direction is not a descent direction here
                d = -g / diag
                xn = np.clip(x + step * d, lb, ub)
                decrease = float(g @ (xn - x))
            fn = fval(xn)
            if fn <= f + 1e-4 * decrease:
                accepted = True
                break
            if step == 1.0 and math.isfinite(fn) and -decrease < 1e-13 * max(1.0, abs(f)):
                # predicted decrease is below the resolution of f: judge the
                # full step by the projected gradient instead
                gn_new = -ws.score(xn) / n
                if np.max(np.abs(_projected_gradient(xn, gn_new, lb, ub))) < gnorm:
                    accepted = True
                    break
                gn_new = None
            step *= 0.5
        if not accepted:
            message = "line search failed"
            break
        moved = float(np.max(np.abs(xn - x)))
        x = xn
        f = fn
        g = gn_new if gn_new is not None else -ws.score(x) / n
        if moved <= config.xtol * (1.0 + float(np.max(np.abs(x)))):
            pg = _projected_gradient(x, g, lb, ub)
            gnorm = float(np.max(np.abs(pg))) if pg.size else 0.0
            converged = gnorm < config.gtol
            message = "projected gradient below tolerance" if converged else "step below xtol"
            it += 1
            break
    return x, f, converged, it, gnorm, message


def fit(
    panel: Panel,
    net: Network,
    p: int,
    q: int,
    config: FitConfig | None = None,
    start: NdarParams | None = None,
    ws: LikelihoodWorkspace | None = None,
) -> FitResult:
    """Quasi-maximum likelihood fit of an NDAR(p, q) model.

    Parameters
    ----------
    start : NdarParams, optional
        Replaces the default initial point for the first start.
    ws : LikelihoodWorkspace, optional
        Prebuilt regressors for ``(panel, net, p, q)``.

    Returns
    -------
    FitResult
        ``converged`` is False when no start met the gradient tolerance;
        the best point found is still reported.
    """
    config = config or FitConfig()
    if ws is None:
        ws = LikelihoodWorkspace(panel, net, p, q)
    elif (ws.p, ws.q) != (p, q):
        raise ShapeError("workspace order does not match (p, q)")
    k = 2 * p + 2 * q + 1
    if panel.t_len <= k:
        raise ParameterError(f"T = {panel.t_len} must exceed the parameter count {k}")
    base = initial_params(ws, config)
    starts = []
    for s in range(config.n_starts):
        if s == 0:
            starts.append(base if start is None else start.to_vector())
        else:
            starts.append(_perturbed_start(base, ws.k1, s))

    best = None
    history = []
    for idx, x0 in enumerate(starts):
        x, f, ok, iters, gnorm, msg = _minimize(ws, x0, config)
        history.append({"start": idx, "loglik": -f * ws.n_obs, "converged": ok, "iterations": iters})
        rank = (ok, -f)
        if best is None or rank > best[0]:
            best = (rank, idx, x, f, ok, iters, gnorm, msg)
    _, idx, x, f, ok, iters, gnorm, msg = best
    theta_hat = NdarParams.from_vector(x, p, q)
    nan_k = np.full(k, np.nan)
    cov = np.full((k, k), np.nan)
    d_hat = np.full((2, 2), np.nan)
    se, z, pv = nan_k, nan_k.copy(), nan_k.copy()
    try:
        cov, d_hat = sandwich_covariance(panel, net, theta_hat, ws=ws)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        z, pv = _wald(theta_hat, se)
    except SingularInformationError as exc:
        msg = f"{msg}; {exc}"
    except DegenerateInferenceError as exc:
        msg = f"{msg}; {exc}"
    return FitResult(
        theta_hat=theta_hat,
        loglik=-f * ws.n_obs,
        covariance=cov,
        std_errors=se,
        z_stats=z,
        p_values=pv,
        converged=ok,
        iterations=iters,
        grad_norm=gnorm,
        d_hat=d_hat,
        n_nodes=panel.n_nodes,
        t_len=panel.t_len,
        start_index=idx,
        message=msg,
        history=history,
    )


# ----------------------------------------------------------------------
# Inference

def moment_matrix(eps: np.ndarray, h: np.ndarray) -> np.ndarray:
    """2x2 matrix of standardized third and fourth residual moments."""
    n = eps.size
    s = eps / np.sqrt(h)
    d12 = float(np.sum(s ** 3)) / (math.sqrt(2.0) * n)
    d22 = float(np.sum(s ** 4)) / (2.0 * n) - 0.5
    return np.array([[1.0, d12], [d12, d22]])


def _condition(mat: np.ndarray) -> float:
    scale = np.sqrt(np.abs(np.diag(mat)))
    if np.any(scale == 0) or not np.all(np.isfinite(mat)):
        return math.inf
    return float(np.linalg.cond(mat / np.outer(scale, scale)))


def sandwich_covariance(
    panel: Panel,
    net: Network,
    theta_hat: NdarParams,
    ws: LikelihoodWorkspace | None = None,
    d_override: Any = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Robust covariance ``Omega^-1 Sigma Omega^-1 / (N T)`` of the QMLE.

    ``Omega`` averages ``Gamma Gamma'`` and ``Sigma`` averages
    ``Gamma D Gamma'`` over all (i, t), where ``Gamma`` stacks
    ``z1 / sqrt(h)`` and ``z2 / (sqrt(2) h)`` as two block columns and ``D``
    holds the residual moments.  Passing ``d_override`` replaces the
    estimated ``D``.

    Returns
    -------
    covariance : ndarray
    d_hat : ndarray, shape (2, 2)
        The estimated moment matrix (not the override).
    """
    if ws is None:
        ws = LikelihoodWorkspace(panel, net, theta_hat.p, theta_hat.q)
    if not theta_hat.omega > 0:
        raise ParameterError("omega must be strictly positive")
    eps, h = ws.residuals(theta_hat)
    n = ws.n_obs
    k1 = ws.k1
    d_hat = moment_matrix(eps, h)
    d = d_hat if d_override is None else np.asarray(d_override, dtype=float)
    g1 = ws.z1 / np.sqrt(h)[:, None]
    g2 = ws.z2 / (math.sqrt(2.0) * h)[:, None]
    a11 = g1.T @ g1 / n
    a22 = g2.T @ g2 / n
    a12 = g1.T @ g2 / n
    k = ws.n_params
    omega_hat = np.zeros((k, k))
    omega_hat[:k1, :k1] = a11
    omega_hat[k1:, k1:] = a22
    sigma_hat = np.empty((k, k))
    sigma_hat[:k1, :k1] = d[0, 0] * a11
    sigma_hat[:k1, k1:] = d[0, 1] * a12
    sigma_hat[k1:, :k1] = d[1, 0] * a12.T
    sigma_hat[k1:, k1:] = d[1, 1] * a22
    if _condition(omega_hat) > MAX_CONDITION:
        raise SingularInformationError(
            "information matrix is numerically singular; consider a lower order"
        )
    omega_inv = np.linalg.inv(omega_hat)
    omega_inv = 0.5 * (omega_inv + omega_inv.T)
    cov = omega_inv @ sigma_hat @ omega_inv / n
    return 0.5 * (cov + cov.T), d_hat


def _wald(theta: NdarParams, se: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    est = theta.to_vector()
    if np.any(se == 0):
        raise DegenerateInferenceError("zero standard error")
    z = est / se
    vol = theta.is_volatility()
    pv = np.where(vol, stats.norm.sf(z), 2.0 * stats.norm.sf(np.abs(z)))
    return z, pv


def wald_inference(fit_result: FitResult) -> tuple[np.ndarray, np.ndarray]:
    """z statistics and p-values for ``H0: theta_k = 0``.

    Mean coefficients get two-sided p-values; ``omega``, ``phi`` and ``psi``
    get one-sided (upper tail) p-values.
    """
    return _wald(fit_result.theta_hat, np.asarray(fit_result.std_errors, dtype=float))


def confidence_interval(fit_result: FitResult, level: float = 0.95) -> np.ndarray:
    """Symmetric normal intervals, shape ``(k, 2)``."""
    if not 0 < level < 1:
        raise ParameterError("level must lie in (0, 1)")
    zq = stats.norm.ppf(0.5 + level / 2.0)
    est = fit_result.theta_hat.to_vector()
    half = zq * np.asarray(fit_result.std_errors, dtype=float)
    return np.column_stack([est - half, est + half])
