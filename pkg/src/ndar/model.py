"""NDAR(p, q) parameters, innovation laws, panels and the simulator.

The process is

    y_t = sum_r alpha_r W y_{t-r} + sum_r beta_r y_{t-r} + H_t^{1/2} eta_t,
    H_t = Diag(omega 1 + sum_r phi_r W x_{t-r} + sum_r psi_r x_{t-r}),

with ``x_t = y_t ** 2``, network lags ``r = 1..p`` and self lags
``r = 1..q``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ndar.exceptions import ParameterError, ShapeError, SimulationDiverged
from ndar.network import Network

__all__ = [
    "NdarParams",
    "InnovationLaw",
    "Panel",
    "simulate",
    "conditional_moments",
    "DIVERGENCE_BOUND",
    "E_ABS_T5_SCALED",
]

DIVERGENCE_BOUND = 1e8

# E|eta| for eta = sqrt(3/5) t_5, i.e. 4 sqrt(3) / (3 pi); checked against quadrature in tests
E_ABS_T5_SCALED = 0.73510519389572273


def _vec(x: Any, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} must be finite")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class NdarParams:
    """Parameter vector ``theta = (mu, sigma)`` of an NDAR(p, q) model.

    ``mu = (alpha_1..alpha_p, beta_1..beta_q)`` drives the conditional mean
    and ``sigma = (omega, phi_1..phi_p, psi_1..psi_q)`` the conditional
    variance.
    """

    p: int
    q: int
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    omega: float
    phi: tuple[float, ...]
    psi: tuple[float, ...]
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "phi", "psi"):
            object.__setattr__(self, name, _vec(getattr(self, name), name))
        object.__setattr__(self, "omega", float(self.omega))
        if self.p < 0 or self.q < 0 or int(self.p) != self.p or int(self.q) != self.q:
            raise ParameterError("orders p, q must be non-negative integers")
        if len(self.alpha) != self.p or len(self.phi) != self.p:
            raise ParameterError(f"alpha and phi need length p={self.p}")
        if len(self.beta) != self.q or len(self.psi) != self.q:
            raise ParameterError(f"beta and psi need length q={self.q}")
        if self.check:
            if not self.omega > 0:
                raise ParameterError(f"omega must be > 0, got {self.omega}")
            if any(v < 0 for v in self.phi + self.psi):
                raise ParameterError("phi and psi must be non-negative")

    @property
    def m(self) -> int:
        return max(self.p, self.q)

    @property
    def n_params(self) -> int:
        return 2 * self.p + 2 * self.q + 1

    @property
    def mu(self) -> np.ndarray:
        return np.array(self.alpha + self.beta, dtype=float)

    @property
    def sigma(self) -> np.ndarray:
        return np.array((self.omega,) + self.phi + self.psi, dtype=float)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.mu, self.sigma])

    @classmethod
    def from_vector(cls, theta: Any, p: int, q: int, check: bool = True) -> "NdarParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2 * p + 2 * q + 1,):
            raise ShapeError(f"theta must have length {2 * p + 2 * q + 1}, got {theta.shape}")
        k = p + q
        return cls(
            p, q,
            alpha=theta[:p], beta=theta[p:k], omega=theta[k],
            phi=theta[k + 1:k + 1 + p], psi=theta[k + 1 + p:],
            check=check,
        )

    @staticmethod
    def names_for(p: int, q: int) -> list[str]:
        return (
            [f"alpha{r}" for r in range(1, p + 1)]
            + [f"beta{r}" for r in range(1, q + 1)]
            + ["omega"]
            + [f"phi{r}" for r in range(1, p + 1)]
            + [f"psi{r}" for r in range(1, q + 1)]
        )

    def names(self) -> list[str]:
        return self.names_for(self.p, self.q)

    def is_volatility(self) -> np.ndarray:
        """Boolean mask of the ``sigma`` block in flattened order."""
        k = self.p + self.q
        return np.arange(self.n_params) >= k

    def embed(self, p: int, q: int) -> "NdarParams":
        """Pad with zeros to a larger order ``(p, q)``."""
        if p < self.p or q < self.q:
            raise ParameterError(f"cannot embed order ({self.p},{self.q}) into ({p},{q})")
        zp, zq = (0.0,) * (p - self.p), (0.0,) * (q - self.q)
        return NdarParams(
            p, q, self.alpha + zp, self.beta + zq, self.omega, self.phi + zp, self.psi + zq,
            check=self.check,
        )

    def to_dict(self) -> dict:
        return {
            "p": self.p, "q": self.q,
            "alpha": list(self.alpha), "beta": list(self.beta),
            "omega": self.omega,
            "phi": list(self.phi), "psi": list(self.psi),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NdarParams":
        try:
            p, q = int(d["p"]), int(d["q"])
            return cls(
                p, q,
                alpha=d.get("alpha", []), beta=d.get("beta", []), omega=d["omega"],
                phi=d.get("phi", []), psi=d.get("psi", []),
            )
        except KeyError as exc:
            raise ParameterError(f"params missing key {exc.args[0]!r}") from None

    def scaled(self, mean_factor: float, var_factor: float) -> "NdarParams":
        """Multiply mean coefficients and ``phi``/``psi`` by constant factors."""
        return NdarParams(
            self.p, self.q,
            tuple(mean_factor * a for a in self.alpha),
            tuple(mean_factor * b for b in self.beta),
            self.omega,
            tuple(var_factor * f for f in self.phi),
            tuple(var_factor * s for s in self.psi),
        )


class InnovationLaw(str, enum.Enum):
    """Unit-variance innovation distributions."""

    NORMAL = "normal"
    T5 = "t5"

    @classmethod
    def parse(cls, value: "str | InnovationLaw") -> "InnovationLaw":
        if isinstance(value, cls):
            return value
        aliases = {"standard_normal": "normal", "scaled_t5": "t5", "gaussian": "normal"}
        try:
            return cls(aliases.get(str(value), str(value)))
        except ValueError:
            raise ParameterError(f"unknown innovation law {value!r}") from None

    def draw(self, rng: np.random.Generator, size: Any) -> np.ndarray:
        if self is InnovationLaw.NORMAL:
            return rng.standard_normal(size)
        return math.sqrt(3.0 / 5.0) * rng.standard_t(5, size)

    @property
    def e_abs(self) -> float:
        if self is InnovationLaw.NORMAL:
            return math.sqrt(2.0 / math.pi)
        return E_ABS_T5_SCALED

    @property
    def kappa3(self) -> float:
        return 0.0

    @property
    def kappa4(self) -> float:
        # E t_5^4 = 3 * 25 / (3 * 1) = 25, scaled by (3/5)^2
        return 3.0 if self is InnovationLaw.NORMAL else 9.0


@dataclass(frozen=True)
class Panel:
    """Observed panel: ``presample`` rows (oldest first) then ``observations``.

    Both arrays have one column per node.  Estimation conditions on the
    presample; only ``observations`` enter the likelihood.
    """

    presample: np.ndarray
    observations: np.ndarray

    def __post_init__(self) -> None:
        pre = np.array(self.presample, dtype=float, ndmin=2)
        obs = np.array(self.observations, dtype=float, ndmin=2)
        if pre.size == 0:
            pre = np.zeros((0, obs.shape[1]))
        if pre.shape[1] != obs.shape[1]:
            raise ShapeError("presample and observations must have the same number of columns")
        if not (np.all(np.isfinite(pre)) and np.all(np.isfinite(obs))):
            raise ParameterError("panel entries must be finite")
        pre.setflags(write=False)
        obs.setflags(write=False)
        object.__setattr__(self, "presample", pre)
        object.__setattr__(self, "observations", obs)

    @property
    def n_nodes(self) -> int:
        return self.observations.shape[1]

    @property
    def t_len(self) -> int:
        return self.observations.shape[0]

    @property
    def depth(self) -> int:
        return self.presample.shape[0]

    def full(self) -> np.ndarray:
        """Presample and observations stacked, oldest first."""
        return np.vstack([self.presample, self.observations])

    def permute(self, perm: Any) -> "Panel":
        perm = np.asarray(perm)
        return Panel(self.presample[:, perm], self.observations[:, perm])

    @classmethod
    def from_array(cls, data: Any, depth: int) -> "Panel":
        data = np.asarray(data, dtype=float)
        if not 0 <= depth < data.shape[0]:
            raise ShapeError(f"presample depth {depth} incompatible with {data.shape[0]} rows")
        return cls(data[:depth], data[depth:])


def _check_compat(net: Network, params: NdarParams) -> None:
    if not isinstance(params, NdarParams):
        raise ParameterError("params must be NdarParams")
    if not isinstance(net, Network):
        raise ParameterError("net must be a Network")


def conditional_moments(
    net: Network, params: NdarParams, history: Any
) -> tuple[np.ndarray, np.ndarray]:
    """Conditional mean and variance of ``y_t`` given the last ``m`` rows.

    Parameters
    ----------
    history : array_like, shape (m, N)
        Past observations ordered oldest first, ``m = max(p, q)``.
    """
    _check_compat(net, params)
    hist = np.asarray(history, dtype=float)
    m = params.m
    if hist.shape != (m, net.n_nodes):
        raise ShapeError(f"history must have shape ({m}, {net.n_nodes}), got {hist.shape}")
    w = net.weights
    mean = np.zeros(net.n_nodes)
    var = np.full(net.n_nodes, params.omega)
    for r, (a, f) in enumerate(zip(params.alpha, params.phi), start=1):
        y = hist[m - r]
        mean += a * (w @ y)
        var += f * (w @ (y * y))
    for r, (b, s) in enumerate(zip(params.beta, params.psi), start=1):
        y = hist[m - r]
        mean += b * y
        var += s * (y * y)
    return mean, var


def simulate(
    net: Network,
    params: NdarParams,
    law: "InnovationLaw | str" = InnovationLaw.NORMAL,
    t_len: int = 100,
    burn_in: int = 500,
    seed: int = 0,
    presample_depth: int | None = None,
) -> Panel:
    """Draw a panel from the NDAR(p, q) process.

    The first ``max(p, q)`` states are i.i.d. ``N(0, omega)``; the next
    ``burn_in`` generated rows are discarded except for the last
    ``presample_depth`` of them (default ``max(p, q)``), which become the
    panel's presample.

    Raises
    ------
    SimulationDiverged
        If any ``|y_it|`` exceeds ``DIVERGENCE_BOUND`` or is not finite.
    """
    _check_compat(net, params)
    law = InnovationLaw.parse(law)
    m = params.m
    depth = m if presample_depth is None else int(presample_depth)
    if t_len < 1:
        raise ParameterError("t_len must be >= 1")
    if depth < m:
        raise ParameterError(f"presample depth {depth} below max(p, q) = {m}")
    if burn_in < depth:
        raise ParameterError(f"burn_in ({burn_in}) must be at least the presample depth ({depth})")
    n = net.n_nodes
    rng = np.random.default_rng(seed)
    init = math.sqrt(params.omega) * rng.standard_normal((m, n))
    steps = burn_in + t_len
    eta = law.draw(rng, (steps, n))
    y = np.empty((m + steps, n))
    y[:m] = init
    for t in range(steps):
        mean, var = conditional_moments(net, params, y[t:t + m])
        yt = mean + np.sqrt(var) * eta[t]
        if not np.all(np.abs(yt) <= DIVERGENCE_BOUND):
            raise SimulationDiverged(t)
        y[m + t] = yt
    out = y[m + burn_in - depth:]
    return Panel(out[:depth], out[depth:])
