"""Directed binary networks, the three random generators and the
stationarity criterion.

A network is stored as a dense 0/1 adjacency matrix ``A`` with
``a_ij = 1`` meaning that node ``i`` is influenced by node ``j``.  Each
row is normalized by the out-degree ``n_i`` to give the weight matrix
``W`` used by the model.
"""
from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, Any, Mapping

import numpy as np

from ndar.exceptions import ParameterError, ShapeError

if TYPE_CHECKING:
    from ndar.model import NdarParams

__all__ = [
    "Network",
    "gen_uniform_random",
    "gen_power_law",
    "gen_stochastic_block",
    "from_config",
    "stationarity_margin",
    "upsilon",
]

logger = logging.getLogger(__name__)


class Network:
    """Immutable directed network with row-normalized weights.

    Parameters
    ----------
    adjacency : array_like
        Square 0/1 matrix with zero diagonal.  Every row needs at least one
        nonzero entry.
    """

    def __init__(self, adjacency: Any):
        a = np.asarray(adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ShapeError(f"adjacency must be a non-empty square matrix, got shape {a.shape}")
        if not np.all((a == 0) | (a == 1)):
            raise ParameterError("adjacency entries must be 0 or 1")
        a = a.astype(np.int8)
        if np.any(np.diag(a) != 0):
            bad = int(np.flatnonzero(np.diag(a))[0])
            raise ParameterError(f"adjacency diagonal must be zero (a_ii = 1 at i={bad})")
        deg = a.sum(axis=1, dtype=np.int64)
        if np.any(deg == 0):
            bad = int(np.flatnonzero(deg == 0)[0])
            raise ParameterError(f"node {bad} has out-degree 0")
        a.setflags(write=False)
        deg.setflags(write=False)
        self._a = a
        self._deg = deg
        w = a / deg[:, None]
        w.setflags(write=False)
        self._w = w
        self.repaired_nodes: tuple[int, ...] = ()

    @classmethod
    def from_edges(cls, edges: Any, n_nodes: int | None = None) -> "Network":
        """Build from an ``(E, 2)`` array of 0-based ``(src, dst)`` pairs."""
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n_nodes is None:
            n_nodes = int(e.max()) + 1 if e.size else 0
        if e.size and (e.min() < 0 or e.max() >= n_nodes):
            raise ParameterError("edge endpoint outside [0, n_nodes)")
        a = np.zeros((n_nodes, n_nodes), dtype=np.int8)
        a[e[:, 0], e[:, 1]] = 1
        if e.size and np.any(e[:, 0] == e[:, 1]):
            i = int(e[e[:, 0] == e[:, 1]][0, 0])
            raise ParameterError(f"self-loop at node {i}")
        return cls(a)

    @property
    def n_nodes(self) -> int:
        return self._a.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        return self._a

    @property
    def out_degrees(self) -> np.ndarray:
        return self._deg

    @property
    def in_degrees(self) -> np.ndarray:
        return self._a.sum(axis=0, dtype=np.int64)

    @property
    def weights(self) -> np.ndarray:
        """Row-normalized weight matrix ``W``."""
        return self._w

    @property
    def n_edges(self) -> int:
        return int(self._deg.sum())

    @property
    def density(self) -> float:
        n = self.n_nodes
        if n < 2:
            return 0.0
        return self.n_edges / (n * (n - 1))

    def edges(self) -> np.ndarray:
        """``(E, 2)`` array of edges in row-major order."""
        return np.argwhere(self._a == 1)

    def permute(self, perm: Any) -> "Network":
        """Relabel nodes so that new node ``k`` is old node ``perm[k]``."""
        perm = np.asarray(perm)
        return Network(self._a[np.ix_(perm, perm)])

    def summary(self) -> dict:
        """Density and degree histograms."""
        indeg = self.in_degrees
        outdeg = self.out_degrees
        return {
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "density": self.density,
            "out_degree_histogram": _histogram(outdeg),
            "in_degree_histogram": _histogram(indeg),
            "max_in_degree": int(indeg.max()),
            "repaired_nodes": list(self.repaired_nodes),
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return np.array_equal(self._a, other._a)

    def __hash__(self) -> int:
        return hash(self._a.tobytes())

    def __repr__(self) -> str:
        return f"Network(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


def _histogram(deg: np.ndarray) -> dict[str, int]:
    values, counts = np.unique(deg, return_counts=True)
    return {str(int(v)): int(c) for v, c in zip(values, counts)}


def _check_sizes(n_nodes: int, max_out_degree: int) -> None:
    if int(n_nodes) != n_nodes or int(max_out_degree) != max_out_degree:
        raise ParameterError("n_nodes and max_out_degree must be integers")
    if max_out_degree < 1:
        raise ParameterError(f"max_out_degree must be >= 1, got {max_out_degree}")
    if n_nodes <= max_out_degree:
        raise ParameterError(
            f"n_nodes ({n_nodes}) must exceed max_out_degree ({max_out_degree})"
        )


def _sample_targets(
    rng: np.random.Generator,
    n_nodes: int,
    degrees: np.ndarray,
    attractiveness: np.ndarray | None,
) -> np.ndarray:
    a = np.zeros((n_nodes, n_nodes), dtype=np.int8)
    for i in range(n_nodes):
        others = np.delete(np.arange(n_nodes), i)
        if attractiveness is None:
            prob = None
        else:
            v = np.delete(attractiveness, i)
            prob = v / v.sum()
        targets = rng.choice(others, size=int(degrees[i]), replace=False, p=prob)
        a[i, targets] = 1
    return a


def gen_uniform_random(n_nodes: int, max_out_degree: int = 5, seed: int = 0) -> Network:
    """Random network with uniformly distributed out-degrees.

    Each node draws its out-degree uniformly from ``{1, ..., max_out_degree}``
    and picks that many distinct targets uniformly among the other nodes.
    """
    _check_sizes(n_nodes, max_out_degree)
    rng = np.random.default_rng(seed)
    degrees = rng.integers(1, max_out_degree + 1, size=n_nodes)
    return Network(_sample_targets(rng, n_nodes, degrees, None))


def power_law_table(n_max: int, gamma: float) -> np.ndarray:
    """CDF of ``P(x) = c x^-gamma`` truncated to ``{1, ..., n_max}``."""
    x = np.arange(1, n_max + 1, dtype=float)
    logw = -gamma * np.log(x)
    w = np.exp(logw - logw.max())
    cdf = np.cumsum(w)
    return cdf / cdf[-1]


def gen_power_law(
    n_nodes: int, max_out_degree: int = 5, gamma: float = 2.5, seed: int = 0
) -> Network:
    """Random network whose in-degrees follow a heavy-tailed law.

    Out-degrees are uniform on ``{1, ..., max_out_degree}``.  Every node gets
    an attractiveness ``v_j`` drawn from a discrete power law with exponent
    ``gamma`` on ``{1, ..., n_nodes}``; node ``i`` then samples its targets
    without replacement with probability proportional to ``v_j``, ``j != i``.
    """
    _check_sizes(n_nodes, max_out_degree)
    if not gamma > 1:
        raise ParameterError(f"gamma must be > 1, got {gamma}")
    rng = np.random.default_rng(seed)
    degrees = rng.integers(1, max_out_degree + 1, size=n_nodes)
    cdf = power_law_table(n_nodes, gamma)
    u = rng.random(n_nodes)
    v = np.searchsorted(cdf, u, side="right") + 1
    v = np.minimum(v, n_nodes).astype(float)
    return Network(_sample_targets(rng, n_nodes, degrees, v))


def block_labels(
    n_nodes: int, n_blocks: int, assignment: str = "even", rng: np.random.Generator | None = None
) -> np.ndarray:
    """Block membership: contiguous near-equal blocks or i.i.d. uniform labels."""
    if assignment == "even":
        return np.repeat(np.arange(n_blocks), [len(c) for c in np.array_split(np.arange(n_nodes), n_blocks)])
    if assignment == "random":
        if rng is None:
            raise ParameterError("random block assignment needs a generator")
        return rng.integers(0, n_blocks, size=n_nodes)
    raise ParameterError(f"unknown block assignment {assignment!r}")


def gen_stochastic_block(
    n_nodes: int,
    n_blocks: int | None = None,
    p_within: float | None = None,
    p_between: float | None = None,
    seed: int = 0,
    assignment: str = "even",
) -> Network:
    """Stochastic block network with independent directed edges.

    Defaults are ``n_blocks = n_nodes // 10``, ``p_within = 28 / n_nodes`` and
    ``p_between = 0.01 / n_nodes``.  With ``assignment="even"`` nodes are
    split into contiguous blocks of near-equal size; ``"random"`` draws each
    node's block uniformly.  Nodes left without an out-edge receive one edge
    to a uniformly chosen other node; their indices are kept in
    ``Network.repaired_nodes``.
    """
    if n_nodes < 2:
        raise ParameterError("n_nodes must be >= 2")
    if n_blocks is None:
        n_blocks = max(1, n_nodes // 10)
    if p_within is None:
        p_within = min(1.0, 28.0 / n_nodes)
    if p_between is None:
        p_between = 0.01 / n_nodes
    if not (0 <= p_between <= 1 and 0 <= p_within <= 1):
        raise ParameterError("edge probabilities must lie in [0, 1]")
    if p_between > p_within:
        raise ParameterError("p_between must not exceed p_within")
    if not 1 <= n_blocks <= n_nodes:
        raise ParameterError(f"n_blocks must be in [1, {n_nodes}], got {n_blocks}")
    rng = np.random.default_rng(seed)
    labels = block_labels(n_nodes, n_blocks, assignment, rng)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_within, p_between)
    a = (rng.random((n_nodes, n_nodes)) < prob).astype(np.int8)
    np.fill_diagonal(a, 0)
    isolated = np.flatnonzero(a.sum(axis=1) == 0)
    for i in isolated:
        j = int(rng.integers(0, n_nodes - 1))
        a[i, j if j < i else j + 1] = 1
    if isolated.size:
        logger.info("stochastic block generator repaired %d zero out-degree nodes", isolated.size)
    net = Network(a)
    net.repaired_nodes = tuple(int(i) for i in isolated)
    return net


def from_config(config: Mapping[str, Any]) -> Network:
    """Build a network from a generator descriptor.

    ``{"kind": "uniform" | "powerlaw" | "sbm", "n": ..., "seed": ..., ...}``;
    optional keys are ``max_deg``, ``gamma``, ``blocks``, ``p_within``,
    ``p_between`` and ``assignment``.
    """
    cfg = dict(config)
    kind = cfg.pop("kind", None)
    try:
        n = int(cfg.pop("n"))
    except KeyError:
        raise ParameterError("network config needs 'n'") from None
    seed = int(cfg.pop("seed", 0))
    if kind == "uniform":
        net = gen_uniform_random(n, int(cfg.pop("max_deg", 5)), seed)
    elif kind == "powerlaw":
        net = gen_power_law(n, int(cfg.pop("max_deg", 5)), float(cfg.pop("gamma", 2.5)), seed)
    elif kind == "sbm":
        blocks = cfg.pop("blocks", None)
        net = gen_stochastic_block(
            n,
            None if blocks is None else int(blocks),
            cfg.pop("p_within", None),
            cfg.pop("p_between", None),
            seed,
            cfg.pop("assignment", "even"),
        )
    else:
        raise ParameterError(f"unknown network kind {kind!r}")
    if cfg:
        raise ParameterError(f"unexpected network config keys: {sorted(cfg)}")
    return net


def upsilon(net: Network, params: "NdarParams", e_abs_eta: float) -> np.ndarray:
    """Per-column contraction quantities of the stationarity condition.

    ``alpha`` and ``phi`` terms are weighted by the column sums of
    ``a_ij / n_i`` and ``a_ij / sqrt(n_i)``; ``beta`` and ``psi`` enter
    through their absolute sums over the ``q`` self lags.
    """
    a = net.adjacency.astype(float)
    n = net.out_degrees.astype(float)
    col_w = (a / n[:, None]).sum(axis=0)
    col_s = (a / np.sqrt(n)[:, None]).sum(axis=0)
    alpha = np.abs(np.asarray(params.alpha, dtype=float)).sum()
    beta = np.abs(np.asarray(params.beta, dtype=float)).sum()
    sphi = np.sqrt(np.asarray(params.phi, dtype=float)).sum()
    spsi = np.sqrt(np.asarray(params.psi, dtype=float)).sum()
    return alpha * col_w + beta + e_abs_eta * (sphi * col_s + spsi)


def stationarity_margin(net: Network, params: "NdarParams", e_abs_eta: float = math.sqrt(2 / math.pi)) -> float:
    """``max_j upsilon_j``; values below one are sufficient for strict
    stationarity and geometric ergodicity."""
    return float(upsilon(net, params, e_abs_eta).max())
