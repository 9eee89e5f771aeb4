"""BIC order selection over the grid ``0 <= p, q <= r_max``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ndar.estimation import FitConfig, FitResult, fit
from ndar.exceptions import NdarError, ParameterError, SelectionError, ShapeError
from ndar.likelihood import LikelihoodWorkspace
from ndar.model import Panel
from ndar.network import Network

__all__ = ["bic", "classify", "select", "SelectionResult", "GridCell", "PENALTIES"]

PENALTIES = ("lnT", "lnNT")
TIE_TOL = 1e-9


def bic(fit_result: FitResult, penalty: str = "lnT") -> float:
    """``-2 loglik + (2p + 2q + 1) ln T``; ``penalty="lnNT"`` uses ``ln(N T)``."""
    k = 2 * fit_result.p + 2 * fit_result.q + 1
    if penalty == "lnT":
        scale = math.log(fit_result.t_len)
    elif penalty == "lnNT":
        scale = math.log(fit_result.t_len * fit_result.n_nodes)
    else:
        raise ParameterError(f"unknown penalty {penalty!r}; choose from {PENALTIES}")
    return -2.0 * fit_result.loglik + k * scale


def classify(chosen: tuple[int, int], reference: tuple[int, int]) -> str:
    """``"lower"`` if either order is too small, ``"exact"`` on a match,
    ``"higher"`` otherwise."""
    p, q = chosen
    p0, q0 = reference
    if p < p0 or q < q0:
        return "lower"
    if (p, q) == (p0, q0):
        return "exact"
    return "higher"


@dataclass
class GridCell:
    p: int
    q: int
    fit: FitResult | None
    bic: float
    loglik: float
    converged: bool
    n_obs: int
    error: str = ""


@dataclass
class SelectionResult:
    grid: dict[tuple[int, int], GridCell]
    chosen: tuple[int, int]
    r_max: int
    penalty: str
    classification: str | None = None
    reference: tuple[int, int] | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def chosen_fit(self) -> FitResult:
        return self.grid[self.chosen].fit

    def rows(self) -> list[dict]:
        return [
            {"p": c.p, "q": c.q, "loglik": c.loglik, "bic": c.bic, "converged": c.converged}
            for _, c in sorted(self.grid.items())
        ]

    def to_dict(self) -> dict:
        return {
            "chosen": {"p": self.chosen[0], "q": self.chosen[1]},
            "r_max": self.r_max,
            "penalty": self.penalty,
            "reference": None if self.reference is None else {"p": self.reference[0], "q": self.reference[1]},
            "classification": self.classification,
            "grid": [
                {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in row.items()}
                for row in self.rows()
            ],
            "warnings": list(self.warnings),
        }


def _warm_start(grid: dict, p: int, q: int):
    """Best (highest loglik) nested fit, embedded at order (p, q)."""
    best = None
    for (pp, qq), cell in grid.items():
        if pp <= p and qq <= q and (pp, qq) != (p, q) and cell.fit is not None:
            if best is None or cell.loglik > best.loglik:
                best = cell
    return None if best is None else best.fit.theta_hat.embed(p, q)


def select(
    panel: Panel,
    net: Network,
    r_max: int,
    config: FitConfig | None = None,
    reference: tuple[int, int] | None = None,
    penalty: str = "lnT",
) -> SelectionResult:
    """Fit every order on the grid and pick the BIC minimizer.

    All cells condition on the same ``r_max`` presample rows: the panel's
    presample must be at least ``r_max`` deep and only its last ``r_max``
    rows are used.  Grid cells are visited in increasing ``p + q``; each fit
    starts from the best nested fit padded with zeros.  Ties within
    ``1e-9`` go to the lexicographically smallest ``(p, q)``.
    """
    if r_max < 1:
        raise ParameterError("r_max must be >= 1")
    if penalty not in PENALTIES:
        raise ParameterError(f"unknown penalty {penalty!r}; choose from {PENALTIES}")
    if panel.depth < r_max:
        raise ShapeError(f"presample depth {panel.depth} is below r_max = {r_max}")
    common = Panel(panel.presample[panel.depth - r_max:], panel.observations)
    config = config or FitConfig()
    order = sorted(((p, q) for p in range(r_max + 1) for q in range(r_max + 1)), key=lambda c: (c[0] + c[1], c))
    grid: dict[tuple[int, int], GridCell] = {}
    warnings: list[str] = []
    for p, q in order:
        ws = LikelihoodWorkspace(common, net, p, q)
        start = _warm_start(grid, p, q)
        try:
            res = fit(common, net, p, q, config, start=start, ws=ws)
        except NdarError as exc:
            grid[(p, q)] = GridCell(p, q, None, math.inf, math.nan, False, ws.n_obs, str(exc))
            warnings.append(f"cell ({p},{q}) failed: {exc}")
            continue
        if not res.converged:
            warnings.append(f"cell ({p},{q}) did not converge: {res.message}")
            grid[(p, q)] = GridCell(p, q, res, math.inf, res.loglik, False, ws.n_obs, res.message)
            continue
        grid[(p, q)] = GridCell(p, q, res, bic(res, penalty), res.loglik, True, ws.n_obs)
    valid = [c for c in grid.values() if c.converged]
    if not valid:
        raise SelectionError("no grid cell converged")
    best = min(c.bic for c in valid)
    chosen = min((c.p, c.q) for c in valid if c.bic <= best + TIE_TOL)
    result = SelectionResult(grid, chosen, r_max, penalty, warnings=warnings)
    if reference is not None:
        result.reference = tuple(reference)
        result.classification = classify(chosen, result.reference)
    return result
