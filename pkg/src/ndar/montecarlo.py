"""Replication studies: QMLE accuracy (Bias/ASD/ESD/CP) and BIC
selection frequencies."""
from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

import numpy as np
from scipy import stats

from ndar.estimation import FitConfig, fit
from ndar.exceptions import NdarError, ParameterError, StudyError
from ndar.model import InnovationLaw, NdarParams, simulate
from ndar.network import Network, from_config, stationarity_margin
from ndar.selection import select

__all__ = ["McDesign", "McReport", "run_qmle_study", "run_bic_study", "run_study", "MAX_FAILURE_RATE"]

logger = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.2
Z975 = float(stats.norm.ppf(0.975))


@dataclass(frozen=True)
class McDesign:
    """A fully specified simulation design.

    The network is generated once from ``network`` (its ``seed`` defaults to
    ``seed``) and reused by every replication.  Replication ``r`` (1-based)
    simulates with seed ``seed + r``.
    """

    network: Mapping[str, Any]
    theta0: NdarParams
    law: InnovationLaw = InnovationLaw.NORMAL
    t_len: int = 100
    burn_in: int = 500
    replications: int = 100
    task: str = "qmle_metrics"
    seed: int = 0
    r_max: int = 3
    penalty: str = "lnT"
    fit_config: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "law", InnovationLaw.parse(self.law))
        if self.replications < 1:
            raise ParameterError("replications must be >= 1")
        if self.task not in ("qmle_metrics", "bic_frequencies"):
            raise ParameterError(f"unknown task {self.task!r}")
        if "n" not in self.network:
            raise ParameterError("network config needs 'n'")

    @property
    def n_nodes(self) -> int:
        return int(self.network["n"])

    def build_network(self) -> Network:
        cfg = dict(self.network)
        cfg.setdefault("seed", self.seed)
        return from_config(cfg)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "McDesign":
        d = dict(d)
        try:
            theta0 = NdarParams.from_dict(d.pop("theta0"))
            network = d.pop("network")
        except KeyError as exc:
            raise ParameterError(f"design missing key {exc.args[0]!r}") from None
        try:
            fit_cfg = FitConfig(**d.pop("fit_config", {}))
        except TypeError as exc:
            raise ParameterError(f"bad fit_config: {exc}") from None
        allowed = {"law", "t_len", "burn_in", "replications", "task", "seed", "r_max", "penalty"}
        extra = set(d) - allowed
        if extra:
            raise ParameterError(f"unexpected design keys: {sorted(extra)}")
        return cls(network=network, theta0=theta0, fit_config=fit_cfg, **d)

    def to_dict(self) -> dict:
        return {
            "network": dict(self.network),
            "theta0": self.theta0.to_dict(),
            "law": self.law.value,
            "t_len": self.t_len,
            "burn_in": self.burn_in,
            "replications": self.replications,
            "task": self.task,
            "seed": self.seed,
            "r_max": self.r_max,
            "penalty": self.penalty,
            # only non-default settings, so the output stays valid JSON
            "fit_config": {
                f.name: getattr(self.fit_config, f.name)
                for f in fields(FitConfig)
                if getattr(self.fit_config, f.name) != f.default
            },
        }


@dataclass
class McReport:
    task: str
    names: list[str]
    theta0: np.ndarray
    replications: int
    failures: list[dict]
    elapsed: float
    estimates: np.ndarray | None = None
    std_errors: np.ndarray | None = None
    bias: np.ndarray | None = None
    asd: np.ndarray | None = None
    esd: np.ndarray | None = None
    cp: np.ndarray | None = None
    counts: dict[str, int] | None = None
    chosen: list[tuple[int, int]] | None = None
    margin: float = math.nan
    network_density: float = math.nan

    @property
    def n_success(self) -> int:
        return self.replications - len(self.failures)

    def rates(self) -> dict[str, float]:
        n = sum(self.counts.values())
        return {k: v / n for k, v in self.counts.items()}

    def to_dict(self) -> dict:
        def arr(x):
            if x is None:
                return None
            return [None if not math.isfinite(v) else float(v) for v in np.asarray(x, dtype=float)]

        out = {
            "task": self.task,
            "replications": self.replications,
            "successful": self.n_success,
            "failures": self.failures,
            "elapsed_seconds": self.elapsed,
            "stationarity_margin": self.margin,
            "network_density": self.network_density,
            "parameters": self.names,
            "theta0": arr(self.theta0),
        }
        if self.task == "qmle_metrics":
            out.update({"bias": arr(self.bias), "asd": arr(self.asd), "esd": arr(self.esd), "cp": arr(self.cp)})
        else:
            out.update({"counts": dict(self.counts), "chosen": [list(c) for c in self.chosen]})
        return out

    def table(self) -> str:
        if self.task == "qmle_metrics":
            lines = [f"{'QMLE':<8} {'Bias(e3)':>9} {'ASD(e2)':>8} {'ESD(e2)':>8} {'CP':>5}"]
            for k, name in enumerate(self.names):
                esd = "   -" if self.esd is None else f"{100 * self.esd[k]:8.2f}"
                lines.append(
                    f"{name:<8} {1e3 * self.bias[k]:9.2f} {100 * self.asd[k]:8.2f} {esd:>8} {self.cp[k]:5.2f}"
                )
        else:
            lines = [f"{'Lower':>6} {'Exact':>6} {'Higher':>6}",
                     f"{self.counts['lower']:>6} {self.counts['exact']:>6} {self.counts['higher']:>6}"]
        lines.append(f"replications={self.replications} failed={len(self.failures)} elapsed={self.elapsed:.1f}s")
        return "\n".join(lines)


def _qmle_replication(args: tuple) -> dict:
    design, net, r = args
    try:
        panel = simulate(net, design.theta0, design.law, design.t_len, design.burn_in, design.seed + r)
        res = fit(panel, net, design.theta0.p, design.theta0.q, design.fit_config)
    except NdarError as exc:
        return {"r": r, "error": f"{type(exc).__name__}: {exc}"}
    if not res.converged:
        return {"r": r, "error": f"not converged: {res.message}"}
    if not np.all(np.isfinite(res.std_errors)):
        return {"r": r, "error": f"no standard errors: {res.message}"}
    return {"r": r, "theta": res.theta_hat.to_vector(), "se": res.std_errors}


def _bic_replication(args: tuple) -> dict:
    design, net, r = args
    ref = (design.theta0.p, design.theta0.q)
    try:
        panel = simulate(
            net, design.theta0, design.law, design.t_len, design.burn_in, design.seed + r,
            presample_depth=max(design.r_max, design.theta0.m),
        )
        sel = select(panel, net, design.r_max, design.fit_config, reference=ref, penalty=design.penalty)
    except NdarError as exc:
        return {"r": r, "error": f"{type(exc).__name__}: {exc}"}
    return {"r": r, "chosen": sel.chosen, "class": sel.classification}


def _run(func, design: McDesign, net: Network, workers: int) -> list[dict]:
    tasks = [(design, net, r) for r in range(1, design.replications + 1)]
    if workers <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _prepare(design: McDesign) -> tuple[Network, float]:
    net = design.build_network()
    margin = stationarity_margin(net, design.theta0, design.law.e_abs)
    if margin >= 1:
        warnings.warn(
            f"stationarity margin {margin:.3f} >= 1 on the realized network; "
            "the sufficient condition does not hold",
            RuntimeWarning,
            stacklevel=3,
        )
    return net, margin


def _check_failures(design: McDesign, failures: list[dict]) -> None:
    if len(failures) > MAX_FAILURE_RATE * design.replications:
        raise StudyError(
            f"{len(failures)} of {design.replications} replications failed; "
            f"first: {failures[0]['error']}"
        )


def run_qmle_study(design: McDesign, workers: int = 1) -> McReport:
    """Estimate at the true order in every replication and summarize.

    Bias is the mean error, ASD the mean standard error, ESD the
    population (divide-by-R) standard deviation of the estimates and CP the
    share of 95% normal intervals covering the truth.  Failed replications
    are dropped and listed; ESD is ``None`` with fewer than two successes.
    """
    if design.task != "qmle_metrics":
        raise ParameterError("design task must be 'qmle_metrics'")
    t0 = time.perf_counter()
    net, margin = _prepare(design)
    results = _run(_qmle_replication, design, net, workers)
    failures = [{"r": o["r"], "error": o["error"]} for o in results if "error" in o]
    _check_failures(design, failures)
    ok = [o for o in results if "error" not in o]
    est = np.array([o["theta"] for o in ok])
    se = np.array([o["se"] for o in ok])
    theta0 = design.theta0.to_vector()
    bias = est.mean(axis=0) - theta0
    asd = se.mean(axis=0)
    esd = est.std(axis=0, ddof=0) if len(ok) >= 2 else None
    lo = est - Z975 * se
    hi = est + Z975 * se
    cp = ((lo <= theta0) & (theta0 <= hi)).mean(axis=0)
    return McReport(
        task=design.task,
        names=design.theta0.names(),
        theta0=theta0,
        replications=design.replications,
        failures=failures,
        elapsed=time.perf_counter() - t0,
        estimates=est,
        std_errors=se,
        bias=bias,
        asd=asd,
        esd=esd,
        cp=cp,
        margin=margin,
        network_density=net.density,
    )


def run_bic_study(design: McDesign, workers: int = 1) -> McReport:
    """Select the order by BIC in every replication and count
    lower / exact / higher choices relative to the true order."""
    if design.task != "bic_frequencies":
        raise ParameterError("design task must be 'bic_frequencies'")
    t0 = time.perf_counter()
    net, margin = _prepare(design)
    results = _run(_bic_replication, design, net, workers)
    failures = [{"r": o["r"], "error": o["error"]} for o in results if "error" in o]
    _check_failures(design, failures)
    ok = [o for o in results if "error" not in o]
    counts = {"lower": 0, "exact": 0, "higher": 0}
    for o in ok:
        counts[o["class"]] += 1
    return McReport(
        task=design.task,
        names=design.theta0.names(),
        theta0=design.theta0.to_vector(),
        replications=design.replications,
        failures=failures,
        elapsed=time.perf_counter() - t0,
        counts=counts,
        chosen=[tuple(o["chosen"]) for o in ok],
        margin=margin,
        network_density=net.density,
    )


def run_study(design: McDesign, workers: int = 1) -> McReport:
    if design.task == "qmle_metrics":
        return run_qmle_study(design, workers)
    return run_bic_study(design, workers)
