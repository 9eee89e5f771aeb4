import numpy as np
import pytest
from hypothesis import settings
from scipy import optimize

from ndar import Network, NdarParams, Panel, stationarity_margin

settings.register_profile("default", deadline=None)
settings.load_profile("default")

# criterion id -> (passed, detail); filled by the acceptance tests
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Store one pass/fail line for the acceptance summary, then assert."""

    def _record(criterion: str, passed: bool, detail: str) -> None:
        ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
        assert passed, f"{criterion}: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda s: (len(s.split()[0]), s)):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {key}: {detail}")


def random_network(rng: np.random.Generator, n: int) -> Network:
    a = (rng.random((n, n)) < 0.5).astype(np.int8)
    np.fill_diagonal(a, 0)
    for i in range(n):
        if a[i].sum() == 0:
            j = int(rng.integers(0, n - 1))
            a[i, j if j < i else j + 1] = 1
    return Network(a)


def random_params(rng: np.random.Generator, p: int, q: int) -> NdarParams:
    return NdarParams(
        p, q,
        alpha=rng.uniform(-0.4, 0.4, p),
        beta=rng.uniform(-0.4, 0.4, q),
        omega=rng.uniform(0.2, 2.0),
        phi=rng.uniform(0.0, 0.4, p),
        psi=rng.uniform(0.0, 0.4, q),
    )


def random_instance(seed: int, max_n: int = 5, max_t: int = 10, max_order: int = 2):
    """Small random network, panel and feasible parameter set."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_n + 1))
    t = int(rng.integers(1, max_t + 1))
    p = int(rng.integers(0, max_order + 1))
    q = int(rng.integers(0, max_order + 1))
    depth = max(p, q)
    net = random_network(rng, n)
    panel = Panel.from_array(rng.standard_normal((depth + t, n)) * 1.5, depth)
    return net, panel, random_params(rng, p, q)


def inflation_factor(net, params, target=3.0):
    """Smallest common factor c on every mean and variance coefficient
    (omega fixed) that lifts the margin above ``target``."""
    def gap(c):
        return stationarity_margin(net, params.scaled(c, c)) - target

    hi = 1.0
    while gap(hi) <= 0:
        hi *= 2
    c = optimize.brentq(gap, hi / 2 if hi > 1 else 0.0, hi, xtol=1e-12)
    while gap(c) <= 0:
        c = np.nextafter(c, np.inf)
    return c
