import numpy as np
import pytest

from singwish.rng import RngStream
from singwish.samplers import GaussianSpec
from singwish.spectral import SpectralCovariance

_CRITERIA: list[tuple[str, bool, str]] = []


class CriterionLog:
    """Collects one pass/fail line per acceptance criterion."""

    def record(self, name: str, ok: bool, detail: str = "") -> bool:
        line = (name, bool(ok), detail)
        _CRITERIA.append(line)
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return bool(ok)


@pytest.fixture
def criterion():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def random_spec(gen: np.random.Generator, k: int, r: int, spread: float = 1.0) -> SpectralCovariance:
    Q, _ = np.linalg.qr(gen.standard_normal((k, k)))
    lam = np.sort(gen.uniform(0.2, 0.2 + spread, size=r))
    return SpectralCovariance(lam, Q[:, :r])


def random_gaussian(gen, k, r, kappa=1.0, zero_mean=False) -> GaussianSpec:
    sig = random_spec(gen, k, r)
    mu = np.zeros(k) if zero_mean else gen.uniform(-1, 1, size=k)
    return GaussianSpec(mu, kappa, sig)


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


@pytest.fixture
def stream():
    return RngStream(12345)
