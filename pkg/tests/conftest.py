from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "catbreed",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("catbreed")

# (criterion number, PASS/FAIL, description) lines collected by the acceptance suite
ACCEPTANCE_LINES: list[tuple[int, bool, str]] = []


def record_criterion(number: int, ok: bool, text: str) -> None:
    ACCEPTANCE_LINES.append((number, bool(ok), text))
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} - {text}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, text in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} - {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state_vector(rng, dim, support=None):
    support = dim if support is None else support
    v = np.zeros(dim, complex)
    v[:support] = rng.normal(size=support) + 1j * rng.normal(size=support)
    return v / np.linalg.norm(v)


def random_density(rng, dim, rank=3):
    vecs = [random_state_vector(rng, dim) for _ in range(rank)]
    w = rng.random(rank)
    w /= w.sum()
    return sum(wi * np.outer(v, v.conj()) for wi, v in zip(w, vecs))
