from __future__ import annotations

from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
BUNDLED_EPISODE = REPO_ROOT / "episodes" / "synthetic-demo"

_acceptance_results: list[tuple[str, bool]] = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): criterion checked by the acceptance suite"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        _acceptance_results.append((marker.kwargs.get("name", item.name), report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, passed in _acceptance_results:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}")


@pytest.fixture(scope="session")
def bundled_episode_dir() -> Path:
    assert BUNDLED_EPISODE.is_dir(), (
        "bundled demo episode missing; run `travseg make-demo --out episodes/synthetic-demo`"
    )
    return BUNDLED_EPISODE
