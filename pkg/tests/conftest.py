import pytest
from hypothesis import HealthCheck, settings

from persuasion.instances import fixture_path, load_instance

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def toy():
    return load_instance(fixture_path())


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for report in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(report, "user_properties", ()))
            if report.when == "call" and "criterion" in props:
                lines.append((props["criterion"], outcome.upper(), props.get("detail", "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, outcome, detail in sorted(lines):
            terminalreporter.write_line(f"criterion {name}: {outcome}" + (f"  ({detail})" if detail else ""))
