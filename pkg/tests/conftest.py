import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import OUTCOMES

    if OUTCOMES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(OUTCOMES):
            terminalreporter.write_line(OUTCOMES[k].line())
        passed = sum(o.passed for o in OUTCOMES.values())
        terminalreporter.write_line(f"{passed}/{len(OUTCOMES)} criteria passed")
