import numpy as np
import pytest

from monorgp.kernel import InputSpace, KernelParams
from monorgp.monotonicity import MonotonicityConfig

# reference 2D configuration of the statistical study
STUDY_SPACE = InputSpace((-2.0, -1.0), (4.0, 4.0), (10, 10))
STUDY_PARAMS = KernelParams(10.0, 1.5, 0.1)
STUDY_MONO = MonotonicityConfig(np.zeros(2), -np.ones(2), 1e-2)


def cubic_plane(z):
    z = np.asarray(z, dtype=float)
    return 10 * z[..., 0] + z[..., 0] ** 3 + 10 * z[..., 1]


def prior_mean_sample(model, rng):
    """Draw basis values from the prior N(0, K)."""
    low = np.linalg.cholesky(model.K + 1e-9 * np.eye(model.size))
    return low @ rng.standard_normal(model.size)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, filled from the test reports
_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): acceptance criterion number n")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[props["criterion"]] = (report.outcome, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        outcome, detail = _ACCEPTANCE[crit]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {crit}: {verdict}  {detail}")
