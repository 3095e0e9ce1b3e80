import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def is_partition(assignment, k_min=8, k_max=None):
    """Check the superpixel-map invariants: labels 0..K-1 all used,
    every label 4-connected, sizes within bounds."""
    from scipy import ndimage

    a = np.asarray(assignment)
    k = int(a.max()) + 1
    sizes = np.bincount(a.ravel(), minlength=k)
    if a.min() != 0 or (sizes == 0).any():
        return False
    if sizes.min() < k_min or (k_max is not None and sizes.max() > k_max):
        return False
    four = ndimage.generate_binary_structure(2, 1)
    for i in range(k):
        _, ncomp = ndimage.label(a == i, structure=four)
        if ncomp != 1:
            return False
    return True


_CRITERIA: dict[int, str] = {}


def record_criterion(number: int, ok: bool, text: str) -> None:
    """Store one acceptance line; printed in the terminal summary."""
    status = "PASS" if ok else "FAIL"
    _CRITERIA[number] = f"criterion {number}: {status}  {text}"
    print(_CRITERIA[number])


def skip_criterion(number: int, text: str) -> None:
    _CRITERIA[number] = f"criterion {number}: SKIP  {text}"
    print(_CRITERIA[number])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[k])
