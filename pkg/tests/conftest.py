import pytest

from looplab.autodiff import set_finite_checks, set_precision


@pytest.fixture(autouse=True)
def _engine_defaults():
    """Every test starts in 64-bit mode with finite checks on."""
    set_precision(64)
    set_finite_checks(True)
    yield
    set_precision(64)
    set_finite_checks(True)
