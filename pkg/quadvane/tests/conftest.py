import logging

import pytest


@pytest.fixture(autouse=True)
def restore_root_handlers():
    """The CLI reconfigures the root logger; put the test harness handlers back afterwards."""
    root = logging.getLogger()
    saved_handlers, saved_level = list(root.handlers), root.level
    yield
    root.handlers[:] = saved_handlers
    root.setLevel(saved_level)
