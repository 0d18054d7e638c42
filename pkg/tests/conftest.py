import warnings

import pytest


@pytest.fixture(autouse=True)
def _quiet_mesh_quality_warnings():
    # collapsed-apex fans legitimately trigger the <5 degree quality warning
    with warnings.catch_warnings():
        warnings.filterwarnings(
            "ignore", message="minimum triangle angle", category=UserWarning
        )
        yield
