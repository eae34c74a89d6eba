import pathlib

import pytest
from hypothesis import settings

from drivestyle.scenario import default_study_scenario, run
from drivestyle.styles import BUILTIN_STYLE_NAMES, builtin_style

settings.register_profile("default", deadline=None)
settings.load_profile("default")

DATA_DIR = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def study():
    """The standard 5 km, 30-curve, 4-truck scenario (seed 1)."""
    return default_study_scenario(seed=1)


@pytest.fixture(scope="session")
def style_logs(study):
    """One full run per builtin style on the standard scenario."""
    track, script = study
    return {
        name: run(track, builtin_style(name), script=script)
        for name in BUILTIN_STYLE_NAMES
    }


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR
