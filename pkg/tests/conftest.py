import pytest

from mbfreg.sim import RunConfig, World


@pytest.fixture
def quiet_world():
    """A world with no agents and no scripted operations; tests drive it by hand."""

    def make(model="CAM", **kw):
        kw.setdefault("schedule", "none")
        kw.setdefault("op_script", [])
        kw.setdefault("horizon", 2000)
        kw.setdefault("readers", 2)
        return World(RunConfig(model=model, **kw))

    return make
