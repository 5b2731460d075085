import pytest

from genlab import (
    AMPLE,
    AxiomParams,
    SamplingPlan,
    TaskDistribution,
    make_agent,
    make_instruction_family,
    make_mdp_family,
    make_tool_family,
)


@pytest.fixture
def mdp_family():
    return make_mdp_family(2, [0.0, 0.5, 0.9, 1.0])


@pytest.fixture
def mdp3_family():
    return make_mdp_family(3, [0.0, 0.5])


@pytest.fixture
def instruction_family():
    return make_instruction_family(3, 2)


@pytest.fixture
def tool_family():
    return make_tool_family(3, (0, 9))


@pytest.fixture
def forward_agent():
    return make_agent("scripted", {"behavior": "always_forward"})


@pytest.fixture
def solver_agent():
    return make_agent("scripted", {"behavior": "instruction_solver"})


@pytest.fixture
def plan():
    return SamplingPlan(n_rollouts=400)


@pytest.fixture
def params():
    return AxiomParams()


def mdp_task(family, slip, **kwargs):
    return family.members({"slip": slip, **kwargs})


def two_point(family, good_slip=0.0, bad_slip=1.0, good_w=0.5):
    good = mdp_task(family, good_slip)
    bad = mdp_task(family, bad_slip)
    return TaskDistribution(family.id, (good, bad), (good_w, 1.0 - good_w))
