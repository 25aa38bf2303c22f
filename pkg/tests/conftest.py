import numpy as np
import pytest

from ktube import ModelSpec, load_fixture, parse_model

# hierarchical models for the recruits survey, ordered from coarsest to finest
RECRUIT_MODELS = (
    "loglinear:C,R,L,P",
    "loglinear:CR,CL,CP,RL,RP,LP",
    "loglinear:CRL,CP,RP,LP",
    "loglinear:CRL,CP,RLP",
    "loglinear:CRL,CRP,RLP",
    "loglinear:CRL,CRP,CLP,RLP",
)


@pytest.fixture(scope="session")
def eye_hair():
    return load_fixture("eye_hair")


@pytest.fixture(scope="session")
def children_income():
    return load_fixture("children_income")


@pytest.fixture(scope="session")
def recruits():
    return load_fixture("recruits")


@pytest.fixture(scope="session")
def recruit_specs(recruits):
    return [parse_model(m, recruits.axis_names, recruits.axis_sizes) for m in RECRUIT_MODELS]


def independence(table):
    return ModelSpec.independence(table.axis_sizes)


def random_simplex(rng, size, zeros=0):
    p = rng.dirichlet(np.ones(size))
    if zeros:
        p[rng.choice(size, zeros, replace=False)] = 0.0
        p /= p.sum()
    return p
