"""Global fixtures for packrigid tests."""

# Fixtures that are defined in conftest.py are available across all tests.
# Packings are expensive to continue, so the shared ones are session scoped;
# Packing is immutable so sharing them between tests is safe.
import math

import numpy as np
import pytest

from packrigid.geometry.body import ExpFamilyBody, PNormBody
from packrigid.geometry.packer import body_pack, circle_pack, subgraph_flow
from packrigid.geometry.sparsity import ContactGraph
from packrigid.harness import square_counterexample

K4_EDGES = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)]


def exp_family_body(angles=(0.1, 1.2, 2.0), w=None):
    """Return an exp-family body with directions at the given angles."""
    angles = np.asarray(angles, dtype=float)
    directions = np.column_stack((np.cos(angles), np.sin(angles)))
    if w is None:
        w = math.log(2 * len(angles)) + 1.0
    return ExpFamilyBody(directions, w)


@pytest.fixture(name="k4")
def k4_fixture():
    """K4 triangulation with outer triangle (0, 1, 2)."""
    return ContactGraph(4, K4_EDGES, outer=(0, 1, 2))


@pytest.fixture(name="exp_body", scope="session")
def exp_body_fixture():
    return exp_family_body()


@pytest.fixture(name="pnorm_body", scope="session")
def pnorm_body_fixture():
    return PNormBody(3.0)


@pytest.fixture(name="disc_k4", scope="session")
def disc_k4_fixture():
    """Descartes configuration: three unit discs around a small one."""
    return circle_pack(ContactGraph(4, K4_EDGES, outer=(0, 1, 2)))


@pytest.fixture(name="exp_k4", scope="session")
def exp_k4_fixture(exp_body):
    return body_pack(exp_body, ContactGraph(4, K4_EDGES, outer=(0, 1, 2)))


@pytest.fixture(name="exp_k4_open", scope="session")
def exp_k4_open_fixture(exp_k4):
    """exp_k4 with the contact (0, 3) opened."""
    keep = ContactGraph(4, [edge for edge in K4_EDGES if edge != (0, 3)])
    return subgraph_flow(exp_k4, keep, 1e-2, 20)


@pytest.fixture(name="square")
def square_fixture():
    return square_counterexample(2.0)
