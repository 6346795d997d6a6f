import json

import numpy as np
import pytest

from kirchhoff_mp.config import bundled_config, load_config
from kirchhoff_mp.mesh import Mesh, StiffnessForm
from kirchhoff_mp.model import ProblemSpec, SineBumpM, SineF

CANONICAL_HEIGHTS = [1.2206831487523924, 0.537121085738022]
CANONICAL_ALPHAS = [0.14049125592410916, 0.3892059376415216]


@pytest.fixture
def canonical_path():
    return bundled_config("canonical")


@pytest.fixture
def canonical_data(canonical_path):
    return json.loads(canonical_path.read_text())


@pytest.fixture
def canonical_cfg(canonical_path):
    return load_config(canonical_path)


@pytest.fixture
def canonical_problem():
    return ProblemSpec(SineBumpM([1.0, 4.0], CANONICAL_HEIGHTS), SineF(1.0))


def line(n_elements, length=1.0):
    mesh = Mesh([length], [n_elements + 1])
    return mesh, StiffnessForm(mesh)


@pytest.fixture
def line64():
    return line(64)


@pytest.fixture
def line16():
    return line(16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def write_config(tmp_path):
    def _write(data, name="cfg.json"):
        p = tmp_path / name
        p.write_text(json.dumps(data, indent=2))
        return p

    return _write


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
