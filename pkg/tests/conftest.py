import logging

import numpy as np
import pytest

from fblsecure.channel import ScenarioConfig, drop_seed, generate_drop
from fblsecure.core import FblParams
from fblsecure.forms import QuadraticFormSet


@pytest.fixture(autouse=True)
def _quiet_clamp_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="fblsecure.forms")


def random_unit(rng, size):
    f = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return f / np.linalg.norm(f)


def random_forms(rng, n=4, k=2, m=2, load=0.1, eve_scale=0.5):
    h = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
    g = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    return QuadraticFormSet(np.einsum("kn,kp->knp", h, h.conj()),
                            eve_scale * np.einsum("kn,kp->knp", g, g.conj()), load, load)


def unit_params(load=0.1, **kw):
    return FblParams(power=1.0, noise_user=load, noise_eve=load, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def default_drop():
    cfg = ScenarioConfig()
    return cfg, generate_drop(cfg, drop_seed(42, 0))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
