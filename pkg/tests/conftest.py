import json

import numpy as np
import pytest

from src.mera.circuit import evaluate_state, random_mera
from src.states.prep import haar_state


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(k, rng, rank=None):
    dim = 2 ** k
    rank = rank or dim
    a = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def isometric_mera_state():
    """n=8 state from identity disentanglers and Haar isometries"""
    circuit = random_mera(8, 'binary', seed=7, identity_disentanglers=True)
    top = haar_state(4, np.random.default_rng(3))
    return evaluate_state(circuit, top), circuit


@pytest.fixture
def config_file(tmp_path):
    def write(**overrides):
        document = {
            'output_dir': str(tmp_path / 'output'),
            'logging': {'file': str(tmp_path / 'logs' / 'run.log'), 'console': False}
        }
        document.update(overrides)
        path = tmp_path / 'config.json'
        path.write_text(json.dumps(document))
        return path
    return write
