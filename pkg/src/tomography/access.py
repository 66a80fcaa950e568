#!/usr/bin/env python3
"""
Access to expectation values of the target state at every level.

Level 0 is the physical state. Level tau > 0 is the renormalized state
normalize(P U psi) obtained through the layers reconstructed so far.
"""

import logging

import numpy as np

from src.mera.circuit import ascend_state
from src.pauli.algebra import PauliString, pauli_coefficients
from src.pauli.sampling import exact_block_expectations, sample_setting, sampled_block_expectations
from src.tensor.core import as_array, partial_trace
from src.utils.errors import EstimationError, ValidationError

logger = logging.getLogger(__name__)

MODES = ('exact', 'sampled')


class StateAccess:
    """Exact or shot-sampled Pauli expectations of a state and its renormalized images"""

    def __init__(self, state, mode='exact', shots=1000, seed=0):
        if mode not in MODES:
            raise ValidationError(f"Unknown measurement mode '{mode}'")
        psi = as_array(state)
        if psi.ndim != 1 or abs(np.linalg.norm(psi) - 1.0) > 1e-8:
            raise ValidationError("State access needs a normalized state vector")
        self.mode = mode
        self.shots = int(shots)
        self.rng = np.random.default_rng(seed)
        self.states = [psi]
        self.discarded = []
        self.logger = logging.getLogger(__name__)

    @property
    def n(self):
        return int(round(np.log2(self.states[0].size)))

    @property
    def depth(self):
        return len(self.states) - 1

    @property
    def sampled(self):
        return self.mode == 'sampled'

    def state(self, level):
        if level > self.depth:
            raise EstimationError(f"Level {level} has not been reached (depth {self.depth})")
        return self.states[level]

    def push_layer(self, layer):
        """Renormalize the deepest state through a reconstructed layer"""
        phi, discarded = ascend_state(layer, self.states[-1])
        self.states.append(phi)
        self.discarded.append(discarded)
        self.logger.debug(f"Level {layer.level} state: discarded weight {discarded:.3e}")
        return phi

    def block_expectations(self, level, sites):
        """All 4^k Pauli expectations of a block (3^k settings when sampled)"""
        psi = self.state(level)
        if self.sampled:
            return sampled_block_expectations(psi, list(sites), self.shots, self.rng)
        return exact_block_expectations(psi, list(sites))

    def string_expectations(self, level, window, labels, shots=None):
        """Expectations of window strings; sampled strings measure I as Z and marginalize"""
        psi = self.state(level)
        window = list(window)
        if not self.sampled:
            n = int(round(np.log2(psi.size)))
            rho = partial_trace(psi, [2] * n, window)
            table = np.real(pauli_coefficients(rho)) * 2 ** len(window)
            return np.array([table[PauliString(label).index] for label in labels])

        values = np.empty(len(labels))
        for r, label in enumerate(labels):
            positions = [i for i, c in enumerate(label) if c != 'I']
            if not positions:
                values[r] = 1.0
                continue
            count = int(shots[r]) if shots is not None else self.shots
            setting = label.replace('I', 'Z')
            record = sample_setting(psi, setting, count, self.rng, window)
            values[r] = record.marginal(positions)
        return values
