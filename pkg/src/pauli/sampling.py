#!/usr/bin/env python3
"""
Simulated tensor-product Pauli measurements (the 3^k setting scheme)
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from src.pauli.algebra import ALPHABET, PauliString, pauli_coefficients
from src.tensor.core import apply_local, as_array, partial_trace
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

# Rotations taking the X / Y eigenbasis to the computational basis
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
S_DAG = np.diag([1, -1j]).astype(np.complex128)
ROTATIONS = {
    'X': HADAMARD,
    'Y': HADAMARD @ S_DAG,
}


@dataclass(frozen=True)
class MeasurementRecord:
    """Outcome counts of one setting; outcome index bits follow window order"""

    setting: PauliString
    shots: int
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.sum() != self.shots:
            raise ValidationError(f"Counts sum to {counts.sum()}, expected {self.shots} shots")
        counts.setflags(write=False)
        object.__setattr__(self, 'counts', counts)

    def marginal(self, mask):
        """Estimated expectation of the sub-string keeping window positions in 'mask'"""
        k = self.setting.n
        if not mask:
            return 1.0
        outcomes = np.arange(2 ** k)
        parity = np.zeros(2 ** k, dtype=np.int64)
        for position in mask:
            parity ^= (outcomes >> (k - 1 - position)) & 1
        signs = 1 - 2 * parity
        return float(np.dot(signs, self.counts) / self.shots)

    def estimates(self):
        """Expectation estimates for every sub-string of the setting"""
        k = self.setting.n
        result = {}
        for mask in itertools.product((False, True), repeat=k):
            positions = [i for i, keep in enumerate(mask) if keep]
            label = ''.join(c if keep else 'I' for c, keep in zip(self.setting.labels, mask))
            result[label] = self.marginal(positions)
        return result


def outcome_distribution(state, setting, sites=None):
    """Joint outcome probabilities of a setting measured on 'sites'"""
    psi = as_array(state)
    if psi.ndim != 1:
        raise ValidationError("Sampling needs a pure state vector")
    n = int(round(np.log2(psi.size)))
    sites = list(range(setting.n)) if sites is None else [int(s) for s in sites]
    if len(sites) != setting.n:
        raise ValidationError(f"Setting {setting} does not match {len(sites)} sites")

    for label, site in zip(setting.labels, sites):
        if label in ROTATIONS:
            psi = apply_local(psi, ROTATIONS[label], [site])

    probabilities = np.real(np.diag(partial_trace(psi, [2] * n, sites)))
    probabilities = np.clip(probabilities, 0.0, None)
    return probabilities / probabilities.sum()


def sample_setting(state, setting, shots, seed, sites=None):
    """Draw 'shots' joint outcomes of a tensor-product Pauli setting"""
    if not isinstance(setting, PauliString):
        setting = PauliString(setting)
    if 'I' in setting.labels:
        raise ValidationError(f"Setting {setting} has an identity on the measured window")
    if int(shots) <= 0:
        raise ValidationError(f"shots must be positive, got {shots}")

    rng = np.random.default_rng(seed)
    probabilities = outcome_distribution(state, setting, sites)
    counts = rng.multinomial(int(shots), probabilities)
    return MeasurementRecord(setting=setting, shots=int(shots), counts=counts)


def exact_block_expectations(state, sites):
    """All 4^k Pauli expectations of a block, from the reduced density matrix"""
    psi = as_array(state)
    n = int(round(np.log2(psi.shape[0])))
    rho = partial_trace(psi, [2] * n, list(sites))
    return np.real(pauli_coefficients(rho) * 2 ** len(sites))


def sampled_block_expectations(state, sites, shots, seed):
    """All 4^k Pauli expectations of a block from 3^k settings with 'shots' each.

    Every string is estimated by averaging its marginal over the settings
    compatible with it; the identity string is exactly 1.
    """
    k = len(sites)
    rng = np.random.default_rng(seed)
    totals = np.zeros(4 ** k)
    hits = np.zeros(4 ** k)
    masks = list(itertools.product((False, True), repeat=k))

    for labels in itertools.product('XYZ', repeat=k):
        setting = PauliString(''.join(labels))
        record = sample_setting(state, setting, shots, rng, sites)
        for mask in masks:
            positions = [i for i, keep in enumerate(mask) if keep]
            index = 0
            for i, keep in enumerate(mask):
                index = 4 * index + (ALPHABET.index(labels[i]) if keep else 0)
            totals[index] += record.marginal(positions)
            hits[index] += 1

    logger.debug(f"Sampled {3 ** k} settings x {shots} shots on sites {list(sites)}")
    return totals / hits
