#!/usr/bin/env python3
"""
Target states: critical spin-chain ground states, random MERA states and
their Haar-perturbed versions
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from src.mera.circuit import evaluate_state, random_mera
from src.pauli.algebra import pauli_matrix
from src.tensor.core import as_array, fix_phases
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

MODELS = ('ising', 'xx')
DEGENERACY_TOLERANCE = 1e-8


@dataclass(frozen=True)
class SpinModel:
    """Periodic spin chain: ising = -sum XX - sum Z, xx = sum (XX + YY)"""

    name: str
    n: int
    boundary: str = 'periodic'

    def __post_init__(self):
        if self.name not in MODELS:
            raise ValidationError(f"Unknown model '{self.name}', expected one of {MODELS}")
        if self.n < 2:
            raise ValidationError(f"A chain needs at least 2 sites, got {self.n}")
        if self.boundary != 'periodic':
            raise ValidationError("Only periodic boundaries are supported")

    @property
    def bonds(self):
        return [(i, (i + 1) % self.n) for i in range(self.n)]

    def _masks(self):
        n = self.n
        return [(1 << (n - 1 - i)) | (1 << (n - 1 - j)) for i, j in self.bonds]

    def matvec(self, vector):
        n = self.n
        states = np.arange(2 ** n)
        out = np.zeros_like(vector)
        if self.name == 'ising':
            out -= (n - 2 * _popcount(n)) * vector
            for mask in self._masks():
                out -= vector[states ^ mask]
        else:
            # XX + YY flips a bond only when its two spins differ
            for mask in self._masks():
                bits = states & mask
                differ = (bits != 0) & (bits != mask)
                out += 2.0 * np.where(differ, vector[states ^ mask], 0.0)
        return out

    def operator(self):
        dim = 2 ** self.n
        return LinearOperator((dim, dim), matvec=self.matvec, dtype=np.float64)

    def dense_hamiltonian(self):
        """Dense matrix from Pauli strings (oracle for small n)"""
        n = self.n

        def string(assignments):
            labels = ['I'] * n
            for site, label in assignments:
                labels[site] = label
            return pauli_matrix(''.join(labels)).data

        h = np.zeros((2 ** n, 2 ** n), dtype=np.complex128)
        for i, j in self.bonds:
            if self.name == 'ising':
                h -= string([(i, 'X'), (j, 'X')])
            else:
                h += string([(i, 'X'), (j, 'X')]) + string([(i, 'Y'), (j, 'Y')])
        if self.name == 'ising':
            for i in range(n):
                h -= string([(i, 'Z')])
        return h


@dataclass(frozen=True)
class GroundState:
    """Lowest eigenvector with its diagnostics"""

    state: np.ndarray = field(repr=False)
    energy: float
    residual: float
    gap: float
    degenerate: bool

    def metadata(self, model):
        return {
            'model': model.name,
            'n': model.n,
            'energy': self.energy,
            'residual': self.residual,
            'gap': self.gap,
            'degenerate': self.degenerate
        }


def _popcount(n):
    states = np.arange(2 ** n)
    count = np.zeros(2 ** n, dtype=np.int64)
    for site in range(n):
        count += (states >> site) & 1
    return count


def _parity(n):
    return 1 - 2 * (_popcount(n) % 2)


def ground_state(model, max_sites=20):
    """Ground state by Lanczos (eigsh, smallest algebraic) on the full register"""
    if model.n > max_sites:
        raise ValidationError(f"n={model.n} exceeds the eigensolver cap of {max_sites} sites")

    dim = 2 ** model.n
    start = np.random.default_rng(0).standard_normal(dim)
    if dim <= 4:
        values, vectors = np.linalg.eigh(model.dense_hamiltonian().real)
        values, vectors = values[:2], vectors[:, :2]
    else:
        values, vectors = eigsh(model.operator(), k=2, which='SA', v0=start, tol=0)
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]

    gap = float(values[1] - values[0])
    degenerate = gap < DEGENERACY_TOLERANCE
    psi = vectors[:, 0]
    if degenerate:
        # symmetric member of the ground space under the global spin flip
        parity = _parity(model.n)
        for vector in (vectors[:, 0], vectors[:, 1]):
            projected = 0.5 * (vector + parity * vector)
            if np.linalg.norm(projected) > 1e-6:
                psi = projected
                break
        logger.warning(f"{model.name} n={model.n}: degenerate ground space (gap {gap:.2e}), symmetric vector chosen")

    psi = psi / np.linalg.norm(psi)
    psi = fix_phases(psi.reshape(-1, 1)).reshape(-1)
    energy = float(np.real(np.vdot(psi, model.matvec(psi.real.astype(np.float64)))))
    residual = float(np.linalg.norm(model.matvec(psi.real.astype(np.float64)) - energy * psi))
    logger.info(f"{model.name} n={model.n}: E0={energy:.10f}, gap={gap:.3e}, residual={residual:.2e}")
    return GroundState(state=psi.astype(np.complex128), energy=energy, residual=residual, gap=gap, degenerate=degenerate)


def haar_state(dim, rng):
    vector = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return vector / np.linalg.norm(vector)


def perturbed_state(base, delta, seed):
    """sqrt(1 - delta^2) base + delta psi_e with Haar-random psi_e, renormalized"""
    psi = as_array(base)
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValidationError("Base state is not normalized")
    error = haar_state(psi.size, np.random.default_rng(seed))
    out = np.sqrt(1.0 - delta ** 2) * psi + delta * error
    return out / np.linalg.norm(out)


def random_mera_state(n, geometry='binary', seed=0, chi=2):
    """Random MERA circuit and the state it generates from a Haar-random top"""
    circuit = random_mera(n, geometry, chi, seed)
    top = haar_state(chi ** circuit.top_size, np.random.default_rng([seed, 1]))
    return evaluate_state(circuit, top), circuit
