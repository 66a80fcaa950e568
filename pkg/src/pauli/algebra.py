#!/usr/bin/env python3
"""
Pauli strings, expectation values and Pauli transfer matrices

Single-site index order is I=0, X=1, Y=2, Z=3; a k-site index is the base-4
number with site 0 most significant, matching the Kronecker convention.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import opt_einsum as oe

from src.tensor.core import Tensor, apply_local, as_array
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

ALPHABET = 'IXYZ'

PAULIS = np.array([
    [[1, 0], [0, 1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=np.complex128)

IMAG_TOLERANCE = 1e-10


@dataclass(frozen=True)
class PauliString:
    """Pauli string over consecutive sites, leftmost character = site 0"""

    labels: str

    def __post_init__(self):
        labels = str(self.labels).upper()
        if not labels or any(c not in ALPHABET for c in labels):
            raise ValidationError(f"Invalid Pauli string '{self.labels}'")
        object.__setattr__(self, 'labels', labels)

    @classmethod
    def from_indices(cls, indices):
        return cls(''.join(ALPHABET[int(i)] for i in indices))

    @classmethod
    def from_index(cls, index, n):
        """Decode a base-4 string index over n sites"""
        digits = []
        for _ in range(n):
            digits.append(index % 4)
            index //= 4
        return cls.from_indices(reversed(digits))

    @property
    def n(self):
        return len(self.labels)

    @property
    def indices(self):
        return tuple(ALPHABET.index(c) for c in self.labels)

    @property
    def index(self):
        value = 0
        for i in self.indices:
            value = 4 * value + i
        return value

    @property
    def support(self):
        return tuple(i for i, c in enumerate(self.labels) if c != 'I')

    def __str__(self):
        return self.labels


def all_labels(k):
    """All 4^k strings in index order"""
    return [''.join(p) for p in itertools.product(ALPHABET, repeat=k)]


def pauli_matrix(p):
    """Kronecker product of single-site Pauli matrices in site order"""
    if not isinstance(p, PauliString):
        p = PauliString(p)
    matrix = np.ones((1, 1), dtype=np.complex128)
    for i in p.indices:
        matrix = np.kron(matrix, PAULIS[i])
    return Tensor(matrix)


def apply_pauli(state, p):
    """Apply a Pauli string to an n-qubit state vector"""
    if not isinstance(p, PauliString):
        p = PauliString(p)
    psi = as_array(state)
    if psi.size != 2 ** p.n:
        raise ValidationError(f"Pauli string on {p.n} sites does not match state of size {psi.size}")
    for site, i in enumerate(p.indices):
        if i:
            psi = apply_local(psi, PAULIS[i], [site])
    return psi


def expectation(state, obs):
    """Real expectation value of a Hermitian observable or Pauli string"""
    data = as_array(state)
    if isinstance(obs, str):
        obs = PauliString(obs)

    if isinstance(obs, PauliString):
        if data.ndim == 1:
            value = np.vdot(data, apply_pauli(data, obs))
        else:
            value = np.trace(data @ pauli_matrix(obs).data)
        hermitian = True
    else:
        matrix = as_array(obs)
        dim = data.shape[0]
        if matrix.shape != (dim, dim):
            raise ValidationError(f"Observable {matrix.shape} does not match state of dimension {dim}")
        value = np.vdot(data, matrix @ data) if data.ndim == 1 else np.trace(data @ matrix)
        hermitian = np.allclose(matrix, matrix.conj().T, atol=1e-12)

    if hermitian and abs(value.imag) > IMAG_TOLERANCE * max(1.0, abs(value.real)):
        raise ValidationError(f"Expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


@lru_cache(maxsize=None)
def _site_maps():
    # forward[a, r, c] = sigma_a[c, r] gives tr(sigma_a X); backward is sigma_a itself
    forward = np.ascontiguousarray(np.transpose(PAULIS, (0, 2, 1)).reshape(4, 4))
    backward = PAULIS.reshape(4, 4)
    return forward, backward


def _pair_legs(matrix, k):
    t = matrix.reshape((2,) * (2 * k))
    order = [axis for site in range(k) for axis in (site, k + site)]
    return np.transpose(t, order).reshape((4,) * k)


def pauli_coefficients(op):
    """tr(sigma_c op) / 2^k for all 4^k strings c, as a flat array"""
    matrix = as_array(op)
    dim = matrix.shape[0]
    k = int(round(np.log2(dim)))
    if matrix.shape != (2 ** k, 2 ** k):
        raise ValidationError(f"Operator {matrix.shape} is not a k-qubit matrix")
    forward, _ = _site_maps()
    t = _pair_legs(matrix, k)
    for site in range(k):
        t = np.moveaxis(np.tensordot(forward, t, axes=([1], [site])), 0, site)
    return t.reshape(-1) / dim


def pauli_operator(coefficients):
    """Sum_c coefficients[c] sigma_c over k sites"""
    coefficients = np.asarray(coefficients, dtype=np.complex128).reshape(-1)
    k = int(round(np.log(coefficients.size) / np.log(4)))
    if 4 ** k != coefficients.size:
        raise ValidationError(f"{coefficients.size} coefficients do not index a Pauli basis")
    _, backward = _site_maps()
    t = coefficients.reshape((4,) * k)
    for site in range(k):
        t = np.moveaxis(np.tensordot(backward, t, axes=([0], [site])), 0, site)
    t = t.reshape((2, 2) * k)
    order = [2 * site for site in range(k)] + [2 * site + 1 for site in range(k)]
    return np.transpose(t, order).reshape(2 ** k, 2 ** k)


def density_from_expectations(expectations):
    """rho = sum_c <sigma_c> sigma_c / 2^k"""
    expectations = np.asarray(expectations, dtype=float).reshape(-1)
    k = int(round(np.log(expectations.size) / np.log(4)))
    return pauli_operator(expectations) / 2 ** k


def transfer_matrix(u):
    """Pauli transfer matrix of a unitary channel, PTM[b, a] = tr(s_b u s_a u^dag) / 2^k"""
    u = as_array(u)
    dim = u.shape[0]
    k = int(round(np.log2(dim)))
    basis = np.array([pauli_matrix(label).data for label in all_labels(k)])
    ptm = oe.contract('bij,jk,akl,li->ba', basis, u, basis, u.conj().T) / dim
    return np.ascontiguousarray(ptm.real).reshape((4,) * (2 * k))


def isometry_transfer(w):
    """Transfer tensor of a chi x 2^k isometry, T[c, b...] = tr(s_c w s_b w^dag) / chi"""
    w = as_array(w)
    chi, dim = w.shape
    if chi != 2:
        raise ValidationError(f"Isometry output dimension {chi} is not a qubit")
    k = int(round(np.log2(dim)))
    basis = np.array([pauli_matrix(label).data for label in all_labels(k)])
    transfer = oe.contract('cij,jk,bkl,li->cb', PAULIS, w, basis, w.conj().T) / chi
    return np.ascontiguousarray(transfer.real).reshape((4,) * (k + 1))
