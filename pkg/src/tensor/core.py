#!/usr/bin/env python3
"""
Dense complex tensor substrate

Conventions used throughout the toolkit:
- data are complex128 in row-major (C) order;
- a multi-site operator on sites (s_0, ..., s_{k-1}) is a 2^k x 2^k matrix whose
  row/column index is the Kronecker index with s_0 most significant;
- contraction outputs list a's free legs, then b's free legs, each in
  their original order.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import linalg

from src.utils.errors import ContractionError, NumericError, ValidationError

logger = logging.getLogger(__name__)

HERMITIAN_RTOL = 1e-10


@dataclass(frozen=True)
class Tensor:
    """Immutable dense complex tensor with leg dimensions"""

    data: np.ndarray

    def __post_init__(self):
        array = np.array(self.data, dtype=np.complex128, order='C', copy=True)
        array.setflags(write=False)
        object.__setattr__(self, 'data', array)

    @property
    def shape(self):
        return tuple(self.data.shape)

    @property
    def size(self):
        return int(self.data.size)

    def reshape(self, *shape):
        return Tensor(self.data.reshape(*shape))

    def permute(self, axes):
        return Tensor(np.transpose(self.data, axes))

    def dagger(self):
        if self.data.ndim != 2:
            raise ValidationError(f"dagger needs a matrix, got {self.data.ndim} legs")
        return Tensor(self.data.conj().T)

    def as_matrix(self):
        return self.data.reshape(_square_side(self.data), -1)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues sorted descending, eigenvectors as matching columns"""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_array(x):
    """Accept Tensor or array-like, return a complex ndarray view"""
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=np.complex128)


def _square_side(array):
    side = int(round(np.sqrt(array.size)))
    if side * side != array.size:
        raise ValidationError(f"Cannot view {array.shape} as a square matrix")
    return side


def _check_finite(array, what):
    if not np.all(np.isfinite(array)):
        raise NumericError(f"{what} has non-finite entries")


def contract(a, b, pairs: Sequence[Tuple[int, int]]):
    """Contract legs pairs[i][0] of a with pairs[i][1] of b"""
    a_data, b_data = as_array(a), as_array(b)
    for leg_a, leg_b in pairs:
        if leg_a >= a_data.ndim or leg_b >= b_data.ndim:
            raise ContractionError(f"Leg pair ({leg_a}, {leg_b}) out of range for shapes {a_data.shape}, {b_data.shape}")
        if a_data.shape[leg_a] != b_data.shape[leg_b]:
            raise ContractionError(
                f"Dimension mismatch on pair ({leg_a}, {leg_b}): "
                f"{a_data.shape[leg_a]} != {b_data.shape[leg_b]}"
            )
    axes_a = [p[0] for p in pairs]
    axes_b = [p[1] for p in pairs]
    return Tensor(np.tensordot(a_data, b_data, axes=(axes_a, axes_b)))


def svd(m):
    """Thin SVD m = U diag(S) V^dagger with S descending"""
    data = as_array(m)
    if data.ndim != 2:
        raise ValidationError(f"svd needs a 2-leg tensor, got {data.ndim} legs")
    _check_finite(data, 'svd input')
    u, s, vh = linalg.svd(data, full_matrices=False, lapack_driver='gesvd')
    return u, s, vh.conj().T


def fix_phases(vectors):
    """Make the largest-magnitude entry of every column real-positive"""
    vectors = np.array(vectors, dtype=np.complex128)
    pivots = np.argmax(np.abs(vectors), axis=0)
    cols = np.arange(vectors.shape[1])
    entries = vectors[pivots, cols]
    phases = np.where(np.abs(entries) > 0, entries / np.abs(entries), 1.0)
    return vectors / phases


def hermitian_eig(m):
    """Eigendecomposition of a Hermitian matrix, descending, gauge-fixed"""
    data = as_array(m)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise ValidationError(f"hermitian_eig needs a square matrix, got {data.shape}")
    _check_finite(data, 'hermitian_eig input')
    scale = np.linalg.norm(data)
    if np.linalg.norm(data - data.conj().T) > HERMITIAN_RTOL * max(scale, 1.0):
        raise ValidationError("Matrix is not Hermitian")
    values, vectors = linalg.eigh(0.5 * (data + data.conj().T))
    order = np.argsort(-values, kind='stable')
    return SpectralDecomposition(values[order], fix_phases(vectors[:, order]))


def apply_local(state, op, sites: Sequence[int]):
    """Apply a 2^k x 2^k operator to the listed qubits of an n-qubit vector"""
    psi = as_array(state)
    n = int(round(np.log2(psi.size)))
    if 2 ** n != psi.size:
        raise ValidationError(f"State of size {psi.size} is not a qubit register")
    sites = [int(s) for s in sites]
    k = len(sites)
    op = as_array(op)
    if op.shape != (2 ** k, 2 ** k):
        raise ContractionError(f"Operator {op.shape} does not act on {k} sites")
    if len(set(sites)) != k or any(s < 0 or s >= n for s in sites):
        raise ValidationError(f"Invalid sites {sites} for {n} qubits")
    t = psi.reshape((2,) * n)
    t = np.tensordot(op.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), sites))
    t = np.moveaxis(t, list(range(k)), sites)
    return np.ascontiguousarray(t).reshape(-1)


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]):
    """Reduced matrix on the kept subsystems, legs in the order of 'keep'.

    rho may be a square matrix over prod(dims) or a pure state vector; the
    matrix need not be Hermitian (environments use the same routine).
    """
    data = as_array(rho)
    dims = [int(d) for d in dims]
    n = len(dims)
    keep = [int(k) for k in keep]
    if any(k < 0 or k >= n for k in keep) or len(set(keep)) != len(keep):
        raise ValidationError(f"keep indices {keep} invalid for {n} subsystems")
    total = int(np.prod(dims))
    traced = [i for i in range(n) if i not in keep]
    kept_dim = int(np.prod([dims[k] for k in keep])) if keep else 1

    if data.ndim == 1:
        if data.size != total:
            raise ValidationError(f"State of size {data.size} does not match dims {dims}")
        psi = np.transpose(data.reshape(dims), keep + traced).reshape(kept_dim, -1)
        return psi @ psi.conj().T

    if data.shape != (total, total):
        raise ValidationError(f"Matrix of shape {data.shape} does not match dims {dims}")
    t = data.reshape(dims + dims)
    perm = keep + traced + [n + k for k in keep] + [n + i for i in traced]
    traced_dim = total // kept_dim
    t = np.transpose(t, perm).reshape(kept_dim, traced_dim, kept_dim, traced_dim)
    return np.einsum('ajbj->ab', t)
