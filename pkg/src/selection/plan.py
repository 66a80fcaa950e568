#!/usr/bin/env python3
"""
Renormalized bases, measurement allocation and conditioning factors
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from src.mera.ascend import ascend_operator, contract_named, embed_operator, transfer_terms
from src.pauli.algebra import pauli_operator
from src.selection.candidates import BLOCK_SITES, block_starts, candidates
from src.selection.greedy import lrv_select, one_by_one_replace
from src.tensor.core import hermitian_eig
from src.utils.errors import GeometryError, NumericError

logger = logging.getLogger(__name__)

BASIS_SIZE = 4 ** BLOCK_SITES
NORMALIZATION = 16.0
GRAM_TOLERANCE = 1e-10
FEASIBILITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class RenormalizedBasis:
    """Selected physical strings with their ascended coordinates and Gram data.

    coefficients[j] are the orthonormal coordinates x_j of A[O^j];
    R_i = sum_j beta[i, j] A[O^j] with tr(R_i R_k) = 16 delta_ik.
    """

    level: int
    block: Tuple[int, ...]
    window: Tuple[int, ...]
    labels: List[str] = field(repr=False)
    coefficients: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    log_abs_det: float = 0.0

    @property
    def orthogonal_coefficients(self):
        """Pauli-string coefficients of every R_i (R_i = sum_c r[i, c] s_c)"""
        return self.beta @ self.coefficients / 4.0

    def orthogonal_operators(self):
        return np.array([pauli_operator(row) for row in self.orthogonal_coefficients])

    def estimate(self, expectations):
        """rho = sum_i tr(rho R_i) R_i / 16 from the expectations of the selected strings"""
        r = self.beta @ np.asarray(expectations, dtype=float)
        return pauli_operator(self.orthogonal_coefficients.T @ r / NORMALIZATION)

    def trace_factor(self, per_column=False):
        """||sum_ij beta_ij R_i||_1, or sum_j ||sum_i beta_ij R_i||_1"""
        rows = self.orthogonal_coefficients
        if not per_column:
            combined = self.beta.sum(axis=1) @ rows
            return float(np.sum(linalg.svdvals(pauli_operator(combined))))
        total = 0.0
        for column in (self.beta.T @ rows):
            total += float(np.sum(linalg.svdvals(pauli_operator(column))))
        return total

    def to_dict(self):
        return {
            'level': self.level,
            'block': list(self.block),
            'window': list(self.window),
            'labels': list(self.labels),
            'log_abs_det': self.log_abs_det
        }


@dataclass(frozen=True)
class MeasurementPlan:
    """Shot multipliers per selected string and the conditioning factor"""

    labels: List[str] = field(repr=False)
    weights: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    k: float
    multipliers: np.ndarray = field(repr=False)
    conditioning: float
    m0: int
    shots: np.ndarray = field(repr=False)

    @property
    def total(self):
        return int(np.sum(self.shots))

    def feasibility(self):
        """max_i sum_j B_ij / N_j; at most 1 on every emitted plan"""
        return float(np.max(self.weights @ (1.0 / self.multipliers)))

    def to_dict(self):
        return {
            'labels': list(self.labels),
            'multipliers': [float(x) for x in self.multipliers],
            'shots': [int(x) for x in self.shots],
            'K': self.k,
            'S': self.conditioning,
            'M0': self.m0,
            'N': self.total
        }


def gram_orthogonalize(coefficients, labels, level=0, block=(), window=(), log_det=0.0, tolerance=GRAM_TOLERANCE):
    """Gram matrix G = X X^T = Z D Z^T and beta_ij = 4 Z_ji / sqrt(D_ii)"""
    x = np.asarray(coefficients, dtype=float)
    gram = x @ x.T
    scale = np.max(np.abs(np.diag(gram)))
    off_diagonal = gram - np.diag(np.diag(gram))
    if np.max(np.abs(off_diagonal), initial=0.0) <= tolerance * scale:
        values, vectors = np.diag(gram).copy(), np.eye(len(gram))
    else:
        spectrum = hermitian_eig(gram)
        values, vectors = spectrum.eigenvalues, spectrum.eigenvectors.real
    if np.min(values) <= tolerance * scale:
        raise NumericError(f"Gram matrix is singular (smallest eigenvalue {np.min(values):.3e})")

    beta = 4.0 * vectors.T / np.sqrt(values)[:, None]
    return RenormalizedBasis(
        level=level,
        block=tuple(block),
        window=tuple(window),
        labels=list(labels),
        coefficients=x,
        gram=gram,
        beta=beta,
        log_abs_det=float(log_det)
    )


def allocate(basis, m0):
    """Multipliers N_j = max(1, K gamma_j) satisfying sum_j B_ij / N_j <= 1"""
    weights = basis.beta ** 2
    gamma = weights.max(axis=0)
    k = float(np.max(np.sum(weights / gamma, axis=1)))
    multipliers = np.maximum(1.0, k * gamma)
    plan = MeasurementPlan(
        labels=list(basis.labels),
        weights=weights,
        gamma=gamma,
        k=k,
        multipliers=multipliers,
        conditioning=float(np.sum(multipliers) / len(multipliers)),
        m0=int(m0),
        shots=np.ceil(multipliers * m0 - 1e-9).astype(np.int64)
    )
    if plan.feasibility() > 1.0 + FEASIBILITY_TOLERANCE:
        raise AssertionError(f"Allocation infeasible: {plan.feasibility():.12f}")
    return plan


def select_basis(pool, level, block, window, passes=1000, labels=None):
    """LRV + replacement over a candidate pool, then Gram orthogonalization"""
    vectors = pool if labels is not None else pool.coefficients
    labels = labels if labels is not None else pool.labels
    selection = lrv_select(vectors, BASIS_SIZE, pinned=0)
    if passes:
        selection = one_by_one_replace(vectors, selection, max_passes=passes, pinned=0)
    chosen = selection.indices
    return gram_orthogonalize(
        np.asarray(vectors)[chosen],
        [labels[i] for i in chosen],
        level=level,
        block=block,
        window=window,
        log_det=selection.log_abs_det
    )


def block_basis(layer, j, m0, window='interior', passes=1000):
    """Full pipeline for one level block: candidates, selection, basis, plan"""
    pool = candidates(layer, j, window)
    basis = select_basis(pool, layer.level, pool.block, pool.window, passes)
    plan = allocate(basis, m0)
    logger.info(f"Level {layer.level} block {j}: S={plan.conditioning:.4f}, K={plan.k:.4f}")
    return basis, plan


@dataclass(frozen=True)
class LayerConditioning:
    level: int
    factor: float
    bases: List[RenormalizedBasis] = field(repr=False)
    plans: List[MeasurementPlan] = field(repr=False)


def layer_conditioning(layer, m0, window='interior', passes=1000, blocks=None):
    """Bases and plans of all blocks the next layer needs; S is their mean"""
    starts = block_starts(layer) if blocks is None else list(blocks)
    if not starts:
        raise GeometryError(f"Level {layer.level} lattice of {layer.output_size} sites has no 4-site block")
    bases, plans = [], []
    for j in starts:
        basis, plan = block_basis(layer, j, m0, window, passes)
        bases.append(basis)
        plans.append(plan)
    factor = float(np.mean([p.conditioning for p in plans]))
    return LayerConditioning(level=layer.level, factor=factor, bases=bases, plans=plans)


def conditioning_factor(layer, m0, window='interior', passes=1000):
    """S_{tau-1 -> tau} of one layer"""
    return layer_conditioning(layer, m0, window, passes).factor


def cumulative_conditioning(factors):
    """S_{0 -> l} as the running product of per-layer factors"""
    return [float(x) for x in np.cumprod(factors)]


def two_level_conditioning(layer1, layer2, m0, block=0, passes=1000):
    """S_{0 -> 2} for level-2 block 'block' from two non-interfering 6-site windows"""
    if layer2.size != 8 and layer2.size < 12:
        raise GeometryError(f"Two-level conditioning needs a level-1 lattice of 8 or >= 12 sites, got {layer2.size}")
    halves = [(2 * block) % layer1.output_size, (2 * block + 4) % layer1.output_size]
    windows = [set(range(2 * s + 1, 2 * s + 7)) for s in halves]
    windows = [{site % layer1.size for site in w} for w in windows]
    touched = []
    for w in windows:
        gates = {k for k, g in enumerate(layer1.disentanglers) if w.intersection(g.sites)}
        touched.append(gates)
    if touched[0] & touched[1] or windows[0] & windows[1]:
        raise GeometryError(f"Half windows of level-2 block {block} interfere")

    parts = []
    for s in halves:
        pool = candidates(layer1, s, 'central')
        parts.append(select_basis(pool, layer1.level, pool.block, pool.window, passes))

    terms, _, _ = transfer_terms(layer2, block, closure=True)
    xa = parts[0].coefficients.reshape((BASIS_SIZE,) + (4,) * BLOCK_SITES)
    xb = parts[1].coefficients.reshape((BASIS_SIZE,) + (4,) * BLOCK_SITES)
    products = contract_named(
        terms + [(xa, ['p', 'a0', 'a1', 'a2', 'a3']), (xb, ['q', 'a4', 'a5', 'a6', 'a7'])],
        ['p', 'q', 'c0', 'c1', 'c2', 'c3']
    ) / 4.0
    vectors = np.ascontiguousarray(products.reshape(BASIS_SIZE * BASIS_SIZE, BASIS_SIZE))
    labels = [a + b for a in parts[0].labels for b in parts[1].labels]

    basis = select_basis(vectors, 2, tuple((block + i) % layer2.output_size for i in range(4)),
                         tuple(sorted(windows[0] | windows[1])), passes, labels=labels)
    plan = allocate(basis, m0)
    logger.info(f"Two-level conditioning for level-2 block {block}: S={plan.conditioning:.4f}")
    return plan.conditioning


def distributivity_deviation(layer, op_a, support_a, op_b, support_b):
    """Frobenius norm of A(O_A O_B) - A(O_A) A(O_B) on the joint ascended support"""
    union = list(dict.fromkeys(list(support_a) + list(support_b)))
    joint = embed_operator(op_a, support_a, union) @ embed_operator(op_b, support_b, union)
    ascended, target = ascend_operator(layer, joint, union)
    a, sa = ascend_operator(layer, op_a, support_a)
    b, sb = ascend_operator(layer, op_b, support_b)
    product = embed_operator(a, sa, target) @ embed_operator(b, sb, target)
    return float(np.linalg.norm(ascended - product))
