#!/usr/bin/env python3
"""
Ascending superoperator A[O] = P U O U^dag P^dag through one layer

Two routes:
- ascend_operator contracts a dense operator through the causal-cone gates
  (reference route, any support);
- window transfer tensors give A on the Pauli basis of a binary candidate
  window in one contraction of Pauli transfer matrices.
"""

import logging
from dataclasses import dataclass

import numpy as np
import opt_einsum as oe

from src.mera.circuit import apply_layer_unitary, cyclic_order
from src.pauli.algebra import isometry_transfer, transfer_matrix
from src.tensor.core import Tensor, as_array
from src.utils.errors import GeometryError, NumericError, ValidationError

logger = logging.getLogger(__name__)

LEAK_TOLERANCE = 1e-10


def contract_named(terms, output):
    """opt_einsum contraction with named indices: terms = [(array, [names])]"""
    names = {}
    for _, legs in terms:
        for leg in legs:
            names.setdefault(leg, oe.get_symbol(len(names)))
    inputs = ','.join(''.join(names[leg] for leg in legs) for _, legs in terms)
    expression = f"{inputs}->{''.join(names[leg] for leg in output)}"
    return oe.contract(expression, *[array for array, _ in terms], optimize='auto')


def _conjugate(tensor, legs, gate, in_labels, out_labels):
    """gate (2^q x 2^p) applied as G T G^dag; inputs absent from legs carry identity"""
    n_legs = len(legs)
    n_in, n_out = len(in_labels), len(out_labels)
    g = gate.reshape((2,) * (n_out + n_in))

    rows = [f'r{i}' for i in range(n_legs)]
    cols = [f'c{i}' for i in range(n_legs)]
    g_in, gc_in = [], []
    for label in in_labels:
        if label in legs:
            p = legs.index(label)
            g_in.append(rows[p])
            gc_in.append(cols[p])
        else:
            g_in.append(f'id{label}')
            gc_in.append(f'id{label}')

    outs = [f'o{i}' for i in range(n_out)]
    outs_c = [f'oc{i}' for i in range(n_out)]
    keep = [p for p, label in enumerate(legs) if label not in in_labels]
    result = contract_named(
        [(g, outs + g_in), (tensor, rows + cols), (g.conj(), outs_c + gc_in)],
        [rows[p] for p in keep] + outs + [cols[p] for p in keep] + outs_c
    )
    new_legs = [legs[p] for p in keep] + list(out_labels)
    return result, new_legs


def ascend_operator(layer, op, support, block=None):
    """Ascend an operator on level sites 'support' (leg order) through one layer.

    Returns (matrix, new_support) with new_support the level sites in
    periodic left-to-right order. With 'block' given, the new support must
    lie inside it.
    """
    matrix = as_array(op)
    support = [int(s) for s in support]
    k = len(support)
    if matrix.shape != (2 ** k, 2 ** k):
        raise ValidationError(f"Operator {matrix.shape} does not act on {k} sites")
    if len(set(support)) != k or any(s < 0 or s >= layer.size for s in support):
        raise GeometryError(f"Support {support} invalid on a {layer.size}-site lattice")

    tensor = matrix.reshape((2,) * (2 * k))
    legs = [('site', s) for s in support]

    for gate in layer.disentanglers:
        labels = [('site', s) for s in gate.sites]
        if any(label in legs for label in labels):
            tensor, legs = _conjugate(tensor, legs, gate.matrix, labels, labels)

    outputs = []
    for index, gate in enumerate(layer.isometries):
        labels = [('site', s) for s in gate.sites]
        if any(label in legs for label in labels):
            tensor, legs = _conjugate(tensor, legs, gate.isometry(layer.geometry), labels, [('out', index)])
            outputs.append(index)

    order = cyclic_order(outputs, layer.output_size)
    positions = [legs.index(('out', index)) for index in order]
    q = len(order)
    tensor = np.transpose(tensor, positions + [q + p for p in positions])

    if block is not None and not set(order) <= {int(s) % layer.output_size for s in block}:
        raise GeometryError(f"Ascended support {order} lies outside the causal cone of block {list(block)}")
    return np.ascontiguousarray(tensor).reshape(2 ** q, 2 ** q), tuple(order)


def embed_operator(matrix, support, target):
    """Extend an operator on 'support' by identities to the ordered site list 'target'"""
    support = list(support)
    target = list(target)
    if not set(support) <= set(target):
        raise GeometryError(f"Support {support} is not contained in {target}")
    k = len(support)
    full = Tensor(np.kron(as_array(matrix), np.eye(2 ** (len(target) - k))))
    current = support + [s for s in target if s not in support]
    positions = [current.index(s) for s in target]
    legs = full.reshape((2,) * (2 * len(target))).permute(positions + [len(target) + p for p in positions])
    return legs.reshape(2 ** len(target), 2 ** len(target)).data


def _binary_factors(layer, j):
    size = layer.size
    if layer.geometry != 'binary':
        raise GeometryError("Window transfer tensors are defined for binary layers")
    if size != 8 and size < 12:
        raise GeometryError(f"A {size}-site binary layer has no 4-site block window")
    ptm = {k: transfer_matrix(layer.disentangler_matrix(k)) for k in range(j - 1, j + 4)}
    pv = {k: isometry_transfer(layer.isometry_matrix(k)) for k in range(j - 1, j + 5)}
    return ptm, pv, size == 8


def _edge_factors(ptm, pv, j):
    left = oe.contract('cm,mbx->cbx', pv[j - 1][:, 0, :], ptm[j - 1][:, :, 0, :])
    right = oe.contract('bmx,cm->cbx', ptm[j + 3][:, :, :, 0], pv[j + 4][:, :, 0])
    leak_left = np.any(np.abs(left[1:]) > LEAK_TOLERANCE, axis=(0, 1))
    leak_right = np.any(np.abs(right[1:]) > LEAK_TOLERANCE, axis=(0, 1))
    return left[0], right[0], leak_left, leak_right


def transfer_terms(layer, j, closure=False, left_columns=None, right_columns=None):
    """Named contraction terms of T[c0..c3, a0..a7] for the window of block j.

    Returns (terms, leak_left, leak_right). Without 'closure' the edge legs
    a0/a7 are restricted to the given columns; with 'closure' the legs that
    leave the block are closed on the identity component.
    """
    ptm, pv, cyclic = _binary_factors(layer, j)
    chain = [
        (pv[j], ['c0', 'b0', 'b1']),
        (ptm[j], ['b1', 'b2', 'a1', 'a2']),
        (pv[j + 1], ['c1', 'b2', 'b3']),
        (ptm[j + 1], ['b3', 'b4', 'a3', 'a4']),
        (pv[j + 2], ['c2', 'b4', 'b5']),
        (ptm[j + 2], ['b5', 'b6', 'a5', 'a6']),
        (pv[j + 3], ['c3', 'b6', 'b7']),
    ]
    if cyclic:
        # disentangler j+3 wraps onto (2j+7, 2j)
        edge = ptm[j + 3]
        if left_columns is not None or right_columns is not None:
            edge = edge[:, :, _columns(right_columns), :][:, :, :, _columns(left_columns)]
        return chain + [(edge, ['b7', 'b0', 'a7', 'a0'])], np.zeros(4, bool), np.zeros(4, bool)

    left, right, leak_left, leak_right = _edge_factors(ptm, pv, j)
    if not closure:
        left = left[:, _columns(left_columns)]
        right = right[:, _columns(right_columns)]
    return chain + [(left, ['b0', 'a0']), (right, ['b7', 'a7'])], leak_left, leak_right


def _columns(columns):
    return list(range(4)) if columns is None else list(columns)


@dataclass(frozen=True)
class ScalingMatrix:
    """One-site ascent on the Pauli basis, M[i, j] = tr(s_i A[s_j]) / 2"""

    matrix: np.ndarray
    inverse: np.ndarray
    magnitudes: np.ndarray
    overheads: np.ndarray

    @property
    def site_overhead(self):
        return float(np.max(self.overheads[1:]))

    @property
    def block_overhead(self):
        return self.site_overhead ** 5


def single_site_scaling(layer, k=0):
    """Scaling matrix of a ternary isometry acting on its middle input alone"""
    if layer.geometry != 'ternary':
        raise GeometryError("Single-site scaling needs a ternary layer")
    transfer = isometry_transfer(layer.isometry_matrix(k))
    matrix = np.ascontiguousarray(transfer[:, 0, :, 0])
    if abs(np.linalg.det(matrix)) < 1e-12:
        raise NumericError(f"Single-site scaling matrix of isometry {k} is singular")
    inverse = np.linalg.inv(matrix)
    magnitudes = np.sort(np.abs(np.linalg.eigvals(matrix)))[::-1]
    overheads = np.sum(np.abs(inverse) ** 2, axis=0)
    return ScalingMatrix(matrix=matrix, inverse=inverse, magnitudes=magnitudes, overheads=overheads)


def dense_layer_ascent(layer, op, support):
    """Reference ascent through the dense layer unitary (small lattices only)"""
    size = layer.size
    full = embed_operator(op, list(support), list(range(size)))
    basis = np.eye(2 ** size, dtype=np.complex128)
    unitary = np.column_stack([apply_layer_unitary(layer, basis[:, i]) for i in range(2 ** size)])
    conjugated = unitary @ full @ unitary.conj().T
    kept = set(layer.kept_sites)
    index = [i for i in range(2 ** size)
             if all(((i >> (size - 1 - s)) & 1) == 0 for s in range(size) if s not in kept)]
    return conjugated[np.ix_(index, index)]
