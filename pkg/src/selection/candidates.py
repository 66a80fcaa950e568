#!/usr/bin/env python3
"""
Renormalized candidate operators of a binary block window
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from src.mera.ascend import contract_named, transfer_terms
from src.pauli.algebra import ALPHABET, PauliString
from src.utils.errors import NumericError, ValidationError

logger = logging.getLogger(__name__)

BLOCK_SITES = 4
WINDOW_SITES = 8
ZERO_TOLERANCE = 1e-12
WINDOWS = ('interior', 'central', 'closed')
TRANSFER_OUTPUT = ['c0', 'c1', 'c2', 'c3', 'a0', 'a1', 'a2', 'a3', 'a4', 'a5', 'a6', 'a7']


@dataclass(frozen=True)
class WindowCandidates:
    """Admissible window strings of one block and their ascended coefficients.

    coefficients[r, c] = tr(s_c A[O_r]) / 4, the coordinates of candidate r in
    the orthonormal basis s_c / 4 of 4-site operators.
    """

    level: int
    block: Tuple[int, ...]
    window: Tuple[int, ...]
    labels: List[str] = field(repr=False)
    coefficients: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.labels)


def block_starts(layer):
    """First level site of each block the next layer's isometries need"""
    out = layer.output_size
    if out < BLOCK_SITES or out % 2:
        return []
    return [(2 * k - 1) % out for k in range(out // 2)]


def edge_columns(layer, j, window='interior'):
    """Edge Pauli indices (a0, a7) that keep the ascent on the block"""
    if window not in WINDOWS:
        raise ValidationError(f"Unknown candidate window '{window}'")
    if window == 'central':
        return [0], [0]
    if window == 'closed':
        return list(range(4)), list(range(4))
    _, leak_left, leak_right = transfer_terms(layer, j, closure=True)
    left = [a for a in range(4) if not leak_left[a]]
    right = [a for a in range(4) if not leak_right[a]]
    return left, right


def candidates(layer, j, window='interior'):
    """All admissible window strings of block j ascended through the layer"""
    left_cols, right_cols = edge_columns(layer, j, window)
    if window == 'closed':
        # level sites j-1 and j+4 traced out
        terms, _, _ = transfer_terms(layer, j, closure=True)
    else:
        terms, _, _ = transfer_terms(layer, j, left_columns=left_cols, right_columns=right_cols)
    transfer = contract_named(terms, TRANSFER_OUTPUT)
    coefficients = 4.0 * transfer.reshape(4 ** BLOCK_SITES, -1).T
    if not np.all(np.isfinite(coefficients)):
        raise NumericError(f"Non-finite candidate coefficients for block {j}")

    inner = [PauliString.from_index(index, WINDOW_SITES - 2).labels for index in range(4 ** (WINDOW_SITES - 2))]
    labels = [ALPHABET[a0] + middle + ALPHABET[a7] for a0 in left_cols for middle in inner for a7 in right_cols]

    keep = np.linalg.norm(coefficients, axis=1) > ZERO_TOLERANCE
    result = WindowCandidates(
        level=layer.level,
        block=tuple((j + i) % layer.output_size for i in range(BLOCK_SITES)),
        window=tuple((2 * j + i) % layer.size for i in range(WINDOW_SITES)),
        labels=[label for label, kept in zip(labels, keep) if kept],
        coefficients=np.ascontiguousarray(coefficients[keep])
    )
    logger.debug(f"Level {layer.level} block {j}: {len(result)} admissible candidates ({window} window)")
    return result
