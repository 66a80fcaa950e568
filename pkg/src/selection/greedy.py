#!/usr/bin/env python3
"""
Determinant-maximizing subset selection: longest residual vector greedy
selection followed by one-by-one replacement
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from src.utils.errors import NumericError, RankDeficiencyError, ValidationError

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-10
GAIN_TOLERANCE = 1e-12
REFRESH_INTERVAL = 50


@dataclass(frozen=True)
class Selection:
    """Selected candidate rows and log|det| of the selected matrix"""

    indices: List[int]
    log_abs_det: float
    swaps: int = 0

    @property
    def abs_det(self):
        return float(np.exp(self.log_abs_det))


def log_abs_det(vectors, indices):
    """log|det| of the square matrix formed by the selected rows"""
    matrix = np.asarray(vectors)[list(indices)]
    if matrix.shape[0] != matrix.shape[1]:
        # volume of the selected rows
        sign, value = np.linalg.slogdet(matrix @ matrix.T)
        return 0.5 * value if sign > 0 else -np.inf
    sign, value = np.linalg.slogdet(matrix)
    return value if sign != 0 else -np.inf


def lrv_select(vectors, count, pinned=0, tolerance=RESIDUAL_TOLERANCE):
    """Greedy selection of the candidate with the longest residual.

    'pinned' (default: row 0, the identity) is taken first; ties go to the
    lowest index. Raises RankDeficiencyError when the span runs out.
    """
    vectors = np.asarray(vectors, dtype=float)
    total, dim = vectors.shape
    if count > min(total, dim):
        raise ValidationError(f"Cannot select {count} rows from {total} candidates of dimension {dim}")

    residual = np.einsum('ij,ij->i', vectors, vectors)
    scale = np.sqrt(residual.max()) if total else 0.0
    basis = np.zeros((count, dim))
    chosen = np.zeros(total, dtype=bool)
    indices, log_det = [], 0.0

    for step in range(count):
        if step == 0 and pinned is not None:
            best = int(pinned)
        else:
            masked = np.where(chosen, -np.inf, residual)
            best = int(np.argmax(masked))
        norm = np.sqrt(max(residual[best], 0.0))
        if chosen[best] or norm <= tolerance * max(scale, 1e-300):
            raise RankDeficiencyError(f"Candidates span only {step} of {count} required dimensions", rank=step)

        direction = vectors[best] - basis[:step].T @ (basis[:step] @ vectors[best])
        direction -= basis[:step].T @ (basis[:step] @ direction)
        direction /= np.linalg.norm(direction)
        basis[step] = direction

        residual = residual - (vectors @ direction) ** 2
        chosen[best] = True
        indices.append(best)
        log_det += np.log(norm)

    logger.debug(f"LRV selected {count} of {total} candidates, log|det|={log_det:.6f}")
    return Selection(indices=indices, log_abs_det=float(log_det))


def _ratios(vectors, indices):
    selected = vectors[indices]
    return np.linalg.solve(selected.T, vectors.T).T


def one_by_one_replace(vectors, selection, max_passes=1000, pinned=0, tolerance=GAIN_TOLERANCE):
    """Swap selected rows for candidates while |det| grows.

    ratios[c, i] is the determinant ratio of replacing selected row i by
    candidate c; each pass applies the single best swap.
    """
    vectors = np.asarray(vectors, dtype=float)
    indices = list(selection.indices if isinstance(selection, Selection) else selection)
    if vectors.shape[1] != len(indices):
        raise ValidationError("Replacement needs a square selection")

    frozen = indices.index(pinned) if pinned is not None and pinned in indices else None
    ratios = _ratios(vectors, indices)
    log_det = log_abs_det(vectors, indices)
    swaps = 0
    gains = np.empty_like(ratios)

    for _ in range(max_passes):
        np.abs(ratios, out=gains)
        if frozen is not None:
            gains[:, frozen] = 0.0
        gains[indices, :] = 0.0
        flat = int(np.argmax(gains))
        c, i = divmod(flat, gains.shape[1])
        if gains[c, i] <= 1.0 + tolerance:
            break

        pivot = ratios[c, i]
        update = ratios[c, :].copy()
        update[i] -= 1.0
        ratios -= np.outer(ratios[:, i], update) / pivot
        indices[i] = c
        log_det += np.log(abs(pivot))
        swaps += 1
        if swaps % REFRESH_INTERVAL == 0:
            ratios = _ratios(vectors, indices)

    exact = log_abs_det(vectors, indices)
    if not np.isfinite(exact) or abs(exact - log_det) > 1e-6 * max(1.0, abs(exact)):
        raise NumericError(f"Determinant drift during replacement: tracked {log_det:.6f}, exact {exact:.6f}")
    logger.debug(f"Replacement applied {swaps} swaps, log|det|={exact:.6f}")
    return Selection(indices=indices, log_abs_det=float(exact), swaps=swaps)
