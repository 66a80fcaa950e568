#!/usr/bin/env python3
"""
Total measurement budgets: binary MERA, naive ternary MERA and brute force
"""

import logging
import math

from src.utils.errors import GeometryError, ValidationError

logger = logging.getLogger(__name__)

CANONICAL_TOPS = (2, 3)
MODES = ('binary', 'ternary', 'brute-force')


def binary_decomposition(n, top=None):
    """(D, m) with n = D * 2^m, D canonical (or the given override) and m >= 2"""
    tops = CANONICAL_TOPS if top is None else (int(top),)
    for d in tops:
        if n % d == 0:
            quotient = n // d
            m = quotient.bit_length() - 1
            if quotient == 2 ** m and m >= 2:
                return d, m
    valid = sorted({d * 2 ** m for d in tops for m in range(2, max(2, n.bit_length()) + 1) if d * 2 ** m <= 2 * n})
    raise GeometryError(f"n={n} is not D*2^m with D in {tops} and m >= 2; valid sizes up to {2 * n}: {valid}")


def binary_budget(n, s, m0=100, top=None):
    """M0 [4^4 sum_{tau=0}^{m-3} 2^(m-tau+1) S^tau + 4^D S^(m-2)]"""
    d, m = binary_decomposition(n, top)
    layers = sum(2 ** (m - tau + 1) * s ** tau for tau in range(m - 2))
    return m0 * (4 ** 4 * layers + 4 ** d * s ** (m - 2))


def ternary_decomposition(n):
    """Smallest m with n / 3^m <= 4, and D = ceil(n / 3^m)"""
    m = 0
    while n / 3 ** m > 4:
        m += 1
    return math.ceil(n / 3 ** m), m


def ternary_budget(n, lam, m0=100):
    """Blocks of 5 sites with a per-level multiplier lambda^5"""
    d, m = ternary_decomposition(n)
    multiplier = lam ** 5
    layers = sum(math.ceil(n / 3 ** tau) * multiplier ** tau for tau in range(m))
    return m0 * (4 ** 5 * layers + 4 ** d * multiplier ** m)


def brute_force_budget(n, m0=100):
    return m0 * 3 ** n


def total_budget(n, mode='binary', factor=6.0, m0=100, top=None):
    """N for one system size; 'factor' is S (binary) or lambda (ternary)"""
    if n < 1 or m0 <= 0:
        raise ValidationError(f"Invalid budget arguments n={n}, M0={m0}")
    if mode == 'binary':
        return binary_budget(n, factor, m0, top)
    if mode == 'ternary':
        return ternary_budget(n, factor, m0)
    if mode == 'brute-force':
        return brute_force_budget(n, m0)
    raise ValidationError(f"Unknown budget mode '{mode}', expected one of {MODES}")


def budget_curves(sizes, s=6.0, lam=6.0, m0=100):
    """Rows of (n, binary, ternary, brute_force); binary is None where n does not decompose"""
    rows = []
    for n in sizes:
        try:
            binary = binary_budget(n, s, m0)
        except GeometryError as e:
            logger.warning(f"Skipping binary budget: {e}")
            binary = None
        rows.append({
            'n': int(n),
            'binary': binary,
            'ternary': ternary_budget(n, lam, m0),
            'brute_force': brute_force_budget(n, m0)
        })
    return rows
