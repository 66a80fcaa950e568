#!/usr/bin/env python3
"""
Layer-by-layer MERA reconstruction

For every layer: estimate the density matrix of each isometry block, sweep
the disentanglers with linearized environment/SVD updates, then extract the
isometries from the spectra of the disentangled two-site (binary) or
three-site (ternary) middles. The top state is recovered by brute-force
tomography of the renormalized state.
"""

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import unitary_group

from src.mera.ascend import single_site_scaling
from src.mera.circuit import (BLOCK_WIDTH, MeraCircuit, block_sites, build_layer, evaluate_state,
                              is_unitary, kept_rows, layer_sizes, read_circuit, write_circuit)
from src.pauli.algebra import density_from_expectations
from src.selection.candidates import block_starts
from src.selection.plan import block_basis
from src.tensor.core import as_array, hermitian_eig, partial_trace, svd
from src.utils.errors import EstimationError, GeometryError, MeraError, NumericError, ValidationError

logger = logging.getLogger(__name__)

NEGATIVITY_TOLERANCE = 1e-8
OBJECTIVE_SLACK = 1e-10


@dataclass(frozen=True)
class BlockEstimate:
    """Estimated density matrix of one block of level sites"""

    sites: Tuple[int, ...]
    level: int
    rho: np.ndarray = field(repr=False)
    source: str = 'exact'
    route: str = 'brute-force'
    shots: int = 0
    repaired: bool = False


@dataclass(frozen=True)
class TruncationEntry:
    level: int
    index: int
    epsilon: float


@dataclass
class LayerSweeps:
    """Mean disentangler objective per sweep (at most 2 per disentangler)"""

    level: int
    trace: List[float] = field(default_factory=list)
    converged: bool = False
    residual: Optional[float] = None

    @property
    def deficit(self):
        return 2.0 - self.trace[-1] if self.trace else None


@dataclass
class TruncationReport:
    entries: List[TruncationEntry] = field(default_factory=list)
    sweeps: List[LayerSweeps] = field(default_factory=list)
    trace_factors: Dict[int, float] = field(default_factory=dict)
    conditioning: Dict[int, float] = field(default_factory=dict)
    scaling_overheads: Dict[int, float] = field(default_factory=dict)
    repaired: List[Tuple[int, Tuple[int, ...]]] = field(default_factory=list)

    @property
    def levels(self):
        return sorted({e.level for e in self.entries} | {s.level for s in self.sweeps})

    def epsilons(self, level):
        return [e.epsilon for e in self.entries if e.level == level]

    @property
    def converged(self):
        return all(s.converged for s in self.sweeps)

    def to_dict(self):
        return {
            'entries': [{'level': e.level, 'index': e.index, 'epsilon': e.epsilon} for e in self.entries],
            'sweeps': [{'level': s.level, 'trace': s.trace, 'converged': s.converged, 'residual': s.residual}
                       for s in self.sweeps],
            'trace_factors': {str(k): v for k, v in self.trace_factors.items()},
            'conditioning': {str(k): v for k, v in self.conditioning.items()},
            'scaling_overheads': {str(k): v for k, v in self.scaling_overheads.items()},
            'repaired': [{'level': level, 'sites': list(sites)} for level, sites in self.repaired]
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            entries=[TruncationEntry(int(e['level']), int(e['index']), float(e['epsilon'])) for e in data.get('entries', [])],
            sweeps=[LayerSweeps(int(s['level']), [float(x) for x in s['trace']], bool(s['converged']),
                                 None if s.get('residual') is None else float(s['residual']))
                    for s in data.get('sweeps', [])],
            trace_factors={int(k): float(v) for k, v in data.get('trace_factors', {}).items()},
            conditioning={int(k): float(v) for k, v in data.get('conditioning', {}).items()},
            scaling_overheads={int(k): float(v) for k, v in data.get('scaling_overheads', {}).items()},
            repaired=[(int(r['level']), tuple(r['sites'])) for r in data.get('repaired', [])]
        )


@dataclass(frozen=True)
class TopEstimate:
    """Top density matrix and its spectral mixture sum_k p_k |t_k><t_k|"""

    rho: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)


@dataclass
class TomographyResult:
    circuit: MeraCircuit
    report: TruncationReport
    top: TopEstimate
    bases: Dict[int, list] = field(default_factory=dict, repr=False)
    plans: Dict[int, list] = field(default_factory=dict, repr=False)

    def mixture(self, cutoff=1e-14):
        """Weights and physical vectors of rho_tomo = sum_k p_k |psi_k><psi_k|"""
        weights, vectors = [], []
        for p, t in zip(self.top.probabilities, self.top.vectors.T):
            if p > cutoff:
                weights.append(float(p))
                vectors.append(evaluate_state(self.circuit, t))
        return np.array(weights), np.array(vectors)


def _matrix(estimate):
    return estimate.rho if isinstance(estimate, BlockEstimate) else as_array(estimate)


def repair_density(rho):
    """Hermitize, clip negative eigenvalues and renormalize; returns (rho, repaired)"""
    rho = 0.5 * (rho + rho.conj().T)
    trace = float(np.real(np.trace(rho)))
    if trace <= 0 or not np.isfinite(trace):
        raise EstimationError(f"Estimated density matrix has trace {trace:.3e}")
    rho = rho / trace
    values, vectors = np.linalg.eigh(rho)
    if values[0] >= -NEGATIVITY_TOLERANCE:
        return rho, False
    values = np.clip(values, 0.0, None)
    if values.sum() <= 0:
        raise EstimationError("Estimated density matrix has no positive part")
    rho = (vectors * (values / values.sum())) @ vectors.conj().T
    return rho, True


def estimate_block(access, level, sites, basis=None, plan=None):
    """Block density matrix at 'level': brute force, or through a renormalized basis.

    With a basis, the selected strings are measured on the level-(tau-1)
    window and rho = sum_i tr(rho R_i) R_i / 16.
    """
    sites = tuple(int(s) for s in sites)
    if basis is None:
        expectations = access.block_expectations(level, sites)
        rho = density_from_expectations(expectations)
        route = 'brute-force'
        shots = access.shots * 3 ** len(sites) if access.sampled else 0
    else:
        if basis.level != level or tuple(basis.block) != sites:
            raise EstimationError(f"Basis for level {basis.level} block {basis.block} does not match level {level} block {sites}")
        counts = plan.shots if plan is not None else None
        expectations = access.string_expectations(level - 1, basis.window, basis.labels, counts)
        rho = basis.estimate(expectations)
        route = 'basis'
        shots = int(np.sum(counts)) if (counts is not None and access.sampled) else 0

    rho, repaired = repair_density(rho)
    if repaired:
        logger.warning(f"Level {level} block {list(sites)}: estimate re-projected to a physical density matrix")
    return BlockEstimate(
        sites=sites,
        level=level,
        rho=rho,
        source='sampled' if access.sampled else 'exact',
        route=route,
        shots=shots,
        repaired=repaired
    )


def _block_unitary(u_left, u_right, geometry):
    middle = np.eye(2 ** (BLOCK_WIDTH[geometry] - 4))
    return np.kron(np.kron(u_left, middle), u_right)


def block_objective(rho, u_left, u_right, geometry='binary', chi=2):
    """Kept weight of the disentangled middle: (f, projector onto its top-chi eigenvectors)"""
    width = BLOCK_WIDTH[geometry]
    g = _block_unitary(u_left, u_right, geometry)
    sigma = g @ _matrix(rho) @ g.conj().T
    middle = partial_trace(sigma, [2] * width, list(range(1, width - 1)))
    spectrum = hermitian_eig(0.5 * (middle + middle.conj().T))
    kept = spectrum.eigenvectors[:, :chi]
    return float(np.sum(spectrum.eigenvalues[:chi])), kept @ kept.conj().T


def environments(rho, u_left, u_right, geometry='binary', chi=2):
    """(f, Gamma_L, Gamma_R) of one block with f = tr(u_L Gamma_L) = tr(u_R Gamma_R)"""
    width = BLOCK_WIDTH[geometry]
    rho = _matrix(rho)
    f, projector = block_objective(rho, u_left, u_right, geometry, chi)
    x = np.kron(np.kron(np.eye(2), projector), np.eye(2))
    rest = np.eye(2 ** (width - 2))
    g_left = np.kron(u_left, rest)
    g_right = np.kron(rest, u_right)
    rho_left = g_left @ rho @ g_left.conj().T
    rho_right = g_right @ rho @ g_right.conj().T
    gamma_right = partial_trace(rho_left @ g_right.conj().T @ x, [2] * width, [width - 2, width - 1])
    gamma_left = partial_trace(rho_right @ g_left.conj().T @ x, [2] * width, [0, 1])
    return f, gamma_left, gamma_right


def linearized_update(gamma):
    """argmax over unitaries of Re tr(u Gamma): u = (N M^dag)^dag for Gamma = N S M^dag"""
    n, _, m = svd(gamma)
    return (n @ m.conj().T).conj().T


def stationarity_residual(u, gamma):
    """||u Gamma - (u Gamma)^dag||; zero when u is a stationary point of Re tr(u Gamma)"""
    product = as_array(u) @ as_array(gamma)
    return float(np.linalg.norm(product - product.conj().T))


def optimize_disentangler(u0, rho_left, rho_right, chi=2, geometry='binary', max_sweeps=500,
                          tolerance=1e-12, neighbors=None):
    """Optimize the disentangler shared by two neighbouring blocks, the outer ones held fixed.

    u is the right disentangler of rho_left's block and the left one of
    rho_right's block. Returns (u, f) with f = f_L + f_R <= 2.
    """
    u = as_array(u0)
    if not is_unitary(u):
        raise ValidationError("Initial disentangler is not unitary")
    outer_left, outer_right = neighbors if neighbors is not None else (np.eye(4), np.eye(4))
    previous = None
    f = 0.0
    for sweep in range(max_sweeps):
        _, _, gamma_right = environments(rho_left, outer_left, u, geometry, chi)
        _, gamma_left, _ = environments(rho_right, u, outer_right, geometry, chi)
        u = linearized_update(gamma_right + gamma_left)
        f = block_objective(rho_left, outer_left, u, geometry, chi)[0] + \
            block_objective(rho_right, u, outer_right, geometry, chi)[0]
        if f > 2.0 + OBJECTIVE_SLACK:
            raise NumericError(f"Disentangler objective {f:.12f} exceeds 2")
        if previous is not None and abs(f - previous) < tolerance:
            break
        previous = f
    return u, f


def extract_isometry(rho, chi=2, geometry=None):
    """Unitary v sending the top-chi eigenvectors to the kept rows; returns (v, epsilon)"""
    rho = _matrix(rho)
    dim = rho.shape[0]
    if geometry is None:
        geometry = {4: 'binary', 8: 'ternary'}.get(dim)
        if geometry is None:
            raise ValidationError(f"No isometry acts on a {dim}-dimensional space")
    spectrum = hermitian_eig(0.5 * (rho + rho.conj().T))
    kept = kept_rows(geometry, chi)
    order = kept + [r for r in range(dim) if r not in kept]
    v = np.zeros((dim, dim), dtype=np.complex128)
    v[order, :] = spectrum.eigenvectors.conj().T
    epsilon = float(np.clip(np.sum(spectrum.eigenvalues[chi:]), 0.0, 1.0))
    return v, epsilon


def _initial_disentanglers(count, initial, rng):
    if initial == 'random':
        return [unitary_group.rvs(4, random_state=rng) for _ in range(count)]
    return [np.eye(4, dtype=np.complex128) for _ in range(count)]


def reconstruct_layer(estimates, geometry, level, size, chi=2, max_sweeps=2000, tolerance=1e-12,
                      initial='identity', seed=0, gradient_tolerance=1e-12):
    """Sweep all disentanglers of a layer, then extract its isometries.

    estimates[k] is the block of isometry k. Sweeps stop once the objective
    has settled and every disentangler is stationary (largest residual below
    'gradient_tolerance'). Returns (layer, entries, sweeps); a layer that
    does not converge keeps its best sweep and is flagged.
    """
    count = len(estimates)
    if count != size // (2 if geometry == 'binary' else 3):
        raise GeometryError(f"Layer on {size} sites needs one block estimate per isometry, got {count}")
    rhos = [_matrix(e) for e in estimates]
    rng = np.random.default_rng([seed, level])
    us = _initial_disentanglers(count, initial, rng)
    sweeps = LayerSweeps(level=level)
    best_value, best = -np.inf, list(us)
    previous = None

    for sweep in range(max_sweeps):
        residual = 0.0
        for k in range(count):
            right = (k + 1) % count
            _, _, gamma_right = environments(rhos[k], us[k - 1], us[k], geometry, chi)
            _, gamma_left, _ = environments(rhos[right], us[k], us[(k + 1) % count], geometry, chi)
            gamma = gamma_right + gamma_left
            residual = max(residual, stationarity_residual(us[k], gamma))
            us[k] = linearized_update(gamma)

        objectives = [block_objective(rhos[k], us[k - 1], us[k], geometry, chi)[0] for k in range(count)]
        shared = [objectives[k] + objectives[(k + 1) % count] for k in range(count)]
        if max(shared) > 2.0 + OBJECTIVE_SLACK:
            raise NumericError(f"Level {level}: disentangler objective {max(shared):.12f} exceeds 2")
        value = float(np.mean(shared))
        sweeps.trace.append(value)
        sweeps.residual = residual
        logger.debug(f"Level {level} sweep {sweep + 1}: mean objective {value:.15f}, residual {residual:.3e}")
        if value > best_value:
            best_value, best = value, list(us)
        settled = previous is not None and abs(value - previous) < tolerance
        if settled and residual < gradient_tolerance:
            sweeps.converged = True
            break
        previous = value

    if not sweeps.converged:
        logger.warning(f"Level {level}: no convergence after {max_sweeps} sweeps, keeping best objective {best_value:.12f}, "
                       f"residual {sweeps.residual:.3e}")
        us = best

    vs, entries = [], []
    width = BLOCK_WIDTH[geometry]
    for k, rho in enumerate(rhos):
        g = _block_unitary(us[k - 1], us[k], geometry)
        sigma = g @ rho @ g.conj().T
        middle = partial_trace(sigma, [2] * width, list(range(1, width - 1)))
        v, epsilon = extract_isometry(middle, chi, geometry)
        vs.append(v)
        entries.append(TruncationEntry(level=level, index=k, epsilon=epsilon))

    layer = build_layer(geometry, size, level, us, vs)
    logger.info(f"Level {level} reconstructed: {len(sweeps.trace)} sweeps, "
                f"deficit {sweeps.deficit:.3e}, sum eps {sum(e.epsilon for e in entries):.3e}")
    return layer, entries, sweeps


def estimate_top(access, level, size):
    """Brute-force tomography of the whole top lattice"""
    rho = density_from_expectations(access.block_expectations(level, range(size)))
    rho, repaired = repair_density(rho)
    if repaired:
        logger.warning("Top estimate re-projected to a physical density matrix")
    spectrum = hermitian_eig(rho)
    probabilities = np.clip(spectrum.eigenvalues.real, 0.0, None)
    return TopEstimate(rho=rho, probabilities=probabilities / probabilities.sum(), vectors=spectrum.eigenvectors)


def _next_bases(layer, config, report):
    """Bases and plans for the level blocks the next layer needs, or None for the state route"""
    try:
        starts = block_starts(layer)
        if not starts:
            return None
        bases, plans = [], []
        for j in starts:
            basis, plan = block_basis(layer, j, config.m0, config.candidate_window, config.replacement_passes)
            bases.append(basis)
            plans.append(plan)
    except GeometryError as e:
        logger.warning(f"Level {layer.level}: falling back to renormalized-state tomography ({e})")
        return None
    report.conditioning[layer.level] = float(np.mean([p.conditioning for p in plans]))
    report.trace_factors[layer.level] = max(b.trace_factor(config.per_j_trace_factor) for b in bases)
    return bases, plans


def tomograph(access, geometry, chi, config):
    """Reconstruct the whole circuit from state access; returns a TomographyResult"""
    if chi != 2:
        raise ValidationError(f"Only chi=2 is supported, got {chi}")
    sizes, top = layer_sizes(access.n, geometry)
    use_basis = geometry == 'binary' and config.renormalized_source == 'basis'
    report = TruncationReport()
    layers, bases, plans = [], {}, {}
    current = None

    for level in range(1, len(sizes)):
        size = sizes[level - 1]
        estimates = []
        for k in range(size // (2 if geometry == 'binary' else 3)):
            sites = block_sites(geometry, size, k)
            basis = plan = None
            if current is not None:
                basis = current[0][k]
                plan = current[1][k]
            estimate = estimate_block(access, level - 1, sites, basis, plan)
            if estimate.repaired:
                report.repaired.append((level - 1, estimate.sites))
            estimates.append(estimate)

        layer, entries, sweeps = reconstruct_layer(
            estimates, geometry, level, size, chi,
            max_sweeps=config.max_sweeps,
            tolerance=config.tolerance,
            initial=config.initial_disentangler,
            seed=config.seed,
            gradient_tolerance=config.gradient_tolerance
        )
        report.entries.extend(entries)
        report.sweeps.append(sweeps)
        layers.append(layer)
        access.push_layer(layer)

        if geometry == 'ternary':
            try:
                report.scaling_overheads[level] = max(
                    single_site_scaling(layer, k).block_overhead for k in range(layer.output_size))
            except NumericError as e:
                logger.warning(f"Level {level}: {e}")

        current = None
        if use_basis and level < len(sizes) - 1:
            current = _next_bases(layer, config, report)
            if current is not None:
                bases[level], plans[level] = current

    top_estimate = estimate_top(access, len(sizes) - 1, top)
    circuit = MeraCircuit(geometry=geometry, n=access.n, chi=chi, layers=tuple(layers))
    if not report.converged:
        logger.warning("Some layers did not converge; see the truncation report")
    return TomographyResult(circuit=circuit, report=report, top=top_estimate, bases=bases, plans=plans)


def _write_json(path, document):
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, 'w') as f:
        json.dump(document, f, indent=2)
    os.replace(tmp_name, path)
    return path


class MeraTomographer:
    """Runs tomography for a configuration and writes result bundles"""

    def __init__(self, config):
        self.config = config
        self.logger = logging.getLogger(__name__)

    def run(self, access):
        self.logger.info(f"Tomography of n={access.n} ({self.config.geometry}, {access.mode} mode)")
        return tomograph(access, self.config.geometry, self.config.chi, self.config)

    def write(self, result, directory):
        """Bundle: circuit manifest and gates, top matrix, report and plans JSON"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_circuit(result.circuit, directory)
        np.save(directory / 'top.npy', result.top.rho)
        _write_json(directory / 'report.json', result.report.to_dict())
        _write_json(directory / 'plans.json', {
            str(level): [
                {'basis': b.to_dict(), 'plan': p.to_dict()}
                for b, p in zip(result.bases[level], result.plans[level])
            ]
            for level in result.bases
        })
        self.logger.info(f"Tomography bundle written to {directory}")
        return directory


def read_result(directory):
    """Circuit, report and top estimate of a bundle (bases are not stored)"""
    directory = Path(directory)
    try:
        circuit = read_circuit(directory)
        with open(directory / 'report.json', 'r') as f:
            report = TruncationReport.from_dict(json.load(f))
        rho = np.load(directory / 'top.npy')
    except (OSError, KeyError, ValueError) as e:
        raise MeraError(f"Cannot read tomography bundle {directory}: {e}") from e
    spectrum = hermitian_eig(rho)
    probabilities = np.clip(spectrum.eigenvalues.real, 0.0, None)
    top = TopEstimate(rho=rho, probabilities=probabilities / probabilities.sum(), vectors=spectrum.eigenvectors)
    return TomographyResult(circuit=circuit, report=report, top=top)
