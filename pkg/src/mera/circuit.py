#!/usr/bin/env python3
"""
MERA circuit model for binary and ternary geometries

Gate placement on a level lattice of L sites (periodic):
- binary: disentangler k on (2k+1, 2k+2), isometry k on (2k, 2k+1) keeping
  site 2k as level site k; the block of isometry k is (2k-1 .. 2k+2)
- ternary: disentangler k on (3k+2, 3k+3), isometry k on (3k, 3k+1, 3k+2)
  keeping the middle site; the block of isometry k is (3k-1 .. 3k+3)
Isometries are stored as unitaries v; the projector keeps the rows whose
ancilla legs are |0>.
"""

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

import numpy as np
from scipy.stats import unitary_group

from src.tensor.core import Tensor, apply_local, as_array
from src.tensor.io import read_tensor, write_tensor
from src.utils.errors import GeometryError, ValidationError

logger = logging.getLogger(__name__)

ARITY = {'binary': 2, 'ternary': 3}
KEPT_POSITION = {'binary': 0, 'ternary': 1}
BLOCK_WIDTH = {'binary': 4, 'ternary': 5}
MAX_TOP_SITES = 4
UNITARY_TOLERANCE = 1e-10

DISENTANGLER = 'disentangler'
ISOMETRY = 'isometry'


def _check_geometry(geometry):
    if geometry not in ARITY:
        raise GeometryError(f"Unknown geometry '{geometry}'")


def kept_rows(geometry, chi=2):
    """Rows of v whose ancilla legs are |0>, in kept-leg order"""
    _check_geometry(geometry)
    k = ARITY[geometry]
    position = KEPT_POSITION[geometry]
    return [s * chi ** (k - 1 - position) for s in range(chi)]


def disentangler_sites(geometry, size, k):
    arity = ARITY[geometry]
    first = arity * k + arity - 1
    return (first % size, (first + 1) % size)


def isometry_sites(geometry, size, k):
    arity = ARITY[geometry]
    return tuple((arity * k + i) % size for i in range(arity))


def block_sites(geometry, size, k):
    """Level sites whose density matrix drives isometry k"""
    arity = ARITY[geometry]
    return tuple((arity * k - 1 + i) % size for i in range(BLOCK_WIDTH[geometry]))


def layer_sizes(n, geometry):
    """Lattice sizes [n, n/k, ...] down to the top, and the top site count D"""
    _check_geometry(geometry)
    arity = ARITY[geometry]
    minimum = 2 * arity
    sizes = [int(n)]
    while sizes[-1] % arity == 0 and sizes[-1] >= minimum:
        sizes.append(sizes[-1] // arity)
    top = sizes[-1]
    if len(sizes) < 2:
        raise GeometryError(f"n={n} admits no {geometry} layer")
    if top > MAX_TOP_SITES:
        raise GeometryError(f"n={n} leaves {top} top sites for {geometry} geometry (at most {MAX_TOP_SITES})")
    return sizes, top


def is_unitary(matrix, tolerance=UNITARY_TOLERANCE):
    m = as_array(matrix)
    return m.shape[0] == m.shape[1] and np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=tolerance)


@dataclass(frozen=True)
class Gate:
    """Disentangler u or isometry unitary v acting on level (level-1) sites"""

    kind: str
    unitary: Tensor
    sites: Tuple[int, ...]
    level: int

    def __post_init__(self):
        if self.kind not in (DISENTANGLER, ISOMETRY):
            raise ValidationError(f"Unknown gate kind '{self.kind}'")
        if not isinstance(self.unitary, Tensor):
            object.__setattr__(self, 'unitary', Tensor(self.unitary))
        object.__setattr__(self, 'sites', tuple(int(s) for s in self.sites))
        if self.unitary.shape != (2 ** len(self.sites),) * 2:
            raise ValidationError(f"Gate on {len(self.sites)} sites has shape {self.unitary.shape}")
        if not is_unitary(self.unitary.data):
            raise ValidationError(f"{self.kind} at level {self.level} sites {self.sites} is not unitary")
        if self.level < 1:
            raise ValidationError(f"Gate level must be >= 1, got {self.level}")

    @property
    def matrix(self):
        return self.unitary.data

    def isometry(self, geometry):
        """w = P v, mapping the gate's sites to one kept site"""
        return self.matrix[kept_rows(geometry), :]


@dataclass(frozen=True)
class Layer:
    """One coarse-graining step from a lattice of 'size' sites"""

    geometry: str
    size: int
    level: int
    disentanglers: Tuple[Gate, ...]
    isometries: Tuple[Gate, ...]

    def __post_init__(self):
        _check_geometry(self.geometry)
        count = self.size // ARITY[self.geometry]
        if len(self.isometries) != count or len(self.disentanglers) != count:
            raise GeometryError(f"Layer on {self.size} sites needs {count} disentanglers and isometries")

    @property
    def output_size(self):
        return self.size // ARITY[self.geometry]

    @property
    def kept_sites(self):
        arity = ARITY[self.geometry]
        return [arity * k + KEPT_POSITION[self.geometry] for k in range(self.output_size)]

    def isometry_matrix(self, k):
        return self.isometries[k % self.output_size].isometry(self.geometry)

    def disentangler_matrix(self, k):
        return self.disentanglers[k % self.output_size].matrix

    def with_gates(self, disentanglers=None, isometries=None):
        return Layer(
            geometry=self.geometry,
            size=self.size,
            level=self.level,
            disentanglers=tuple(disentanglers) if disentanglers is not None else self.disentanglers,
            isometries=tuple(isometries) if isometries is not None else self.isometries
        )


def build_layer(geometry, size, level, disentangler_matrices, isometry_matrices):
    """Place gate matrices on a lattice following the geometry convention"""
    _check_geometry(geometry)
    count = size // ARITY[geometry]
    disentanglers = tuple(
        Gate(DISENTANGLER, u, disentangler_sites(geometry, size, k), level)
        for k, u in zip(range(count), disentangler_matrices)
    )
    isometries = tuple(
        Gate(ISOMETRY, v, isometry_sites(geometry, size, k), level)
        for k, v in zip(range(count), isometry_matrices)
    )
    return Layer(geometry, size, level, disentanglers, isometries)


@dataclass(frozen=True)
class MeraCircuit:
    """Layers of gates plus the top lattice size"""

    geometry: str
    n: int
    chi: int
    layers: Tuple[Layer, ...] = field(repr=False)
    top_size: int = 0

    def __post_init__(self):
        if self.chi != 2:
            raise ValidationError(f"Only chi=2 circuits are supported, got chi={self.chi}")
        sizes, top = layer_sizes(self.n, self.geometry)
        if len(self.layers) != len(sizes) - 1:
            raise GeometryError(f"n={self.n} {self.geometry} needs {len(sizes) - 1} layers, got {len(self.layers)}")
        for layer, size in zip(self.layers, sizes):
            if layer.size != size or layer.geometry != self.geometry:
                raise GeometryError(f"Layer {layer.level} has size {layer.size}, expected {size}")
        object.__setattr__(self, 'top_size', top)

    @property
    def depth(self):
        return len(self.layers)

    def sizes(self):
        return layer_sizes(self.n, self.geometry)[0]


def _gate_matrices(count, dim, rng, identity):
    if identity:
        return [np.eye(dim, dtype=np.complex128) for _ in range(count)]
    return [unitary_group.rvs(dim, random_state=rng) for _ in range(count)]


def random_mera(n, geometry='binary', chi=2, seed=0, identity_disentanglers=False, identity_isometries=False):
    """Circuit with Haar-random gates, deterministic given the seed"""
    sizes, _ = layer_sizes(n, geometry)
    rng = np.random.default_rng(seed)
    arity = ARITY[geometry]
    layers = []
    for level, size in enumerate(sizes[:-1], start=1):
        count = size // arity
        us = _gate_matrices(count, chi ** 2, rng, identity_disentanglers)
        vs = _gate_matrices(count, chi ** arity, rng, identity_isometries)
        layers.append(build_layer(geometry, size, level, us, vs))
    logger.debug(f"Built random {geometry} MERA n={n} with {len(layers)} layers (seed={seed})")
    return MeraCircuit(geometry=geometry, n=int(n), chi=chi, layers=tuple(layers))


def identity_mera(n, geometry='binary', chi=2):
    return random_mera(n, geometry, chi, identity_disentanglers=True, identity_isometries=True)


def apply_layer_unitary(layer, state, inverse=False):
    """Apply all disentanglers then all isometry unitaries (or the inverse)"""
    psi = as_array(state)
    if psi.size != 2 ** layer.size:
        raise ValidationError(f"State of size {psi.size} does not match a {layer.size}-site layer")
    if not inverse:
        for gate in layer.disentanglers + layer.isometries:
            psi = apply_local(psi, gate.matrix, gate.sites)
    else:
        for gate in layer.isometries + layer.disentanglers:
            psi = apply_local(psi, gate.matrix.conj().T, gate.sites)
    return psi


def ascend_state(layer, state, normalize=True):
    """P U psi on the kept sites; returns (state, discarded weight)"""
    psi = apply_layer_unitary(layer, state).reshape((2,) * layer.size)
    kept = set(layer.kept_sites)
    index = tuple(slice(None) if site in kept else 0 for site in range(layer.size))
    projected = np.ascontiguousarray(psi[index]).reshape(-1)
    norm = np.linalg.norm(projected)
    discarded = max(0.0, 1.0 - norm ** 2 / max(np.linalg.norm(psi) ** 2, 1e-300))
    if normalize:
        if norm < 1e-150:
            raise ValidationError(f"Renormalized state at level {layer.level} vanishes")
        projected = projected / norm
    return projected, discarded


def descend_state(layer, state):
    """Insert |0> ancillas, then apply v^dag and u^dag"""
    phi = as_array(state)
    if phi.size != 2 ** layer.output_size:
        raise ValidationError(f"State of size {phi.size} does not match {layer.output_size} level sites")
    psi = np.zeros((2,) * layer.size, dtype=np.complex128)
    kept = set(layer.kept_sites)
    index = tuple(slice(None) if site in kept else 0 for site in range(layer.size))
    psi[index] = phi.reshape((2,) * layer.output_size)
    return apply_layer_unitary(layer, psi.reshape(-1), inverse=True)


def evaluate_state(circuit, top):
    """Run the circuit in the generative direction from a top vector"""
    phi = as_array(top)
    if phi.ndim != 1 or phi.size != circuit.chi ** circuit.top_size:
        raise ValidationError(f"Top state of size {phi.size} does not match chi^D = {circuit.chi ** circuit.top_size}")
    for layer in reversed(circuit.layers):
        phi = descend_state(layer, phi)
    return phi


def renormalized_states(circuit, state, layers=None):
    """Normalized states at levels 0..m obtained by ascending through the layers"""
    states = [as_array(state)]
    for layer in (layers if layers is not None else circuit.layers):
        phi, _ = ascend_state(layer, states[-1])
        states.append(phi)
    return states


def past_cone(geometry, size, sites):
    """Sites of a lattice of 'size' feeding the given next-level sites through one layer"""
    count = size // ARITY[geometry]
    inputs = set()
    for s in sites:
        inputs.update(isometry_sites(geometry, size, int(s) % count))
    cone = set(inputs)
    for k in range(count):
        pair = disentangler_sites(geometry, size, k)
        if inputs.intersection(pair):
            cone.update(pair)
    return cone


def causal_cone(geometry, level, block, n):
    """Physical sites in the past causal cone of a level block"""
    sizes, _ = layer_sizes(n, geometry)
    if level < 0 or level >= len(sizes):
        raise GeometryError(f"Level {level} does not exist for n={n}")
    sites = {int(s) % sizes[level] for s in block}
    for tau in range(level, 0, -1):
        sites = past_cone(geometry, sizes[tau - 1], sites)
    return sorted(sites)


def cyclic_order(indices, size):
    """Order lattice indices so that a contiguous periodic run reads left to right"""
    ordered = sorted({int(i) % size for i in indices})
    if len(ordered) in (0, size):
        return ordered
    gaps = [(ordered[(i + 1) % len(ordered)] - ordered[i]) % size for i in range(len(ordered))]
    start = (int(np.argmax(gaps)) + 1) % len(ordered)
    return ordered[start:] + ordered[:start]


def write_circuit(circuit, directory):
    """Circuit bundle: manifest JSON plus one tensor container per gate"""
    directory = Path(directory)
    (directory / 'gates').mkdir(parents=True, exist_ok=True)
    manifest = {
        'geometry': circuit.geometry,
        'n': circuit.n,
        'chi': circuit.chi,
        'top_size': circuit.top_size,
        'layers': []
    }
    for layer in circuit.layers:
        entry = {'level': layer.level, 'size': layer.size, 'disentanglers': [], 'isometries': []}
        for key, gates in (('disentanglers', layer.disentanglers), ('isometries', layer.isometries)):
            for k, gate in enumerate(gates):
                name = f"gates/level{layer.level}_{gate.kind}_{k}.tensor"
                write_tensor(directory / name, gate.unitary, {'kind': gate.kind, 'sites': list(gate.sites)})
                entry[key].append({'sites': list(gate.sites), 'file': name})
        manifest['layers'].append(entry)

    fd, tmp_name = tempfile.mkstemp(dir=directory, prefix='.circuit.json.')
    with os.fdopen(fd, 'w') as f:
        json.dump(manifest, f, indent=2)
    os.replace(tmp_name, directory / 'circuit.json')
    logger.info(f"Circuit written to {directory}")
    return directory / 'circuit.json'


def read_circuit(directory):
    directory = Path(directory)
    with open(directory / 'circuit.json', 'r') as f:
        manifest = json.load(f)

    layers = []
    for entry in manifest['layers']:
        gates = {}
        for key, kind in (('disentanglers', DISENTANGLER), ('isometries', ISOMETRY)):
            gates[key] = tuple(
                Gate(kind, read_tensor(directory / g['file'])[0], g['sites'], entry['level'])
                for g in entry[key]
            )
        layers.append(Layer(manifest['geometry'], entry['size'], entry['level'], gates['disentanglers'], gates['isometries']))

    return MeraCircuit(
        geometry=manifest['geometry'],
        n=manifest['n'],
        chi=manifest['chi'],
        layers=tuple(layers)
    )
