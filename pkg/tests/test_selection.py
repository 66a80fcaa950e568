import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import unitary_group

from src.mera.ascend import ascend_operator, dense_layer_ascent, embed_operator
from src.mera.circuit import identity_mera, random_mera
from src.pauli.algebra import all_labels, isometry_transfer, pauli_coefficients, pauli_matrix, pauli_operator
from src.selection.budget import brute_force_budget, total_budget
from src.selection.candidates import block_starts, candidates, edge_columns
from src.selection.greedy import log_abs_det, lrv_select, one_by_one_replace
from src.selection.plan import (allocate, block_basis, conditioning_factor, cumulative_conditioning,
                                distributivity_deviation, gram_orthogonalize, two_level_conditioning)
from src.states.prep import SpinModel, ground_state
from src.tensor.core import partial_trace
from src.tomography.access import StateAccess
from src.tomography.engine import tomograph
from src.utils.config import RunConfig
from src.utils.errors import GeometryError, RankDeficiencyError, ValidationError
from tests.conftest import random_density

EPSILON = 0.1


@pytest.fixture
def counterexample():
    c = (1 - EPSILON) / np.sqrt(2)
    return np.array([[1.0, 0.0], [c, c], [c, -c]])


def toy_vectors(seed):
    """One-qubit images of all two-qubit Pauli strings under a random isometry"""
    v = unitary_group.rvs(4, random_state=np.random.default_rng(seed))
    transfer = isometry_transfer(v[[0, 2], :])
    return 2.0 * transfer.reshape(4, 16).T


@pytest.fixture
def toy_candidates():
    return toy_vectors(21)


def _exhaustive_best(vectors, count):
    best = 0.0
    for rest in itertools.combinations(range(1, len(vectors)), count - 1):
        best = max(best, abs(np.linalg.det(vectors[[0] + list(rest)])))
    return best


class TestGreedySelection:
    def test_pinned_row_first(self):
        vectors = np.eye(4)[[3, 2, 1, 0]] * np.array([1, 2, 3, 4])
        selection = lrv_select(vectors, 4, pinned=2)
        assert selection.indices[0] == 2
        assert selection.abs_det == pytest.approx(24.0)

    def test_rank_deficiency_reports_rank(self):
        vectors = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0]])
        with pytest.raises(RankDeficiencyError) as info:
            lrv_select(vectors, 3)
        assert info.value.rank == 2

    def test_too_many_requested(self):
        with pytest.raises(ValidationError):
            lrv_select(np.eye(2), 3)

    def test_counterexample_greedy_choice(self, counterexample):
        selection = lrv_select(counterexample, 2, pinned=None)
        assert selection.indices == [0, 1]
        assert selection.abs_det == pytest.approx((1 - EPSILON) / np.sqrt(2))

    def test_counterexample_replacement_finds_optimum(self, counterexample):
        greedy = lrv_select(counterexample, 2, pinned=None)
        improved = one_by_one_replace(counterexample, greedy, pinned=None)
        assert sorted(improved.indices) == [1, 2]
        assert improved.swaps == 1
        # the diagonal pair spans |det| = (1 - eps)^2
        assert improved.abs_det == pytest.approx((1 - EPSILON) ** 2)

    def test_toy_bounds(self, toy_candidates):
        optimum = _exhaustive_best(toy_candidates, 4)
        greedy = lrv_select(toy_candidates, 4)
        improved = one_by_one_replace(toy_candidates, greedy)
        assert greedy.indices[0] == 0
        assert greedy.abs_det >= optimum / 6.0 - 1e-12
        assert improved.abs_det >= greedy.abs_det - 1e-12
        assert improved.abs_det <= optimum + 1e-12
        assert improved.abs_det >= 0.9 * optimum

    @pytest.mark.parametrize('seed', range(10))
    def test_replacement_near_exhaustive_optimum(self, seed):
        vectors = toy_vectors(seed)
        optimum = _exhaustive_best(vectors, 4)
        improved = one_by_one_replace(vectors, lrv_select(vectors, 4))
        assert improved.abs_det >= 0.9 * optimum

    def test_replacement_is_locally_optimal(self, toy_candidates):
        improved = one_by_one_replace(toy_candidates, lrv_select(toy_candidates, 4))
        current = improved.abs_det
        for position in range(1, 4):
            for c in range(len(toy_candidates)):
                if c in improved.indices:
                    continue
                trial = list(improved.indices)
                trial[position] = c
                assert np.exp(log_abs_det(toy_candidates, trial)) <= current * (1 + 1e-9)


class TestGramAndAllocation:
    def test_orthogonal_operators(self, rng):
        x = rng.standard_normal((256, 256))
        basis = gram_orthogonalize(x, all_labels(4))
        r = basis.orthogonal_coefficients
        assert_allclose(r @ r.T, np.eye(256), atol=1e-8)
        operators = basis.orthogonal_operators()[:6]
        traces = np.einsum('iab,kba->ik', operators, operators)
        assert_allclose(traces, 16 * np.eye(6), atol=1e-7)

    def test_estimate_reproduces_density(self, rng):
        rho = random_density(4, rng)
        x = rng.standard_normal((256, 256))
        basis = gram_orthogonalize(x, all_labels(4))
        expectations = 4.0 * x @ pauli_coefficients(rho).real
        assert_allclose(basis.estimate(expectations), rho, atol=1e-8)

    def test_pauli_basis_needs_no_extra_shots(self):
        basis = gram_orthogonalize(4.0 * np.eye(256), all_labels(4))
        assert_allclose(basis.beta, np.eye(256))
        plan = allocate(basis, 100)
        assert plan.conditioning == pytest.approx(1.0)
        assert plan.k == pytest.approx(1.0)
        assert plan.total == 25600

    def test_allocation_is_feasible(self, rng):
        basis = gram_orthogonalize(rng.standard_normal((256, 256)), all_labels(4))
        plan = allocate(basis, 100)
        assert plan.feasibility() <= 1.0 + 1e-9
        assert np.all(plan.multipliers >= 1.0)
        assert np.all(plan.shots >= 100)
        assert plan.conditioning >= 1.0

    def test_cumulative_conditioning(self):
        assert cumulative_conditioning([2.0, 3.0, 0.5]) == [2.0, 6.0, 3.0]

    def test_identity_layer_factor(self):
        assert conditioning_factor(identity_mera(8).layers[0], 100, passes=10) == pytest.approx(1.0)

    def test_two_level_needs_large_lattice(self):
        layers = random_mera(8, 'binary', seed=2).layers
        with pytest.raises(GeometryError):
            two_level_conditioning(layers[0], layers[1], 100, passes=0)


class TestCandidates:
    def test_block_starts(self):
        layers = random_mera(16, 'binary', seed=0).layers
        assert block_starts(layers[0]) == [7, 1, 3, 5]
        assert block_starts(layers[1]) == [3, 1]
        assert block_starts(layers[2]) == []

    def test_central_window_fixes_edges(self):
        layer = random_mera(16, 'binary', seed=0).layers[0]
        assert edge_columns(layer, 1, 'central') == ([0], [0])

    def test_identity_on_edges_never_leaks(self):
        layer = random_mera(16, 'binary', seed=0).layers[0]
        left, right = edge_columns(layer, 1)
        assert 0 in left and 0 in right

    def test_identity_layer_basis_is_pauli(self):
        layer = identity_mera(8).layers[0]
        basis, plan = block_basis(layer, 3, 100, passes=10)
        assert len(basis.labels) == 256
        assert basis.labels[0] == 'I' * 8
        assert plan.conditioning == pytest.approx(1.0)

    def test_candidates_ascend_exactly(self):
        layer = random_mera(8, 'binary', seed=4).layers[0]
        pool = candidates(layer, 1)
        assert pool.window == tuple(range(2, 8)) + (0, 1)
        for r in (1, 500, 4000):
            label = pool.labels[r]
            op = pauli_matrix(label).data
            ascended, support = ascend_operator(layer, op, list(pool.window))
            full = embed_operator(ascended, support, list(pool.block))
            assert_allclose(pauli_coefficients(full).real * 4.0, pool.coefficients[r], atol=1e-10)

    def test_closed_window_keeps_every_edge(self):
        layer = random_mera(16, 'binary', seed=0).layers[0]
        assert edge_columns(layer, 1, 'closed') == ([0, 1, 2, 3], [0, 1, 2, 3])

    def test_closed_window_traces_out_level_edges(self):
        layer = random_mera(16, 'binary', seed=3).layers[0]
        pool = candidates(layer, 1, 'closed')
        interior = candidates(layer, 1)
        assert len(pool) > len(interior)
        shared = {label: r for r, label in enumerate(pool.labels)}
        for r in (0, 77, len(interior) - 1):
            assert_allclose(pool.coefficients[shared[interior.labels[r]]], interior.coefficients[r], atol=1e-10)

        target = [0] + list(pool.block) + [5]
        edged = [r for r, label in enumerate(pool.labels) if label[0] != 'I' and label[-1] != 'I']
        for r in edged[::len(edged) // 3][:3]:
            ascended, support = ascend_operator(layer, pauli_matrix(pool.labels[r]).data, list(pool.window))
            full = embed_operator(ascended, support, target)
            reduced = partial_trace(full, [2] * 6, [1, 2, 3, 4]) / 4.0
            assert_allclose(pauli_coefficients(reduced).real * 4.0, pool.coefficients[r], atol=1e-10)

    def test_closed_window_is_exact_on_cyclic_layer(self):
        layer = random_mera(8, 'binary', seed=4).layers[0]
        assert candidates(layer, 1, 'closed').labels == candidates(layer, 1).labels

    def test_unknown_window_rejected(self):
        with pytest.raises(ValidationError):
            edge_columns(random_mera(16, 'binary', seed=0).layers[0], 1, 'wide')


class TestDistributivity:
    def test_disjoint_cones_factorize(self):
        layer = random_mera(16, 'binary', seed=2).layers[0]
        z = pauli_operator(np.eye(4)[3])
        assert distributivity_deviation(layer, z, [2], z, [10]) == pytest.approx(0.0, abs=1e-10)

    def test_shared_cone_deviates(self):
        layer = random_mera(16, 'binary', seed=2).layers[0]
        x = pauli_operator(np.eye(4)[1])
        assert distributivity_deviation(layer, x, [2], x, [3]) > 1e-6

    @pytest.mark.parametrize('instance', range(100))
    def test_matches_dense_oracle(self, instance):
        rng = np.random.default_rng([31, instance])
        layer = random_mera(8, 'binary', seed=instance % 10).layers[0]
        sites = [int(s) for s in rng.choice(8, size=int(rng.integers(2, 5)), replace=False)]
        cut = int(rng.integers(1, len(sites)))
        support_a, support_b = sites[:cut], sites[cut:]
        op_a, op_b = (rng.standard_normal((2 ** len(s),) * 2) + 1j * rng.standard_normal((2 ** len(s),) * 2)
                      for s in (support_a, support_b))

        union = support_a + support_b
        joint = embed_operator(op_a, support_a, union) @ embed_operator(op_b, support_b, union)
        dense = dense_layer_ascent(layer, joint, union) - \
            dense_layer_ascent(layer, op_a, support_a) @ dense_layer_ascent(layer, op_b, support_b)
        _, target = ascend_operator(layer, joint, union)
        # identity legs outside the joint support scale the Frobenius norm
        expected = np.linalg.norm(dense) / np.sqrt(2 ** (4 - len(target)))
        deviation = distributivity_deviation(layer, op_a, support_a, op_b, support_b)
        assert deviation == pytest.approx(expected, rel=1e-8, abs=1e-9)


ACCEPTANCE_PASSES = 200


@pytest.fixture(scope='module')
def spin_layers():
    """Layers of 16-site chi=2 MERAs fitted to the critical ground states"""
    layers = {}
    for name in ('ising', 'xx'):
        state = ground_state(SpinModel(name, 16)).state
        config = RunConfig(n=16, renormalized_source='state', max_sweeps=300)
        layers[name] = tomograph(StateAccess(state), 'binary', 2, config).circuit.layers
    return layers


@pytest.mark.slow
class TestConditioningAcceptance:
    def test_ising_first_layer(self, spin_layers):
        factor = conditioning_factor(spin_layers['ising'][0], 100, 'closed', ACCEPTANCE_PASSES)
        assert 4.0 <= factor <= 8.0
        assert total_budget(16, 'binary', factor) <= 2 * brute_force_budget(8)

    def test_ising_second_level(self, spin_layers):
        layers = spin_layers['ising']
        factors = [conditioning_factor(layer, 100, 'closed', ACCEPTANCE_PASSES) for layer in layers[:2]]
        cumulative = cumulative_conditioning(factors)
        assert 6.0 / 2 <= cumulative[0] <= 6.0 * 2
        assert 36.0 / 2 <= cumulative[1] <= 36.0 * 2
        two_level = two_level_conditioning(layers[0], layers[1], 100, passes=ACCEPTANCE_PASSES)
        assert 0.5 <= two_level / cumulative[1] <= 1.5

    def test_xx_first_layer(self, spin_layers):
        factor = conditioning_factor(spin_layers['xx'][0], 100, 'closed', ACCEPTANCE_PASSES)
        assert 2.5 <= factor <= 4.5
