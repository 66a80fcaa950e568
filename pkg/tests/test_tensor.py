import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.tensor.core import Tensor, apply_local, contract, hermitian_eig, partial_trace, svd
from src.tensor.io import read_tensor, write_tensor
from src.utils.errors import ContractionError, ValidationError
from tests.conftest import random_density


class TestTensor:
    def test_data_is_read_only(self):
        t = Tensor(np.eye(2))
        assert not t.data.flags.writeable
        assert t.data.dtype == np.complex128

    @pytest.mark.parametrize('axes', [(1, 0, 2), (2, 0, 1), (2, 1, 0)])
    def test_permute_then_inverse_is_bit_exact(self, rng, axes):
        t = Tensor(rng.standard_normal((2, 3, 4)) + 1j * rng.standard_normal((2, 3, 4)))
        back = t.permute(axes).permute(np.argsort(axes))
        assert back.shape == (2, 3, 4)
        assert np.array_equal(back.data, t.data)

    def test_permute_matches_transpose(self, rng):
        data = rng.standard_normal((2, 2, 3))
        assert_allclose(Tensor(data).permute((2, 0, 1)).data, np.transpose(data, (2, 0, 1)))

    def test_dagger_of_non_matrix_rejected(self):
        with pytest.raises(ValidationError):
            Tensor(np.zeros((2, 2, 2))).dagger()

    def test_contract_matches_tensordot(self, rng):
        a = rng.standard_normal((2, 3, 4))
        b = rng.standard_normal((4, 3))
        out = contract(a, b, [(1, 1), (2, 0)])
        assert_allclose(out.data, np.tensordot(a, b, axes=([1, 2], [1, 0])))

    def test_contract_dimension_mismatch_names_pair(self):
        with pytest.raises(ContractionError, match=r"\(0, 0\)"):
            contract(np.zeros((2, 2)), np.zeros((3, 2)), [(0, 0)])


class TestLinearAlgebra:
    def test_svd_reconstructs(self, rng):
        m = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        u, s, v = svd(m)
        assert_allclose(u @ np.diag(s) @ v.conj().T, m, atol=1e-12)
        assert np.all(np.diff(s) <= 0)

    def test_hermitian_eig_descending_and_reconstructs(self, rng):
        rho = random_density(3, rng)
        spectrum = hermitian_eig(rho)
        assert np.all(np.diff(spectrum.eigenvalues) <= 0)
        assert_allclose(spectrum.reconstruct(), rho, atol=1e-12)

    def test_hermitian_eig_rejects_non_hermitian(self):
        with pytest.raises(ValidationError):
            hermitian_eig(np.array([[0, 1], [0, 0]]))

    def test_eigenvector_phase_convention(self, rng):
        spectrum = hermitian_eig(random_density(2, rng))
        pivots = np.argmax(np.abs(spectrum.eigenvectors), axis=0)
        entries = spectrum.eigenvectors[pivots, np.arange(4)]
        assert_allclose(entries.imag, 0.0, atol=1e-14)
        assert np.all(entries.real > 0)


class TestPartialTrace:
    def test_product_state_factors(self, rng):
        a, b = random_density(1, rng), random_density(2, rng)
        assert_allclose(partial_trace(np.kron(a, b), [2, 2, 2], [1, 2]), b, atol=1e-12)
        assert_allclose(partial_trace(np.kron(a, b), [2, 2, 2], [0]), a, atol=1e-12)

    def test_keep_order_permutes_legs(self, rng):
        a, b = random_density(1, rng), random_density(1, rng)
        assert_allclose(partial_trace(np.kron(a, b), [2, 2], [1, 0]), np.kron(b, a), atol=1e-12)

    def test_vector_matches_density(self, rng):
        psi = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        psi /= np.linalg.norm(psi)
        assert_allclose(partial_trace(psi, [2] * 4, [3, 1]),
                        partial_trace(np.outer(psi, psi.conj()), [2] * 4, [3, 1]), atol=1e-12)

    def test_invalid_keep_rejected(self):
        with pytest.raises(ValidationError):
            partial_trace(np.eye(4), [2, 2], [2])


class TestApplyLocal:
    def test_two_site_gate_matches_kron(self, rng):
        psi = rng.standard_normal(8) + 0j
        gate = rng.standard_normal((4, 4))
        expected = np.kron(np.eye(2), gate) @ psi
        assert_allclose(apply_local(psi, gate, [1, 2]), expected, atol=1e-12)

    def test_reversed_sites_swap_legs(self):
        cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        psi = np.zeros(4)
        psi[1] = 1.0  # |01>
        out = apply_local(psi, cnot, [1, 0])
        assert_allclose(np.abs(out), np.eye(4)[3])


class TestTensorFiles:
    def test_write_then_read(self, tmp_path, rng):
        data = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        path = write_tensor(tmp_path / 't.tensor', data, {'kind': 'test'})
        tensor, metadata = read_tensor(path)
        assert_allclose(tensor.data, data)
        assert metadata == {'kind': 'test'}

    def test_truncated_payload_rejected(self, tmp_path):
        path = write_tensor(tmp_path / 't.tensor', np.eye(2))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValidationError):
            read_tensor(path)
