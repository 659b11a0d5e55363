"""Tests for the spin ⊗ Fock operator algebra."""

import pytest
import sys
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose

# Add src to path for imports
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

from errors import NonHermitianError, NumericalError  # noqa: E402 # type: ignore
from hilbert import (  # noqa: E402 # type: ignore
    FockSpace,
    QuantumState,
    assert_hermitian,
    basis_vector,
    check_state,
    density_from_vector,
    displacement_element,
    displacement_matrix,
    fock_populations,
    make_operators,
    partial_trace_fock,
    partial_trace_spin,
    product_state,
    state_diagnostics,
    state_fidelity,
    tensor_state,
)


class TestFockSpace:
    """Test cases for the truncated oscillator space."""

    def test_levels_include_guard(self):
        space = FockSpace(n_max=6, guard_levels=4)

        assert space.levels == 11
        assert space.dimension == 22

    def test_invalid_cutoff(self):
        with pytest.raises(ValueError, match="n_max must be >= 1"):
            FockSpace(n_max=0)

    def test_invalid_leakage_tolerance(self):
        with pytest.raises(ValueError, match="leakage_tolerance"):
            FockSpace(n_max=3, leakage_tolerance=1.5)

    def test_dimension_limit(self):
        space = FockSpace(n_max=40, guard_levels=5, max_dimension=50)

        with pytest.raises(ValueError, match="exceeds the configured maximum"):
            make_operators(space)


class TestOperators:
    """Test cases for make_operators."""

    def setup_method(self):
        self.space = FockSpace(n_max=4, guard_levels=2)
        self.ops = make_operators(self.space)

    def test_commutator_below_truncation(self):
        commutator = self.ops.a @ self.ops.a_dagger - self.ops.a_dagger @ self.ops.a
        levels = self.space.levels
        diagonal = np.real(np.diag(commutator)).reshape(2, levels)

        assert_allclose(diagonal[:, :-1], 1.0, atol=1e-12)

    def test_pauli_algebra(self):
        product = self.ops.pauli_x @ self.ops.pauli_y

        assert_allclose(product, 1j * self.ops.pauli_z, atol=1e-12)

    def test_sigma_plus_raises_spin(self):
        down = basis_vector(self.space, "down", 2)
        up = basis_vector(self.space, "up", 2)

        assert_allclose(self.ops.sigma_plus @ down, up, atol=1e-12)
        assert_allclose(self.ops.pauli_z @ up, up, atol=1e-12)

    def test_number_observable_excludes_guard_levels(self):
        guard = product_state(self.space, "down", self.space.levels - 1)

        assert np.real(np.trace(guard.rho @ self.ops.number_observable)) == 0.0
        assert np.real(np.trace(guard.rho @ self.ops.number)) == pytest.approx(6.0)

    def test_operators_are_read_only(self):
        with pytest.raises(ValueError):
            self.ops.a[0, 1] = 2.0

    def test_assert_hermitian(self):
        assert_hermitian(self.ops.pauli_y)

        with pytest.raises(NonHermitianError, match="not Hermitian"):
            assert_hermitian(self.ops.a, label="a")


class TestStates:
    """Test cases for state construction and reduction."""

    def setup_method(self):
        self.space = FockSpace(n_max=3, guard_levels=1)

    def bell_state(self) -> QuantumState:
        psi = basis_vector(self.space, "down", 0) + basis_vector(self.space, "up", 1)
        return density_from_vector(self.space, psi)

    def test_product_state_shape(self):
        state = product_state(self.space, "down", 0)

        assert state.rho.shape == (10, 10)
        assert np.trace(state.rho) == pytest.approx(1.0)

    def test_state_shape_mismatch(self):
        with pytest.raises(ValueError, match="does not match space"):
            QuantumState(rho=np.eye(4), space=self.space)

    def test_unknown_spin_label(self):
        with pytest.raises(ValueError, match="Unknown spin label"):
            basis_vector(self.space, "left", 0)

    def test_trace_over_spin_of_product_state(self):
        battery = partial_trace_spin(product_state(self.space, "down", 0))

        expected = np.zeros((5, 5))
        expected[0, 0] = 1.0
        assert_allclose(battery, expected, atol=1e-14)

    def test_trace_over_spin_of_entangled_state(self):
        battery = partial_trace_spin(self.bell_state())

        assert_allclose(np.diag(battery)[:2], [0.5, 0.5], atol=1e-14)
        assert abs(battery[0, 1]) < 1e-14

    def test_trace_over_fock_of_entangled_state(self):
        spin = partial_trace_fock(self.bell_state())

        assert_allclose(spin, 0.5 * np.eye(2), atol=1e-14)

    def test_fock_populations(self):
        populations = fock_populations(self.bell_state())

        assert_allclose(populations, [0.5, 0.5, 0.0, 0.0], atol=1e-14)

    def test_tensor_state_pads_fock_part(self):
        spin = np.array([[0, 0], [0, 1]], dtype=complex)
        battery = np.diag([0.25, 0.75]).astype(complex)
        state = tensor_state(self.space, spin, battery)

        assert_allclose(fock_populations(state), [0.25, 0.75, 0.0, 0.0])
        assert_allclose(partial_trace_fock(state), spin, atol=1e-14)

    def test_tensor_state_too_large(self):
        with pytest.raises(ValueError, match="exceeds"):
            tensor_state(self.space, np.eye(2) / 2, np.eye(9) / 9)

    def test_diagnostics_of_valid_state(self):
        diagnostics = state_diagnostics(self.bell_state())

        assert diagnostics["trace_error"] < 1e-14
        assert diagnostics["hermiticity_error"] < 1e-14
        assert diagnostics["min_eigenvalue"] > -1e-14
        check_state(self.bell_state())

    def test_check_state_rejects_bad_trace(self):
        state = QuantumState(rho=2.0 * self.bell_state().rho, space=self.space)

        with pytest.raises(NumericalError, match="Trace deviates"):
            check_state(state)

    def test_fidelity_of_pure_states(self):
        plus = basis_vector(self.space, "up", 0) + basis_vector(self.space, "down", 0)
        up = basis_vector(self.space, "up", 0)
        rho = density_from_vector(self.space, plus).rho
        sigma = density_from_vector(self.space, up).rho

        assert state_fidelity(rho, sigma) == pytest.approx(0.5, abs=1e-6)
        assert state_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-6)


class TestDisplacement:
    """Test cases for the Laguerre closed form of exp(iη(a + a†))."""

    def test_ground_to_first_level(self):
        element = displacement_element(1, 0, 0.1)

        assert abs(element) == pytest.approx(0.1 * np.exp(-0.005), rel=1e-12)

    def test_zero_eta_is_identity(self):
        assert displacement_element(3, 3, 0.0) == pytest.approx(1.0)
        assert displacement_element(3, 2, 0.0) == pytest.approx(0.0)

    def test_matches_matrix_exponential(self):
        eta = 0.1
        matrix = displacement_matrix(40, eta)

        for n_row in range(6):
            for n_col in range(6):
                assert displacement_element(n_row, n_col, eta) == pytest.approx(
                    matrix[n_row, n_col], abs=1e-10
                )

    def test_large_levels_do_not_overflow(self):
        element = displacement_element(181, 180, 0.1)

        assert np.isfinite(abs(element))
        assert 0 < abs(element) < 1

    def test_negative_index(self):
        with pytest.raises(ValueError, match="Fock indices"):
            displacement_element(-1, 0, 0.1)
