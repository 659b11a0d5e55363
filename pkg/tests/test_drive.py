"""Tests for the drive profile, the counterdiabatic term and the Hamiltonians."""

import math
import pytest
import sys
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose

# Add src to path for imports
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

from drive import (  # noqa: E402 # type: ignore
    DriveProfile,
    EngineParams,
    ToneSpec,
    cd_cost_closed_form,
    cd_cost_quadrature,
    cycle_time,
    fastest_frequency,
    from_2pi_mhz,
    interaction_hamiltonian,
    lab_frame_hamiltonian,
    omega_cd,
    three_color_tones,
    v_of_t,
)
from hilbert import (  # noqa: E402 # type: ignore
    FockSpace,
    hermiticity_error,
    make_operators,
)


class TestEngineParams:
    """Test cases for the machine parameters."""

    def test_trapped_ion_values(self):
        params = EngineParams.trapped_ion()

        assert params.Omega == pytest.approx(2 * math.pi * 0.159)
        assert params.v0 == pytest.approx(2 * math.pi * 0.075)
        assert params.omega == pytest.approx(params.v0)
        assert params.tau == 119.0
        assert params.omega_z_prime == pytest.approx(2 * math.pi * (2.0338 - 0.075))

    def test_unit_conversion(self):
        assert from_2pi_mhz(1.0) == pytest.approx(2 * math.pi)

    def test_negative_tau(self):
        with pytest.raises(ValueError, match="tau must be > 0"):
            EngineParams.trapped_ion(tau=-1.0)

    def test_eta_range(self):
        with pytest.raises(ValueError, match="eta must lie in"):
            EngineParams.trapped_ion(eta=1.2)

    def test_lamb_dicke_warning(self, caplog):
        params = EngineParams.trapped_ion(eta=0.3)

        assert params.check_lamb_dicke(0.0) is True
        assert params.check_lamb_dicke(5.0) is False
        assert "Lamb-Dicke" in caplog.text


class TestDriveProfile:
    """Test cases for v(t) and its derivative."""

    def setup_method(self):
        self.profile = DriveProfile(v0=0.5, tau=10.0)

    def test_endpoints(self):
        assert v_of_t(self.profile, 0.0) == 0.0
        assert v_of_t(self.profile, 5.0) == pytest.approx(0.5)
        assert self.profile.derivative(0.0) == 0.0
        assert self.profile.derivative(5.0) == pytest.approx(0.0, abs=1e-15)

    def test_midpoint(self):
        assert v_of_t(self.profile, 2.5) == pytest.approx(0.25)
        assert self.profile.derivative(2.5) == pytest.approx(3 * 0.5 / 10.0)

    def test_outside_stroke(self):
        with pytest.raises(ValueError, match="outside the expansion stroke"):
            v_of_t(self.profile, 6.0)

    def test_compression_runs_backwards(self):
        for t in np.linspace(0.0, 5.0, 11):
            assert self.profile.stroke_value(10.0 - t) == pytest.approx(
                self.profile.stroke_value(t)
            )
            assert self.profile.stroke_derivative(10.0 - t) == pytest.approx(
                -self.profile.stroke_derivative(t), abs=1e-15
            )

    def test_cycle_time(self):
        assert cycle_time(self.profile, 23.0) == pytest.approx(3.0)
        assert cycle_time(self.profile, 0.0) == 0.0


class TestCounterdiabatic:
    """Test cases for Ω_CD and its cost."""

    def setup_method(self):
        self.params = EngineParams.trapped_ion()
        self.profile = self.params.profile

    def test_sign_on_each_stroke(self):
        tau = self.params.tau

        assert omega_cd(self.params, self.profile, 0.25 * tau) < 0
        assert omega_cd(self.params, self.profile, 0.75 * tau) > 0
        assert omega_cd(self.params, self.profile, 0.0) == 0.0

    def test_antisymmetric_about_half_cycle(self):
        tau = self.params.tau
        for t in np.linspace(0.0, 0.5 * tau, 9):
            assert omega_cd(self.params, self.profile, tau - t) == pytest.approx(
                -omega_cd(self.params, self.profile, t), abs=1e-15
            )

    def test_closed_form_cost(self):
        cost = cd_cost_closed_form(self.params, self.profile)

        assert cost == pytest.approx(7.42e-3, abs=1e-5)

    def test_zero_drive_has_no_cost(self):
        profile = DriveProfile(v0=0.0, tau=119.0)

        assert cd_cost_closed_form(self.params, profile) == 0.0
        assert omega_cd(self.params, profile, 30.0) == 0.0

    def test_quadrature_matches_closed_form(self):
        rng = np.random.default_rng(20231018)
        for _ in range(100):
            omega_rabi = rng.uniform(0.1, 5.0)
            v0 = rng.uniform(0.01, 5.0)
            tau = rng.uniform(0.1, 500.0)
            params = EngineParams(
                Omega=omega_rabi, v0=v0, tau=tau, omega=0.47, eta=0.1, omega_z=12.8
            )
            profile = params.profile

            assert cd_cost_quadrature(params, profile) == pytest.approx(
                cd_cost_closed_form(params, profile), rel=1e-6
            )

    def test_fastest_frequency_grows_with_cd(self):
        params = EngineParams.trapped_ion(tau=1.0)

        assert fastest_frequency(params, params.profile, True) > fastest_frequency(
            params, params.profile, False
        )


class TestInteractionHamiltonian:
    """Test cases for the interaction-frame Hamiltonian."""

    def setup_method(self):
        self.params = EngineParams.trapped_ion()
        self.space = FockSpace(n_max=4, guard_levels=2)
        self.ops = make_operators(self.space)

    def test_hermitian(self):
        for t in (0.0, 13.7, 60.0, 101.3):
            for with_cd in (False, True):
                hamiltonian = interaction_hamiltonian(
                    self.params, self.params.profile, t, with_cd, self.space
                )
                assert hermiticity_error(hamiltonian) < 1e-14

    def test_cd_adds_sigma_y_term(self):
        t = 40.0
        profile = self.params.profile
        plain = interaction_hamiltonian(self.params, profile, t, False, self.space)
        driven = interaction_hamiltonian(self.params, profile, t, True, self.space)
        expected = 0.5 * omega_cd(self.params, profile, t) * self.ops.pauli_y

        assert_allclose(driven - plain, expected, atol=1e-15)

    def test_components(self):
        t = 20.0
        profile = self.params.profile
        hamiltonian = interaction_hamiltonian(
            self.params, profile, t, False, self.space
        )
        expected = (
            0.5 * self.params.Omega * self.ops.pauli_x
            + 0.5 * profile.value(t) * self.ops.pauli_z
            + self.params.omega * self.ops.number
            - 0.5
            * self.params.eta
            * self.params.Omega
            * math.sin(self.params.omega * t)
            * self.ops.pauli_y
            @ self.ops.position
        )

        assert_allclose(hamiltonian, expected, atol=1e-14)

    def test_local_time_overrides_cycle_position(self):
        profile = self.params.profile
        shifted = interaction_hamiltonian(
            self.params, profile, 250.0, False, self.space, local_time=20.0
        )
        expected_field = 0.5 * profile.value(20.0)

        assert shifted[0, 0].real == pytest.approx(expected_field)

    def test_decoupled_without_lamb_dicke_factor(self):
        params = EngineParams.trapped_ion(eta=0.0)
        hamiltonian = interaction_hamiltonian(
            params, params.profile, 33.0, False, self.space
        )
        commutator = hamiltonian @ self.ops.number - self.ops.number @ hamiltonian

        assert np.max(np.abs(commutator)) < 1e-14


class TestLabFrame:
    """Test cases for the multi-tone lab-frame Hamiltonian."""

    def setup_method(self):
        self.params = EngineParams.trapped_ion(tau=10.0)
        self.space = FockSpace(n_max=4, guard_levels=2)
        self.ops = make_operators(self.space)

    def test_carrier_only_matches_decoupled_engine(self):
        params = EngineParams.trapped_ion(tau=10.0, eta=0.0)
        tones = three_color_tones(params)[:1]
        t = 1.7
        lab = lab_frame_hamiltonian(params, tones, t, 0, self.space)
        effective = interaction_hamiltonian(
            params, params.profile, t, False, self.space
        )

        assert_allclose(lab, effective, atol=1e-14)

    def test_tone_roles(self):
        roles = [tone.role for tone in three_color_tones(self.params, with_cd=True)]

        assert roles == ["carrier", "blue", "red", "cd"]

    def test_hermitian(self):
        tones = three_color_tones(self.params, with_cd=True)
        for t in (0.3, 2.2, 4.9):
            hamiltonian = lab_frame_hamiltonian(self.params, tones, t, 1, self.space)
            assert hermiticity_error(hamiltonian) < 1e-13

    def test_invalid_lamb_dicke_order(self):
        with pytest.raises(ValueError, match="lamb_dicke_order must be 0 or 1"):
            lab_frame_hamiltonian(self.params, [], 0.0, 2, self.space)

    def test_unknown_role(self):
        tone = ToneSpec(role="green", detuning=0.0, phase=0.0, envelope="constant")

        with pytest.raises(ValueError, match="Unknown tone role"):
            lab_frame_hamiltonian(self.params, [tone], 0.0, 1, self.space)

    def test_amplitude_limit(self):
        params = EngineParams.trapped_ion(tau=0.01)
        tone = three_color_tones(params, with_cd=True)[-1]

        with pytest.raises(ValueError, match="exceeds 10 Omega"):
            tone.amplitude(params, params.profile, 0.0025)
