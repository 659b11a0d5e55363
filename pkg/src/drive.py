"""Time-dependent Hamiltonians of the engine: drive profile, coupling, CD term.

Frequencies are angular, in rad/μs; times are in μs.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import quad

from hilbert import FockSpace, OperatorMatrix, make_operators  # type: ignore
from logging_config import get_logger  # type: ignore

TWO_PI = 2.0 * math.pi
LAMB_DICKE_LIMIT = 0.1
TONE_ROLES = ("carrier", "blue", "red", "cd")
ENVELOPES = ("constant", "sideband", "cd")

logger = get_logger(__name__)


def from_2pi_mhz(value: float) -> float:
    """Convert a frequency quoted as 2π × value MHz to rad/μs."""
    return TWO_PI * value


@dataclass(frozen=True)
class EngineParams:
    """Physical constants of the machine.

    Attributes:
        Omega: Spin carrier Rabi frequency (rad/μs)
        v0: Drive amplitude (rad/μs)
        tau: Full cycle time (μs)
        omega: Battery frequency (rad/μs)
        eta: Lamb-Dicke factor
        omega_z: Trap motional frequency (rad/μs), used by the lab-frame builder
        heating_rate: Background heating rate (phonons/s)
    """

    Omega: float
    v0: float
    tau: float
    omega: float
    eta: float
    omega_z: float
    heating_rate: float = 240.0

    def __post_init__(self) -> None:
        for name in ("Omega", "tau", "omega", "omega_z"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.v0 < 0:
            raise ValueError(f"v0 must be >= 0, got {self.v0}")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        if self.heating_rate < 0:
            raise ValueError(f"heating_rate must be >= 0, got {self.heating_rate}")

    @classmethod
    def trapped_ion(
        cls,
        eta: float = 0.1,
        tau: float = 119.0,
        omega_z_mhz: float = 2.0338,
        heating_rate: float = 240.0,
    ) -> "EngineParams":
        """Parameters of the trapped-ion machine; eta is an assumption."""
        return cls(
            Omega=from_2pi_mhz(0.159),
            v0=from_2pi_mhz(0.075),
            tau=tau,
            omega=from_2pi_mhz(0.075),
            eta=eta,
            omega_z=from_2pi_mhz(omega_z_mhz),
            heating_rate=heating_rate,
        )

    @property
    def omega_z_prime(self) -> float:
        """Trap frequency seen in the frame rotating with the battery, ω_z − ω."""
        return self.omega_z - self.omega

    @property
    def profile(self) -> "DriveProfile":
        return DriveProfile(v0=self.v0, tau=self.tau)

    def lamb_dicke_parameter(self, n_bar: float) -> float:
        """η²(2n̄ + 1)."""
        return self.eta**2 * (2.0 * n_bar + 1.0)

    def check_lamb_dicke(self, n_bar: float) -> bool:
        """Warn when the Lamb-Dicke expansion is questionable at n̄."""
        value = self.lamb_dicke_parameter(n_bar)
        if value > LAMB_DICKE_LIMIT:
            logger.warning(
                f"Lamb-Dicke parameter eta^2(2n+1) = {value:.3f} at n = {n_bar} "
                f"exceeds {LAMB_DICKE_LIMIT}"
            )
            return False
        return True


@dataclass(frozen=True)
class DriveProfile:
    """Smoothstep drive v(t) = v0 s²(3 − 2s), s = 2t/τ, on the expansion stroke."""

    v0: float
    tau: float

    def _check_expansion(self, t: float) -> float:
        half = 0.5 * self.tau
        slack = 1e-12 * self.tau
        if t < -slack or t > half + slack:
            raise ValueError(f"t = {t} us outside the expansion stroke [0, {half}]")
        return min(max(t, 0.0), half)

    def value(self, t: float) -> float:
        s = 2.0 * self._check_expansion(t) / self.tau
        return self.v0 * s * s * (3.0 - 2.0 * s)

    def derivative(self, t: float) -> float:
        s = 2.0 * self._check_expansion(t) / self.tau
        return self.v0 * 6.0 * s * (1.0 - s) * 2.0 / self.tau

    def _local(self, t: float) -> float:
        slack = 1e-12 * self.tau
        if t < -slack or t > self.tau + slack:
            raise ValueError(f"t = {t} us outside the cycle [0, {self.tau}]")
        return min(max(t, 0.0), self.tau)

    def stroke_value(self, t: float) -> float:
        """v on the whole cycle: v(t) while expanding, v(τ − t) while compressing."""
        t = self._local(t)
        if t <= 0.5 * self.tau:
            return self.value(t)
        return self.value(self.tau - t)

    def stroke_derivative(self, t: float) -> float:
        """dv/dt on the whole cycle; compression runs the profile backwards."""
        t = self._local(t)
        if t <= 0.5 * self.tau:
            return self.derivative(t)
        return -self.derivative(self.tau - t)


def cycle_time(profile: DriveProfile, t: float) -> float:
    """Position of a global time inside its cycle."""
    local = math.fmod(t, profile.tau)
    return local + profile.tau if local < 0 else local


def v_of_t(profile: DriveProfile, t: float) -> float:
    """Drive field on the expansion stroke, 0 <= t <= τ/2."""
    return profile.value(t)


def omega_cd(params: EngineParams, profile: DriveProfile, t: float) -> float:
    """Counterdiabatic Rabi frequency Ω_CD(t) = −Ω v̇ / (Ω² + v²) for t in [0, τ]."""
    v = profile.stroke_value(t)
    return -params.Omega * profile.stroke_derivative(t) / (params.Omega**2 + v * v)


def omega_cd_trace(
    params: EngineParams, profile: DriveProfile, times: Sequence[float]
) -> NDArray[np.float64]:
    return np.array([omega_cd(params, profile, float(t)) for t in times])


def cd_cost_closed_form(params: EngineParams, profile: DriveProfile) -> float:
    """(1/(τΩ)) ∫₀^τ |Ω_CD| dt = 2 arctan(v0/Ω) / (τΩ).

    v is monotonic on each stroke, so each stroke contributes arctan(v0/Ω).
    """
    return 2.0 * math.atan(profile.v0 / params.Omega) / (profile.tau * params.Omega)


def cd_cost_quadrature(
    params: EngineParams, profile: DriveProfile, power: int = 1
) -> float:
    """(1/τ) ∫₀^τ |Ω_CD/Ω|^power dt by adaptive quadrature, stroke by stroke."""
    half = 0.5 * profile.tau

    def integrand(t: float) -> float:
        return float(abs(omega_cd(params, profile, t) / params.Omega) ** power)

    total = 0.0
    for start, stop in ((0.0, half), (half, profile.tau)):
        value, _ = quad(integrand, start, stop, epsabs=0.0, epsrel=1e-12, limit=200)
        total += value
    return total / profile.tau


def fastest_frequency(
    params: EngineParams, profile: DriveProfile, with_cd: bool
) -> float:
    """Largest angular rate in the interaction-frame Hamiltonian's time dependence."""
    rate = math.hypot(params.Omega, profile.v0)
    if with_cd:
        grid = np.linspace(0.0, profile.tau, 2001)
        rate += float(np.max(np.abs(omega_cd_trace(params, profile, grid))))
    return max(rate, params.omega, params.eta * params.Omega)


@lru_cache(maxsize=32)
def _coupling_operator(space: FockSpace) -> OperatorMatrix:
    ops = make_operators(space)
    coupling = ops.pauli_y @ ops.position
    coupling.setflags(write=False)
    return coupling


def interaction_hamiltonian(
    params: EngineParams,
    profile: DriveProfile,
    t: float,
    with_cd: bool,
    space: FockSpace,
    local_time: Optional[float] = None,
) -> OperatorMatrix:
    """Engine + battery + coupling Hamiltonian at global time t.

    The drive uses the position of t inside its cycle, or ``local_time`` when
    given, while the coupling phase ωt runs on the global clock.
    """
    ops = make_operators(space)
    local = cycle_time(profile, t) if local_time is None else local_time
    v = profile.stroke_value(local)

    hamiltonian = (
        0.5 * params.Omega * ops.pauli_x
        + 0.5 * v * ops.pauli_z
        + params.omega * ops.number
        - 0.5 * params.eta * params.Omega * math.sin(params.omega * t)
        * _coupling_operator(space)
    )
    if with_cd:
        hamiltonian = hamiltonian + 0.5 * omega_cd(params, profile, local) * ops.pauli_y
    return hamiltonian


@dataclass(frozen=True)
class ToneSpec:
    """One component of the multi-tone light field.

    Attributes:
        role: carrier, blue, red or cd
        detuning: δ relative to the shifted carrier (rad/μs)
        phase: Laser phase φ_L (rad)
        envelope: constant (Ω), sideband (Ω sin ωt) or cd (Ω v̇ / (Ω² + v²))
    """

    role: str
    detuning: float
    phase: float
    envelope: str

    def amplitude(self, params: EngineParams, profile: DriveProfile, t: float) -> float:
        if self.envelope == "constant":
            value = params.Omega
        elif self.envelope == "sideband":
            value = params.Omega * math.sin(params.omega * t)
        elif self.envelope == "cd":
            value = -omega_cd(params, profile, cycle_time(profile, t))
        else:
            raise ValueError(f"Unknown tone envelope: {self.envelope}")
        if abs(value) > 10.0 * params.Omega:
            raise ValueError(
                f"{self.role} tone amplitude {value:.3f} rad/us exceeds 10 Omega"
            )
        return value


def three_color_tones(params: EngineParams, with_cd: bool = False) -> List[ToneSpec]:
    """Carrier plus sin(ωt)-modulated red and blue sidebands, optionally the CD tone."""
    tones = [
        ToneSpec(role="carrier", detuning=0.0, phase=0.0, envelope="constant"),
        ToneSpec(
            role="blue", detuning=params.omega_z_prime, phase=0.0, envelope="sideband"
        ),
        ToneSpec(
            role="red", detuning=-params.omega_z_prime, phase=0.0, envelope="sideband"
        ),
    ]
    if with_cd:
        tones.append(
            ToneSpec(role="cd", detuning=0.0, phase=-0.5 * math.pi, envelope="cd")
        )
    return tones


def lab_frame_hamiltonian(
    params: EngineParams,
    tones: Sequence[ToneSpec],
    t: float,
    lamb_dicke_order: int,
    space: FockSpace,
) -> OperatorMatrix:
    """Multi-tone Hamiltonian before the final rotating-wave approximation.

    Terms rotating at ω'_z are kept; with ``lamb_dicke_order=1`` the motional
    factor is 1 + iη(a e^{−iω'_z t} + a† e^{iω'_z t}).

    Raises:
        ValueError: For an unknown tone role or a Lamb-Dicke order other than 0, 1
    """
    if lamb_dicke_order not in (0, 1):
        raise ValueError(f"lamb_dicke_order must be 0 or 1, got {lamb_dicke_order}")
    for tone in tones:
        if tone.role not in TONE_ROLES:
            raise ValueError(f"Unknown tone role: {tone.role}")

    ops = make_operators(space)
    profile = params.profile
    v = profile.stroke_value(cycle_time(profile, t))

    motional = ops.identity
    if lamb_dicke_order == 1:
        rotation = np.exp(-1j * params.omega_z_prime * t)
        motional = ops.identity + 1j * params.eta * (
            ops.a * rotation + ops.a_dagger * np.conj(rotation)
        )
    raising = ops.sigma_plus @ motional

    hamiltonian = 0.5 * v * ops.pauli_z + params.omega * ops.number
    for tone in tones:
        amplitude = tone.amplitude(params, profile, t)
        phase = np.exp(-1j * (tone.detuning * t + tone.phase))
        term = 0.5 * amplitude * phase * raising
        hamiltonian = hamiltonian + term + term.conj().T
    return hamiltonian
