"""Propagation of density operators under time-dependent Hamiltonians.

Unitary methods take the Hamiltonian piecewise constant over each step and
exponentiate it exactly; background heating is split off and applied after
every unitary step through the exact Fock-space damping map.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import eigh, expm

from errors import LeakageError  # type: ignore
from hilbert import (  # type: ignore
    FockSpace,
    OperatorMatrix,
    QuantumState,
    assert_hermitian,
    fock_annihilation,
    make_operators,
    top_level_population,
)
from logging_config import get_logger  # type: ignore

HamiltonianBuilder = Callable[[float], OperatorMatrix]

METHODS = ("exponential-midpoint", "magnus4", "rk4")
UNITARY_METHODS = ("exponential-midpoint", "magnus4")
PER_SECOND_TO_PER_US = 1e-6
_GAUSS_OFFSET = math.sqrt(3.0) / 6.0

logger = get_logger(__name__)


@dataclass(frozen=True)
class StepPolicy:
    """Step-size rules for a propagation.

    Attributes:
        dt_max: Upper bound on the step (μs)
        substeps_per_fastest_period: Steps per inverse of the fastest angular rate
        method: exponential-midpoint, magnus4 or rk4
        min_steps: Lower bound on the number of steps of any propagation
    """

    dt_max: float = 0.05
    substeps_per_fastest_period: int = 10
    method: str = "exponential-midpoint"
    min_steps: int = 100

    def __post_init__(self) -> None:
        if self.dt_max <= 0:
            raise ValueError(f"dt_max must be > 0, got {self.dt_max}")
        if self.substeps_per_fastest_period < 10:
            raise ValueError(
                "substeps_per_fastest_period must be >= 10, got "
                f"{self.substeps_per_fastest_period}"
            )
        if self.method not in METHODS:
            raise ValueError(f"Unknown integration method: {self.method}")
        if self.min_steps < 1:
            raise ValueError(f"min_steps must be >= 1, got {self.min_steps}")

    def schedule(
        self, t0: float, t1: float, fastest_frequency: float
    ) -> Tuple[int, float]:
        """Number of steps and step size covering [t0, t1]."""
        bound = self.dt_max
        if fastest_frequency > 0:
            per_period = self.substeps_per_fastest_period
            bound = min(bound, 1.0 / (fastest_frequency * per_period))
        steps = max(self.min_steps, int(math.ceil((t1 - t0) / bound - 1e-9)))
        return steps, (t1 - t0) / steps

    def halved(self) -> "StepPolicy":
        return StepPolicy(
            dt_max=0.5 * self.dt_max,
            substeps_per_fastest_period=2 * self.substeps_per_fastest_period,
            method=self.method,
            min_steps=2 * self.min_steps,
        )


@dataclass(frozen=True)
class HeatingChannel:
    """Phonon gain and loss rates (1/s) acting on the battery."""

    gamma_up: float
    gamma_down: float

    def __post_init__(self) -> None:
        if self.gamma_up < 0 or self.gamma_down < 0:
            raise ValueError(
                f"Heating rates must be >= 0, got ({self.gamma_up}, {self.gamma_down})"
            )

    @classmethod
    def symmetric(cls, rate: float) -> "HeatingChannel":
        """Equal gain and loss, giving a mean phonon drift dn̄/dt = rate."""
        return cls(gamma_up=rate, gamma_down=rate)

    @property
    def is_trivial(self) -> bool:
        return self.gamma_up == 0 and self.gamma_down == 0


@dataclass
class StateTrace:
    """Expectation values recorded at every step boundary of a propagation."""

    times: NDArray[np.float64]
    values: Dict[str, NDArray[np.float64]] = field(default_factory=dict)


def expectation(state: QuantumState, op: OperatorMatrix) -> float:
    """Tr(ρ op) for a Hermitian op.

    Raises:
        ValueError: On a dimension mismatch or a non-negligible imaginary part
    """
    if op.shape != state.rho.shape:
        raise ValueError(
            f"Operator shape {op.shape} does not match state shape {state.rho.shape}"
        )
    value = complex(np.einsum("ij,ji->", state.rho, op))
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise ValueError(f"Expectation value has imaginary part {value.imag:.3e}")
    return value.real


def _hermitian_exponential(
    hamiltonian: OperatorMatrix, dt: float
) -> NDArray[np.complex128]:
    values, vectors = eigh(hamiltonian)
    return (vectors * np.exp(-1j * values * dt)) @ vectors.conj().T


def _step_unitaries(
    builder: HamiltonianBuilder, t0: float, steps: int, dt: float, method: str
) -> Iterator[NDArray[np.complex128]]:
    for k in range(steps):
        start = t0 + k * dt
        if method == "exponential-midpoint":
            hamiltonian = builder(start + 0.5 * dt)
            assert_hermitian(hamiltonian, label=f"H({start + 0.5 * dt:.6g} us)")
        else:
            h1 = builder(start + (0.5 - _GAUSS_OFFSET) * dt)
            h2 = builder(start + (0.5 + _GAUSS_OFFSET) * dt)
            assert_hermitian(h1, label=f"H({start:.6g} us)")
            assert_hermitian(h2, label=f"H({start + dt:.6g} us)")
            commutator = h2 @ h1 - h1 @ h2
            # K is Hermitian: i[H2, H1] is Hermitian
            hamiltonian = 0.5 * (h1 + h2) - (math.sqrt(3.0) / 12.0) * dt * (
                1j * commutator
            )
        yield _hermitian_exponential(hamiltonian, dt)


@lru_cache(maxsize=16)
def _damping_map(
    levels: int, gamma_up: float, gamma_down: float, dt: float
) -> NDArray[np.complex128]:
    """exp(𝓛 dt) for the Fock-space heating dissipator, row-major vectorisation."""
    a = fock_annihilation(levels)
    a_dag = a.conj().T
    identity = np.eye(levels)
    lowered = a_dag @ a
    raised = a @ a_dag

    generator = gamma_down * (
        np.kron(a, a.conj()) - 0.5 * np.kron(lowered, identity)
        - 0.5 * np.kron(identity, lowered.T)
    ) + gamma_up * (
        np.kron(a_dag, a_dag.conj()) - 0.5 * np.kron(raised, identity)
        - 0.5 * np.kron(identity, raised.T)
    )
    logger.debug(f"Building damping map for {levels} levels, dt = {dt:.4g} us")
    return expm(generator * dt)


def _apply_damping(
    rho: NDArray[np.complex128], levels: int, damping: NDArray[np.complex128]
) -> NDArray[np.complex128]:
    blocks = rho.reshape(2, levels, 2, levels).transpose(0, 2, 1, 3).reshape(4, -1)
    blocks = blocks @ damping.T
    return (
        blocks.reshape(2, 2, levels, levels)
        .transpose(0, 2, 1, 3)
        .reshape(2 * levels, 2 * levels)
    )


def _lindblad_rhs(
    hamiltonian: OperatorMatrix,
    rho: NDArray[np.complex128],
    jumps: List[Tuple[float, OperatorMatrix]],
) -> NDArray[np.complex128]:
    drho = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    for rate, jump in jumps:
        jump_dag = jump.conj().T
        product = jump_dag @ jump
        drho += rate * (jump @ rho @ jump_dag - 0.5 * (product @ rho + rho @ product))
    return drho


def _rk4_steps(
    rho: NDArray[np.complex128],
    builder: HamiltonianBuilder,
    t0: float,
    steps: int,
    dt: float,
    jumps: List[Tuple[float, OperatorMatrix]],
) -> Iterator[NDArray[np.complex128]]:
    for k in range(steps):
        start = t0 + k * dt
        h_start = builder(start)
        h_mid = builder(start + 0.5 * dt)
        h_end = builder(start + dt)
        k1 = _lindblad_rhs(h_start, rho, jumps)
        k2 = _lindblad_rhs(h_mid, rho + 0.5 * dt * k1, jumps)
        k3 = _lindblad_rhs(h_mid, rho + 0.5 * dt * k2, jumps)
        k4 = _lindblad_rhs(h_end, rho + dt * k3, jumps)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        yield rho


def _default_fastest(builder: HamiltonianBuilder, t0: float, t1: float) -> float:
    values = eigh(builder(0.5 * (t0 + t1)), eigvals_only=True)
    return float(values[-1] - values[0])


def check_leakage(state: QuantumState, peak: float = 0.0) -> float:
    """Largest top guard level population; raises LeakageError above tolerance.

    peak is the maximum already seen at intermediate step boundaries.
    """
    population = max(top_level_population(state), peak)
    tolerance = state.space.leakage_tolerance
    if population > tolerance:
        raise LeakageError(population, tolerance)
    if population > 0.1 * tolerance:
        logger.warning(
            f"Top guard level population {population:.2e} approaching tolerance "
            f"{tolerance:.0e}"
        )
    return population


def _evolve(
    state: QuantumState,
    builder: HamiltonianBuilder,
    t0: float,
    t1: float,
    policy: StepPolicy,
    channel: Optional[HeatingChannel],
    fastest_frequency: Optional[float],
) -> Iterator[Tuple[float, NDArray[np.complex128]]]:
    if not t1 > t0:
        raise ValueError(f"Propagation requires t1 > t0, got [{t0}, {t1}]")
    if fastest_frequency is None:
        fastest_frequency = _default_fastest(builder, t0, t1)
    steps, dt = policy.schedule(t0, t1, fastest_frequency)
    levels = state.space.levels
    logger.debug(
        f"Propagating [{t0:.4g}, {t1:.4g}] us in {steps} steps of {dt:.4g} us "
        f"({policy.method})"
    )

    heating = channel is not None and not channel.is_trivial
    rho = np.array(state.rho)

    if policy.method == "rk4":
        jumps: List[Tuple[float, OperatorMatrix]] = []
        if heating and channel is not None:
            ops = make_operators(state.space)
            jumps = [
                (channel.gamma_down * PER_SECOND_TO_PER_US, ops.a),
                (channel.gamma_up * PER_SECOND_TO_PER_US, ops.a_dagger),
            ]
        for k, rho in enumerate(_rk4_steps(rho, builder, t0, steps, dt, jumps)):
            yield t0 + (k + 1) * dt, rho
        return

    damping = None
    if heating and channel is not None:
        damping = _damping_map(
            levels,
            channel.gamma_up * PER_SECOND_TO_PER_US,
            channel.gamma_down * PER_SECOND_TO_PER_US,
            dt,
        )
    for k, unitary in enumerate(_step_unitaries(builder, t0, steps, dt, policy.method)):
        rho = unitary @ rho @ unitary.conj().T
        if damping is not None:
            rho = _apply_damping(rho, levels, damping)
        yield t0 + (k + 1) * dt, rho


def _top_population(rho: NDArray[np.complex128], levels: int) -> float:
    # spin-major ordering: |s, n> sits at s * levels + n
    diagonal = np.real(np.diagonal(rho))
    return float(diagonal[levels - 1] + diagonal[2 * levels - 1])


def _finish(
    state: QuantumState, rho: NDArray[np.complex128], t1: float, peak: float
) -> QuantumState:
    final = state.with_rho(0.5 * (rho + rho.conj().T), time=t1)
    check_leakage(final, peak)
    return final


def propagate(
    state: QuantumState,
    builder: HamiltonianBuilder,
    t0: float,
    t1: float,
    policy: Optional[StepPolicy] = None,
    channel: Optional[HeatingChannel] = None,
    fastest_frequency: Optional[float] = None,
) -> QuantumState:
    """Evolve a state from t0 to t1, unitarily or with the heating dissipator.

    Raises:
        ValueError: If t1 <= t0
        NonHermitianError: If a sampled Hamiltonian is not Hermitian
        LeakageError: If the top guard level is overpopulated at any step
    """
    policy = policy or StepPolicy()
    levels = state.space.levels
    rho = state.rho
    peak = 0.0
    for _, rho in _evolve(state, builder, t0, t1, policy, channel, fastest_frequency):
        peak = max(peak, _top_population(rho, levels))
    return _finish(state, rho, t1, peak)


def propagate_with_trace(
    state: QuantumState,
    builder: HamiltonianBuilder,
    t0: float,
    t1: float,
    policy: Optional[StepPolicy] = None,
    channel: Optional[HeatingChannel] = None,
    observables: Optional[Mapping[str, OperatorMatrix]] = None,
    fastest_frequency: Optional[float] = None,
) -> Tuple[QuantumState, StateTrace]:
    """Like propagate, also recording expectation values at every step boundary."""
    policy = policy or StepPolicy()
    observables = observables or {}
    times = [t0]
    values: Dict[str, List[float]] = {
        name: [expectation(state, op)] for name, op in observables.items()
    }

    levels = state.space.levels
    rho = state.rho
    peak = 0.0
    steps = _evolve(state, builder, t0, t1, policy, channel, fastest_frequency)
    for time, rho in steps:
        peak = max(peak, _top_population(rho, levels))
        times.append(time)
        for name, op in observables.items():
            values[name].append(float(np.real(np.einsum("ij,ji->", rho, op))))

    trace = StateTrace(
        times=np.array(times),
        values={name: np.array(series) for name, series in values.items()},
    )
    return _finish(state, rho, t1, peak), trace


def stroke_unitary(
    builder: HamiltonianBuilder,
    space: FockSpace,
    t0: float,
    t1: float,
    policy: Optional[StepPolicy] = None,
    fastest_frequency: Optional[float] = None,
) -> NDArray[np.complex128]:
    """Product propagator over [t0, t1] using the same steps as propagate."""
    policy = policy or StepPolicy()
    if policy.method not in UNITARY_METHODS:
        raise ValueError(f"Method {policy.method} does not produce a propagator")
    if not t1 > t0:
        raise ValueError(f"Propagation requires t1 > t0, got [{t0}, {t1}]")
    if fastest_frequency is None:
        fastest_frequency = _default_fastest(builder, t0, t1)
    steps, dt = policy.schedule(t0, t1, fastest_frequency)

    total = np.eye(space.dimension, dtype=np.complex128)
    for unitary in _step_unitaries(builder, t0, steps, dt, policy.method):
        total = unitary @ total
    return total
