"""Four-stroke Otto cycle of the spin engine charging the oscillator battery."""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from drive import (  # type: ignore
    EngineParams,
    cd_cost_closed_form,
    fastest_frequency,
    interaction_hamiltonian,
)
from dynamics import (  # type: ignore
    HeatingChannel,
    StepPolicy,
    expectation,
    propagate,
    propagate_with_trace,
    stroke_unitary,
)
from errors import EmptyBranchError, NumericalError  # type: ignore
from hilbert import (  # type: ignore
    SPIN_INDEX,
    FockSpace,
    OperatorMatrix,
    QuantumState,
    fock_populations,
    make_operators,
    partial_trace_spin,
    product_state,
    tensor_state,
)
from logging_config import get_logger  # type: ignore

STROKES = ("expansion", "compression")
RESET_VARIANTS = ("pump", "project")
HOT_TARGET = "up"
COLD_TARGET = "down"
EMPTY_BRANCH_PROBABILITY = 1e-12
N_BAR_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ResetMode:
    """How an isochore returns the spin to its bath state."""

    variant: str
    target: str

    def __post_init__(self) -> None:
        if self.variant not in RESET_VARIANTS:
            raise ValueError(f"Unknown reset variant: {self.variant}")
        if self.target not in SPIN_INDEX:
            raise ValueError(f"Unknown reset target: {self.target}")


@dataclass(frozen=True)
class CycleOptions:
    """Switches of a run.

    Attributes:
        with_cd: Add the counterdiabatic σy drive to both strokes
        reset_variant: pump or project; hot resets target up, cold resets down
        classical_baseline: Dephase the battery after every cycle
        heating: Apply background heating during the strokes
        record_traces: Keep ⟨σy⟩(t) for every stroke
        step: Step policy for the strokes
    """

    with_cd: bool = False
    reset_variant: str = "pump"
    classical_baseline: bool = False
    heating: bool = False
    record_traces: bool = False
    step: StepPolicy = field(default_factory=StepPolicy)

    def __post_init__(self) -> None:
        if self.reset_variant not in RESET_VARIANTS:
            raise ValueError(f"Unknown reset variant: {self.reset_variant}")

    @property
    def hot_reset(self) -> ResetMode:
        return ResetMode(variant=self.reset_variant, target=HOT_TARGET)

    @property
    def cold_reset(self) -> ResetMode:
        return ResetMode(variant=self.reset_variant, target=COLD_TARGET)


@dataclass(frozen=True)
class StrokeTrace:
    """⟨σy⟩ sampled at every step boundary of one stroke."""

    cycle: int
    stroke: str
    times: NDArray[np.float64]
    sigma_y: NDArray[np.float64]

    @property
    def end_value(self) -> float:
        return float(self.sigma_y[-1])


@dataclass
class CycleRecord:
    """Stroboscopic record of a run; entry k describes the state after cycle k+1."""

    n_bar: List[float] = field(default_factory=list)
    p_up_after_expansion: List[float] = field(default_factory=list)
    p_up_after_compression: List[float] = field(default_factory=list)
    projection_probabilities: List[float] = field(default_factory=list)
    battery_populations: List[NDArray[np.float64]] = field(default_factory=list)
    traces: List[StrokeTrace] = field(default_factory=list)
    cd_cost: float = 0.0
    final_state: Optional[QuantumState] = None

    @property
    def cycles(self) -> int:
        return len(self.n_bar)

    @property
    def final_n_bar(self) -> float:
        return self.n_bar[-1] if self.n_bar else 0.0


def initial_state(space: FockSpace) -> QuantumState:
    """Spin in |↓⟩, battery cooled to |0⟩."""
    return product_state(space, spin=COLD_TARGET, level=0)


def _stroke_offset(params: EngineParams, which: str) -> float:
    if which not in STROKES:
        raise ValueError(f"Unknown stroke: {which}")
    return 0.0 if which == "expansion" else 0.5 * params.tau


def stroke_builder(
    params: EngineParams,
    with_cd: bool,
    space: FockSpace,
    which: str,
    t0: float,
) -> Callable[[float], OperatorMatrix]:
    """Hamiltonian of a stroke starting at global time t0."""
    offset = _stroke_offset(params, which)
    profile = params.profile

    def builder(t: float) -> OperatorMatrix:
        return interaction_hamiltonian(
            params, profile, t, with_cd, space, local_time=offset + (t - t0)
        )

    return builder


def _channel(params: EngineParams, options: CycleOptions) -> Optional[HeatingChannel]:
    if not options.heating or params.heating_rate == 0:
        return None
    return HeatingChannel.symmetric(params.heating_rate)


def run_stroke(
    state: QuantumState,
    which: str,
    params: EngineParams,
    options: CycleOptions,
    cycle: int = 0,
) -> Tuple[QuantumState, Optional[StrokeTrace]]:
    """Drive the spin over half a cycle starting at ``state.time``.

    The expansion stroke follows v(t), the compression stroke v(τ − t).
    """
    space = state.space
    t0 = state.time
    t1 = t0 + 0.5 * params.tau
    builder = stroke_builder(params, options.with_cd, space, which, t0)
    fastest = fastest_frequency(params, params.profile, options.with_cd)
    channel = _channel(params, options)

    if not options.record_traces:
        return propagate(state, builder, t0, t1, options.step, channel, fastest), None

    ops = make_operators(space)
    final, trace = propagate_with_trace(
        state,
        builder,
        t0,
        t1,
        options.step,
        channel,
        observables={"sigma_y": ops.pauli_y},
        fastest_frequency=fastest,
    )
    stroke = StrokeTrace(
        cycle=cycle, stroke=which, times=trace.times, sigma_y=trace.values["sigma_y"]
    )
    return final, stroke


def _spin_projector(target: str) -> NDArray[np.complex128]:
    projector = np.zeros((2, 2), dtype=np.complex128)
    projector[SPIN_INDEX[target], SPIN_INDEX[target]] = 1.0
    return projector


def branch_probability(state: QuantumState, target: str) -> float:
    """Probability of finding the spin in ``target``."""
    ops = make_operators(state.space)
    projector = ops.spin_up_projector if target == "up" else ops.spin_down_projector
    return expectation(state, projector)


def spin_reset(state: QuantumState, mode: ResetMode) -> QuantumState:
    """Instantaneous isochore: optical pumping or a projective measurement.

    Raises:
        EmptyBranchError: If a projection selects an outcome with p < 1e-12
    """
    if mode.variant == "pump":
        battery = partial_trace_spin(state)
        return tensor_state(
            state.space, _spin_projector(mode.target), battery, time=state.time
        )

    probability = branch_probability(state, mode.target)
    if probability < EMPTY_BRANCH_PROBABILITY:
        raise EmptyBranchError(
            f"Projection onto {mode.target} has probability {probability:.3e}"
        )
    ops = make_operators(state.space)
    if mode.target == "up":
        projector = ops.spin_up_projector
    else:
        projector = ops.spin_down_projector
    projected = projector @ state.rho @ projector / probability
    return state.with_rho(projected, time=state.time)


def dephase_battery(state: QuantumState) -> QuantumState:
    """Remove every battery coherence ⟨n| · |m⟩ with n ≠ m, across all spin blocks."""
    levels = state.space.levels
    mask = np.eye(levels)[None, :, None, :]
    blocks = state.rho.reshape(2, levels, 2, levels) * mask
    return state.with_rho(blocks.reshape(state.rho.shape), time=state.time)


class OttoEngine:
    """Runs the expansion / hot reset / compression / cold reset sequence."""

    logger = get_logger(__name__)

    def __init__(self, params: EngineParams, options: CycleOptions):
        self.params = params
        self.options = options
        self.logger.debug(f"Initialized engine with {params} and {options}")

    def run(self, initial: QuantumState, n_cycles: int) -> CycleRecord:
        """Execute ``n_cycles`` cycles from ``initial`` and record n̄ after each."""
        if n_cycles < 0:
            raise ValueError(f"Number of cycles must be >= 0, got {n_cycles}")

        try:
            record = self._run(initial, n_cycles)
        except Exception as e:
            self.logger.error(f"Engine run failed: {e}")
            raise

        if record.n_bar:
            self.params.check_lamb_dicke(record.final_n_bar)
        return record

    def _run(self, state: QuantumState, n_cycles: int) -> CycleRecord:
        ops = make_operators(state.space)
        record = CycleRecord()
        if self.options.with_cd:
            per_cycle = cd_cost_closed_form(self.params, self.params.profile)
            record.cd_cost = n_cycles * per_cycle

        for cycle in range(n_cycles):
            state = self._stroke(state, "expansion", cycle, record)
            record.p_up_after_expansion.append(branch_probability(state, "up"))
            state = self._reset(state, self.options.hot_reset, record)

            state = self._stroke(state, "compression", cycle, record)
            record.p_up_after_compression.append(branch_probability(state, "up"))
            state = self._reset(state, self.options.cold_reset, record)

            if self.options.classical_baseline:
                state = dephase_battery(state)

            n_bar = expectation(state, ops.number_observable)
            if n_bar < -N_BAR_TOLERANCE:
                raise NumericalError(
                    f"Negative mean phonon number {n_bar:.3e} after cycle {cycle + 1}"
                )
            record.n_bar.append(n_bar)
            record.battery_populations.append(fock_populations(state))
            self.logger.debug(f"Cycle {cycle + 1}: n = {n_bar:.6f}")

        record.final_state = state
        return record

    def _stroke(
        self, state: QuantumState, which: str, cycle: int, record: CycleRecord
    ) -> QuantumState:
        state, trace = run_stroke(state, which, self.params, self.options, cycle)
        if trace is not None:
            record.traces.append(trace)
        return state

    def _reset(
        self, state: QuantumState, mode: ResetMode, record: CycleRecord
    ) -> QuantumState:
        if mode.variant == "project":
            record.projection_probabilities.append(
                branch_probability(state, mode.target)
            )
        return spin_reset(state, mode)


def run_cycles(
    initial: QuantumState,
    n_cycles: int,
    params: EngineParams,
    options: Optional[CycleOptions] = None,
) -> CycleRecord:
    return OttoEngine(params, options or CycleOptions()).run(initial, n_cycles)


def projected_vector_evolution(
    psi0: NDArray[np.complex128],
    n_cycles: int,
    params: EngineParams,
    options: CycleOptions,
    space: FockSpace,
) -> NDArray[np.complex128]:
    """Apply (P_↓ U_c P_↑ U_e)^N to a state vector, renormalising after each projection.

    Uses the same step sequence as the density-matrix strokes of a run
    started at t = 0.
    """
    fastest = fastest_frequency(params, params.profile, options.with_cd)
    psi = np.asarray(psi0, dtype=np.complex128)
    psi = psi / np.linalg.norm(psi)
    projectors = {
        "up": _spin_projector("up"),
        "down": _spin_projector("down"),
    }
    fock_id = np.eye(space.levels)
    time = 0.0

    for _ in range(n_cycles):
        for which, target in (("expansion", HOT_TARGET), ("compression", COLD_TARGET)):
            t1 = time + 0.5 * params.tau
            builder = stroke_builder(params, options.with_cd, space, which, time)
            unitary = stroke_unitary(builder, space, time, t1, options.step, fastest)
            psi = np.kron(projectors[target], fock_id) @ (unitary @ psi)
            norm = np.linalg.norm(psi)
            if norm**2 < EMPTY_BRANCH_PROBABILITY:
                raise EmptyBranchError(
                    f"Projection onto {target} has probability {norm**2:.3e}"
                )
            psi = psi / norm
            time = t1
    return psi
