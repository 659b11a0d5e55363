"""Operator algebra on the spin ⊗ Fock space of a single ion.

The spin is the slow index: basis vector ``s * levels + n`` is |s, n⟩ with
``s = 0`` for |↑⟩ and ``s = 1`` for |↓⟩, so that σz = diag(1, -1) and
σ+ = |↑⟩⟨↓|. All matrices are dense complex arrays.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import eigh, expm
from scipy.special import eval_genlaguerre, gammaln

from errors import NonHermitianError, NumericalError  # type: ignore
from logging_config import get_logger  # type: ignore

OperatorMatrix = NDArray[np.complex128]

SPIN_INDEX: Dict[str, int] = {"up": 0, "down": 1}

logger = get_logger(__name__)


@dataclass(frozen=True)
class FockSpace:
    """Truncated oscillator space with guard levels above the reported cutoff."""

    n_max: int
    guard_levels: int = 5
    leakage_tolerance: float = 1e-4
    max_dimension: int = 4096

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.guard_levels < 0:
            raise ValueError(f"guard_levels must be >= 0, got {self.guard_levels}")
        if not 0.0 < self.leakage_tolerance < 1.0:
            raise ValueError(
                f"leakage_tolerance must lie in (0, 1), got {self.leakage_tolerance}"
            )

    @property
    def levels(self) -> int:
        """Number of simulated oscillator levels, guard levels included."""
        return self.n_max + self.guard_levels + 1

    @property
    def dimension(self) -> int:
        return 2 * self.levels


@dataclass(frozen=True)
class Operators:
    """Standard operator set on the full tensor space."""

    a: OperatorMatrix
    a_dagger: OperatorMatrix
    number: OperatorMatrix
    pauli_x: OperatorMatrix
    pauli_y: OperatorMatrix
    pauli_z: OperatorMatrix
    identity: OperatorMatrix
    sigma_plus: OperatorMatrix
    sigma_minus: OperatorMatrix
    spin_up_projector: OperatorMatrix
    spin_down_projector: OperatorMatrix
    number_observable: OperatorMatrix
    top_level_projector: OperatorMatrix
    position: OperatorMatrix = field(repr=False)


@dataclass(frozen=True)
class QuantumState:
    """Density operator on spin ⊗ Fock at a simulation time in μs."""

    rho: OperatorMatrix
    space: FockSpace
    time: float = 0.0

    def __post_init__(self) -> None:
        rho = np.array(self.rho, dtype=np.complex128)
        if rho.shape != (self.space.dimension, self.space.dimension):
            raise ValueError(
                f"Density matrix shape {rho.shape} does not match space "
                f"dimension {self.space.dimension}"
            )
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def with_rho(self, rho: OperatorMatrix, time: float) -> "QuantumState":
        return QuantumState(rho=rho, space=self.space, time=time)


def _readonly(matrix: NDArray[np.complex128]) -> OperatorMatrix:
    matrix.setflags(write=False)
    return matrix


def fock_annihilation(levels: int) -> OperatorMatrix:
    """Ladder operator a on a Fock space of ``levels`` states."""
    return np.diag(np.sqrt(np.arange(1, levels)), k=1).astype(np.complex128)


@lru_cache(maxsize=32)
def make_operators(space: FockSpace) -> Operators:
    """Build a, a†, number, Pauli and projector operators on spin ⊗ Fock.

    Raises:
        ValueError: If the tensor dimension exceeds ``space.max_dimension``
    """
    if space.dimension > space.max_dimension:
        raise ValueError(
            f"Tensor dimension {space.dimension} exceeds the configured maximum "
            f"{space.max_dimension}"
        )
    logger.debug(f"Building operators for {space}")

    levels = space.levels
    fock_id = np.eye(levels, dtype=np.complex128)
    spin_id = np.eye(2, dtype=np.complex128)

    a = fock_annihilation(levels)
    n_diag = np.arange(levels, dtype=float)
    observable_diag = np.where(n_diag <= space.n_max, n_diag, 0.0)
    top = np.zeros((levels, levels), dtype=np.complex128)
    top[-1, -1] = 1.0

    sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    sy = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    sz = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    sp = np.array([[0, 1], [0, 0]], dtype=np.complex128)
    up = np.array([[1, 0], [0, 0]], dtype=np.complex128)
    down = np.array([[0, 0], [0, 1]], dtype=np.complex128)

    def spin(op: NDArray[np.complex128]) -> OperatorMatrix:
        return _readonly(np.kron(op, fock_id))

    def fock(op: NDArray[np.complex128]) -> OperatorMatrix:
        return _readonly(np.kron(spin_id, op))

    return Operators(
        a=fock(a),
        a_dagger=fock(a.conj().T),
        number=fock(np.diag(n_diag).astype(np.complex128)),
        pauli_x=spin(sx),
        pauli_y=spin(sy),
        pauli_z=spin(sz),
        identity=_readonly(np.eye(space.dimension, dtype=np.complex128)),
        sigma_plus=spin(sp),
        sigma_minus=spin(sp.conj().T),
        spin_up_projector=spin(up),
        spin_down_projector=spin(down),
        number_observable=fock(np.diag(observable_diag).astype(np.complex128)),
        top_level_projector=fock(top),
        position=fock(a + a.conj().T),
    )


def hermiticity_error(matrix: OperatorMatrix) -> float:
    """Max-norm of H - H†."""
    return float(np.max(np.abs(matrix - matrix.conj().T)))


def assert_hermitian(
    matrix: OperatorMatrix, tol: float = 1e-12, label: str = "H"
) -> None:
    error = hermiticity_error(matrix)
    if error > tol:
        raise NonHermitianError(
            f"{label} is not Hermitian (max deviation {error:.3e})"
        )


def basis_vector(space: FockSpace, spin: str, level: int) -> NDArray[np.complex128]:
    """State vector |spin, level⟩."""
    if spin not in SPIN_INDEX:
        raise ValueError(f"Unknown spin label: {spin}")
    if not 0 <= level < space.levels:
        raise ValueError(f"Fock level {level} outside 0..{space.levels - 1}")
    vector = np.zeros(space.dimension, dtype=np.complex128)
    vector[SPIN_INDEX[spin] * space.levels + level] = 1.0
    return vector


def density_from_vector(
    space: FockSpace, psi: NDArray[np.complex128], time: float = 0.0
) -> QuantumState:
    psi = np.asarray(psi, dtype=np.complex128)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("Cannot build a state from the zero vector")
    psi = psi / norm
    return QuantumState(rho=np.outer(psi, psi.conj()), space=space, time=time)


def product_state(
    space: FockSpace, spin: str = "down", level: int = 0, time: float = 0.0
) -> QuantumState:
    """|spin⟩⟨spin| ⊗ |level⟩⟨level|."""
    return density_from_vector(space, basis_vector(space, spin, level), time)


def tensor_state(
    space: FockSpace,
    spin_rho: NDArray[np.complex128],
    fock_rho: NDArray[np.complex128],
    time: float = 0.0,
) -> QuantumState:
    """Product density matrix from a 2x2 spin part and a Fock part.

    A Fock part smaller than the simulated space is zero-padded.
    """
    padded = np.zeros((space.levels, space.levels), dtype=np.complex128)
    size = fock_rho.shape[0]
    if size > space.levels:
        raise ValueError(f"Fock state of size {size} exceeds {space.levels} levels")
    padded[:size, :size] = fock_rho
    return QuantumState(rho=np.kron(spin_rho, padded), space=space, time=time)


def _blocks(state: QuantumState) -> NDArray[np.complex128]:
    levels = state.space.levels
    return state.rho.reshape(2, levels, 2, levels)


def partial_trace_spin(state: QuantumState) -> NDArray[np.complex128]:
    """Reduced density matrix of the oscillator."""
    return np.einsum("snsm->nm", _blocks(state))


def partial_trace_fock(state: QuantumState) -> NDArray[np.complex128]:
    """Reduced 2x2 density matrix of the spin."""
    return np.einsum("snrn->sr", _blocks(state))


def fock_populations(state: QuantumState) -> NDArray[np.float64]:
    """Populations p_n for n = 0..n_max (guard levels excluded)."""
    diagonal = np.real(np.diag(partial_trace_spin(state)))
    return np.clip(diagonal[: state.space.n_max + 1], 0.0, None)


def top_level_population(state: QuantumState) -> float:
    return float(np.real(np.diag(partial_trace_spin(state))[-1]))


def state_diagnostics(state: QuantumState) -> Dict[str, float]:
    """Trace error, Hermiticity error and smallest eigenvalue of a state."""
    rho = state.rho
    hermitian_part = 0.5 * (rho + rho.conj().T)
    return {
        "trace_error": float(abs(np.trace(rho) - 1.0)),
        "hermiticity_error": hermiticity_error(rho),
        "min_eigenvalue": float(np.min(eigh(hermitian_part, eigvals_only=True))),
    }


def check_state(state: QuantumState, tol: float = 1e-9) -> None:
    """Raise NumericalError if the state is not a valid density operator."""
    diagnostics = state_diagnostics(state)
    if diagnostics["trace_error"] > tol:
        raise NumericalError(
            f"Trace deviates from 1 by {diagnostics['trace_error']:.3e}"
        )
    if diagnostics["hermiticity_error"] > tol:
        raise NumericalError(
            f"Density matrix not Hermitian ({diagnostics['hermiticity_error']:.3e})"
        )
    if diagnostics["min_eigenvalue"] < -tol:
        raise NumericalError(
            f"Negative eigenvalue {diagnostics['min_eigenvalue']:.3e} "
            "in density matrix"
        )


def _psd_sqrt(matrix: NDArray[np.complex128]) -> NDArray[np.complex128]:
    values, vectors = eigh(0.5 * (matrix + matrix.conj().T))
    roots = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * roots) @ vectors.conj().T


def state_fidelity(
    rho: NDArray[np.complex128], sigma: NDArray[np.complex128]
) -> float:
    """Uhlmann fidelity (Tr √(√ρ σ √ρ))², equal to |⟨ψ|φ⟩|² for pure states."""
    root = _psd_sqrt(rho)
    inner = root @ sigma @ root
    values = eigh(0.5 * (inner + inner.conj().T), eigvals_only=True)
    return float(np.sum(np.sqrt(np.clip(values, 0.0, None))) ** 2)


def displacement_element(n_row: int, n_col: int, eta: float) -> complex:
    """⟨n_row| exp(iη(a + a†)) |n_col⟩ from the associated Laguerre closed form.

    Factorial ratios are evaluated in log space so large n do not overflow.
    """
    if n_row < 0 or n_col < 0:
        raise ValueError(f"Fock indices must be >= 0, got ({n_row}, {n_col})")
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")

    low, high = min(n_row, n_col), max(n_row, n_col)
    order = high - low
    log_ratio = 0.5 * (gammaln(low + 1) - gammaln(high + 1))
    magnitude = np.exp(-0.5 * eta**2 + log_ratio) * eval_genlaguerre(
        low, order, eta**2
    )
    return complex((1j * eta) ** order * magnitude)


def displacement_matrix(levels: int, eta: float) -> NDArray[np.complex128]:
    """Matrix exponential of iη(a + a†) on a truncated Fock space."""
    a = fock_annihilation(levels)
    return expm(1j * eta * (a + a.conj().T))
