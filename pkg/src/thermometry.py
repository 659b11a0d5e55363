"""Blue-sideband thermometry of the battery.

A probe resonant with |↓, n⟩ ↔ |↑, n+1⟩ leaves the spin in |↓⟩ with probability
p_↓(t) = Σ p_n cos²(Ω_{n+1,n} t). ``synthesize_signal`` produces such scans with
projection noise and ``fit_populations`` inverts them into Fock populations.
"""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize, minimize_scalar, nnls

from drive import TWO_PI  # type: ignore
from errors import FitConvergenceError, FitError, OccupationFloorError  # type: ignore
from hilbert import displacement_element  # type: ignore
from logging_config import get_logger  # type: ignore

DEFAULT_OMEGA_BSB = TWO_PI * 0.02
DEFAULT_SHOTS = 200
DEFAULT_POINTS = 60
REMAINDER_LEVELS = 10
SUM_TOLERANCE = 1e-9

logger = get_logger(__name__)


def default_times(
    omega_bsb: float, eta: float, points: int = DEFAULT_POINTS
) -> Tuple[float, ...]:
    """Uniform grid over three periods of the Lamb-Dicke |0⟩ → |1⟩ sideband."""
    if eta <= 0 or omega_bsb <= 0:
        raise ValueError("A default time grid needs eta > 0 and omega_bsb > 0")
    span = 3.0 * TWO_PI / (eta * omega_bsb)
    return tuple(float(t) for t in np.linspace(0.0, span, points))


@dataclass(frozen=True)
class ThermometryScan:
    """Probe settings and the times at which p_↓ is measured (μs)."""

    omega_bsb: float
    eta: float
    times: Tuple[float, ...]
    shots_per_point: int = DEFAULT_SHOTS
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if self.omega_bsb <= 0:
            raise ValueError(f"omega_bsb must be > 0, got {self.omega_bsb}")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        if len(self.times) < 2:
            raise ValueError("A scan needs at least two times")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("Scan times must be strictly increasing")
        if self.times[0] < 0:
            raise ValueError("Scan times must be >= 0")
        if self.shots_per_point < 1:
            raise ValueError(
                f"shots_per_point must be >= 1, got {self.shots_per_point}"
            )

    @classmethod
    def with_default_times(
        cls,
        eta: float,
        omega_bsb: float = DEFAULT_OMEGA_BSB,
        shots_per_point: int = DEFAULT_SHOTS,
        seed: int = 0,
        points: int = DEFAULT_POINTS,
    ) -> "ThermometryScan":
        return cls(
            omega_bsb=omega_bsb,
            eta=eta,
            times=default_times(omega_bsb, eta, points),
            shots_per_point=shots_per_point,
            seed=seed,
        )

    @property
    def time_array(self) -> NDArray[np.float64]:
        return np.asarray(self.times, dtype=float)


@dataclass(frozen=True)
class SidebandSignal:
    """Measured (or ideal) p_↓ at the scan times; ``shots`` is None when noiseless."""

    times: NDArray[np.float64]
    p_down: NDArray[np.float64]
    shots: Optional[NDArray[np.int64]] = None

    @property
    def noiseless(self) -> bool:
        return self.shots is None

    def to_csv(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as file:
            writer = csv.writer(file)
            writer.writerow(["time_us", "p_down", "shots"])
            for k, (time, value) in enumerate(zip(self.times, self.p_down)):
                shots = "" if self.shots is None else str(int(self.shots[k]))
                writer.writerow([repr(float(time)), repr(float(value)), shots])


def read_signal_csv(path: Path) -> SidebandSignal:
    """Load a scan written by ``SidebandSignal.to_csv``.

    Raises:
        FileNotFoundError: If the file doesn't exist
        ValueError: If the header or a row is malformed
    """
    with open(path, "r", encoding="utf-8") as file:
        reader = csv.reader(file)
        header = next(reader, None)
        if header != ["time_us", "p_down", "shots"]:
            raise ValueError(f"Unexpected scan header: {header}")
        times: List[float] = []
        values: List[float] = []
        shots: List[str] = []
        for line_num, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValueError(f"Malformed scan row on line {line_num}: {row}")
            times.append(float(row[0]))
            values.append(float(row[1]))
            shots.append(row[2].strip())

    counts = None
    if any(shots):
        counts = np.array([int(s) for s in shots], dtype=np.int64)
    return SidebandSignal(times=np.array(times), p_down=np.array(values), shots=counts)


def bsb_rabi_frequency(
    omega_bsb: float, eta: float, n: int, lamb_dicke: bool = False
) -> float:
    """Ω_{n+1,n} = Ω^bsb |⟨n+1| exp(iη(a + a†)) |n⟩|, or Ω^bsb η √(n+1)."""
    if n < 0:
        raise ValueError(f"Fock level must be >= 0, got {n}")
    if lamb_dicke:
        return omega_bsb * eta * math.sqrt(n + 1)
    return omega_bsb * abs(displacement_element(n + 1, n, eta))


def bsb_rabi_frequencies(
    omega_bsb: float, eta: float, levels: int, lamb_dicke: bool = False
) -> NDArray[np.float64]:
    return np.array(
        [bsb_rabi_frequency(omega_bsb, eta, n, lamb_dicke) for n in range(levels)]
    )


def sideband_design(
    scan: ThermometryScan, levels: int, lamb_dicke: bool = False
) -> NDArray[np.float64]:
    """Matrix of cos²(Ω_{n+1,n} t_i) with one column per Fock level."""
    rates = bsb_rabi_frequencies(scan.omega_bsb, scan.eta, levels, lamb_dicke)
    return np.cos(np.outer(scan.time_array, rates)) ** 2


def thermal_distribution(n_bar: float, levels: int) -> NDArray[np.float64]:
    """Thermal p_n = (n̄/(n̄+1))^n / (n̄+1) for n < levels, not renormalised."""
    if n_bar < 0:
        raise ValueError(f"n_bar must be >= 0, got {n_bar}")
    ratio = n_bar / (n_bar + 1.0)
    return (1.0 / (n_bar + 1.0)) * ratio ** np.arange(levels)


def ideal_signal(
    p_n: Sequence[float], scan: ThermometryScan, lamb_dicke: bool = False
) -> NDArray[np.float64]:
    """Noise-free p_↓(t); missing mass is spread over the next ten levels."""
    populations = np.asarray(p_n, dtype=float)
    if np.any(populations < 0):
        raise ValueError("Populations must be >= 0")
    total = float(np.sum(populations))
    if total > 1.0 + SUM_TOLERANCE:
        raise ValueError(f"Populations sum to {total:.6f} > 1")

    remainder = max(1.0 - total, 0.0)
    if remainder > 0:
        spread = np.full(REMAINDER_LEVELS, remainder / REMAINDER_LEVELS)
        populations = np.concatenate([populations, spread])
    design = sideband_design(scan, populations.size, lamb_dicke)
    return np.clip(design @ populations, 0.0, 1.0)


def synthesize_signal(
    p_n: Sequence[float],
    scan: ThermometryScan,
    noiseless: bool = False,
    lamb_dicke: bool = False,
) -> SidebandSignal:
    """Ideal readout followed by binomial projection noise drawn from ``scan.seed``."""
    ideal = ideal_signal(p_n, scan, lamb_dicke)
    times = scan.time_array
    if noiseless:
        return SidebandSignal(times=times, p_down=ideal)

    rng = np.random.default_rng(scan.seed)
    counts = rng.binomial(scan.shots_per_point, ideal)
    shots = np.full(times.size, scan.shots_per_point, dtype=np.int64)
    p_down = counts / scan.shots_per_point
    return SidebandSignal(times=times, p_down=p_down, shots=shots)


@dataclass(frozen=True)
class TailPolicy:
    """Exponential tail p_{n>n0} = A exp(−B(n − n0)) + C replacing free high levels."""

    n0: int = 4
    b_min: float = 0.05
    b_max: float = 3.0
    grid_points: int = 30

    def __post_init__(self) -> None:
        if self.n0 < 0:
            raise ValueError(f"Tail start n0 must be >= 0, got {self.n0}")
        if not 0 < self.b_min < self.b_max:
            raise ValueError("Tail decay bounds must satisfy 0 < b_min < b_max")
        if self.grid_points < 3:
            raise ValueError("Tail decay grid needs at least three points")


@dataclass(frozen=True)
class FitPolicy:
    """Cutoff selection and model options of a population fit.

    Attributes:
        occupation_floor: Minimum total fitted occupation Σ p_n
        max_cutoff: Ceiling for n_max; the reference fit runs here
        min_cutoff: Smallest n_max considered by the selection
        force_n_max: Fit at exactly this cutoff, bypassing the selection
        tail: Optional exponential tail model
        lamb_dicke: Use η√(n+1) sideband rates instead of the exact ones
    """

    occupation_floor: float = 0.95
    max_cutoff: int = 20
    min_cutoff: int = 1
    force_n_max: Optional[int] = None
    tail: Optional[TailPolicy] = None
    lamb_dicke: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.occupation_floor <= 1.0:
            raise ValueError(
                f"occupation_floor must lie in (0, 1], got {self.occupation_floor}"
            )
        if not 0 <= self.min_cutoff <= self.max_cutoff:
            raise ValueError("Cutoffs must satisfy 0 <= min_cutoff <= max_cutoff")
        if self.force_n_max is not None and self.force_n_max < 0:
            raise ValueError(f"force_n_max must be >= 0, got {self.force_n_max}")


@dataclass(frozen=True)
class TailParameters:
    A: float
    B: float
    C: float
    n0: int


@dataclass
class PhononFit:
    """Fitted Fock populations of the battery."""

    p_n: NDArray[np.float64]
    sigma_p_n: NDArray[np.float64]
    n_max: int
    n_bar: float
    n_bar_error: float
    total_occupation: float
    tail: Optional[TailParameters] = None
    residual_norm: float = 0.0
    iterations: int = 0
    forced: bool = False
    previous_occupation: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p_n": [float(p) for p in self.p_n],
            "sigma_p_n": [float(s) for s in self.sigma_p_n],
            "n_max": self.n_max,
            "n_bar": self.n_bar,
            "n_bar_error": self.n_bar_error,
            "total_occupation": self.total_occupation,
            "tail_model": None if self.tail is None else asdict(self.tail),
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "forced": self.forced,
            "previous_occupation": self.previous_occupation,
        }

    def to_json(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as file:
            json.dump(self.to_dict(), file, indent=2, sort_keys=True)
            file.write("\n")


@dataclass
class _Solution:
    theta: NDArray[np.float64]
    jacobian: NDArray[np.float64]
    populations: NDArray[np.float64]
    mapping: NDArray[np.float64]
    residual: NDArray[np.float64]
    solves: int
    tail: Optional[TailParameters] = None


def _solve_constrained(
    design: NDArray[np.float64],
    target: NDArray[np.float64],
    weights: NDArray[np.float64],
) -> NDArray[np.float64]:
    """min ||design x − target|| subject to x >= 0 and weights · x <= 1."""
    x, _ = nnls(design, target)
    if float(weights @ x) <= 1.0 + SUM_TOLERANCE:
        return np.asarray(x)

    start = x / float(weights @ x)

    def objective(theta: NDArray[np.float64]) -> Tuple[float, NDArray[np.float64]]:
        residual = design @ theta - target
        return 0.5 * float(residual @ residual), design.T @ residual

    result = minimize(
        objective,
        start,
        jac=True,
        method="SLSQP",
        bounds=[(0.0, None)] * x.size,
        constraints=[{"type": "ineq", "fun": lambda th: 1.0 - weights @ th}],
        options={"maxiter": 500, "ftol": 1e-12},
    )
    # status 8 (no descent direction) is reached at the optimum as well
    if result.status == 9 or not np.all(np.isfinite(result.x)):
        raise FitConvergenceError(f"Simplex-constrained fit failed: {result.message}")
    theta = np.clip(result.x, 0.0, None)
    total = float(weights @ theta)
    if total > 1.0:
        theta = theta / total
    return theta


def _plain_solution(
    design: NDArray[np.float64], target: NDArray[np.float64]
) -> _Solution:
    levels = design.shape[1]
    theta = _solve_constrained(design, target, np.ones(levels))
    return _Solution(
        theta=theta,
        jacobian=design,
        populations=theta,
        mapping=np.eye(levels),
        residual=design @ theta - target,
        solves=1,
    )


def _tail_columns(
    design: NDArray[np.float64], n0: int, decay: float
) -> Tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    offsets = np.arange(1, design.shape[1] - n0)
    profile = np.exp(-decay * offsets)
    tail = design[:, n0 + 1 :]
    return tail @ profile, tail.sum(axis=1), -(tail @ (offsets * profile))


def _tail_solution(
    design: NDArray[np.float64],
    target: NDArray[np.float64],
    policy: TailPolicy,
) -> _Solution:
    levels = design.shape[1]
    n0 = policy.n0
    head = design[:, : n0 + 1]
    offsets = np.arange(1, levels - n0)
    solves = 0

    def linear_fit(decay: float) -> Tuple[NDArray[np.float64], float]:
        nonlocal solves
        solves += 1
        profile = np.exp(-decay * offsets)
        weights = np.concatenate([np.ones(n0 + 1), [profile.sum(), offsets.size]])
        col_a, col_c, _ = _tail_columns(design, n0, decay)
        reduced = np.column_stack([head, col_a, col_c])
        theta = _solve_constrained(reduced, target, weights)
        residual = reduced @ theta - target
        return theta, float(residual @ residual)

    grid = np.geomspace(policy.b_min, policy.b_max, policy.grid_points)
    costs = [linear_fit(b)[1] for b in grid]
    best = int(np.argmin(costs))
    bounds = (grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)])
    refined = minimize_scalar(
        lambda b: linear_fit(b)[1], bounds=bounds, method="bounded",
        options={"xatol": 1e-8},
    )
    decay = float(refined.x) if refined.fun <= costs[best] else float(grid[best])
    logger.debug(f"Tail decay B = {decay:.4f} after {solves} linear solves")

    theta, _ = linear_fit(decay)
    amplitude, offset = float(theta[n0 + 1]), float(theta[n0 + 2])
    col_a, col_c, col_b = _tail_columns(design, n0, decay)

    profile = np.exp(-decay * offsets)
    mapping = np.zeros((levels, n0 + 4))
    mapping[: n0 + 1, : n0 + 1] = np.eye(n0 + 1)
    mapping[n0 + 1 :, n0 + 1] = profile
    mapping[n0 + 1 :, n0 + 2] = 1.0
    mapping[n0 + 1 :, n0 + 3] = -offsets * amplitude * profile

    full_theta = np.concatenate([theta, [decay]])
    jacobian = np.column_stack([head, col_a, col_c, amplitude * col_b])
    populations = np.concatenate(
        [theta[: n0 + 1], amplitude * profile + offset]
    )
    return _Solution(
        theta=full_theta,
        jacobian=jacobian,
        populations=populations,
        mapping=mapping,
        residual=jacobian[:, :-1] @ theta - target,
        solves=solves,
        tail=TailParameters(A=amplitude, B=decay, C=offset, n0=n0),
    )


def _linearised_errors(solution: _Solution) -> NDArray[np.float64]:
    """Covariance of the populations from s² (JᵀJ)⁻¹ over every fit parameter.

    Parameters held at a bound still count, so weakly resolved high levels
    widen the n̄ error the way an unconstrained curve fit reports it.
    """
    jacobian = solution.jacobian
    samples, parameters = jacobian.shape
    dof = max(samples - parameters, 1)
    variance = float(solution.residual @ solution.residual) / dof
    parameter_cov = variance * np.linalg.pinv(jacobian.T @ jacobian)
    return solution.mapping @ parameter_cov @ solution.mapping.T


def _check_sampling(scan: ThermometryScan, n_max: int, lamb_dicke: bool) -> None:
    if len(scan.times) < 2 * (n_max + 1):
        raise ValueError(
            f"{len(scan.times)} samples cannot resolve n_max = {n_max}; "
            f"need at least {2 * (n_max + 1)}"
        )
    lowest = bsb_rabi_frequency(scan.omega_bsb, scan.eta, 0, lamb_dicke)
    if lowest <= 0:
        raise ValueError("The probe does not couple to the battery (eta = 0)")
    if scan.times[-1] - scan.times[0] < TWO_PI / lowest:
        raise ValueError("Scan must span at least one |0> -> |1> sideband period")


def _fit_at(
    signal: SidebandSignal,
    scan: ThermometryScan,
    n_max: int,
    policy: FitPolicy,
) -> PhononFit:
    _check_sampling(scan, n_max, policy.lamb_dicke)
    design = sideband_design(scan, n_max + 1, policy.lamb_dicke)
    target = np.asarray(signal.p_down, dtype=float)
    if design.shape[0] != target.size:
        raise ValueError(
            f"Signal has {target.size} points but the scan has {design.shape[0]} times"
        )

    if policy.tail is not None and n_max > policy.tail.n0 + 1:
        solution = _tail_solution(design, target, policy.tail)
    else:
        solution = _plain_solution(design, target)

    populations = np.clip(solution.populations, 0.0, None)
    covariance = _linearised_errors(solution)
    levels = np.arange(n_max + 1)
    sigma = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    n_bar_error = math.sqrt(max(float(levels @ covariance @ levels), 0.0))

    return PhononFit(
        p_n=populations,
        sigma_p_n=sigma,
        n_max=n_max,
        n_bar=float(levels @ populations),
        n_bar_error=n_bar_error,
        total_occupation=float(populations.sum()),
        tail=solution.tail,
        residual_norm=float(np.linalg.norm(solution.residual)),
        iterations=solution.solves,
    )


def _select_cutoff(
    signal: SidebandSignal, scan: ThermometryScan, policy: FitPolicy
) -> PhononFit:
    floor = policy.occupation_floor
    reference = _fit_at(signal, scan, policy.max_cutoff, FitPolicy(
        max_cutoff=policy.max_cutoff, lamb_dicke=policy.lamb_dicke
    ))
    cumulative = np.cumsum(reference.p_n)
    reached = np.nonzero(cumulative >= floor)[0]
    if reached.size == 0:
        raise OccupationFloorError(
            f"Total occupation {cumulative[-1]:.4f} stays below {floor} "
            f"up to the cutoff ceiling {policy.max_cutoff}"
        )

    n_max = max(int(reached[0]), policy.min_cutoff)
    previous = float(cumulative[n_max - 1]) if n_max >= 1 else None
    while True:
        fit = _fit_at(signal, scan, n_max, policy)
        logger.debug(f"Cutoff {n_max}: occupation {fit.total_occupation:.4f}")
        if fit.total_occupation >= floor:
            break
        if n_max >= policy.max_cutoff:
            raise OccupationFloorError(
                f"Total occupation {fit.total_occupation:.4f} stays below {floor} "
                f"up to the cutoff ceiling {policy.max_cutoff}"
            )
        previous = fit.total_occupation
        n_max += 1

    if n_max == policy.max_cutoff:
        logger.warning(f"Occupation floor {floor} met only at the ceiling {n_max}")
    fit.previous_occupation = previous
    fit.iterations += reference.iterations
    return fit


def fit_populations(
    signal: SidebandSignal, scan: ThermometryScan, policy: Optional[FitPolicy] = None
) -> PhononFit:
    """Fit Fock populations with p_n >= 0 and Σ p_n <= 1 to a sideband scan.

    Without a forced cutoff, n_max is the lowest level whose cumulative
    occupation reaches the floor.

    Raises:
        ValueError: If the scan cannot resolve the requested cutoff
        FitConvergenceError: If the constrained solver fails
        OccupationFloorError: If no cutoff up to the ceiling reaches the floor
    """
    policy = policy or FitPolicy()
    try:
        if policy.force_n_max is not None:
            fit = _fit_at(signal, scan, policy.force_n_max, policy)
            fit.forced = True
        else:
            fit = _select_cutoff(signal, scan, policy)
    except FitError as e:
        logger.error(f"Population fit failed: {e}")
        raise

    logger.debug(
        f"Fitted n = {fit.n_bar:.4f} +/- {fit.n_bar_error:.4f} at n_max = {fit.n_max}"
    )
    return fit


@dataclass
class BootstrapResult:
    sigma_p_n: NDArray[np.float64]
    sigma_n_bar: float
    resamples: int
    failures: int


def _resample(
    signal: SidebandSignal,
    scan: ThermometryScan,
    policy: FitPolicy,
    seed: np.random.SeedSequence,
) -> Optional[PhononFit]:
    values = np.asarray(signal.p_down, dtype=float)
    if signal.shots is not None:
        rng = np.random.default_rng(seed)
        scale = np.sqrt(np.clip(values * (1.0 - values), 0.0, None) / signal.shots)
        values = np.clip(values + rng.normal(0.0, 1.0, values.size) * scale, 0.0, 1.0)
    perturbed = SidebandSignal(times=signal.times, p_down=values, shots=signal.shots)
    try:
        return fit_populations(perturbed, scan, policy)
    except FitError:
        return None


def bootstrap_errors(
    signal: SidebandSignal,
    scan: ThermometryScan,
    fit: PhononFit,
    resamples: int = 200,
    jobs: Optional[int] = None,
    policy: Optional[FitPolicy] = None,
) -> BootstrapResult:
    """Standard deviations of refits to normally resampled data at the fit's cutoff.

    Resample k draws from the k-th child of ``SeedSequence(scan.seed)``.

    Raises:
        FitConvergenceError: If every resample fails
    """
    if resamples < 2:
        raise ValueError(f"resamples must be >= 2, got {resamples}")
    base = policy or FitPolicy(
        tail=None if fit.tail is None else TailPolicy(n0=fit.tail.n0)
    )
    policy = replace(
        base, force_n_max=fit.n_max, max_cutoff=max(fit.n_max, base.min_cutoff)
    )
    children = np.random.SeedSequence(scan.seed).spawn(resamples)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(
            pool.map(lambda child: _resample(signal, scan, policy, child), children)
        )

    fits = [result for result in results if result is not None]
    failures = resamples - len(fits)
    if not fits:
        raise FitConvergenceError(f"All {resamples} bootstrap refits failed")
    if failures:
        logger.warning(f"{failures} of {resamples} bootstrap refits failed")

    populations = np.array([f.p_n for f in fits])
    n_bars = np.array([f.n_bar for f in fits])
    ddof = 1 if len(fits) > 1 else 0
    return BootstrapResult(
        sigma_p_n=populations.std(axis=0, ddof=ddof),
        sigma_n_bar=float(n_bars.std(ddof=ddof)),
        resamples=resamples,
        failures=failures,
    )
