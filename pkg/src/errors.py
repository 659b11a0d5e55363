"""Exception hierarchy and the exit codes the CLI maps them to."""

from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class EngineSimError(Exception):
    """Base class for every error raised by the simulator."""

    kind = "error"

    def to_record(self) -> Dict[str, Any]:
        """Machine-readable description printed by the CLI on failure."""
        return {"error": self.kind, "message": str(self)}


class ConfigError(EngineSimError, ValueError):
    """Invalid or unparseable run configuration."""

    kind = "config"

    def __init__(
        self, message: str, field: Optional[str] = None, line: Optional[int] = None
    ):
        super().__init__(message)
        self.field = field
        self.line = line

    def to_record(self) -> Dict[str, Any]:
        record = super().to_record()
        record["field"] = self.field
        record["line"] = self.line
        return record


class NumericalError(EngineSimError, RuntimeError):
    """A simulation or fit could not be completed within its tolerances."""

    kind = "numerical"


class LeakageError(NumericalError):
    """Population reached the top guard level of the truncated Fock space."""

    kind = "leakage"

    def __init__(self, population: float, tolerance: float):
        super().__init__(
            f"Top guard level population {population:.3e} exceeds "
            f"leakage tolerance {tolerance:.1e}; increase n_max or guard_levels"
        )
        self.population = population
        self.tolerance = tolerance

    def __reduce__(self):
        # Worker processes send exceptions back pickled; rebuild from fields
        return self.__class__, (self.population, self.tolerance)


class NonHermitianError(NumericalError):
    """A Hamiltonian sample is not Hermitian."""

    kind = "non_hermitian"


class EmptyBranchError(NumericalError):
    """A projective reset selected an outcome of vanishing probability."""

    kind = "empty_branch"


class FitError(NumericalError):
    """Phonon population fit failed."""

    kind = "fit"


class FitConvergenceError(FitError):
    kind = "fit_convergence"


class OccupationFloorError(FitError):
    """No cutoff up to the ceiling reaches the requested total occupation."""

    kind = "occupation_floor"


class MissingTraceError(EngineSimError, LookupError):
    """A summary was requested for a stroke that was not recorded."""

    kind = "missing_trace"
