"""Tests for the exception hierarchy."""

import pickle
import pytest
import sys
from pathlib import Path

# Add src to path for imports
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

from errors import (  # noqa: E402 # type: ignore
    EXIT_NUMERICAL,
    ConfigError,
    EmptyBranchError,
    FitConvergenceError,
    FitError,
    LeakageError,
    MissingTraceError,
    NonHermitianError,
    NumericalError,
    OccupationFloorError,
)


class TestPickling:
    """Errors raised in worker processes must survive the trip back."""

    @pytest.mark.parametrize(
        "error",
        [
            NumericalError("step failed"),
            LeakageError(1.5e-4, 1e-4),
            NonHermitianError("H is not Hermitian"),
            EmptyBranchError("outcome probability 0"),
            FitError("fit failed"),
            FitConvergenceError("no refit converged"),
            OccupationFloorError("floor unreachable"),
            MissingTraceError("no trace"),
        ],
    )
    def test_round_trip(self, error):
        restored = pickle.loads(pickle.dumps(error))

        assert type(restored) is type(error)
        assert str(restored) == str(error)
        assert restored.to_record() == error.to_record()

    def test_leakage_keeps_fields(self):
        restored = pickle.loads(pickle.dumps(LeakageError(2.0e-3, 1e-4)))

        assert restored.population == 2.0e-3
        assert restored.tolerance == 1e-4
        assert restored.kind == "leakage"

    def test_config_error_keeps_location(self):
        restored = pickle.loads(
            pickle.dumps(ConfigError("bad", field="engine.tau_us", line=3))
        )

        assert restored.to_record() == {
            "error": "config",
            "message": "bad",
            "field": "engine.tau_us",
            "line": 3,
        }


class TestHierarchy:
    def test_numerical_errors_share_exit_code_family(self):
        for cls in (LeakageError, NonHermitianError, EmptyBranchError, FitError):
            assert issubclass(cls, NumericalError)
        assert EXIT_NUMERICAL == 3
