"""Tests for the figures of merit."""

import pytest
import sys
from pathlib import Path

import numpy as np

# Add src to path for imports
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

from analysis import (  # noqa: E402 # type: ignore
    REPORTED_COST_RATIO,
    battery_energy,
    classical_line,
    compare_variants,
    cost_ratios,
    enhancement_ratio,
    find_trace,
    heating_only_n_bar,
    power,
    run_metrics,
    sigma_y_summary,
)
from drive import (  # noqa: E402 # type: ignore
    DriveProfile,
    EngineParams,
    cd_cost_closed_form,
)
from engine import CycleRecord, StrokeTrace  # noqa: E402 # type: ignore
from errors import MissingTraceError  # noqa: E402 # type: ignore


class TestPower:
    """Test cases for power and heating subtraction."""

    def test_power(self):
        assert power(2.38, 10, 119.0) == pytest.approx(2.38 / 1190.0)

    def test_invariant_under_rescaling(self):
        assert power(1.0, 28, 59.5) == pytest.approx(power(1.0, 14, 119.0))

    def test_heating_only_drift(self):
        assert heating_only_n_bar(240.0, 10, 119.0) == pytest.approx(0.2856)

    def test_subtracted_power_can_be_negative(self):
        value = power(0.1, 10, 119.0, heating_rate=240.0, subtract=True)

        assert value == pytest.approx((0.1 - 0.2856) / 1190.0)
        assert value < 0

    def test_needs_a_cycle(self):
        with pytest.raises(ValueError, match="at least one cycle"):
            power(1.0, 0, 119.0)

    def test_needs_positive_tau(self):
        with pytest.raises(ValueError, match="tau must be > 0"):
            power(1.0, 3, 0.0)

    def test_battery_energy(self):
        assert battery_energy(2.0, 0.5) == 1.0


class TestEnhancement:
    """Test cases for the STA enhancement ratio."""

    def test_ratio(self):
        assert enhancement_ratio(1.5, 1.0) == pytest.approx(0.5)
        assert enhancement_ratio(0.5, 1.0) == pytest.approx(-0.5)

    def test_swapping_runs_inverts_ratio(self):
        forward = enhancement_ratio(0.37, 0.21)
        backward = enhancement_ratio(0.21, 0.37)

        assert backward == pytest.approx(-forward / (1 + forward))

    def test_zero_baseline(self):
        with pytest.raises(ZeroDivisionError):
            enhancement_ratio(1.0, 0.0)


class TestCosts:
    """Test cases for the CD drive cost."""

    def test_amplitude_ratio_matches_closed_form(self):
        params = EngineParams.trapped_ion()
        costs = cost_ratios(params, params.profile)

        assert costs.amplitude == pytest.approx(
            cd_cost_closed_form(params, params.profile), rel=1e-6
        )
        assert costs.closed_form == pytest.approx(7.42e-3, abs=1e-5)
        assert costs.intensity > 0
        assert costs.reported == REPORTED_COST_RATIO

    def test_no_drive_costs_nothing(self):
        params = EngineParams.trapped_ion()
        costs = cost_ratios(params, DriveProfile(v0=0.0, tau=119.0))

        assert costs.amplitude == costs.intensity == costs.closed_form == 0.0


class TestTraces:
    """Test cases for ⟨σy⟩ summaries."""

    def setup_method(self):
        self.trace = StrokeTrace(
            cycle=2,
            stroke="compression",
            times=np.linspace(0.0, 1.0, 5),
            sigma_y=np.array([0.0, 0.2, -0.6, 0.1, 0.3]),
        )

    def test_summary(self):
        summary = sigma_y_summary(self.trace)

        assert summary.start_value == 0.0
        assert summary.end_of_stroke_value == pytest.approx(0.3)
        assert summary.max_abs == pytest.approx(0.6)
        assert summary.cycle == 2

    def test_unrecorded_stroke(self):
        with pytest.raises(MissingTraceError):
            sigma_y_summary(None)

    def test_find_trace(self):
        assert find_trace([self.trace], 2, "compression") is self.trace

        with pytest.raises(MissingTraceError, match="No recorded expansion trace"):
            find_trace([self.trace], 2, "expansion")


class TestMetrics:
    """Test cases for per-run and paired metrics."""

    def setup_method(self):
        self.params = EngineParams.trapped_ion()
        self.na = CycleRecord(n_bar=[0.1, 0.15, 0.2])
        self.sta = CycleRecord(n_bar=[0.1, 0.2, 0.3])

    def test_classical_line(self):
        assert classical_line(0.1, [1, 2, 4]) == pytest.approx([0.1, 0.2, 0.4])

    def test_run_metrics(self):
        metrics = run_metrics("na", self.na, self.params, heated=False)

        assert metrics.n_cycles == 3
        assert metrics.power == pytest.approx(0.2 / (3 * 119.0))
        assert metrics.power_heating_subtracted == pytest.approx(metrics.power)
        assert metrics.work == pytest.approx(self.params.omega * 0.2)
        assert metrics.classical_line == pytest.approx([0.1, 0.2, 0.3])

    def test_heated_run_subtracts_drift(self):
        metrics = run_metrics("na", self.na, self.params, heated=True)
        drift = heating_only_n_bar(self.params.heating_rate, 3, 119.0)

        assert metrics.power_heating_subtracted == pytest.approx(
            (0.2 - drift) / (3 * 119.0)
        )

    def test_empty_run(self):
        metrics = run_metrics("na", CycleRecord(), self.params, heated=False)

        assert metrics.power == 0.0
        assert metrics.classical_line == []

    def test_compare_variants(self):
        metrics = compare_variants(self.na, self.sta, self.params)

        assert metrics["na"].enhancement_ratio is None
        assert metrics["sta"].enhancement_ratio == pytest.approx(0.5)
        assert metrics["sta"].power_enhancement_ratio == pytest.approx(0.5)
        assert metrics["sta"].cost_ratio_amplitude > 0
        assert metrics["na"].cost_ratio_amplitude == 0.0

    def test_cold_baseline_has_no_ratio(self):
        cold = CycleRecord(n_bar=[0.0, 0.0])
        metrics = compare_variants(cold, self.sta, self.params)

        assert metrics["sta"].enhancement_ratio is None

    def test_record_is_serializable(self):
        record = run_metrics("sta", self.sta, self.params, heated=False).to_record()

        assert record["variant"] == "sta"
        assert record["n_bar_final"] == 0.3
