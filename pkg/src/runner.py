"""Execution of a resolved RunConfig and emission of its data files."""

import csv
import json
import multiprocessing
import subprocess
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from analysis import (  # type: ignore
    battery_energy,
    classical_line,
    compare_variants,
    cost_ratios,
    power,
    sigma_y_summary,
)
from config import RunConfig  # type: ignore
from drive import (  # type: ignore
    EngineParams,
    lab_frame_hamiltonian,
    omega_cd_trace,
    three_color_tones,
)
from dynamics import propagate  # type: ignore
from engine import (  # type: ignore
    CycleOptions,
    CycleRecord,
    initial_state,
    run_cycles,
    stroke_builder,
)
from hilbert import FockSpace, state_fidelity  # type: ignore
from logging_config import get_logger, log_duration  # type: ignore
from thermometry import (  # type: ignore
    ThermometryScan,
    bootstrap_errors,
    fit_populations,
    synthesize_signal,
)

VERSION = "0.1.0"

SCHEMA: Dict[str, Any] = {
    "units": {
        "frequencies": "angular, rad/us; a config value f given as <name>_2pi_MHz "
        "means 2*pi*f rad/us",
        "times": "us",
        "n_bar": "phonons",
        "work": "omega * phonons (hbar = 1), rad/us",
        "power": "phonons/us",
        "heating_rate": "phonons/s",
    },
    "files": {
        "n_bar_<variant>.csv": {
            "N": "cycle number",
            "n_bar": "mean phonon number after N cycles",
            "work": "omega * n_bar",
            "power": "n_bar / (N tau)",
            "classical_line": "N * n_bar(1)",
        },
        "power_<variant>.csv": {
            "tau_us": "cycle time",
            "N": "cycle number",
            "n_bar": "mean phonon number after N cycles",
            "power": "n_bar / (N tau)",
            "power_heating_subtracted": "(n_bar - heating_rate N tau) / (N tau)",
        },
        "sigma_y_<variant>.csv": {
            "cycle": "cycle index from 0",
            "stroke": "expansion or compression",
            "time_us": "global simulation time",
            "sigma_y": "<sigma_y> of the spin",
        },
        "cd_ratio.csv": {
            "time_us": "time inside the cycle",
            "stroke": "expansion or compression",
            "v_rad_per_us": "drive field v",
            "omega_cd_over_omega": "counterdiabatic to carrier amplitude ratio",
        },
        "scan.csv": {
            "time_us": "probe duration",
            "p_down": "estimated spin-down probability",
            "shots": "repetitions per point",
        },
        "populations_<fit>.csv": {
            "n": "Fock level",
            "p_n": "fitted population",
            "sigma_linearised": "covariance error",
            "sigma_bootstrap": "bootstrap standard deviation",
            "p_n_simulated": "population of the simulated battery",
        },
        "rwa_fidelity.csv": {
            "time_us": "time into the expansion stroke",
            "fidelity": "lab-frame versus interaction-frame state fidelity",
        },
        "metrics.jsonl": "one flat JSON record per sweep point or fit",
    },
}

logger = get_logger(__name__)


def describe_version() -> str:
    """git describe of the working tree, or the package version outside git."""
    try:
        completed = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            capture_output=True,
            text=True,
            cwd=Path(__file__).resolve().parent,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return VERSION
    described = completed.stdout.strip()
    if completed.returncode != 0 or not described:
        return VERSION
    return f"{VERSION}+{described}"


@dataclass(frozen=True)
class SimulationTask:
    index: int
    variant: str
    params: EngineParams
    fock: FockSpace
    options: CycleOptions
    n_cycles: int


def variant_options(base: CycleOptions, variant: str) -> CycleOptions:
    return replace(
        base,
        with_cd=variant.endswith("sta"),
        classical_baseline=variant.startswith("classical"),
    )


def simulate(task: SimulationTask) -> Tuple[int, str, CycleRecord]:
    """Worker entry point; drops the final state to keep results small."""
    record = run_cycles(
        initial_state(task.fock), task.n_cycles, task.params, task.options
    )
    record.final_state = None
    return task.index, task.variant, record


def execute(
    tasks: Sequence[SimulationTask], jobs: int
) -> Dict[Tuple[int, str], CycleRecord]:
    """Run tasks, in a process pool when jobs > 1, keyed by (index, variant)."""
    logger.debug(f"Dispatching {len(tasks)} simulations on {jobs} worker(s)")
    if jobs > 1 and len(tasks) > 1:
        with multiprocessing.Pool(min(jobs, len(tasks))) as pool:
            results = pool.map(simulate, tasks)
    else:
        results = [simulate(task) for task in tasks]
    return {(index, variant): record for index, variant, record in results}


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(value) for value in row])


def write_json(path: Path, payload: Any) -> None:
    with open(path, "w", encoding="utf-8") as file:
        json.dump(payload, file, indent=2, sort_keys=True)
        file.write("\n")


def write_jsonl(path: Path, records: Iterable[Dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as file:
        for record in records:
            file.write(json.dumps(record, sort_keys=True) + "\n")


def _plain(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


class ExperimentRunner:
    """Runs one configured pipeline and writes its data files."""

    logger = get_logger(__name__)

    def __init__(self, config: RunConfig):
        self.config = config
        self.output = Path(config.output)
        self.written: List[str] = []
        self.logger.debug(f"Initialized runner for pipeline {config.pipeline}")

    def run(self) -> List[Path]:
        """Execute the pipeline and emit data, schema and manifest.

        Returns:
            Paths of the data files written

        Raises:
            NumericalError: If a simulation or fit breaks its tolerances
            OSError: If the output directory is not writable
        """
        started = datetime.now(timezone.utc).isoformat()
        self.output.mkdir(parents=True, exist_ok=True)
        pipelines = {
            "cycles": self._run_cycles,
            "cost-profile": self._run_cost_profile,
            "thermometry": self._run_thermometry,
            "rwa": self._run_rwa,
        }
        try:
            with log_duration(self.logger, f"Pipeline {self.config.pipeline}"):
                records = pipelines[self.config.pipeline]()
        except Exception as e:
            self.logger.error(f"Run failed: {e}")
            raise

        if self._emit_json:
            self._write_jsonl("metrics.jsonl", records)
        write_json(self.output / "schema.json", SCHEMA)
        write_json(
            self.output / "manifest.json",
            {
                "version": describe_version(),
                "preset": self.config.preset,
                "seed": self.config.seed,
                "config_hash": self.config.config_hash(),
                "config": self.config.document,
                "files": sorted(self.written),
            },
        )
        write_json(
            self.output / "run_info.json",
            {"started": started, "finished": datetime.now(timezone.utc).isoformat()},
        )
        return [self.output / name for name in sorted(self.written)]

    @property
    def _emit_csv(self) -> bool:
        return self.config.emit in ("csv", "both")

    @property
    def _emit_json(self) -> bool:
        return self.config.emit in ("json", "both")

    def _write_csv(
        self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> None:
        if self._emit_csv:
            write_csv(self.output / name, header, rows)
            self.written.append(name)

    def _write_jsonl(self, name: str, records: Iterable[Dict[str, Any]]) -> None:
        write_jsonl(self.output / name, records)
        self.written.append(name)

    def _base_record(self, index: int) -> Dict[str, Any]:
        return {
            "preset": self.config.preset,
            "seed": self.config.seed,
            "sweep_index": index,
        }

    def _run_cycles(self) -> List[Dict[str, Any]]:
        config = self.config
        sweep = config.sweep
        if sweep.axis == "tau":
            points = [
                (i, replace(config.params, tau=tau))
                for i, tau in enumerate(sweep.values)
            ]
            n_cycles = sweep.n_cycles
        else:
            points = [(0, config.params)]
            n_cycles = sweep.max_cycles

        tasks = [
            SimulationTask(
                index=index,
                variant=variant,
                params=params,
                fock=config.fock,
                options=variant_options(config.options, variant),
                n_cycles=n_cycles,
            )
            for index, params in points
            for variant in config.variants
        ]
        results = execute(tasks, config.jobs)

        if sweep.axis == "tau":
            return self._emit_tau_sweep(points, results, n_cycles)
        return self._emit_cycle_sweep(results)

    def _emit_cycle_sweep(
        self, results: Dict[Tuple[int, str], CycleRecord]
    ) -> List[Dict[str, Any]]:
        config = self.config
        params = config.params
        heating = config.params.heating_rate if config.options.heating else 0.0
        if config.sweep.axis == "N":
            cycle_numbers = [int(n) for n in config.sweep.values]
        else:
            cycle_numbers = list(range(1, config.sweep.n_cycles + 1))

        for variant in config.variants:
            record = results[(0, variant)]
            line = classical_line(record.n_bar[0], cycle_numbers)
            rows = []
            for n, linear in zip(cycle_numbers, line):
                n_bar = record.n_bar[n - 1]
                rows.append(
                    [
                        n,
                        n_bar,
                        battery_energy(n_bar, params.omega),
                        power(n_bar, n, params.tau),
                        linear,
                    ]
                )
            self._write_csv(
                f"n_bar_{variant}.csv",
                ["N", "n_bar", "work", "power", "classical_line"],
                rows,
            )
            if config.options.record_traces:
                self._write_csv(
                    f"sigma_y_{variant}.csv",
                    ["cycle", "stroke", "time_us", "sigma_y"],
                    [
                        [trace.cycle, trace.stroke, time, value]
                        for trace in record.traces
                        for time, value in zip(trace.times, trace.sigma_y)
                    ],
                )

        costs = cost_ratios(params, params.profile)
        records = []
        for index, n in enumerate(cycle_numbers):
            entry = self._base_record(index)
            entry.update({"N": n, "tau_us": params.tau})
            for variant in config.variants:
                record = results[(0, variant)]
                n_bar = record.n_bar[n - 1]
                entry[f"n_bar_{variant}"] = n_bar
                entry[f"classical_line_{variant}"] = n * record.n_bar[0]
                entry[f"power_{variant}"] = power(n_bar, n, params.tau)
                entry[f"power_heating_subtracted_{variant}"] = power(
                    n_bar, n, params.tau, heating, subtract=True
                )
            if "na" in config.variants and "sta" in config.variants:
                na = entry["n_bar_na"]
                entry["enhancement_ratio"] = (
                    (entry["n_bar_sta"] - na) / na if abs(na) >= 1e-12 else None
                )
                entry["cost_ratio_amplitude"] = costs.amplitude
                entry["cost_ratio_intensity"] = costs.intensity
            records.append(entry)

        if config.options.record_traces:
            for variant in config.variants:
                for trace in results[(0, variant)].traces:
                    summary = sigma_y_summary(trace)
                    entry = self._base_record(len(records))
                    entry.update(
                        {
                            "variant": variant,
                            "cycle": summary.cycle,
                            "stroke": summary.stroke,
                            "sigma_y_start": summary.start_value,
                            "sigma_y_end": summary.end_of_stroke_value,
                            "sigma_y_max_abs": summary.max_abs,
                        }
                    )
                    records.append(entry)
        return records

    def _emit_tau_sweep(
        self,
        points: Sequence[Tuple[int, EngineParams]],
        results: Dict[Tuple[int, str], CycleRecord],
        n_cycles: int,
    ) -> List[Dict[str, Any]]:
        config = self.config
        heated = config.options.heating
        for variant in config.variants:
            rows = []
            for index, params in points:
                n_bar = results[(index, variant)].final_n_bar
                rate = params.heating_rate if heated else 0.0
                rows.append(
                    [
                        params.tau,
                        n_cycles,
                        n_bar,
                        power(n_bar, n_cycles, params.tau),
                        power(n_bar, n_cycles, params.tau, rate, subtract=True),
                    ]
                )
            self._write_csv(
                f"power_{variant}.csv",
                ["tau_us", "N", "n_bar", "power", "power_heating_subtracted"],
                rows,
            )

        records = []
        for index, params in points:
            entry = self._base_record(index)
            entry.update({"N": n_cycles, "tau_us": params.tau})
            if "na" in config.variants and "sta" in config.variants:
                metrics = compare_variants(
                    results[(index, "na")], results[(index, "sta")], params, heated
                )
                for variant, item in metrics.items():
                    entry[f"n_bar_{variant}"] = item.n_bar_final
                    entry[f"power_{variant}"] = item.power
                    entry[f"power_heating_subtracted_{variant}"] = (
                        item.power_heating_subtracted
                    )
                sta = metrics["sta"]
                entry["enhancement_ratio"] = sta.enhancement_ratio
                entry["power_enhancement_ratio"] = sta.power_enhancement_ratio
                entry["cost_ratio_amplitude"] = sta.cost_ratio_amplitude
                entry["cost_ratio_intensity"] = sta.cost_ratio_intensity
            else:
                for variant in config.variants:
                    n_bar = results[(index, variant)].final_n_bar
                    entry[f"n_bar_{variant}"] = n_bar
                    entry[f"power_{variant}"] = power(n_bar, n_cycles, params.tau)
            records.append(entry)
        return records

    def _run_cost_profile(self) -> List[Dict[str, Any]]:
        params = self.config.params
        profile = params.profile
        times = np.linspace(0.0, params.tau, self.config.cost_points)
        ratios = omega_cd_trace(params, profile, times) / params.Omega
        half = 0.5 * params.tau
        self._write_csv(
            "cd_ratio.csv",
            ["time_us", "stroke", "v_rad_per_us", "omega_cd_over_omega"],
            [
                [
                    time,
                    "expansion" if time <= half else "compression",
                    profile.stroke_value(time),
                    ratio,
                ]
                for time, ratio in zip(times, ratios)
            ],
        )
        costs = cost_ratios(params, profile)
        entry = self._base_record(0)
        entry.update(
            {
                "tau_us": params.tau,
                "cost_ratio_amplitude": costs.amplitude,
                "cost_ratio_intensity": costs.intensity,
                "cost_ratio_closed_form": costs.closed_form,
                "cost_ratio_reported": costs.reported,
            }
        )
        return [entry]

    def _run_thermometry(self) -> List[Dict[str, Any]]:
        config = self.config
        settings = config.thermometry
        assert settings is not None
        variant = config.variants[0]
        task = SimulationTask(
            index=0,
            variant=variant,
            params=config.params,
            fock=config.fock,
            options=variant_options(config.options, variant),
            n_cycles=settings.n_cycles,
        )
        record = execute([task], 1)[(0, variant)]
        populations = record.battery_populations[-1]
        simulated_n_bar = record.final_n_bar

        scan = ThermometryScan.with_default_times(
            eta=config.params.eta,
            omega_bsb=settings.omega_bsb,
            shots_per_point=settings.shots_per_point,
            seed=config.seed,
            points=settings.points,
        )
        signal = synthesize_signal(
            populations, scan, lamb_dicke=settings.policy.lamb_dicke
        )
        self._write_csv(
            "scan.csv",
            ["time_us", "p_down", "shots"],
            [
                [time, value, int(shots)]
                for time, value, shots in zip(
                    signal.times, signal.p_down, signal.shots  # type: ignore
                )
            ],
        )

        policies = [("selected", settings.policy)] + [
            (f"n_max_{n}", replace(settings.policy, force_n_max=n))
            for n in settings.forced_cutoffs
        ]
        records = []
        for index, (label, policy) in enumerate(policies):
            fit = fit_populations(signal, scan, policy)
            boot = bootstrap_errors(
                signal, scan, fit, settings.resamples, jobs=config.jobs, policy=policy
            )
            padded = np.zeros(fit.n_max + 1)
            overlap = min(populations.size, fit.n_max + 1)
            padded[:overlap] = populations[:overlap]
            self._write_csv(
                f"populations_{label}.csv",
                ["n", "p_n", "sigma_linearised", "sigma_bootstrap", "p_n_simulated"],
                [
                    [n, fit.p_n[n], fit.sigma_p_n[n], boot.sigma_p_n[n], padded[n]]
                    for n in range(fit.n_max + 1)
                ],
            )
            entry = self._base_record(index)
            entry.update(
                {
                    "fit": label,
                    "variant": variant,
                    "N": settings.n_cycles,
                    "n_max": fit.n_max,
                    "n_bar": fit.n_bar,
                    "n_bar_error_linearised": fit.n_bar_error,
                    "n_bar_error_bootstrap": boot.sigma_n_bar,
                    "total_occupation": fit.total_occupation,
                    "n_bar_simulated": simulated_n_bar,
                    "bootstrap_failures": boot.failures,
                }
            )
            records.append({key: _plain(value) for key, value in entry.items()})
        return records

    def _run_rwa(self) -> List[Dict[str, Any]]:
        config = self.config
        settings = config.rwa
        assert settings is not None
        params = replace(config.params, tau=settings.tau)
        space = config.fock
        tones = three_color_tones(params, with_cd=settings.with_cd)
        step = config.options.step
        lab_fastest = 2.0 * params.omega_z_prime + params.omega + float(
            np.hypot(params.Omega, params.v0)
        )

        def lab(t: float) -> np.ndarray:
            return lab_frame_hamiltonian(params, tones, t, 1, space)

        effective = stroke_builder(params, settings.with_cd, space, "expansion", 0.0)
        times = np.linspace(0.0, 0.5 * params.tau, settings.samples)
        lab_state = initial_state(space)
        effective_state = lab_state
        rows = [[0.0, 1.0]]
        for t0, t1 in zip(times[:-1], times[1:]):
            lab_state = propagate(
                lab_state,
                lab,
                float(t0),
                float(t1),
                step,
                fastest_frequency=lab_fastest,
            )
            effective_state = propagate(
                effective_state,
                effective,
                float(t0),
                float(t1),
                step,
                fastest_frequency=lab_fastest,
            )
            rows.append([float(t1), state_fidelity(lab_state.rho, effective_state.rho)])

        self._write_csv("rwa_fidelity.csv", ["time_us", "fidelity"], rows)
        fidelities = [row[1] for row in rows]
        entry = self._base_record(0)
        entry.update(
            {
                "tau_us": params.tau,
                "with_cd": settings.with_cd,
                "min_fidelity": min(fidelities),
                "final_fidelity": fidelities[-1],
            }
        )
        return [entry]


def run(config: RunConfig) -> List[Path]:
    return ExperimentRunner(config).run()

