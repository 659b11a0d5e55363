"""Run configuration: JSON documents with unit-suffixed keys, merged over presets."""

import copy
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from analysis import heating_only_n_bar  # type: ignore
from drive import LAMB_DICKE_LIMIT, EngineParams, from_2pi_mhz  # type: ignore
from dynamics import METHODS, StepPolicy  # type: ignore
from engine import (  # type: ignore
    RESET_VARIANTS,
    CycleOptions,
    initial_state,
    run_cycles,
)
from errors import ConfigError  # type: ignore
from hilbert import FockSpace  # type: ignore
from logging_config import get_logger  # type: ignore
from presets import get_preset  # type: ignore
from thermometry import DEFAULT_OMEGA_BSB, FitPolicy, TailPolicy  # type: ignore

FREQUENCY_KEYS = ("Omega", "v0", "omega", "omega_z")
UNIT_SUFFIXES = ("_2pi_MHz", "_rad_per_us")
PIPELINES = ("cycles", "cost-profile", "thermometry", "rwa")
VARIANTS = ("na", "sta", "classical-na", "classical-sta")
SWEEP_AXES = ("N", "tau", "none")
EMIT_MODES = ("csv", "json", "both")

SECTION_KEYS: Dict[str, Tuple[str, ...]] = {
    "engine": tuple(
        f"{name}{suffix}" for name in FREQUENCY_KEYS for suffix in UNIT_SUFFIXES
    )
    + ("tau_us", "eta", "heating_rate_per_s"),
    "fock": ("n_max", "guard_levels", "leakage_tolerance", "max_dimension"),
    "options": ("reset", "heating", "record_traces"),
    "sweep": ("axis", "values", "logspace_us", "n_cycles"),
    "step": ("dt_max_us", "substeps_per_fastest_period", "method", "min_steps"),
    "thermometry": (
        "omega_bsb_2pi_MHz",
        "omega_bsb_rad_per_us",
        "shots_per_point",
        "points",
        "resamples",
        "n_cycles",
        "forced_cutoffs",
        "occupation_floor",
        "max_cutoff",
        "tail",
        "tail_n0",
        "lamb_dicke",
    ),
    "rwa": ("tau_us", "samples", "with_cd"),
    "cost_profile": ("points",),
}
TOP_LEVEL_KEYS = (
    "preset",
    "pipeline",
    "description",
    "variants",
    "seed",
    "output",
    "emit",
    "jobs",
) + tuple(SECTION_KEYS)

logger = get_logger(__name__)


@dataclass(frozen=True)
class SweepSpec:
    """Exactly one swept quantity; ``n_cycles`` is the cycle count off the N axis."""

    axis: str
    values: Tuple[float, ...]
    n_cycles: int = 1

    @property
    def max_cycles(self) -> int:
        if self.axis == "N":
            return int(max(self.values))
        return self.n_cycles


@dataclass(frozen=True)
class ThermometrySettings:
    omega_bsb: float
    shots_per_point: int
    points: int
    resamples: int
    n_cycles: int
    forced_cutoffs: Tuple[int, ...]
    policy: FitPolicy


@dataclass(frozen=True)
class RwaSettings:
    tau: float
    samples: int
    with_cd: bool


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description."""

    pipeline: str
    params: EngineParams
    fock: FockSpace
    options: CycleOptions
    variants: Tuple[str, ...]
    sweep: SweepSpec
    seed: int
    output: Path
    emit: str = "both"
    jobs: int = 1
    preset: Optional[str] = None
    description: str = ""
    thermometry: Optional[ThermometrySettings] = None
    rwa: Optional[RwaSettings] = None
    cost_points: int = 401
    document: Dict[str, Any] = field(default_factory=dict, compare=False)

    def config_hash(self) -> str:
        canonical = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha1(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Diagnostic:
    level: str
    field: Optional[str]
    message: str

    def __str__(self) -> str:
        where = f" [{self.field}]" if self.field else ""
        return f"{self.level.upper()}{where}: {self.message}"


def load_document(path: Path) -> Dict[str, Any]:
    """Parse a JSON config file.

    Raises:
        ConfigError: If the file is missing, not JSON or not an object
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"Invalid JSON in {path}: {e.msg} (line {e.lineno}, column {e.colno})",
            line=e.lineno,
        )
    if not isinstance(document, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")
    return document


def _frequency_name(key: str) -> Optional[str]:
    for suffix in UNIT_SUFFIXES:
        if key.endswith(suffix):
            return key[: -len(suffix)]
    return None


def merge_documents(
    base: Mapping[str, Any], override: Mapping[str, Any]
) -> Dict[str, Any]:
    """Override ``base`` key by key; a frequency in one unit replaces the other."""
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if key in SECTION_KEYS and isinstance(value, dict):
            section = dict(merged.get(key) or {})
            for inner_key, inner_value in value.items():
                name = _frequency_name(inner_key)
                if name is not None:
                    for suffix in UNIT_SUFFIXES:
                        section.pop(f"{name}{suffix}", None)
                section[inner_key] = copy.deepcopy(inner_value)
            merged[key] = section
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _section(document: Mapping[str, Any], name: str) -> Dict[str, Any]:
    section = document.get(name) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"Section '{name}' must be an object", field=name)
    for key in section:
        if key in FREQUENCY_KEYS and name == "engine":
            raise ConfigError(
                f"Frequency '{key}' needs a unit suffix: {key}_2pi_MHz "
                f"(value f means 2*pi*f rad/us) or {key}_rad_per_us",
                field=f"{name}.{key}",
            )
        if key not in SECTION_KEYS[name]:
            raise ConfigError(f"Unknown key '{key}'", field=f"{name}.{key}")
    return section


def _number(
    section: Mapping[str, Any], key: str, default: Any, path: str, integer: bool = False
) -> Any:
    value = section.get(key, default)
    if value is None:
        raise ConfigError(f"Missing '{key}'", field=path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}", field=path)
    if integer:
        if int(value) != value:
            raise ConfigError(f"'{key}' must be an integer, got {value!r}", field=path)
        return int(value)
    return float(value)


def _flag(section: Mapping[str, Any], key: str, default: bool, path: str) -> bool:
    value = section.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"'{key}' must be true or false, got {value!r}", field=path)
    return value


def _frequency(section: Mapping[str, Any], name: str, path: str) -> float:
    present = [s for s in UNIT_SUFFIXES if f"{name}{s}" in section]
    if len(present) > 1:
        raise ConfigError(f"'{name}' is given in two units", field=f"{path}.{name}")
    if not present:
        raise ConfigError(f"Missing frequency '{name}'", field=f"{path}.{name}")
    key = f"{name}{present[0]}"
    value = _number(section, key, None, f"{path}.{key}")
    return from_2pi_mhz(value) if present[0] == "_2pi_MHz" else value


def _engine(document: Mapping[str, Any]) -> EngineParams:
    section = _section(document, "engine")
    tau = _number(section, "tau_us", None, "engine.tau_us")
    if tau <= 0:
        raise ConfigError(f"tau_us must be > 0, got {tau}", field="engine.tau_us")
    try:
        return EngineParams(
            Omega=_frequency(section, "Omega", "engine"),
            v0=_frequency(section, "v0", "engine"),
            tau=tau,
            omega=_frequency(section, "omega", "engine"),
            eta=_number(section, "eta", None, "engine.eta"),
            omega_z=_frequency(section, "omega_z", "engine"),
            heating_rate=_number(
                section, "heating_rate_per_s", 240.0, "engine.heating_rate_per_s"
            ),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field="engine")


def _fock(document: Mapping[str, Any]) -> FockSpace:
    section = _section(document, "fock")
    try:
        return FockSpace(
            n_max=_number(section, "n_max", 15, "fock.n_max", integer=True),
            guard_levels=_number(
                section, "guard_levels", 5, "fock.guard_levels", integer=True
            ),
            leakage_tolerance=_number(
                section, "leakage_tolerance", 1e-4, "fock.leakage_tolerance"
            ),
            max_dimension=_number(
                section, "max_dimension", 4096, "fock.max_dimension", integer=True
            ),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field="fock")


def _step(document: Mapping[str, Any]) -> StepPolicy:
    section = _section(document, "step")
    method = section.get("method", "exponential-midpoint")
    if method not in METHODS:
        raise ConfigError(f"Unknown integration method '{method}'", field="step.method")
    try:
        return StepPolicy(
            dt_max=_number(section, "dt_max_us", 0.05, "step.dt_max_us"),
            substeps_per_fastest_period=_number(
                section,
                "substeps_per_fastest_period",
                10,
                "step.substeps_per_fastest_period",
                integer=True,
            ),
            method=method,
            min_steps=_number(
                section, "min_steps", 100, "step.min_steps", integer=True
            ),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field="step")


def _options(document: Mapping[str, Any], step: StepPolicy) -> CycleOptions:
    section = _section(document, "options")
    reset = section.get("reset", "pump")
    if reset not in RESET_VARIANTS:
        raise ConfigError(f"Unknown reset variant '{reset}'", field="options.reset")
    return CycleOptions(
        reset_variant=reset,
        heating=_flag(section, "heating", False, "options.heating"),
        record_traces=_flag(section, "record_traces", False, "options.record_traces"),
        step=step,
    )


def _sweep(document: Mapping[str, Any]) -> SweepSpec:
    section = _section(document, "sweep")
    axis = section.get("axis", "none")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"Unknown sweep axis '{axis}'", field="sweep.axis")
    n_cycles = _number(section, "n_cycles", 1, "sweep.n_cycles", integer=True)
    if n_cycles < 1:
        raise ConfigError("n_cycles must be >= 1", field="sweep.n_cycles")

    if "values" in section and "logspace_us" in section:
        raise ConfigError("Give either values or logspace_us", field="sweep")
    if "logspace_us" in section:
        if axis != "tau":
            raise ConfigError("logspace_us needs axis 'tau'", field="sweep.logspace_us")
        grid = section["logspace_us"]
        if not isinstance(grid, list) or len(grid) != 3:
            raise ConfigError(
                "logspace_us must be [start, stop, points]", field="sweep.logspace_us"
            )
        start, stop = float(grid[0]), float(grid[1])
        if start <= 0 or stop <= start or int(grid[2]) < 2:
            raise ConfigError(
                "logspace_us needs 0 < start < stop and points >= 2",
                field="sweep.logspace_us",
            )
        values = tuple(float(v) for v in np.geomspace(start, stop, int(grid[2])))
    else:
        raw = section.get("values", [])
        if not isinstance(raw, list):
            raise ConfigError("values must be a list", field="sweep.values")
        values = tuple(float(v) for v in raw)

    if axis == "none":
        if values:
            raise ConfigError("Axis 'none' takes no values", field="sweep.values")
        return SweepSpec(axis=axis, values=(), n_cycles=n_cycles)
    if not values:
        raise ConfigError(f"Axis '{axis}' needs values", field="sweep.values")
    if axis == "N" and any(v < 1 or int(v) != v for v in values):
        raise ConfigError("Cycle numbers must be integers >= 1", field="sweep.values")
    if axis == "tau" and any(v <= 0 for v in values):
        raise ConfigError("Cycle times must be > 0", field="sweep.values")
    return SweepSpec(axis=axis, values=values, n_cycles=n_cycles)


def _thermometry(document: Mapping[str, Any]) -> Optional[ThermometrySettings]:
    if "thermometry" not in document:
        return None
    section = _section(document, "thermometry")
    omega_bsb = DEFAULT_OMEGA_BSB
    if any(f"omega_bsb{s}" in section for s in UNIT_SUFFIXES):
        omega_bsb = _frequency(section, "omega_bsb", "thermometry")

    forced = section.get("forced_cutoffs", [])
    if not isinstance(forced, list) or any(
        not isinstance(n, int) or n < 0 for n in forced
    ):
        raise ConfigError(
            "forced_cutoffs must be a list of integers >= 0",
            field="thermometry.forced_cutoffs",
        )
    tail = None
    if _flag(section, "tail", False, "thermometry.tail"):
        tail = TailPolicy(
            n0=_number(section, "tail_n0", 4, "thermometry.tail_n0", integer=True)
        )
    try:
        policy = FitPolicy(
            occupation_floor=_number(
                section, "occupation_floor", 0.95, "thermometry.occupation_floor"
            ),
            max_cutoff=_number(
                section, "max_cutoff", 20, "thermometry.max_cutoff", integer=True
            ),
            tail=tail,
            lamb_dicke=_flag(section, "lamb_dicke", False, "thermometry.lamb_dicke"),
        )
    except ValueError as e:
        raise ConfigError(str(e), field="thermometry")

    return ThermometrySettings(
        omega_bsb=omega_bsb,
        shots_per_point=_number(
            section, "shots_per_point", 200, "thermometry.shots_per_point", integer=True
        ),
        points=_number(section, "points", 60, "thermometry.points", integer=True),
        resamples=_number(
            section, "resamples", 200, "thermometry.resamples", integer=True
        ),
        n_cycles=_number(section, "n_cycles", 28, "thermometry.n_cycles", integer=True),
        forced_cutoffs=tuple(forced),
        policy=policy,
    )


def _rwa(document: Mapping[str, Any]) -> Optional[RwaSettings]:
    if "rwa" not in document:
        return None
    section = _section(document, "rwa")
    tau = _number(section, "tau_us", 10.0, "rwa.tau_us")
    samples = _number(section, "samples", 11, "rwa.samples", integer=True)
    if tau <= 0 or samples < 2:
        raise ConfigError("rwa needs tau_us > 0 and samples >= 2", field="rwa")
    return RwaSettings(
        tau=tau,
        samples=samples,
        with_cd=_flag(section, "with_cd", False, "rwa.with_cd"),
    )


def parse_config(document: Mapping[str, Any]) -> RunConfig:
    """Build a RunConfig from a merged document.

    Raises:
        ConfigError: Naming the offending field for any invalid or unknown entry
    """
    for key in document:
        if key not in TOP_LEVEL_KEYS:
            raise ConfigError(f"Unknown key '{key}'", field=key)

    pipeline = document.get("pipeline", "cycles")
    if pipeline not in PIPELINES:
        raise ConfigError(f"Unknown pipeline '{pipeline}'", field="pipeline")

    variants = document.get("variants", ["na", "sta"])
    if not isinstance(variants, list) or not variants:
        raise ConfigError("variants must be a non-empty list", field="variants")
    for variant in variants:
        if variant not in VARIANTS:
            raise ConfigError(f"Unknown variant '{variant}'", field="variants")

    emit = document.get("emit", "both")
    if emit not in EMIT_MODES:
        raise ConfigError(f"Unknown emit mode '{emit}'", field="emit")
    if pipeline == "thermometry" and "seed" not in document:
        raise ConfigError("Thermometry runs need a seed", field="seed")
    seed = _number(document, "seed", 0, "seed", integer=True)
    jobs = _number(document, "jobs", 1, "jobs", integer=True)
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}", field="jobs")

    step = _step(document)
    thermometry = _thermometry(document)
    if pipeline == "thermometry" and thermometry is None:
        raise ConfigError("Pipeline 'thermometry' needs a thermometry section")
    rwa = _rwa(document)
    if pipeline == "rwa" and rwa is None:
        raise ConfigError("Pipeline 'rwa' needs an rwa section")

    cost_points = 401
    if "cost_profile" in document:
        cost_points = _number(
            _section(document, "cost_profile"),
            "points",
            401,
            "cost_profile.points",
            integer=True,
        )

    return RunConfig(
        pipeline=pipeline,
        params=_engine(document),
        fock=_fock(document),
        options=_options(document, step),
        variants=tuple(variants),
        sweep=_sweep(document),
        seed=seed,
        output=Path(document.get("output", "results")),
        emit=emit,
        jobs=jobs,
        preset=document.get("preset"),
        description=str(document.get("description", "")),
        thermometry=thermometry,
        rwa=rwa,
        cost_points=cost_points,
        document=copy.deepcopy(dict(document)),
    )


def resolve_document(
    document: Optional[Mapping[str, Any]] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Dict[str, Any]:
    """Preset document, then the config file, then command-line overrides."""
    document = dict(document or {})
    name = preset or document.get("preset")
    if preset and document.get("preset") and document["preset"] != preset:
        raise ConfigError(
            f"--preset {preset} conflicts with preset '{document['preset']}' in config",
            field="preset",
        )
    merged: Dict[str, Any] = {}
    if name is not None:
        merged = get_preset(name).document
    merged = merge_documents(merged, document)
    if overrides:
        merged = merge_documents(merged, overrides)
    return merged


def build_config(
    document: Optional[Mapping[str, Any]] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    return parse_config(resolve_document(document, preset, overrides))


def _expected_n_bar(config: RunConfig) -> float:
    """Classical-line estimate from one cheap cycle, plus the heating drift."""
    if config.pipeline not in ("cycles", "thermometry") or config.params.eta == 0:
        return 0.0
    n_cycles = config.sweep.max_cycles
    if config.pipeline == "thermometry" and config.thermometry is not None:
        n_cycles = config.thermometry.n_cycles
    if config.sweep.axis == "tau":
        taus = config.sweep.values
    else:
        taus = (config.params.tau,)

    estimate = 0.0
    estimate_space = FockSpace(n_max=8)
    for tau in (min(taus), max(taus)):
        params = replace(config.params, tau=tau)
        for with_cd in (False, True):
            options = CycleOptions(with_cd=with_cd, step=config.options.step)
            record = run_cycles(initial_state(estimate_space), 1, params, options)
            growth = n_cycles * record.final_n_bar
            if config.options.heating:
                growth += heating_only_n_bar(params.heating_rate, n_cycles, tau)
            estimate = max(estimate, growth)
    return estimate


def validate(document: Mapping[str, Any]) -> List[Diagnostic]:
    """All errors and warnings for a config document; empty means clean."""
    try:
        config = build_config(document)
    except ConfigError as e:
        return [Diagnostic(level="error", field=e.field, message=str(e))]

    diagnostics: List[Diagnostic] = []
    params = config.params
    if params.eta == 0:
        diagnostics.append(
            Diagnostic("warning", "engine.eta", "eta = 0: battery is decoupled")
        )
    try:
        expected = _expected_n_bar(config)
    except Exception as e:  # the estimate is advisory
        logger.debug(f"Skipping n_max heuristic: {e}")
        expected = 0.0
    lamb_dicke = params.lamb_dicke_parameter(expected)
    if lamb_dicke > LAMB_DICKE_LIMIT:
        diagnostics.append(
            Diagnostic(
                "warning",
                "engine.eta",
                f"Lamb-Dicke parameter eta^2(2n + 1) = {lamb_dicke:.3f} exceeds "
                f"{LAMB_DICKE_LIMIT} at the expected n = {expected:.2f}",
            )
        )
    if config.fock.n_max < 3.0 * expected:
        diagnostics.append(
            Diagnostic(
                "warning",
                "fock.n_max",
                f"n_max = {config.fock.n_max} is below 3x the expected "
                f"n = {expected:.2f}",
            )
        )
    if config.pipeline == "thermometry" and config.thermometry is not None:
        needed = 2 * (config.thermometry.policy.max_cutoff + 1)
        if config.thermometry.points < needed:
            diagnostics.append(
                Diagnostic(
                    "error",
                    "thermometry.points",
                    f"{config.thermometry.points} scan points cannot resolve "
                    f"max_cutoff {config.thermometry.policy.max_cutoff}",
                )
            )
    return diagnostics
