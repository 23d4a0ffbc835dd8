"""Experiment configuration: strict parsing and up-front feasibility checks.

A config is a YAML (or JSON) mapping::

    kind: rmse            # rmse | sumrate | flops
    seed: 1
    trials: 200
    mc_samples: 2000
    scenario: {cells: 7, users_per_cell: 4, m1: 8, m2: 8, ...}
    sweep: {snr_db: [-10, 0, 10], geometries: [[8, 8], [16, 4]]}
    estimation: {pairing: joint, noise_convention: first_order, mse_expectation: prior}
    precoding: {strategies: [theorem5, schemeB], p_t: 1.0, ...}

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .channel import ScenarioConfig
from .esprit import ModelOrderError, check_model_order
from .numerics import DomainError
from .precoding import DOA_MODES, RATE_MODES, STRATEGIES

KINDS = ("rmse", "sumrate", "flops")
DEFAULT_SNR_DB = tuple(range(-10, 45, 5))


class ConfigError(DomainError):
    """Invalid or infeasible experiment configuration."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class PilotSettings:
    pilot_length: int = 64
    rho1: float = 0.1


@dataclass(frozen=True)
class SweepSettings:
    snr_db: tuple[float, ...] = DEFAULT_SNR_DB
    # (m1, m2) pairs for rmse; empty means the scenario's own array
    geometries: tuple[tuple[int, int], ...] = ()
    # square-array side lengths for flops
    antenna_sides: tuple[int, ...] = (8, 12, 16, 20, 24, 28, 32)


@dataclass(frozen=True)
class EstimationSettings:
    pairing: str = "joint"
    noise_convention: str = "first_order"
    # prior: interferer angles averaged over mc_samples draws; instance: actual angles
    mse_expectation: str = "prior"


@dataclass(frozen=True)
class PrecodingSettings:
    strategies: tuple[str, ...] = STRATEGIES
    p_t: float = 1.0
    # pt_over_sigma2: snr = p_t / sigma2; per_user: snr = (p_t / J) / sigma2
    snr_definition: str = "pt_over_sigma2"
    doa_mode: str = "estimated"
    rate_mode: str = "exact"
    subcarriers: tuple[int, ...] = (0,)
    max_streams: int | None = None
    mse_expectation: str = "instance"


@dataclass(frozen=True)
class ComplexitySettings:
    music_grid: int = 360
    l_tilde: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "rmse"
    seed: int = 0
    trials: int = 200
    mc_samples: int = 2000
    output: str | None = None
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    pilots: PilotSettings = field(default_factory=PilotSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    estimation: EstimationSettings = field(default_factory=EstimationSettings)
    precoding: PrecodingSettings = field(default_factory=PrecodingSettings)
    complexity: ComplexitySettings = field(default_factory=ComplexitySettings)

    # -- geometry helpers -------------------------------------------------
    def geometries(self) -> list[tuple[int, int]]:
        if self.sweep.geometries:
            return [tuple(g) for g in self.sweep.geometries]
        return [(self.scenario.m1, self.scenario.m2)]

    def scenario_for(self, m1: int, m2: int) -> ScenarioConfig:
        return replace(self.scenario, m1=m1, m2=m2)

    def sigma2(self, snr_db: float) -> float:
        if math.isinf(snr_db) and snr_db > 0:
            return 0.0
        # estimation runs use unit-power pilots; downlink runs reference p_t
        p = 1.0
        if self.kind == "sumrate":
            p = self.precoding.p_t
            if self.precoding.snr_definition == "per_user":
                p /= self.scenario.users_per_cell
        return p * 10 ** (-snr_db / 10)

    # -- validation -------------------------------------------------------
    def problems(self) -> list[str]:
        out = []
        if self.kind not in KINDS:
            out.append(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.trials < 1:
            out.append("trials must be >= 1")
        if self.mc_samples < 1:
            out.append("mc_samples must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            out.append("seed must be a 64-bit unsigned integer")
        sc = self.scenario
        out.extend(sc.validate())
        if self.kind == "flops":
            return out + self._flops_problems()
        q, rho1 = self.pilots.pilot_length, self.pilots.rho1
        if not 0 <= rho1 < 1 / sc.nt:
            out.append(f"rho1={rho1} must satisfy 0 <= rho1 < 1/nt = {1 / sc.nt}")
        if q < sc.users_per_cell * sc.nt:
            out.append(f"pilot_length={q} must be >= J*nt={sc.users_per_cell * sc.nt}")
        if not self.sweep.snr_db:
            out.append("sweep.snr_db must not be empty")
        if any(math.isnan(s) or s == -math.inf for s in self.sweep.snr_db):
            out.append("sweep.snr_db entries must be finite or +inf")
        for m1, m2 in self.geometries():
            try:
                check_model_order(self.scenario_for(m1, m2).geometry, sc.num_paths)
            except (ModelOrderError, DomainError) as exc:
                out.append(f"geometry {m1}x{m2}: {exc}")
        est = self.estimation
        if est.pairing not in ("v", "joint"):
            out.append(f"estimation.pairing must be 'v' or 'joint', got {est.pairing!r}")
        if est.noise_convention not in ("first_order", "printed"):
            out.append("estimation.noise_convention must be 'first_order' or 'printed'")
        if est.mse_expectation not in ("prior", "instance"):
            out.append("estimation.mse_expectation must be 'prior' or 'instance'")
        if self.kind == "sumrate":
            out.extend(self._sumrate_problems())
        return out

    def _sumrate_problems(self) -> list[str]:
        pc, sc = self.precoding, self.scenario
        out = []
        bad = [s for s in pc.strategies if s not in STRATEGIES]
        if bad or not pc.strategies:
            out.append(f"precoding.strategies must be a non-empty subset of {STRATEGIES}, got {list(pc.strategies)}")
        if not pc.p_t > 0:
            out.append("precoding.p_t must be positive")
        if pc.snr_definition not in ("pt_over_sigma2", "per_user"):
            out.append("precoding.snr_definition must be 'pt_over_sigma2' or 'per_user'")
        if pc.doa_mode not in DOA_MODES:
            out.append(f"precoding.doa_mode must be one of {DOA_MODES}")
        if pc.rate_mode not in RATE_MODES:
            out.append(f"precoding.rate_mode must be one of {RATE_MODES}")
        if pc.mse_expectation not in ("prior", "instance"):
            out.append("precoding.mse_expectation must be 'prior' or 'instance'")
        if not pc.subcarriers or any(not 0 <= k < sc.num_subcarriers for k in pc.subcarriers):
            out.append(f"precoding.subcarriers must lie in [0, {sc.num_subcarriers})")
        if pc.max_streams is not None and pc.max_streams < 1:
            out.append("precoding.max_streams must be >= 1")
        if "bdzf" in pc.strategies and (sc.users_per_cell - 1) * sc.num_paths >= sc.m1 * sc.m2:
            out.append("bdzf needs (J - 1) * L < nr")
        if any(math.isinf(s) for s in self.sweep.snr_db):
            out.append("sumrate needs finite snr_db values")
        return out

    def _flops_problems(self) -> list[str]:
        out = []
        sides = self.sweep.antenna_sides
        if not sides or any(int(s) < 2 for s in sides):
            out.append("sweep.antenna_sides must be a non-empty list of integers >= 2")
        lt = self.complexity.l_tilde
        lt = (self.scenario.users_per_cell - 1) * self.scenario.num_paths if lt is None else lt
        for s in sides:
            if s * s <= lt:
                out.append(f"antenna side {s}: {s * s} antennas cannot host a stacked rank of {lt}")
        if self.complexity.music_grid < 1:
            out.append("complexity.music_grid must be >= 1")
        return out

    def validate(self) -> "ExperimentConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_SECTIONS = {
    "scenario": ScenarioConfig,
    "pilots": PilotSettings,
    "sweep": SweepSettings,
    "estimation": EstimationSettings,
    "precoding": PrecodingSettings,
    "complexity": ComplexitySettings,
}
_TOP_LEVEL = ("kind", "seed", "trials", "mc_samples", "output")


def _coerce(name: str, value, default):
    """Convert lists to tuples and check scalar types against the default."""
    if isinstance(default, tuple) or name in ("geometries",):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name} must be a list")
        if default and all(isinstance(d, str) for d in default):
            if not all(isinstance(v, str) for v in value):
                raise ConfigError(f"{name} must be a list of strings")
            return tuple(value)
        return tuple(tuple(_num(x) for x in v) if isinstance(v, (list, tuple)) else _num(v) for v in value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if isinstance(default, float) or name == "gain_variance":
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string")
        return value
    if value is not None and name in ("max_streams", "l_tilde"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer or null")
    return value


def _num(x):
    if isinstance(x, str) and x.strip().lower() in ("inf", "+inf", ".inf"):
        return math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"expected a number, got {x!r}")
    return x


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    defaults = cls()
    kwargs = {k: _coerce(k, v, getattr(defaults, k)) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError, DomainError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = sorted(set(data) - set(_TOP_LEVEL) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    defaults = ExperimentConfig()
    kwargs = {}
    for key in _TOP_LEVEL:
        if key in data:
            default = getattr(defaults, key)
            kwargs[key] = data[key] if key == "output" else _coerce(key, data[key], default)
    for key, cls in _SECTIONS.items():
        if key in data:
            kwargs[key] = _build(cls, data[key], key)
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    """Read a YAML/JSON config; ``overrides`` (e.g. ``seed``, ``trials``) replace top-level values."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    data = {} if data is None else data
    cfg = config_from_dict(data)
    clean = {k: v for k, v in overrides.items() if v is not None}
    if clean:
        cfg = replace(cfg, **clean)
    return cfg
