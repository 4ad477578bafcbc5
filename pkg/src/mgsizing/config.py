"""Run configuration: an INI file whose sections mirror the parameter types.

Example::

    [trace]
    source = synth        ; or a CSV path
    seed = 0
    hours = 8760
    window_length = 168

    [DispatchParams]
    p_D = 0.30
    diesel_min_frac = 0.3

    [CostModel]
    pv_capex = 900

    [OOPlan]
    P = 0.99
    alpha = 0.05

Unknown sections or keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .baselines import DPConfig
from .dispatch import DispatchParams
from .economics import CostModel
from .oo import DesignBounds, OOPlan, Sampling
from .solver.backends import BACKENDS, SolverBackend, get_backend
from .solver.bnb import NODE_LIMIT_DEFAULT
from .timeseries import HOURS_PER_YEAR, WEEK, HourlyTrace, load_trace, synth_trace


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TraceSource:
    source: str = "synth"  # "synth" or a CSV path
    seed: int = 0
    hours: int = HOURS_PER_YEAR
    window_length: int = WEEK
    stc_irradiance: float = 1000.0
    derate: float = 1.0

    def __post_init__(self):
        if self.hours < 1 or self.window_length < 1:
            raise ValueError("hours and window_length must be >= 1")

    def load(self) -> HourlyTrace:
        if self.source == "synth":
            return synth_trace(self.seed, self.hours)
        return load_trace(self.source, stc_irradiance=self.stc_irradiance, derate=self.derate)


@dataclass(frozen=True)
class PlanInputs:
    P: float = 0.99
    alpha: float = 0.05
    g_frac: float = 0.10
    k: int = 1
    AP_target: float = 0.90
    N: int | None = None
    s: int | None = None

    def build(self) -> OOPlan:
        return OOPlan.build(self.P, self.alpha, self.g_frac, self.k, self.AP_target, self.N, self.s)


@dataclass(frozen=True)
class SolverSettings:
    backend: str = "embedded"
    rel_gap: float = 0.0
    node_limit: int = NODE_LIMIT_DEFAULT

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.rel_gap < 0:
            raise ValueError("rel_gap must be nonnegative")

    def make(self) -> SolverBackend:
        if self.backend == "embedded":
            return get_backend("embedded", rel_gap=self.rel_gap, node_limit=self.node_limit)
        return get_backend(self.backend, rel_gap=self.rel_gap)


@dataclass(frozen=True)
class SamplingSettings:
    strategy: str = "grid"
    seed: int = 0
    E_B_min: float = 500.0
    E_B_max: float = 5000.0
    PV_min: float = 500.0
    PV_max: float = 3000.0

    def build(self) -> Sampling:
        return Sampling(DesignBounds(self.E_B_min, self.E_B_max, self.PV_min, self.PV_max),
                        self.strategy, self.seed)


@dataclass(frozen=True)
class RunConfig:
    trace: TraceSource = field(default_factory=TraceSource)
    params: DispatchParams = field(default_factory=DispatchParams)
    cost: CostModel = field(default_factory=CostModel)
    plan: PlanInputs = field(default_factory=PlanInputs)
    sampling: SamplingSettings = field(default_factory=SamplingSettings)
    dp: DPConfig = field(default_factory=DPConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)

    SECTIONS = {"trace": "trace", "DispatchParams": "params", "CostModel": "cost",
                "OOPlan": "plan", "Sampling": "sampling", "DPConfig": "dp", "solver": "solver"}

    def to_ini(self) -> str:
        """Every setting, defaults included, in the file format."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for section, attr in self.SECTIONS.items():
            obj = getattr(self, attr)
            cp[section] = {f.name: _format(getattr(obj, f.name)) for f in fields(obj)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue().rstrip() + "\n"

    def with_values(self, section: str, values: dict[str, str]) -> RunConfig:
        """Copy with string ``values`` parsed into ``section``."""
        if section not in self.SECTIONS:
            raise ConfigError(f"unknown config section [{section}]; "
                              f"expected one of {sorted(self.SECTIONS)}")
        attr = self.SECTIONS[section]
        obj = getattr(self, attr)
        types = {f.name: f.type for f in fields(obj)}
        parsed = {}
        for key, text in values.items():
            if key not in types:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            parsed[key] = _parse(text, types[key], f"[{section}] {key}")
        try:
            return replace(self, **{attr: replace(obj, **parsed)})
        except ValueError as exc:
            raise ConfigError(f"[{section}]: {exc}") from exc


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, type_name, where: str):
    text = text.strip()
    type_name = str(type_name)
    optional = "None" in type_name
    if optional and text.lower() in ("none", ""):
        return None
    try:
        if type_name.startswith("int"):
            return int(text)
        if type_name.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} as {type_name}") from None
    return text


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section in cp.sections():
        cfg = cfg.with_values(section, dict(cp[section]))
    return cfg
