"""Run configuration: YAML/JSON in, validated SI values out.

Every section is optional. Quantities accept unit suffixes (``"130 um"``,
``"100 MHz"``, ``"300 W"``); bare numbers are SI, except plan masses which
are in amu. Unknown keys are rejected.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from . import physics, transit
from .constants import MATERIALS
from .planner import DesignConstraints
from .units import parse_quantity


def _q(dimension):
    return BeforeValidator(lambda v: parse_quantity(v, dimension))


Length = Annotated[float, _q("length")]
Time = Annotated[float, _q("time")]
Frequency = Annotated[float, _q("frequency")]
Power = Annotated[float, _q("power")]
Velocity = Annotated[float, _q("velocity")]
Density = Annotated[float, _q("density")]
Material = Literal["silica", "silicon"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CavityConfig(_Section):
    length: Length = 130e-6
    mirror_radius: Length = 1.3e-3
    wavelength: Length = 1547e-9
    finesse: float = 34000.0

    @model_validator(mode="after")
    def _stable(self):
        self.geometry()
        return self

    def geometry(self) -> physics.CavityGeometry:
        return physics.CavityGeometry(self.length, self.mirror_radius, self.wavelength, self.finesse)


class ParticleConfig(_Section):
    material: Material = "silica"
    radius: Length = 150e-9
    permittivity: Optional[float] = None
    density: Optional[Density] = None

    @model_validator(mode="after")
    def _valid(self):
        self.particle()
        return self

    def particle(self) -> physics.Particle:
        props = MATERIALS[self.material]
        return physics.Particle(
            self.radius,
            props["permittivity"] if self.permittivity is None else self.permittivity,
            props["density"] if self.density is None else self.density,
        )


class DriveConfig(_Section):
    detuning_kappa: Optional[float] = None
    detuning: Optional[Frequency] = Field(
        None, description="laser minus cavity frequency in Hz (Delta / 2 pi)")
    intracavity_power: Power = 100.0

    @model_validator(mode="after")
    def _one_detuning(self):
        if self.detuning_kappa is not None and self.detuning is not None:
            raise ValueError("give either detuning_kappa or detuning, not both")
        if self.intracavity_power < 0:
            raise ValueError("intracavity_power must be >= 0")
        return self

    def drive(self, mode: physics.CavityMode) -> physics.DriveSettings:
        if self.detuning is not None:
            return physics.DriveSettings(2 * math.pi * self.detuning, self.intracavity_power)
        dk = -2.3 if self.detuning_kappa is None else self.detuning_kappa
        return physics.DriveSettings.in_linewidths(dk, mode, self.intracavity_power)


class SamplingSection(_Section):
    sample_rate: Frequency = transit.DEFAULT_SAMPLE_RATE
    duration: Time = 8e-6
    noise_sigma: float = transit.DEFAULT_NOISE_SIGMA
    seed: int = 0

    @model_validator(mode="after")
    def _valid(self):
        self.sampling()
        return self

    def sampling(self) -> transit.SamplingConfig:
        return transit.SamplingConfig(self.sample_rate, self.duration, self.noise_sigma, self.seed)


class DistributionConfig(_Section):
    vx_mean: Velocity = 15.0
    vx_std: Velocity = 1.5
    vz_mean: Velocity = 3.0
    vz_std: Velocity = 0.5
    y0_max: Length = 0.0

    @model_validator(mode="after")
    def _valid(self):
        self.distribution()
        return self

    def distribution(self) -> transit.VelocityDistribution:
        return transit.VelocityDistribution(self.vx_mean, self.vx_std, self.vz_mean,
                                            self.vz_std, self.y0_max)


class SimulateConfig(_Section):
    count: int = Field(1, ge=1)
    velocity: tuple[Velocity, Velocity, Velocity] = (15.6, 0.0, 3.13)
    offset: tuple[Length, Length, Length] = (0.0, 0.0, 0.0)
    t0: Optional[Time] = None
    distribution: DistributionConfig = DistributionConfig()


class AnalysisConfig(_Section):
    threshold_sigma: float = Field(5.0, gt=0)
    merge_gap: Time = 1e-6
    pad: Time = 1e-6
    scattering_ratio: Optional[float] = Field(
        None, ge=0, description="kappa_s / U0; derived from the particle section when omitted")


class GridSpec(_Section):
    start: float
    stop: float
    num: int = Field(ge=1)
    log: bool = True

    def values(self) -> list[float]:
        if self.log:
            return [float(v) for v in np.geomspace(self.start, self.stop, self.num)]
        return [float(v) for v in np.linspace(self.start, self.stop, self.num)]


def _grid(dimension):
    def parse(v):
        if isinstance(v, dict):
            v = dict(v)
            for key in ("start", "stop"):
                if key in v:
                    v[key] = parse_quantity(v[key], dimension)
            return v
        if isinstance(v, (list, tuple)):
            return [parse_quantity(x, dimension) for x in v]
        return v
    return BeforeValidator(parse)


class PlanConfig(_Section):
    ratios: list[float] = [0.5, 1.0, 1.5]
    powers: Annotated[Union[GridSpec, list[float]], _grid("power")] = [100.0, 300.0]
    masses: Annotated[Union[GridSpec, list[float]], _grid("mass_amu")] = GridSpec(
        start=1e5, stop=1e9, num=20)
    lengths: Annotated[Union[GridSpec, list[float]], _grid("length")] = GridSpec(
        start=5e-6, stop=500e-6, num=50)
    material: Material = "silicon"
    permittivity: Optional[float] = None
    density: Optional[Density] = None
    margin: float = Field(1.0, gt=0)
    max_finesse: float = 2e5
    min_mirror_radius: Length = 20e-6
    length_min: Length = 5e-6
    length_max: Length = 500e-6
    n_lengths: int = 64

    @model_validator(mode="after")
    def _valid(self):
        for q in self.ratios:
            if not 0 < q < 2:
                raise ValueError(f"L/R ratio {q} outside the stable range (0, 2)")
        if not self.ratios or not self.grid("powers") or not self.grid("masses") or not self.grid("lengths"):
            raise ValueError("sweep grids must be non-empty")
        if any(p < 0 for p in self.grid("powers")):
            raise ValueError("powers must be >= 0")
        if any(m <= 0 for m in self.grid("masses")) or any(L <= 0 for L in self.grid("lengths")):
            raise ValueError("masses and lengths must be > 0")
        self.constraints()
        return self

    def grid(self, name) -> list[float]:
        value = getattr(self, name)
        return value.values() if isinstance(value, GridSpec) else list(value)

    def material_constants(self) -> tuple[float, float]:
        props = MATERIALS[self.material]
        return (props["permittivity"] if self.permittivity is None else self.permittivity,
                props["density"] if self.density is None else self.density)

    def constraints(self) -> DesignConstraints:
        return DesignConstraints(self.max_finesse, self.min_mirror_radius,
                                 self.length_min, self.length_max, self.n_lengths)


class RunConfig(_Section):
    cavity: CavityConfig = CavityConfig()
    particle: Optional[ParticleConfig] = None
    drive: DriveConfig = DriveConfig()
    sampling: SamplingSection = SamplingSection()
    simulate: SimulateConfig = SimulateConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    plan: PlanConfig = PlanConfig()

    def mode(self) -> physics.CavityMode:
        return physics.derive_mode(self.cavity.geometry())

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Read a YAML/JSON config file; ``overrides`` are merged into top-level sections."""
    data = {}
    if path is not None:
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a mapping")
    for section, values in overrides.items():
        data.setdefault(section, {})
        data[section] = {**data[section], **values}
    return RunConfig.model_validate(data)
