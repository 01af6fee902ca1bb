"""Closed-form optics of a symmetric Fabry-Perot cavity and its coupling to a
dielectric sphere.

All quantities are SI. Rates (``kappa``, ``U0``, ``omega_z``, ``kappa_s``) are
angular frequencies in rad/s; ``kappa`` is the half-width at half-maximum of
the intensity resonance, so the linewidth in Hz (FWHM) is ``kappa / pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import AMU, C, MATERIALS


class StabilityError(ValueError):
    """Raised for a cavity geometry outside the stable range 0 < L < 2R."""


@dataclass(frozen=True)
class CavityGeometry:
    """Mirror geometry of a symmetric two-mirror cavity.

    Parameters
    ----------
    length : float
        Mirror separation L [m].
    mirror_radius : float
        Radius of curvature R of both mirrors [m].
    wavelength : float
        Laser wavelength [m].
    finesse : float
        Cavity finesse (> 1).
    """

    length: float
    mirror_radius: float
    wavelength: float
    finesse: float

    def __post_init__(self):
        if not self.mirror_radius > 0:
            raise StabilityError(f"mirror_radius must be > 0, got {self.mirror_radius!r}")
        if not self.length > 0:
            raise StabilityError(f"length must be > 0 (lower stability bound), got {self.length!r}")
        if not self.length < 2 * self.mirror_radius:
            raise StabilityError(
                f"length must be < 2*mirror_radius = {2 * self.mirror_radius:.6g} m "
                f"(upper stability bound), got {self.length:.6g} m")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength!r}")
        if not self.finesse > 1:
            raise ValueError(f"finesse must be > 1, got {self.finesse!r}")


@dataclass(frozen=True)
class CavityMode:
    """Derived TEM00 properties; build with :func:`derive_mode`."""

    length: float
    wavelength: float
    fsr: float
    waist: float
    mode_volume: float
    decay_rate: float
    wavenumber: float
    laser_angular_frequency: float

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.waist**2 / self.wavelength


@dataclass(frozen=True)
class Particle:
    """Dielectric sphere with radius [m], relative permittivity and density [kg/m^3]."""

    radius: float
    permittivity: float
    density: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"particle radius must be > 0, got {self.radius!r}")
        if not self.permittivity >= 1:
            raise ValueError(f"permittivity must be >= 1, got {self.permittivity!r}")
        if not self.density > 0:
            raise ValueError(f"density must be > 0, got {self.density!r}")

    @classmethod
    def of_material(cls, material: str, radius: float) -> Particle:
        props = MATERIALS[material]
        return cls(radius, props["permittivity"], props["density"])

    @property
    def chi(self) -> float:
        return polarizability_factor(self.permittivity)

    @property
    def mass(self) -> float:
        return mass_of(self)[0]


@dataclass(frozen=True)
class DriveSettings:
    """Laser detuning from the empty cavity [rad/s] and one-way intracavity power [W]."""

    detuning: float
    intracavity_power: float = 0.0

    def __post_init__(self):
        if not self.intracavity_power >= 0:
            raise ValueError(f"intracavity_power must be >= 0, got {self.intracavity_power!r}")

    @classmethod
    def in_linewidths(cls, detuning_kappa: float, mode: CavityMode,
                      intracavity_power: float = 0.0) -> DriveSettings:
        return cls(detuning_kappa * mode.decay_rate, intracavity_power)


@dataclass(frozen=True)
class CouplingParams:
    dispersive_shift: float
    trap_frequency: float
    scattering_loss: float


def derive_mode(geometry: CavityGeometry) -> CavityMode:
    """Free spectral range, waist, mode volume and decay rate of a cavity."""
    L, R, lam = geometry.length, geometry.mirror_radius, geometry.wavelength
    waist = math.sqrt(lam / (2 * math.pi) * math.sqrt(L * (2 * R - L)))
    k = 2 * math.pi / lam
    return CavityMode(
        length=L,
        wavelength=lam,
        fsr=C / (2 * L),
        waist=waist,
        mode_volume=math.pi / 4 * waist**2 * L,
        decay_rate=C * math.pi / (2 * geometry.finesse * L),
        wavenumber=k,
        laser_angular_frequency=C * k,
    )


def lorentzian_transmission(detuning, kappa, kappa_extra=0.0):
    """Normalized cavity transmission.

    ``kappa**2 / ((kappa + kappa_extra)**2 + detuning**2)``; equals 1 for the
    empty cavity on resonance. Array inputs broadcast.
    """
    if np.any(np.asarray(kappa) <= 0):
        raise ValueError("kappa must be > 0")
    if np.any(np.asarray(kappa_extra) < 0):
        raise ValueError("kappa_extra must be >= 0")
    return kappa**2 / ((kappa + kappa_extra) ** 2 + np.square(detuning))


def polarizability_factor(permittivity: float) -> float:
    """Clausius-Mossotti factor (eps - 1) / (eps + 2)."""
    if not permittivity >= 1:
        raise ValueError(f"permittivity must be >= 1, got {permittivity!r}")
    return (permittivity - 1) / (permittivity + 2)


def dispersive_shift(particle: Particle, mode: CavityMode) -> float:
    """Resonance shift U0 [rad/s] induced by the particle at a field antinode."""
    return (2 * math.pi * mode.laser_angular_frequency * particle.radius**3
            / mode.mode_volume * particle.chi)


def trap_frequency(particle: Particle, mode: CavityMode, drive: DriveSettings) -> float:
    """Axial trap frequency omega_z [rad/s] in the standing wave; independent of radius."""
    k = mode.wavenumber
    return math.sqrt(24 * k**2 * drive.intracavity_power * particle.chi
                     / (math.pi * mode.waist**2 * particle.density * C))


def scattering_cross_section(particle: Particle, wavenumber: float) -> float:
    """Rayleigh cross-section of a small sphere [m^2]."""
    return 8 * math.pi / 3 * wavenumber**4 * (particle.radius**3 * particle.chi) ** 2


def scattering_loss_rate(particle: Particle, mode: CavityMode) -> float:
    """Extra cavity loss [rad/s] from Rayleigh scattering, particle at an antinode."""
    sigma = scattering_cross_section(particle, mode.wavenumber)
    return C * sigma / (2 * mode.mode_volume)


def scattering_ratio(particle: Particle, wavenumber: float) -> float:
    """kappa_s / U0 for a particle; the mode volume cancels.

    Equal to (2/3) k^3 r^3 chi.
    """
    return 2 / 3 * (wavenumber * particle.radius) ** 3 * particle.chi


def coupling(particle: Particle, mode: CavityMode, drive: DriveSettings) -> CouplingParams:
    return CouplingParams(
        dispersive_shift=dispersive_shift(particle, mode),
        trap_frequency=trap_frequency(particle, mode, drive),
        scattering_loss=scattering_loss_rate(particle, mode),
    )


def mode_intensity(x, y, z, mode: CavityMode):
    """Normalized intensity |f|^2 = cos^2(kz) exp(-2(x^2+y^2)/w0^2).

    The origin is an antinode on the cavity axis at the waist. The waist is
    taken as constant along z, which holds while the Rayleigh range exceeds L/2.
    """
    w0 = mode.waist
    return np.cos(mode.wavenumber * z) ** 2 * np.exp(-2 * (np.square(x) + np.square(y)) / w0**2)


def mass_of(particle: Particle) -> tuple[float, float]:
    """Particle mass as ``(kg, amu)``."""
    kg = 4 / 3 * math.pi * particle.radius**3 * particle.density
    return kg, kg / AMU


def radius_for_mass(mass_amu, density):
    """Inverse of :func:`mass_of` for a sphere of given density."""
    return np.cbrt(np.asarray(mass_amu) * AMU * 3 / (4 * math.pi * density))
