"""Which cavity designs allow cavity cooling of a given particle.

Cooling needs (A) strong coupling, U0 >= kappa, and (B) resolved sidebands,
omega_z >= kappa. Neither U0 nor omega_z depends on the finesse, while
kappa = c pi / (2 F L), so each condition sets a minimum finesse.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import product

import numpy as np

from . import physics
from .constants import AMU, C
from .physics import CavityGeometry, DriveSettings, Particle

GOLDEN = (math.sqrt(5) - 1) / 2


class Condition(str, Enum):
    STRONG_COUPLING = "strong_coupling"
    RESOLVED_SIDEBAND = "resolved_sideband"
    GEOMETRY = "geometry"


class InfeasibleError(ValueError):
    def __init__(self, condition: Condition, message: str, violation: float = math.inf):
        super().__init__(message)
        self.condition = condition
        self.violation = violation


@dataclass(frozen=True)
class DesignPoint:
    length: float
    ratio: float
    intracavity_power: float
    wavelength: float
    permittivity: float
    density: float

    def __post_init__(self):
        if not 0 < self.ratio < 2:
            raise ValueError(f"L/R ratio must lie in (0, 2) for a stable cavity, got {self.ratio!r}")
        if not self.length > 0 or not self.wavelength > 0:
            raise ValueError("length and wavelength must be > 0")
        if not self.intracavity_power >= 0:
            raise ValueError("intracavity_power must be >= 0")

    @property
    def mirror_radius(self) -> float:
        return self.length / self.ratio


@dataclass(frozen=True)
class DesignConstraints:
    max_finesse: float
    min_mirror_radius: float
    length_min: float = 5e-6
    length_max: float = 500e-6
    n_lengths: int = 64

    def __post_init__(self):
        if not (self.max_finesse > 1 and self.min_mirror_radius > 0
                and 0 < self.length_min < self.length_max and self.n_lengths >= 2):
            raise ValueError("invalid design constraints")


@dataclass(frozen=True)
class FeasibilityResult:
    required_finesse: float
    binding_condition: Condition
    finesse_strong_coupling: float
    finesse_resolved_sideband: float
    U0_over_kappa: float
    omega_z_over_kappa: float
    optimal_length: float


@dataclass(frozen=True)
class CoolingOptimum:
    mass_amu: float
    radius: float
    design: DesignPoint
    feasibility: FeasibilityResult
    grid_lengths: np.ndarray = field(repr=False)
    grid_masses: np.ndarray = field(repr=False)


def _mode(length, ratio, wavelength):
    # finesse does not enter w0 or V_m; a placeholder keeps the geometry valid
    return physics.derive_mode(CavityGeometry(length, length / ratio, wavelength, 2.0))


def decay_rate(finesse, length):
    return C * math.pi / (2 * finesse * length)


def required_finesse(particle: Particle, design: DesignPoint,
                     margin: float = 1.0) -> FeasibilityResult:
    """Minimum finesse meeting both cooling conditions with ``U0 >= margin * kappa``
    and ``omega_z >= margin * kappa``."""
    mode = _mode(design.length, design.ratio, design.wavelength)
    drive = DriveSettings(0.0, design.intracavity_power)
    U0 = physics.dispersive_shift(particle, mode)
    wz = physics.trap_frequency(particle, mode, drive)
    if U0 == 0:
        raise InfeasibleError(Condition.STRONG_COUPLING,
                              "particle does not shift the resonance (permittivity 1)")
    if wz == 0:
        raise InfeasibleError(Condition.RESOLVED_SIDEBAND,
                              "no axial trapping (zero intracavity power or permittivity 1)")
    L = design.length
    F_A = margin * C * math.pi / (2 * L * U0)
    F_B = margin * C * math.pi / (2 * L * wz)
    F = max(F_A, F_B)
    kappa = decay_rate(F, L)
    return FeasibilityResult(
        required_finesse=F,
        binding_condition=Condition.STRONG_COUPLING if F_A >= F_B else Condition.RESOLVED_SIDEBAND,
        finesse_strong_coupling=F_A,
        finesse_resolved_sideband=F_B,
        U0_over_kappa=U0 / kappa,
        omega_z_over_kappa=wz / kappa,
        optimal_length=L,
    )


def _min_radius_at(length, ratio, power, wavelength, permittivity, density, finesse, margin):
    """(minimum radius from condition A, resolved-sideband ratio omega_z / (margin kappa))."""
    mode = _mode(length, ratio, wavelength)
    kappa = decay_rate(finesse, length)
    chi = physics.polarizability_factor(permittivity)
    if chi == 0:
        return math.inf, 0.0
    # omega_z does not depend on the radius; any probe particle will do
    probe = Particle(1e-9, permittivity, density)
    wz = physics.trap_frequency(probe, mode, DriveSettings(0.0, power))
    r3 = margin * kappa * mode.mode_volume / (2 * math.pi * mode.laser_angular_frequency * chi)
    return r3 ** (1 / 3), wz / (margin * kappa)


def min_coolable_mass(permittivity: float, density: float, ratio: float, power: float,
                      wavelength: float, constraints: DesignConstraints,
                      margin: float = 1.0) -> CoolingOptimum:
    """Lightest particle that can be cooled by some cavity within the constraints.

    The finesse is set to its maximum (smallest kappa). On a logarithmic
    length grid, lengths where condition B fails are discarded; at each
    remaining length condition A gives the smallest radius. The best grid cell
    is refined by golden-section search until the mass changes by < 0.1 %.
    """
    lo = max(constraints.length_min, ratio * constraints.min_mirror_radius)
    hi = constraints.length_max
    if not lo < hi:
        raise InfeasibleError(Condition.GEOMETRY,
                              f"no length satisfies L >= ratio * R_min = {lo:.4g} m "
                              f"within the search range up to {hi:.4g} m")
    F = constraints.max_finesse
    args = (ratio, power, wavelength, permittivity, density, F, margin)
    lengths = np.geomspace(lo, hi, constraints.n_lengths)
    radii, sideband = np.array([_min_radius_at(L, *args) for L in lengths]).T
    masses = 4 / 3 * math.pi * radii**3 * density / AMU
    feasible = (sideband >= 1) & np.isfinite(masses)
    if not feasible.any():
        if not np.isfinite(masses).any():
            raise InfeasibleError(Condition.STRONG_COUPLING,
                                  "particle does not shift the resonance (permittivity 1)")
        worst = float(np.max(sideband))
        raise InfeasibleError(Condition.RESOLVED_SIDEBAND,
                              f"resolved-sideband condition fails at every length "
                              f"(best omega_z/kappa = {worst * margin:.3g})", violation=1 - worst)

    def objective(L):
        r, sb = _min_radius_at(L, *args)
        return 4 / 3 * math.pi * r**3 * density / AMU if sb >= 1 else math.inf

    grid_masses = np.where(feasible, masses, np.inf)
    i = int(np.argmin(grid_masses))
    a = lengths[max(i - 1, 0)]
    b = lengths[min(i + 1, len(lengths) - 1)]
    best_L, best_m = lengths[i], grid_masses[i]
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(200):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = objective(d)
        cand_L, cand_m = (c, fc) if fc <= fd else (d, fd)
        if cand_m < best_m:
            change = (best_m - cand_m) / best_m
            best_L, best_m = cand_L, cand_m
            if change < 1e-3 and (b - a) < 1e-3 * best_L:
                break
        elif (b - a) < 1e-3 * best_L:
            break

    radius = float(physics.radius_for_mass(best_m, density))
    design = DesignPoint(float(best_L), ratio, power, wavelength, permittivity, density)
    feas = required_finesse(Particle(radius, permittivity, density), design, margin)
    return CoolingOptimum(float(best_m), radius, design, feas, lengths, grid_masses)


SWEEP_COLUMNS = ("q", "P_cav_W", "mass_amu", "L_m", "R_m", "w0_m", "Vm_m3",
                 "F_A", "F_B", "F_required", "binding")


def sweep_parameter_space(ratios, powers, masses_amu, lengths, wavelength: float,
                          permittivity: float, density: float, margin: float = 1.0,
                          threads: int = 1) -> list[tuple]:
    """Required finesse for every (ratio, power, mass, length) cell.

    Rows follow :data:`SWEEP_COLUMNS` and are ordered lexicographically by
    grid index (ratio outermost, length innermost). Infeasible cells carry
    ``inf`` finesse and the violated condition.
    """
    ratios, powers = list(ratios), list(powers)
    masses_amu, lengths = list(masses_amu), list(lengths)
    if not (ratios and powers and masses_amu and lengths):
        raise ValueError("sweep grids must be non-empty")
    radii = physics.radius_for_mass(masses_amu, density)

    def block(q_p):
        q, P = q_p
        rows = []
        for m, r in zip(masses_amu, radii):
            particle = Particle(float(r), permittivity, density)
            for L in lengths:
                design = DesignPoint(L, q, P, wavelength, permittivity, density)
                mode = _mode(L, q, wavelength)
                try:
                    res = required_finesse(particle, design, margin)
                    F_A, F_B = res.finesse_strong_coupling, res.finesse_resolved_sideband
                    F_req, binding = res.required_finesse, res.binding_condition.value
                except InfeasibleError as exc:
                    F_A = F_B = F_req = math.inf
                    binding = exc.condition.value
                rows.append((q, P, m, L, L / q, mode.waist, mode.mode_volume,
                             F_A, F_B, F_req, binding))
        return rows

    cells = list(product(ratios, powers))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(block, cells))
    else:
        blocks = [block(c) for c in cells]
    return [row for rows in blocks for row in rows]
