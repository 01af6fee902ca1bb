import math

import numpy as np
import pytest

from nanocavity import planner
from nanocavity.constants import AMU, MATERIALS
from nanocavity.physics import Particle
from nanocavity.planner import (Condition, DesignConstraints, DesignPoint, InfeasibleError,
                                min_coolable_mass, required_finesse, sweep_parameter_space)

LAM = 1547e-9
SI = MATERIALS["silicon"]
C = 299792458.0


def design(L=30e-6, q=1.5, P=300.0, material=SI):
    return DesignPoint(L, q, P, LAM, material["permittivity"], material["density"])


def silicon(r):
    return Particle(r, SI["permittivity"], SI["density"])


def test_design_point_example():
    res = required_finesse(silicon(12e-9), design())
    assert res.finesse_strong_coupling == pytest.approx(1.52e5, rel=0.01)
    assert res.finesse_resolved_sideband == pytest.approx(1.57e5, rel=0.01)
    assert res.required_finesse == pytest.approx(1.6e5, rel=0.03)
    assert res.required_finesse < 2e5
    assert res.binding_condition is Condition.RESOLVED_SIDEBAND


def test_equality_at_required_finesse():
    for r in (5e-9, 12e-9, 40e-9):
        res = required_finesse(silicon(r), design())
        binding = min(res.U0_over_kappa, res.omega_z_over_kappa)
        other = max(res.U0_over_kappa, res.omega_z_over_kappa)
        assert binding == pytest.approx(1.0, rel=1e-9)
        assert other >= 1.0


def test_vacuum_particle_infeasible():
    with pytest.raises(InfeasibleError) as exc:
        required_finesse(Particle(12e-9, 1.0, 2329), design())
    assert exc.value.condition is Condition.STRONG_COUPLING


def test_zero_power_infeasible():
    with pytest.raises(InfeasibleError) as exc:
        required_finesse(silicon(12e-9), design(P=0.0))
    assert exc.value.condition is Condition.RESOLVED_SIDEBAND


def test_radius_doubling():
    a = required_finesse(silicon(12e-9), design())
    b = required_finesse(silicon(24e-9), design())
    assert b.finesse_strong_coupling == pytest.approx(a.finesse_strong_coupling / 8, rel=1e-12)
    assert b.finesse_resolved_sideband == pytest.approx(a.finesse_resolved_sideband, rel=1e-12)


def test_plateau_for_large_masses():
    F_B = None
    for r in np.geomspace(30e-9, 300e-9, 10):
        res = required_finesse(silicon(r), design())
        assert res.finesse_strong_coupling < res.finesse_resolved_sideband
        assert res.required_finesse == res.finesse_resolved_sideband
        F_B = F_B or res.required_finesse
        assert res.required_finesse == pytest.approx(F_B, rel=1e-12)


def test_design_point_rejects_unstable_ratio():
    with pytest.raises(ValueError):
        design(q=2.0)
    with pytest.raises(ValueError):
        design(L=-1e-6)


# -- minimum coolable mass ---------------------------------------------------

DESIGN_LIMITS = DesignConstraints(max_finesse=2e5, min_mirror_radius=20e-6)


def test_cooling_claim():
    opt = min_coolable_mass(SI["permittivity"], SI["density"], 1.5, 300.0, LAM, DESIGN_LIMITS)
    assert opt.mass_amu <= 1e7
    assert opt.radius <= 12e-9
    assert opt.design.mirror_radius >= 20e-6 * (1 - 1e-12)
    assert opt.design.length < 2 * opt.design.mirror_radius
    # at the optimum the maximum finesse is just enough
    assert opt.feasibility.required_finesse == pytest.approx(2e5, rel=1e-6)


def _oracle(eps, rho, q, P, constraints, n=400):
    """Exhaustive (L, r) scan written from the closed forms, independent of the package."""
    lo = max(constraints.length_min, q * constraints.min_mirror_radius)
    Ls = np.geomspace(lo, constraints.length_max, n)[:, None]
    rs = np.geomspace(1e-9, 1e-6, n)[None, :]
    R = Ls / q
    k = 2 * math.pi / LAM
    w0sq = LAM / (2 * math.pi) * np.sqrt(Ls * (2 * R - Ls))
    Vm = math.pi / 4 * w0sq * Ls
    chi = (eps - 1) / (eps + 2)
    U0 = 2 * math.pi * (C * k) * rs**3 * chi / Vm
    wz = np.sqrt(24 * k**2 * P * chi / (math.pi * w0sq * rho * C))
    kappa = C * math.pi / (2 * constraints.max_finesse * Ls)
    ok = (U0 >= kappa) & (wz >= kappa)
    if not ok.any():
        return None, rs[0, 1] / rs[0, 0]
    r_min = np.min(np.where(ok, rs, np.inf))
    return 4 / 3 * math.pi * r_min**3 * rho / AMU, rs[0, 1] / rs[0, 0]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_brute_force_oracle(seed):
    rng = np.random.default_rng(seed)
    material = MATERIALS[rng.choice(sorted(MATERIALS))]
    q, P = float(rng.uniform(0.3, 1.9)), float(rng.uniform(50, 1000))
    eps, rho = material["permittivity"], material["density"]
    m_oracle, r_step = _oracle(eps, rho, q, P, DESIGN_LIMITS)
    try:
        opt = min_coolable_mass(eps, rho, q, P, LAM, DESIGN_LIMITS)
    except InfeasibleError:
        assert m_oracle is None
        return
    assert m_oracle is not None
    # grid minimum sits on or above the continuous optimum, within one radius cell
    assert opt.mass_amu <= m_oracle * (1 + 1e-9)
    assert m_oracle <= opt.mass_amu * r_step**3 * (1 + 1e-3)


def test_design_point_against_oracle():
    m_oracle, r_step = _oracle(SI["permittivity"], SI["density"], 1.5, 300.0, DESIGN_LIMITS)
    opt = min_coolable_mass(SI["permittivity"], SI["density"], 1.5, 300.0, LAM, DESIGN_LIMITS)
    assert opt.mass_amu <= m_oracle * (1 + 1e-9) <= opt.mass_amu * r_step**3 * (1 + 1e-3)


def test_zero_power_no_coolable_mass():
    with pytest.raises(InfeasibleError) as exc:
        min_coolable_mass(SI["permittivity"], SI["density"], 1.5, 0.0, LAM, DESIGN_LIMITS)
    assert exc.value.condition is Condition.RESOLVED_SIDEBAND


def test_empty_length_range():
    tight = DesignConstraints(2e5, min_mirror_radius=400e-6)
    with pytest.raises(InfeasibleError) as exc:
        min_coolable_mass(SI["permittivity"], SI["density"], 1.5, 300.0, LAM, tight)
    assert exc.value.condition is Condition.GEOMETRY


def test_relaxing_mirror_bound_never_hurts():
    prev = math.inf
    for r_min in (60e-6, 40e-6, 20e-6, 10e-6, 5e-6):
        c = DesignConstraints(2e5, r_min)
        m = min_coolable_mass(SI["permittivity"], SI["density"], 1.0, 300.0, LAM, c).mass_amu
        assert m <= prev * (1 + 1e-3)
        prev = m


# -- sweep -------------------------------------------------------------------

def _sweep(threads=1):
    masses = np.geomspace(1e5, 1e9, 20)
    lengths = np.geomspace(5e-6, 500e-6, 50)
    return sweep_parameter_space([0.5, 1.0, 1.5], [100.0, 300.0], masses, lengths, LAM,
                                 SI["permittivity"], SI["density"], threads=threads)


def test_sweep_cardinality_and_order():
    rows = _sweep()
    assert len(rows) == 6000
    keys = [(r[0], r[1], r[2], r[3]) for r in rows]
    assert keys == sorted(keys)
    assert all(len(r) == len(planner.SWEEP_COLUMNS) for r in rows)


def test_sweep_cells_are_pure():
    rows = _sweep()
    rng = np.random.default_rng(0)
    for i in rng.choice(len(rows), 25, replace=False):
        q, P, m, L, R, *_, F_req, binding = rows[i]
        r = float((3 * m * AMU / (4 * math.pi * SI["density"])) ** (1 / 3))
        res = required_finesse(silicon(r), design(L, q, P))
        assert res.required_finesse == pytest.approx(F_req, rel=1e-12)
        assert res.binding_condition.value == binding
        assert R == pytest.approx(L / q)


def test_sweep_non_increasing_in_mass():
    rows = _sweep()
    table = {}
    for q, P, m, L, *_, F_req, _b in rows:
        table.setdefault((q, P, L), []).append((m, F_req))
    for series in table.values():
        F = [f for _, f in sorted(series)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(F, F[1:]))


def test_sweep_thread_determinism():
    assert _sweep(1) == _sweep(4)


def test_sweep_rejects_empty_grid():
    with pytest.raises(ValueError):
        sweep_parameter_space([], [1.0], [1e6], [1e-5], LAM, 12.1, 2329)
