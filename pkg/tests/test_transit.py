import math

import numpy as np
import pytest

from nanocavity import physics, transit
from nanocavity.physics import DriveSettings, Particle
from nanocavity.transit import (SamplingConfig, Trajectory, VelocityDistribution,
                                generate_event_batch, simulate_transit)


def ref_traj(z0=0.0, y0=0.0, vz=3.13):
    return Trajectory((15.6, 0.0, vz), (0.0, y0, z0), t0=4e-6)


def _direct(t, traj, particle, mode, drive):
    # the forward model written out longhand, independent of transit.shift_and_loss
    k, w0 = 2 * math.pi / mode.wavelength, mode.waist
    x = traj.offset[0] + traj.velocity[0] * (t - traj.t0)
    y = traj.offset[1] + traj.velocity[1] * (t - traj.t0)
    z = traj.offset[2] + traj.velocity[2] * (t - traj.t0)
    I = np.cos(k * z) ** 2 * np.exp(-2 * (x**2 + y**2) / w0**2)
    chi = (particle.permittivity - 1) / (particle.permittivity + 2)
    U0 = 2 * math.pi * mode.laser_angular_frequency * particle.radius**3 / mode.mode_volume * chi
    ks = 299792458.0 * (8 * math.pi / 3) * k**4 * (particle.radius**3 * chi) ** 2 / (2 * mode.mode_volume)
    kap = mode.decay_rate
    return kap**2 / ((kap + ks * I) ** 2 + (drive.detuning + U0 * I) ** 2)


def test_noiseless_trace_matches_longhand(ref_mode, silica150, ref_drive):
    traj = ref_traj(z0=0.1e-6)
    trace = simulate_transit(traj, silica150, ref_mode, ref_drive, SamplingConfig(noise_sigma=0))
    expected = _direct(trace.time, traj, silica150, ref_mode, ref_drive)
    np.testing.assert_allclose(trace.transmission, expected, rtol=1e-12)
    assert len(trace) == 800
    assert trace.sample_rate == pytest.approx(100e6)


def test_zero_coupling_flat(ref_mode, ref_drive):
    vac = Particle(150e-9, 1.0, 2200)
    trace = simulate_transit(ref_traj(), vac, ref_mode, ref_drive, SamplingConfig(noise_sigma=0))
    np.testing.assert_allclose(trace.transmission, 1 / (1 + 2.3**2), rtol=1e-12)


def test_reference_transit_structure(ref_mode, silica150, ref_drive):
    traj = ref_traj()
    # envelope 1/e^2 half-duration and fringe frequency
    assert ref_mode.waist / 15.6 == pytest.approx(0.757e-6, rel=1e-3)
    assert transit.fringe_frequency(3.13, ref_mode.wavelength) == pytest.approx(4.047e6, rel=1e-3)
    t = np.arange(8000) / 1e9
    shift, _ = transit.shift_and_loss(traj, silica150, ref_mode, t)
    U0 = physics.dispersive_shift(silica150, ref_mode)
    env = np.exp(-2 * (15.6 * (t - traj.t0)) ** 2 / ref_mode.waist**2)
    inside = env > math.exp(-2)
    s = shift[inside]
    maxima = np.sum((s[1:-1] > s[:-2]) & (s[1:-1] >= s[2:]))
    # ~6 fringes inside the 1/e^2 envelope; with z0 = 0 a maximum sits at t0
    assert 6 <= maxima <= 7
    trace = simulate_transit(traj, silica150, ref_mode, ref_drive, SamplingConfig(noise_sigma=0))
    baseline = 1 / (1 + 2.3**2)
    assert trace.transmission.max() > baseline + 0.5
    assert shift.max() == pytest.approx(U0, rel=1e-6)
    assert trace.metadata["quasi_static_ratio"] == pytest.approx(4.047e6 / 16.957e6, rel=1e-3)


def test_no_dip_without_scattering(monkeypatch, ref_mode, silica150, ref_drive):
    cfg = SamplingConfig(noise_sigma=0)
    baseline = float(physics.lorentzian_transmission(ref_drive.detuning, ref_mode.decay_rate))
    monkeypatch.setattr(physics, "scattering_loss_rate", lambda p, m: 0.0)
    lossless = simulate_transit(ref_traj(), silica150, ref_mode, ref_drive, cfg)
    assert lossless.transmission.min() >= baseline - 1e-15


def test_lossless_dip_only_past_double_detuning(monkeypatch, ref_mode, ref_drive):
    # with kappa_s = 0, T < baseline exactly where U0 I > 2|Delta|
    big = Particle(250e-9, 2.07, 2200)
    monkeypatch.setattr(physics, "scattering_loss_rate", lambda p, m: 0.0)
    traj = ref_traj()
    trace = simulate_transit(traj, big, ref_mode, ref_drive, SamplingConfig(noise_sigma=0))
    shift, _ = transit.shift_and_loss(traj, big, ref_mode, trace.time)
    baseline = 1 / (1 + 2.3**2)
    below = trace.transmission < baseline * (1 - 1e-12)
    over = shift > 2 * abs(ref_drive.detuning) * (1 + 1e-9)
    assert below.any()
    np.testing.assert_array_equal(below, over)


def test_scattering_deepens_dip(ref_mode, ref_drive):
    big = Particle(250e-9, 2.07, 2200)
    cfg = SamplingConfig(noise_sigma=0)
    with_loss = simulate_transit(ref_traj(), big, ref_mode, ref_drive, cfg)
    ks = physics.scattering_loss_rate(big, ref_mode)
    assert ks > 0
    baseline = 1 / (1 + 2.3**2)
    assert with_loss.transmission.min() < baseline - 1e-3


def test_reference_particle_dip_is_marginal(ref_mode, silica150, ref_drive):
    # U0 ~ 4.47 kappa < 2|Delta| = 4.6 kappa: no sample drops below baseline
    trace = simulate_transit(ref_traj(), silica150, ref_mode, ref_drive, SamplingConfig(noise_sigma=0))
    assert trace.transmission.min() >= 1 / (1 + 2.3**2) - 1e-12


def test_baseline_statistics(ref_mode, silica150, ref_drive):
    sigma = 0.02
    cfg = SamplingConfig(duration=40e-6, noise_sigma=sigma, rng_seed=3)
    traj = Trajectory((15.6, 0, 3.13), (0, 0, 0), t0=20e-6)
    trace = simulate_transit(traj, silica150, ref_mode, ref_drive, cfg)
    far = np.abs(trace.time - 20e-6) > 6e-6
    seg = trace.transmission[far]
    assert abs(seg.mean() - 1 / (1 + 2.3**2)) < 5 * sigma / math.sqrt(len(seg))


def test_envelope_symmetry(ref_mode, silica150, ref_drive):
    traj = Trajectory((15.6, 0, 3.13), (0, 0, 0), t0=4e-6)
    trace = simulate_transit(traj, silica150, ref_mode, ref_drive, SamplingConfig(noise_sigma=0))
    i0 = int(np.argmin(np.abs(trace.time - 4e-6)))
    k = np.arange(1, 350)
    np.testing.assert_allclose(trace.transmission[i0 + k], trace.transmission[i0 - k], rtol=1e-9)


@pytest.mark.parametrize("y0_frac", [0.0, 0.5, 1.0])
def test_impact_parameter_law(ref_mode, silica150, y0_frac):
    y0 = y0_frac * ref_mode.waist
    traj = Trajectory((15.6, 0, 0.0), (0, y0, 0), t0=4e-6)
    t = np.arange(800) / 100e6
    shift, _ = transit.shift_and_loss(traj, silica150, ref_mode, t)
    U0 = physics.dispersive_shift(silica150, ref_mode)
    assert shift.max() == pytest.approx(U0 * math.exp(-2 * y0**2 / ref_mode.waist**2), rel=1e-9)


def test_rejects_coarse_sampling(ref_mode, silica150, ref_drive):
    with pytest.raises(ValueError, match="at least 4.04"):
        simulate_transit(ref_traj(), silica150, ref_mode, ref_drive,
                         SamplingConfig(sample_rate=20e6))


def test_rejects_non_adiabatic(ref_mode, silica150, ref_drive):
    fast = Trajectory((15.6, 0, 20.0), (0, 0, 0), t0=4e-6)  # 25.9 MHz fringes > 17 MHz
    with pytest.raises(ValueError, match="adiabatic"):
        simulate_transit(fast, silica150, ref_mode, ref_drive, SamplingConfig(sample_rate=1e9))


def test_noise_default_gives_snr_35(ref_mode, silica150, ref_drive):
    U0 = physics.dispersive_shift(silica150, ref_mode)
    ks = physics.scattering_loss_rate(silica150, ref_mode)
    d = np.linspace(0, U0, 100001)
    T = physics.lorentzian_transmission(ref_drive.detuning + d, ref_mode.decay_rate, ks / U0 * d)
    snr = (T.max() - 1 / (1 + 2.3**2)) / transit.DEFAULT_NOISE_SIGMA
    assert snr == pytest.approx(35, abs=0.5)


def test_batch_19(ref_mode, silica150, ref_drive):
    events = generate_event_batch(VelocityDistribution(), 19, silica150, ref_mode, ref_drive,
                                  SamplingConfig(rng_seed=7))
    assert len(events) == 19
    vx = np.array([traj.velocity[0] for _, traj in events])
    vz = np.array([traj.velocity[2] for _, traj in events])
    assert 12 < vx.mean() < 18 and 2 < vz.mean() < 4
    assert len({tr.metadata["sampling"]["rng_seed"] for tr, _ in events}) == 19


def test_batch_single_noiseless_equals_simulate(ref_mode, silica150, ref_drive):
    cfg = SamplingConfig(noise_sigma=0.0, rng_seed=11)
    [(trace, traj)] = generate_event_batch(VelocityDistribution(), 1, silica150, ref_mode,
                                           ref_drive, cfg)
    direct = simulate_transit(traj, silica150, ref_mode, ref_drive, cfg)
    np.testing.assert_array_equal(trace.transmission, direct.transmission)


def test_batch_determinism(ref_mode, silica150, ref_drive):
    cfg = SamplingConfig(rng_seed=5)
    dist = VelocityDistribution(y0_max=3e-6)
    a = generate_event_batch(dist, 8, silica150, ref_mode, ref_drive, cfg)
    b = generate_event_batch(dist, 8, silica150, ref_mode, ref_drive, cfg)
    c = generate_event_batch(dist, 8, silica150, ref_mode, ref_drive, cfg, threads=4)
    for (ta, ja), (tb, jb), (tc, jc) in zip(a, b, c):
        assert ja == jb == jc
        assert ta.transmission.tobytes() == tb.transmission.tobytes() == tc.transmission.tobytes()


def test_batch_prefix_stable(ref_mode, silica150, ref_drive):
    # event i depends only on (seed, i), not on batch size
    cfg = SamplingConfig(rng_seed=9)
    small = generate_event_batch(VelocityDistribution(), 3, silica150, ref_mode, ref_drive, cfg)
    large = generate_event_batch(VelocityDistribution(), 6, silica150, ref_mode, ref_drive, cfg)
    for (ts, js), (tl, jl) in zip(small, large):
        assert js == jl
        np.testing.assert_array_equal(ts.transmission, tl.transmission)


def test_invalid_configs():
    with pytest.raises(ValueError):
        SamplingConfig(sample_rate=0)
    with pytest.raises(ValueError):
        SamplingConfig(noise_sigma=-1)
    with pytest.raises(ValueError):
        DriveSettings(0.0, -1.0)
    with pytest.raises(ValueError):
        generate_event_batch(VelocityDistribution(), 0, None, None, None, SamplingConfig())
