import math

import numpy as np
import pytest

from vibrocontrol.pulses import (BeamProfile, PhaseLock, PulseSpec, TrainSpec,
                                 field_at, field_squared_integral, field_total,
                                 focal_samples, intensity_to_field, make_train,
                                 wavelength_to_omega)

TABLE1 = [-0.776, -0.767, -0.758, -0.749, -0.741]


def test_intensity_conversion_unit():
    assert intensity_to_field(3.50945e16) == pytest.approx(1.0, rel=1e-12)


def test_intensity_conversion_values():
    # sqrt(I / 3.50945e16), evaluated directly
    assert intensity_to_field(1e13) == pytest.approx(math.sqrt(1e13 / 3.50945e16), rel=1e-12)
    assert intensity_to_field(1e13) == pytest.approx(0.016880, abs=5e-7)
    assert intensity_to_field(1e12) == pytest.approx(0.0053380, abs=5e-7)
    with pytest.raises(ValueError):
        intensity_to_field(-1.0)


def test_wavelength_conversion():
    assert wavelength_to_omega(9919.9) == pytest.approx(4.59e-3, rel=1e-3)
    assert wavelength_to_omega(5059.3) == pytest.approx(9.00e-3, rel=1e-3)
    # 3441.0 nm against half the Table-1 energy difference E3-E0
    target = (TABLE1[3] - TABLE1[0]) / 2
    assert wavelength_to_omega(3441.0) == pytest.approx(target, rel=2e-2)


def test_field_envelope_peak():
    spec = PulseSpec(E0=0.02, omega0=0.01, n_cycles=4)
    # sample near the envelope maximum where cos is also ~1
    t_mid = spec.duration / 2
    tc = round(t_mid / spec.period) * spec.period
    assert field_at(spec, tc) == pytest.approx(
        0.02 * math.sin(math.pi * tc / spec.duration) ** 2, rel=1e-12)
    ts = np.linspace(0, spec.duration, 20001)
    assert np.max(np.abs(field_at(spec, ts))) <= 0.02 * (1 + 1e-12)


def test_field_compact_support_bitwise_zero():
    spec = PulseSpec(E0=0.05, omega0=0.009, n_cycles=3, t_start=100.0)
    for t in (-5.0, 0.0, 99.999, spec.t_end + 1e-9, 1e6):
        assert field_at(spec, t) == 0.0
    arr = field_at(spec, np.array([0.0, 50.0, spec.t_end + 1.0]))
    assert np.all(arr == 0.0)


def test_chirp_phase_integral_exact_total():
    spec = PulseSpec(E0=0.0169, omega0=0.009, n_cycles=7)
    total = field_squared_integral(spec, spec.t_end)
    # all oscillatory terms vanish at the pulse end: exactly (3/16) E0^2 T
    assert total == pytest.approx((3 / 16) * spec.E0**2 * spec.duration, rel=1e-12)
    # matches numerical quadrature of the unchirped field squared
    ts = np.linspace(0, spec.duration, 400001)
    unchirped = field_at(PulseSpec(E0=spec.E0, omega0=spec.omega0,
                                   n_cycles=spec.n_cycles), ts)
    assert total == pytest.approx(np.trapezoid(unchirped**2, ts), rel=1e-7)


def test_chirp_monotone_with_sign():
    spec = PulseSpec(E0=0.0169, omega0=0.009, n_cycles=5, chirp_a=-1.33)
    ts = np.linspace(0, spec.duration, 500)
    delta = spec.chirp_a * field_squared_integral(spec, ts)
    assert np.all(np.diff(delta) <= 1e-15)  # monotone, sign of chirp_a
    spec2 = PulseSpec(E0=0.0169, omega0=0.009, n_cycles=5, chirp_a=+0.7)
    delta2 = spec2.chirp_a * field_squared_integral(spec2, ts)
    assert np.all(np.diff(delta2) >= -1e-15)


def _carrier_crests(f, ts, floor):
    k = np.where((f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:]) & (f[1:-1] > floor))[0] + 1
    return ts[k], f[k]


def test_chirped_envelope_invariance():
    # every carrier crest of the chirped pulse rides on the same sin^2
    # intensity envelope as the unchirped pulse (the chirp is phase-only)
    n = 60
    E0 = 0.0169
    dur = n * 2 * math.pi / 0.009
    ts = np.linspace(0, dur, 600000)
    for chirp_a in (0.0, -1.33):
        f = np.abs(field_at(PulseSpec(E0=E0, omega0=0.009, n_cycles=n,
                                      chirp_a=chirp_a), ts))
        t_pk, f_pk = _carrier_crests(f, ts, 0.1 * E0)
        env = E0 * np.sin(math.pi * t_pk / dur) ** 2
        assert np.max(np.abs(f_pk - env) / env) < 5e-3


def test_train_degenerate_single():
    p = PulseSpec(E0=0.01, omega0=0.009, n_cycles=10)
    train = make_train(TrainSpec(pulse=p, n_pulses=1), delta_E=0.018)
    assert len(train) == 1
    assert train[0] == p


def test_train_locked_phases_unchirped():
    # chirp-free: the lock condition is the bare free-evolution phase
    p = PulseSpec(E0=0.0169, omega0=0.009, n_cycles=10)
    dE = 0.018005
    spec = TrainSpec(pulse=p, n_pulses=28, gap_cycles=1.0, phase_lock=PhaseLock.LOCKED)
    train = make_train(spec, delta_E=dE)
    assert len(train) == 28
    starts = np.array([q.t_start for q in train])
    delays = np.diff(starts)
    requested = p.duration + 1.0 * p.period
    assert np.all(delays >= requested - 1e-9)
    phase = dE * delays
    assert np.all(np.abs(phase / (2 * math.pi) - np.round(phase / (2 * math.pi))) < 1e-10)


def test_train_locked_phases_chirped():
    # chirped: the state keeps the in-pulse Stark phase, so the lock is on
    # delta_E * t_delay + 2 a * (integral of E^2 over one pulse)
    p = PulseSpec(E0=0.0169, omega0=0.009, n_cycles=10, chirp_a=-1.33)
    dE = 0.018005
    train = make_train(TrainSpec(pulse=p, n_pulses=5, gap_cycles=1.0,
                                 phase_lock=PhaseLock.LOCKED), delta_E=dE)
    delays = np.diff([q.t_start for q in train])
    stark = 2 * p.chirp_a * field_squared_integral(p, p.t_end)
    requested = p.duration + 1.0 * p.period
    assert np.all(delays >= requested - 1e-9)
    phase = dE * delays + stark
    assert np.all(np.abs(phase / (2 * math.pi) - np.round(phase / (2 * math.pi))) < 1e-10)


def test_train_free_uses_gap_verbatim():
    p = PulseSpec(E0=0.0169, omega0=0.009, n_cycles=10)
    train = make_train(TrainSpec(pulse=p, n_pulses=3, gap_cycles=1.5,
                                 phase_lock=PhaseLock.FREE), delta_E=0.018)
    delays = np.diff([q.t_start for q in train])
    assert np.allclose(delays, p.duration + 1.5 * p.period, rtol=0, atol=1e-12)


def test_field_total_superposes():
    p1 = PulseSpec(E0=0.01, omega0=0.009, n_cycles=2)
    p2 = PulseSpec(E0=0.02, omega0=0.005, n_cycles=2, t_start=100.0)
    t = 150.0
    assert field_total([p1, p2], t) == field_at(p1, t) + field_at(p2, t)


def test_focal_samples():
    beam = BeamProfile(w0=1.0, I_peak=1e13, n_rings=200)
    samples = focal_samples(beam)
    intensities = np.array([s[0] for s in samples])
    weights = np.array([s[1] for s in samples])
    radii = np.array([s[2] for s in samples])
    assert intensities[0] == pytest.approx(1e13, rel=1e-3)   # innermost ~ on-axis
    r_max = beam.r_max_w0 * beam.w0
    assert weights.sum() == pytest.approx(math.pi * r_max**2, rel=1e-10)
    # invert the Gaussian at 60% of peak
    r60 = beam.w0 * math.sqrt(math.log(1 / 0.6) / 2)
    assert beam.intensity(r60) == pytest.approx(0.6e13, rel=1e-12)
    k = np.argmin(np.abs(radii - r60))
    assert intensities[k] == pytest.approx(6.0e12, rel=2e-2)


def test_pulse_validation():
    with pytest.raises(ValueError):
        PulseSpec(E0=-1.0, omega0=0.01, n_cycles=1)
    with pytest.raises(ValueError):
        PulseSpec(E0=1.0, omega0=0.0, n_cycles=1)
    with pytest.raises(ValueError):
        PulseSpec(E0=1.0, omega0=0.01, n_cycles=0)
    with pytest.raises(ValueError):
        TrainSpec(pulse=PulseSpec(E0=1, omega0=1, n_cycles=1), n_pulses=0)
    with pytest.raises(ValueError):
        BeamProfile(w0=0.0, I_peak=1e12)
