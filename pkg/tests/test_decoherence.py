import math

import numpy as np
import pytest

from digiatom.decoherence import DecoherenceParams, contrast_for, echo_time, hold_echo_contrast, predict_contrast
from digiatom.sequence import GeometrySpec, build_geometry, parse_sequence

DEFAULTS = DecoherenceParams()


def test_per_shift_factor():
    # (1 - 0.006) * 0.99**2 * (1 - 0.017), multiplied out by hand
    assert DEFAULTS.per_shift_factor == pytest.approx(0.957658, abs=5e-7)


def test_no_shifts_no_echo():
    assert predict_contrast(parse_sequence("Q(0) Q(0)"), DecoherenceParams(C0=0.9)) == 0.9


def test_twelve_shifts():
    c12 = predict_contrast(build_geometry(GeometrySpec("single", 12)), DEFAULTS)
    assert c12 == pytest.approx(0.596, abs=1e-3)
    assert c12 == pytest.approx(0.59501, abs=1e-5)


def test_factor_decomposition():
    idle_only = DecoherenceParams(f_shift=1.0, kappa_extra=0.0)
    with_fidelity = DecoherenceParams(kappa_extra=0.0)
    for n in (2, 10, 24):
        assert contrast_for(n, 0.0, idle_only) == pytest.approx(0.994**n, rel=1e-13)
        assert contrast_for(n, 0.0, with_fidelity) == pytest.approx(0.994**n * 0.9801**n, rel=1e-13)
        assert contrast_for(n, 0.0, DEFAULTS) == pytest.approx(0.994**n * 0.9801**n * 0.983**n, rel=1e-13)


def test_log_contrast_linear_in_n():
    n = np.arange(0, 50, 2)
    logc = np.log([contrast_for(int(k), 300e-6, DEFAULTS) for k in n])
    second = np.diff(logc, 2)
    assert np.max(np.abs(second)) < 1e-12


class TestHoldEcho:
    def test_zero_time(self):
        assert hold_echo_contrast(0.7, 0.0, 1e-3) == 0.7

    def test_decay_constant(self):
        assert hold_echo_contrast(1.0, 1e-3, 1e-3) == pytest.approx(math.exp(-1))
        assert hold_echo_contrast(0.5, 2e-3, 2e-3) == pytest.approx(0.5 * 0.36788, abs=1e-5)

    def test_monotone(self):
        t = np.linspace(0, 5e-3, 200)
        for T in (1e-4, 1.2e-3, 1e-2):
            c = [hold_echo_contrast(1.0, x, T) for x in t]
            assert all(a >= b for a, b in zip(c, c[1:]))

    def test_negative_time(self):
        with pytest.raises(ValueError):
            hold_echo_contrast(1.0, -1e-6, 1e-3)


def test_echo_time_counts_idles_and_windows():
    seq = build_geometry(GeometrySpec("hold", 4, t_hold=424e-6))
    assert echo_time(seq) == pytest.approx(400e-6)
    acc = build_geometry(GeometrySpec("accel", 4, accel=30.0, t_acc=20e-6))
    assert echo_time(acc) == pytest.approx(20e-6)


def test_acceleration_adds_no_loss():
    base = build_geometry(GeometrySpec("accel", 12, accel=0.0, t_acc=20e-6))
    for a in (9.8, 49.0, -30.0):
        acc = build_geometry(GeometrySpec("accel", 12, accel=a, t_acc=20e-6))
        assert predict_contrast(acc, DEFAULTS) == predict_contrast(base, DEFAULTS)


@pytest.mark.parametrize("field,values", [
    ("kappa_idle", [0.0, 0.01, 0.1]),
    ("kappa_extra", [0.0, 0.02, 0.2]),
    ("gamma_loss", [0.0, 0.5, 1.0]),
])
def test_monotone_in_rates(field, values):
    seq = build_geometry(GeometrySpec("hold", 8, t_hold=200e-6))
    c = [predict_contrast(seq, DecoherenceParams(**{field: v})) for v in values]
    assert all(a >= b for a, b in zip(c, c[1:]))


def test_monotone_in_fidelity_and_n():
    c = [contrast_for(8, 0.0, DecoherenceParams(f_shift=f)) for f in (1.0, 0.99, 0.9)]
    assert c[0] > c[1] > c[2]
    cn = [contrast_for(n, 0.0, DEFAULTS) for n in range(0, 40, 2)]
    assert all(a > b for a, b in zip(cn, cn[1:]))


@pytest.mark.parametrize("kwargs", [
    dict(kappa_idle=-0.1), dict(kappa_extra=1.5), dict(f_shift=0.0), dict(T_hold_gauss=0.0), dict(C0=1.2),
])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        DecoherenceParams(**kwargs)
