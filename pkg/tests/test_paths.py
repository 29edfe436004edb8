import math

import pytest
from conftest import brute_force_phase
from hypothesis import given, settings
from hypothesis import strategies as st

from digiatom.constants import G0, HBAR, M_CS133, LatticeConfig, TimingParams
from digiatom.paths import (
    closed_form_acceleration_phase,
    closed_form_diamond_phase,
    closed_form_hold_phase,
    compute_paths,
    gradient_equivalent_acceleration,
    phase_integral,
    sequence_phase,
    signed_area,
    spacetime_area,
)
from digiatom.potentials import GaussianBeamAxial, InertialWindow, LinearGradient, Zero
from digiatom.sequence import GeometrySpec, InvalidSequenceError, build_geometry, parse_sequence, serialize_sequence

D = 433e-9


def single(n, **kw):
    return build_geometry(GeometrySpec("single", n, **kw))


class TestComputePaths:
    def test_two_shift_ramps(self, lat):
        paths = compute_paths(single(2), lat)
        shifts = [s for s in paths.segments if abs(s.duration - 18e-6) < 1e-15]
        assert len(shifts) == 2
        a, b = shifts
        assert (a.xL0 - a.xR0, a.xL1 - a.xR1) == (0.0, pytest.approx(D))
        assert (b.xL0 - b.xR0, b.xL1 - b.xR1) == (pytest.approx(D), 0.0)

    def test_twelve_shift_max_separation(self, lat):
        assert compute_paths(single(12), lat).max_separation() == pytest.approx(2.598e-6, abs=1e-12)

    def test_forty_eight_shift_separation(self, lat):
        sep = compute_paths(single(48), lat).max_separation()
        assert sep == pytest.approx(24 * D)
        assert sep > 10e-6

    def test_tiling_and_spins(self, lat):
        seq = build_geometry(GeometrySpec("hold", 8, t_hold=300e-6))
        paths = compute_paths(seq, lat)
        segs = paths.segments
        assert segs[0].t0 == 0.0
        assert paths.total_duration == pytest.approx(seq.total_duration)
        for a, b in zip(segs, segs[1:]):
            assert a.t1 == b.t0
            assert (a.xL1, a.xR1) == (b.xL0, b.xR0)
            assert b.spinL == (-a.spinL if type(seq.blocks[a.block_index]).__name__ == "PiPulse" else a.spinL)
        assert all(s.spinL != s.spinR for s in segs)
        assert segs[0].xL0 == segs[0].xR0 and segs[-1].xL1 == segs[-1].xR1

    def test_rejects_invalid(self, lat):
        with pytest.raises(InvalidSequenceError):
            compute_paths(parse_sequence("Q(0) S+ Q(0)"), lat)

    def test_csv_export(self, lat):
        text = compute_paths(single(2), lat).to_csv()
        lines = text.strip().splitlines()
        assert lines[0] == "t,xL,xR,spinL"
        assert len(lines) == 1 + 4 + 1


class TestArea:
    def test_two_shift_triangle(self, lat):
        assert spacetime_area(compute_paths(single(2), lat)) == pytest.approx(7.794e-12, rel=1e-12)

    def test_four_shift(self, lat):
        assert spacetime_area(compute_paths(single(4), lat)) == pytest.approx(D * 96e-6, rel=1e-12)

    @pytest.mark.parametrize("n", [4, 8, 12])
    @pytest.mark.parametrize("t_hold", [24e-6, 100e-6, 777e-6])
    def test_hold_rectangle(self, lat, n, t_hold):
        extra = spacetime_area(compute_paths(build_geometry(GeometrySpec("hold", n, t_hold=t_hold)), lat)) - (
            spacetime_area(compute_paths(single(n), lat))
        )
        assert extra == pytest.approx(n / 2 * D * t_hold, rel=1e-10)

    def test_zero_only_when_not_separated(self, lat):
        assert spacetime_area(compute_paths(parse_sequence("Q(0) P I(5) Q(0)"), lat)) == 0.0

    def test_double_diamond_area_positive_signed_zero(self, lat):
        paths = compute_paths(build_geometry(GeometrySpec("double", 8)), lat)
        assert spacetime_area(paths) > 0
        assert abs(signed_area(paths)) < 1e-25


class TestPhaseIntegral:
    def test_zero_potential(self, lat):
        for text in ("Q(0) S+ S- Q(0)", "Q(0) S+ P S- I(40) S+ P S- Q(0)"):
            assert phase_integral(compute_paths(parse_sequence(text), lat), Zero()) == 0.0

    def test_twelve_shift_reference_gradient(self, lat, site_gradient):
        phi = phase_integral(compute_paths(single(12), lat), LinearGradient(site_gradient))
        # 2*pi*324.5 Hz * (36*30 us - 6*12 us)
        assert phi == pytest.approx(2.055204781237214, abs=1e-12)

    @pytest.mark.parametrize("n", range(4, 52, 4))
    def test_double_diamond_null(self, lat, n):
        G = 3.7e-25
        assert abs(phase_integral(compute_paths(build_geometry(GeometrySpec("double", n)), lat), LinearGradient(G))) < 1e-9

    def test_matches_brute_force_gaussian(self, lat):
        pot = GaussianBeamAxial(2.5e-27, -600e-6, 2.3e-3)
        seq = single(6)
        tokens = serialize_sequence(seq).replace("Q(0)", "Q").split()
        fast = phase_integral(compute_paths(seq, lat, x0=5e-6), pot)
        slow = brute_force_phase(tokens, lambda x, t: float(pot.value(x)), x0=5e-6, steps=400)
        assert fast == pytest.approx(slow, rel=1e-6)

    def test_breakpoints_split_segments(self, lat):
        # window edges fall inside both shifts; separation is piecewise linear so the
        # exact integral is m*a*d*(308 + 320)/36 us
        pot = InertialWindow(30.0, 10e-6, 40e-6, M_CS133)
        fast = phase_integral(compute_paths(single(2), lat), pot)
        exact = M_CS133 * 30.0 * D * (628 / 36) * 1e-6 / HBAR
        assert fast == pytest.approx(exact, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 4, 12, 30, 48])
    def test_inertial_window_matches_closed_form(self, lat, n):
        a = 3 * G0
        seq = build_geometry(GeometrySpec("accel", n, accel=a, t_acc=20e-6))
        expected = closed_form_acceleration_phase(n, lat.mass, a, 20e-6, lat.d)
        assert abs(sequence_phase(seq, Zero(), lat) - expected) < 1e-9

    def test_antisymmetric_and_linear(self, lat):
        paths = compute_paths(single(16), lat)
        base = phase_integral(paths, LinearGradient(1e-25))
        assert phase_integral(paths, LinearGradient(-1e-25)) == pytest.approx(-base, rel=1e-14)
        assert phase_integral(paths, LinearGradient(3e-25)) == pytest.approx(3 * base, rel=1e-14)

    def test_gaussian_echo_far_smaller(self, lat):
        pot = GaussianBeamAxial.with_gradient_at(0.0, 4.9657e-25, -600e-6, 2.3e-3)
        for x0 in (-20e-6, 0.0, 20e-6):
            single_phi = phase_integral(compute_paths(single(24), lat, x0), pot)
            double_phi = phase_integral(compute_paths(build_geometry(GeometrySpec("double", 24)), lat, x0), pot)
            assert abs(double_phi / single_phi) < 1e-3


class TestOracleEquivalence:
    @pytest.mark.parametrize("n", range(2, 50, 2))
    def test_single_diamond(self, lat, timing, site_gradient, n):
        quad = phase_integral(compute_paths(single(n), lat), LinearGradient(site_gradient))
        assert abs(quad - closed_form_diamond_phase(n, site_gradient, timing, lat.d)) < 1e-9

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(min_value=1, max_value=24),
        st.floats(min_value=-1e-24, max_value=1e-24),
        st.floats(min_value=5.0, max_value=40.0),
        st.floats(min_value=2.0, max_value=30.0),
    )
    def test_any_gradient_and_timing(self, half_n, G, tau_s_us, tau_pi_us):
        timing = TimingParams(tau_s_us * 1e-6, tau_pi_us * 1e-6)
        lat = LatticeConfig()
        n = 2 * half_n
        seq = build_geometry(GeometrySpec("single", n), timing)
        quad = phase_integral(compute_paths(seq, lat), LinearGradient(G))
        assert abs(quad - closed_form_diamond_phase(n, G, timing, lat.d)) < 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=1, max_value=24), st.floats(min_value=24e-6, max_value=3e-3))
    def test_hold_additivity(self, half_n, t_hold):
        lat = LatticeConfig()
        n = 2 * half_n
        pot = LinearGradient(4.9657e-25)
        diff = sequence_phase(build_geometry(GeometrySpec("hold", n, t_hold=t_hold)), pot, lat) - sequence_phase(
            single(n), pot, lat
        )
        assert abs(diff - closed_form_hold_phase(n, pot.gradU, t_hold, lat.d)) < 1e-9


class TestClosedForms:
    def test_diamond_values(self, timing, site_gradient):
        assert closed_form_diamond_phase(2, site_gradient, timing, D) == pytest.approx(0.0367, abs=5e-5)
        assert closed_form_diamond_phase(12, site_gradient, timing, D) == pytest.approx(2.0552, abs=5e-5)
        phi48 = closed_form_diamond_phase(48, site_gradient, timing, D)
        assert phi48 == pytest.approx(34.645, abs=5e-4)
        assert phi48 / math.pi == pytest.approx(11.03, abs=5e-3)

    @pytest.mark.parametrize("n", [1, 3, 0, -2])
    def test_diamond_bad_n(self, timing, n):
        with pytest.raises(ValueError):
            closed_form_diamond_phase(n, 1e-25, timing, D)

    def test_hold_values(self, site_gradient):
        assert closed_form_hold_phase(12, site_gradient, 0.0, D) == 0.0
        assert closed_form_hold_phase(12, site_gradient, 100e-6, D) == pytest.approx(1.2233, abs=5e-5)
        assert closed_form_hold_phase(4, site_gradient, 1e-3, D) == pytest.approx(4.0778, abs=5e-5)
        with pytest.raises(ValueError):
            closed_form_hold_phase(4, site_gradient, -1e-6, D)

    def test_acceleration_values(self):
        m = 2.20695e-25
        assert closed_form_acceleration_phase(20, m, 0.0, 20e-6, D) == 0.0
        assert closed_form_acceleration_phase(20, m, 49.033, 20e-6, D) == pytest.approx(8.886, abs=1e-3)
        assert closed_form_acceleration_phase(4, m, 9.80665, 20e-6, D) == pytest.approx(0.3555, abs=1e-4)
        with pytest.raises(ValueError):
            closed_form_acceleration_phase(4, m, 5e4, 20e-6, D)

    def test_gradient_equivalent(self, lat, site_gradient):
        a = gradient_equivalent_acceleration(site_gradient, lat.mass, lat.g0)
        assert abs(a - 0.2296) / 0.2296 < 1e-3
        assert gradient_equivalent_acceleration(0.0, lat.mass, lat.g0) == 0.0
        assert gradient_equivalent_acceleration(lat.mass * lat.g0, lat.mass, lat.g0) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            gradient_equivalent_acceleration(1.0, 0.0, 9.8)

    def test_inertial_equivalent_to_gradient(self, lat):
        a = 7.0
        lin = LinearGradient(lat.mass * a)
        accel = build_geometry(GeometrySpec("accel", 8, accel=a, t_acc=60e-6))
        assert sequence_phase(accel, Zero(), lat) == pytest.approx(
            closed_form_hold_phase(8, lin.gradU, 60e-6, lat.d), rel=1e-12
        )
        # a window covering the whole sequence acts exactly like the matching gradient
        hold = compute_paths(build_geometry(GeometrySpec("hold", 8, t_hold=84e-6)), lat)
        always_on = InertialWindow(a, 0.0, 1.0, lat.mass)
        assert phase_integral(hold, always_on) == pytest.approx(phase_integral(hold, lin), rel=1e-12)
