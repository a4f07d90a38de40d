import numpy as np
import pytest

from rampmerge.grid import PhysicalState
from rampmerge.scene import (
    CorridorMargins,
    Scene,
    SpeedLimitProfile,
    VehicleTrack,
    corridor,
    in_hard_band,
    is_prohibited,
    predict_position,
    segment_clear,
    speed_limit,
)

KPH80 = 80 / 3.6


def margins(**kw):
    base = dict(rear_hard=10.0, rear_caution=25.0, front_hard=8.0, front_caution=20.0)
    base.update(kw)
    return CorridorMargins(**base)


class TestPrediction:
    def test_zero_elapsed(self):
        assert predict_position(VehicleTrack("a", 37.5, 20.0), 0.0) == 37.5

    def test_constant_speed_80kph(self):
        x = predict_position(VehicleTrack("a", 100.0, KPH80), 2.0)
        assert x == pytest.approx(144.444, abs=1e-3)

    def test_stationary(self):
        v = VehicleTrack("a", 12.0, 0.0)
        np.testing.assert_array_equal(predict_position(v, np.linspace(0, 30, 7)), 12.0)

    def test_decelerating_vehicle_stops(self):
        v = VehicleTrack("a", 0.0, 10.0, accel=-2.0)
        assert predict_position(v, 5.0) == 25.0
        assert predict_position(v, 9.0) == 25.0

    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            VehicleTrack("a", 0.0, -1.0)


class TestCorridor:
    def test_margin_arithmetic(self):
        b = corridor(VehicleTrack("a", 200.0, 0.0), 0.0, margins())
        assert (b.l_cr, b.l_pr, b.l_pf, b.l_cf) == (175.0, 190.0, 208.0, 220.0)

    def test_ordering(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            rh, fh = rng.uniform(0.1, 20, 2)
            m = CorridorMargins(rh, rh + rng.uniform(0.1, 30), fh, fh + rng.uniform(0.1, 30), rng.uniform(0, 2))
            b = corridor(VehicleTrack("a", rng.uniform(-100, 100), rng.uniform(0, 40)), rng.uniform(0, 5), m)
            assert b.l_cr < b.l_pr < b.l_pf < b.l_cf

    def test_headway_widens_hard_margins(self):
        v = VehicleTrack("a", 200.0, 20.0)
        b0 = corridor(v, 0.0, margins())
        b1 = corridor(v, 0.0, margins(headway=1.0))
        assert b0.l_pr - b1.l_pr == 20.0
        assert b1.l_pf - b0.l_pf == 20.0

    @pytest.mark.parametrize(
        "kw",
        [dict(rear_hard=0.0), dict(front_hard=-1.0), dict(rear_caution=10.0), dict(front_caution=5.0), dict(headway=-0.1)],
    )
    def test_invalid_margins(self, kw):
        with pytest.raises(ValueError):
            margins(**kw)

    def test_inflated(self):
        m = margins().inflated(1.5)
        assert (m.rear_hard, m.rear_caution, m.front_hard, m.front_caution) == (11.5, 26.5, 9.5, 21.5)


class TestSpeedLimit:
    step = SpeedLimitProfile((0.0, 50.0, 120.0), (20.0, 25.0, 15.0))
    linear = SpeedLimitProfile((0.0, 50.0, 120.0), (20.0, 25.0, 15.0), "linear")

    @pytest.mark.parametrize("pos,val", [(0.0, 20.0), (50.0, 25.0), (120.0, 15.0)])
    def test_breakpoints(self, pos, val):
        assert speed_limit(self.step, pos) == val
        assert speed_limit(self.linear, pos) == val

    def test_step_takes_left_value(self):
        assert speed_limit(self.step, 49.999) == 20.0
        assert speed_limit(self.step, 80.0) == 25.0

    def test_linear_midpoint(self):
        assert speed_limit(self.linear, 25.0) == 22.5
        assert speed_limit(self.linear, 85.0) == 20.0

    def test_extrapolation_is_flat(self):
        for p in (self.step, self.linear):
            assert speed_limit(p, -10.0) == 20.0
            assert speed_limit(p, 500.0) == 15.0

    def test_array_input(self):
        np.testing.assert_array_equal(speed_limit(self.step, np.array([0.0, 60.0, 200.0])), [20.0, 25.0, 15.0])
        np.testing.assert_array_equal(speed_limit(SpeedLimitProfile.flat(3.0), np.zeros(4)), 3.0)

    def test_shifted(self):
        assert speed_limit(self.step.shifted(40.0), 10.0) == 25.0

    @pytest.mark.parametrize(
        "args",
        [((), ()), ((0.0, 1.0), (5.0,)), ((1.0, 0.0), (5.0, 6.0)), ((0.0,), (0.0,)), ((0.0,), (5.0,), "cubic")],
    )
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            SpeedLimitProfile(*args)


class TestProhibited:
    scene = Scene((VehicleTrack("a", 200.0, 0.0),), margins(), SpeedLimitProfile.flat(20.0))

    def test_over_limit_far_from_vehicles(self):
        assert is_prohibited(PhysicalState(0.0, 0.0, 20.5, 0.0), self.scene)

    def test_at_vehicle_position(self):
        assert is_prohibited(PhysicalState(0.0, 0.0, 10.0, 200.0), self.scene)

    def test_clear(self):
        assert not is_prohibited(PhysicalState(0.0, 0.0, 20.0, 150.0), self.scene)

    def test_hard_band_is_closed(self):
        assert in_hard_band(190.0, 0.0, self.scene.vehicles[0], self.scene.margins)
        assert in_hard_band(208.0, 0.0, self.scene.vehicles[0], self.scene.margins)
        assert not in_hard_band(189.99, 0.0, self.scene.vehicles[0], self.scene.margins)

    def test_vectorized(self):
        p = PhysicalState(0.0, 0.0, np.array([10.0, 25.0, 10.0]), np.array([0.0, 0.0, 195.0]))
        np.testing.assert_array_equal(is_prohibited(p, self.scene), [False, True, True])


class TestSegmentClear:
    scene = Scene((VehicleTrack("a", 100.0, 10.0),), margins(), SpeedLimitProfile.flat(50.0))

    def test_stays_behind(self):
        assert segment_clear(PhysicalState(0, 0, 0, 50.0), PhysicalState(1, 0, 0, 90.0), self.scene)

    def test_passes_through_band(self):
        # starts behind, ends ahead of the moving band
        assert not segment_clear(PhysicalState(0, 0, 0, 50.0), PhysicalState(1, 0, 0, 150.0), self.scene)

    def test_ends_inside(self):
        assert not segment_clear(PhysicalState(0, 0, 0, 50.0), PhysicalState(1, 0, 0, 105.0), self.scene)

    def test_no_vehicles(self):
        empty = Scene((), margins(), SpeedLimitProfile.flat(50.0))
        assert segment_clear(PhysicalState(0, 0, 0, 0.0), PhysicalState(1, 0, 0, 1e4), empty)
