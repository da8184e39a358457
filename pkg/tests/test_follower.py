import numpy as np
import pytest

from sfcmarket import RuParams, best_response, best_response_oracle, ru_utility, utility_curve
from sfcmarket.follower import CLAMPED_HIGH, CLAMPED_LOW, INTERIOR


def ru(k=120.0, e_gen=10.0, e_min=0.0):
    return RuParams(0, k, e_gen, e_min)


class TestBestResponse:
    def test_interior_solution(self):
        br = best_response(ru(), 20.0)
        assert br.e_star == 5.0
        assert br.offer == 5.0
        assert br.boundary_flag == INTERIOR
        assert br.utility == ru_utility(ru(), 5.0, 20.0)

    def test_clamps_high_at_cheap_prices(self):
        # stationary point 120/8.45 - 1 ~ 13.2 exceeds generation
        br = best_response(ru(), 8.45)
        assert br.e_star == 10.0
        assert br.offer == 0.0
        assert br.boundary_flag == CLAMPED_HIGH

    def test_boundary_tie_is_interior(self):
        # marginal utility k/(1+0) equals the price exactly at e=0
        br = best_response(ru(k=90.0), 90.0)
        assert br.e_star == 0.0
        assert br.offer == 10.0
        assert br.boundary_flag == INTERIOR

    def test_clamps_low_above_the_tie(self):
        br = best_response(ru(k=90.0), 95.0)
        assert br.e_star == 0.0
        assert br.boundary_flag == CLAMPED_LOW

    def test_rejects_nonpositive_price(self):
        with pytest.raises(ValueError):
            best_response(ru(), 0.0)

    def test_offer_is_exact_complement(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            unit = ru(k=float(rng.uniform(1, 500)), e_gen=float(rng.uniform(1, 20)))
            br = best_response(unit, float(rng.uniform(1, 100)))
            assert br.offer == unit.e_gen - br.e_star

    def test_consumption_never_below_base_load(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            e_gen = float(rng.uniform(1, 20))
            e_min = float(rng.uniform(0, 0.9)) * e_gen
            unit = ru(k=float(rng.uniform(1, 500)), e_gen=e_gen, e_min=e_min)
            br = best_response(unit, float(rng.uniform(1, 100)))
            assert e_min <= br.e_star <= e_gen

    def test_monotone_in_price(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            unit = ru(k=float(rng.uniform(1, 500)), e_gen=float(rng.uniform(1, 20)))
            p_lo, p_hi = sorted(rng.uniform(1, 100, 2))
            lo, hi = best_response(unit, float(p_lo)), best_response(unit, float(p_hi))
            assert hi.e_star <= lo.e_star
            assert hi.offer >= lo.offer

    def test_interior_first_order_condition(self):
        rng = np.random.default_rng(8)
        checked = 0
        for _ in range(300):
            unit = ru(k=float(rng.uniform(1, 500)), e_gen=float(rng.uniform(1, 20)))
            price = float(rng.uniform(1, 100))
            br = best_response(unit, price)
            if br.boundary_flag == INTERIOR:
                checked += 1
                assert abs(unit.k / (1.0 + br.e_star) - price) < 1e-9 * price
        assert checked > 50

    def test_no_profitable_deviation(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            unit = ru(k=float(rng.uniform(50, 300)), e_gen=10.0)
            price = float(rng.uniform(5, 80))
            br = best_response(unit, price)
            draws = rng.uniform(unit.e_min, unit.e_gen, 100)
            for e in draws:
                assert ru_utility(unit, float(e), price) <= br.utility + 1e-9


class TestOracle:
    def test_matches_closed_form_on_random_draws(self):
        rng = np.random.default_rng(11)
        for _ in range(150):
            unit = ru(k=float(rng.uniform(1, 500)), e_gen=float(rng.uniform(1, 20)))
            price = float(rng.uniform(1, 100))
            br = best_response(unit, price)
            orc = best_response_oracle(unit, price, step=1e-4)
            assert abs(orc.e_star - br.e_star) <= 1e-4 + 1e-12
            assert orc.utility == pytest.approx(br.utility, rel=1e-9)

    def test_interior_reference_point(self):
        orc = best_response_oracle(ru(), 20.0, step=1e-5)
        assert orc.e_star == pytest.approx(5.0, abs=1e-5)

    def test_respects_base_load_grid(self):
        unit = ru(k=5.0, e_gen=8.0, e_min=2.5)
        orc = best_response_oracle(unit, 50.0, step=1e-4)
        assert orc.e_star == 2.5
        assert orc.boundary_flag == CLAMPED_LOW

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            best_response_oracle(ru(), 20.0, step=0.0)


class TestUtilityCurve:
    def test_two_samples_hit_the_endpoints(self):
        unit = ru(e_min=1.5)
        curve = utility_curve(unit, 20.0, samples=2)
        assert curve[0, 0] == 1.5
        assert curve[1, 0] == 10.0

    def test_sampled_peak_near_best_response(self):
        curve = utility_curve(ru(), 20.0, samples=101)
        peak = curve[np.argmax(curve[:, 1]), 0]
        assert peak == pytest.approx(5.0, abs=0.1)  # grid spacing 0.1

    def test_peak_moves_left_as_price_rises(self):
        unit = ru()
        peaks = []
        for price in (12.0, 20.0, 30.0, 45.0, 60.0):
            curve = utility_curve(unit, price, samples=201)
            peaks.append(curve[np.argmax(curve[:, 1]), 0])
        assert all(b <= a for a, b in zip(peaks, peaks[1:]))

    def test_rejects_single_sample(self):
        with pytest.raises(ValueError):
            utility_curve(ru(), 20.0, samples=1)
