import dataclasses
import math

import numpy as np
import pytest

from error_handler import ParameterError, SingularStrikeError
from expansions import bs_coeffs
from pricing import (
    ScalingFunction,
    bs_largemat_price_closed,
    bs_smallmat_price_closed,
    check_strike,
    classify_payoff,
    fso_price_expansion,
    upsilon,
)
from saddle import solve_saddle
from schema import ForwardHorizon, PayoffKind, Regime


class TestScalingFunction:
    """Test suite for ScalingFunction."""

    def test_regime_scalings(self):
        """Test f = 1 at small maturity and f = 1/eps at large maturity."""
        # Act
        small = ScalingFunction.small()
        large = ScalingFunction.large()

        # Assert
        assert (small.c, small.f(0.1)) == (0.0, 1.0)
        assert (large.c, large.f(0.2)) == (1.0, 5.0)


class TestClassifyPayoff:
    """Test suite for classify_payoff and check_strike."""

    @pytest.mark.parametrize("k, kind", [(0.2, PayoffKind.CALL), (-0.2, PayoffKind.PUT), (0.01, PayoffKind.COVERED)])
    def test_large_maturity_regions(self, k, kind):
        """Test the classification against the singular strikes -/+ sigma^2 / 2."""
        # Arrange
        coeffs = bs_coeffs(0.4, Regime.LARGE, ForwardHorizon(t=0.0, tau=1.0))

        # Act & Assert
        assert classify_payoff(k, coeffs) == kind

    def test_guard_band(self):
        """Test strikes within the guard band of a singular strike are rejected."""
        # Arrange
        coeffs = bs_coeffs(0.4, Regime.LARGE, ForwardHorizon(t=0.0, tau=1.0))

        # Act & Assert
        with pytest.raises(SingularStrikeError, match="singular strike"):
            check_strike(0.0805, coeffs)


class TestSmallMaturityPrice:
    """Test suite for fso_price_expansion in the diagonal small-maturity regime."""

    @pytest.mark.parametrize("eps", [0.05, 0.2, 1.0])
    def test_black_scholes_equivalence(self, eps):
        """Test the general machinery reproduces the Black-Scholes closed form."""
        # Arrange
        sigma, tau = 0.25, 0.5
        coeffs = bs_coeffs(sigma, Regime.SMALL, ForwardHorizon(t=0.0, tau=tau))
        strikes = [k for k in np.linspace(-0.4, 0.4, 50) if abs(k) > 0.01]

        for k in strikes:
            # Act
            quote = fso_price_expansion(coeffs, solve_saddle(coeffs, k), ScalingFunction.small(), eps)

            # Assert
            expected = bs_smallmat_price_closed(k, sigma, tau, eps)
            assert quote.price == pytest.approx(expected, rel=1e-10)
            assert quote.payoff_kind == (PayoffKind.CALL if k > 0 else PayoffKind.PUT)

    def test_order_terms(self):
        """Test the price is the truncation at the requested order."""
        # Arrange
        coeffs = bs_coeffs(0.2, Regime.SMALL, ForwardHorizon(t=0.0, tau=1.0))
        s = solve_saddle(coeffs, 0.1)

        # Act
        quotes = [fso_price_expansion(coeffs, s, ScalingFunction.small(), 0.1, order=i) for i in range(3)]

        # Assert
        assert len(quotes[0].order_terms) == 3
        assert [q.price for q in quotes] == quotes[0].order_terms
        assert quotes[1].price == pytest.approx(quotes[0].price * math.exp(s.l1), rel=1e-14)

    def test_plain_call_parity(self):
        """Test converting a put-side value to a call adds 1 - e^k."""
        # Arrange
        coeffs = bs_coeffs(0.2, Regime.SMALL, ForwardHorizon(t=0.0, tau=1.0))
        k = -0.1
        s = solve_saddle(coeffs, k)

        # Act
        put = fso_price_expansion(coeffs, s, ScalingFunction.small(), 0.1)
        call = fso_price_expansion(coeffs, s, ScalingFunction.small(), 0.1, plain_call=True)

        # Assert
        assert call.price == pytest.approx(put.price + 1.0 - math.exp(k), rel=1e-12)

    def test_rejects_non_positive_epsilon(self):
        """Test eps <= 0 is a parameter error."""
        # Arrange
        coeffs = bs_coeffs(0.2, Regime.SMALL, ForwardHorizon(t=0.0, tau=1.0))

        # Act & Assert
        with pytest.raises(ParameterError, match="must be positive"):
            fso_price_expansion(coeffs, solve_saddle(coeffs, 0.1), ScalingFunction.small(), 0.0)

    def test_rejects_singular_strike(self):
        """Test at-the-money strikes have no expansion."""
        # Arrange
        coeffs = bs_coeffs(0.2, Regime.SMALL, ForwardHorizon(t=0.0, tau=1.0))

        # Act & Assert
        with pytest.raises(SingularStrikeError):
            fso_price_expansion(coeffs, solve_saddle(coeffs, 2e-4), ScalingFunction.small(), 0.1)


class TestLargeMaturityPrice:
    """Test suite for fso_price_expansion in the large-maturity regime."""

    @pytest.mark.parametrize("tau", [5.0, 20.0])
    def test_black_scholes_equivalence(self, tau):
        """Test call, put and covered strikes against the Black-Scholes closed form."""
        # Arrange
        sigma = 0.4
        coeffs = bs_coeffs(sigma, Regime.LARGE, ForwardHorizon(t=0.0, tau=1.0))
        half = sigma * sigma / 2.0
        strikes = [k for k in np.linspace(-0.3, 0.3, 50) if abs(abs(k) - half) > 2e-3]

        for k in strikes:
            # Act
            quote = fso_price_expansion(coeffs, solve_saddle(coeffs, k), ScalingFunction.large(), 1.0 / tau)

            # Assert
            expected, kind = bs_largemat_price_closed(k, sigma, tau)
            assert quote.price == pytest.approx(expected, rel=1e-10)
            assert quote.payoff_kind == kind

    def test_covered_value_is_negative(self):
        """Test the expansion between the singular strikes carries a negative sign."""
        # Arrange
        coeffs = bs_coeffs(0.4, Regime.LARGE, ForwardHorizon(t=0.0, tau=1.0))

        # Act
        quote = fso_price_expansion(coeffs, solve_saddle(coeffs, 0.0), ScalingFunction.large(), 0.01)

        # Assert
        assert quote.payoff_kind == PayoffKind.COVERED
        assert quote.price < 0.0 < quote.leading


class TestUpsilon:
    """Test suite for upsilon."""

    def test_black_scholes_small(self):
        """Test Upsilon(0, k) = -s/8 - 1/u - 3/(u^2 s) for Black-Scholes."""
        # Arrange
        coeffs = bs_coeffs(0.2, Regime.SMALL, ForwardHorizon(t=0.0, tau=1.0))
        s = solve_saddle(coeffs, 0.1)
        total = 0.04
        u = s.u_star

        # Act
        value = upsilon(0.0, s)

        # Assert
        assert value == pytest.approx(-total / 8.0 - 1.0 / u - 3.0 / (u * u * total), rel=1e-12)

    def test_singular_at_origin(self):
        """Test the correction is undefined when u* = 0."""
        # Arrange
        coeffs = bs_coeffs(0.2, Regime.LARGE, ForwardHorizon(t=0.0, tau=1.0))
        s = dataclasses.replace(solve_saddle(coeffs, 0.1), u_star=0.0)

        # Act & Assert
        with pytest.raises(SingularStrikeError, match="singular point"):
            upsilon(1.0, s)
