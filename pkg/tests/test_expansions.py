import dataclasses
import math

import numpy as np
import pytest

from error_handler import MartingaleError, NumericalError, UnsupportedError
from expansions import (
    _real_part,
    bs_coeffs,
    coefficients_for,
    domain_report,
    expansion_residual,
    heston_diag_bounds,
    heston_diag_coeffs,
    heston_diag_xi,
    heston_lm_coeffs,
    heston_lm_domain,
    tail_profile,
    tclevy_lm_coeffs,
)
from schema import (
    BlackScholesModel,
    BoundaryKind,
    DomainCase,
    ForwardHorizon,
    HestonModel,
    HestonParams,
    Regime,
    TimeChangedLevyModel,
)
from smile import largemat_terms


def _interior_grid(coeffs, count=50, lo=-20.0, hi=20.0):
    left = max(coeffs.lo, lo)
    right = min(coeffs.hi, hi)
    width = right - left
    return np.linspace(left + 0.05 * width, right - 0.05 * width, count)


class TestBlackScholesCoefficients:
    """Test suite for bs_coeffs."""

    def test_small_regime_is_exact(self):
        """Test the rescaled lmgf equals Lambda0 + eps Lambda1 exactly."""
        # Arrange
        h = ForwardHorizon(t=0.3, tau=0.5)
        coeffs = bs_coeffs(0.25, Regime.SMALL, h)

        # Act
        table = expansion_residual(BlackScholesModel(sigma=0.25), Regime.SMALL, h, 1.5, [0.1, 0.01, 0.001])

        # Assert
        assert coeffs.c == 0.0
        assert all(abs(r) < 1e-15 for r in table.residuals)

    def test_large_regime_singular_strikes(self):
        """Test Lambda0'(0) and Lambda0'(1) sit at -sigma^2/2 and sigma^2/2."""
        # Act
        coeffs = bs_coeffs(0.4, Regime.LARGE, ForwardHorizon(t=0.0, tau=1.0))

        # Assert
        assert coeffs.singular_strikes == pytest.approx((-0.08, 0.08), rel=1e-14)
        assert coeffs.lo_kind == BoundaryKind.INFINITE


class TestHestonDiagonal:
    """Test suite for heston_diag_coeffs and its helpers."""

    def test_uncorrelated_bounds(self):
        """Test the t=0 domain is (-pi/(xi tau), pi/(xi tau)) when rho = 0."""
        # Arrange
        p = HestonParams(v=0.07, theta=0.07, kappa=1.0, xi=0.5, rho=0.0)

        # Act
        lo, hi = heston_diag_bounds(0.25, p)

        # Assert
        assert lo == pytest.approx(-math.pi / 0.125, rel=1e-12)
        assert hi == pytest.approx(math.pi / 0.125, rel=1e-12)

    def test_spot_start_domain_is_explosion_bounds(self, diag_heston):
        """Test the domain at t = 0 equals the explosion bounds."""
        # Arrange
        h = ForwardHorizon(t=0.0, tau=1.0 / 12.0)

        # Act
        coeffs = heston_diag_coeffs(h, diag_heston)

        # Assert
        assert (coeffs.lo, coeffs.hi) == heston_diag_bounds(h.tau, diag_heston)

    def test_forward_start_shrinks_domain(self, diag_heston, diag_horizon):
        """Test a positive forward-start date truncates the domain inside the explosion bounds."""
        # Act
        coeffs = heston_diag_coeffs(diag_horizon, diag_heston)
        u_minus, u_plus = heston_diag_bounds(diag_horizon.tau, diag_heston)

        # Assert
        assert u_minus < coeffs.lo < 0.0 < coeffs.hi < u_plus
        assert coeffs.lo_kind == BoundaryKind.OPEN

    def test_small_argument_behaviour(self, diag_heston, diag_horizon):
        """Test Lambda0(u) ~ v tau u^2 / 2 near the origin."""
        # Act
        value = heston_diag_xi(1e-3, diag_horizon.t, diag_horizon.tau, diag_heston)

        # Assert
        assert value == pytest.approx(0.07 / 12.0 * 1e-6 / 2.0, rel=1e-2)

    def test_strict_convexity(self, diag_heston, diag_horizon):
        """Test second differences of Lambda0 are positive on the interior."""
        # Arrange
        coeffs = heston_diag_coeffs(diag_horizon, diag_heston)
        grid = _interior_grid(coeffs, count=200)

        # Act
        values = np.array([coeffs.lambda0(u) for u in grid])

        # Assert
        assert np.all(np.diff(values, 2) > 0.0)

    def test_analytic_slope_matches_differences(self, diag_heston, diag_horizon):
        """Test the analytic Lambda0' against a central difference."""
        # Arrange
        coeffs = heston_diag_coeffs(diag_horizon, diag_heston)
        u, h = 2.0, 1e-5

        # Act
        numeric = (coeffs.lambda0(u + h) - coeffs.lambda0(u - h)) / (2.0 * h)

        # Assert
        assert coeffs.lambda0_prime(u) == pytest.approx(numeric, rel=1e-6)

    def test_steepness_at_boundary(self, diag_heston, diag_horizon):
        """Test |Lambda0'| grows without bound towards the domain edge."""
        # Arrange
        coeffs = heston_diag_coeffs(diag_horizon, diag_heston)

        # Act
        slopes = [coeffs.lambda0_prime(coeffs.hi - coeffs.hi * 10.0 ** (-j)) for j in range(1, 6)]

        # Assert
        assert all(b > a for a, b in zip(slopes, slopes[1:]))
        assert slopes[-1] > 100.0 * abs(slopes[0])

    def test_first_order_term_is_real(self, diag_heston, diag_horizon):
        """Test Lambda1 evaluates to a real number on both half-lines of the domain."""
        # Arrange
        coeffs = heston_diag_coeffs(diag_horizon, diag_heston)
        grid = _interior_grid(coeffs, count=100)

        # Act
        values = [coeffs.lambda1(float(u)) for u in grid]

        # Assert
        assert grid[0] < 0.0 < grid[-1]
        assert all(isinstance(v, float) and math.isfinite(v) for v in values)

    def test_imaginary_residue_rejected(self):
        """Test a first-order term with a material imaginary part is an error, not truncated."""
        # Act & Assert
        assert _real_part(complex(2.5, 1e-13), 1.0) == 2.5
        with pytest.raises(NumericalError, match="not real at u=1.0"):
            _real_part(complex(2.5, 1e-6), 1.0)

    @pytest.mark.slow
    def test_residual_order(self, diag_heston, diag_horizon):
        """Test the remainder after three terms decays faster than eps^1.5."""
        # Act
        table = expansion_residual(
            HestonModel(params=diag_heston), Regime.SMALL, diag_horizon, 1.0, [2.0 ** -j for j in range(6, 11)]
        )

        # Assert
        assert table.slope >= 1.5


class TestHestonLargeMaturityDomain:
    """Test suite for heston_lm_domain."""

    def test_lower_threshold_closed_form(self, large_heston):
        """Test rho- from the closed form at kappa = 1.5 and kappa = 1."""
        # Arrange
        slower = large_heston.model_copy(update={"kappa": 1.0})

        # Act
        report = heston_lm_domain(1.0, large_heston)
        slower_report = heston_lm_domain(1.0, slower)

        # Assert
        assert report.rho_minus == pytest.approx(-0.5852, abs=1e-3)
        assert slower_report.rho_minus == pytest.approx(-0.648, abs=1e-3)
        assert report.case == DomainCase.III

    def test_spot_start_thresholds(self, large_heston):
        """Test rho+- = +-1 when the option starts today."""
        # Act
        report = heston_lm_domain(0.0, large_heston)

        # Assert
        assert report.rho_minus == pytest.approx(-1.0, abs=1e-14)
        assert report.rho_plus == pytest.approx(1.0, abs=1e-14)
        assert report.interval_kinds == (BoundaryKind.CLOSED, BoundaryKind.CLOSED)

    @pytest.mark.parametrize("rho, case", [(-0.9, DomainCase.I), (0.8, DomainCase.II)])
    def test_outer_cases(self, large_heston, rho, case):
        """Test strongly correlated parameters fall into Case I or Case II."""
        # Arrange
        p = large_heston.model_copy(update={"rho": rho})

        # Act
        report = heston_lm_domain(1.0, p)

        # Assert
        assert report.case == case

    def test_outer_case_has_no_expansion(self, large_heston):
        """Test Case I coefficients are rejected with a diagnostic."""
        # Arrange
        p = large_heston.model_copy(update={"rho": -0.9})

        # Act & Assert
        with pytest.raises(UnsupportedError, match="Case I"):
            heston_lm_coeffs(1.0, p)

    def test_moment_condition(self):
        """Test kappa <= rho xi is rejected."""
        # Arrange
        p = HestonParams(v=0.07, theta=0.07, kappa=0.1, xi=0.5, rho=0.5)

        # Act & Assert
        with pytest.raises(UnsupportedError, match="kappa > rho\\*xi"):
            heston_lm_domain(1.0, p)

    def test_domain_report_keeps_outer_cases(self, large_heston):
        """Test the domain report describes Case I instead of raising."""
        # Arrange
        model = HestonModel(params=large_heston.model_copy(update={"rho": -0.9}))

        # Act
        report = domain_report(model, Regime.LARGE, ForwardHorizon(t=1.0, tau=5.0))

        # Assert
        assert report.heston.case == DomainCase.I
        assert report.hi_kind == BoundaryKind.OPEN


class TestHestonLargeMaturityCoefficients:
    """Test suite for heston_lm_coeffs."""

    def test_vanishes_at_zero_and_one(self, large_heston):
        """Test V(0) = V(1) = 0."""
        # Act
        coeffs = heston_lm_coeffs(1.0, large_heston)

        # Assert
        assert abs(coeffs.lambda0(0.0)) < 1e-14
        assert abs(coeffs.lambda0(1.0)) < 1e-14

    @pytest.mark.parametrize("u", [-1.0, 0.5, 2.0])
    def test_first_order_remainder(self, large_heston, u):
        """Test |tau (Lambda_tau(u) - V(u)) - H(u)| is negligible at tau = 40."""
        # Arrange
        coeffs = heston_lm_coeffs(1.0, large_heston)
        tau = 40.0

        # Act
        remainder = tau * (coeffs.rescaled_lmgf(u, 1.0 / tau) - coeffs.lambda0(u)) - coeffs.lambda1(u)

        # Assert
        assert abs(remainder) < 1e-6

    def test_strict_convexity(self, large_heston):
        """Test second differences of V are positive on the interior."""
        # Arrange
        coeffs = heston_lm_coeffs(1.0, large_heston)
        grid = _interior_grid(coeffs, count=200)

        # Act
        values = np.array([coeffs.lambda0(u) for u in grid])

        # Assert
        assert np.all(np.diff(values, 2) > 0.0)


class TestTimeChangedLevyCoefficients:
    """Test suite for tclevy_lm_coeffs."""

    def test_calendar_clock_domain(self, gou_vg):
        """Test the trivial clock keeps the exponent domain (-G, M), open."""
        # Act
        report = domain_report(TimeChangedLevyModel(exponent=gou_vg), Regime.LARGE, ForwardHorizon(t=0.0, tau=1.0))

        # Assert
        assert (report.lo, report.hi) == (-gou_vg.G, gou_vg.M)
        assert report.lo_kind == BoundaryKind.OPEN

    def test_feller_clock(self, feller_vg, feller_clock):
        """Test the Feller clock: closed domain inside (-G, M) and V(1) = 0."""
        # Act
        coeffs = tclevy_lm_coeffs(0.5, feller_vg, feller_clock)

        # Assert
        assert -feller_vg.G < coeffs.lo < 0.0 and 1.0 < coeffs.hi < feller_vg.M
        assert coeffs.hi_kind == BoundaryKind.CLOSED
        assert abs(coeffs.lambda0(1.0)) < 1e-12

    def test_gammaou_clock(self, gou_vg, gou_clock):
        """Test the Gamma-OU clock: open domain where phi < alpha lambda."""
        # Act
        coeffs = tclevy_lm_coeffs(1.0, gou_vg, gou_clock)

        # Assert
        assert coeffs.hi_kind == BoundaryKind.OPEN
        assert abs(coeffs.lambda0(1.0)) < 1e-12
        assert coeffs.lambda0(0.5 * (coeffs.hi + 1.0)) > 0.0

    def test_strict_convexity(self, gou_vg, gou_clock):
        """Test second differences of the Gamma-OU limit lmgf are positive."""
        # Arrange
        coeffs = tclevy_lm_coeffs(1.0, gou_vg, gou_clock)
        grid = _interior_grid(coeffs, count=200)

        # Act
        values = np.array([coeffs.lambda0(u) for u in grid])

        # Assert
        assert np.all(np.diff(values, 2) > 0.0)

    def test_martingale_required_for_smile(self):
        """Test the large-maturity smile rejects a limit lmgf that does not vanish at one."""
        # Arrange
        coeffs = bs_coeffs(0.2, Regime.SMALL, ForwardHorizon(t=0.0, tau=1.0))

        # Act & Assert
        with pytest.raises(MartingaleError, match="Lambda0\\(1\\)=0"):
            largemat_terms(coeffs, 0.1)


class TestCoefficientsFor:
    """Test suite for coefficients_for."""

    def test_levy_small_maturity_rejected(self, gou_vg):
        """Test jump models have no diagonal small-maturity expansion."""
        # Act & Assert
        with pytest.raises(UnsupportedError, match="large maturity"):
            coefficients_for(TimeChangedLevyModel(exponent=gou_vg), Regime.SMALL, ForwardHorizon(t=0.0, tau=1.0))

    def test_black_scholes_dispatch(self):
        """Test the Black-Scholes model dispatches to the closed form."""
        # Act
        coeffs = coefficients_for(BlackScholesModel(sigma=0.2), Regime.LARGE, ForwardHorizon(t=0.0, tau=2.0))

        # Assert
        assert coeffs.label == "bs-large"


class TestTailProfile:
    """Test suite for tail_profile."""

    def test_black_scholes_peak(self):
        """Test Re Lambda0 along a vertical line peaks only on the real axis."""
        # Arrange
        coeffs = bs_coeffs(0.2, Regime.SMALL, ForwardHorizon(t=0.0, tau=1.0))

        # Act
        profile = tail_profile(coeffs, 0.5, [-2.0, -1.0, 0.0, 1.0, 2.0])

        # Assert
        assert profile.peak_at_zero
        assert profile.values[2] == pytest.approx(0.5 * 0.25 * 0.04, rel=1e-14)

    def test_feller_clock_peak(self, feller_vg, feller_clock):
        """Test the Feller-clock profile peaks at zero."""
        # Arrange
        coeffs = tclevy_lm_coeffs(0.5, feller_vg, feller_clock)

        # Act
        profile = tail_profile(coeffs, 0.5, list(np.linspace(-20.0, 20.0, 161)))

        # Assert
        assert profile.peak_at_zero

    def test_requires_complex_extension(self):
        """Test coefficients without a complex extension are rejected."""
        # Arrange
        coeffs = dataclasses.replace(
            bs_coeffs(0.2, Regime.SMALL, ForwardHorizon(t=0.0, tau=1.0)), lambda0_complex=None
        )

        # Act & Assert
        with pytest.raises(UnsupportedError, match="complex extension"):
            tail_profile(coeffs, 0.5, [0.0])
