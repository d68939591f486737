"""
Forward implied-volatility expansions.

Diagonal small maturity (eps scales both t and tau):

    sigma^2(k) = v0(k) + v1(k) eps + v2(k) eps^2

Large maturity at log-strike k tau (eps = 1/tau):

    sigma^2(k tau) = v0(k) + v1(k) / tau + v2(k) / tau^2

plus the Heston at-the-money polynomials, skew/convexity and the large-maturity
at-the-money values, and the grid assembly used by the CLI.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

from config import ATM_BAND, BOUNDARY_LIMIT_BAND
from error_handler import (
    MartingaleError,
    NumericalError,
    RegularityError,
    SingularStrikeError,
    UnsupportedError,
)
from expansions import RegimeCoefficients, coefficients_for, heston_lm_domain, tclevy_lm_coeffs
from models import levy_exponent
from oracle import reference_vol
from pricing import upsilon
from saddle import derivative_bundle, finite_difference, solve_saddle
from schema import (
    DomainCase,
    FellerClockParams,
    ForwardHorizon,
    GammaOUClockParams,
    HestonModel,
    HestonParams,
    Measure,
    QuadratureConfig,
    Regime,
    SmileCurve,
    SmilePoint,
    StrikeConvention,
)

Terms = Tuple[float, Optional[float], Optional[float]]


# Diagonal small maturity

def smallmat_terms(coeffs: RegimeCoefficients, k: float) -> Tuple[float, float, float]:
    """v0, v1, v2 of the diagonal small-maturity forward smile at log-strike k.

    Raises:
        RegularityError: If the limit lmgf has a non-zero slope at the origin
        SingularStrikeError: If k is inside the at-the-money guard band
    """
    slope = coeffs.lambda0_prime(0.0)
    if abs(slope) > 1e-10:
        raise RegularityError(f"Small-maturity smile needs a vanishing limit mean, got Lambda0'(0)={slope}")
    if abs(k) < ATM_BAND:
        raise SingularStrikeError(f"Log-strike {k} is inside the at-the-money band {ATM_BAND}")
    tau = coeffs.horizon.tau
    s = solve_saddle(coeffs, k)
    u = s.u_star

    v0 = k * k / (2.0 * tau * s.lambda_star)
    log_term = 2.0 * math.log(abs(k)) + s.l1 - 2.0 * math.log(abs(u)) - 0.5 * math.log(s.l0_2) - 1.5 * math.log(tau * v0)
    v1 = v0 * v0 * tau / k * (1.0 + 2.0 / k * log_term)
    v2 = (
        2.0 * tau ** 2 * v0 ** 3 / k ** 2 * (3.0 / k ** 2 + 0.125)
        + 2.0 * tau * v0 ** 2 / k ** 2 * (upsilon(0.0, s) + 1.0 / u)
        + v1 * v1 / v0
        - 3.0 * tau / k ** 2 * v0 * v1
    )
    return v0, v1, v2


def _truncate(terms: Sequence[float], scale: float, order: int) -> float:
    return sum(term * scale ** i for i, term in enumerate(terms[: order + 1]))


def smallmat_smile(coeffs: RegimeCoefficients, k: float, epsilon: float = 1.0, order: int = 2) -> float:
    """Implied variance v0 + v1 eps + v2 eps^2 truncated at the requested order."""
    return _truncate(smallmat_terms(coeffs, k), epsilon, order)


# Large maturity

def _check_martingale(coeffs: RegimeCoefficients) -> None:
    value = coeffs.lambda0(1.0)
    if abs(value) > 1e-10:
        raise MartingaleError(f"Large-maturity smile needs Lambda0(1)=0, got {value}")
    if not coeffs.contains(1.0):
        raise MartingaleError(f"Large-maturity smile needs 1 inside the domain ({coeffs.lo}, {coeffs.hi})")


def _v0_large(k: float, rate: float, inside: bool) -> float:
    root = math.sqrt(max(rate * (rate - k), 0.0))
    return 2.0 * (2.0 * rate - k + (2.0 * root if inside else -2.0 * root))


def _v1_boundary_limit(coeffs: RegimeCoefficients, p: float, u_p: float) -> Tuple[float, float]:
    """Continuity extension of v1 at a singular strike p = Lambda0'(u_p), u_p in {0, 1}."""
    d0, d1 = derivative_bundle(coeffs, u_p)
    v0 = 2.0 * p if u_p == 1.0 else -2.0 * p
    sign = 1.0 if p >= 0.0 else -1.0
    v1 = 2.0 - 2.0 * math.sqrt(v0 / d0[1]) * (1.0 + sign * (d0[2] / (6.0 * d0[1]) - d1[0]))
    return v0, v1


def largemat_terms(coeffs: RegimeCoefficients, k: float, order: int = 2) -> Terms:
    """v0, v1, v2 of the large-maturity forward smile at per-unit-maturity log-strike k.

    Within BOUNDARY_LIMIT_BAND of Lambda0'(0) or Lambda0'(1) the first-order term is
    its continuity limit and the second-order term is not available.

    Raises:
        MartingaleError: If Lambda0(1) != 0 or 1 is outside the domain
        SingularStrikeError: If order 2 is requested at a singular strike
    """
    _check_martingale(coeffs)
    p0, p1 = coeffs.singular_strikes
    for p, u_p in ((p0, 0.0), (p1, 1.0)):
        if abs(k - p) < BOUNDARY_LIMIT_BAND:
            if order >= 2:
                raise SingularStrikeError(f"Second-order large-maturity term undefined at the singular strike {p:.6g}")
            v0, v1 = _v1_boundary_limit(coeffs, p, u_p)
            logging.debug(f"Large-maturity smile at k={k} uses the continuity limit at {p}")
            return v0, v1, None

    s = solve_saddle(coeffs, k)
    u = s.u_star
    v0 = _v0_large(k, s.lambda_star, p0 < k < p1)
    gap = 4.0 * k * k - v0 * v0
    v1 = 8.0 * v0 * v0 / gap * (s.l1 + math.log(gap / (4.0 * (u - 1.0) * u * v0 ** 1.5 * math.sqrt(s.l0_2))))
    if order < 2:
        return v0, v1, None
    v2 = 4.0 / (v0 * (v0 * v0 - 4.0 * k * k) ** 3) * (
        8.0 * k ** 4 * v1 * v0 ** 2 * (v1 + 6.0)
        - 16.0 * k ** 6 * v1 ** 2
        - 2.0 * upsilon(1.0, s) * v0 ** 3 * (v0 * v0 - 4.0 * k * k) ** 2
        - k * k * v0 ** 4 * (96.0 + v1 * v1 + 8.0 * v1)
        - v0 ** 6 * (v1 + 8.0)
    )
    return v0, v1, v2


def largemat_smile(coeffs: RegimeCoefficients, k: float, tau: float, order: int = 2) -> float:
    """Implied variance at strike e^{k tau} truncated at the requested order."""
    terms = largemat_terms(coeffs, k, order)
    return _truncate(terms, 1.0 / tau, order)


# Heston at-the-money formulas

def heston_nu(h: ForwardHorizon, p: HestonParams, measure: Measure = Measure.TYPE_I) -> Tuple[float, float, float]:
    """First-order coefficients of the Heston diagonal at-the-money polynomial."""
    t, tau = h.t, h.tau
    v, theta, kappa, xi, rho = p.v, p.theta, p.kappa, p.xi, p.rho
    nu0 = (
        tau / 48.0 * (24.0 * kappa * theta + xi ** 2 * (rho ** 2 - 4.0) + 12.0 * v * (xi * rho - 2.0 * kappa))
        - t / 4.0 * (xi ** 2 + 4.0 * kappa * (v - theta))
    )
    nu1 = (
        rho * xi * tau / (24.0 * v) * (xi ** 2 * (1.0 - rho ** 2) - 2.0 * kappa * (v + theta) + xi * rho * v)
        + rho * xi ** 3 * t / (8.0 * v)
    )
    nu2 = (
        (
            80.0 * kappa * theta * (13.0 * rho ** 2 - 6.0)
            + xi ** 2 * (521.0 * rho ** 4 - 712.0 * rho ** 2 + 176.0)
            + 40.0 * rho ** 2 * v * (xi * rho - 2.0 * kappa)
        ) * xi ** 2 * tau / (7680.0 * v ** 2)
        - xi ** 2 * t / (192.0 * v ** 2) * (
            4.0 * kappa * theta * (16.0 - 7.0 * rho ** 2) + (7.0 * rho ** 2 - 4.0) * (9.0 * xi ** 2 + 4.0 * kappa * v)
        )
        + xi ** 2 * t * t / (32.0 * tau * v ** 2) * (4.0 * kappa * (v - 3.0 * theta) + 9.0 * xi ** 2)
    )
    if measure == Measure.TYPE_II:
        nu0 += xi * rho * v * t
        nu2 += rho * xi ** 3 * t * (7.0 * rho ** 2 - 4.0) / (48.0 * v) - rho * xi ** 3 * t * t / (8.0 * v * tau)
    return nu0, nu1, nu2


def heston_atm_terms(k: float, h: ForwardHorizon, p: HestonParams, measure: Measure = Measure.TYPE_I) -> Tuple[float, float]:
    """Zeroth- and first-order parts of the at-the-money polynomial at k."""
    nu0, nu1, nu2 = heston_nu(h, p, measure)
    lead = p.v + p.rho * p.xi / 2.0 * k + ((4.0 - 7.0 * p.rho ** 2) * p.xi ** 2 / (48.0 * p.v) + p.xi ** 2 * h.t / (4.0 * h.tau * p.v)) * k * k
    return lead, nu0 + nu1 * k + nu2 * k * k


def heston_atm_diag(
    k: float,
    h: ForwardHorizon,
    epsilon: float,
    p: HestonParams,
    measure: Measure = Measure.TYPE_I,
) -> float:
    """Implied variance near the money in the Heston diagonal regime."""
    lead, first = heston_atm_terms(k, h, p, measure)
    return lead + epsilon * first


def heston_atm_skew_convexity(
    h: ForwardHorizon,
    epsilon: float,
    p: HestonParams,
    measure: Measure = Measure.TYPE_I,
) -> Tuple[float, float]:
    """At-the-money forward skew and convexity of the implied volatility."""
    t, tau = h.t, h.tau
    v, xi, rho = p.v, p.xi, p.rho
    nu0, nu1, nu2 = heston_nu(h, p, measure)
    skew = xi * rho / (4.0 * math.sqrt(v)) + epsilon * (4.0 * nu1 * v - xi * rho * nu0) / (8.0 * v ** 1.5)
    convexity = (
        xi ** 2 * ((2.0 - 5.0 * rho ** 2) * tau + 6.0 * t) / (24.0 * tau * v ** 1.5)
        - epsilon * (nu0 * xi ** 2 * (3.0 * t + (1.0 - 4.0 * rho ** 2) * tau) + 6.0 * tau * v * (rho * xi * nu1 - 4.0 * nu2 * v))
        / (24.0 * tau * v ** 2.5)
    )
    return skew, convexity


def heston_atm_fwd_spot_gap(h: ForwardHorizon, epsilon: float, p: HestonParams) -> float:
    """First-order difference between the forward and the spot at-the-money volatility."""
    return -epsilon * h.t * (p.xi ** 2 + 4.0 * p.kappa * (p.v - p.theta)) / (8.0 * math.sqrt(p.v))


def heston_lm_atm(t: float, p: HestonParams) -> Tuple[float, float]:
    """Large-maturity forward at-the-money v0(0) and v1(0, t).

    Raises:
        UnsupportedError: Outside Case III
    """
    report = heston_lm_domain(t, p)
    if report.case != DomainCase.III:
        raise UnsupportedError(f"Heston large-maturity at-the-money formulas need Case III, got Case {report.case.value}")
    kappa, theta, xi, rho, v = p.kappa, p.theta, p.xi, p.rho, p.v
    one_minus_rho2 = 1.0 - rho * rho
    eta = math.sqrt(xi * xi * one_minus_rho2 + (2.0 * kappa - rho * xi) ** 2)
    ekt = math.exp(kappa * t)
    delta = 2.0 * kappa * (1.0 + ekt * (1.0 - 2.0 * rho * rho)) - (1.0 - ekt) * (rho * xi + eta)

    v0 = 4.0 * theta * kappa * (eta - 2.0 * kappa + xi * rho) / (xi * xi * one_minus_rho2)
    v1 = (
        16.0 * kappa * v * (rho * xi - 2.0 * kappa + eta) / (delta * xi * xi)
        + 16.0 * kappa * theta / xi ** 2 * math.log(
            delta / ekt * (2.0 * kappa - xi * rho + (1.0 - 2.0 * rho * rho) * eta)
            / (8.0 * kappa * one_minus_rho2 ** 2 * eta)
        )
        - 8.0 * math.log(
            xi * one_minus_rho2 ** 1.5 * math.sqrt(eta * (2.0 * xi * rho - 4.0 * kappa + 2.0 * eta))
            / ((xi * (1.0 - 2.0 * rho * rho) - rho * (eta - 2.0 * kappa)) * (rho * (eta - 2.0 * kappa) + xi))
        )
    )
    return v0, v1


def heston_lm_atm_t_slope(p: HestonParams) -> float:
    """Slope in t of v1(0, t) at t = 0 for uncorrelated Heston."""
    return 2.0 * p.theta / (1.0 + math.sqrt(1.0 + p.xi ** 2 / (4.0 * p.kappa ** 2))) - p.v


# Time-changed Levy first-order t-slopes

def _v1_prefactor(coeffs: RegimeCoefficients, k: float) -> Tuple[float, float]:
    s = solve_saddle(coeffs, k)
    p0, p1 = coeffs.singular_strikes
    v0 = _v0_large(k, s.lambda_star, p0 < k < p1)
    return 8.0 * v0 * v0 / (4.0 * k * k - v0 * v0), s.u_star


def feller_v1_t_slope(k: float, levy, clock: FellerClockParams) -> float:
    """Slope in t of the large-maturity first-order term at t = 0 under a Feller clock."""
    coeffs = tclevy_lm_coeffs(0.0, levy, clock)
    factor, u = _v1_prefactor(coeffs, k)
    v_hat = coeffs.lambda0(u)
    return factor * v_hat * (
        clock.xi ** 2 * clock.v * v_hat / (2.0 * clock.theta ** 2 * clock.kappa ** 2) + 1.0 - clock.v / clock.theta
    )


def gammaou_v1_t_slope(k: float, levy, clock: GammaOUClockParams) -> float:
    """Slope in t of the large-maturity first-order term at t = 0 under a Gamma-OU clock."""
    coeffs = tclevy_lm_coeffs(0.0, levy, clock)
    factor, u = _v1_prefactor(coeffs, k)
    phi = float(levy_exponent(u, levy))
    cap = clock.alpha * clock.lam
    return factor * phi * (clock.lam * (clock.delta - clock.alpha * clock.v) + clock.v * phi) / (cap - phi)


def atm_limit_conditions(coeffs: RegimeCoefficients) -> Dict[str, float]:
    """Combinations of derivatives at 0 that govern the k -> 0 limits of v1 and v2."""
    d0, d1 = derivative_bundle(coeffs, 0.0)
    l2_prime = finite_difference(coeffs.lambda2, 0.0, 1, coeffs.lo, coeffs.hi)
    return {
        "slope": d0[0],
        "first_order": 2.0 * d1[0] + d0[1],
        "second_order": 6.0 * l2_prime + 3.0 * d1[1] + d0[2],
    }


# Grid assembly

def strike_for(k: float, regime: Regime, h: ForwardHorizon) -> float:
    return math.exp(k * h.tau) if regime == Regime.LARGE else math.exp(k)


def _attach_sigmas(point: SmilePoint, terms: Terms, scale: float, order: int) -> SmilePoint:
    values = {"v0": terms[0], "v1": terms[1], "v2": terms[2]}
    flags = list(point.flags)
    total = 0.0
    for i in range(order + 1):
        if terms[i] is None:
            break
        total += terms[i] * scale ** i
        if total > 0.0:
            values[f"sigma{i}"] = math.sqrt(total)
        elif "invalid" not in flags:
            flags.append("invalid")
    return point.model_copy(update={**values, "flags": flags})


def smile_point(
    coeffs: RegimeCoefficients,
    model,
    h: ForwardHorizon,
    k: float,
    order: int = 2,
    with_reference: bool = False,
    quadrature: Optional[QuadratureConfig] = None,
) -> SmilePoint:
    """Expansion terms, implied vols and (optionally) the Fourier reference at one strike.

    Small-maturity points use eps = 1 at the actual horizon; large-maturity points
    read k per unit maturity with eps = 1/tau. Heston strikes inside the
    at-the-money band switch to the at-the-money polynomial.
    """
    regime = coeffs.regime
    point = SmilePoint(k=k, strike=strike_for(k, regime, h))
    scale = 1.0 if regime == Regime.SMALL else 1.0 / h.tau
    try:
        if regime == Regime.SMALL and isinstance(model, HestonModel) and abs(k) < ATM_BAND:
            lead, first = heston_atm_terms(k, h, model.params, model.measure)
            terms: Terms = (lead, first, None)
            point = point.model_copy(update={"flags": ["atm"]})
        elif regime == Regime.SMALL:
            terms = smallmat_terms(coeffs, k)
        else:
            terms = largemat_terms(coeffs, k, order)
        point = _attach_sigmas(point, terms, scale, order)
    except SingularStrikeError as e:
        logging.debug(f"Strike k={k} flagged singular: {e}")
        point = point.model_copy(update={"flags": point.flags + ["singular"]})

    if with_reference:
        convention = StrikeConvention.SCALED if regime == Regime.LARGE else StrikeConvention.LOG
        try:
            ref = reference_vol(model, h, k, convention, quadrature)
        except NumericalError as e:
            logging.warning(f"Fourier reference failed at k={k}: {e}")
            return point.model_copy(update={"flags": point.flags + ["oracle-failed"]})
        errors = {f"err{i}": abs(point.sigma(i) - ref) for i in range(3) if point.sigma(i) is not None}
        point = point.model_copy(update={"sigma_ref": ref, **errors})
    return point


def smile_from_expansion(
    model,
    regime: Regime,
    h: ForwardHorizon,
    grid: Sequence[float],
    order: int = 2,
    with_reference: bool = False,
    quadrature: Optional[QuadratureConfig] = None,
) -> SmileCurve:
    """Assemble a SmileCurve over a strike grid, sequentially and in grid order."""
    curve = SmileCurve(regime=regime, horizon=h, order=order)
    if not grid:
        return curve
    coeffs = coefficients_for(model, regime, h)
    points: List[SmilePoint] = [smile_point(coeffs, model, h, k, order, with_reference, quadrature) for k in grid]
    logging.info(f"Assembled {regime.value}-maturity smile with {len(points)} strikes")
    return curve.model_copy(update={"points": points})
