"""
Sharp large-deviations expansion of forward-start option values.

For a log-strike k away from the singular strikes Lambda0'(0) and Lambda0'(c) the
value of the out-of-the-money payoff expands as

    exp(-Lambda*(k)/eps + k f(eps) + Lambda1(u*)) * Abar_c(k, eps) * A_c(k, eps)

with c = 0 in the diagonal small-maturity regime (f = 1) and c = 1 at large maturity
(f = 1/eps, eps = 1/tau). Between the singular strikes the expansion describes
-E[min(e^{Y f}, e^{k f})] and carries a negative sign.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Tuple

from config import SINGULAR_STRIKE_BAND
from error_handler import ParameterError, SingularStrikeError
from expansions import RegimeCoefficients
from saddle import SaddleData
from schema import PayoffKind, PriceQuote


@dataclass(frozen=True)
class ScalingFunction:
    """Strike scaling f(eps) with eps f(eps) -> c."""
    c: float
    f: Callable[[float], float]

    @classmethod
    def small(cls) -> "ScalingFunction":
        return cls(c=0.0, f=lambda eps: 1.0)

    @classmethod
    def large(cls) -> "ScalingFunction":
        return cls(c=1.0, f=lambda eps: 1.0 / eps)


def classify_payoff(k: float, coeffs: RegimeCoefficients) -> PayoffKind:
    at_zero, at_c = coeffs.singular_strikes
    if k > at_c:
        return PayoffKind.CALL
    if k < at_zero:
        return PayoffKind.PUT
    return PayoffKind.COVERED


def check_strike(k: float, coeffs: RegimeCoefficients) -> None:
    """Reject strikes inside the guard band around Lambda0'(0) and Lambda0'(c)."""
    for point in coeffs.singular_strikes:
        if abs(k - point) < SINGULAR_STRIKE_BAND:
            raise SingularStrikeError(
                f"Log-strike {k} is within {SINGULAR_STRIKE_BAND} of the singular strike {point:.6g}; "
                f"the expansion is not defined there"
            )


def upsilon(b: float, s: SaddleData) -> float:
    """Second-order correction Upsilon(b, k) built from the derivative bundle at u*(k)."""
    u = s.u_star
    if abs(u) < 1e-14 or abs(u - b) < 1e-14:
        raise SingularStrikeError(f"Saddlepoint u*={u} coincides with a singular point (0 or {b})")
    l02, l03, l04 = s.l0_2, s.l0_3, s.l0_4
    l11, l12 = s.l1_1, s.l1_2
    return (
        s.l2
        - 5.0 * l03 ** 2 / (24.0 * l02 ** 3)
        + (4.0 * l11 * l03 + l04) / (8.0 * l02 ** 2)
        - (l11 ** 2 + l12) / (2.0 * l02)
        - l03 / (2.0 * u * l02 ** 2)
        - l03 / (2.0 * (u - b) * l02 ** 2)
        - (l11 * (b - 2.0 * u) + 3.0) / (u * (u - b) * l02)
        - b * b / (u * u * (u - b) ** 2 * l02)
    )


def _prefactor(s: SaddleData, c: float, eps: float, f: float) -> float:
    u = s.u_star
    head = c * math.sqrt(eps) if c > 0.0 else eps ** 1.5 * f
    return head / (u * (u - c) * math.sqrt(2.0 * math.pi * s.l0_2))


def _correction(s: SaddleData, c: float, eps: float, f: float) -> float:
    u = s.u_star
    tail = u * (eps * f - c) / ((u - c) * c) if c > 0.0 else eps * f / u
    return 1.0 + upsilon(c, s) * eps + tail


def fso_price_expansion(
    coeffs: RegimeCoefficients,
    s: SaddleData,
    scaling: ScalingFunction,
    epsilon: float,
    order: int = 2,
    plain_call: bool = False,
) -> PriceQuote:
    """Expansion of the forward-start option value at log-strike s.k.

    Args:
        coeffs: Regime coefficients the saddlepoint was solved on
        s: Saddlepoint data at k
        scaling: Strike scaling of the regime
        epsilon: Expansion parameter (> 0)
        order: 0 leading prefactor only, 1 adds Lambda1 to the exponent, 2 adds the full correction
        plain_call: Convert the out-of-the-money (or covered) value to a call via parity

    Returns:
        PriceQuote with the signed value and the truncations at orders 0, 1, 2

    Raises:
        ParameterError: If epsilon is not positive
        SingularStrikeError: If k is within the guard band of a singular strike
    """
    if epsilon <= 0.0:
        raise ParameterError(f"Expansion parameter must be positive, got {epsilon}")
    k = s.k
    check_strike(k, coeffs)
    c = scaling.c
    f = scaling.f(epsilon)
    kind = classify_payoff(k, coeffs)

    prefactor = _prefactor(s, c, epsilon, f)
    correction = _correction(s, c, epsilon, f)
    base = -s.lambda_star / epsilon + k * f
    terms = [
        math.exp(base) * prefactor,
        math.exp(base + s.l1) * prefactor,
        math.exp(base + s.l1) * prefactor * correction,
    ]

    if plain_call:
        at_zero, at_c = coeffs.singular_strikes
        shift = 0.0
        if k < at_c:
            shift += math.exp(coeffs.rescaled_lmgf(f * epsilon, epsilon) / epsilon)
        if k < at_zero:
            shift -= math.exp(k * f)
        terms = [term + shift for term in terms]

    logging.debug(f"Price expansion at k={k}, eps={epsilon}: kind={kind.value}, terms={terms}")
    return PriceQuote(
        k=k,
        epsilon=epsilon,
        payoff_kind=kind,
        leading=abs(math.exp(base + s.l1) * prefactor),
        correction=correction,
        price=terms[order],
        order_terms=terms,
    )


def bs_smallmat_price_closed(k: float, sigma: float, tau: float, eps: float) -> float:
    """Out-of-the-money forward-start value in Black-Scholes at small maturity."""
    if k == 0.0:
        raise SingularStrikeError("The small-maturity Black-Scholes expansion is not defined at k=0")
    total = sigma * sigma * tau * eps
    return (
        math.exp(k / 2.0 - k * k / (2.0 * total))
        * total ** 1.5 / (k * k * math.sqrt(2.0 * math.pi))
        * (1.0 - (3.0 / (k * k) + 0.125) * total)
    )


def bs_largemat_price_closed(k: float, sigma: float, tau: float) -> Tuple[float, PayoffKind]:
    """Large-maturity Black-Scholes value at strike e^{k tau} and its payoff classification."""
    s2 = sigma * sigma
    half = s2 / 2.0
    if k == half or k == -half:
        raise SingularStrikeError(f"The large-maturity Black-Scholes expansion is not defined at k={k}")
    if k > half:
        kind = PayoffKind.CALL
    elif k < -half:
        kind = PayoffKind.PUT
    else:
        kind = PayoffKind.COVERED
    gap = 4.0 * k * k - s2 * s2
    rate = (k + half) ** 2 / (2.0 * s2)
    value = (
        math.exp(-tau * (rate - k))
        * 4.0 * sigma ** 3 / (gap * math.sqrt(2.0 * math.pi * tau))
        * (1.0 - 4.0 * s2 * (s2 * s2 + 12.0 * k * k) / (gap * gap * tau))
    )
    return value, kind
