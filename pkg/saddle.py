"""Saddlepoint u*(k) of the limit lmgf and the derivatives the expansions need there."""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Tuple

from scipy.optimize import brentq

from config import (
    FD_BASE_STEP,
    FD_MAX_SHRINK,
    FD_ORDER_SCALE,
    FD_RELATIVE_STEP,
    SADDLE_TOLERANCE,
    SINGULAR_STRIKE_BAND,
)
from error_handler import BoundaryClearanceError, BoundarySaturationError, NumericalError
from expansions import RegimeCoefficients, heston_lm_v
from models import levy_exponent
from schema import HestonParams, VarianceGammaParams


@dataclass(frozen=True)
class SaddleData:
    """Saddlepoint, rate function and derivative bundle at one log-strike.

    d0 holds Lambda0' .. Lambda0'''' and d1 holds Lambda1', Lambda1'' at u*.
    """
    k: float
    u_star: float
    lambda_star: float
    lambda0: float
    d0: Tuple[float, float, float, float]
    l1: float
    d1: Tuple[float, float]
    l2: float
    singular: bool = False

    @property
    def l0_2(self) -> float:
        return self.d0[1]

    @property
    def l0_3(self) -> float:
        return self.d0[2]

    @property
    def l0_4(self) -> float:
        return self.d0[3]

    @property
    def l1_1(self) -> float:
        return self.d1[0]

    @property
    def l1_2(self) -> float:
        return self.d1[1]


def _slope(coeffs: RegimeCoefficients, u: float) -> float:
    try:
        return coeffs.lambda0_prime(u)
    except (ValueError, ZeroDivisionError, OverflowError, NumericalError):
        return math.nan


def _bracket_side(coeffs: RegimeCoefficients, k: float, anchor: float, bound: float, side: str) -> float:
    """Point between anchor and bound where Lambda0' - k changes sign."""
    sign = 1.0 if side == "upper" else -1.0
    if math.isinf(bound):
        reach = 1.0
        while reach < 1e8:
            point = anchor + sign * reach
            slope = _slope(coeffs, point)
            if not math.isnan(slope) and sign * (slope - k) >= 0.0:
                return point
            reach *= 2.0
    else:
        width = bound - anchor
        for j in range(1, 60):
            point = bound - width * 2.0 ** (-j)
            if point == bound:
                break
            slope = _slope(coeffs, point)
            if math.isnan(slope):
                continue
            if sign * (slope - k) >= 0.0:
                return point
    raise BoundarySaturationError(
        f"No saddlepoint for k={k}: the slope of the limit lmgf saturates at the {side} domain boundary {bound}",
        side=side,
    )


def _root(coeffs: RegimeCoefficients, k: float) -> float:
    anchor = 0.0 if coeffs.contains(0.0) else 0.5 * (coeffs.lo + coeffs.hi)
    start = _slope(coeffs, anchor)
    if start == k:
        return anchor

    def excess(u: float) -> float:
        return coeffs.lambda0_prime(u) - k

    if k > start:
        lo, hi = anchor, _bracket_side(coeffs, k, anchor, coeffs.hi, "upper")
    else:
        lo, hi = _bracket_side(coeffs, k, anchor, coeffs.lo, "lower"), anchor
    logging.debug(f"Saddle bracket for {coeffs.label} at k={k}: [{lo}, {hi}]")
    return brentq(excess, lo, hi, xtol=SADDLE_TOLERANCE, rtol=4.0 * 2.0 ** -52, maxiter=200)


def solve_saddle(coeffs: RegimeCoefficients, k: float) -> SaddleData:
    """Solve Lambda0'(u) = k inside the effective domain and collect the derivative bundle.

    Lambda0' is strictly increasing on the interior, so the root is bracketed from 0
    towards the boundary on the side of k and refined with Brent's method. Strikes
    within the guard band of Lambda0'(0) or Lambda0'(c) are returned with the
    singular annotation; the pricing and smile layers reject them.

    Raises:
        BoundarySaturationError: If Lambda0' stays below (above) k up to the boundary
    """
    u = _root(coeffs, k)
    d0, d1 = derivative_bundle(coeffs, u)
    lambda0 = coeffs.lambda0(u)
    singular = any(abs(k - p) < SINGULAR_STRIKE_BAND for p in coeffs.singular_strikes)
    data = SaddleData(
        k=k,
        u_star=u,
        lambda_star=u * k - lambda0,
        lambda0=lambda0,
        d0=d0,
        l1=coeffs.lambda1(u),
        d1=d1,
        l2=coeffs.lambda2(u),
        singular=singular,
    )
    logging.debug(f"Saddlepoint of {coeffs.label} at k={k}: u*={u}, rate={data.lambda_star}, singular={singular}")
    return data


def heston_lm_saddle_closed(k: float, p: HestonParams) -> Tuple[float, float]:
    """Closed-form large-maturity Heston saddlepoint q*(k) and rate q* k - V(q*)."""
    kappa, theta, xi, rho = p.kappa, p.theta, p.xi, p.rho
    one_minus_rho2 = 1.0 - rho * rho
    eta = math.sqrt(xi * xi * one_minus_rho2 + (2.0 * kappa - rho * xi) ** 2)
    norm = math.sqrt(k * k * xi * xi + 2.0 * k * kappa * theta * rho * xi + (kappa * theta) ** 2)
    q = (xi - 2.0 * kappa * rho + (kappa * theta * rho + k * xi) * eta / norm) / (2.0 * xi * one_minus_rho2)
    return q, q * k - heston_lm_v(q, p)


def vg_saddle_closed(k: float, levy: VarianceGammaParams) -> Tuple[float, float]:
    """Closed-form saddlepoint and rate of the calendar-time Variance-Gamma limit lmgf.

    The root is written so the denominator stays above 2C, which also covers k = mu.
    """
    C, G, M = levy.C, levy.G, levy.M
    x = k - levy.mu
    root = math.sqrt(4.0 * C * C + (G + M) ** 2 * x * x)
    u = (2.0 * G * M * x - 2.0 * C * (G - M)) / (root + 2.0 * C + (G - M) * x)
    return u, u * k - float(levy_exponent(u, levy))


def _stencil(f: Callable[[float], float], u: float, h: float, order: int) -> float:
    if order == 1:
        return (f(u + h) - f(u - h)) / (2.0 * h)
    if order == 2:
        return (f(u + h) - 2.0 * f(u) + f(u - h)) / (h * h)
    return (f(u + 2.0 * h) - 2.0 * f(u + h) + 2.0 * f(u - h) - f(u - 2.0 * h)) / (2.0 * h ** 3)


def finite_difference(
    f: Callable[[float], float],
    u: float,
    order: int,
    lo: float = -math.inf,
    hi: float = math.inf,
) -> float:
    """Richardson-extrapolated central difference of f at u.

    The step is max(FD_BASE_STEP, FD_RELATIVE_STEP |u|) scaled by the derivative
    order, halved until the whole stencil fits strictly inside (lo, hi).

    Raises:
        BoundaryClearanceError: If no admissible step remains after FD_MAX_SHRINK halvings
    """
    h = max(FD_BASE_STEP, FD_RELATIVE_STEP * abs(u)) * FD_ORDER_SCALE[order]
    reach = 2.0 if order == 3 else 1.0
    for _ in range(FD_MAX_SHRINK + 1):
        if lo < u - reach * h and u + reach * h < hi:
            coarse = _stencil(f, u, h, order)
            fine = _stencil(f, u, h / 2.0, order)
            return (4.0 * fine - coarse) / 3.0
        h /= 2.0
    raise BoundaryClearanceError(
        f"Finite-difference stencil of order {order} at u={u} does not fit inside ({lo}, {hi})"
    )


def derivative_bundle(
    coeffs: RegimeCoefficients,
    u: float,
) -> Tuple[Tuple[float, float, float, float], Tuple[float, float]]:
    """Lambda0 derivatives of orders 1-4 and Lambda1 derivatives of orders 1-2 at u.

    Analytic derivatives are used when the coefficients carry them; the others are
    finite differences of the analytic Lambda0' and of Lambda1.
    """
    first = coeffs.lambda0_prime(u)
    if coeffs.lambda0_higher is not None:
        higher = tuple(coeffs.lambda0_higher(u))
    else:
        higher = tuple(
            finite_difference(coeffs.lambda0_prime, u, order, coeffs.lo, coeffs.hi) for order in (1, 2, 3)
        )
    if coeffs.lambda1_derivatives is not None:
        d1 = tuple(coeffs.lambda1_derivatives(u))
    else:
        d1 = tuple(finite_difference(coeffs.lambda1, u, order, coeffs.lo, coeffs.hi) for order in (1, 2))

    if not higher[0] > 0.0:
        raise NumericalError(f"Limit lmgf of {coeffs.label} is not strictly convex at u={u}: second derivative {higher[0]}")
    return (first, *higher), d1
