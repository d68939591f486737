"""
Reference forward-start prices and implied volatilities.

Prices come from the damped Fourier representation

    (1/pi) int_0^inf Re[ e^{-(a + i w) k} exp(L(a + 1 + i w)) / ((a + i w)(a + 1 + i w)) ] dw

of the forward lmgf L: a > 0 gives the call, a < -1 the put. The forward is one and
rates are zero throughout.
"""

import logging
import math
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import brentq
from scipy.special import ndtr

from config import (
    IV_LOWER,
    IV_PRICE_TOL,
    IV_UPPER,
    IV_UPPER_EXTENDED,
    IV_VOL_TOL,
    QUAD_ABS_TOL,
    QUAD_INITIAL_UPPER,
    QUAD_LIMIT_SCALE_CAP,
    QUAD_MAX_DEPTH,
    QUAD_MAX_PANELS,
    QUAD_PANEL_SPLITS,
    QUAD_REL_TOL,
)
from error_handler import (
    ConvergenceError,
    ImpliedVolBandError,
    QuadratureError,
    StripError,
)
from models import forward_lmgf, moment_bounds
from schema import ForwardHorizon, ImpliedVolQuery, QuadratureConfig, StrikeConvention

DEFAULT_QUADRATURE = QuadratureConfig(
    abs_tol=QUAD_ABS_TOL,
    rel_tol=QUAD_REL_TOL,
    max_depth=QUAD_MAX_DEPTH,
    initial_upper=QUAD_INITIAL_UPPER,
)


@lru_cache(maxsize=256)
def strip_of_finiteness(model, h: ForwardHorizon) -> Tuple[float, float]:
    return moment_bounds(model, h)


def default_damping(model, h: ForwardHorizon, call: bool = True) -> float:
    lo, hi = strip_of_finiteness(model, h)
    if call:
        return 1.0 if math.isinf(hi) else min(1.0, 0.5 * (hi - 1.0))
    return -2.0 if math.isinf(lo) else max(-2.0, 0.5 * lo - 1.0)


def _check_strip(model, h: ForwardHorizon, damping: float) -> None:
    lo, hi = strip_of_finiteness(model, h)
    if not lo < 1.0 + damping < hi:
        raise StripError(f"Damping {damping} puts 1+a={1.0 + damping} outside the strip of finiteness ({lo}, {hi})")


def _panel_limit(lower: float, upper: float, cfg: QuadratureConfig) -> int:
    scale = min(QUAD_LIMIT_SCALE_CAP, max(1, math.ceil((upper - lower) / cfg.initial_upper)))
    return cfg.max_depth * scale


def _integrate_panel(
    integrand: Callable[[float], float],
    lower: float,
    upper: float,
    cfg: QuadratureConfig,
    splits: int = QUAD_PANEL_SPLITS,
) -> Tuple[float, float, bool]:
    """Integrate one panel, halving it while quad_vec reports an unresolved error.

    Returns the value, the error estimate and whether the tolerance was met. A panel whose
    error estimate is already within tolerance counts as converged even when quad_vec ran
    out of subintervals.
    """
    value, error, info = quad_vec(
        integrand, lower, upper,
        epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=_panel_limit(lower, upper, cfg),
        quadrature="gk15", full_output=True,
    )
    value, error = float(value), float(error)
    if info.success or error <= max(cfg.abs_tol, cfg.rel_tol * abs(value)):
        return value, error, True
    if splits == 0:
        return value, error, False
    logging.debug(f"Splitting panel [{lower}, {upper}] (error estimate {error:.3e})")
    mid = 0.5 * (lower + upper)
    left, left_error, left_ok = _integrate_panel(integrand, lower, mid, cfg, splits - 1)
    right, right_error, right_ok = _integrate_panel(integrand, mid, upper, cfg, splits - 1)
    return left + right, left_error + right_error, left_ok and right_ok


def _integrate(model, h: ForwardHorizon, k: float, damping: float, cfg: QuadratureConfig) -> float:
    def integrand(w: float) -> float:
        z = damping + 1j * w
        psi = np.exp(forward_lmgf(model, z + 1.0, h))
        return float(np.real(np.exp(-z * k) * psi / (z * (z + 1.0))))

    total = 0.0
    lower, upper = 0.0, cfg.initial_upper
    for panel in range(QUAD_MAX_PANELS):
        try:
            value, error, converged = _integrate_panel(integrand, lower, upper, cfg)
        except (OverflowError, ZeroDivisionError, FloatingPointError) as e:
            logging.error(f"Fourier integrand failed on panel [{lower}, {upper}] at k={k}: {e}")
            raise QuadratureError(f"Integrand overflow on panel [{lower}, {upper}]", estimate=total / math.pi) from e
        if not converged:
            logging.error(f"Fourier panel [{lower}, {upper}] unresolved at k={k} (error estimate {error:.3e})")
            raise QuadratureError(
                f"Panel [{lower}, {upper}] did not converge (error estimate {error:.3e})",
                estimate=(total + value) / math.pi,
            )
        total += value
        logging.debug(f"Fourier panel {panel} [{lower}, {upper}]: {value:.3e}")
        if panel > 0 and abs(value) < cfg.abs_tol:
            return total / math.pi
        lower, upper = upper, 2.0 * upper
    raise QuadratureError(
        f"Fourier integral tail still above {cfg.abs_tol} after {QUAD_MAX_PANELS} panels",
        estimate=total / math.pi,
    )


def fourier_forward_call(
    model,
    h: ForwardHorizon,
    k: float,
    damping: Optional[float] = None,
    cfg: Optional[QuadratureConfig] = None,
) -> float:
    """Forward-start call E[(e^X - e^k)^+] by damped Fourier inversion.

    Raises:
        StripError: If 1 + damping is outside the strip of finiteness
        QuadratureError: If the integral does not converge
    """
    damping = default_damping(model, h, call=True) if damping is None else damping
    if damping <= 0.0:
        raise StripError(f"Call damping must be positive, got {damping}")
    _check_strip(model, h, damping)
    return _integrate(model, h, k, damping, cfg or DEFAULT_QUADRATURE)


def fourier_forward_put(
    model,
    h: ForwardHorizon,
    k: float,
    damping: Optional[float] = None,
    cfg: Optional[QuadratureConfig] = None,
) -> float:
    """Forward-start put E[(e^k - e^X)^+] by damped Fourier inversion with damping below -1."""
    damping = default_damping(model, h, call=False) if damping is None else damping
    if damping >= -1.0:
        raise StripError(f"Put damping must be below -1, got {damping}")
    _check_strip(model, h, damping)
    return _integrate(model, h, k, damping, cfg or DEFAULT_QUADRATURE)


def _d_pm(k: float, sigma: float, tau: float) -> Tuple[float, float]:
    width = sigma * math.sqrt(tau)
    return -k / width + width / 2.0, -k / width - width / 2.0


def bs_call(k: float, sigma: float, tau: float) -> float:
    d_plus, d_minus = _d_pm(k, sigma, tau)
    return float(ndtr(d_plus) - math.exp(k) * ndtr(d_minus))


def bs_put(k: float, sigma: float, tau: float) -> float:
    d_plus, d_minus = _d_pm(k, sigma, tau)
    return float(math.exp(k) * ndtr(-d_minus) - ndtr(-d_plus))


def bs_price_from_vol(k: float, sigma: float, tau: float, is_call: bool = True) -> float:
    """Quote a volatility as a unit-forward call or put price at log-strike k."""
    return bs_call(k, sigma, tau) if is_call else bs_put(k, sigma, tau)


def implied_vol(q: ImpliedVolQuery) -> float:
    """Black-Scholes volatility reproducing a call (or put) price on a unit forward.

    Raises:
        ImpliedVolBandError: If the price is outside the open no-arbitrage band
        ConvergenceError: If the bracket cannot be made to straddle the price
    """
    growth = math.exp(q.k)
    if q.is_call:
        floor, cap = max(1.0 - growth, 0.0), 1.0
    else:
        floor, cap = max(growth - 1.0, 0.0), growth
    if not floor < q.price < cap:
        raise ImpliedVolBandError(f"Price {q.price} is outside the no-arbitrage band ({floor}, {cap}) at k={q.k}")

    def excess(sigma: float) -> float:
        return bs_price_from_vol(q.k, sigma, q.tau, q.is_call) - q.price

    lo, hi = q.bracket
    if excess(hi) < 0.0:
        hi = max(hi, IV_UPPER_EXTENDED)
        if excess(hi) < 0.0:
            raise ConvergenceError(f"Implied volatility above {hi} for price {q.price} at k={q.k}")
    if excess(lo) > 0.0:
        if abs(excess(lo)) < IV_PRICE_TOL:
            return lo
        raise ConvergenceError(f"Implied volatility below {lo} for price {q.price} at k={q.k}")
    try:
        return brentq(excess, lo, hi, xtol=IV_VOL_TOL, maxiter=200)
    except RuntimeError as e:
        logging.error(f"Implied volatility root search failed at k={q.k}: {e}")
        raise ConvergenceError(f"Implied volatility did not converge for price {q.price} at k={q.k}") from e


def reference_vol(
    model,
    h: ForwardHorizon,
    k: float,
    convention: StrikeConvention = StrikeConvention.LOG,
    cfg: Optional[QuadratureConfig] = None,
) -> float:
    """Fourier forward implied volatility at one grid value, pricing the out-of-the-money side."""
    x = k * h.tau if convention == StrikeConvention.SCALED else k
    if x < 0.0:
        price = fourier_forward_put(model, h, x, cfg=cfg)
        query = ImpliedVolQuery(price=price, k=x, tau=h.tau, is_call=False, bracket=(IV_LOWER, IV_UPPER))
    else:
        price = fourier_forward_call(model, h, x, cfg=cfg)
        query = ImpliedVolQuery(price=price, k=x, tau=h.tau, is_call=True, bracket=(IV_LOWER, IV_UPPER))
    vol = implied_vol(query)
    logging.debug(f"Reference vol at log-strike {x}: price={price:.6e}, vol={vol:.8f}")
    return vol


def forward_smile_reference(
    model,
    h: ForwardHorizon,
    grid: Sequence[float],
    convention: StrikeConvention = StrikeConvention.LOG,
    cfg: Optional[QuadratureConfig] = None,
) -> List[float]:
    return [reference_vol(model, h, k, convention, cfg) for k in grid]
