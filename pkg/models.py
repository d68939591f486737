"""
Forward log-price moment generating functions
==============================================
log E[exp(z X)] with X = X_{t+tau} - X_t, the log-return between the forward-start
date t and maturity t+tau, for:

    Black-Scholes        sigma^2 tau z(z-1)/2
    Heston               Riccati solution (A, B) at tau, propagated back to 0
                         through the CIR transform of V_t
    time-changed Levy    N_{V_t} with an independent Feller (CIR) or Gamma-OU
                         integrated activity rate, or calendar time

Complex arguments are supported throughout. The Riccati block is evaluated in the
form with exp(-d tau) and gamma = (b-d)/(b+d), whose logarithms have arguments in
the right half-plane, so principal branches stay continuous along vertical lines
in the strip of finiteness. Real arguments outside the finite-moment region raise
ExplosionError or DomainError.
"""

import logging
import math
from typing import Tuple, Union

import numpy as np

from config import BISECTION_WIDTH, SMALL_DT_SERIES
from error_handler import DomainError, ExplosionError, UnsupportedError
from schema import (
    BlackScholesModel,
    BrownianDriftParams,
    FellerClockParams,
    ForwardHorizon,
    GammaOUClockParams,
    HestonModel,
    HestonParams,
    Measure,
    TimeChangedLevyModel,
    VarianceGammaParams,
)

Number = Union[float, complex]


def _is_real(z) -> bool:
    return np.isrealobj(z) or (np.ndim(z) == 0 and complex(z).imag == 0.0)


def _finish(value, real_input: bool):
    if real_input:
        return float(np.real(value))
    return complex(value)


def beta_t(kappa: float, xi: float, t: float) -> float:
    """Scale of the CIR transition law at t: xi^2 (1 - e^{-kappa t}) / (4 kappa)."""
    if abs(kappa * t) < 1e-12:
        return xi * xi * t / 4.0
    return xi * xi * (-math.expm1(-kappa * t)) / (4.0 * kappa)


def _riccati_ab(w: complex, b: complex, kappa: float, theta: float, xi: float, tau: float) -> Tuple[complex, complex]:
    """A and B of the affine CIR transform E exp(w int_0^tau V) with linear coefficient b.

    d = sqrt(b^2 - 2 xi^2 w); B solves B' = w - b B + xi^2 B^2 / 2.
    """
    w = complex(w)
    b = complex(b)
    d = np.sqrt(b * b - 2.0 * xi * xi * w)
    if b + d == 0:
        d = -d
    x = d * tau
    if abs(x) < SMALL_DT_SERIES:
        s = 1.0 - x / 2.0 + x * x / 6.0
    else:
        s = -np.expm1(-x) / x
    # (1 - gamma e^{-x}) / (1 - gamma) = 1 + (b - d) tau s / 2
    growth = 1.0 + (b - d) * tau * s / 2.0
    B = 2.0 * w * tau * s / (2.0 + (b - d) * tau * s)
    if abs(x) < SMALL_DT_SERIES:
        log_growth = np.log(growth)
    else:
        g = (b - d) / (b + d)
        log_growth = np.log(1.0 - g * np.exp(-x)) - np.log(1.0 - g)
    A = (kappa * theta / xi ** 2) * ((b - d) * tau - 2.0 * log_growth)
    return complex(A), complex(B)


def _riccati_explosion_time(w: float, b: float, xi: float) -> float:
    """Blow-up time of the real Riccati solution B' = w - b B + xi^2 B^2 / 2, B(0) = 0."""
    if w <= 0.0:
        return math.inf
    k = -b
    disc = b * b - 2.0 * xi * xi * w
    if disc >= 0.0:
        if k <= 0.0:
            return math.inf
        root = math.sqrt(disc)
        if root == 0.0:
            return 2.0 / k
        return math.log((k + root) / (k - root)) / root
    root = math.sqrt(-disc)
    return 2.0 / root * (math.pi / 2.0 - math.atan(k / root))


def heston_explosion_time(u: float, p: HestonParams) -> float:
    """Time at which the Heston moment E[e^{u X_T}] becomes infinite (inf if never)."""
    return _riccati_explosion_time(u * (u - 1.0) / 2.0, p.kappa - p.rho * p.xi * u, p.xi)


def _cir_forward(
    A: complex,
    B: complex,
    v: float,
    decay: float,
    beta: float,
    kappa: float,
    theta: float,
    xi: float,
    z: Number,
    real_input: bool,
) -> complex:
    """Take E exp(A + B V_t) over the CIR law of V_t started at v."""
    denom = 1.0 - 2.0 * beta * B
    if real_input and (not np.isfinite(B) or denom.real <= 0.0):
        raise ExplosionError(f"Forward moment of order {z} is infinite: 1 - 2 beta_t B = {denom.real:.6g}", z=z)
    return A + B * v * decay / denom - (2.0 * kappa * theta / xi ** 2) * np.log(denom)


def heston_forward_lmgf(z: Number, h: ForwardHorizon, p: HestonParams, measure: Measure = Measure.TYPE_I) -> Number:
    """Forward lmgf of the Heston log-return over [t, t+tau].

    Type II replaces kappa by kappa - xi rho inside beta_t and the e^{-kappa t} decay only.

    Args:
        z: Real or complex argument
        h: Forward-start date and maturity
        p: Heston parameters
        measure: Type I (risk-neutral) or Type II (stopped-share-price measure)

    Returns:
        float for real z, complex otherwise

    Raises:
        ExplosionError: If z is real and the moment is infinite at this horizon
    """
    real_input = _is_real(z)
    if real_input:
        u = float(np.real(z))
        if h.tau >= heston_explosion_time(u, p):
            raise ExplosionError(f"Heston moment of order {u} explodes before tau={h.tau}", z=u)

    kappa_fwd = p.kappa if measure == Measure.TYPE_I else p.kappa - p.xi * p.rho
    w = complex(z) * (complex(z) - 1.0) / 2.0
    b = p.kappa - p.rho * p.xi * complex(z)
    A, B = _riccati_ab(w, b, p.kappa, p.theta, p.xi, h.tau)
    value = _cir_forward(
        A, B, p.v, math.exp(-kappa_fwd * h.t), beta_t(kappa_fwd, p.xi, h.t),
        p.kappa, p.theta, p.xi, z, real_input,
    )
    return _finish(value, real_input)


def exponent_domain(spec: Union[VarianceGammaParams, BrownianDriftParams]) -> Tuple[float, float]:
    if isinstance(spec, VarianceGammaParams):
        return -spec.G, spec.M
    return -math.inf, math.inf


def levy_exponent(z: Number, spec: Union[VarianceGammaParams, BrownianDriftParams]) -> Number:
    """Levy exponent phi with log E[e^{z N_s}] = s phi(z); phi(1) = 0."""
    real_input = _is_real(z)
    if isinstance(spec, BrownianDriftParams):
        value = spec.sigma ** 2 * complex(z) * (complex(z) - 1.0) / 2.0
        return _finish(value, real_input)

    lo, hi = exponent_domain(spec)
    re = float(np.real(z))
    if not lo < re < hi:
        raise DomainError(f"Variance-Gamma exponent undefined at Re(z)={re}, domain is ({lo}, {hi})", z=z)
    zc = complex(z)
    value = (
        spec.mu * zc
        + spec.C * (math.log(spec.G) + math.log(spec.M) - np.log(spec.M - zc) - np.log(spec.G + zc))
    )
    return _finish(value, real_input)


def feller_tc_forward_lmgf(
    z: Number,
    h: ForwardHorizon,
    levy: Union[VarianceGammaParams, BrownianDriftParams],
    clock: FellerClockParams,
) -> Number:
    """Forward lmgf of a Levy driver run on an integrated CIR clock."""
    real_input = _is_real(z)
    phi = levy_exponent(z, levy)
    if real_input and h.tau >= _riccati_explosion_time(float(phi), clock.kappa, clock.xi):
        raise ExplosionError(f"Feller clock moment explodes at z={z} (phi={phi}) before tau={h.tau}", z=z)
    A, B = _riccati_ab(phi, clock.kappa, clock.kappa, clock.theta, clock.xi, h.tau)
    value = _cir_forward(
        A, B, clock.v, math.exp(-clock.kappa * h.t), beta_t(clock.kappa, clock.xi, h.t),
        clock.kappa, clock.theta, clock.xi, z, real_input,
    )
    return _finish(value, real_input)


def gammaou_tc_forward_lmgf(
    z: Number,
    h: ForwardHorizon,
    levy: Union[VarianceGammaParams, BrownianDriftParams],
    clock: GammaOUClockParams,
) -> Number:
    """Forward lmgf of a Levy driver run on an integrated Gamma-OU clock."""
    real_input = _is_real(z)
    phi = complex(levy_exponent(z, levy))
    lam, alpha, delta = clock.lam, clock.alpha, clock.delta
    if real_input and phi.real >= alpha * lam:
        raise DomainError(f"Gamma-OU clock requires phi(z) < alpha*lambda={alpha * lam}, got {phi.real} at z={z}", z=z)

    one_minus = -math.expm1(-lam * h.tau)
    B = phi * one_minus / lam
    if phi == 0:
        A = 0j
    else:
        A = lam * delta / (alpha * lam - phi) * (phi * h.tau + alpha * np.log((alpha - B) / alpha))
    growth = math.exp(lam * h.t)
    # log((B - alpha e^{lam t}) / (e^{lam t} (B - alpha)))
    tail = np.log(alpha * growth - B) - np.log(alpha - B) - lam * h.t
    value = A + B * clock.v * math.exp(-lam * h.t) + delta * tail
    return _finish(value, real_input)


def forward_lmgf(model, z: Number, h: ForwardHorizon) -> Number:
    """Dispatch the forward lmgf by model family."""
    if isinstance(model, BlackScholesModel):
        zc = complex(z)
        return _finish(model.sigma ** 2 * h.tau * zc * (zc - 1.0) / 2.0, _is_real(z))
    if isinstance(model, HestonModel):
        return heston_forward_lmgf(z, h, model.params, model.measure)
    if isinstance(model, TimeChangedLevyModel):
        if model.measure == Measure.TYPE_II:
            raise UnsupportedError("Type-II forward smiles are only available for the Heston model")
        if model.clock is None:
            phi = levy_exponent(z, model.exponent)
            return _finish(h.tau * complex(phi), _is_real(z))
        if isinstance(model.clock, FellerClockParams):
            return feller_tc_forward_lmgf(z, h, model.exponent, model.clock)
        return gammaou_tc_forward_lmgf(z, h, model.exponent, model.clock)
    raise UnsupportedError(f"Unknown model {type(model).__name__}")


def _finite_at(model, u: float, h: ForwardHorizon) -> bool:
    try:
        return bool(np.isfinite(forward_lmgf(model, u, h)))
    except (ExplosionError, DomainError):
        return False


def _edge(model, h: ForwardHorizon, start: float, direction: float) -> float:
    inside = start
    step = 1.0
    while step <= 1e4:
        trial = start + direction * step
        if not _finite_at(model, trial, h):
            outside = trial
            break
        inside = trial
        step *= 2.0
    else:
        return direction * math.inf
    while abs(outside - inside) > BISECTION_WIDTH * max(1.0, abs(inside)):
        mid = 0.5 * (inside + outside)
        if _finite_at(model, mid, h):
            inside = mid
        else:
            outside = mid
    return inside


def moment_bounds(model, h: ForwardHorizon) -> Tuple[float, float]:
    """Real-axis interval where the forward lmgf is finite at horizon h.

    Endpoints are found by geometric expansion then bisection on the explosion
    predicate; infinite endpoints are reported as +/-inf.
    """
    if isinstance(model, BlackScholesModel):
        return -math.inf, math.inf
    lo = _edge(model, h, 0.0, -1.0)
    hi = _edge(model, h, 1.0, 1.0)
    logging.debug(f"Moment bounds for {type(model).__name__} at t={h.t}, tau={h.tau}: ({lo}, {hi})")
    return lo, hi
