"""
Regime coefficients of the rescaled forward lmgf.

For every model and regime the rescaled lmgf expands as

    Lambda_eps(u) = Lambda0(u) + eps Lambda1(u) + eps^2 Lambda2(u) + O(eps^3)

on an effective limiting domain D0. This module builds those coefficient functions
(with an analytic first derivative of Lambda0, which drives the saddlepoint solver),
the domain with its boundary types, and diagnostics that check the expansion against
the exact forward lmgf.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from config import BISECTION_WIDTH, LAMBDA2_EPS_POWERS, REALNESS_TOL
from error_handler import (
    ExplosionError,
    MartingaleError,
    NumericalError,
    UnsupportedError,
)
from models import beta_t, exponent_domain, forward_lmgf, heston_forward_lmgf, levy_exponent
from schema import (
    BlackScholesModel,
    BoundaryKind,
    BrownianDriftParams,
    DomainCase,
    DomainReport,
    FellerClockParams,
    ForwardHorizon,
    GammaOUClockParams,
    HestonLMDomainReport,
    HestonModel,
    HestonParams,
    Measure,
    Regime,
    ResidualTable,
    TailProfile,
    TimeChangedLevyModel,
    VarianceGammaParams,
)

RealFn = Callable[[float], float]


def _zero(u: float) -> float:
    return 0.0


@dataclass(frozen=True)
class RegimeCoefficients:
    """Lambda0, Lambda1, Lambda2 of one model/regime pair plus the limiting domain."""
    regime: Regime
    horizon: ForwardHorizon
    c: float
    lambda0: RealFn
    lambda0_prime: RealFn
    lambda1: RealFn
    lambda2: RealFn
    lo: float
    hi: float
    lo_kind: BoundaryKind
    hi_kind: BoundaryKind
    rescaled_lmgf: Callable[[float, float], float]
    lambda0_complex: Optional[Callable[[complex], complex]] = None
    # Analytic (Lambda0'', Lambda0''', Lambda0'''') when available
    lambda0_higher: Optional[Callable[[float], Tuple[float, float, float]]] = None
    # Analytic (Lambda1', Lambda1'') when available
    lambda1_derivatives: Optional[Callable[[float], Tuple[float, float]]] = None
    label: str = ""

    def contains(self, u: float) -> bool:
        return self.lo < u < self.hi

    @property
    def singular_strikes(self) -> Tuple[float, float]:
        return self.lambda0_prime(0.0), self.lambda0_prime(self.c)

    def report(self) -> DomainReport:
        return DomainReport(
            regime=self.regime,
            lo=self.lo,
            hi=self.hi,
            lo_kind=self.lo_kind,
            hi_kind=self.hi_kind,
            singular_strikes=self.singular_strikes,
        )


def _kind(bound: float, finite_kind: BoundaryKind) -> BoundaryKind:
    return BoundaryKind.INFINITE if math.isinf(bound) else finite_kind


# Black-Scholes

def bs_coeffs(sigma: float, regime: Regime, h: ForwardHorizon) -> RegimeCoefficients:
    """Exact coefficients of the Black-Scholes forward lmgf (the expansion terminates)."""
    s2 = sigma * sigma
    if regime == Regime.SMALL:
        tau = h.tau
        return RegimeCoefficients(
            regime=regime,
            horizon=h,
            c=0.0,
            lambda0=lambda u: 0.5 * u * u * s2 * tau,
            lambda0_prime=lambda u: u * s2 * tau,
            lambda1=lambda u: -0.5 * u * s2 * tau,
            lambda2=_zero,
            lo=-math.inf,
            hi=math.inf,
            lo_kind=BoundaryKind.INFINITE,
            hi_kind=BoundaryKind.INFINITE,
            rescaled_lmgf=lambda u, eps: 0.5 * s2 * tau * (u * u - eps * u),
            lambda0_complex=lambda z: 0.5 * z * z * s2 * tau,
            lambda0_higher=lambda u: (s2 * tau, 0.0, 0.0),
            lambda1_derivatives=lambda u: (-0.5 * s2 * tau, 0.0),
            label="bs-small",
        )
    return RegimeCoefficients(
        regime=regime,
        horizon=h,
        c=1.0,
        lambda0=lambda u: 0.5 * s2 * u * (u - 1.0),
        lambda0_prime=lambda u: s2 * (u - 0.5),
        lambda1=_zero,
        lambda2=_zero,
        lo=-math.inf,
        hi=math.inf,
        lo_kind=BoundaryKind.INFINITE,
        hi_kind=BoundaryKind.INFINITE,
        rescaled_lmgf=lambda u, eps: 0.5 * s2 * u * (u - 1.0),
        lambda0_complex=lambda z: 0.5 * s2 * z * (z - 1.0),
        lambda0_higher=lambda u: (s2, 0.0, 0.0),
        lambda1_derivatives=lambda u: (0.0, 0.0),
        label="bs-large",
    )


# Heston, diagonal small-maturity regime

def _diag_denominator(u: complex, t: float, tau: float, p: HestonParams) -> complex:
    """xi rho_bar u cot(a u) - xi rho u - xi^2 t u^2 / 2, with a = xi rho_bar tau / 2."""
    a = p.xi * p.rho_bar * tau / 2.0
    au = a * u
    if abs(au) < 1e-4:
        ucot = (1.0 - au * au / 3.0 - au ** 4 / 45.0) / a
    else:
        ucot = u * np.cos(au) / np.sin(au)
    return p.xi * p.rho_bar * ucot - p.xi * p.rho * u - 0.5 * p.xi ** 2 * t * u * u


def heston_diag_xi(u: Union[float, complex], t: float, tau: float, p: HestonParams):
    """Limit lmgf u^2 v / denominator of the diagonal small-maturity regime."""
    den = _diag_denominator(u, t, tau, p)
    value = u * u * p.v / den
    if isinstance(u, complex):
        return complex(value)
    return float(np.real(value))


def heston_diag_xi_prime(u: float, t: float, tau: float, p: HestonParams) -> float:
    if u == 0.0:
        return 0.0
    a = p.xi * p.rho_bar * tau / 2.0
    au = a * u
    den = float(np.real(_diag_denominator(u, t, tau, p)))
    xi_val = u * u * p.v / den
    if abs(au) < 1e-4:
        u_over_sin = (1.0 + au * au / 6.0) / a
    else:
        u_over_sin = u / math.sin(au)
    # (Xi / v) csc^2(a u) = (u / sin(a u))^2 / den
    csc_term = u_over_sin ** 2 / den
    return (u * p.v / den) * (1.0 + 0.5 * p.xi ** 2 * t * xi_val / p.v + 0.5 * p.xi ** 2 * p.rho_bar ** 2 * tau * csc_term)


def heston_diag_bounds(tau: float, p: HestonParams) -> Tuple[float, float]:
    """Moment-explosion bounds (u-, u+) of the diagonal regime at t = 0."""
    scale = 2.0 / (p.rho_bar * p.xi * tau)
    upper = scale * math.atan2(p.rho_bar, p.rho)
    return upper - scale * math.pi, upper


def _real_part(value: complex, u: float) -> float:
    """Real value of a term that is real in exact arithmetic."""
    if abs(value.imag) > REALNESS_TOL * max(1.0, abs(value.real)):
        logging.error(f"Imaginary residue {value.imag:.3e} in diagonal first-order term at u={u}")
        raise NumericalError(f"Diagonal first-order term is not real at u={u}: imaginary part {value.imag:.3e}")
    return float(value.real)


def _diag_l(u: float, t: float, tau: float, p: HestonParams, measure: Measure) -> float:
    if u == 0.0:
        return 0.0
    kappa, theta, xi, rho, rho_bar = p.kappa, p.theta, p.xi, p.rho, p.rho_bar
    kappa_fwd = kappa if measure == Measure.TYPE_I else kappa - xi * rho
    s = 1.0 if u >= 0 else -1.0
    d0 = xi * rho_bar * s
    d1 = 1j * (2.0 * kappa * rho - xi) * s / (2.0 * rho_bar)
    g0 = (1j * rho - rho_bar * s) / (1j * rho + rho_bar * s)
    g1 = (2.0 * kappa - xi * rho) * s / (xi * rho_bar * (rho_bar + 1j * rho * s) ** 2)

    phase = d0 * tau * u
    e_minus = np.exp(-1j * phase)
    e_plus = np.exp(1j * phase)
    one_minus = 1.0 - g0 * e_minus
    lead = 1j * xi * rho - d0

    l0 = (kappa * theta / xi ** 2) * (-xi * rho * tau * u - 2.0 * math.log(abs(one_minus / (1.0 - g0))))
    bracket = (
        lead * 1j * d1 * tau * u
        + (d1 - kappa) * (1.0 - e_plus)
        + lead * (1.0 - e_minus) * (g1 - 1j * d1 * g0 * tau * u) / one_minus
    )
    l1 = _real_part(e_minus / (xi ** 2 * one_minus) * bracket, u)

    den_t = float(np.real(_diag_denominator(u, t, tau, p)))
    den_0 = float(np.real(_diag_denominator(u, 0.0, tau, p)))
    xi_t = u * u * p.v / den_t
    xi_0 = u * u * p.v / den_0
    ratio = den_0 / den_t
    return (
        l0
        + ratio ** 2 * p.v * l1
        - xi_t ** 2 * kappa_fwd * xi ** 2 * t * t / (4.0 * p.v)
        - xi_t * kappa_fwd * t
        - (2.0 * kappa * theta / xi ** 2) * math.log(1.0 - xi_0 * xi ** 2 * t / (2.0 * p.v))
    )


def _richardson(values: Sequence[float], ratio: float = 2.0) -> float:
    """Neville table for samples at h, h/ratio, h/ratio^2, ... with error in powers of h."""
    table = list(values)
    power = 1
    while len(table) > 1:
        factor = ratio ** power
        table = [(factor * table[i + 1] - table[i]) / (factor - 1.0) for i in range(len(table) - 1)]
        power += 1
    return table[0]


@lru_cache(maxsize=8192)
def _diag_lambda2(u: float, t: float, tau: float, p: HestonParams, measure: Measure) -> float:
    if u == 0.0:
        return 0.0
    xi0 = heston_diag_xi(u, t, tau, p)
    l1 = _diag_l(u, t, tau, p, measure)
    for shift in (0, 2, 4):
        powers = [k + shift for k in LAMBDA2_EPS_POWERS]
        try:
            samples = []
            for k in powers:
                eps = 2.0 ** (-k)
                lam = eps * heston_forward_lmgf(u / eps, ForwardHorizon(t=eps * t, tau=eps * tau), p, measure)
                samples.append((lam - xi0 - eps * l1) / (eps * eps))
        except ExplosionError:
            logging.debug(f"Epsilon ladder {powers} leaves the finite-moment region at u={u}, shifting")
            continue
        value = _richardson(samples)
        logging.debug(f"Second-order diagonal coefficient at u={u}: samples={samples}, extrapolated={value}")
        return value
    raise NumericalError(f"Cannot extract the second-order diagonal coefficient at u={u}: moments explode on every ladder")


def _diag_domain(h: ForwardHorizon, p: HestonParams) -> Tuple[float, float]:
    u_minus, u_plus = heston_diag_bounds(h.tau, p)
    if h.t == 0.0:
        return u_minus, u_plus
    level = 2.0 * p.v / (p.xi ** 2 * h.t)

    def excess(u: float) -> float:
        return heston_diag_xi(u, 0.0, h.tau, p) - level

    edge = 1e-12
    lo = brentq(excess, u_minus * (1.0 - edge), 0.0, xtol=BISECTION_WIDTH)
    hi = brentq(excess, 0.0, u_plus * (1.0 - edge), xtol=BISECTION_WIDTH)
    return lo, hi


def heston_diag_coeffs(h: ForwardHorizon, p: HestonParams, measure: Measure = Measure.TYPE_I) -> RegimeCoefficients:
    """Diagonal small-maturity coefficients of the Heston forward lmgf.

    Lambda0 and Lambda1 are closed form; Lambda2 is the Richardson limit of the
    scaled residual of the exact lmgf and is cached per argument.

    Args:
        h: Forward-start date t and maturity tau of the unscaled problem
        p: Heston parameters
        measure: Type I or Type II forward-start payoff

    Returns:
        RegimeCoefficients on the open domain {Xi(u, 0, tau) < 2v / (xi^2 t)}
    """
    t, tau = h.t, h.tau
    lo, hi = _diag_domain(h, p)
    logging.info(f"Heston diagonal domain at t={t}, tau={tau}: ({lo:.6g}, {hi:.6g})")

    def rescaled(u: float, eps: float) -> float:
        return eps * heston_forward_lmgf(u / eps, ForwardHorizon(t=eps * t, tau=eps * tau), p, measure)

    return RegimeCoefficients(
        regime=Regime.SMALL,
        horizon=h,
        c=0.0,
        lambda0=lambda u: heston_diag_xi(u, t, tau, p),
        lambda0_prime=lambda u: heston_diag_xi_prime(u, t, tau, p),
        lambda1=lambda u: _diag_l(u, t, tau, p, measure),
        lambda2=lambda u: _diag_lambda2(float(u), t, tau, p, measure),
        lo=lo,
        hi=hi,
        lo_kind=BoundaryKind.OPEN,
        hi_kind=BoundaryKind.OPEN,
        rescaled_lmgf=rescaled,
        lambda0_complex=lambda z: heston_diag_xi(complex(z), t, tau, p),
        label=f"heston-diag-{measure.value}",
    )


# Heston, large-maturity regime

def _lm_quadratic(p: HestonParams) -> Tuple[float, float, float]:
    """d(u)^2 = a + b u + c u^2."""
    return p.kappa ** 2, p.xi * (p.xi - 2.0 * p.kappa * p.rho), -(p.xi ** 2) * p.rho_bar ** 2


def heston_lm_v(u, p: HestonParams):
    a, b, c = _lm_quadratic(p)
    d = np.sqrt(a + b * u + c * u * u + 0j) if isinstance(u, complex) else math.sqrt(max(a + b * u + c * u * u, 0.0))
    return (p.kappa * p.theta / p.xi ** 2) * (p.kappa - p.rho * p.xi * u - d)


def heston_lm_v_derivatives(u: float, p: HestonParams) -> Tuple[float, float, float, float]:
    """V', V'', V''', V'''' from the closed-form derivatives of d = sqrt(a + b u + c u^2)."""
    a, b, c = _lm_quadratic(p)
    d = math.sqrt(a + b * u + c * u * u)
    q1 = b + 2.0 * c * u
    d1 = q1 / (2.0 * d)
    d2 = c / d - q1 ** 2 / (4.0 * d ** 3)
    d3 = -3.0 * c * q1 / (2.0 * d ** 3) + 3.0 * q1 ** 3 / (8.0 * d ** 5)
    d4 = -3.0 * c * c / d ** 3 + 4.5 * c * q1 ** 2 / d ** 5 - 15.0 * q1 ** 4 / (16.0 * d ** 7)
    scale = p.kappa * p.theta / p.xi ** 2
    return scale * (-p.rho * p.xi - d1), -scale * d2, -scale * d3, -scale * d4


def heston_lm_domain(t: float, p: HestonParams) -> HestonLMDomainReport:
    """Correlation thresholds, explosion bounds and case of the large-maturity domain.

    Raises:
        UnsupportedError: If kappa <= rho xi
    """
    kappa, xi, rho = p.kappa, p.xi, p.rho
    if kappa <= rho * xi:
        raise UnsupportedError(
            f"Large-maturity Heston needs kappa > rho*xi (kappa={kappa}, rho*xi={rho * xi}): the limit lmgf is not essentially smooth"
        )
    one_minus_rho2 = 1.0 - rho * rho
    eta = math.sqrt(xi * xi * one_minus_rho2 + (2.0 * kappa - rho * xi) ** 2)
    u_minus = (xi - 2.0 * kappa * rho - eta) / (2.0 * xi * one_minus_rho2)
    u_plus = (xi - 2.0 * kappa * rho + eta) / (2.0 * xi * one_minus_rho2)

    ekt = math.exp(kappa * t)
    root = math.sqrt(16.0 * kappa ** 2 * ekt ** 2 + xi ** 2 * (1.0 - ekt) ** 2)
    rho_minus = (xi * (ekt ** 2 - 1.0) - (ekt + 1.0) * root) / (8.0 * kappa * ekt ** 2)
    rho_plus = (xi * (ekt ** 2 - 1.0) + (ekt + 1.0) * root) / (8.0 * kappa * ekt ** 2)

    u_star_minus = u_star_plus = None
    if t > 0.0:
        psi = xi * (ekt - 1.0) - 4.0 * kappa * rho * ekt
        disc = psi * psi - 16.0 * kappa ** 2 * ekt
        if disc >= 0.0:
            nu = math.sqrt(disc)
            u_star_minus = (psi - nu) / (2.0 * xi * (ekt - 1.0))
            u_star_plus = (psi + nu) / (2.0 * xi * (ekt - 1.0))

    if t > 0.0 and rho < rho_minus:
        case = DomainCase.I
        interval = (u_minus, u_star_plus if u_star_plus is not None else math.nan)
        kinds = (BoundaryKind.CLOSED, BoundaryKind.OPEN)
    elif t > 0.0 and rho > rho_plus:
        case = DomainCase.II
        interval = (u_star_minus if u_star_minus is not None else math.nan, u_plus)
        kinds = (BoundaryKind.OPEN, BoundaryKind.CLOSED)
    else:
        case = DomainCase.III
        interval = (u_minus, u_plus)
        kinds = (BoundaryKind.CLOSED, BoundaryKind.CLOSED)

    logging.debug(f"Heston large-maturity domain at t={t}: rho-={rho_minus:.6f}, rho+={rho_plus:.6f}, case {case.value}")
    return HestonLMDomainReport(
        rho_minus=rho_minus,
        rho_plus=rho_plus,
        u_minus=u_minus,
        u_plus=u_plus,
        u_star_minus=u_star_minus,
        u_star_plus=u_star_plus,
        case=case,
        interval=interval,
        interval_kinds=kinds,
    )


def heston_lm_coeffs(t: float, p: HestonParams, measure: Measure = Measure.TYPE_I) -> RegimeCoefficients:
    """Large-maturity coefficients V and H of the Heston forward lmgf (Lambda2 = 0).

    Raises:
        UnsupportedError: Outside Case III, where the limit lmgf is not essentially smooth
    """
    report = heston_lm_domain(t, p)
    kappa, theta, xi, rho = p.kappa, p.theta, p.xi, p.rho
    kappa_fwd = kappa if measure == Measure.TYPE_I else kappa - xi * rho
    beta = beta_t(kappa_fwd, xi, t)
    decay = math.exp(-kappa_fwd * t)
    k_theta = kappa * theta

    if measure == Measure.TYPE_I and report.case != DomainCase.III:
        raise UnsupportedError(
            f"Heston large-maturity domain is Case {report.case.value} (rho={rho} outside "
            f"[{report.rho_minus:.4f}, {min(report.rho_plus, kappa / xi):.4f}]); "
            f"the limit lmgf is not essentially smooth and no expansion is available"
        )
    if measure == Measure.TYPE_II:
        edge = max(heston_lm_v(report.u_minus, p), heston_lm_v(report.u_plus, p))
        if 2.0 * beta * edge >= k_theta:
            raise UnsupportedError(
                f"Type-II Heston large-maturity domain is truncated by the variance law at t={t}; "
                f"the limit lmgf is not essentially smooth"
            )

    def lambda1(u: float) -> float:
        a, b, c = _lm_quadratic(p)
        d = math.sqrt(max(a + b * u + c * u * u, 0.0))
        v_u = heston_lm_v(u, p)
        head = kappa - rho * xi * u
        one_minus_gamma = 2.0 * d / (head + d)
        clock = k_theta - 2.0 * beta * v_u
        return v_u * p.v * decay / clock - (2.0 * k_theta / xi ** 2) * (math.log(clock / k_theta) - math.log(one_minus_gamma))

    model = HestonModel(params=p, measure=measure)
    return RegimeCoefficients(
        regime=Regime.LARGE,
        horizon=ForwardHorizon(t=t, tau=1.0),
        c=1.0,
        lambda0=lambda u: heston_lm_v(u, p),
        lambda0_prime=lambda u: heston_lm_v_derivatives(u, p)[0],
        lambda1=lambda1,
        lambda2=_zero,
        lo=report.u_minus,
        hi=report.u_plus,
        lo_kind=BoundaryKind.CLOSED,
        hi_kind=BoundaryKind.CLOSED,
        rescaled_lmgf=lambda u, eps: eps * forward_lmgf(model, u, ForwardHorizon(t=t, tau=1.0 / eps)),
        lambda0_complex=lambda z: complex(heston_lm_v(complex(z), p)),
        lambda0_higher=lambda u: heston_lm_v_derivatives(u, p)[1:],
        label=f"heston-large-{measure.value}",
    )


# Time-changed Levy, large-maturity regime

def levy_exponent_prime(u: float, spec: Union[VarianceGammaParams, BrownianDriftParams]) -> float:
    if isinstance(spec, BrownianDriftParams):
        return spec.sigma ** 2 * (u - 0.5)
    return spec.mu + spec.C * (1.0 / (spec.M - u) - 1.0 / (spec.G + u))


def _exponent_level_set(spec: Union[VarianceGammaParams, BrownianDriftParams], level: float) -> Tuple[float, float]:
    """Endpoints of {u : phi(u) <= level} for a level above phi's minimum."""
    if isinstance(spec, BrownianDriftParams):
        half_width = math.sqrt(0.25 + 2.0 * level / spec.sigma ** 2)
        return 0.5 - half_width, 0.5 + half_width
    lo, hi = exponent_domain(spec)
    left, right = lo + 1e-12 * abs(lo), hi - 1e-12 * abs(hi)

    def excess(u: float) -> float:
        return float(levy_exponent(u, spec)) - level

    u_lo = brentq(excess, left, 0.0, xtol=BISECTION_WIDTH) if excess(left) > 0.0 else lo
    u_hi = brentq(excess, 1.0, right, xtol=BISECTION_WIDTH) if excess(right) > 0.0 else hi
    return u_lo, u_hi


def _check_martingale(spec) -> None:
    value = float(levy_exponent(1.0, spec))
    if abs(value) > 1e-10:
        raise MartingaleError(f"Levy exponent at one is {value:.3e}, expected 0")


def tclevy_lm_coeffs(
    t: float,
    levy: Union[VarianceGammaParams, BrownianDriftParams],
    clock: Optional[Union[FellerClockParams, GammaOUClockParams]],
) -> RegimeCoefficients:
    """Large-maturity coefficients of a Levy driver under a Feller, Gamma-OU or calendar clock.

    Args:
        t: Forward-start date
        levy: Levy exponent of the driver
        clock: Activity-rate process, or None for calendar time

    Returns:
        RegimeCoefficients with Lambda2 = 0

    Raises:
        MartingaleError: If phi(1) != 0
    """
    _check_martingale(levy)
    model = TimeChangedLevyModel(exponent=levy, clock=clock)

    def phi(u):
        return levy_exponent(u, levy)

    def phi_prime(u: float) -> float:
        return levy_exponent_prime(u, levy)

    def rescaled(u: float, eps: float) -> float:
        return eps * forward_lmgf(model, u, ForwardHorizon(t=t, tau=1.0 / eps))

    common = dict(regime=Regime.LARGE, horizon=ForwardHorizon(t=t, tau=1.0), c=1.0, lambda2=_zero, rescaled_lmgf=rescaled)

    if clock is None:
        lo, hi = exponent_domain(levy)
        return RegimeCoefficients(
            lambda0=lambda u: float(phi(u)),
            lambda0_prime=phi_prime,
            lambda1=_zero,
            lo=lo,
            hi=hi,
            lo_kind=_kind(lo, BoundaryKind.OPEN),
            hi_kind=_kind(hi, BoundaryKind.OPEN),
            lambda0_complex=lambda z: complex(phi(complex(z))),
            lambda1_derivatives=lambda u: (0.0, 0.0),
            label="levy-large",
            **common,
        )

    if isinstance(clock, FellerClockParams):
        kappa, theta, xi, v = clock.kappa, clock.theta, clock.xi, clock.v
        k_theta = kappa * theta
        beta = beta_t(kappa, xi, t)
        decay = math.exp(-kappa * t)
        level = kappa ** 2 / (2.0 * xi ** 2)
        lo, hi = _exponent_level_set(levy, level)

        def v_hat(u):
            root = np.sqrt(kappa ** 2 - 2.0 * phi(u) * xi ** 2 + 0j)
            value = (k_theta / xi ** 2) * (kappa - root)
            return complex(value) if isinstance(u, complex) else float(value.real)

        def v_hat_prime(u: float) -> float:
            root = math.sqrt(max(kappa ** 2 - 2.0 * float(phi(u)) * xi ** 2, 0.0))
            return k_theta * phi_prime(u) / root

        def h_hat(u: float) -> float:
            d = math.sqrt(max(kappa ** 2 - 2.0 * float(phi(u)) * xi ** 2, 0.0))
            one_minus_gamma = 2.0 * d / (kappa + d)
            vh = v_hat(u)
            level_t = k_theta - 2.0 * beta * vh
            return vh * v * decay / level_t - (2.0 * k_theta / xi ** 2) * (math.log(level_t / k_theta) - math.log(one_minus_gamma))

        return RegimeCoefficients(
            lambda0=v_hat,
            lambda0_prime=v_hat_prime,
            lambda1=h_hat,
            lo=lo,
            hi=hi,
            lo_kind=_kind(lo, BoundaryKind.CLOSED),
            hi_kind=_kind(hi, BoundaryKind.CLOSED),
            lambda0_complex=lambda z: v_hat(complex(z)),
            label="levy-feller-large",
            **common,
        )

    lam, alpha, delta, v = clock.lam, clock.alpha, clock.delta, clock.v
    cap = alpha * lam
    lo, hi = _exponent_level_set(levy, cap)

    def v_tilde(u):
        ph = phi(u)
        return ph * lam * delta / (cap - ph)

    def v_tilde_prime(u: float) -> float:
        ph = float(phi(u))
        return lam * delta * cap * phi_prime(u) / (cap - ph) ** 2

    def h_tilde(u: float) -> float:
        ph = float(phi(u))
        growth = math.exp(lam * t)
        return (
            lam * alpha * delta / (cap - ph) * math.log1p(-ph / cap)
            + ph * v / (lam * growth)
            + delta * math.log((cap * growth - ph) / (growth * (cap - ph)))
        )

    return RegimeCoefficients(
        lambda0=lambda u: float(v_tilde(u)),
        lambda0_prime=v_tilde_prime,
        lambda1=h_tilde,
        lo=lo,
        hi=hi,
        lo_kind=_kind(lo, BoundaryKind.OPEN),
        hi_kind=_kind(hi, BoundaryKind.OPEN),
        lambda0_complex=lambda z: complex(v_tilde(complex(z))),
        label="levy-gammaou-large",
        **common,
    )


def coefficients_for(model, regime: Regime, h: ForwardHorizon) -> RegimeCoefficients:
    """Build the coefficients of any supported model/regime pair.

    Raises:
        UnsupportedError: For combinations without an expansion
    """
    if isinstance(model, BlackScholesModel):
        coeffs = bs_coeffs(model.sigma, regime, h)
    elif isinstance(model, HestonModel):
        if regime == Regime.SMALL:
            coeffs = heston_diag_coeffs(h, model.params, model.measure)
        else:
            coeffs = heston_lm_coeffs(h.t, model.params, model.measure)
    elif isinstance(model, TimeChangedLevyModel):
        if model.measure == Measure.TYPE_II:
            raise UnsupportedError("Type-II forward smiles are only available for the Heston model")
        if regime == Regime.SMALL:
            raise UnsupportedError(
                "Diagonal small-maturity expansions need a vanishing limit mean; jump models are only supported at large maturity"
            )
        coeffs = tclevy_lm_coeffs(h.t, model.exponent, model.clock)
    else:
        raise UnsupportedError(f"Unknown model {type(model).__name__}")
    logging.info(f"Built {coeffs.label} coefficients on ({coeffs.lo:.6g}, {coeffs.hi:.6g})")
    return coeffs


def domain_report(model, regime: Regime, h: ForwardHorizon) -> DomainReport:
    """Domain, boundary types and singular strikes; Heston large maturity adds the case analysis."""
    if isinstance(model, HestonModel) and regime == Regime.LARGE:
        # Reported for every case, including those without an expansion
        heston = heston_lm_domain(h.t, model.params)
        lo, hi = heston.interval
        return DomainReport(
            regime=regime,
            lo=lo,
            hi=hi,
            lo_kind=heston.interval_kinds[0],
            hi_kind=heston.interval_kinds[1],
            singular_strikes=(
                heston_lm_v_derivatives(0.0, model.params)[0],
                heston_lm_v_derivatives(1.0, model.params)[0],
            ),
            heston=heston,
        )
    return coefficients_for(model, regime, h).report()


# Diagnostics

def expansion_residual(model, regime: Regime, h: ForwardHorizon, u: float, eps_grid: Sequence[float]) -> ResidualTable:
    """Remainder Lambda_eps(u) - Lambda0 - eps Lambda1 - eps^2 Lambda2 and its log-log slope."""
    coeffs = coefficients_for(model, regime, h)
    l0, l1, l2 = coeffs.lambda0(u), coeffs.lambda1(u), coeffs.lambda2(u)
    residuals = [coeffs.rescaled_lmgf(u, eps) - l0 - eps * l1 - eps * eps * l2 for eps in eps_grid]

    eps_arr = np.asarray(eps_grid, dtype=float)
    res_arr = np.abs(np.asarray(residuals, dtype=float))
    mask = res_arr > 0.0
    if mask.sum() < 2:
        slope = math.inf
    else:
        slope = float(np.polyfit(np.log(eps_arr[mask]), np.log(res_arr[mask]), 1)[0])
    logging.debug(f"Residuals of {coeffs.label} at u={u}: {residuals}, slope={slope}")
    return ResidualTable(epsilons=list(map(float, eps_grid)), residuals=residuals, slope=slope)


def tail_profile(coeffs: RegimeCoefficients, p_r: float, p_i: Sequence[float]) -> TailProfile:
    """Sample Re Lambda0(p_r + i p_i) and flag whether the profile peaks only at p_i = 0."""
    if coeffs.lambda0_complex is None:
        raise UnsupportedError(f"{coeffs.label} has no complex extension of the limit lmgf")
    values = [float(np.real(coeffs.lambda0_complex(complex(p_r, y)))) for y in p_i]
    grid = np.asarray(p_i, dtype=float)
    vals = np.asarray(values)
    peak_index = int(np.argmax(vals))
    peak = vals[peak_index]
    margin = 1e-12 * max(1.0, abs(peak))
    peak_at_zero = bool(
        grid[peak_index] == 0.0
        and vals[0] < peak - margin
        and vals[-1] < peak - margin
        and np.all(vals[grid != 0.0] < peak)
    )
    return TailProfile(p_r=p_r, p_i=list(map(float, p_i)), values=values, peak_at_zero=peak_at_zero)
