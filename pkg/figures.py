"""
Datasets behind the published figures, rebuilt from their caption parameters.

A figure is a list of curve requests (smiles computed strike by strike, optionally
with the Fourier reference) plus panels that are evaluated directly (at-the-money
polynomials, tail profiles).
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from expansions import tclevy_lm_coeffs, tail_profile
from schema import (
    CurveRequest,
    FellerClockParams,
    FigurePanel,
    ForwardHorizon,
    GammaOUClockParams,
    HestonModel,
    HestonParams,
    Measure,
    Regime,
    SmileCurve,
    StrikeGrid,
    TimeChangedLevyModel,
    VarianceGammaParams,
)
from smile import heston_atm_diag, smile_from_expansion

FIGURE_NAMES = (
    "hest-diag",
    "hest-large",
    "gou-large",
    "fwd-vs-spot",
    "explosion",
    "feller-fwd-vs-spot",
    "tail-profile",
)

# Caption parameter sets
DIAG_HESTON = HestonParams(v=0.07, theta=0.07, kappa=1.0, xi=0.34, rho=-0.8)
LARGE_HESTON = HestonParams(v=0.07, theta=0.07, kappa=1.5, xi=0.34, rho=-0.25)
EXPLOSION_HESTON = HestonParams(v=0.07, theta=0.07, kappa=1.0, xi=0.5, rho=-0.6)
TYPE_COMPARISON_HESTON = HestonParams(v=0.07, theta=0.07, kappa=1.0, xi=0.34, rho=-0.2)
GOU_VG = VarianceGammaParams(C=6.5, G=11.1, M=33.4)
GOU_CLOCK = GammaOUClockParams(v=1.0, lam=1.8, alpha=0.6, delta=0.6)
FELLER_VG = VarianceGammaParams(C=58.12, G=50.5, M=69.37)


def feller_clock(theta: float) -> FellerClockParams:
    return FellerClockParams(v=1.0, theta=theta, kappa=1.23, xi=1.6)


def _grid(lo: float, hi: float, step: float) -> List[float]:
    return StrikeGrid(lo=lo, hi=hi, step=step).values()


def curve_requests(name: str) -> List[CurveRequest]:
    """Smile curves of a figure, in output order."""
    if name == "hest-diag":
        return [CurveRequest(
            panel="a", error_panel="b", label="heston",
            model=HestonModel(params=DIAG_HESTON), regime=Regime.SMALL,
            horizon=ForwardHorizon(t=0.5, tau=1.0 / 12.0),
            grid=_grid(math.log(0.95), math.log(1.05), 0.0025), reference=True,
        )]
    if name == "hest-large":
        return [CurveRequest(
            panel="a", error_panel="b", label="heston",
            model=HestonModel(params=LARGE_HESTON), regime=Regime.LARGE,
            horizon=ForwardHorizon(t=1.0, tau=5.0),
            grid=_grid(-0.0713, 0.0811, 0.005), reference=True,
        )]
    if name == "gou-large":
        return [CurveRequest(
            panel="a", error_panel="b", label="vg-gammaou",
            model=TimeChangedLevyModel(exponent=GOU_VG, clock=GOU_CLOCK), regime=Regime.LARGE,
            horizon=ForwardHorizon(t=1.0, tau=3.0),
            grid=_grid(-0.12, 0.12, 0.01), reference=True,
        )]
    if name == "fwd-vs-spot":
        requests = []
        for panel, theta in (("a", 0.07), ("b", 0.1)):
            params = HestonParams(v=0.07, theta=theta, kappa=1.0, xi=0.3, rho=-0.6)
            for t in (0.0, 0.5):
                requests.append(CurveRequest(
                    panel=panel, label=f"t={t:g}",
                    model=HestonModel(params=params), regime=Regime.SMALL,
                    horizon=ForwardHorizon(t=t, tau=1.0 / 12.0),
                    grid=_grid(-0.1, 0.1, 0.01),
                ))
        return requests
    if name == "explosion":
        return [
            CurveRequest(
                panel="a", label=f"tau=1/{round(1.0 / tau)}",
                model=HestonModel(params=EXPLOSION_HESTON), regime=Regime.SMALL,
                horizon=ForwardHorizon(t=0.5, tau=tau),
                grid=_grid(-0.1, 0.1, 0.01),
            )
            for tau in (1.0 / 6.0, 1.0 / 12.0, 1.0 / 16.0, 1.0 / 32.0)
        ]
    if name == "feller-fwd-vs-spot":
        requests = []
        for panel, theta in (("a", 0.9), ("b", 1.1)):
            for t in (0.0, 0.5):
                requests.append(CurveRequest(
                    panel=panel, label=f"t={t:g}",
                    model=TimeChangedLevyModel(exponent=FELLER_VG, clock=feller_clock(theta)),
                    regime=Regime.LARGE, horizon=ForwardHorizon(t=t, tau=2.0),
                    grid=_grid(-0.05, 0.05, 0.0025), order=1,
                ))
        return requests
    if name == "tail-profile":
        return []
    raise ValueError(f"unknown figure {name!r}, expected one of {', '.join(FIGURE_NAMES)}")


def direct_panels(name: str) -> List[FigurePanel]:
    """Panels evaluated in closed form rather than strike by strike."""
    if name == "explosion":
        h = ForwardHorizon(t=0.5, tau=1.0 / 12.0)
        rows = []
        for k in _grid(-0.1, 0.1, 0.01):
            type_one = heston_atm_diag(k, h, 1.0, TYPE_COMPARISON_HESTON, Measure.TYPE_I)
            type_two = heston_atm_diag(k, h, 1.0, TYPE_COMPARISON_HESTON, Measure.TYPE_II)
            rows.append([k, _sqrt_or_none(type_one), _sqrt_or_none(type_two)])
        return [FigurePanel(figure=name, panel="b", columns=["k", "typeI_sigma", "typeII_sigma"], rows=rows)]
    if name == "tail-profile":
        coeffs = tclevy_lm_coeffs(0.5, FELLER_VG, feller_clock(0.9))
        p_i = [float(y) for y in np.linspace(-20.0, 20.0, 161)]
        profiles = [tail_profile(coeffs, a, p_i) for a in (-3.0, 0.5, 4.0)]
        for profile in profiles:
            logging.info(f"Tail profile at p_r={profile.p_r}: peak at zero = {profile.peak_at_zero}")
        rows = [[y] + [profile.values[i] for profile in profiles] for i, y in enumerate(p_i)]
        columns = ["p_i"] + [f"a={profile.p_r:g}" for profile in profiles]
        return [FigurePanel(figure=name, panel="a", columns=columns, rows=rows)]
    return []


def _sqrt_or_none(value: float) -> Optional[float]:
    return math.sqrt(value) if value > 0.0 else None


def assemble_panels(name: str, requests: Sequence[CurveRequest], curves: Sequence[SmileCurve]) -> List[FigurePanel]:
    """Lay the computed curves out as one table per panel, keyed by k."""
    tables: Dict[str, Dict[str, list]] = {}

    def table(panel: str, grid: Sequence[float]) -> Dict[str, list]:
        if panel not in tables:
            tables[panel] = {"columns": ["k"], "rows": [[k] for k in grid]}
        return tables[panel]

    for request, curve in zip(requests, curves):
        vols = table(request.panel, request.grid)
        vols["columns"] += [f"{request.label}_sigma{i}" for i in range(request.order + 1)]
        if request.reference:
            vols["columns"].append(f"{request.label}_sigma_ref")
        for row, point in zip(vols["rows"], curve.points):
            row += [point.sigma(i) for i in range(request.order + 1)]
            if request.reference:
                row.append(point.sigma_ref)
        if request.reference and request.error_panel:
            errors = table(request.error_panel, request.grid)
            errors["columns"] += [f"{request.label}_err{i}" for i in range(request.order + 1)]
            for row, point in zip(errors["rows"], curve.points):
                row += [point.error(i) for i in range(request.order + 1)]

    panels = [
        FigurePanel(figure=name, panel=panel, columns=content["columns"], rows=content["rows"])
        for panel, content in tables.items()
    ]
    panels += direct_panels(name)
    return sorted(panels, key=lambda p: p.panel)


def build_figure(
    name: str,
    curve_builder: Optional[Callable[[CurveRequest], SmileCurve]] = None,
) -> List[FigurePanel]:
    """Compute every panel of a figure sequentially."""
    requests = curve_requests(name)
    builder = curve_builder or (
        lambda r: smile_from_expansion(r.model, r.regime, r.horizon, r.grid, r.order, r.reference)
    )
    curves = [builder(request) for request in requests]
    logging.info(f"Built figure {name} from {len(curves)} curves")
    return assemble_panels(name, requests, curves)
