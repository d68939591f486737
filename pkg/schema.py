import math
from enum import Enum
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Measure(str, Enum):
    """Pricing measure of the forward-start payoff."""
    TYPE_I = "typeI"
    TYPE_II = "typeII"


class Regime(str, Enum):
    SMALL = "small"
    LARGE = "large"


class PayoffKind(str, Enum):
    CALL = "call"
    PUT = "put"
    COVERED = "covered"


class DomainCase(str, Enum):
    I = "I"
    II = "II"
    III = "III"


class BoundaryKind(str, Enum):
    CLOSED = "closed"
    OPEN = "open"
    INFINITE = "infinite"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class StrikeConvention(str, Enum):
    """Whether grid values are log-strikes k or per-unit-maturity log-strikes (strike e^{k tau})."""
    LOG = "log"
    SCALED = "scaled"


class _Params(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)


# Model parameters

class HestonParams(_Params):
    """Heston stochastic volatility parameters."""
    v: float = Field(gt=0, description="Initial variance.")
    theta: float = Field(gt=0, description="Long-run variance.")
    kappa: float = Field(gt=0, description="Mean-reversion speed.")
    xi: float = Field(gt=0, description="Volatility of variance.")
    rho: float = Field(gt=-1, lt=1, description="Spot/variance correlation.")

    @property
    def rho_bar(self) -> float:
        return math.sqrt(1.0 - self.rho * self.rho)


class VarianceGammaParams(_Params):
    """Variance-Gamma exponent in (C, G, M) form; the drift is implied by the martingale condition."""
    kind: Literal["vg"] = "vg"
    C: float = Field(gt=0, description="Activity.")
    G: float = Field(gt=0, description="Left tempering.")
    M: float = Field(gt=1, description="Right tempering.")

    @property
    def mu(self) -> float:
        return -self.C * math.log(self.G * self.M / ((self.M - 1.0) * (self.G + 1.0)))


class BrownianDriftParams(_Params):
    """Brownian motion with drift -sigma^2/2 per unit of clock time."""
    kind: Literal["brownian"] = "brownian"
    sigma: float = Field(gt=0, description="Volatility per unit clock time.")


class FellerClockParams(_Params):
    """Integrated square-root (CIR) activity rate."""
    kind: Literal["feller"] = "feller"
    v: float = Field(gt=0, description="Initial activity rate.")
    theta: float = Field(gt=0, description="Long-run activity rate.")
    kappa: float = Field(gt=0, description="Mean-reversion speed.")
    xi: float = Field(gt=0, description="Volatility of the activity rate.")


class GammaOUClockParams(_Params):
    """Integrated Gamma-OU activity rate driven by a compound Poisson subordinator."""
    kind: Literal["gammaou"] = "gammaou"
    v: float = Field(gt=0, description="Initial activity rate.")
    lam: float = Field(gt=0, alias="lambda", description="Decay rate.")
    alpha: float = Field(gt=0, description="Exponential jump-size rate.")
    delta: float = Field(gt=0, description="Jump intensity scale.")


class ForwardHorizon(_Params):
    """Forward-start date t and remaining maturity tau, in years."""
    t: float = Field(ge=0, description="Forward-start date.")
    tau: float = Field(gt=0, description="Maturity after the forward-start date.")


LevyExponent = Annotated[Union[VarianceGammaParams, BrownianDriftParams], Field(discriminator="kind")]
Clock = Annotated[Union[FellerClockParams, GammaOUClockParams], Field(discriminator="kind")]


class BlackScholesModel(_Params):
    kind: Literal["bs"] = "bs"
    sigma: float = Field(gt=0, description="Black-Scholes volatility.")
    measure: Measure = Measure.TYPE_I


class HestonModel(_Params):
    kind: Literal["heston"] = "heston"
    params: HestonParams
    measure: Measure = Measure.TYPE_I


class TimeChangedLevyModel(_Params):
    """Levy driver time-changed by an independent clock (no clock means calendar time)."""
    kind: Literal["levy"] = "levy"
    exponent: LevyExponent
    clock: Optional[Clock] = None
    measure: Measure = Measure.TYPE_I


ModelSpec = Annotated[
    Union[BlackScholesModel, HestonModel, TimeChangedLevyModel],
    Field(discriminator="kind"),
]


# Results

class HestonLMDomainReport(BaseModel):
    """Correlation thresholds, moment bounds and case of the large-maturity Heston domain."""
    rho_minus: float = Field(description="Lower correlation threshold.")
    rho_plus: float = Field(description="Upper correlation threshold.")
    u_minus: float = Field(description="Lower moment-explosion bound.")
    u_plus: float = Field(description="Upper moment-explosion bound.")
    u_star_minus: Optional[float] = Field(default=None, description="Lower clock-capacity bound, when defined.")
    u_star_plus: Optional[float] = Field(default=None, description="Upper clock-capacity bound, when defined.")
    case: DomainCase
    interval: Tuple[float, float] = Field(description="Effective limiting domain.")
    interval_kinds: Tuple[BoundaryKind, BoundaryKind]


class DomainReport(BaseModel):
    """What the `domain` command prints."""
    regime: Regime
    lo: float
    hi: float
    lo_kind: BoundaryKind
    hi_kind: BoundaryKind
    singular_strikes: Tuple[float, float] = Field(description="Slopes of the limit lmgf at 0 and at c.")
    heston: Optional[HestonLMDomainReport] = None


class PriceQuote(BaseModel):
    """Sharp large-deviations expansion of a forward-start option value."""
    k: float
    epsilon: float
    payoff_kind: PayoffKind
    leading: float = Field(description="Positive leading term exp(...) * |prefactor|.")
    correction: float = Field(description="Multiplicative correction term.")
    price: float = Field(description="Signed expansion value at the requested order.")
    order_terms: List[float] = Field(description="Expansion value truncated at orders 0, 1, 2.")


class ResidualTable(BaseModel):
    epsilons: List[float]
    residuals: List[float]
    slope: float = Field(description="Fitted log-log slope of |residual| against epsilon.")


class TailProfile(BaseModel):
    p_r: float
    p_i: List[float]
    values: List[float]
    peak_at_zero: bool


class SmilePoint(BaseModel):
    k: float
    strike: float
    v0: Optional[float] = None
    v1: Optional[float] = None
    v2: Optional[float] = None
    sigma0: Optional[float] = None
    sigma1: Optional[float] = None
    sigma2: Optional[float] = None
    sigma_ref: Optional[float] = None
    err0: Optional[float] = None
    err1: Optional[float] = None
    err2: Optional[float] = None
    flags: List[str] = Field(default_factory=list)

    def sigma(self, order: int) -> Optional[float]:
        return (self.sigma0, self.sigma1, self.sigma2)[order]

    def error(self, order: int) -> Optional[float]:
        return (self.err0, self.err1, self.err2)[order]


class SmileCurve(BaseModel):
    """Per-strike variance terms and implied volatilities per truncation order."""
    regime: Regime
    horizon: ForwardHorizon
    order: int = Field(ge=0, le=2)
    points: List[SmilePoint] = Field(default_factory=list)

    def sigma(self, order: int) -> List[Optional[float]]:
        return [p.sigma(order) for p in self.points]


class CurveRequest(BaseModel):
    """One curve of a figure dataset: a model, a regime and a strike grid."""
    panel: str
    label: str
    model: ModelSpec
    regime: Regime
    horizon: ForwardHorizon
    grid: List[float]
    order: int = Field(default=2, ge=0, le=2)
    reference: bool = False
    error_panel: Optional[str] = Field(default=None, description="Panel receiving the per-order errors, when the reference is on.")


class FigurePanel(BaseModel):
    """Table behind one figure panel; missing values are None."""
    figure: str
    panel: str
    columns: List[str]
    rows: List[List[Optional[float]]]


# Numerical settings

class QuadratureConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    abs_tol: float = Field(default=1e-12, gt=0)
    rel_tol: float = Field(default=1e-10, gt=0)
    max_depth: int = Field(default=200, ge=10, description="Maximum number of adaptive subintervals per panel.")
    initial_upper: float = Field(default=200.0, gt=0, description="First truncation point; doubled until the tail is negligible.")


class ImpliedVolQuery(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    price: float
    k: float
    tau: float = Field(gt=0)
    is_call: bool = True
    bracket: Tuple[float, float] = (1e-4, 5.0)


# Run configuration

class VGFellerSection(_Params):
    levy: VarianceGammaParams
    clock: FellerClockParams


class VGGammaOUSection(_Params):
    levy: VarianceGammaParams
    clock: GammaOUClockParams


class BlackScholesSection(_Params):
    sigma: float = Field(gt=0)


class ModelSection(_Params):
    """Exactly one model family with its parameters."""
    bs: Optional[BlackScholesSection] = None
    heston: Optional[HestonParams] = None
    vg: Optional[VarianceGammaParams] = None
    vg_feller: Optional[VGFellerSection] = Field(default=None, alias="vg+feller")
    vg_gammaou: Optional[VGGammaOUSection] = Field(default=None, alias="vg+gammaou")

    @model_validator(mode="after")
    def _exactly_one(self):
        present = [name for name in ("bs", "heston", "vg", "vg_feller", "vg_gammaou") if getattr(self, name) is not None]
        if len(present) != 1:
            raise ValueError(f"exactly one model section is required, got {present or 'none'}")
        return self

    def to_model(self, measure: Measure) -> Union[BlackScholesModel, HestonModel, TimeChangedLevyModel]:
        if self.bs is not None:
            return BlackScholesModel(sigma=self.bs.sigma, measure=measure)
        if self.heston is not None:
            return HestonModel(params=self.heston, measure=measure)
        if self.vg is not None:
            return TimeChangedLevyModel(exponent=self.vg, measure=measure)
        section = self.vg_feller or self.vg_gammaou
        return TimeChangedLevyModel(exponent=section.levy, clock=section.clock, measure=measure)


class StrikeGrid(_Params):
    lo: float
    hi: float
    step: float = Field(gt=0)

    @model_validator(mode="after")
    def _non_empty(self):
        if self.hi < self.lo:
            raise ValueError(f"empty strike grid: hi={self.hi} < lo={self.lo}")
        return self

    def values(self) -> List[float]:
        count = int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return [round(self.lo + i * self.step, 12) for i in range(count)]


class OutputSection(_Params):
    path: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV


class OracleSection(_Params):
    enabled: bool = False
    abs_tol: float = Field(default=1e-12, gt=0)
    rel_tol: float = Field(default=1e-10, gt=0)
    max_depth: int = Field(default=200, ge=10)

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(abs_tol=self.abs_tol, rel_tol=self.rel_tol, max_depth=self.max_depth)


class RunConfig(_Params):
    """Single JSON document driving one CLI run; unknown keys are rejected."""
    model: ModelSection
    regime: Regime
    horizon: ForwardHorizon
    strikes: StrikeGrid
    order: Literal[0, 1, 2] = 2
    measure: Measure = Measure.TYPE_I
    output: OutputSection = Field(default_factory=OutputSection)
    oracle: OracleSection = Field(default_factory=OracleSection)

    @model_validator(mode="after")
    def _large_maturity_heston_moments(self):
        heston = self.model.heston
        if self.regime == Regime.LARGE and heston is not None and heston.kappa <= heston.rho * heston.xi:
            raise ValueError(
                f"large-maturity Heston requires kappa > rho*xi, got kappa={heston.kappa}, rho*xi={heston.rho * heston.xi}"
            )
        return self

    def model_spec(self) -> Union[BlackScholesModel, HestonModel, TimeChangedLevyModel]:
        return self.model.to_model(self.measure)
