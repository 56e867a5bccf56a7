"""Lyapunov-function evaluation for the exclusion certificate.

The monitored function is

    V = int_{l1}^{S} (p_1(u)-D_1)(S0-l1) / (f_1(l1)(S0-u)) du
        + x_1 - x1* - x1*·ln(x_1/x1*)
        + sum_{i>=2} alpha_i x_i

with orbital derivative

    V' = x_1 (p_1(S)-D_1)(F(l1)-F(S))/F(l1) + sum_{i>=2} x_i h_i(S),
    h_i(S) = (p_i(S)-D_i)(alpha_i - g_i(S)).

h_i is always evaluated in the expanded form

    h_i(S) = (p_i(S)-D_i)·alpha_i
             - f_i(S)(p_1(S)-D_1)(S0-l1) / (f_1(l1)(S0-S)),

which is manifestly finite across the removable pole-zero cancellations
at the competitor break-evens.  The integrand of V has a nonintegrable
pole at S0, so evaluation is capped just below the feed concentration;
trajectories eventually live strictly below it.

Three alternate functions from the constant-yield and yield-ratio
special cases are provided for cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .conditions import ConditionChecker
from .errors import DomainError, InapplicableError
from .model import ConstantYield, Monod, Scenario
from .numerics import adaptive_simpson

__all__ = [
    "LyapunovSpec",
    "make_lyapunov_spec",
    "eval_V",
    "eval_Vdot",
    "eval_h",
    "eval_alt_V",
    "hsu_coefficients",
]

_S_CAP_REL = 1e-9


@dataclass(frozen=True)
class LyapunovSpec:
    """Frozen ingredients of V for one ordered scenario.

    scenario must already have the lowest-break-even species at index 0;
    alphas holds one coupling constant per competitor (ordered indices
    1..n-1).  s_cap is the evaluation ceiling S0*(1 - 1e-9); states with
    S at or above it are outside V's domain.
    """

    scenario: Scenario
    lambda1: float
    mu1: float
    x1_star: float
    f1_at_lambda1: float
    alphas: tuple[float, ...]
    quad_tol: float = 1e-10

    def __post_init__(self):
        if not (0.0 < self.lambda1 < self.s_cap):
            raise DomainError(
                f"need 0 < lambda1 < S_cap, got lambda1 = {self.lambda1}"
            )
        if not self.x1_star > 0:
            raise DomainError(f"x1_star must be > 0, got {self.x1_star}")
        if any(a <= 0 for a in self.alphas):
            raise DomainError(f"alphas must be positive, got {self.alphas}")
        if len(self.alphas) != self.scenario.n - 1:
            raise DomainError(
                f"expected {self.scenario.n - 1} alphas, got {len(self.alphas)}"
            )

    @property
    def s0(self) -> float:
        return self.scenario.inflow

    @property
    def s_cap(self) -> float:
        return self.scenario.inflow * (1.0 - _S_CAP_REL)


def make_lyapunov_spec(
    source: Scenario | ConditionChecker,
    quad_tol: float = 1e-10,
    alphas: Sequence[float] | None = None,
) -> LyapunovSpec:
    """Build a LyapunovSpec, ordering species and choosing alphas.

    By default the alphas are the feasibility witnesses (interval
    midpoints) from the certificate machinery; they can be overridden.
    The decrease guarantees only hold when every interval is feasible.
    """
    checker = source if isinstance(source, ConditionChecker) else ConditionChecker(source)
    if not checker.window_ok:
        raise DomainError(
            "Lyapunov spec needs l1 < S0 < mu1 for the ordered leader"
        )
    if alphas is None:
        alphas = tuple(a.witness for a in checker.alpha_intervals("g"))
    lam1 = checker.lam1
    x1_star = checker.scenario.dilution * (checker.s0 - lam1) / checker.f1_at_lambda1
    return LyapunovSpec(
        scenario=checker.scenario,
        lambda1=lam1,
        mu1=checker.mu1,
        x1_star=x1_star,
        f1_at_lambda1=checker.f1_at_lambda1,
        alphas=tuple(alphas),
        quad_tol=quad_tol,
    )


def _check_state(spec: LyapunovSpec, state: Sequence[float]) -> tuple[float, tuple[float, ...]]:
    if len(state) != spec.scenario.n + 1:
        raise DomainError(
            f"state must have {spec.scenario.n + 1} entries, got {len(state)}"
        )
    s = float(state[0])
    x = tuple(float(v) for v in state[1:])
    if s <= 0.0:
        raise DomainError(f"V needs S > 0, got S = {s}")
    if s > spec.s_cap:
        raise DomainError(
            f"S = {s} is at or above the evaluation ceiling {spec.s_cap} "
            "(integrand pole at S0); state not yet in V's domain"
        )
    if x[0] <= 0.0:
        raise DomainError(f"V needs x_1 > 0, got {x[0]}")
    if any(v < 0 for v in x[1:]):
        raise DomainError(f"biomasses must be >= 0, got {x}")
    return s, x


def _substrate_integrand(spec: LyapunovSpec):
    sp1 = spec.scenario.species[0]
    d1 = sp1.removal
    s0 = spec.s0
    scale = (s0 - spec.lambda1) / spec.f1_at_lambda1

    def integrand(u: float) -> float:
        return (sp1.growth_rate(u) - d1) * scale / (s0 - u)

    return integrand


def _biomass_term(x1: float, x1_star: float) -> float:
    """Closed form of the x_1 integral: x1 - x1* - x1*·ln(x1/x1*)."""
    return x1 - x1_star - x1_star * math.log(x1 / x1_star)


def eval_V(
    spec: LyapunovSpec, state: Sequence[float], return_error: bool = False
) -> float | tuple[float, float]:
    """V at a state; nonnegative, zero exactly at the survivor point.

    The substrate integral runs by adaptive quadrature at spec.quad_tol;
    the biomass integral is closed-form.  With return_error=True the
    quadrature error estimate is attached.
    """
    s, x = _check_state(spec, state)
    quad, err = adaptive_simpson(
        _substrate_integrand(spec),
        spec.lambda1,
        s,
        atol=spec.quad_tol,
        rtol=spec.quad_tol,
    )
    value = quad + _biomass_term(x[0], spec.x1_star)
    for alpha, xi in zip(spec.alphas, x[1:]):
        value += alpha * xi
    if return_error:
        return value, err
    return value


def eval_h(spec: LyapunovSpec, i: int, s: float) -> float:
    """h_i(S) for ordered competitor i >= 1, in the expanded form.

    Continuous across the competitor's break-evens, where the product
    form (p_i-D_i)(alpha_i-g_i) has a removable 0*inf cancellation.
    Strictly negative on (0, S0) when alpha_i lies in its feasible
    interval.
    """
    if not 1 <= i < spec.scenario.n:
        raise DomainError(f"competitor index must be in [1, {spec.scenario.n - 1}]")
    if not 0.0 < s < spec.s0:
        raise DomainError(f"h_i is defined on (0, S0), got S = {s}")
    spi = spec.scenario.species[i]
    sp1 = spec.scenario.species[0]
    alpha = spec.alphas[i - 1]
    coupling = (
        spi.uptake(s)
        * (sp1.growth_rate(s) - sp1.removal)
        * (spec.s0 - spec.lambda1)
        / (spec.f1_at_lambda1 * (spec.s0 - s))
    )
    return (spi.growth_rate(s) - spi.removal) * alpha - coupling


def eval_Vdot(spec: LyapunovSpec, state: Sequence[float]) -> float:
    """Orbital derivative of V along the flow, evaluated analytically.

    Nonpositive whenever the certificate hypotheses hold; zero exactly
    when all biomasses vanish or when S sits at the leader's break-even
    with every competitor extinct.
    """
    if len(state) != spec.scenario.n + 1:
        raise DomainError(
            f"state must have {spec.scenario.n + 1} entries, got {len(state)}"
        )
    s = float(state[0])
    x = tuple(float(v) for v in state[1:])
    if not 0.0 < s < spec.s0:
        raise DomainError(f"V' is defined for 0 < S < S0, got S = {s}")
    sp1 = spec.scenario.species[0]
    f_lam = spec.f1_at_lambda1 / (spec.s0 - spec.lambda1)
    f_s = sp1.uptake(s) / (spec.s0 - s)
    value = x[0] * (sp1.growth_rate(s) - sp1.removal) * (f_lam - f_s) / f_lam
    for i in range(1, spec.scenario.n):
        if x[i] != 0.0:
            value += x[i] * eval_h(spec, i, s)
    return value


# -- alternate Lyapunov functions --------------------------------------------


def hsu_coefficients(spec: LyapunovSpec) -> tuple[float, ...]:
    """Hsu's constants c_i = (1/Y_i)·a_i/(a_i - D_i), ordered indices."""
    out = []
    for sp in spec.scenario.species:
        if not isinstance(sp.growth, Monod):
            raise InapplicableError(
                f"Hsu coefficients need Monod growth; species {sp.label!r} "
                f"has {sp.growth.family}"
            )
        if not isinstance(sp.yld, ConstantYield):
            raise InapplicableError(
                f"Hsu coefficients need constant yields; species {sp.label!r} "
                f"has {sp.yld.family}"
            )
        if sp.growth.a <= sp.removal:
            raise InapplicableError(
                f"species {sp.label!r} never reaches its removal rate "
                f"(a = {sp.growth.a} <= D = {sp.removal})"
            )
        out.append(sp.growth.a / ((sp.growth.a - sp.removal) * sp.yld.Y))
    return tuple(out)


def _alt_V_H(spec: LyapunovSpec, state: Sequence[float]) -> float:
    """Hsu's function: requires Monod growth and constant yields.

    Closed form throughout; no pole at S0, so only S > 0 is needed.
    """
    c = hsu_coefficients(spec)
    s = float(state[0])
    x = tuple(float(v) for v in state[1:])
    if s <= 0.0 or x[0] <= 0.0:
        raise DomainError("V_H needs S > 0 and x_1 > 0")
    lam1 = spec.lambda1
    value = s - lam1 - lam1 * math.log(s / lam1)
    value += c[0] * _biomass_term(x[0], spec.x1_star)
    for ci, xi in zip(c[1:], x[1:]):
        value += ci * xi
    return value


def _alt_V_WL(
    spec: LyapunovSpec, state: Sequence[float], alphas: Sequence[float]
) -> float:
    """Constant-yield variant: the substrate weight uses D_1, biomasses 1/Y_i."""
    for sp in spec.scenario.species:
        if not isinstance(sp.yld, ConstantYield):
            raise InapplicableError(
                f"V_WL needs constant yields; species {sp.label!r} has "
                f"{sp.yld.family}"
            )
    if len(alphas) != spec.scenario.n - 1:
        raise DomainError(f"expected {spec.scenario.n - 1} alphas for V_WL")
    s, x = _check_state(spec, state)
    sp1 = spec.scenario.species[0]
    d1 = sp1.removal
    scale = (spec.s0 - spec.lambda1) / d1

    def integrand(u: float) -> float:
        return (sp1.growth_rate(u) - d1) * scale / (spec.s0 - u)

    quad, _ = adaptive_simpson(
        integrand, spec.lambda1, s, atol=spec.quad_tol, rtol=spec.quad_tol
    )
    y1 = spec.scenario.species[0].yld.value(s)
    value = quad + _biomass_term(x[0], spec.x1_star) / y1
    for alpha, sp, xi in zip(alphas, spec.scenario.species[1:], x[1:]):
        value += alpha * xi / sp.yld.value(s)
    return value


def _alt_V_SM(
    spec: LyapunovSpec, state: Sequence[float], alphas: Sequence[float]
) -> float:
    """Yield-ratio variant: substrate integrand (p_1 - D_1)/f_1."""
    if len(alphas) != spec.scenario.n - 1:
        raise DomainError(f"expected {spec.scenario.n - 1} alphas for V_SM")
    s, x = _check_state(spec, state)
    sp1 = spec.scenario.species[0]
    d1 = sp1.removal

    def integrand(u: float) -> float:
        return (sp1.growth_rate(u) - d1) / sp1.uptake(u)

    quad, _ = adaptive_simpson(
        integrand, spec.lambda1, s, atol=spec.quad_tol, rtol=spec.quad_tol
    )
    value = quad + _biomass_term(x[0], spec.x1_star)
    for alpha, xi in zip(alphas, x[1:]):
        value += alpha * xi
    return value


def _alt_V_APW(spec: LyapunovSpec, state: Sequence[float]) -> float:
    """Single-species form: V without the competitor sum."""
    if spec.scenario.n != 1:
        raise InapplicableError(
            f"V_APW is the single-species form; scenario has n = {spec.scenario.n}"
        )
    s, x = _check_state(spec, state)
    quad, _ = adaptive_simpson(
        _substrate_integrand(spec),
        spec.lambda1,
        s,
        atol=spec.quad_tol,
        rtol=spec.quad_tol,
    )
    return quad + _biomass_term(x[0], spec.x1_star)


def eval_alt_V(
    kind: str,
    spec: LyapunovSpec,
    state: Sequence[float],
    alphas: Sequence[float] | None = None,
) -> float:
    """Evaluate one of the alternate Lyapunov functions H, WL, SM, APW.

    WL and SM take their own coupling constants; H derives Hsu's from
    the growth parameters and APW takes none.
    """
    kind = kind.upper()
    if kind == "H":
        return _alt_V_H(spec, state)
    if kind == "WL":
        if alphas is None:
            raise DomainError("V_WL requires its alpha constants")
        return _alt_V_WL(spec, state, alphas)
    if kind == "SM":
        if alphas is None:
            raise DomainError("V_SM requires its alpha constants")
        return _alt_V_SM(spec, state, alphas)
    if kind == "APW":
        return _alt_V_APW(spec, state)
    raise ValueError(f"unknown Lyapunov kind {kind!r}")
