"""Growth laws, yield laws, species and scenarios.

Single source of truth for the per-capita growth rate p(S), the growth
yield y(S) and the derived uptake rate f(S) = p(S)/y(S).  All types are
immutable after construction; evaluation methods are pure, so instances
can be shared freely across workers.

Three growth families are supported (Monod, Haldane, piecewise linear)
and three yield families (constant, linear, quadratic).  Restricting to
named families keeps scenarios serializable and derivatives analytic;
arbitrary user closures are deliberately not accepted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import DomainError, InvalidYieldError, ValidationError

__all__ = [
    "GrowthLaw",
    "Monod",
    "Haldane",
    "PiecewiseLinear",
    "YieldLaw",
    "ConstantYield",
    "LinearYield",
    "QuadraticYield",
    "Species",
    "Scenario",
    "Violation",
    "validate_scenario",
    "require_valid",
]


def _check_nonneg_substrate(s: float) -> None:
    if s < 0:
        raise DomainError(f"substrate concentration must be >= 0, got {s}")


# ---------------------------------------------------------------------------
# growth laws
# ---------------------------------------------------------------------------


class GrowthLaw:
    """Base class for per-capita growth rate families p(S).

    Every family satisfies p(0) = 0 and p(S) > 0 for S > 0 when its
    parameters are valid.  ``rate`` and ``derivative`` are analytic.
    """

    family: str = "abstract"

    def rate(self, s: float) -> float:
        raise NotImplementedError

    def derivative(self, s: float) -> float:
        raise NotImplementedError

    def param_violations(self) -> list[str]:
        """Messages for every parameter bound this law violates."""
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Monod(GrowthLaw):
    """p(S) = a*S / (b + S): saturating, strictly increasing.

    a is the maximal rate (1/time), b the half-saturation concentration.
    """

    a: float
    b: float
    family = "monod"

    def rate(self, s: float) -> float:
        _check_nonneg_substrate(s)
        return self.a * s / (self.b + s)

    def derivative(self, s: float) -> float:
        _check_nonneg_substrate(s)
        return self.a * self.b / (self.b + s) ** 2

    def param_violations(self) -> list[str]:
        out = []
        if not self.a > 0:
            out.append(f"monod.a must be > 0, got {self.a}")
        if not self.b > 0:
            out.append(f"monod.b must be > 0, got {self.b}")
        return out

    def params(self) -> dict:
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class Haldane(GrowthLaw):
    """p(S) = a*S / (b + S + S^2/c): substrate-inhibited, non-monotone.

    Rises to a unique maximum at S = sqrt(b*c), then decays toward zero.
    a is a rate scale (1/time), b a saturation constant, c an inhibition
    constant (both concentrations).
    """

    a: float
    b: float
    c: float
    family = "haldane"

    def rate(self, s: float) -> float:
        _check_nonneg_substrate(s)
        return self.a * s / (self.b + s + s * s / self.c)

    def derivative(self, s: float) -> float:
        _check_nonneg_substrate(s)
        den = self.b + s + s * s / self.c
        return self.a * (self.b - s * s / self.c) / (den * den)

    def param_violations(self) -> list[str]:
        out = []
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if not v > 0:
                out.append(f"haldane.{name} must be > 0, got {v}")
        return out

    def params(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c}


@dataclass(frozen=True)
class PiecewiseLinear(GrowthLaw):
    """Linear interpolation through knots (S_0, p_0), ..., (S_k, p_k).

    The first knot must be (0, 0); abscissas strictly increase and the
    remaining ordinates are strictly positive.  Beyond the last knot the
    law extends as the constant p_k, which keeps it continuous, bounded
    and positive on the whole half-line.  At a knot the derivative is the
    right-hand slope (deterministic, documented convention).
    """

    knots: tuple[tuple[float, float], ...]
    family = "piecewise_linear"

    def __init__(self, knots: Sequence[Sequence[float]]):
        object.__setattr__(
            self, "knots", tuple((float(s), float(p)) for s, p in knots)
        )

    def rate(self, s: float) -> float:
        _check_nonneg_substrate(s)
        ks = self.knots
        if s >= ks[-1][0]:
            return ks[-1][1]
        for (s0, p0), (s1, p1) in zip(ks, ks[1:]):
            if s <= s1:
                return p0 + (p1 - p0) * (s - s0) / (s1 - s0)
        return ks[-1][1]

    def derivative(self, s: float) -> float:
        _check_nonneg_substrate(s)
        ks = self.knots
        if s >= ks[-1][0]:
            return 0.0
        for (s0, p0), (s1, p1) in zip(ks, ks[1:]):
            if s < s1:
                return (p1 - p0) / (s1 - s0)
        return 0.0

    def param_violations(self) -> list[str]:
        out = []
        ks = self.knots
        if len(ks) < 2:
            out.append("piecewise_linear needs at least two knots")
            return out
        if ks[0] != (0.0, 0.0):
            out.append(f"piecewise_linear first knot must be (0, 0), got {ks[0]}")
        for i, ((s0, _), (s1, p1)) in enumerate(zip(ks, ks[1:])):
            if not s1 > s0:
                out.append(
                    f"piecewise_linear abscissas must strictly increase "
                    f"(knot {i + 1}: {s1} <= {s0})"
                )
            if not p1 > 0:
                out.append(
                    f"piecewise_linear ordinate at knot {i + 1} must be > 0, got {p1}"
                )
        return out

    def params(self) -> dict:
        return {"knots": [list(k) for k in self.knots]}


# ---------------------------------------------------------------------------
# yield laws
# ---------------------------------------------------------------------------


class YieldLaw:
    """Base class for growth-yield families y(S).

    Yields must stay strictly positive on the substrate range a scenario
    actually visits; that is enforced by scenario validation, not here.
    """

    family: str = "abstract"

    def value(self, s: float) -> float:
        raise NotImplementedError

    def derivative(self, s: float) -> float:
        raise NotImplementedError

    def param_violations(self) -> list[str]:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        return isinstance(self, ConstantYield)


@dataclass(frozen=True)
class ConstantYield(YieldLaw):
    Y: float
    family = "constant"

    def value(self, s: float) -> float:
        return self.Y

    def derivative(self, s: float) -> float:
        return 0.0

    def param_violations(self) -> list[str]:
        return [] if self.Y > 0 else [f"constant.Y must be > 0, got {self.Y}"]

    def params(self) -> dict:
        return {"Y": self.Y}


@dataclass(frozen=True)
class LinearYield(YieldLaw):
    """y(S) = A + B*S with A > 0, B >= 0."""

    A: float
    B: float
    family = "linear"

    def value(self, s: float) -> float:
        return self.A + self.B * s

    def derivative(self, s: float) -> float:
        return self.B

    def param_violations(self) -> list[str]:
        out = []
        if not self.A > 0:
            out.append(f"linear.A must be > 0, got {self.A}")
        if self.B < 0:
            out.append(f"linear.B must be >= 0, got {self.B}")
        return out

    def params(self) -> dict:
        return {"A": self.A, "B": self.B}


@dataclass(frozen=True)
class QuadraticYield(YieldLaw):
    """y(S) = A + B*S^2 with A > 0, B >= 0."""

    A: float
    B: float
    family = "quadratic"

    def value(self, s: float) -> float:
        return self.A + self.B * s * s

    def derivative(self, s: float) -> float:
        return 2.0 * self.B * s

    def param_violations(self) -> list[str]:
        out = []
        if not self.A > 0:
            out.append(f"quadratic.A must be > 0, got {self.A}")
        if self.B < 0:
            out.append(f"quadratic.B must be >= 0, got {self.B}")
        return out

    def params(self) -> dict:
        return {"A": self.A, "B": self.B}


GROWTH_FAMILIES = {"monod": Monod, "haldane": Haldane, "piecewise_linear": PiecewiseLinear}
YIELD_FAMILIES = {"constant": ConstantYield, "linear": LinearYield, "quadratic": QuadraticYield}


# ---------------------------------------------------------------------------
# species and scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Species:
    """One competitor: growth law p, yield law y, removal rate and label.

    The uptake rate f(S) = p(S)/y(S) is derived, never stored.  At S = 0
    the quotient is extended continuously by 0, so integrators never hit a
    special case at the substrate axis.
    """

    label: str
    growth: GrowthLaw
    yld: YieldLaw
    removal: float

    def growth_rate(self, s: float) -> float:
        return self.growth.rate(s)

    def growth_rate_derivative(self, s: float) -> float:
        return self.growth.derivative(s)

    def yield_value(self, s: float) -> float:
        return self.yld.value(s)

    def uptake(self, s: float) -> float:
        """f(S) = p(S)/y(S), continuously extended by f(0) = 0."""
        _check_nonneg_substrate(s)
        if s == 0.0:
            return 0.0
        y = self.yld.value(s)
        if y <= 0.0:
            raise InvalidYieldError(
                f"species {self.label!r}: yield {y} <= 0 at S = {s}"
            )
        return self.growth.rate(s) / y

    def uptake_derivative(self, s: float) -> float:
        """f'(S) by the quotient rule, f' = (p'y - p y') / y^2."""
        _check_nonneg_substrate(s)
        y = self.yld.value(s)
        if y <= 0.0:
            raise InvalidYieldError(
                f"species {self.label!r}: yield {y} <= 0 at S = {s}"
            )
        p = self.growth.rate(s)
        return (self.growth.derivative(s) * y - p * self.yld.derivative(s)) / (y * y)


@dataclass(frozen=True)
class Scenario:
    """Operating conditions plus the competitor roster.

    inflow is the feed substrate concentration S0 (> 0), dilution the flow
    rate D (> 0).  initial_s and initial_x give the starting state; every
    initial biomass must be strictly positive.
    """

    inflow: float
    dilution: float
    species: tuple[Species, ...]
    initial_s: float
    initial_x: tuple[float, ...]

    def __init__(self, inflow, dilution, species, initial_s, initial_x):
        object.__setattr__(self, "inflow", float(inflow))
        object.__setattr__(self, "dilution", float(dilution))
        object.__setattr__(self, "species", tuple(species))
        object.__setattr__(self, "initial_s", float(initial_s))
        object.__setattr__(self, "initial_x", tuple(float(x) for x in initial_x))

    @property
    def n(self) -> int:
        return len(self.species)

    def with_species_order(self, order: Sequence[int]) -> "Scenario":
        """Scenario with species (and initial biomasses) permuted by ``order``."""
        return Scenario(
            self.inflow,
            self.dilution,
            tuple(self.species[k] for k in order),
            self.initial_s,
            tuple(self.initial_x[k] for k in order),
        )

    def yield_range_max(self) -> float:
        """Upper end of the substrate range on which yields must be positive."""
        return max(self.initial_s, self.inflow)


@dataclass(frozen=True)
class Violation:
    """One validation failure: which field, and what bound it broke."""

    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


_YIELD_SCAN_POINTS = 257


def validate_scenario(sc: Scenario) -> list[Violation]:
    """Collect every invariant violation of ``sc`` (empty list = valid).

    Checks operating constants, per-species parameter bounds, yield
    positivity on [0, max(S(0), S0)] and initial-state signs.  All
    violations are reported at once so a scenario file can be fixed in a
    single pass.
    """
    out: list[Violation] = []
    if not sc.inflow > 0:
        out.append(Violation("s0", f"inflow concentration must be > 0, got {sc.inflow}"))
    if not sc.dilution > 0:
        out.append(Violation("d", f"dilution rate must be > 0, got {sc.dilution}"))
    if sc.n == 0:
        out.append(Violation("species", "at least one species is required"))
    if sc.initial_s < 0:
        out.append(
            Violation("initial.s", f"initial substrate must be >= 0, got {sc.initial_s}")
        )
    if len(sc.initial_x) != sc.n:
        out.append(
            Violation(
                "initial.x",
                f"expected {sc.n} initial biomasses, got {len(sc.initial_x)}",
            )
        )
    for i, x in enumerate(sc.initial_x):
        if not x > 0:
            out.append(
                Violation(
                    f"initial.x[{i}]",
                    f"initial biomass must be strictly positive, got {x}",
                )
            )

    s_hi = max(sc.yield_range_max(), 0.0)
    for i, sp in enumerate(sc.species):
        tag = f"species[{i}]"
        for msg in sp.growth.param_violations():
            out.append(Violation(f"{tag}.growth", msg))
        for msg in sp.yld.param_violations():
            out.append(Violation(f"{tag}.yield", msg))
        if not sp.removal > 0:
            out.append(
                Violation(f"{tag}.removal", f"removal rate must be > 0, got {sp.removal}")
            )
        if s_hi > 0:
            s_bad = _first_nonpositive_yield(sp.yld, s_hi)
            if s_bad is not None:
                out.append(
                    Violation(
                        f"{tag}.yield",
                        f"yield must stay > 0 on [0, {s_hi:g}]; "
                        f"it is <= 0 at S = {s_bad:g}",
                    )
                )
    return out


def _first_nonpositive_yield(yld: YieldLaw, s_hi: float) -> float | None:
    """Smallest S in [0, s_hi] with y(S) <= 0, or None if y stays positive.

    Grid scan followed by bisection onto the first zero crossing; the
    supported families are monotone or convex, so a 257-point grid cannot
    skip a sign dip of practical width.
    """
    prev_s, prev_y = 0.0, yld.value(0.0)
    if prev_y <= 0:
        return 0.0
    for k in range(1, _YIELD_SCAN_POINTS):
        s = s_hi * k / (_YIELD_SCAN_POINTS - 1)
        y = yld.value(s)
        if y <= 0:
            lo, hi = prev_s, s
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if yld.value(mid) <= 0:
                    hi = mid
                else:
                    lo = mid
            return hi
        prev_s, prev_y = s, y
    return None


def require_valid(sc: Scenario) -> Scenario:
    """Return ``sc`` unchanged, or raise ValidationError with all violations."""
    violations = validate_scenario(sc)
    if violations:
        raise ValidationError(violations)
    return sc
