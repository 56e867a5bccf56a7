"""Hypothesis checks for the competitive-exclusion certificates.

The central object is ConditionChecker: it relabels species so index 0
has the lowest break-even concentration, computes the ratio function

    g_i(S) = [f_i(S)/f_1(l1)] * [(p_1(S)-D_1)/(p_i(S)-D_i)] * [(S0-l1)/(S0-S)]

for every competitor, locates its extrema on the two intervals that
matter (max on (0, l1), min on (l_i, rho_i)), and decides whether a
positive constant alpha_i fits between them.  Together with a crossing
condition on F(S) = f_1(S)/(S0-S) this certifies that the lowest
break-even species excludes all others globally.

Two specialized variants of g_i (one for constant yields, one
yield-ratio form) and the connected-union criterion for equal removal
rates are checked by the same machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .analysis import BreakEven, catalog_equilibria, scenario_breakevens
from .errors import DegenerateError, DomainError, InapplicableError
from .model import Scenario, require_valid
from .numerics import grid_extremum

__all__ = [
    "AlphaInterval",
    "FConditionResult",
    "TheoremReport",
    "CorollaryReport",
    "ButlerWolkowiczReport",
    "ConditionChecker",
    "order_species",
    "check_theorem",
    "check_corollary_apw",
    "check_corollary_wl",
    "check_corollary_sm",
    "check_butler_wolkowicz",
]

# relative inset used to approach open interval endpoints; the searched
# functions have proven limits (0 or +inf) at the endpoints, so nothing
# is lost by staying this far inside
_ENDPOINT_INSET = 1e-9


@dataclass(frozen=True)
class AlphaInterval:
    """Feasibility record for one competitor's coupling constant.

    lower is the max of the ratio function left of the leader's
    break-even, upper its min on the competitor's own growth window
    (+inf when that window lies beyond the feed concentration, in which
    case the species needs no upper constraint).  witness is the chosen
    constant: the interval midpoint, or a point above lower when upper
    is infinite.
    """

    species_index: int
    label: str
    lower: float
    upper: float
    feasible: bool
    witness: float
    argmax_s: Optional[float]
    argmin_s: Optional[float]
    constrained: bool


@dataclass(frozen=True)
class FConditionResult:
    """Tri-state verdict for the F-crossing condition.

    status is "sufficient" (F' > 0 everywhere, fast path), "holds"
    (direct comparison passed) or "fails" (violation_s is the first
    violating substrate level).  marginal marks near-equality failures.
    """

    status: str
    violation_s: Optional[float]
    violation_gap: Optional[float]
    marginal: bool

    @property
    def ok(self) -> bool:
        return self.status in ("sufficient", "holds")


@dataclass(frozen=True)
class TheoremReport:
    ordering_ok: bool
    window_ok: bool
    alphas: tuple[AlphaInterval, ...]
    f_condition: Optional[FConditionResult]
    verdict: bool
    predicted_limit: Optional[tuple[float, ...]]
    permutation: tuple[int, ...]
    lambdas: tuple[float, ...]
    mu1: float


@dataclass(frozen=True)
class CorollaryReport:
    name: str
    verdict: bool
    window_ok: bool
    alphas: tuple[AlphaInterval, ...]
    f_condition: Optional[FConditionResult]
    sign_changes: Optional[int]
    identity_ok: Optional[bool]
    identity_max_rel_err: Optional[float]


@dataclass(frozen=True)
class ButlerWolkowiczReport:
    verdict: bool
    equal_removal_rates: bool
    connected: bool
    s0_in_union: bool
    intervals: tuple[tuple[float, float], ...]


def order_species(
    sc: Scenario,
    breakevens: tuple[BreakEven, ...] | None = None,
    tie_tol: float | None = None,
) -> tuple[Scenario, tuple[int, ...]]:
    """Relabel species so index 0 carries the lowest break-even.

    Returns the permuted scenario and the permutation (entry k is the
    original index of the new k-th species).  A tie at the lowest
    break-even within tie_tol (default 1e-8*S0) is refused: the
    certificates require strict leadership.
    """
    require_valid(sc)
    if breakevens is None:
        breakevens = scenario_breakevens(sc)
    if tie_tol is None:
        tie_tol = 1e-8 * sc.inflow
    order = tuple(sorted(range(sc.n), key=lambda k: (breakevens[k].lam, k)))
    lams = [breakevens[k].lam for k in order]
    if sc.n >= 2 and math.isfinite(lams[0]) and lams[1] - lams[0] <= tie_tol:
        raise DegenerateError(
            f"lowest break-even concentrations tie within {tie_tol:g} "
            f"({lams[0]:g} vs {lams[1]:g}); species cannot be strictly ordered"
        )
    return sc.with_species_order(order), order


class ConditionChecker:
    """Shared state for every certificate check on one scenario.

    Ordering, break-evens and the equilibrium catalog are computed once
    at construction; scenarios with cross-species break-even ties are
    refused immediately.  All public species indices refer to the
    ordered scenario (index 0 = lowest break-even); the permutation back
    to input order is kept in ``permutation``.
    """

    def __init__(
        self,
        sc: Scenario,
        grid_n: int = 4096,
        tie_tol: float | None = None,
        refine_tol: float = 1e-10,
    ):
        require_valid(sc)
        if tie_tol is None:
            tie_tol = 1e-8 * sc.inflow
        self.input_scenario = sc
        self.grid_n = int(grid_n)
        self.tie_tol = tie_tol
        self.refine_tol = refine_tol

        catalog = catalog_equilibria(sc, tol=tie_tol)
        if catalog.degenerate:
            pairs = ", ".join(
                f"species {i} and {j}" for i, j in catalog.degenerate_pairs
            )
            raise DegenerateError(
                f"break-even concentrations coincide within {tie_tol:g} ({pairs}); "
                "the certificates do not apply to non-generic ties"
            )
        self.input_catalog = catalog
        self.scenario, self.permutation = order_species(
            sc, breakevens=catalog.breakevens, tie_tol=tie_tol
        )
        self.breakevens = tuple(catalog.breakevens[k] for k in self.permutation)
        self.lam1 = self.breakevens[0].lam
        self.mu1 = self.breakevens[0].mu
        self.s0 = sc.inflow
        self._f1_lam1 = (
            self.scenario.species[0].uptake(self.lam1)
            if math.isfinite(self.lam1)
            else math.nan
        )

    # -- basic scalar functions -------------------------------------------

    @property
    def f1_at_lambda1(self) -> float:
        return self._f1_lam1

    @property
    def window_ok(self) -> bool:
        """l1 < S0 < mu1: the leader grows at the feed concentration."""
        return math.isfinite(self.lam1) and self.lam1 < self.s0 < self.mu1

    def F(self, s: float) -> float:
        """F(S) = f_1(S)/(S0 - S) for the ordered leader."""
        if s >= self.s0:
            raise DomainError(f"F has a pole at S0 = {self.s0}; got S = {s}")
        return self.scenario.species[0].uptake(s) / (self.s0 - s)

    def _ratio_core(self, i: int, s: float) -> float:
        """(p_1(S) - D_1)/(p_i(S) - D_i) with pole detection."""
        sp1 = self.scenario.species[0]
        spi = self.scenario.species[i]
        den = spi.growth_rate(s) - spi.removal
        if den == 0.0:
            raise DomainError(
                f"g_{i} has a pole where the growth rate of species {i} "
                f"equals its removal rate (S = {s})"
            )
        return (sp1.growth_rate(s) - sp1.removal) / den

    def g(self, i: int, s: float) -> float:
        """The coupling ratio for competitor i (ordered index, i >= 1)."""
        if not 0.0 <= s < self.s0:
            raise DomainError(f"g_{i} is evaluated on [0, S0); got S = {s}")
        fi = self.scenario.species[i].uptake(s)
        return (
            fi
            / self._f1_lam1
            * self._ratio_core(i, s)
            * (self.s0 - self.lam1)
            / (self.s0 - s)
        )

    def g_wl(self, i: int, s: float) -> float:
        """Constant-yield variant: growth rates replace uptake rates."""
        if not 0.0 <= s < self.s0:
            raise DomainError(f"g_{i}^WL is evaluated on [0, S0); got S = {s}")
        sp1 = self.scenario.species[0]
        pi = self.scenario.species[i].growth_rate(s)
        return (
            pi
            / sp1.removal
            * self._ratio_core(i, s)
            * (self.s0 - self.lam1)
            / (self.s0 - s)
        )

    def g_sm(self, i: int, s: float) -> float:
        """Yield-ratio variant: f_i/f_1 times the growth-gap ratio."""
        if not 0.0 < s < self.s0:
            raise DomainError(f"g_{i}^SM is evaluated on (0, S0); got S = {s}")
        f1 = self.scenario.species[0].uptake(s)
        if f1 == 0.0:
            raise DomainError(f"g_{i}^SM undefined where f_1 vanishes (S = {s})")
        fi = self.scenario.species[i].uptake(s)
        return fi / f1 * self._ratio_core(i, s)

    # -- alpha intervals ---------------------------------------------------

    def alpha_interval(
        self, i: int, variant: str = "g", grid_n: int | None = None
    ) -> AlphaInterval:
        """Feasible range for alpha_i: [max on (0, l1), min on (l_i, rho_i)].

        Open endpoints are approached to within a relative inset; the
        searched function tends to 0 at both ends of the left interval
        and to +inf at both ends of the right one (for the main variant),
        so the inset loses nothing.  For the other variants the extremum
        may sit at the inset edge, which the scan handles the same way.
        """
        if i < 1:
            raise ValueError("alpha intervals exist for competitor indices i >= 1")
        if not self.window_ok:
            raise DomainError(
                "alpha intervals need l1 < S0 < mu1 for the ordered leader"
            )
        fn = {"g": self.g, "wl": self.g_wl, "sm": self.g_sm}[variant]
        if grid_n is None:
            grid_n = self.grid_n
        eps = _ENDPOINT_INSET * self.s0
        be = self.breakevens[i]
        constrained = be.lam < self.s0

        argmax_s, lower = grid_extremum(
            lambda s: fn(i, s),
            eps,
            self.lam1 - eps,
            "max",
            grid_n=grid_n,
            xtol=self.refine_tol,
        )
        lower = max(lower, 0.0)

        if constrained and be.rho - be.lam > 2.0 * eps:
            argmin_s, upper = grid_extremum(
                lambda s: fn(i, s),
                be.lam + eps,
                be.rho - eps,
                "min",
                grid_n=grid_n,
                xtol=self.refine_tol,
            )
        else:
            argmin_s, upper = None, math.inf

        feasible = lower <= upper
        if math.isinf(upper):
            witness = lower + max(1.0, lower)
        else:
            witness = 0.5 * (lower + upper)
        return AlphaInterval(
            species_index=i,
            label=self.scenario.species[i].label,
            lower=lower,
            upper=upper,
            feasible=feasible,
            witness=witness,
            argmax_s=argmax_s,
            argmin_s=argmin_s,
            constrained=constrained,
        )

    def alpha_intervals(self, variant: str = "g") -> tuple[AlphaInterval, ...]:
        return tuple(self.alpha_interval(i, variant) for i in range(1, self.scenario.n))

    # -- F condition -------------------------------------------------------

    def check_F_condition(self, grid_n: int | None = None) -> FConditionResult:
        """F(S) < F(l1) left of l1 and F(S) > F(l1) right of it.

        Stage (a) tests the sufficient condition F' > 0 on a grid; when
        that fails, stage (b) compares F against F(l1) directly on dense
        grids of both sides, refining any sign violation by bisection to
        report its onset.  Near-equality failures are flagged marginal.
        """
        if not (math.isfinite(self.lam1) and self.lam1 < self.s0):
            raise DomainError("F condition needs l1 < S0")
        if grid_n is None:
            grid_n = self.grid_n
        sp1 = self.scenario.species[0]
        eps = _ENDPOINT_INSET * self.s0

        def f_num_derivative(s: float) -> float:
            # numerator of F'(S); the denominator (S0-S)^2 is positive
            return sp1.uptake_derivative(s) * (self.s0 - s) + sp1.uptake(s)

        lo, hi = eps, self.s0 - eps
        sufficient = True
        for k in range(grid_n):
            s = lo + (hi - lo) * k / (grid_n - 1)
            if f_num_derivative(s) <= 0.0:
                sufficient = False
                break
        if sufficient:
            return FConditionResult("sufficient", None, None, False)

        f_ref = self.F(self.lam1)
        floor = 1e-12 * (1.0 + abs(f_ref))
        delta = 1e-6 * self.s0

        def side_violation(a: float, b: float, want_below: bool):
            worst = None
            for k in range(grid_n):
                s = a + (b - a) * k / (grid_n - 1)
                gap = f_ref - self.F(s) if want_below else self.F(s) - f_ref
                if gap <= floor:
                    refined = _refine_violation(
                        lambda t: (f_ref - self.F(t)) if want_below else (self.F(t) - f_ref),
                        a,
                        s,
                        floor,
                    )
                    return refined, gap
            return worst, None

        if self.lam1 - delta > eps:
            hit, gap = side_violation(eps, self.lam1 - delta, want_below=True)
            if hit is not None:
                return FConditionResult("fails", hit, gap, abs(gap) <= 1e-9 * (1 + abs(f_ref)))
        if self.lam1 + delta < hi:
            hit, gap = side_violation(self.lam1 + delta, hi, want_below=False)
            if hit is not None:
                return FConditionResult("fails", hit, gap, abs(gap) <= 1e-9 * (1 + abs(f_ref)))
        return FConditionResult("holds", None, None, False)

    # -- aggregate checks ---------------------------------------------------

    def theorem(self) -> TheoremReport:
        """Certificate that the ordered leader excludes all competitors.

        Aggregates the ordering, the growth window of the leader, alpha
        feasibility for every competitor whose own window opens below
        the feed concentration, and the F-crossing condition.  On a yes
        verdict the predicted limit is the leader's survivor state,
        reported in input species order.
        """
        ordering_ok = True  # ties were refused at construction
        lams = tuple(be.lam for be in self.breakevens)
        if not self.window_ok:
            return TheoremReport(
                ordering_ok=ordering_ok,
                window_ok=False,
                alphas=(),
                f_condition=None,
                verdict=False,
                predicted_limit=None,
                permutation=self.permutation,
                lambdas=lams,
                mu1=self.mu1,
            )
        alphas = self.alpha_intervals("g")
        f_cond = self.check_F_condition()
        verdict = all(a.feasible for a in alphas) and f_cond.ok
        return TheoremReport(
            ordering_ok=ordering_ok,
            window_ok=True,
            alphas=alphas,
            f_condition=f_cond,
            verdict=verdict,
            predicted_limit=self.predicted_limit() if verdict else None,
            permutation=self.permutation,
            lambdas=lams,
            mu1=self.mu1,
        )

    def predicted_limit(self) -> tuple[float, ...]:
        """Survivor state of the ordered leader, in input species order."""
        leader_input_index = self.permutation[0]
        eq = self.input_catalog.survivors[leader_input_index]
        if eq is None:
            raise DomainError("leader has no survivor equilibrium below S0")
        return eq.state

    def corollary_apw(self) -> CorollaryReport:
        """Single-species criterion: 1 - F(S)/F(l1) changes sign exactly once."""
        if self.scenario.n != 1:
            raise InapplicableError(
                f"single-species criterion needs n = 1, got n = {self.scenario.n}"
            )
        if not self.window_ok:
            return CorollaryReport("apw", False, False, (), None, None, None, None)
        f_ref = self.F(self.lam1)
        eps = _ENDPOINT_INSET * self.s0
        lo, hi = eps, self.s0 - eps
        n = self.grid_n
        changes = 0
        last_sign = 0
        for k in range(n):
            s = lo + (hi - lo) * k / (n - 1)
            v = 1.0 - self.F(s) / f_ref
            sign = 0 if abs(v) <= 1e-13 else (1 if v > 0 else -1)
            if sign != 0:
                if last_sign != 0 and sign != last_sign:
                    changes += 1
                last_sign = sign
        return CorollaryReport(
            "apw",
            verdict=(changes == 1),
            window_ok=True,
            alphas=(),
            f_condition=None,
            sign_changes=changes,
            identity_ok=None,
            identity_max_rel_err=None,
        )

    def corollary_wl(self) -> CorollaryReport:
        """Constant-yield certificate via the growth-rate ratio variant."""
        if not all(sp.yld.is_constant for sp in self.scenario.species):
            raise InapplicableError(
                "constant-yield certificate needs every yield constant"
            )
        if not self.window_ok:
            return CorollaryReport("wl", False, False, (), None, None, None, None)
        alphas = self.alpha_intervals("wl")
        verdict = all(a.feasible for a in alphas)
        return CorollaryReport(
            "wl",
            verdict=verdict,
            window_ok=True,
            alphas=alphas,
            f_condition=None,
            sign_changes=None,
            identity_ok=None,
            identity_max_rel_err=None,
        )

    def corollary_sm(self) -> CorollaryReport:
        """Yield-ratio certificate; also self-tests its algebraic link.

        The main ratio factors exactly as g_i = (S0-l1)/f_1(l1) * F * g_i^SM;
        the factorization is verified pointwise on a pole-avoiding grid
        and reported alongside the verdict.
        """
        if not self.window_ok:
            return CorollaryReport("sm", False, False, (), None, None, None, None)
        alphas = self.alpha_intervals("sm")
        f_cond = self.check_F_condition()
        scale = (self.s0 - self.lam1) / self._f1_lam1
        worst = 0.0
        eps = _ENDPOINT_INSET * self.s0
        guard = 1e-3 * self.s0
        poles = [self.lam1]
        for be in self.breakevens[1:]:
            poles.extend(v for v in (be.lam, be.mu) if math.isfinite(v))
        n_pts = 512
        for i in range(1, self.scenario.n):
            for k in range(n_pts):
                s = eps + (self.s0 - 2 * eps) * k / (n_pts - 1)
                if any(abs(s - p) < guard for p in poles):
                    continue
                lhs = self.g(i, s)
                rhs = scale * self.F(s) * self.g_sm(i, s)
                rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
                worst = max(worst, rel)
        identity_ok = worst <= 1e-12 or self.scenario.n == 1
        verdict = all(a.feasible for a in alphas) and f_cond.ok and identity_ok
        return CorollaryReport(
            "sm",
            verdict=verdict,
            window_ok=True,
            alphas=alphas,
            f_condition=f_cond,
            sign_changes=None,
            identity_ok=identity_ok,
            identity_max_rel_err=worst,
        )

    def butler_wolkowicz(self) -> ButlerWolkowiczReport:
        """Equal removal rates + connected growth windows + S0 inside.

        The union Q of (lambda_i, mu_i) over species with lambda_i < S0
        must be a connected interval containing S0, and every removal
        rate must equal the dilution rate exactly.
        """
        d = self.scenario.dilution
        equal = all(sp.removal == d for sp in self.scenario.species)
        members = [
            (be.lam, be.mu)
            for be in self.breakevens
            if math.isfinite(be.lam) and be.lam < self.s0
        ]
        members.sort()
        connected = True
        if members:
            _, reach = members[0]
            for lam, mu in members[1:]:
                if lam >= reach:
                    connected = False
                    break
                reach = max(reach, mu)
        s0_in = any(lam < self.s0 < mu for lam, mu in members)
        verdict = equal and bool(members) and connected and s0_in
        return ButlerWolkowiczReport(
            verdict=verdict,
            equal_removal_rates=equal,
            connected=connected,
            s0_in_union=s0_in,
            intervals=tuple(members),
        )


def _refine_violation(gap, a: float, s_bad: float, floor: float) -> float:
    """Earliest point where gap(s) <= floor, localized by bisection.

    gap is positive while the condition holds; s_bad is a grid point
    where it failed.  If the condition already fails at the interval
    start, that start is returned.
    """
    if gap(a) <= floor:
        return a
    lo, hi = a, s_bad
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if gap(mid) <= floor:
            hi = mid
        else:
            lo = mid
    return hi


# -- module-level convenience wrappers --------------------------------------


def check_theorem(sc: Scenario, grid_n: int = 4096, tie_tol: float | None = None) -> TheoremReport:
    return ConditionChecker(sc, grid_n=grid_n, tie_tol=tie_tol).theorem()


def check_corollary_apw(sc: Scenario, grid_n: int = 4096) -> CorollaryReport:
    return ConditionChecker(sc, grid_n=grid_n).corollary_apw()


def check_corollary_wl(sc: Scenario, grid_n: int = 4096) -> CorollaryReport:
    return ConditionChecker(sc, grid_n=grid_n).corollary_wl()


def check_corollary_sm(sc: Scenario, grid_n: int = 4096) -> CorollaryReport:
    return ConditionChecker(sc, grid_n=grid_n).corollary_sm()


def check_butler_wolkowicz(sc: Scenario) -> ButlerWolkowiczReport:
    return ConditionChecker(sc).butler_wolkowicz()
