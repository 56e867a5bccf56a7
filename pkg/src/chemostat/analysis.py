"""Break-even concentrations, equilibria and local stability verdicts.

The break-even pair (lambda, mu) of a species is where its growth rate
crosses its removal rate: growth exceeds removal exactly on the open
interval (lambda, mu).  Conventions for missing crossings follow the
extended reals: one crossing gives (lambda, inf), none gives (inf, inf).

Equilibria of the full system are the washout state, one survivor state
per species at S = lambda_i, and one more per species at S = mu_i when
that lies below the feed concentration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import AssumptionViolation, DegenerateError, DomainError, NumericError
from .model import Scenario, Species, require_valid
from .numerics import bisect_root

__all__ = [
    "BreakEven",
    "Equilibrium",
    "EquilibriumCatalog",
    "compute_breakeven",
    "scenario_breakevens",
    "nutrient_to_biomass",
    "survivor_local_stability",
    "catalog_equilibria",
]

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"

# grid values this close to the removal rate, without an accompanying sign
# change, indicate a tangential (double-root) crossing
_TOUCH_TOL = 1e-12


@dataclass(frozen=True)
class BreakEven:
    """Extended-real crossing pair plus the capped upper end rho.

    lam <= mu always; lam == inf implies mu == inf.  rho = min(mu, S0) is
    the upper end of the interval on which the alpha-interval machinery
    searches for minima.
    """

    lam: float
    mu: float
    rho: float

    def contains(self, s: float) -> bool:
        """True when s lies in the closed interval [lam, mu]."""
        return self.lam <= s <= self.mu

    @property
    def finite_values(self) -> tuple[float, ...]:
        return tuple(v for v in (self.lam, self.mu) if math.isfinite(v))


def compute_breakeven(
    sp: Species,
    s0: float,
    search_max: float | None = None,
    grid_n: int = 4096,
    tol: float = 1e-13,
) -> BreakEven:
    """Solve p(S) = D for the break-even pair of one species.

    Scans [0, search_max] (default 10*S0, wide enough for all supported
    families at sane parameters) for sign changes of p(S) - D, then
    refines each bracket by bisection to width <= tol.  More than two
    crossings put the species outside the admissible class; a grid value
    touching D without a sign change is reported as degenerate.
    """
    if grid_n < 64:
        raise ValueError(f"grid_n must be >= 64, got {grid_n}")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if search_max is None:
        search_max = 10.0 * s0
    d = sp.removal

    def q(s: float) -> float:
        return sp.growth_rate(s) - d

    roots: list[float] = []
    step = search_max / (grid_n - 1)
    prev_s, prev_q = 0.0, -d  # p(0) = 0 < D always
    for k in range(1, grid_n):
        s = search_max if k == grid_n - 1 else k * step
        qs = q(s)
        if qs == 0.0 or abs(qs) <= _TOUCH_TOL * max(1.0, d):
            nxt = q(min(s + step, search_max)) if k < grid_n - 1 else qs
            if (prev_q < 0 and nxt < 0) or (prev_q > 0 and nxt > 0):
                raise DegenerateError(
                    f"species {sp.label!r}: growth rate touches the removal rate "
                    f"tangentially near S = {s:g}; break-even pair is degenerate"
                )
            if qs == 0.0:
                roots.append(s)
                prev_s, prev_q = s, -prev_q if prev_q != 0 else qs
                continue
        if (qs > 0) != (prev_q > 0):
            try:
                roots.append(bisect_root(q, prev_s, s, xtol=tol))
            except NumericError as exc:
                raise NumericError(
                    f"species {sp.label!r}: bracket refinement failed on "
                    f"[{prev_s:g}, {s:g}]"
                ) from exc
        prev_s, prev_q = s, qs

    if len(roots) > 2:
        raise AssumptionViolation(
            f"species {sp.label!r}: growth rate crosses the removal rate "
            f"{len(roots)} times on [0, {search_max:g}]; at most two crossings "
            f"are admissible"
        )
    if len(roots) == 0:
        lam, mu = math.inf, math.inf
    elif len(roots) == 1:
        lam, mu = roots[0], math.inf
    else:
        lam, mu = roots
    return BreakEven(lam=lam, mu=mu, rho=min(mu, s0))


def scenario_breakevens(
    sc: Scenario,
    search_max: float | None = None,
    grid_n: int = 4096,
    tol: float = 1e-13,
) -> tuple[BreakEven, ...]:
    """Break-even pair of every species in the scenario, input order."""
    return tuple(
        compute_breakeven(sp, sc.inflow, search_max=search_max, grid_n=grid_n, tol=tol)
        for sp in sc.species
    )


def nutrient_to_biomass(sc: Scenario, i: int, s: float) -> float:
    """F_i(S) = D*(S0 - S)/f_i(S): the biomass balancing substrate level S.

    Singular at S = 0 where the uptake rate vanishes; negative for S
    above the feed concentration.
    """
    if s <= 0.0:
        raise DomainError(f"F_i is singular at S = {s} (uptake vanishes)")
    f = sc.species[i].uptake(s)
    if f <= 0.0:
        raise DomainError(f"uptake of species {i} is {f} at S = {s}")
    return sc.dilution * (sc.inflow - s) / f


@dataclass(frozen=True)
class Equilibrium:
    """One steady state with its local-stability verdict.

    kind is "washout", "survivor" (S at the lower break-even) or
    "inhibited" (S at the upper break-even).  witness carries the scalar
    whose sign decided the verdict, residual the largest right-hand-side
    component at the state.
    """

    kind: str
    species_index: Optional[int]
    state: tuple[float, ...]
    stability: str
    witness: Optional[float]
    residual: float


@dataclass(frozen=True)
class EquilibriumCatalog:
    """All equilibria of a scenario plus degeneracy bookkeeping.

    survivors[i] / inhibited[i] are None when species i's equilibrium
    does not exist (its break-even exceeds the feed concentration).
    degenerate_pairs lists cross-species coincidences of finite
    break-even values; checkers refuse to run when any are present.
    coalescent lists species whose lambda or mu sits within tolerance of
    the feed concentration.
    """

    breakevens: tuple[BreakEven, ...]
    washout: Equilibrium
    survivors: tuple[Optional[Equilibrium], ...]
    inhibited: tuple[Optional[Equilibrium], ...]
    degenerate: bool
    degenerate_pairs: tuple[tuple[int, int], ...]
    coalescent: tuple[int, ...]

    def all_equilibria(self) -> list[Equilibrium]:
        out = [self.washout]
        out.extend(e for e in self.survivors if e is not None)
        out.extend(e for e in self.inhibited if e is not None)
        return out


def _rhs_residual(sc: Scenario, state: tuple[float, ...]) -> float:
    """Largest absolute component of the vector field at a state."""
    s = state[0]
    x = state[1:]
    ds = sc.dilution * (sc.inflow - s)
    worst = 0.0
    for sp, xi in zip(sc.species, x):
        ds -= sp.uptake(s) * xi if s > 0 else 0.0
        worst = max(worst, abs((sp.growth_rate(s) - sp.removal) * xi))
    return max(worst, abs(ds))


def survivor_local_stability(
    sc: Scenario,
    i: int,
    lam: float | None = None,
    tol: float = 1e-9,
) -> tuple[str, float]:
    """Verdict and witness for the survivor equilibrium of species i.

    The witness is w = f_i(lam) + f_i'(lam)*(S0 - lam); the state is
    locally exponentially stable exactly when w > 0, equivalently when
    F_i'(lam) < 0.  Both routes are computed (the second by central
    finite differences) and must agree in sign; a witness within tol of
    zero yields a marginal verdict with no sign assertion.
    """
    sp = sc.species[i]
    if lam is None:
        lam = compute_breakeven(sp, sc.inflow).lam
    if not (math.isfinite(lam) and lam < sc.inflow):
        raise DomainError(
            f"species {i} has lambda = {lam}, not inside (0, S0); "
            "no survivor equilibrium to classify"
        )
    w = sp.uptake(lam) + sp.uptake_derivative(lam) * (sc.inflow - lam)
    scale = 1.0 + sp.uptake(lam)
    if abs(w) <= tol * scale:
        return MARGINAL, w
    h = 1e-6 * max(1.0, lam)
    fd = (nutrient_to_biomass(sc, i, lam + h) - nutrient_to_biomass(sc, i, lam - h)) / (
        2.0 * h
    )
    if (w > 0) == (fd < 0):
        return (STABLE if w > 0 else UNSTABLE), w
    if abs(fd) <= math.sqrt(tol) * (1.0 + abs(w)):
        return MARGINAL, w
    raise NumericError(
        f"stability witnesses disagree for species {i}: "
        f"sign test {w:g} vs finite-difference slope {fd:g}"
    )


def catalog_equilibria(
    sc: Scenario,
    tol: float | None = None,
    breakevens: tuple[BreakEven, ...] | None = None,
    breakeven_grid_n: int = 4096,
    breakeven_tol: float = 1e-13,
) -> EquilibriumCatalog:
    """Enumerate every equilibrium of the scenario with verdicts.

    tol (default 1e-8*S0) controls degenerate-tie detection between
    break-even values of distinct species and coalescence flags against
    the feed concentration.  Ties do not abort the catalog; they only
    set the degenerate flag, which downstream checkers treat as a hard
    refusal.
    """
    require_valid(sc)
    if tol is None:
        tol = 1e-8 * sc.inflow
    if breakevens is None:
        breakevens = scenario_breakevens(
            sc, grid_n=breakeven_grid_n, tol=breakeven_tol
        )
    n = sc.n
    s0 = sc.inflow

    # washout: eigenvalues are -D and p_i(S0) - D_i, so stability is
    # equivalent to S0 lying outside every [lambda_i, mu_i]
    coalescent = tuple(
        i
        for i, be in enumerate(breakevens)
        if any(abs(v - s0) <= tol for v in be.finite_values)
    )
    washout_state = (s0,) + (0.0,) * n
    washout_witness = max(
        sc.species[i].growth_rate(s0) - sc.species[i].removal for i in range(n)
    )
    eig_tol = 1e-9 * max(1.0, sc.dilution)
    if washout_witness > eig_tol:
        washout_verdict = UNSTABLE
    elif washout_witness >= -eig_tol:
        washout_verdict = MARGINAL
    else:
        washout_verdict = STABLE
    washout = Equilibrium(
        kind="washout",
        species_index=None,
        state=washout_state,
        stability=washout_verdict,
        witness=washout_witness,
        residual=_rhs_residual(sc, washout_state),
    )

    survivors: list[Optional[Equilibrium]] = []
    inhibited: list[Optional[Equilibrium]] = []
    for i, be in enumerate(breakevens):
        survivors.append(_single_species_equilibrium(sc, i, be.lam, "survivor", breakevens, tol))
        inhibited.append(_single_species_equilibrium(sc, i, be.mu, "inhibited", breakevens, tol))

    # only coincidences at or below the feed concentration create
    # non-isolated equilibria; ties beyond S0 never materialize
    relevant = [
        tuple(v for v in be.finite_values if v <= s0 + tol) for be in breakevens
    ]
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            for vi in relevant[i]:
                for vj in relevant[j]:
                    if abs(vi - vj) <= tol:
                        pairs.append((i, j))
    pairs = tuple(sorted(set(pairs)))

    return EquilibriumCatalog(
        breakevens=tuple(breakevens),
        washout=washout,
        survivors=tuple(survivors),
        inhibited=tuple(inhibited),
        degenerate=bool(pairs),
        degenerate_pairs=pairs,
        coalescent=coalescent,
    )


def _single_species_equilibrium(
    sc: Scenario,
    i: int,
    s_eq: float,
    kind: str,
    breakevens: tuple[BreakEven, ...],
    tol: float,
) -> Optional[Equilibrium]:
    """Equilibrium with only species i present at substrate level s_eq."""
    if not (math.isfinite(s_eq) and s_eq <= sc.inflow):
        return None
    if s_eq <= 0.0:
        return None
    xi = nutrient_to_biomass(sc, i, s_eq)
    state = [0.0] * (sc.n + 1)
    state[0] = s_eq
    state[i + 1] = xi
    state_t = tuple(state)
    residual = _rhs_residual(sc, state_t)

    if kind == "inhibited":
        # always locally exponentially unstable when it exists
        return Equilibrium(kind, i, state_t, UNSTABLE, None, residual)

    # a positive invasion rate of any absent species decides instability
    invasion = max(
        (
            sc.species[j].growth_rate(s_eq) - sc.species[j].removal
            for j in range(sc.n)
            if j != i
        ),
        default=-math.inf,
    )
    if invasion > tol:
        return Equilibrium(kind, i, state_t, UNSTABLE, invasion, residual)
    if s_eq < sc.inflow:
        verdict, witness = survivor_local_stability(sc, i, lam=s_eq)
    else:
        verdict, witness = MARGINAL, 0.0  # coalesces with washout
    if invasion > -tol and verdict == STABLE:
        verdict = MARGINAL
    return Equilibrium(kind, i, state_t, verdict, witness, residual)
