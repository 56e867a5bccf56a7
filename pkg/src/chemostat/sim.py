"""Adaptive integration of the chemostat equations with invariance guards.

The vector field is

    S'   = D(S0 - S) - sum_i f_i(S) x_i
    x_i' = (p_i(S) - D_i) x_i

integrated by an explicit Dormand-Prince 5(4) embedded pair with
error-based step control.  The non-negative cone is invariant for the
exact flow; numerically, a step ending with a coordinate in [-atol, 0)
is clamped to zero (and counted), while an excursion below -atol
rejects the step at half size.

Trajectory objects record accepted steps (plus optionally requested
sample times via cubic Hermite interpolation), integrator statistics,
and any monitor channels such as Lyapunov samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .analysis import EquilibriumCatalog, Equilibrium, scenario_breakevens
from .errors import DomainError, StiffnessError
from .model import Scenario, require_valid

__all__ = [
    "Trajectory",
    "rhs",
    "integrate",
    "rk_step",
    "ConvergenceReport",
    "detect_convergence",
    "Lemma1Report",
    "verify_lemma1",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

# Dormand-Prince 5(4) tableau; row 7 equals the 5th-order weights (FSAL)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def rhs(sc: Scenario, state: Sequence[float]) -> np.ndarray:
    """Time derivative of (S, x_1..x_n) at a state in the closed cone."""
    y = np.asarray(state, dtype=float)
    s = y[0]
    if s < 0:
        raise DomainError(f"substrate must be >= 0, got {s}")
    x = y[1:]
    out = np.empty_like(y)
    uptake = np.array([sp.uptake(s) for sp in sc.species])
    growth = np.array([sp.growth_rate(s) for sp in sc.species])
    removal = np.array([sp.removal for sp in sc.species])
    out[0] = sc.dilution * (sc.inflow - s) - float(uptake @ x)
    out[1:] = (growth - removal) * x
    return out


def _rhs_guarded(sc: Scenario, y: np.ndarray) -> np.ndarray:
    """rhs with the substrate clamped to 0 for evaluation.

    Intermediate Runge-Kutta stages may transiently leave the cone by an
    amount within the step error; growth laws are only defined for
    S >= 0, so the evaluation point is projected.
    """
    if y[0] < 0.0:
        y = y.copy()
        y[0] = 0.0
    return rhs(sc, y)


def rk_step(
    f: Callable[[float, np.ndarray], np.ndarray],
    t: float,
    y: np.ndarray,
    h: float,
    k1: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One Dormand-Prince 5(4) step from (t, y) with step size h.

    Returns (5th-order solution, error-vector estimate, last stage).
    The last stage is the vector field at the new point and seeds the
    next step (first-same-as-last).
    """
    k = np.empty((7, y.size))
    k[0] = f(t, y) if k1 is None else k1
    for j in range(1, 7):
        yj = y + h * (_A[j] @ k[:j])
        k[j] = f(t + _C[j] * h, yj)
    y5 = y + h * (_B5 @ k)
    err = h * (_E @ k)
    return y5, err, k[6]


@dataclass
class Trajectory:
    """Time-ordered samples of one integration run.

    y rows are states (S, x_1..x_n); monitors maps channel name to a
    same-length array (NaN where a channel was not evaluable).
    termination is "t_end" when the horizon was reached or "time-limit"
    when the step budget ran out first.
    """

    t: np.ndarray
    y: np.ndarray
    monitors: dict[str, np.ndarray] = field(default_factory=dict)
    n_steps: int = 0
    n_rejected: int = 0
    n_clamped: int = 0
    termination: str = "t_end"

    @property
    def n_species(self) -> int:
        return self.y.shape[1] - 1

    def state(self, k: int) -> tuple[float, ...]:
        return tuple(self.y[k])

    def __len__(self) -> int:
        return self.t.size


def _hermite(t0, y0, f0, t1, y1, f1, t):
    """Cubic Hermite interpolant between two accepted steps."""
    h = t1 - t0
    th = (t - t0) / h
    a = y0
    b = f0
    c = (3 * (y1 - y0) / h - 2 * f0 - f1) / h
    d = (2 * (y0 - y1) / h + f0 + f1) / (h * h)
    dt = t - t0
    return a + dt * (b + dt * (c + dt * d))


def integrate(
    sc: Scenario,
    t_end: float,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_steps: int = 1_000_000,
    monitors: Optional[Mapping[str, Callable[[float, np.ndarray], float]]] = None,
    sample_times: Optional[Sequence[float]] = None,
    record_steps: bool = True,
    t0: float = 0.0,
    y0: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Integrate the scenario from its initial state up to t_end.

    Accepted steps are recorded (record_steps=True) and any requested
    sample_times are filled in by cubic Hermite interpolation between
    the bracketing steps.  Monitors are evaluated at every recorded
    sample; a monitor returning NaN marks the channel unavailable there.

    Raises StiffnessError when the step size underflows; an exhausted
    step budget returns the partial trajectory with termination
    "time-limit".
    """
    require_valid(sc)
    if y0 is None:
        y0 = np.array([sc.initial_s, *sc.initial_x], dtype=float)
    else:
        y0 = np.asarray(y0, dtype=float)
    monitors = dict(monitors or {})
    pending = sorted(float(s) for s in (sample_times or []) if t0 < s <= t_end)

    def f(t: float, y: np.ndarray) -> np.ndarray:
        return _rhs_guarded(sc, y)

    ts: list[float] = []
    ys: list[np.ndarray] = []
    mon: dict[str, list[float]] = {name: [] for name in monitors}

    def record(t: float, y: np.ndarray) -> None:
        ts.append(t)
        ys.append(y.copy())
        for name, fn in monitors.items():
            mon[name].append(float(fn(t, y)))

    t = float(t0)
    y = y0.copy()
    record(t, y)

    k1 = f(t, y)
    scale = atol + rtol * np.abs(y)
    d0 = math.sqrt(float(np.mean((y / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((k1 / scale) ** 2)))
    h = 0.01 * d0 / d1 if d1 > 0 and d0 > 0 else 1e-6
    h = min(h, t_end - t0) if t_end > t0 else 1e-6

    n_steps = n_rejected = n_clamped = 0
    termination = "t_end"

    while t < t_end:
        if n_steps >= max_steps:
            termination = "time-limit"
            break
        if h < 1e-14 * max(1.0, abs(t)):
            raise StiffnessError(
                f"step size underflow at t = {t:g} (h = {h:g})", t=t, state=tuple(y)
            )
        hits_end = t + h >= t_end
        h_step = t_end - t if hits_end else h
        y5, err_vec, k_last = rk_step(f, t, y, h_step, k1=k1)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
        if err > 1.0:
            n_rejected += 1
            h = h_step * min(1.0, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
            continue
        if float(np.min(y5)) < -atol:
            # guard: genuine cone violation, retry at half step
            n_rejected += 1
            h = 0.5 * h_step
            continue
        clamped = y5 < 0.0
        if clamped.any():
            y5 = y5.copy()
            y5[clamped] = 0.0
            n_clamped += int(clamped.sum())
            k_last = f(t + h_step, y5)

        t_new = t_end if hits_end else t + h_step
        # dense output at requested times inside (t, t_new]
        endpoint_recorded = False
        while pending and pending[0] <= t_new:
            s_t = pending.pop(0)
            if s_t == t_new:
                record(t_new, y5)
                endpoint_recorded = True
            else:
                y_s = _hermite(t, y, k1, t_new, y5, k_last, s_t)
                record(s_t, np.maximum(y_s, 0.0))
        if record_steps and not endpoint_recorded:
            record(t_new, y5)

        t, y, k1 = t_new, y5, k_last
        n_steps += 1
        factor = _MAX_FACTOR if err == 0.0 else min(
            _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2)
        )
        h = h_step * factor

    traj = Trajectory(
        t=np.array(ts),
        y=np.array(ys),
        monitors={name: np.array(vals) for name, vals in mon.items()},
        n_steps=n_steps,
        n_rejected=n_rejected,
        n_clamped=n_clamped,
        termination=termination,
    )
    return traj


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    equilibrium: Optional[Equilibrium]
    distance: float
    rhs_norm: float
    oscillating: bool
    s_amplitude: float


def detect_convergence(
    traj: Trajectory,
    catalog: EquilibriumCatalog,
    sc: Scenario,
    eps: float = 1e-6,
    window: int = 50,
) -> ConvergenceReport:
    """Decide whether the trajectory settled onto a cataloged equilibrium.

    Converged means the last `window` samples all sit within eps
    (sup-norm) of one equilibrium and the vector field at the final
    sample has sup-norm below eps*D.  A non-converged trajectory whose
    substrate peak-to-peak amplitude over the window exceeds eps is
    flagged oscillating.
    """
    w = min(window, len(traj))
    tail = traj.y[-w:]
    last = traj.y[-1]
    rhs_norm = float(np.max(np.abs(rhs(sc, last))))
    best_eq = None
    best_dist = math.inf
    for eq in catalog.all_equilibria():
        dist = float(np.max(np.abs(tail - np.array(eq.state)), axis=None))
        if dist < best_dist:
            best_eq, best_dist = eq, dist
    converged = (
        best_eq is not None and best_dist <= eps and rhs_norm < eps * sc.dilution
    )
    s_amp = float(np.max(tail[:, 0]) - np.min(tail[:, 0]))
    oscillating = not converged and s_amp > eps
    return ConvergenceReport(
        converged=converged,
        equilibrium=best_eq if converged else None,
        distance=best_dist,
        rhs_norm=rhs_norm,
        oscillating=oscillating,
        s_amplitude=s_amp,
    )


@dataclass(frozen=True)
class Lemma1Report:
    nonnegative_ok: bool
    bound: float
    bounded_ok: bool
    hypothesis_holds: bool
    entry_time: Optional[float]
    s_below_feed_ok: bool


def verify_lemma1(
    traj: Trajectory,
    sc: Scenario,
    eps: float = 1e-9,
    breakevens=None,
) -> Lemma1Report:
    """Check positivity, boundedness and eventual S < S0 on a trajectory.

    The bound uses the weighted total z = S + sum_i x_i / Ymax_i with
    Ymax_i the largest yield on the visited substrate range: z satisfies
    z' <= D*S0 - Dmin*z, so z stays below max(z(0), D*S0/Dmin).  The
    eventual-entry clause applies when some species has its growth
    window straddling the feed concentration; entry_time is the first
    sample time after which every sample has S < S0.
    """
    nonneg = bool(np.all(traj.y >= 0.0))

    s_hi = max(float(np.max(traj.y[:, 0])), sc.yield_range_max())
    ymax = np.array(
        [max(sp.yield_value(0.0), sp.yield_value(s_hi)) for sp in sc.species]
    )
    dmin = min(sc.dilution, *(sp.removal for sp in sc.species))
    z = traj.y[:, 0] + traj.y[:, 1:] @ (1.0 / ymax)
    bound = max(float(z[0]), sc.dilution * sc.inflow / dmin) * (1 + 1e-9) + eps
    bounded = bool(np.all(z <= bound))

    if breakevens is None:
        breakevens = scenario_breakevens(sc)
    hypothesis = any(be.lam < sc.inflow < be.mu for be in breakevens)

    entry_time = None
    s_ok = True
    if hypothesis:
        above = np.nonzero(traj.y[:, 0] >= sc.inflow)[0]
        if above.size == 0:
            entry_time = float(traj.t[0])
        elif above[-1] == len(traj) - 1:
            s_ok = False
        else:
            entry_time = float(traj.t[above[-1]])
    return Lemma1Report(
        nonnegative_ok=nonneg,
        bound=bound,
        bounded_ok=bounded,
        hypothesis_holds=hypothesis,
        entry_time=entry_time,
        s_below_feed_ok=s_ok if hypothesis else True,
    )


# -- CSV export ---------------------------------------------------------------


def write_trajectory_csv(traj: Trajectory, path: str) -> None:
    """Write samples as CSV: t,S,x_1,...,x_n plus any monitor columns.

    Full double precision (17 significant digits) so a re-parse
    reproduces the in-memory values exactly.
    """
    names = list(traj.monitors)
    header = ["t", "S"] + [f"x_{i + 1}" for i in range(traj.n_species)] + names
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(len(traj)):
            row = [traj.t[k], *traj.y[k]]
            row.extend(traj.monitors[name][k] for name in names)
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_trajectory_csv(path: str) -> Trajectory:
    """Parse a trajectory CSV written by write_trajectory_csv."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    data = np.array(rows)
    n_state = sum(1 for name in header if name == "S" or name.startswith("x_"))
    monitors = {
        name: data[:, j]
        for j, name in enumerate(header)
        if j > n_state  # columns after t,S,x_*
    }
    return Trajectory(
        t=data[:, 0],
        y=data[:, 1 : n_state + 1],
        monitors=monitors,
        termination="t_end",
    )
