"""Scalar comparison ODE g' = Z(g): majorant solutions and doubling times.

The default right-hand side is the calibrated power law
Z(p) = C (p^5 + p^3 + p^2); test laws can be injected for oracle checks.
Solutions are strictly increasing, so level queries reduce to monotone
bisection on the dense output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import OutOfDomain

BLOWUP_CAP = 1e12

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


@dataclass(frozen=True)
class GronwallSetup:
    """Initial value and coefficient for the comparison law."""

    g0: float
    coeff_C: float
    t_max_query: float

    def __post_init__(self):
        if not self.g0 > 0.0:
            raise ValueError("g0 must be positive")
        if not self.coeff_C >= 0.0:
            raise ValueError("coeff_C must be nonnegative")
        if not self.t_max_query > 0.0:
            raise ValueError("t_max_query must be positive")

    def law(self) -> Callable[[float], float]:
        c = self.coeff_C
        return lambda p: c * (p**5 + p**3 + p**2)


class GronwallSolution:
    """Dense strictly-increasing solution on [0, t_end].

    Evaluation uses cubic Hermite interpolation on the accepted integrator
    steps; the derivative at every node equals Z(g) exactly by construction.
    `blow_up_time` is finite when the solution crossed the cap, in which case
    it includes the analytic tail integral of 1/Z beyond the cap.
    """

    def __init__(self, ts, gs, fs, blow_up_time, law):
        self.ts = np.asarray(ts)
        self.gs = np.asarray(gs)
        self.fs = np.asarray(fs)
        self.blow_up_time = blow_up_time
        self.law = law

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    @property
    def g_end(self) -> float:
        return float(self.gs[-1])

    def __call__(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < 0.0) or np.any(t_arr > self.ts[-1] * (1 + 1e-12) + 1e-300):
            raise OutOfDomain(f"time outside [0, {self.ts[-1]:.6g}]")
        t_arr = np.clip(t_arr, 0.0, self.ts[-1])
        idx = np.clip(np.searchsorted(self.ts, t_arr, side="right") - 1, 0, self.ts.size - 2)
        h = self.ts[idx + 1] - self.ts[idx]
        x = (t_arr - self.ts[idx]) / h
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        out = (
            h00 * self.gs[idx]
            + h10 * h * self.fs[idx]
            + h01 * self.gs[idx + 1]
            + h11 * h * self.fs[idx + 1]
        )
        return out if np.ndim(t) else float(out[0])

    def inverse(self, level: float, tol: float = 1e-12) -> float:
        """Monotone bisection: the time at which g reaches `level`."""
        if level < self.gs[0] * (1 - 1e-12) or level > self.gs[-1] * (1 + 1e-12):
            raise OutOfDomain(
                f"level {level:.6g} outside computed range "
                f"[{self.gs[0]:.6g}, {self.gs[-1]:.6g}]"
            )
        lo, hi = 0.0, self.t_end
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self(mid) < level:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def _rk45_step(f, t, y, h):
    k = np.empty(7)
    k[0] = f(y)
    for i in range(1, 7):
        acc = 0.0
        for j, a in enumerate(_A[i]):
            acc += a * k[j]
        k[i] = f(y + h * acc)
    y5 = y + h * float(_B5 @ k)
    y4 = y + h * float(_B4 @ k)
    return y5, abs(y5 - y4), k[0]


def gronwall_solve(
    setup: GronwallSetup,
    law: Callable[[float], float] | None = None,
    rel_tol: float = 1e-11,
    cap: float = BLOWUP_CAP,
    stop_level: float | None = None,
) -> GronwallSolution:
    """Integrate g' = Z(g), g(0) = g0 adaptively up to t_max_query or blow-up.

    Returns a dense solution; if g crossed `cap` the reported blow-up time is
    the crossing time plus the tail integral of 1/Z from the cap upward.
    A `stop_level` ends the integration early once g has passed it (used by
    level queries that have no need to ride the blow-up).
    """
    Z = law if law is not None else setup.law()
    t, g = 0.0, float(setup.g0)
    f0 = Z(g)
    if not f0 > 0.0:
        # flat law: the majorant is the constant g0
        ts = np.array([0.0, setup.t_max_query])
        return GronwallSolution(ts, np.array([g, g]), np.array([0.0, 0.0]), None, Z)
    ts, gs, fs = [t], [g], [f0]
    h = min(0.1 * setup.t_max_query, 0.1 * g / f0)
    t_final = setup.t_max_query
    blow_up = None
    max_steps = 100_000
    for _ in range(max_steps):
        if t >= t_final or g >= cap:
            break
        if stop_level is not None and g >= stop_level:
            break
        h = min(h, t_final - t)
        g_new, err, _ = _rk45_step(Z, t, g, h)
        scale = rel_tol * max(abs(g), abs(g_new), 1e-30)
        if err <= scale or h <= 1e-15 * max(t, 1.0):
            t += h
            g = g_new
            ts.append(t)
            gs.append(g)
            fs.append(Z(g))
        factor = 0.9 * (scale / err) ** 0.2 if err > 0 else 2.0
        h *= min(4.0, max(0.2, factor))
    if g >= cap:
        tail, _ = quad(lambda p: 1.0 / Z(p), g, np.inf, limit=200)
        blow_up = t + tail
    return GronwallSolution(np.array(ts), np.array(gs), np.array(fs), blow_up, Z)


def doubling_time(
    setup: GronwallSetup,
    s: float,
    law: Callable[[float], float] | None = None,
    rel_tol: float = 1e-11,
) -> float:
    """Time for the majorant to grow from level s to level 2s.

    For s below g0 the law is restarted from s itself (the construction with
    a smaller initial value); for s at or above g0 this equals
    g^{-1}(2s) - g^{-1}(s) for the setup's own solution, by uniqueness of the
    autonomous flow.
    """
    if not s > 0.0:
        raise ValueError("level s must be positive")
    sub = GronwallSetup(g0=s, coeff_C=setup.coeff_C, t_max_query=setup.t_max_query)
    sol = gronwall_solve(sub, law=law, rel_tol=rel_tol, stop_level=2.05 * s)
    if sol.g_end < 2.0 * s:
        if sol.blow_up_time is None and sol.t_end >= setup.t_max_query:
            raise OutOfDomain("level 2s not reached within t_max_query")
        raise OutOfDomain("level 2s beyond the blow-up guard")
    theta = sol.inverse(2.0 * s)
    if not theta > 0.0:
        raise OutOfDomain("degenerate doubling interval")
    return theta


def comparison_margin(times, measured, setup: GronwallSetup, law=None):
    """Check measured(t) <= g(t) pointwise; returns (ok, margin).

    Only times inside the computed domain of g participate (past blow-up the
    bound is vacuous). The margin is the minimum of g - measured over t > 0:
    at the start the two sides coincide by construction when g0 is seeded
    from the measurement, so the initial point carries no information.
    """
    sol = gronwall_solve(setup, law=law)
    times = np.asarray(times, dtype=float)
    measured = np.asarray(measured, dtype=float)
    inside = times <= sol.t_end
    if not np.any(inside):
        return True, math.inf
    g_vals = np.asarray(sol(times[inside]))
    diffs = g_vals - measured[inside]
    ok = bool(np.all(diffs >= -1e-12 * np.maximum(1.0, np.abs(g_vals))))
    late = times[inside] > times[0]
    margin = float(np.min(diffs[late])) if np.any(late) else float(np.min(diffs))
    return ok, margin
