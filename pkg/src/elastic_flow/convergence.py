"""Vanishing-regularization experiment: evolve the same initial curve for a
ladder of epsilon values and for epsilon = 0, measure C^k distances of the
constant-speed parametrizations over a time window, and fit an empirical
order in epsilon.

The measured distances are reported and their monotone decrease along the
ladder is asserted by the verification suite; no convergence *rate* is
asserted anywhere, only recorded.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import stencils
from .errors import ConfigError, WindowMismatch
from .flow import FlowConfig, Terminated, Trajectory, run
from .geometry import DiscreteCurve


@dataclass(frozen=True)
class SweepConfig:
    """Epsilon ladder sharing one base flow configuration."""

    epsilons: tuple[float, ...]
    base: FlowConfig
    delta: float = 0.0
    k_max: int = 1
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(not 0.0 < e <= 1.0 for e in eps):
            raise ConfigError("epsilons", "need values in (0, 1]")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilons", "must be strictly decreasing")
        object.__setattr__(self, "epsilons", eps)
        if not 0.0 <= self.delta < self.base.t_end:
            raise ConfigError("delta", "must satisfy 0 <= delta < t_end")
        if not 0 <= self.k_max <= 3:
            raise ConfigError("k_max", "measurable derivative orders are 0..3")
        times = tuple(float(t) for t in self.snapshot_times) or self._default_times()
        dt = self.base.dt
        tol = 1e-9 * max(1.0, self.base.t_end)
        for t in times:
            k = round(t / dt)
            if abs(k * dt - t) > 1e-9 * max(1.0, t):
                raise ConfigError("snapshot_times", f"{t} is not a multiple of dt")
            if not self.delta - tol <= t <= self.base.t_end + tol:
                raise ConfigError("snapshot_times", f"{t} outside [delta, t_end]")
        object.__setattr__(self, "snapshot_times", times)

    def _default_times(self) -> tuple[float, ...]:
        dt = self.base.dt
        lo = max(self.delta, dt)
        grid = np.linspace(lo, self.base.t_end, 9)
        return tuple(sorted({round(t / dt) * dt for t in grid}))


@dataclass
class ConvergenceReport:
    """Per-epsilon distances to the limit-flow reference plus fitted orders."""

    epsilons: list[float]
    distances: np.ndarray  # shape (len(epsilons), k_max + 1)
    fitted_order: list[float | None]
    monotone: list[bool]
    k_max: int
    window: tuple[float, float]
    meta: dict = field(default_factory=dict)
    failed_rows: list[int] = field(default_factory=list)


def _param_derivative(values: np.ndarray, order: int) -> np.ndarray:
    """Derivative in the [0, 1] curve parameter on the uniform node grid."""
    if order == 0:
        return values
    n = values.shape[0] - 1
    return np.column_stack(
        [stencils.derivative_uniform(values[:, k], 1.0 / n, order) for k in range(2)]
    )


def _resample(nodes: np.ndarray, n_target: int) -> np.ndarray:
    if nodes.shape[0] - 1 == n_target:
        return nodes
    x = np.linspace(0.0, 1.0, nodes.shape[0])
    return CubicSpline(x, nodes, axis=0)(np.linspace(0.0, 1.0, n_target + 1))


def _common_snapshots(a: Trajectory, b: Trajectory, window):
    t0, t1 = window
    eps_t = 1e-9 * max(1.0, abs(t1))
    for traj in (a, b):
        last = traj.diagnostics[-1].t
        if last + eps_t < t1:
            raise WindowMismatch(
                f"trajectory ended at t = {last:.6g} before the window end {t1:.6g}"
            )
    times_b = {round(st.time / (b.config.dt if b.config else 1e-12)): st for st in b.states}
    pairs = []
    dt_b = b.config.dt if b.config else None
    for st in a.states:
        if not (t0 - eps_t <= st.time <= t1 + eps_t):
            continue
        if dt_b is not None:
            key = round(st.time / dt_b)
            other = times_b.get(key)
            if other is not None and abs(other.time - st.time) <= eps_t:
                pairs.append((st, other))
    if not pairs:
        raise WindowMismatch("no common snapshot times inside the window")
    return pairs


def ck_distance(traj_a: Trajectory, traj_b: Trajectory, k: int, window) -> float:
    """Sup over common snapshots and nodes of |d^j/dx^j (A - B)| for j <= k.

    Both trajectories must be sampled at common times inside the window;
    snapshots with different node counts are resampled to the coarser grid
    (adding an O(h^2) interpolation-level floor to the distance).
    """
    if not 0 <= k <= 3:
        raise ValueError("k must be in 0..3")
    pairs = _common_snapshots(traj_a, traj_b, window)
    worst = 0.0
    for st_a, st_b in pairs:
        na = st_a.curve.n
        nb = st_b.curve.n
        n_common = min(na, nb)
        nodes_a = _resample(st_a.curve.nodes, n_common)
        nodes_b = _resample(st_b.curve.nodes, n_common)
        for order in range(k + 1):
            diff = _param_derivative(nodes_a, order) - _param_derivative(nodes_b, order)
            worst = max(worst, float(np.max(np.linalg.norm(diff, axis=1))))
    return worst


def singularity_time_estimate(traj: Trajectory) -> float | None:
    """Detection time for runs stopped by the blow-up detector, else None."""
    if traj.terminated_by is Terminated.SINGULARITY_DETECTED:
        return traj.event_time
    return None


def _worker_count(n_jobs: int) -> int:
    env = os.environ.get("ELASTIC_FLOW_THREADS")
    if env is not None:
        try:
            cap = max(1, int(env))
        except ValueError:
            cap = 1
        return min(n_jobs, cap)
    return min(n_jobs, os.cpu_count() or 1, 4)


def run_sweep(initial: DiscreteCurve, config: SweepConfig) -> ConvergenceReport:
    """One reference run at epsilon = 0 plus one run per ladder value.

    Distances of every row are measured against the same reference
    trajectory on [delta, t_end]. Rows whose run terminated early are
    flagged in `failed_rows` and carry NaN distances instead of aborting
    the sweep. Rows execute on a thread pool capped by ELASTIC_FLOW_THREADS.
    """
    times = list(config.snapshot_times)
    window = (max(config.delta, times[0]), config.base.t_end)

    def run_one(eps: float) -> Trajectory:
        cfg = FlowConfig(
            epsilon=eps,
            n=config.base.n,
            dt=config.base.dt,
            t_end=config.base.t_end,
            reparam_every=config.base.reparam_every,
            kappa_blowup_threshold=config.base.kappa_blowup_threshold,
            solver_tol=config.base.solver_tol,
        )
        return run(initial, cfg, snapshot_times=times)

    jobs = [0.0, *config.epsilons]
    workers = _worker_count(len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, jobs))
    else:
        results = [run_one(e) for e in jobs]
    reference, rows = results[0], results[1:]

    n_eps = len(config.epsilons)
    distances = np.full((n_eps, config.k_max + 1), np.nan)
    failed = []
    for i, traj in enumerate(rows):
        if traj.terminated_by is not Terminated.REACHED_T_END:
            failed.append(i)
            continue
        for k in range(config.k_max + 1):
            distances[i, k] = ck_distance(traj, reference, k, window)

    fitted, monotone = [], []
    eps_arr = np.array(config.epsilons)
    for k in range(config.k_max + 1):
        col = distances[:, k]
        good = np.isfinite(col) & (col > 1e-10)
        if np.count_nonzero(good) >= 2:
            slope = np.polyfit(np.log(eps_arr[good]), np.log(col[good]), 1)[0]
            fitted.append(float(slope))
        else:
            fitted.append(None)
        finite = col[np.isfinite(col)]
        monotone.append(bool(finite.size >= 2 and np.all(np.diff(finite) < 0.0)))
    return ConvergenceReport(
        epsilons=list(config.epsilons),
        distances=distances,
        fitted_order=fitted,
        monotone=monotone,
        k_max=config.k_max,
        window=window,
        meta={
            "n": config.base.n,
            "dt": config.base.dt,
            "t_end": config.base.t_end,
            "delta": config.delta,
            "snapshot_times": times,
        },
        failed_rows=failed,
    )
