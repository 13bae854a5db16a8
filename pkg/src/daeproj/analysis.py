"""Convergence-order estimation, trajectory comparison and boundedness
monitoring."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import MeshMismatch
from .solvers import solve

_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class OrderReport:
    """Measured convergence order of a method on one problem.

    errors[k] is the max-norm error of the run with step step_sizes[k]
    against the reference; fitted_order is the least-squares slope of
    log(error) against log(h); pairwise_orders are log2(e_k / e_{k+1})
    for the successive halvings.
    """

    step_sizes: np.ndarray
    errors: np.ndarray
    fitted_order: float
    pairwise_orders: np.ndarray

    def to_text(self):
        lines = ["h                 max error        pairwise order"]
        pw = [""] + [f"{o:.3f}" for o in self.pairwise_orders]
        for h, e, o in zip(self.step_sizes, self.errors, pw):
            lines.append(f"{h:<17.10g} {e:<16.6e} {o}")
        lines.append(f"fitted order: {self.fitted_order:.4f}")
        return "\n".join(lines)


@dataclass(frozen=True)
class BoundednessReport:
    """Observed boundedness of a trajectory on its (finite) interval.

    Reports max ||x_i|| and a windowed growth trend; it never claims
    stability, only what the computed trajectory did on [t0, T].
    trend_ratio compares the max norm of the last window against the
    largest earlier window."""

    max_norm: float
    window_maxima: np.ndarray
    trend_ratio: float
    growing: bool

    def to_text(self):
        verdict = "growing" if self.growing else "non-growing"
        return (
            f"max ||x||: {self.max_norm:.6e}\n"
            f"windowed trend: {verdict} (last/earlier ratio {self.trend_ratio:.4f})"
        )


def compare_trajectories(a, b):
    """Max-norm discrepancy of two completed runs at their shared mesh points.

    The meshes must be nested (one step an integer multiple of the other).
    """
    if not (a.completed and b.completed):
        raise MeshMismatch("both trajectories must have completed")
    coarse, fine = (a, b) if a.t.size <= b.t.size else (b, a)
    if fine.t[0] != coarse.t[0] or abs(fine.t[-1] - coarse.t[-1]) > _ALIGN_TOL:
        raise MeshMismatch("trajectories cover different intervals")
    ratio = (fine.t.size - 1) / (coarse.t.size - 1)
    r = int(round(ratio))
    if abs(ratio - r) > 1e-9:
        raise MeshMismatch("meshes are not nested")
    shared = fine.t[::r]
    scale = max(1.0, float(np.abs(coarse.t).max()))
    if np.abs(shared - coarse.t).max() > _ALIGN_TOL * scale:
        raise MeshMismatch("mesh points do not line up")
    diff = fine.x[::r] - coarse.x
    return float(np.linalg.norm(diff, axis=1).max())


def _max_error_vs_exact(traj, exact):
    ref = np.asarray(exact(traj.t), dtype=float)
    return float(np.linalg.norm(traj.x - ref, axis=1).max())


def _fit_order(hs, errors):
    """Least-squares slope of log error against log h, dropping the
    coarsest run when its error is within 10x of the finest one
    (pre-asymptotic guard)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = slice(None)
    if errors.size > 2 and errors[0] < 10.0 * errors[-1]:
        keep = slice(1, None)
    return float(np.polyfit(np.log(hs[keep]), np.log(errors[keep]), 1)[0])


def empirical_order(dae, x0, base_config, n_halvings, reference=None):
    """Solve at h, h/2, ..., h/2^n_halvings and fit the convergence order.

    reference is {"exact": t -> x} when a closed-form trajectory is known
    (manufactured problems) or {"fine_grid": factor} to measure against a
    same-method run at (finest h)/factor; default is fine_grid 16.
    Solver failures propagate.
    """
    if n_halvings < 2:
        raise ValueError("need at least 2 halvings")
    reference = reference or {"fine_grid": 16}
    hs = [base_config.h / 2 ** k for k in range(n_halvings + 1)]
    runs = []
    for h in hs:
        traj = solve(dae, x0, replace(base_config, h=h, N=None))
        if not traj.completed:
            raise MeshMismatch(
                f"run at h={h:g} failed at step {traj.failed_step}: {traj.failure}"
            )
        runs.append(traj)

    if "exact" in reference:
        exact = reference["exact"]
        errors = np.array([_max_error_vs_exact(tr, exact) for tr in runs])
    else:
        factor = int(reference["fine_grid"])
        ref = solve(dae, x0, replace(base_config, h=hs[-1] / factor, N=None))
        if not ref.completed:
            raise MeshMismatch("reference run failed")
        errors = np.array([compare_trajectories(tr, ref) for tr in runs])

    hs = np.asarray(hs)
    pairwise = np.log2(errors[:-1] / errors[1:])
    return OrderReport(
        step_sizes=hs, errors=errors,
        fitted_order=_fit_order(hs, errors), pairwise_orders=pairwise,
    )


def boundedness_monitor(traj, window):
    """Observed boundedness of a completed trajectory.

    Splits ||x_i|| into consecutive windows of `window` mesh points and
    flags growth when the last window's maximum exceeds the largest
    earlier window by more than 5%."""
    if not traj.completed:
        raise ValueError("boundedness_monitor expects a completed trajectory")
    if window < 1:
        raise ValueError("window must be a positive number of mesh points")
    norms = np.linalg.norm(traj.x, axis=1)
    n_win = max(2, int(np.ceil(norms.size / window)))
    chunks = np.array_split(norms, n_win)
    maxima = np.array([c.max() for c in chunks])
    earlier = float(maxima[:-1].max())
    last = float(maxima[-1])
    if earlier == 0.0:
        ratio = np.inf if last > 0.0 else 1.0
    else:
        ratio = last / earlier
    return BoundednessReport(
        max_norm=float(norms.max()),
        window_maxima=maxima,
        trend_ratio=float(ratio),
        growing=bool(ratio > 1.05),
    )
