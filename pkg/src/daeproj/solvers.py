"""Combined time-stepping methods on a uniform mesh.

Both methods advance the differential component z with an explicit scheme
and the algebraic component u with a single Newton-type update per step
(the fixed point u = w(t,z,u) linearized at the previous u):

  method 1   explicit Euler for z, then the u-update at the new point;
             first order accurate on C^2 data.
  method 2   Euler predictor for z, predictor u-update, trapezoidal
             recalculation of z averaging the two endpoint slopes, and a
             final u-update with the refined z; second order on C^3 data.

The projectors of every mesh point are computed once (batched over the
mesh) and shared by the two steps that touch the point.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dae import Form, SemilinearDAE, StepState, phi_operator, reduce_to_inside_form
from .dae import consistent_initialize
from .errors import IndexTooHigh, SingularNewtonMatrix
from .pencil import (
    QuadratureConfig,
    estimate_index,
    compute_projectors,
    projector_table,
)

METHOD_SIMPLE = 1
METHOD_RECALCULATED = 2

# solver-facing matrices of one mesh point:
#   E  = [P1' - G^{-1} Q1 (A' + B)] P1     (z-update matrix)
#   L1 = G^{-1} Q1,  L2 = G^{-1} Q2,  AP = A' P1
_PointOps = namedtuple("_PointOps", "t P1 P2 E L1 L2 AP")


@dataclass
class SolverConfig:
    """Mesh, method and tolerance settings for one solve.

    Exactly one of h (step) or N (step count) fixes the uniform mesh
    t_i = t0 + i*h on [t0, T].  diag_every > 0 records solvability
    diagnostics (restricted-operator condition, projector defect, pencil
    index) every that many steps.  alg_iterations is the number of
    Newton-type updates applied per algebraic stage; the methods prescribe
    exactly one, the iterate-to-tolerance variant is opt-in.
    """

    method: int = METHOD_SIMPLE
    t0: float = 0.0
    T: float = 1.0
    h: Optional[float] = None
    N: Optional[int] = None
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    consistency_tol: float = 1e-12
    diag_every: int = 0
    init_max_iter: int = 50
    alg_iterations: int = 1

    def mesh(self):
        """(ts, h, N) of the uniform mesh; validates the configuration."""
        if self.method not in (METHOD_SIMPLE, METHOD_RECALCULATED):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.T > self.t0:
            raise ValueError("need T > t0")
        if (self.h is None) == (self.N is None):
            raise ValueError("specify exactly one of h and N")
        span = self.T - self.t0
        if self.N is not None:
            N = int(self.N)
            if N < 1:
                raise ValueError("need at least one step")
            h = span / N
        else:
            if not self.h > 0.0:
                raise ValueError("need h > 0")
            N = int(round(span / self.h))
            if N < 1 or abs(N * self.h - span) > 1e-8 * span:
                raise ValueError("h does not divide T - t0 into whole steps")
            h = self.h
        return np.linspace(self.t0, self.T, N + 1), h, N


@dataclass
class Trajectory:
    """Mesh values of one solve.

    x[i] = P1(t[i]) z[i] + P2(t[i]) u[i]; residuals[i] is the norm of the
    algebraic residual at (t[i], z[i], u[i]).  A failed solve carries the
    mesh points computed so far, the index of the point that could not be
    computed and the reason.
    """

    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    u: np.ndarray
    residuals: np.ndarray
    status: str = "completed"
    failed_step: Optional[int] = None
    failure: Optional[str] = None
    diagnostics: Optional[dict] = None

    @property
    def completed(self):
        return self.status == "completed"

    @property
    def states(self):
        return [self.state_at(i) for i in range(self.t.size)]

    def state_at(self, i):
        return StepState(t=float(self.t[i]), z=self.z[i], u=self.u[i], x=self.x[i])

    def component(self, j):
        """Solution component x_j over the mesh (0-based)."""
        return self.x[:, j]

    def value_at(self, t):
        """State vector at the mesh point nearest t."""
        return self.x[int(np.argmin(np.abs(self.t - t)))]


# ---------------------------------------------------------------------------
# step cores
# ---------------------------------------------------------------------------


_DET_GUARD = 1e3 * np.finfo(float).eps


def _solve_small(M, rhs, t):
    """Solve M du = rhs for the update matrix of one algebraic stage.

    3x3 systems (the built-in circuits) go through an explicit Cramer
    solve: it avoids the per-call LAPACK overhead that dominates dense
    meshes, and its determinant doubles as the singularity guard
    (|det| <= sigma1^2 sigma3 gives rcond >= |det| / sigma1^3).
    """
    if M.shape[0] == 3:
        m0, m1, m2, m3, m4, m5, m6, m7, m8 = M.ravel().tolist()
        c0 = m4 * m8 - m5 * m7
        c1 = m5 * m6 - m3 * m8
        c2 = m3 * m7 - m4 * m6
        det = m0 * c0 + m1 * c1 + m2 * c2
        top = max(abs(m0), abs(m1), abs(m2), abs(m3), abs(m4),
                  abs(m5), abs(m6), abs(m7), abs(m8))
        if abs(det) <= _DET_GUARD * (3.0 * top) ** 3:
            raise SingularNewtonMatrix(
                f"algebraic update matrix singular at t={t!r}"
            )
        r0, r1, r2 = rhs.tolist()
        return np.array([
            (r0 * c0 + r1 * (m2 * m7 - m1 * m8) + r2 * (m1 * m5 - m2 * m4)) / det,
            (r0 * c1 + r1 * (m0 * m8 - m2 * m6) + r2 * (m2 * m3 - m0 * m5)) / det,
            (r0 * c2 + r1 * (m1 * m6 - m0 * m7) + r2 * (m0 * m4 - m1 * m3)) / det,
        ])
    try:
        du = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        raise SingularNewtonMatrix(
            f"algebraic update matrix singular at t={t!r}"
        ) from None
    if not np.isfinite(du).all():
        raise SingularNewtonMatrix(
            f"algebraic update blew up at t={t!r} (near-singular matrix)"
        )
    return du


def _alg_update(f, jac, ops, z_new, u_prev, iterations, eye):
    """Newton-type update(s) of the algebraic component at ops.t:

        u <- u - M^{-1} [u - w(t, z_new, u)],
        M  = I - G^{-1} Q2 (df/dx)(t, P1 z_new + P2 u) P2.

    The methods apply the update once; more iterations refine toward the
    fixed point.  Singular update matrices raise SingularNewtonMatrix.
    """
    p1z = ops.P1 @ z_new
    u = u_prev
    for _ in range(iterations):
        x_arg = p1z + ops.P2 @ u
        J = jac(ops.t, x_arg)
        M = eye - ops.L2 @ (J @ ops.P2)
        w = ops.L2 @ (f(ops.t, x_arg) - ops.AP @ z_new)
        u = u - _solve_small(M, u - w, ops.t)
    return ops.P2 @ u


def _step_m1(f, jac, ops_i, ops_n, h, z, u, x, fx, alg_iterations, eye):
    """One simple combined step from (ops_i.t, z, u, x) to ops_n.t."""
    if fx is None:
        fx = f(ops_i.t, x)
    z_new = z + h * (ops_i.E @ z + ops_i.L1 @ fx)
    z_new = ops_n.P1 @ z_new  # keep z in X1(t_{i+1}); every use below is via P1 z
    u_new = _alg_update(f, jac, ops_n, z_new, u, alg_iterations, eye)
    x_new = ops_n.P1 @ z_new + ops_n.P2 @ u_new
    return z_new, u_new, x_new


def _step_m2(f, jac, ops_i, ops_n, h, z, u, x, fx, alg_iterations, eye):
    """One recalculated (predictor-corrector) step."""
    if fx is None:
        fx = f(ops_i.t, x)
    slope_i = ops_i.E @ z + ops_i.L1 @ fx
    z_pred = ops_n.P1 @ (z + h * slope_i)
    u_pred = _alg_update(f, jac, ops_n, z_pred, u, alg_iterations, eye)
    x_pred = ops_n.P1 @ z_pred + ops_n.P2 @ u_pred
    slope_n = ops_n.E @ z_pred + ops_n.L1 @ f(ops_n.t, x_pred)
    z_new = ops_n.P1 @ (z + 0.5 * h * (slope_i + slope_n))
    u_new = _alg_update(f, jac, ops_n, z_new, u, alg_iterations, eye)
    x_new = ops_n.P1 @ z_new + ops_n.P2 @ u_new
    return z_new, u_new, x_new


def _ops_from_ps(dae, ps):
    if ps.P1_prime is None:
        raise ValueError("stepping needs ProjectorSets with P1_prime filled")
    Ap = dae.pencil.A_deriv(ps.t)
    B = dae.pencil.B_at(ps.t)
    L1 = ps.G_inv @ ps.Q1
    L2 = ps.G_inv @ ps.Q2
    E = (ps.P1_prime - L1 @ (Ap + B)) @ ps.P1
    return _PointOps(t=ps.t, P1=ps.P1, P2=ps.P2, E=E, L1=L1, L2=L2, AP=Ap @ ps.P1)


def method1_step(dae, ps_i, ps_next, state, h, alg_iterations=1):
    """Simple combined step: explicit-Euler z-update, one Newton-type
    u-update at the new point, recombination x = P1 z + P2 u."""
    z, u, x = _step_m1(
        dae.f_at, dae.jacobian, _ops_from_ps(dae, ps_i), _ops_from_ps(dae, ps_next),
        h, state.z, state.u, state.x, None, alg_iterations, np.eye(dae.dim),
    )
    return StepState(t=ps_next.t, z=z, u=u, x=x)


def method2_step(dae, ps_i, ps_next, state, h, alg_iterations=1):
    """Combined step with recalculation: Euler predictor for z, predictor
    u-update, trapezoidal corrector for z averaging the endpoint slopes,
    and the u-update redone with the refined z."""
    z, u, x = _step_m2(
        dae.f_at, dae.jacobian, _ops_from_ps(dae, ps_i), _ops_from_ps(dae, ps_next),
        h, state.z, state.u, state.x, None, alg_iterations, np.eye(dae.dim),
    )
    return StepState(t=ps_next.t, z=z, u=u, x=x)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _table_ops(dae, table):
    """Per-point solver matrices derived from a projector table."""
    L1 = table.G_inv @ table.Q1
    L2 = table.G_inv @ table.Q2
    E = (table.P1_prime - L1 @ (table.A_prime + table.B)) @ table.P1
    AP = table.A_prime @ table.P1
    return [
        _PointOps(t=float(table.ts[i]), P1=table.P1[i], P2=table.P2[i],
                  E=E[i], L1=L1[i], L2=L2[i], AP=AP[i])
        for i in range(table.ts.size)
    ]


def solve(dae, x0_guess, config):
    """Integrate the DAE from a (consistently initialized) starting guess.

    Outside-derivative problems are first rewritten in inside-derivative
    form.  The pencil index is checked at t0 (and at the diagnostic
    checkpoints); index > 1 refuses to integrate.  x0_guess is projected
    onto the consistency manifold before stepping.

    Numerical failures during stepping abort the run and are recorded on
    the returned partial Trajectory (status, failed mesh index, reason);
    failures during setup raise.
    """
    if dae.form is Form.OUTSIDE_DERIVATIVE:
        dae = reduce_to_inside_form(dae)
    ts, h, N = config.mesh()
    t0 = float(ts[0])

    nu = estimate_index(dae.pencil, t0)
    if nu > 1:
        raise IndexTooHigh(f"pencil index {nu} at t0={t0!r}; only index <= 1 is solvable")

    ps0 = compute_projectors(dae.pencil, t0, config.quad, t_min=dae.t_plus)
    x0 = consistent_initialize(
        dae, t0, np.asarray(x0_guess, dtype=float),
        tol=config.consistency_tol, max_iter=config.init_max_iter, ps=ps0,
    )

    table = projector_table(dae.pencil, ts, config.quad, t_min=dae.t_plus)
    ops = _table_ops(dae, table)

    n = dae.dim
    f = dae.f
    jac = dae.f_jac if dae.f_jac is not None else dae.jacobian
    if np.shape(f(t0, x0)) != (n,):
        raise ValueError(f"f must return a vector of shape ({n},)")
    eye = np.eye(n)

    zs = np.empty((N + 1, n))
    us = np.empty((N + 1, n))
    xs = np.empty((N + 1, n))
    res = np.empty(N + 1)

    zs[0] = ops[0].P1 @ x0
    us[0] = ops[0].P2 @ x0
    xs[0] = ops[0].P1 @ zs[0] + ops[0].P2 @ us[0]
    fx = f(t0, xs[0])
    r0 = us[0] - ops[0].L2 @ (fx - ops[0].AP @ zs[0])
    res[0] = math.sqrt(float(np.dot(r0, r0)))

    diags = None
    if config.diag_every > 0:
        diags = {"t": [], "phi_cond": [], "projector_defect": [], "index": []}

    step = _step_m1 if config.method == METHOD_SIMPLE else _step_m2
    alg_iters = config.alg_iterations
    status, failed_step, failure = "completed", None, None

    for i in range(N):
        if diags is not None and i % config.diag_every == 0:
            try:
                nu_i = estimate_index(dae.pencil, float(ts[i]))
            except Exception as exc:  # non-regular point: abort like any failure
                status, failed_step, failure = "failed", i, f"{type(exc).__name__}: {exc}"
                break
            if nu_i > 1:
                status, failed_step = "failed", i
                failure = f"IndexTooHigh: pencil index {nu_i} at t={ts[i]!r}"
                break
            diags["t"].append(float(ts[i]))
            diags["index"].append(nu_i)
            diags["projector_defect"].append(float(table.defect[i]))
            diags["phi_cond"].append(
                phi_operator(dae, table.projector_set(i), float(ts[i]), zs[i], us[i]).cond
            )
        try:
            zs[i + 1], us[i + 1], xs[i + 1] = step(
                f, jac, ops[i], ops[i + 1], h, zs[i], us[i], xs[i], fx,
                alg_iters, eye,
            )
        except SingularNewtonMatrix as exc:
            status, failed_step, failure = "failed", i + 1, f"SingularNewtonMatrix: {exc}"
            break
        fx = f(float(ts[i + 1]), xs[i + 1])
        ri = us[i + 1] - ops[i + 1].L2 @ (fx - ops[i + 1].AP @ zs[i + 1])
        res[i + 1] = math.sqrt(float(np.dot(ri, ri)))

    last = (N if status == "completed" else failed_step - 1) + 1
    return Trajectory(
        t=ts[:last], x=xs[:last], z=zs[:last], u=us[:last], residuals=res[:last],
        status=status, failed_step=failed_step, failure=failure, diagnostics=diags,
    )
