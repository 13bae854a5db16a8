"""Semilinear DAE problems and their semi-explicit decomposition.

A problem d/dt[A(t)x] + B(t)x = f(t,x) (or A(t)x' + B(t)x = f(t,x)) with a
regular index <= 1 pencil splits, through the spectral projectors, into an
explicit ODE for the differential component z = P1(t)x and an algebraic
equation for u = P2(t)x:

    z' = pi_rhs(t, z, u),            u = w_map(t, z, u).

This module holds the problem type, those maps, the Newton-type update
matrix of the algebraic stage with its solvability diagnostics, and
consistency handling on the constraint manifold.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import NoConvergence, SingularNewtonMatrix
from .pencil import (
    SINGULAR_RCOND,
    QuadratureConfig,
    TimeVaryingPencil,
    compute_projectors,
)

_EPS = np.finfo(float).eps
_RANK_TOL = 1e-10  # rank-revealing threshold for the projector range bases


class Form(enum.Enum):
    """Whether A(t) sits inside the time derivative (d/dt[A x]) or outside
    (A x')."""

    INSIDE_DERIVATIVE = "inside"
    OUTSIDE_DERIVATIVE = "outside"


@dataclass
class SemilinearDAE:
    """d/dt[A(t)x] + B(t)x = f(t,x) on [t_plus, inf), or the A(t)x' variant.

    f_jac is the state Jacobian df/dx; when absent, forward differences
    with step sqrt(eps)*(1+|x_j|) are used column by column (f may be a
    black box).
    """

    pencil: TimeVaryingPencil
    f: Callable[[float, np.ndarray], np.ndarray]
    f_jac: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    form: Form = Form.INSIDE_DERIVATIVE
    t_plus: float = 0.0

    @property
    def dim(self):
        return self.pencil.dim

    def f_at(self, t, x):
        return np.asarray(self.f(t, x), dtype=float).reshape(self.dim)

    def jacobian(self, t, x):
        """df/dx at (t, x); analytic when supplied, forward differences otherwise."""
        if self.f_jac is not None:
            return np.asarray(self.f_jac(t, x), dtype=float).reshape(self.dim, self.dim)
        n = self.dim
        x = np.asarray(x, dtype=float)
        f0 = self.f_at(t, x)
        J = np.empty((n, n))
        for j in range(n):
            step = np.sqrt(_EPS) * (1.0 + abs(x[j]))
            xp = x.copy()
            xp[j] += step
            J[:, j] = (self.f_at(t, xp) - f0) / step
        return J


@dataclass(frozen=True)
class StepState:
    """Solution components at one mesh point: x = P1(t)z + P2(t)u with
    z in X1(t) and u in X2(t)."""

    t: float
    z: np.ndarray
    u: np.ndarray
    x: np.ndarray


# ---------------------------------------------------------------------------
# the semi-explicit maps
# ---------------------------------------------------------------------------


def pi_rhs(dae, ps, t, z, u):
    """Right-hand side of the differential part:

    [P1' - G^{-1} Q1 (A' + B)] P1 z + G^{-1} Q1 f(t, P1 z + P2 u).

    ps must carry P1_prime.
    """
    if ps.P1_prime is None:
        raise ValueError("pi_rhs needs a ProjectorSet with P1_prime filled")
    Ap = dae.pencil.A_deriv(t)
    B = dae.pencil.B_at(t)
    x = ps.P1 @ z + ps.P2 @ u
    L1 = ps.G_inv @ ps.Q1
    return (ps.P1_prime - L1 @ (Ap + B)) @ (ps.P1 @ z) + L1 @ dae.f_at(t, x)


def w_map(dae, ps, t, z, u):
    """G^{-1} Q2 [f(t, P1 z + P2 u) - A' P1 z]; the algebraic equation is
    the fixed point u = w_map(t, z, u)."""
    Ap = dae.pencil.A_deriv(t)
    p1z = ps.P1 @ z
    x = p1z + ps.P2 @ u
    return ps.G_inv @ (ps.Q2 @ (dae.f_at(t, x) - Ap @ p1z))


def algebraic_residual(dae, ps, t, z, u):
    """w_map(t, z, u) - u; zero (within tolerance) certifies that
    (t, P1 z + P2 u) lies on the consistency manifold."""
    return w_map(dae, ps, t, z, u) - u


# ---------------------------------------------------------------------------
# Newton-type update matrix and the solvability diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NewtonUpdate:
    """Factorized update matrix M = I - G^{-1} Q2 (df/dx) P2."""

    matrix: np.ndarray
    inverse: np.ndarray
    rcond: float

    def solve(self, rhs):
        return self.inverse @ rhs


def _inverse_with_rcond(M):
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        return None, 0.0
    rc = 1.0 / (np.linalg.norm(M, 1) * np.linalg.norm(Minv, 1))
    return Minv, float(rc)


def newton_update_matrix(dae, ps, t, z, u):
    """Assemble and factorize M = I - G^{-1} Q2 (df/dx)(t, P1 z + P2 u) P2.

    Raises SingularNewtonMatrix when the reciprocal condition falls below
    the singularity threshold; at such a point the invertibility
    hypothesis on the restricted operator of phi_operator fails.
    """
    n = dae.dim
    x = ps.P1 @ z + ps.P2 @ u
    J = dae.jacobian(t, x)
    M = np.eye(n) - ps.G_inv @ ps.Q2 @ J @ ps.P2
    Minv, rc = _inverse_with_rcond(M)
    if Minv is None or rc < SINGULAR_RCOND:
        raise SingularNewtonMatrix(
            f"algebraic update matrix singular at t={t!r} (rcond {rc:.2e})"
        )
    return NewtonUpdate(matrix=M, inverse=Minv, rcond=rc)


def _range_basis(P):
    """Orthonormal basis of range(P) by rank-revealing SVD."""
    U, s, _ = np.linalg.svd(P)
    return U[:, s > _RANK_TOL]


@dataclass(frozen=True)
class PhiDiagnostics:
    """The operator [d/dx(Q2 f) - B] P2 at a point, with its restriction
    X2 -> Y2 expressed in orthonormal bases of range(P2) and range(Q2).

    cond is the 2-norm condition of the restricted block (inf when the
    restricted operator is singular, 0.0 for an index-0 point where the
    algebraic subspace is trivial).
    """

    matrix: np.ndarray
    restricted: np.ndarray
    cond: float
    domain_basis: np.ndarray
    range_basis: np.ndarray

    def restricted_inverse(self):
        """Full-space realization of the inverse Y2 -> X2 of the restricted
        operator (zero on the orthogonal complement of Y2)."""
        d = self.restricted.shape[0]
        if d == 0:
            return np.zeros((self.matrix.shape[0],) * 2)
        return self.domain_basis @ np.linalg.solve(
            self.restricted, self.range_basis.T
        )


def phi_operator(dae, ps, t, z, u):
    """Diagnostic for the solvability operator of the algebraic part.

    Returns the full-space matrix [Q2 (df/dx)(t, P1 z + P2 u) - B] P2
    whose restriction X2 -> Y2 governs unique solvability of the
    constraint for u, together with the condition estimate of that
    restriction.  Report-only: a singular restriction yields cond = inf.
    """
    x = ps.P1 @ z + ps.P2 @ u
    J = dae.jacobian(t, x)
    B = dae.pencil.B_at(t)
    full = (ps.Q2 @ J - B) @ ps.P2
    V2 = _range_basis(ps.P2)
    W2 = _range_basis(ps.Q2)
    S = W2.T @ full @ V2
    if S.size == 0:
        cond = 0.0
    else:
        s = np.linalg.svd(S, compute_uv=False)
        cond = float(s[0] / s[-1]) if s[-1] > s[0] * SINGULAR_RCOND else np.inf
    return PhiDiagnostics(
        matrix=full, restricted=S, cond=cond, domain_basis=V2, range_basis=W2
    )


# ---------------------------------------------------------------------------
# consistency
# ---------------------------------------------------------------------------


def consistency_residual(dae, ps, t, x):
    """Membership residual of (t, x) in the consistency manifold.

    Q2 [A' P1 x + B x - f(t,x)] for the inside-derivative form,
    Q2 [B x - f(t,x)] for the outside-derivative form.
    """
    x = np.asarray(x, dtype=float)
    B = dae.pencil.B_at(t)
    v = B @ x - dae.f_at(t, x)
    if dae.form is Form.INSIDE_DERIVATIVE:
        v = v + dae.pencil.A_deriv(t) @ (ps.P1 @ x)
    return ps.Q2 @ v


def consistent_initialize(dae, t0, x_guess, tol=1e-12, max_iter=50,
                          quad=None, ps=None):
    """Project an initial guess onto the consistency manifold.

    Keeps the differential component z0 = P1(t0) x_guess fixed and Newton
    iterates the algebraic component, u <- u - M^{-1} (u - w_map(t0,z0,u)),
    from u = P2(t0) x_guess until ||algebraic_residual|| < tol.  Returns
    x0 = P1 z0 + P2 u.

    Raises NoConvergence after max_iter iterations (the guess is outside
    the Newton basin, or no locally unique consistent u exists) and
    propagates SingularNewtonMatrix.
    """
    if ps is None:
        ps = compute_projectors(dae.pencil, t0, quad or QuadratureConfig())
    x_guess = np.asarray(x_guess, dtype=float)
    z0 = ps.P1 @ x_guess
    u = ps.P2 @ x_guess
    for _ in range(max_iter + 1):
        res = algebraic_residual(dae, ps, t0, z0, u)
        if np.linalg.norm(res) < tol:
            return ps.P1 @ z0 + ps.P2 @ u
        upd = newton_update_matrix(dae, ps, t0, z0, u)
        u = u - upd.solve(-res)  # res = w - u, so this is u - M^{-1}(u - w)
        u = ps.P2 @ u
    raise NoConvergence(
        f"consistent initialization did not reach {tol:g} in {max_iter} iterations"
    )


def reduce_to_inside_form(dae):
    """Rewrite A(t)x' + B(t)x = f as d/dt[A(t)x] + (B(t) - A'(t))x = f.

    The consistency manifolds of the two formulations coincide, so
    consistent points carry over.  The reduced pencil has a different
    spectrum, so the contour-radius hint is dropped (auto-selection takes
    over).
    """
    if dae.form is not Form.OUTSIDE_DERIVATIVE:
        raise ValueError("reduce_to_inside_form expects an outside-derivative problem")
    p = dae.pencil
    # B~' would need A''; leave it to the finite-difference fallback
    reduced = TimeVaryingPencil(
        dim=p.dim, A=p.A, B=_shifted_b(p), A_prime=p.A_prime, B_prime=None,
        C2_hint=None, A_batch=p.A_batch, B_batch=None,
    )
    return replace(dae, pencil=reduced, form=Form.INSIDE_DERIVATIVE)


def _shifted_b(pencil):
    def B_tilde(t):
        return pencil.B_at(t) - pencil.A_deriv(t)

    return B_tilde
