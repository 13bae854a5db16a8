"""Time-varying matrix pencils: index detection and spectral projectors.

The pencil lam*A(t) + B(t) of a semilinear DAE is assumed regular with
index 0 or 1 at every time of interest.  Its spectral projector pair

    P1(t) = 1/(2*pi*i) * contour integral of (lam*A+B)^{-1} A  dlam,
    Q1(t) = 1/(2*pi*i) * contour integral of A (lam*A+B)^{-1}  dlam,

taken over a circle |lam| = r(t) enclosing the finite spectrum, splits the
state and equation spaces into the differential and algebraic invariant
subspaces.  The integrals are evaluated by the trapezoidal rule on the
circle; for the rational integrands at hand the rule converges
geometrically in the node count, so doubling nodes until two successive
rules agree yields projectors that are exact to roundoff.  The complement
pair is P2 = I - P1, Q2 = I - Q1, and the auxiliary operator
G = A + B*P2 is invertible precisely in the index <= 1 case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DefectTooLarge,
    IndeterminateIndex,
    NotRegular,
    QuadratureDiverged,
    RadiusSelectionFailed,
    SingularPencilPoint,
)

_EPS = np.finfo(float).eps
# a factorization counts as singular below this reciprocal condition
SINGULAR_RCOND = 1e3 * _EPS
# central-difference step scale, optimal for C^3 data
_FD_SCALE = _EPS ** (1.0 / 3.0)


def _fd_step(t):
    return _FD_SCALE * max(1.0, abs(t))


def _rcond(M):
    """2-norm reciprocal condition estimate (exact via SVD; matrices are small)."""
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


@dataclass(frozen=True)
class QuadratureConfig:
    """Settings for the contour quadrature and the projector validity checks.

    tol            stabilization tolerance between successive node counts and
                   between successive auto-selected radii
    initial_nodes  first trapezoid rule tried (doubled as needed)
    max_nodes      node budget before QuadratureDiverged
    identity_tol   largest norm violation accepted for the projector identity
                   suite (and for the imaginary residue of the quadrature)
    """

    tol: float = 1e-13
    initial_nodes: int = 32
    max_nodes: int = 4096
    identity_tol: float = 1e-9
    max_radius_doublings: int = 48


@dataclass
class TimeVaryingPencil:
    """Evaluators for the operator pencil lam*A(t) + B(t).

    A and B map a time to an (n, n) real matrix.  A_prime/B_prime are
    optional analytic derivatives; when absent, central differences with
    step cbrt(eps)*max(1, |t|) are used.  C2_hint optionally supplies a
    contour radius enclosing the finite spectrum at t; without it the
    radius is auto-selected.  A_batch/B_batch are optional vectorized
    evaluators (ts,) -> (len(ts), n, n) used by the mesh table builder.
    """

    dim: int
    A: Callable[[float], np.ndarray]
    B: Callable[[float], np.ndarray]
    A_prime: Optional[Callable[[float], np.ndarray]] = None
    B_prime: Optional[Callable[[float], np.ndarray]] = None
    C2_hint: Optional[Callable[[float], float]] = None
    A_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    B_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("pencil dimension must be a positive integer")

    def A_at(self, t):
        return np.asarray(self.A(t), dtype=float).reshape(self.dim, self.dim)

    def B_at(self, t):
        return np.asarray(self.B(t), dtype=float).reshape(self.dim, self.dim)

    def A_deriv(self, t):
        """A'(t), analytic when supplied, otherwise a central difference."""
        if self.A_prime is not None:
            return np.asarray(self.A_prime(t), dtype=float).reshape(self.dim, self.dim)
        d = _fd_step(t)
        return (self.A_at(t + d) - self.A_at(t - d)) / (2.0 * d)

    def B_deriv(self, t):
        if self.B_prime is not None:
            return np.asarray(self.B_prime(t), dtype=float).reshape(self.dim, self.dim)
        d = _fd_step(t)
        return (self.B_at(t + d) - self.B_at(t - d)) / (2.0 * d)

    def A_on(self, ts):
        """(len(ts), n, n) stack of A over a time grid."""
        return self._stack(self.A, self.A_batch, ts)

    def B_on(self, ts):
        return self._stack(self.B, self.B_batch, ts)

    def _stack(self, fn, batch, ts):
        ts = np.asarray(ts, dtype=float)
        n = self.dim
        if batch is not None:
            out = np.asarray(batch(ts), dtype=float)
            if out.shape != (ts.size, n, n):
                raise ValueError("batch evaluator returned wrong shape")
            return out
        out = np.empty((ts.size, n, n))
        for i, t in enumerate(ts):
            out[i] = np.asarray(fn(t), dtype=float).reshape(n, n)
        return out


@dataclass(frozen=True)
class ProjectorSet:
    """Spectral projectors and auxiliary operator of the pencil at a time.

    defect is the largest norm violation over the identity suite
    (idempotence, complementarity, the A/B intertwining relations, the
    G-inverse relations and the imaginary quadrature residue); see
    identity_violations().
    """

    t: float
    P1: np.ndarray
    P2: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    G: np.ndarray
    G_inv: np.ndarray
    P1_prime: Optional[np.ndarray] = None
    defect: float = np.nan


@dataclass(frozen=True)
class ValidationReport:
    """Per-identity norm violations of a ProjectorSet, plus the dimension d
    of the algebraic subspace (rank of P2)."""

    t: float
    violations: dict
    defect: float
    d: int

    def ok(self, tol):
        return self.defect < tol


# ---------------------------------------------------------------------------
# resolvent and index detection
# ---------------------------------------------------------------------------


def resolvent(pencil, lam, t):
    """(lam*A(t)+B(t))^{-1} via a pivoted factorization.

    Raises SingularPencilPoint when the factorization is numerically
    singular, i.e. lam is (numerically) a pencil eigenvalue.
    """
    n = pencil.dim
    M = lam * pencil.A_at(t).astype(complex) + pencil.B_at(t)
    if _rcond(M) < SINGULAR_RCOND:
        raise SingularPencilPoint(
            f"pencil singular at lambda={lam!r}, t={t!r}"
        )
    return np.linalg.solve(M, np.eye(n, dtype=complex))


def estimate_index(pencil, t, mu_values=None, slope_tol=0.2):
    """Estimate the pencil index nu at time t from resolvent growth.

    Samples ||(A + mu B)^{-1}|| along a geometric sequence mu -> 0 and fits
    the exponent of the growth ||.|| ~ C/mu^nu (slope of log norm against
    log(1/mu)).  Returns 0 immediately when A(t) is numerically invertible.

    Raises NotRegular when A + mu B is singular for all sampled mu, and
    IndeterminateIndex when the fitted slope is farther than slope_tol
    from every integer.
    """
    A = pencil.A_at(t)
    B = pencil.B_at(t)
    if _rcond(A) >= SINGULAR_RCOND:
        return 0
    if mu_values is None:
        mu_values = np.geomspace(1e-3, 1e-7, 9)
    logs_mu, logs_norm = [], []
    for mu in mu_values:
        s = np.linalg.svd(A + mu * B, compute_uv=False)
        if s[0] == 0.0 or s[-1] / s[0] < SINGULAR_RCOND:
            continue  # mu happens to sit on an eigenvalue
        logs_mu.append(np.log(1.0 / mu))
        logs_norm.append(np.log(1.0 / s[-1]))  # ||M^{-1}||_2 = 1/sigma_min
    if not logs_norm:
        raise NotRegular(f"A + mu*B singular for all sampled mu at t={t!r}")
    if len(logs_norm) < 2:
        raise IndeterminateIndex(
            f"only one regular sample point at t={t!r}; cannot fit the index"
        )
    slope = float(np.polyfit(logs_mu, logs_norm, 1)[0])
    nu = int(round(slope))
    if nu < 0 or abs(slope - nu) >= slope_tol:
        raise IndeterminateIndex(
            f"resolvent growth exponent {slope:.3f} is not close to an integer"
        )
    return nu


# ---------------------------------------------------------------------------
# contour quadrature
# ---------------------------------------------------------------------------


def _pq_sums(A, B, r, m):
    """Trapezoid sums of the P- and Q-integrands at m and m//2 nodes.

    Uses the conjugate symmetry of the resolvent of a real pencil: only the
    m//2 + 1 nodes of the closed upper semicircle are factorized, inner
    nodes contribute twice their real part.  Returns
    (P_m, P_half, Q_m, Q_half, imag_residue); the m//2-node sums reuse the
    even-index nodes, so the convergence check costs nothing extra.
    """
    half = m // 2
    theta = 2.0 * np.pi * np.arange(half + 1) / m
    lam = r * np.exp(1j * theta)
    R = np.linalg.inv(lam[:, None, None] * A + B)
    TP = lam[:, None, None] * (R @ A)
    TQ = lam[:, None, None] * (A @ R)

    def rule(T, stride, nodes):
        ends = T[0] + T[-1]
        inner = T[stride:half:stride]
        S = (ends + 2.0 * inner.real.sum(axis=0)) / nodes
        return S.real, float(np.abs(S.imag).max())

    P_m, im_p = rule(TP, 1, m)
    P_h, _ = rule(TP, 2, half)
    Q_m, im_q = rule(TQ, 1, m)
    Q_h, _ = rule(TQ, 2, half)
    return P_m, P_h, Q_m, Q_h, max(im_p, im_q)


def _quadrature_at_radius(A, B, r, quad):
    """Node-converged quadrature at one radius -> (P1, Q1, imag, nodes, r).

    Doubles the node count until two successive trapezoid rules agree to
    quad.tol.  A node landing exactly on a pencil eigenvalue makes the
    batched factorization fail; the radius is then nudged and retried.
    """
    bumps = 0
    m = quad.initial_nodes
    while m <= quad.max_nodes:
        try:
            P_m, P_h, Q_m, Q_h, imag = _pq_sums(A, B, r, m)
        except np.linalg.LinAlgError:
            bumps += 1
            if bumps > 4:
                raise NotRegular(
                    "pencil singular on every attempted contour"
                ) from None
            r *= 1.0307
            continue
        diff = max(np.abs(P_m - P_h).max(), np.abs(Q_m - Q_h).max())
        if diff < quad.tol and np.all(np.isfinite(P_m)) and np.all(np.isfinite(Q_m)):
            return P_m, Q_m, imag, m, r
        m *= 2
    raise QuadratureDiverged(
        f"no node convergence within {quad.max_nodes} nodes at radius {r:g}"
    )


def _auto_radius_integrals(A, B, quad):
    """Quadrature with auto-selected radius.

    Starts at r = 1 + ||A|| + ||B|| and doubles r until the results at two
    consecutive radii agree, which certifies that all finite eigenvalues
    are enclosed.
    """
    r = 1.0 + float(np.linalg.norm(A, 2)) + float(np.linalg.norm(B, 2))
    P_prev, Q_prev, imag, m, r = _quadrature_at_radius(A, B, r, quad)
    for _ in range(quad.max_radius_doublings):
        P_next, Q_next, imag, m, r2 = _quadrature_at_radius(A, B, 2.0 * r, quad)
        diff = max(np.abs(P_next - P_prev).max(), np.abs(Q_next - Q_prev).max())
        if diff < quad.tol:
            return P_next, Q_next, imag, m, r2
        r, P_prev, Q_prev = r2, P_next, Q_next
    raise RadiusSelectionFailed(
        "projector quadrature kept changing while growing the contour radius"
    )


def _raw_projectors(pencil, t, quad):
    """P1, Q1, the imaginary quadrature residue and the contour radius at t."""
    A = pencil.A_at(t)
    B = pencil.B_at(t)
    if pencil.C2_hint is not None:
        r = float(pencil.C2_hint(t))
        if not r > 0.0:
            raise RadiusSelectionFailed(f"C2 hint gave a nonpositive radius at t={t!r}")
        P1, Q1, imag, _, r = _quadrature_at_radius(A, B, r, quad)
    else:
        P1, Q1, imag, _, r = _auto_radius_integrals(A, B, quad)
    return A, B, P1, Q1, imag, r


def identity_violations(A, B, P1, P2, Q1, Q2, G, G_inv, imag=0.0):
    """Max-entry violations of the projector/auxiliary-operator identities."""
    n = A.shape[0]
    eye = np.eye(n)

    def mx(M):
        return float(np.abs(M).max()) if M.size else 0.0

    return {
        "P1+P2=I": mx(P1 + P2 - eye),
        "Q1+Q2=I": mx(Q1 + Q2 - eye),
        "P1 idempotent": mx(P1 @ P1 - P1),
        "P2 idempotent": mx(P2 @ P2 - P2),
        "Q1 idempotent": mx(Q1 @ Q1 - Q1),
        "Q2 idempotent": mx(Q2 @ Q2 - Q2),
        "A P1 = A": mx(A @ P1 - A),
        "Q1 A = A": mx(Q1 @ A - A),
        "A P2 = 0": mx(A @ P2),
        "Q2 A = 0": mx(Q2 @ A),
        "B P1 = Q1 B": mx(B @ P1 - Q1 @ B),
        "B P2 = Q2 B": mx(B @ P2 - Q2 @ B),
        "G = A + B P2": mx(G - (A + B @ P2)),
        "G G_inv = I": mx(G @ G_inv - eye),
        "G_inv G = I": mx(G_inv @ G - eye),
        "G_inv A = P1": mx(G_inv @ A - P1),
        "G_inv B P2 = P2": mx(G_inv @ B @ P2 - P2),
        "imag residue": float(imag),
    }


def compute_projectors(pencil, t, quad=None, with_derivative=False, t_min=None):
    """Spectral projectors, G and G^{-1} of the pencil at time t.

    The contour radius comes from pencil.C2_hint when available and is
    auto-selected otherwise; nodes are doubled until two successive
    trapezoid rules agree to quad.tol.  The result carries the largest
    violation of the identity suite as its defect.

    Raises DefectTooLarge when the identity suite (including realness of
    the quadrature and invertibility of G) is violated beyond
    quad.identity_tol, which signals index > 1 or a non-regular pencil;
    RadiusSelectionFailed / QuadratureDiverged on quadrature breakdowns;
    NotRegular when the pencil is singular on every contour.

    with_derivative additionally fills P1_prime by finite differences
    (see projector_derivative); t_min marks the domain boundary below
    which the pencil must not be evaluated.
    """
    quad = quad or QuadratureConfig()
    A, B, P1, Q1, imag, _ = _raw_projectors(pencil, t, quad)
    n = pencil.dim
    P2 = np.eye(n) - P1
    Q2 = np.eye(n) - Q1
    G = A + B @ P2
    if _rcond(G) < SINGULAR_RCOND:
        raise DefectTooLarge(
            f"auxiliary operator G singular at t={t!r}; pencil index > 1 or not regular",
            projectors=(P1, Q1),
        )
    G_inv = np.linalg.solve(G, np.eye(n))
    viol = identity_violations(A, B, P1, P2, Q1, Q2, G, G_inv, imag)
    defect = max(viol.values())
    if defect > quad.identity_tol:
        worst = max(viol, key=viol.get)
        raise DefectTooLarge(
            f"projector identity '{worst}' violated by {viol[worst]:.3e} at t={t!r}",
            projectors=(P1, Q1),
        )

    P1_prime = None
    if with_derivative:
        P1_prime = projector_derivative(pencil, t, quad, t_min=t_min)

    for M in (P1, P2, Q1, Q2, G, G_inv):
        M.setflags(write=False)
    if P1_prime is not None:
        P1_prime.setflags(write=False)
    return ProjectorSet(
        t=float(t), P1=P1, P2=P2, Q1=Q1, Q2=Q2, G=G, G_inv=G_inv,
        P1_prime=P1_prime, defect=defect,
    )


def projector_derivative(pencil, t, quad=None, t_min=None):
    """P1'(t) by the central difference (P1(t+d) - P1(t-d)) / (2d).

    d = cbrt(eps) * max(1, |t|).  When t - d falls below the domain
    boundary t_min, the one-sided second-order stencil
    (-3 P1(t) + 4 P1(t+d) - P1(t+2d)) / (2d) is used instead.
    Quadrature failures at the stencil points propagate.
    """
    quad = quad or QuadratureConfig()
    d = _fd_step(t)

    def p1(tt):
        _, _, P1, _, _, _ = _raw_projectors(pencil, tt, quad)
        return P1

    if t_min is not None and t - d < t_min:
        return (-3.0 * p1(t) + 4.0 * p1(t + d) - p1(t + 2.0 * d)) / (2.0 * d)
    return (p1(t + d) - p1(t - d)) / (2.0 * d)


def validate_projectors(ps, pencil):
    """Report-only check of every ProjectorSet identity at ps.t.

    Returns the norm violation of each identity plus d = rank(P2), the
    constant dimension of the algebraic subspace.
    """
    A = pencil.A_at(ps.t)
    B = pencil.B_at(ps.t)
    viol = identity_violations(A, B, ps.P1, ps.P2, ps.Q1, ps.Q2, ps.G, ps.G_inv)
    d = int(round(float(np.trace(ps.P2))))
    return ValidationReport(t=ps.t, violations=viol, defect=max(viol.values()), d=d)


# ---------------------------------------------------------------------------
# mesh-level projector tables
# ---------------------------------------------------------------------------


@dataclass
class ProjectorTable:
    """Projector data over a whole time grid, stored as (N, n, n) stacks.

    Built once per solve; point i is shared by the steps ending and
    starting at ts[i].  projector_set(i) materializes a ProjectorSet view
    of one grid point for the diagnostic APIs.
    """

    ts: np.ndarray
    A: np.ndarray
    B: np.ndarray
    A_prime: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    G: np.ndarray
    G_inv: np.ndarray
    P1_prime: np.ndarray
    defect: np.ndarray

    def projector_set(self, i):
        return ProjectorSet(
            t=float(self.ts[i]), P1=self.P1[i], P2=self.P2[i], Q1=self.Q1[i],
            Q2=self.Q2[i], G=self.G[i], G_inv=self.G_inv[i],
            P1_prime=self.P1_prime[i], defect=float(self.defect[i]),
        )


def _batched_quadrature(A, B, radii, quad, Ap=None, Bp=None, chunk=4096):
    """Vectorized node-doubling quadrature over a stack of pencils.

    A, B: (N, n, n); radii: (N,).  Returns (P1, Q1, P1_prime, imag): the
    projector stacks, optionally the projector derivative, and the largest
    imaginary residue seen.  Points converge independently; only the
    unconverged ones are recomputed at the doubled node count.

    When Ap, Bp are given, P1' is evaluated by differentiating under the
    contour integral,

        P1'(t) = 1/(2*pi*i) * contour integral of R (A' - (lam A' + B') R A),

    which reuses the resolvent factorizations of the P1 quadrature and is
    accurate to the same quadrature tolerance.
    """
    N, n, _ = A.shape
    P1 = np.empty_like(A)
    Q1 = np.empty_like(A)
    P1p = np.empty_like(A) if Ap is not None else None
    imag_max = 0.0
    radii = radii.copy()

    active = np.arange(N)
    m = quad.initial_nodes
    bumps = 0
    while active.size:
        if m > quad.max_nodes:
            raise QuadratureDiverged(
                f"no node convergence within {quad.max_nodes} nodes "
                f"(first failing grid index {active[0]})"
            )
        still = []
        for lo in range(0, active.size, chunk):
            pts = active[lo:lo + chunk]
            half = m // 2
            theta = 2.0 * np.pi * np.arange(half + 1) / m
            lam = radii[pts, None] * np.exp(1j * theta)[None, :]
            lam4 = lam[:, :, None, None]
            M = lam4 * A[pts, None] + B[pts, None]
            try:
                R = np.linalg.inv(M.reshape(-1, n, n)).reshape(len(pts), half + 1, n, n)
            except np.linalg.LinAlgError:
                bumps += 1
                if bumps > 6:
                    raise NotRegular("pencil singular on every attempted contour") from None
                radii[pts] *= 1.0307
                still.extend(pts)
                continue
            RA = R @ A[pts, None]

            def rule(T, stride, nodes):
                ends = T[:, 0] + T[:, -1]
                inner = T[:, stride:half:stride]
                return (ends + 2.0 * inner.real.sum(axis=1)) / nodes

            def pair(T):
                S = rule(T, 1, m)
                return S, np.abs(S.real - rule(T, 2, half).real).max(axis=(1, 2))

            SP, dp = pair(lam4 * RA)
            SQ, dq = pair(lam4 * (A[pts, None] @ R))
            diff = np.maximum(dp, dq)
            if Ap is not None:
                C = lam4 * Ap[pts, None] + Bp[pts, None]
                SD, dd = pair(lam4 * (R @ (Ap[pts, None] - C @ RA)))
                diff = np.maximum(diff, dd)
            ok = diff < quad.tol
            ok &= np.isfinite(SP.real).all(axis=(1, 2)) & np.isfinite(SQ.real).all(axis=(1, 2))
            done = pts[ok]
            P1[done] = SP.real[ok]
            Q1[done] = SQ.real[ok]
            if P1p is not None:
                P1p[done] = SD.real[ok]
            if ok.any():
                im = max(float(np.abs(SP.imag[ok]).max()), float(np.abs(SQ.imag[ok]).max()))
                imag_max = max(imag_max, im)
            still.extend(pts[~ok])
        active = np.asarray(still, dtype=int)
        m *= 2
    return P1, Q1, P1p, imag_max


def projector_table(pencil, ts, quad=None, t_min=None):
    """Projectors, G, G^{-1} and P1' over a whole mesh, computed in batch.

    Radii come from pencil.C2_hint; without a hint every point falls back
    to the per-point auto-radius path (fine for the small grids where
    that occurs).  P1' is obtained by differentiating under the contour
    integral, which reuses the resolvent factorizations of the projector
    quadrature; see _batched_quadrature.  t_min marks the domain boundary
    (it matters only for finite-difference fallbacks of A', B').

    Raises DefectTooLarge naming the worst grid point if the identity
    suite fails anywhere.
    """
    quad = quad or QuadratureConfig()
    ts = np.asarray(ts, dtype=float)
    N = ts.size
    n = pencil.dim

    A = pencil.A_on(ts)
    B = pencil.B_on(ts)
    Ap = np.empty_like(A)
    Bp = np.empty_like(B)
    for i, t in enumerate(ts):
        Ap[i] = pencil.A_deriv(t)
        Bp[i] = pencil.B_deriv(t)

    if pencil.C2_hint is not None:
        radii = _scalar_on(pencil.C2_hint, ts)
        if not np.all(radii > 0.0):
            raise RadiusSelectionFailed("C2 hint gave a nonpositive radius on the mesh")
        P1c, Q1c, P1p, imag = _batched_quadrature(A, B, radii, quad, Ap=Ap, Bp=Bp)
    else:
        P1c = np.empty((N, n, n))
        Q1c = np.empty((N, n, n))
        P1p = np.empty((N, n, n))
        imag = 0.0
        for i, t in enumerate(ts):
            _, _, P1i, Q1i, im, r = _raw_projectors(pencil, float(t), quad)
            imag = max(imag, im)
            one = slice(i, i + 1)
            _, _, dP, im2 = _batched_quadrature(
                A[one], B[one], np.array([r]), quad, Ap=Ap[one], Bp=Bp[one]
            )
            P1c[i], Q1c[i], P1p[i] = P1i, Q1i, dP[0]
            imag = max(imag, im2)

    eye = np.eye(n)
    P2 = eye - P1c
    Q2 = eye - Q1c
    G = A + B @ P2
    try:
        G_inv = np.linalg.inv(G)
    except np.linalg.LinAlgError:
        raise DefectTooLarge("auxiliary operator G singular on the mesh") from None

    def mx(M):
        return np.abs(M).reshape(N, -1).max(axis=1)

    defect = np.maximum.reduce([
        mx(P1c @ P1c - P1c),
        mx(Q1c @ Q1c - Q1c),
        mx(A @ P1c - A),
        mx(Q1c @ A - A),
        mx(A @ P2),
        mx(Q2 @ A),
        mx(B @ P1c - Q1c @ B),
        mx(B @ P2 - Q2 @ B),
        mx(G @ G_inv - eye),
        mx(G_inv @ A - P1c),
        mx(G_inv @ B @ P2 - P2),
        np.full(N, imag),
    ])
    worst = int(defect.argmax())
    if defect[worst] > quad.identity_tol:
        raise DefectTooLarge(
            f"projector identities violated by {defect[worst]:.3e} at t={ts[worst]!r}"
        )

    return ProjectorTable(
        ts=ts, A=A, B=B, A_prime=Ap, P1=P1c, P2=P2, Q1=Q1c, Q2=Q2,
        G=G, G_inv=G_inv, P1_prime=P1p, defect=defect,
    )


def _scalar_on(fn, ts):
    """Evaluate a scalar map over a grid, vectorized when the map allows it."""
    try:
        out = np.asarray(fn(ts), dtype=float)
        if out.shape == ts.shape:
            return out
        if out.ndim == 0:
            return np.full(ts.shape, float(out))
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(t)) for t in ts])
