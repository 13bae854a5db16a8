"""Built-in problem gallery: two nonlinear circuit models, their drive
signals and nonlinearity families, and named parameter presets.

Both circuits are three-state models with a single inductor current as the
differential variable; the remaining states are pinned by algebraic
constraints.  Preset names follow "circuit:variant" (see PRESETS); each
preset records the consistent initial point it is meant to start from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .dae import Form, SemilinearDAE
from .pencil import TimeVaryingPencil

# ---------------------------------------------------------------------------
# drive signals
# ---------------------------------------------------------------------------


def sawtooth(t):
    """Period-15 sawtooth: slope +1 on [15k, 15k+10], slope -2 down to zero
    on [15k+10, 15(k+1)].  Continuous, not differentiable at the corners."""
    if isinstance(t, float) or np.ndim(t) == 0:  # scalar path sits in the solver's hot loop
        tau = float(t) % 15.0
        return tau if tau <= 10.0 else 30.0 - 2.0 * tau
    tau = np.mod(t, 15.0)
    return np.where(tau <= 10.0, tau, 30.0 - 2.0 * tau)


def triangular(t):
    """Period-20 triangle 10 - |t - 10 - 20k|: zero at 20k, peak 10 at
    10 + 20k."""
    if isinstance(t, float) or np.ndim(t) == 0:
        return 10.0 - abs(float(t) % 20.0 - 10.0)
    tau = np.mod(t, 20.0)
    return 10.0 - np.abs(tau - 10.0)


# ---------------------------------------------------------------------------
# nonlinearity families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarNonlinearity:
    """Scalar map with an attached derivative (and its family metadata)."""

    fn: Callable[[float], float]
    deriv: Callable[[float], float]
    family: str = ""
    amplitude: Optional[float] = None

    def __call__(self, y):
        return self.fn(y)

    def d(self, y):
        return self.deriv(y)


def power_nonlinearity(a, k):
    """Odd power map y -> a * y^(2k-1) with derivative."""
    k = int(k)
    if k < 1:
        raise ValueError("need k >= 1")
    p = 2 * k - 1
    return ScalarNonlinearity(
        fn=lambda y: a * y ** p,
        deriv=lambda y: a * p * y ** (p - 1),
        family="power", amplitude=float(a),
    )


def sine_nonlinearity(a, kind="sin"):
    """y -> a*sin(y) or a*cos(y) with derivative."""
    if kind == "sin":
        return ScalarNonlinearity(
            fn=lambda y: a * np.sin(y), deriv=lambda y: a * np.cos(y),
            family="sin", amplitude=float(a),
        )
    if kind == "cos":
        return ScalarNonlinearity(
            fn=lambda y: a * np.cos(y), deriv=lambda y: -a * np.sin(y),
            family="cos", amplitude=float(a),
        )
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# circuit models
# ---------------------------------------------------------------------------


def _grid_vals(fn, ts):
    """Evaluate a scalar coefficient over a grid, vectorized when possible."""
    try:
        out = np.asarray(fn(ts), dtype=float)
    except Exception:
        out = None
    if out is not None and out.shape == ts.shape:
        return out
    if out is not None and out.ndim == 0:
        return np.full(ts.shape, float(out))
    return np.array([float(fn(t)) for t in ts])


@dataclass
class Circuit1Params:
    """Series inductor with two nonlinear resistors and a current source.

    L must stay bounded away from zero and R away from zero on the time
    domain of interest (caller's contract).  The optional *_prime entries
    are analytic derivatives of the time-varying coefficients; finite
    differences are used where they are omitted.
    """

    L: Callable
    R_L: Callable
    R: Callable
    U: Callable
    I: Callable
    phi: ScalarNonlinearity
    phi_L: ScalarNonlinearity
    L_prime: Optional[Callable] = None
    R_L_prime: Optional[Callable] = None
    R_prime: Optional[Callable] = None


def circuit1(params):
    """First circuit model as a semilinear DAE.

    States: x1 inductor current, x2 inductor voltage, x3 current through
    the nonlinear resistor branch.

        A(t) = diag(L, 0, 0),
        B(t) = [[R_L, -1, 0], [1, 0, 1], [0, 1, -R]],
        f    = (-phi_L(x1), I(t), U(t) + phi(x3)).
    """
    p = params

    def A(t):
        return np.array([[p.L(t), 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])

    def B(t):
        return np.array([
            [p.R_L(t), -1.0, 0.0],
            [1.0, 0.0, 1.0],
            [0.0, 1.0, -p.R(t)],
        ])

    A_prime = None
    if p.L_prime is not None:
        def A_prime(t):
            return np.array([[p.L_prime(t), 0.0, 0.0], [0.0] * 3, [0.0] * 3])

    B_prime = None
    if p.R_L_prime is not None and p.R_prime is not None:
        def B_prime(t):
            M = np.zeros((3, 3))
            M[0, 0] = p.R_L_prime(t)
            M[2, 2] = -p.R_prime(t)
            return M

    def C2_hint(t):
        # the only finite eigenvalue is -(R_L + R)/L; keep it well inside
        # the contour so the trapezoid rule converges in few nodes
        return 8.0 * abs(p.R_L(t) + p.R(t)) / p.L(t) + 1.0

    def A_batch(ts):
        out = np.zeros((ts.size, 3, 3))
        out[:, 0, 0] = _grid_vals(p.L, ts)
        return out

    def B_batch(ts):
        out = np.zeros((ts.size, 3, 3))
        out[:, 0, 0] = _grid_vals(p.R_L, ts)
        out[:, 0, 1] = -1.0
        out[:, 1, 0] = 1.0
        out[:, 1, 2] = 1.0
        out[:, 2, 1] = 1.0
        out[:, 2, 2] = -_grid_vals(p.R, ts)
        return out

    def f(t, x):
        return np.array([-p.phi_L(x[0]), p.I(t), p.U(t) + p.phi(x[2])])

    def f_jac(t, x):
        J = np.zeros((3, 3))
        J[0, 0] = -p.phi_L.d(x[0])
        J[2, 2] = p.phi.d(x[2])
        return J

    pencil = TimeVaryingPencil(
        dim=3, A=A, B=B, A_prime=A_prime, B_prime=B_prime, C2_hint=C2_hint,
        A_batch=A_batch, B_batch=B_batch,
    )
    return SemilinearDAE(pencil=pencil, f=f, f_jac=f_jac, form=Form.INSIDE_DERIVATIVE)


@dataclass
class Circuit2Params:
    """Second circuit model: inductor branch feeding two nonlinear resistor
    branches and a conductance.  L, R1, R2, G3 positive on the domain
    (caller's contract)."""

    L: Callable
    R1: Callable
    R2: Callable
    G3: Callable
    U: Callable
    I: Callable
    phi1: ScalarNonlinearity
    phi2: ScalarNonlinearity
    phi3: ScalarNonlinearity
    L_prime: Optional[Callable] = None
    R1_prime: Optional[Callable] = None
    R2_prime: Optional[Callable] = None


def circuit2(params):
    """Second circuit model as a semilinear DAE.

    States: x1, x2, x3 are the three branch currents.

        A(t) = diag(L, 0, 0),
        B(t) = [[R1, 0, 0], [1, -1, -1], [0, 0, R2]],
        f    = (U - phi1(x1) - phi3(x2), I + G3*phi3(x2), phi3(x2) - phi2(x3)).
    """
    p = params

    def A(t):
        return np.array([[p.L(t), 0.0, 0.0], [0.0] * 3, [0.0] * 3])

    def B(t):
        return np.array([
            [p.R1(t), 0.0, 0.0],
            [1.0, -1.0, -1.0],
            [0.0, 0.0, p.R2(t)],
        ])

    A_prime = None
    if p.L_prime is not None:
        def A_prime(t):
            return np.array([[p.L_prime(t), 0.0, 0.0], [0.0] * 3, [0.0] * 3])

    B_prime = None
    if p.R1_prime is not None and p.R2_prime is not None:
        def B_prime(t):
            M = np.zeros((3, 3))
            M[0, 0] = p.R1_prime(t)
            M[2, 2] = p.R2_prime(t)
            return M

    def C2_hint(t):
        # the finite eigenvalue is -R1/L; a multiple of the resolvent bound
        # radius (1 + R1)/L + 1 keeps it deep inside the contour, so the
        # trapezoid rule converges at the starting node count
        return 4.0 * ((1.0 + p.R1(t)) / p.L(t) + 1.0)

    def A_batch(ts):
        out = np.zeros((ts.size, 3, 3))
        out[:, 0, 0] = _grid_vals(p.L, ts)
        return out

    def B_batch(ts):
        out = np.zeros((ts.size, 3, 3))
        out[:, 0, 0] = _grid_vals(p.R1, ts)
        out[:, 1, 0] = 1.0
        out[:, 1, 1] = -1.0
        out[:, 1, 2] = -1.0
        out[:, 2, 2] = _grid_vals(p.R2, ts)
        return out

    def f(t, x):
        p3 = p.phi3(x[1])
        return np.array([
            p.U(t) - p.phi1(x[0]) - p3,
            p.I(t) + p.G3(t) * p3,
            p3 - p.phi2(x[2]),
        ])

    def f_jac(t, x):
        d3 = p.phi3.d(x[1])
        return np.array([
            [-p.phi1.d(x[0]), -d3, 0.0],
            [0.0, p.G3(t) * d3, 0.0],
            [0.0, d3, -p.phi2.d(x[2])],
        ])

    pencil = TimeVaryingPencil(
        dim=3, A=A, B=B, A_prime=A_prime, B_prime=B_prime, C2_hint=C2_hint,
        A_batch=A_batch, B_batch=B_batch,
    )
    return SemilinearDAE(pencil=pencil, f=f, f_jac=f_jac, form=Form.INSIDE_DERIVATIVE)


def circuit2_resolvent_bounds(params):
    """Resolvent bound functions (C1, C2) of the second circuit:
    ||(lam A + B)^{-1}|| <= C1(t) for |lam| >= C2(t), with

        C1(t) = sqrt(2) (1 + 1/R2(t)) + 1,    C2(t) = (1 + R1(t))/L(t) + 1.
    """
    p = params

    def C1(t):
        return math.sqrt(2.0) * (1.0 + 1.0 / p.R2(t)) + 1.0

    def C2(t):
        return (1.0 + p.R1(t)) / p.L(t) + 1.0

    return C1, C2


def sine_condition_values(params, ts):
    """Pointwise value of the small-amplitude solvability gate for sine
    nonlinearities in the second circuit:

        G3|b| + (|a| + |b| + G3|a||b|) / R2   < 1,

    with a, b the amplitudes of phi2, phi3.  Returns the left-hand side on
    the given grid; values >= 1 mark violations."""
    for phi in (params.phi2, params.phi3):
        if phi.family not in ("sin", "cos"):
            raise ValueError("the gate applies to sine/cosine nonlinearities only")
    a = abs(params.phi2.amplitude)
    b = abs(params.phi3.amplitude)
    ts = np.asarray(ts, dtype=float)
    g3 = _grid_vals(params.G3, ts)
    r2 = _grid_vals(params.R2, ts)
    return g3 * b + (a + b + g3 * a * b) / r2


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    """A ready-to-run problem: builder, consistent initial point, and the
    exact solution when one is known (manufactured problems)."""

    name: str
    description: str
    build: Callable[[], SemilinearDAE]
    x0: np.ndarray
    t0: float = 0.0
    exact: Optional[Callable[[np.ndarray], np.ndarray]] = None
    expect_bounded: bool = False


def _p1_fig2():
    return circuit1(Circuit1Params(
        L=lambda t: 0.1 + 1.0 / (t + 1.0),
        R_L=lambda t: 3.0 + 0.5 * np.sin(2.0 * t),
        R=lambda t: 1.0 + 0.5 * np.sin(2.0 * t),
        U=lambda t: 2.0 * np.sin(2.0 * t + np.pi),
        I=lambda t: np.sin(2.0 * t - np.pi),
        phi=power_nonlinearity(1.0, 2),
        phi_L=power_nonlinearity(1.0, 2),
        L_prime=lambda t: -1.0 / (t + 1.0) ** 2,
        R_L_prime=lambda t: np.cos(2.0 * t),
        R_prime=lambda t: np.cos(2.0 * t),
    ))


def _p1_fig3():
    return circuit1(Circuit1Params(
        L=lambda t: 0.1 + 1.0 / (t + 1.0),
        R_L=lambda t: np.exp(-t),
        R=lambda t: 2.0 + np.cos(t),
        U=lambda t: t + 1.0,
        I=lambda t: 3.0 / (t + 1.0),
        phi=power_nonlinearity(1.0, 2),
        phi_L=power_nonlinearity(1.0, 2),
        L_prime=lambda t: -1.0 / (t + 1.0) ** 2,
        R_L_prime=lambda t: -np.exp(-t),
        R_prime=lambda t: -np.sin(t),
    ))


def _p1_sawtooth():
    return circuit1(Circuit1Params(
        L=lambda t: 0.1 + 1.0 / (t + 1.0),
        R_L=lambda t: 3.0 + 0.5 * np.sin(2.0 * t),
        R=lambda t: 1.0 + 0.5 * np.sin(2.0 * t),
        U=sawtooth,
        I=lambda t: np.sin(2.0 * t - np.pi),
        phi=power_nonlinearity(3.0, 2),
        phi_L=power_nonlinearity(4.0, 2),
        L_prime=lambda t: -1.0 / (t + 1.0) ** 2,
        R_L_prime=lambda t: np.cos(2.0 * t),
        R_prime=lambda t: np.cos(2.0 * t),
    ))


def _p2_table1():
    return circuit2(Circuit2Params(
        L=lambda t: 500.0,
        R1=lambda t: np.exp(-t),
        R2=lambda t: 2.0 + np.exp(-t),
        G3=lambda t: 1.0 / (t + 1.0),
        U=lambda t: 1.0 / (t + 1.0),
        I=lambda t: np.sin(t),
        phi1=power_nonlinearity(1.0, 2),
        phi2=power_nonlinearity(1.0, 2),
        phi3=power_nonlinearity(1.0, 2),
        L_prime=lambda t: 0.0,
        R1_prime=lambda t: -np.exp(-t),
        R2_prime=lambda t: -np.exp(-t),
    ))


def _p2_small_l():
    return circuit2(Circuit2Params(
        L=lambda t: 1e-3,
        R1=lambda t: np.exp(-t),
        R2=lambda t: 5.0 + np.exp(-t),
        G3=lambda t: 1.0 / (t + 1.0),
        U=lambda t: 1.0 / (t + 1.0),
        I=lambda t: np.sin(t),
        phi1=power_nonlinearity(1.0, 2),
        phi2=power_nonlinearity(1.0, 2),
        phi3=power_nonlinearity(1.0, 2),
        L_prime=lambda t: 0.0,
        R1_prime=lambda t: -np.exp(-t),
        R2_prime=lambda t: -np.exp(-t),
    ))


def _p2_triangular():
    return circuit2(Circuit2Params(
        L=lambda t: 0.1 + 1.0 / (t + 1.0),
        R1=lambda t: np.exp(-t),
        R2=lambda t: 2.0 + np.exp(-t),
        G3=lambda t: 1.0 / (t + 1.0),
        U=triangular,
        I=lambda t: 1.0 / (t + 1.0) - 1.0,
        phi1=power_nonlinearity(1.0, 2),
        phi2=power_nonlinearity(1.0, 2),
        phi3=power_nonlinearity(1.0, 2),
        L_prime=lambda t: -1.0 / (t + 1.0) ** 2,
        R1_prime=lambda t: -np.exp(-t),
        R2_prime=lambda t: -np.exp(-t),
    ))


def _p2_cosine():
    return circuit2(Circuit2Params(
        L=lambda t: (t + 10.0) ** -0.5 + 1e-2,
        R1=lambda t: 1.0 + 0.5 * np.sin(t),
        R2=lambda t: 3.0 + 0.5 * np.sin(t),
        G3=lambda t: 1.0 / (t + 1.0),
        U=lambda t: 100.0 / (t + 1.0) ** 2,
        I=lambda t: 1.0 / (np.log(t + 1.0) + 1.0),
        phi1=power_nonlinearity(1.0, 3),
        phi2=sine_nonlinearity(1.0 / 3.0, "cos"),
        phi3=sine_nonlinearity(1.0 / 3.0, "cos"),
        L_prime=lambda t: -0.5 * (t + 10.0) ** -1.5,
        R1_prime=lambda t: 0.5 * np.cos(t),
        R2_prime=lambda t: 0.5 * np.cos(t),
    ))


def _p2_sine():
    return circuit2(Circuit2Params(
        L=lambda t: 1.0,
        R1=lambda t: 2.0 + np.exp(-t),
        R2=lambda t: 0.1 * t + 3.0,
        G3=lambda t: 1.0 / (t + 1.0),
        U=lambda t: t + 1.0,
        I=lambda t: 1.0 * t,
        phi1=sine_nonlinearity(10.0, "sin"),
        phi2=sine_nonlinearity(1.0 / 3.0, "sin"),
        phi3=sine_nonlinearity(-0.5, "sin"),
        L_prime=lambda t: 0.0,
        R1_prime=lambda t: -np.exp(-t),
        R2_prime=lambda t: 0.1,
    ))


def _p2_sine_lagrange():
    return circuit2(Circuit2Params(
        L=lambda t: 0.1 + 1.0 / (t + 1.0),
        R1=lambda t: 1.0 + np.exp(-t),
        R2=lambda t: 0.5 * np.cos(t) + 3.0,
        G3=lambda t: 1.0 / (t + 1.0),
        U=lambda t: (t + 1.0) ** -2.5,
        I=lambda t: np.sin(t),
        phi1=sine_nonlinearity(5.0, "sin"),
        phi2=sine_nonlinearity(1.0 / 3.0, "sin"),
        phi3=sine_nonlinearity(-0.5, "sin"),
        L_prime=lambda t: -1.0 / (t + 1.0) ** 2,
        R1_prime=lambda t: -np.exp(-t),
        R2_prime=lambda t: -0.5 * np.sin(t),
    ))


def make_manufactured():
    """Smooth second-circuit problem with a forcing term chosen so that

        x*(t) = (sin t, cos(t)/2, 0.4*sin(t + 0.3))

    solves the system exactly.  Sine nonlinearities within the
    small-amplitude gate keep the algebraic stage uniquely solvable
    everywhere, so the stated method orders apply.  Returns
    (dae, x0, exact)."""
    params = Circuit2Params(
        L=lambda t: 1.0 + np.exp(-t),
        R1=lambda t: 2.0 + np.exp(-t),
        R2=lambda t: 3.0 + 0.5 * np.cos(t),
        G3=lambda t: 1.0 / (t + 1.0),
        U=lambda t: 1.0 / (t + 1.0),
        I=lambda t: np.sin(t),
        phi1=sine_nonlinearity(1.0, "sin"),
        phi2=sine_nonlinearity(1.0 / 3.0, "sin"),
        phi3=sine_nonlinearity(-0.5, "sin"),
        L_prime=lambda t: -np.exp(-t),
        R1_prime=lambda t: -np.exp(-t),
        R2_prime=lambda t: -0.5 * np.sin(t),
    )
    base = circuit2(params)
    p = params

    def exact(t):
        t = np.asarray(t, dtype=float)
        return np.stack(
            [np.sin(t), 0.5 * np.cos(t), 0.4 * np.sin(t + 0.3)], axis=-1
        )

    def forcing(t):
        x1, x2, x3 = np.sin(t), 0.5 * np.cos(t), 0.4 * np.sin(t + 0.3)
        dx1 = np.cos(t)
        g1 = (p.L_prime(t) * x1 + p.L(t) * dx1 + p.R1(t) * x1
              - (p.U(t) - p.phi1(x1) - p.phi3(x2)))
        g2 = x1 - x2 - x3 - (p.I(t) + p.G3(t) * p.phi3(x2))
        g3 = p.R2(t) * x3 - (p.phi3(x2) - p.phi2(x3))
        return np.array([g1, g2, g3])

    base_f = base.f

    def f(t, x):
        return base_f(t, x) + forcing(t)

    dae = replace(base, f=f)
    return dae, exact(0.0), exact


def _manufactured_dae():
    return make_manufactured()[0]


PRESETS = {
    "circuit1:fig2": Preset(
        name="circuit1:fig2",
        description="first circuit, sinusoidal drives, cubic resistors (bounded)",
        build=_p1_fig2, x0=np.zeros(3), expect_bounded=True,
    ),
    "circuit1:fig3": Preset(
        name="circuit1:fig3",
        description="first circuit, ramp voltage and decaying source current",
        build=_p1_fig3, x0=np.array([0.0, 37.0, 3.0]),
    ),
    "circuit1:sawtooth": Preset(
        name="circuit1:sawtooth",
        description="first circuit, nondifferentiable sawtooth voltage (bounded)",
        build=_p1_sawtooth, x0=np.zeros(3), expect_bounded=True,
    ),
    "circuit2:table1": Preset(
        name="circuit2:table1",
        description="second circuit, L=500, cubic resistors (method comparison set)",
        build=_p2_table1, x0=np.zeros(3),
    ),
    "circuit2:small-l": Preset(
        name="circuit2:small-l",
        description="second circuit with L=1e-3 (stiff; use h <= 1e-3)",
        build=_p2_small_l, x0=np.zeros(3),
    ),
    "circuit2:triangular": Preset(
        name="circuit2:triangular",
        description="second circuit, nondifferentiable triangular voltage",
        build=_p2_triangular, x0=np.zeros(3),
    ),
    "circuit2:cosine": Preset(
        name="circuit2:cosine",
        description="second circuit, cosine resistors, quintic phi1 (bounded)",
        build=_p2_cosine, x0=np.array([4.0 / 3.0, 0.0, 0.0]), expect_bounded=True,
    ),
    "circuit2:sine": Preset(
        name="circuit2:sine",
        description="second circuit, sine resistors, growing drives",
        build=_p2_sine, x0=np.zeros(3),
    ),
    "circuit2:sine-lagrange": Preset(
        name="circuit2:sine-lagrange",
        description="second circuit, sine resistors, decaying drives (bounded)",
        build=_p2_sine_lagrange, x0=np.zeros(3), expect_bounded=True,
    ),
    "manufactured:order": Preset(
        name="manufactured:order",
        description="smooth forced problem with known exact solution (order tests)",
        build=_manufactured_dae,
        x0=np.array([0.0, 0.5, 0.4 * math.sin(0.3)]),
        exact=lambda t: make_manufactured()[2](t),
    ),
}

# tiny fixtures for exercising the CLI failure paths; not part of the gallery
DIAGNOSTIC_PRESETS = {
    "toy:index0": Preset(
        name="toy:index0",
        description="A = I (index-0 pencil), linear decay",
        build=lambda: SemilinearDAE(
            pencil=TimeVaryingPencil(
                dim=2,
                A=lambda t: np.eye(2),
                B=lambda t: np.diag([1.0, 2.0]),
                A_prime=lambda t: np.zeros((2, 2)),
            ),
            f=lambda t, x: np.zeros(2),
            f_jac=lambda t, x: np.zeros((2, 2)),
        ),
        x0=np.array([1.0, 1.0]),
    ),
    "toy:nonregular": Preset(
        name="toy:nonregular",
        description="A = B = 0 (singular pencil), for failure-path checks",
        build=lambda: SemilinearDAE(
            pencil=TimeVaryingPencil(
                dim=1, A=lambda t: np.zeros((1, 1)), B=lambda t: np.zeros((1, 1)),
            ),
            f=lambda t, x: np.zeros(1),
        ),
        x0=np.zeros(1),
    ),
}


def get_preset(name):
    """Look a preset up by name (gallery first, then diagnostic toys)."""
    if name in PRESETS:
        return PRESETS[name]
    if name in DIAGNOSTIC_PRESETS:
        return DIAGNOSTIC_PRESETS[name]
    raise KeyError(
        f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
    )


# ---------------------------------------------------------------------------
# problem-definition files
# ---------------------------------------------------------------------------

_CIRCUIT1_KEYS = ("L", "R_L", "R", "U", "I")
_CIRCUIT2_KEYS = ("L", "R1", "R2", "G3", "U", "I")


def _num(token):
    if token == "pi":
        return math.pi
    if token == "-pi":
        return -math.pi
    return float(token)


def _signal(spec):
    """Parse one time-signal spec "family arg ..." into (fn, deriv)."""
    parts = spec.split()
    fam, args = parts[0], [_num(s) for s in parts[1:]]

    def need(k):
        if len(args) != k:
            raise ValueError(f"signal family {fam!r} needs {k} parameters")

    if fam == "const":
        need(1)
        c = args[0]
        return (lambda t: c + 0.0 * t), (lambda t: 0.0 * t)
    if fam == "linear":
        need(2)
        a, b = args
        return (lambda t: a * t + b), (lambda t: a + 0.0 * t)
    if fam == "pows":
        need(4)
        a, s, p, c = args
        return (lambda t: a * (t + s) ** p + c), (lambda t: a * p * (t + s) ** (p - 1.0))
    if fam == "exp":
        need(3)
        a, r, c = args
        return (lambda t: a * np.exp(r * t) + c), (lambda t: a * r * np.exp(r * t))
    if fam == "sin":
        need(4)
        a, w, ph, c = args
        return (lambda t: a * np.sin(w * t + ph) + c), (lambda t: a * w * np.cos(w * t + ph))
    if fam == "cos":
        need(4)
        a, w, ph, c = args
        return (lambda t: a * np.cos(w * t + ph) + c), (lambda t: -a * w * np.sin(w * t + ph))
    if fam == "logrecip":
        need(0)
        return (
            lambda t: 1.0 / (np.log(t + 1.0) + 1.0),
            lambda t: -1.0 / ((t + 1.0) * (np.log(t + 1.0) + 1.0) ** 2),
        )
    if fam == "sawtooth":
        need(0)
        return sawtooth, None
    if fam == "triangular":
        need(0)
        return triangular, None
    raise ValueError(f"unknown signal family {fam!r}")


def _nonlinearity(spec):
    parts = spec.split()
    fam, args = parts[0], [_num(s) for s in parts[1:]]
    if fam == "power":
        if len(args) != 2:
            raise ValueError("power nonlinearity needs 'power a k'")
        return power_nonlinearity(args[0], int(args[1]))
    if fam in ("sin", "cos"):
        if len(args) != 1:
            raise ValueError(f"{fam} nonlinearity needs '{fam} a'")
        return sine_nonlinearity(args[0], fam)
    raise ValueError(f"unknown nonlinearity family {fam!r}")


def load_problem_file(path):
    """Read a flat key-value problem definition; returns (dae, x0, t0).

    Lines are "key = value"; '#' starts a comment.  Keys: circuit
    (circuit1 | circuit2), x0, t0 (optional), the circuit's coefficient
    signals (see _signal for the families) and its nonlinearities
    (phi/phi_L for circuit1, phi1..phi3 for circuit2)."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            entries[key] = val

    kind = entries.pop("circuit", None)
    if kind not in ("circuit1", "circuit2"):
        raise ValueError("problem file needs 'circuit = circuit1|circuit2'")
    t0 = float(entries.pop("t0", "0"))
    try:
        x0 = np.array([float(s) for s in entries.pop("x0").replace(",", " ").split()])
    except KeyError:
        raise ValueError("problem file needs an 'x0' line") from None

    def take_signal(key):
        try:
            return _signal(entries.pop(key))
        except KeyError:
            raise ValueError(f"problem file is missing '{key}'") from None

    if kind == "circuit1":
        sig = {k: take_signal(k) for k in _CIRCUIT1_KEYS}
        params = Circuit1Params(
            L=sig["L"][0], R_L=sig["R_L"][0], R=sig["R"][0],
            U=sig["U"][0], I=sig["I"][0],
            phi=_nonlinearity(entries.pop("phi")),
            phi_L=_nonlinearity(entries.pop("phi_L")),
            L_prime=sig["L"][1], R_L_prime=sig["R_L"][1], R_prime=sig["R"][1],
        )
        dae = circuit1(params)
    else:
        sig = {k: take_signal(k) for k in _CIRCUIT2_KEYS}
        params = Circuit2Params(
            L=sig["L"][0], R1=sig["R1"][0], R2=sig["R2"][0], G3=sig["G3"][0],
            U=sig["U"][0], I=sig["I"][0],
            phi1=_nonlinearity(entries.pop("phi1")),
            phi2=_nonlinearity(entries.pop("phi2")),
            phi3=_nonlinearity(entries.pop("phi3")),
            L_prime=sig["L"][1], R1_prime=sig["R1"][1], R2_prime=sig["R2"][1],
        )
        dae = circuit2(params)
    if entries:
        raise ValueError(f"unrecognized problem keys: {', '.join(sorted(entries))}")
    if x0.size != 3:
        raise ValueError("x0 must have three components")
    return dae, x0, t0
