import numpy as np
import pytest
from scipy.integrate import solve_ivp

from daeproj import (
    Form,
    NoConvergence,
    SemilinearDAE,
    SingularNewtonMatrix,
    SolverConfig,
    TimeVaryingPencil,
    algebraic_residual,
    compute_projectors,
    consistency_residual,
    consistent_initialize,
    newton_update_matrix,
    phi_operator,
    pi_rhs,
    reduce_to_inside_form,
    solve,
    w_map,
)
from daeproj.problems import (
    Circuit2Params,
    circuit2,
    get_preset,
    power_nonlinearity,
    sine_nonlinearity,
)


def simple_dae(f=None, f_jac=None):
    """A = diag(1, 0), B = I: one differential and one algebraic state."""
    pencil = TimeVaryingPencil(
        dim=2,
        A=lambda t: np.diag([1.0, 0.0]),
        B=lambda t: np.eye(2),
        A_prime=lambda t: np.zeros((2, 2)),
    )
    if f is None:
        f = lambda t, x: np.zeros(2)
        f_jac = lambda t, x: np.zeros((2, 2))
    return SemilinearDAE(pencil=pencil, f=f, f_jac=f_jac)


@pytest.fixture(scope="module")
def table1():
    preset = get_preset("circuit2:table1")
    dae = preset.build()
    ps = compute_projectors(dae.pencil, 0.0, with_derivative=True, t_min=0.0)
    return dae, ps


class TestPiRhs:
    def test_hand_evaluated_linear_case(self):
        dae = simple_dae()
        ps = compute_projectors(dae.pencil, 0.0, with_derivative=True)
        out = pi_rhs(dae, ps, 0.0, np.array([1.0, 0.0]), np.zeros(2))
        assert np.allclose(out, [-1.0, 0.0], atol=1e-12)

    def test_zero_state_zero_rhs(self):
        dae = simple_dae()
        ps = compute_projectors(dae.pencil, 0.0, with_derivative=True)
        out = pi_rhs(dae, ps, 0.0, np.zeros(2), np.zeros(2))
        assert np.allclose(out, 0.0)

    def test_circuit2_zero_state(self, table1):
        # at the origin only the drive survives: G^{-1} Q1 (U(0), 0, 0)^T
        # solved through G = [[L,0,0],[1,-1,-1],[0,0,R2]] gives
        # (U/L, U/L, 0); U(0) = 1, L = 500
        dae, ps = table1
        out = pi_rhs(dae, ps, 0.0, np.zeros(3), np.zeros(3))
        assert np.allclose(out, [0.002, 0.002, 0.0], atol=1e-15)

    def test_requires_derivative(self, table1):
        dae, _ = table1
        ps = compute_projectors(dae.pencil, 0.0)
        with pytest.raises(ValueError):
            pi_rhs(dae, ps, 0.0, np.zeros(3), np.zeros(3))


class TestAlgebraicResidual:
    def test_consistent_origin_circuit2(self, table1):
        dae, ps = table1
        res = algebraic_residual(dae, ps, 0.0, np.zeros(3), np.zeros(3))
        assert np.linalg.norm(res) < 1e-15

    def test_index0_residual_is_minus_u(self):
        pencil = TimeVaryingPencil(
            dim=2, A=lambda t: np.eye(2), B=lambda t: np.diag([1.0, 2.0]),
            A_prime=lambda t: np.zeros((2, 2)),
        )
        dae = SemilinearDAE(pencil=pencil, f=lambda t, x: np.zeros(2),
                            f_jac=lambda t, x: np.zeros((2, 2)))
        ps = compute_projectors(pencil, 0.0)
        u = np.array([0.3, -0.7])
        res = algebraic_residual(dae, ps, 0.0, np.zeros(2), u)
        assert np.allclose(res, -u, atol=1e-13)

    def test_third_component_hand_value(self, table1):
        # u = (0,0,1), z = 0: component 3 is (phi3(0) - phi2(1))/R2 - 1 = -4/3
        dae, ps = table1
        res = algebraic_residual(dae, ps, 0.0, np.zeros(3),
                                 np.array([0.0, 0.0, 1.0]))
        assert abs(res[2] - (-4.0 / 3.0)) < 1e-14

    def test_residual_is_w_minus_u(self, table1):
        dae, ps = table1
        rng = np.random.default_rng(3)
        for _ in range(10):
            z = rng.standard_normal(3)
            u = rng.standard_normal(3)
            lhs = algebraic_residual(dae, ps, 0.3, z, u)
            rhs = w_map(dae, ps, 0.3, z, u) - u
            assert np.array_equal(lhs, rhs)

    def test_w_fixed_point_at_consistent_state(self, table1):
        dae, ps = table1
        x0 = consistent_initialize(dae, 0.0, np.array([0.2, 0.1, 0.1]), ps=ps)
        z, u = ps.P1 @ x0, ps.P2 @ x0
        assert np.linalg.norm(w_map(dae, ps, 0.0, z, u) - u) < 1e-11

    def test_zero_forcing_constant_pencil(self):
        dae = simple_dae()
        ps = compute_projectors(dae.pencil, 0.0)
        out = w_map(dae, ps, 0.0, np.array([1.0, 0.0]), np.zeros(2))
        assert np.allclose(out, 0.0)


class TestNewtonUpdateMatrix:
    def test_zero_jacobian_gives_identity(self):
        dae = simple_dae()
        ps = compute_projectors(dae.pencil, 0.0)
        upd = newton_update_matrix(dae, ps, 0.0, np.zeros(2), np.zeros(2))
        assert np.allclose(upd.matrix, np.eye(2))
        assert upd.rcond > 0.1

    def test_inverse_identity_with_restricted_phi(self, table1):
        # M^{-1} = P1 - Phi_restricted^{-1} G P2, both sides built
        # independently
        dae, ps = table1
        rng = np.random.default_rng(11)
        for _ in range(20):
            z = ps.P1 @ rng.standard_normal(3)
            u = ps.P2 @ rng.standard_normal(3)
            upd = newton_update_matrix(dae, ps, 0.0, z, u)
            phi = phi_operator(dae, ps, 0.0, z, u)
            rhs = ps.P1 - phi.restricted_inverse() @ ps.G @ ps.P2
            assert np.abs(upd.inverse - rhs).max() < 1e-10

    def test_singular_at_tuned_nonlinearity(self):
        # phi2 = sin, phi3 = -2 sin, R2 = 3, G3 = 1: the restricted operator
        # determinant -[phi3' + (phi2' + R2)(1 + G3 phi3')] vanishes at
        # x2 = arccos(0.4), x3 = 0
        params = Circuit2Params(
            L=lambda t: 1.0, R1=lambda t: 1.0, R2=lambda t: 3.0,
            G3=lambda t: 1.0, U=lambda t: 0.0, I=lambda t: 0.0,
            phi1=sine_nonlinearity(1.0, "sin"),
            phi2=sine_nonlinearity(1.0, "sin"),
            phi3=sine_nonlinearity(-2.0, "sin"),
            L_prime=lambda t: 0.0, R1_prime=lambda t: 0.0,
            R2_prime=lambda t: 0.0,
        )
        dae = circuit2(params)
        ps = compute_projectors(dae.pencil, 0.0)
        u = np.array([0.0, np.arccos(0.4), 0.0])
        with pytest.raises(SingularNewtonMatrix):
            newton_update_matrix(dae, ps, 0.0, np.zeros(3), u)


class TestPhiOperator:
    def test_restricted_determinant_formula(self, table1):
        # |det| of the restricted block equals
        # |phi3'(x2) + (phi2'(x3) + R2)(1 + G3 phi3'(x2))| for this circuit
        dae, ps = table1
        rng = np.random.default_rng(5)
        for _ in range(10):
            z = ps.P1 @ rng.standard_normal(3)
            u = ps.P2 @ rng.standard_normal(3)
            x = ps.P1 @ z + ps.P2 @ u
            phi = phi_operator(dae, ps, 0.0, z, u)
            d3 = 3.0 * x[1] ** 2
            d2 = 3.0 * x[2] ** 2
            r2, g3 = 3.0, 1.0
            expected = abs(d3 + (d2 + r2) * (1.0 + g3 * d3))
            assert abs(abs(np.linalg.det(phi.restricted)) - expected) < 1e-10

    def test_cubic_nonlinearities_keep_finite_condition(self, table1):
        dae, ps = table1
        preset = get_preset("circuit2:table1")
        traj = solve(dae, preset.x0, SolverConfig(method=2, T=1.0, h=0.05))
        for i in range(traj.t.size):
            phi = phi_operator(dae, ps, float(traj.t[i]), traj.z[i], traj.u[i])
            assert np.isfinite(phi.cond)

    def test_zero_jacobian_identity_b(self):
        dae = simple_dae()
        ps = compute_projectors(dae.pencil, 0.0)
        phi = phi_operator(dae, ps, 0.0, np.zeros(2), np.zeros(2))
        assert np.allclose(phi.matrix, -ps.P2, atol=1e-13)
        assert phi.cond == pytest.approx(1.0)

    def test_index0_trivial_restriction(self):
        pencil = TimeVaryingPencil(
            dim=2, A=lambda t: np.eye(2), B=lambda t: np.eye(2),
            A_prime=lambda t: np.zeros((2, 2)),
        )
        dae = SemilinearDAE(pencil=pencil, f=lambda t, x: np.zeros(2),
                            f_jac=lambda t, x: np.zeros((2, 2)))
        ps = compute_projectors(pencil, 0.0)
        phi = phi_operator(dae, ps, 0.0, np.zeros(2), np.zeros(2))
        assert phi.restricted.shape == (0, 0)
        assert phi.cond == 0.0


class TestConsistencyResidual:
    def test_circuit1_origin_with_fig2_signals(self):
        preset = get_preset("circuit1:fig2")
        dae = preset.build()
        ps = compute_projectors(dae.pencil, 0.0)
        res = consistency_residual(dae, ps, 0.0, np.zeros(3))
        assert np.linalg.norm(res) < 1e-13

    def test_circuit2_origin(self, table1):
        dae, ps = table1
        res = consistency_residual(dae, ps, 0.0, np.zeros(3))
        assert np.linalg.norm(res) < 1e-15

    def test_index0_always_zero(self):
        pencil = TimeVaryingPencil(
            dim=2, A=lambda t: np.eye(2), B=lambda t: np.eye(2),
            A_prime=lambda t: np.zeros((2, 2)),
        )
        dae = SemilinearDAE(pencil=pencil, f=lambda t, x: x ** 2,
                            f_jac=lambda t, x: np.diag(2 * x))
        ps = compute_projectors(pencil, 0.0)
        res = consistency_residual(dae, ps, 0.0, np.array([3.0, -4.0]))
        assert np.linalg.norm(res) < 1e-12

    def test_second_component_hand_value(self, table1):
        # x = (1,1,1) at t=0 with I(0)=0, G3(0)=1, cubes: row 2 of Bx - f is
        # (1 - 1 - 1) - (0 + 1*1) = -2 and Q2 keeps it unchanged
        dae, ps = table1
        res = consistency_residual(dae, ps, 0.0, np.ones(3))
        assert abs(res[1] - (-2.0)) < 1e-13

    def test_depends_only_on_projected_parts(self, table1):
        dae, ps = table1
        rng = np.random.default_rng(9)
        for _ in range(10):
            x = rng.standard_normal(3)
            x_proj = ps.P1 @ x + ps.P2 @ x
            r1 = consistency_residual(dae, ps, 0.2, x)
            r2 = consistency_residual(dae, ps, 0.2, x_proj)
            assert np.abs(r1 - r2).max() < 1e-12


class TestConsistentInitialize:
    def test_circuit2_guess_collapses_to_origin(self, table1):
        dae, ps = table1
        x0 = consistent_initialize(dae, 0.0, np.array([0.0, 0.5, 0.5]), ps=ps)
        assert np.linalg.norm(x0) < 1e-10

    def test_already_consistent_unchanged(self, table1):
        dae, ps = table1
        x0 = consistent_initialize(dae, 0.0, np.zeros(3), ps=ps)
        assert np.array_equal(x0, np.zeros(3))

    def test_circuit1_first_parameter_set(self):
        preset = get_preset("circuit1:fig2")
        dae = preset.build()
        x0 = consistent_initialize(dae, 0.0, np.array([0.0, 0.3, -0.2]))
        assert np.linalg.norm(x0) < 1e-10

    def test_residual_below_tolerance_after_success(self, table1):
        dae, ps = table1
        x0 = consistent_initialize(dae, 0.0, np.array([0.1, -0.4, 0.8]),
                                   tol=1e-12, ps=ps)
        res = consistency_residual(dae, ps, 0.0, x0)
        assert np.linalg.norm(res) < 1e-12

    def test_no_convergence_reported(self, table1):
        dae, ps = table1
        with pytest.raises(NoConvergence):
            consistent_initialize(dae, 0.0, np.array([0.0, 0.5, 0.5]),
                                  tol=1e-12, max_iter=1, ps=ps)


class TestJacobianFallback:
    def test_fd_matches_directional_differences(self):
        pencil = TimeVaryingPencil(
            dim=2, A=lambda t: np.diag([1.0, 0.0]), B=lambda t: np.eye(2),
            A_prime=lambda t: np.zeros((2, 2)),
        )
        dae = SemilinearDAE(
            pencil=pencil,
            f=lambda t, x: np.array([np.sin(x[0]) + x[1] ** 2, x[0] * x[1]]),
        )
        rng = np.random.default_rng(17)
        for _ in range(10):
            x = rng.standard_normal(2)
            v = rng.standard_normal(2)
            v /= np.linalg.norm(v)
            J = dae.jacobian(0.0, x)
            d = 1e-7
            dirdiff = (dae.f_at(0.0, x + d * v) - dae.f_at(0.0, x - d * v)) / (2 * d)
            assert np.abs(J @ v - dirdiff).max() < 1e-5 * (1 + np.abs(dirdiff).max())


class TestReduceToInsideForm:
    def test_constant_a_keeps_b(self):
        pencil = TimeVaryingPencil(
            dim=2, A=lambda t: np.diag([2.0, 0.0]),
            B=lambda t: np.array([[1.0, 0.5], [0.0, 1.0]]),
            A_prime=lambda t: np.zeros((2, 2)),
        )
        dae = SemilinearDAE(pencil=pencil, f=lambda t, x: np.zeros(2),
                            form=Form.OUTSIDE_DERIVATIVE)
        red = reduce_to_inside_form(dae)
        assert red.form is Form.INSIDE_DERIVATIVE
        for t in (0.0, 1.5):
            assert np.allclose(red.pencil.B_at(t), pencil.B_at(t))

    def test_linear_in_t_shift(self):
        pencil = TimeVaryingPencil(
            dim=2, A=lambda t: np.diag([t, 0.0]), B=lambda t: np.eye(2),
            A_prime=lambda t: np.diag([1.0, 0.0]),
        )
        dae = SemilinearDAE(pencil=pencil, f=lambda t, x: np.zeros(2),
                            form=Form.OUTSIDE_DERIVATIVE)
        red = reduce_to_inside_form(dae)
        assert np.allclose(red.pencil.B_at(2.0), np.eye(2) - np.diag([1.0, 0.0]))

    def test_rejects_inside_form(self):
        dae = simple_dae()
        with pytest.raises(ValueError):
            reduce_to_inside_form(dae)

    def test_outside_form_solution_against_ivp_oracle(self):
        # a(t) x1' + x1 = sin t, x2 = cos t; the x1 line is a plain ODE that
        # an adaptive integrator can solve to high accuracy
        def a(t):
            return 2.0 + np.sin(t)

        pencil = TimeVaryingPencil(
            dim=2,
            A=lambda t: np.diag([a(t), 0.0]),
            B=lambda t: np.eye(2),
            A_prime=lambda t: np.diag([np.cos(t), 0.0]),
        )
        dae = SemilinearDAE(
            pencil=pencil,
            f=lambda t, x: np.array([np.sin(t), np.cos(t)]),
            f_jac=lambda t, x: np.zeros((2, 2)),
            form=Form.OUTSIDE_DERIVATIVE,
        )
        traj = solve(dae, np.array([0.5, 1.0]), SolverConfig(method=2, T=1.0, h=1e-3))
        assert traj.completed
        sol = solve_ivp(
            lambda t, y: [(np.sin(t) - y[0]) / a(t)], (0.0, 1.0), [0.5],
            rtol=1e-11, atol=1e-12, dense_output=True,
        )
        x1_exact = sol.sol(traj.t)[0]
        assert np.abs(traj.x[:, 0] - x1_exact).max() < 5e-7
        assert np.abs(traj.x[:, 1] - np.cos(traj.t)).max() < 1e-9
