import numpy as np
import pytest

from daeproj import (
    IndexTooHigh,
    SemilinearDAE,
    SolverConfig,
    TimeVaryingPencil,
    compute_projectors,
    method1_step,
    method2_step,
    solve,
)
from daeproj.dae import StepState
from daeproj.problems import get_preset


def decay_dae():
    """A = diag(1, 0), B = I, f = 0: x1' = -x1, x2 = 0 (exact e^{-t})."""
    pencil = TimeVaryingPencil(
        dim=2,
        A=lambda t: np.diag([1.0, 0.0]),
        B=lambda t: np.eye(2),
        A_prime=lambda t: np.zeros((2, 2)),
    )
    return SemilinearDAE(pencil=pencil, f=lambda t, x: np.zeros(2),
                         f_jac=lambda t, x: np.zeros((2, 2)))


def projectors_with_derivative(dae, t):
    return compute_projectors(dae.pencil, t, with_derivative=True, t_min=0.0)


class TestHandDerivedSteps:
    def test_method1_linear_decay(self):
        dae = decay_dae()
        ps0 = projectors_with_derivative(dae, 0.0)
        ps1 = projectors_with_derivative(dae, 0.1)
        state = StepState(t=0.0, z=np.array([1.0, 0.0]), u=np.zeros(2),
                          x=np.array([1.0, 0.0]))
        nxt = method1_step(dae, ps0, ps1, state, 0.1)
        assert np.allclose(nxt.z, [0.9, 0.0], atol=1e-12)
        assert np.allclose(nxt.u, 0.0, atol=1e-12)
        assert np.allclose(nxt.x, [0.9, 0.0], atol=1e-12)

    def test_method2_linear_decay_trapezoid(self):
        # corrector reproduces 1 - h + h^2/2 on z' = -z
        dae = decay_dae()
        ps0 = projectors_with_derivative(dae, 0.0)
        ps1 = projectors_with_derivative(dae, 0.1)
        state = StepState(t=0.0, z=np.array([1.0, 0.0]), u=np.zeros(2),
                          x=np.array([1.0, 0.0]))
        nxt = method2_step(dae, ps0, ps1, state, 0.1)
        assert abs(nxt.z[0] - 0.905) < 1e-12

    def test_zero_fixed_point(self):
        preset = get_preset("circuit2:table1")
        dae = preset.build()
        ps0 = projectors_with_derivative(dae, 0.0)
        ps1 = projectors_with_derivative(dae, 0.1)
        state = StepState(t=0.0, z=np.zeros(3), u=np.zeros(3), x=np.zeros(3))
        dae0 = SemilinearDAE(pencil=dae.pencil, f=lambda t, x: np.zeros(3),
                             f_jac=lambda t, x: np.zeros((3, 3)))
        for step in (method1_step, method2_step):
            nxt = step(dae0, ps0, ps1, state, 0.1)
            assert np.allclose(nxt.x, 0.0, atol=1e-14)


class TestSolveDriver:
    def test_zero_problem_stays_zero(self):
        dae = decay_dae()
        traj = solve(dae, np.zeros(2), SolverConfig(method=1, T=1.0, h=0.1))
        assert traj.completed
        assert np.abs(traj.x).max() < 1e-14
        assert np.abs(traj.residuals).max() < 1e-14

    def test_exponential_decay_error_scale(self):
        dae = decay_dae()
        traj = solve(dae, np.array([1.0, 0.0]), SolverConfig(method=2, T=1.0, h=0.01))
        exact = np.exp(-traj.t)
        assert np.abs(traj.x[:, 0] - exact).max() < 5e-5

    def test_driver_matches_manual_stepping(self):
        preset = get_preset("circuit2:table1")
        dae = preset.build()
        cfg = SolverConfig(method=1, T=0.5, h=0.1)
        traj = solve(dae, preset.x0, cfg)
        ps = {t: projectors_with_derivative(dae, t) for t in traj.t}
        state = traj.state_at(0)
        for i in range(traj.t.size - 1):
            state = method1_step(dae, ps[traj.t[i]], ps[traj.t[i + 1]], state, 0.1)
            assert np.abs(state.x - traj.x[i + 1]).max() < 1e-9

    def test_determinism(self):
        preset = get_preset("circuit2:table1")
        dae = preset.build()
        cfg = SolverConfig(method=2, T=0.5, h=0.01)
        a = solve(dae, preset.x0, cfg)
        b = solve(dae, preset.x0, cfg)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.residuals, b.residuals)

    def test_component_membership(self):
        preset = get_preset("circuit1:fig2")
        dae = preset.build()
        traj = solve(dae, preset.x0, SolverConfig(method=2, T=2.0, h=0.01))
        assert traj.completed
        for i in range(0, traj.t.size, 20):
            ps = compute_projectors(dae.pencil, float(traj.t[i]))
            assert np.abs(ps.P1 @ traj.z[i] - traj.z[i]).max() < 1e-9
            assert np.abs(ps.P2 @ traj.u[i] - traj.u[i]).max() < 1e-9
            recombined = ps.P1 @ traj.z[i] + ps.P2 @ traj.u[i]
            assert np.abs(recombined - traj.x[i]).max() < 1e-10

    def test_initial_point_consistency_recorded(self):
        preset = get_preset("circuit2:table1")
        dae = preset.build()
        traj = solve(dae, preset.x0 + np.array([0.0, 0.4, -0.2]),
                     SolverConfig(method=1, T=0.2, h=0.01))
        assert traj.residuals[0] < 1e-12
        assert traj.t[0] == 0.0

    def test_trajectory_mesh_uniform(self):
        dae = decay_dae()
        traj = solve(dae, np.array([1.0, 0.0]), SolverConfig(method=1, T=1.0, N=16))
        hs = np.diff(traj.t)
        assert np.allclose(hs, hs[0])
        assert traj.t[-1] == 1.0

    def test_alg_iterations_mode_tightens_constraint(self):
        preset = get_preset("circuit2:table1")
        dae = preset.build()
        base = solve(dae, preset.x0, SolverConfig(method=1, T=0.5, h=0.01))
        iterated = solve(dae, preset.x0,
                         SolverConfig(method=1, T=0.5, h=0.01, alg_iterations=4))
        # extra Newton sweeps pin u onto the constraint; the states move by
        # no more than the method's own O(h) error
        assert iterated.residuals[1:].max() < 1e-3 * base.residuals[1:].max()
        assert np.abs(base.x - iterated.x).max() < 1e-3

    def test_diagnostics_cadence(self):
        preset = get_preset("circuit2:table1")
        dae = preset.build()
        traj = solve(dae, preset.x0,
                     SolverConfig(method=1, T=0.5, h=0.05, diag_every=2))
        assert traj.diagnostics is not None
        assert traj.diagnostics["index"] == [1] * len(traj.diagnostics["t"])
        assert all(np.isfinite(c) for c in traj.diagnostics["phi_cond"])
        assert max(traj.diagnostics["projector_defect"]) < 1e-9


class TestFailureHandling:
    def test_singular_newton_gives_partial_trajectory(self):
        # f2 = t * x2 makes the algebraic update matrix diag(1, 1 - t):
        # exactly singular at the mesh point t = 1
        pencil = TimeVaryingPencil(
            dim=2, A=lambda t: np.diag([1.0, 0.0]), B=lambda t: np.eye(2),
            A_prime=lambda t: np.zeros((2, 2)),
        )
        dae = SemilinearDAE(
            pencil=pencil,
            f=lambda t, x: np.array([0.0, t * x[1]]),
            f_jac=lambda t, x: np.array([[0.0, 0.0], [0.0, t]]),
        )
        traj = solve(dae, np.array([1.0, 0.0]), SolverConfig(method=1, T=2.0, h=0.1))
        assert traj.status == "failed"
        assert "SingularNewtonMatrix" in traj.failure
        assert traj.failed_step == 10  # the step landing on t = 1.0
        assert traj.t.size == 10
        assert traj.t[-1] == pytest.approx(0.9)

    def test_index_too_high_refused(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        pencil = TimeVaryingPencil(
            dim=2, A=lambda t: A, B=lambda t: np.eye(2),
            A_prime=lambda t: np.zeros((2, 2)),
        )
        dae = SemilinearDAE(pencil=pencil, f=lambda t, x: np.zeros(2))
        with pytest.raises(IndexTooHigh):
            solve(dae, np.zeros(2), SolverConfig(method=1, T=1.0, h=0.1))


class TestConfigValidation:
    def test_method_validated(self):
        with pytest.raises(ValueError):
            SolverConfig(method=3, T=1.0, h=0.1).mesh()

    def test_needs_exactly_one_of_h_and_n(self):
        with pytest.raises(ValueError):
            SolverConfig(T=1.0).mesh()
        with pytest.raises(ValueError):
            SolverConfig(T=1.0, h=0.1, N=10).mesh()

    def test_h_must_divide_span(self):
        with pytest.raises(ValueError):
            SolverConfig(T=1.0, h=0.3).mesh()

    def test_interval_ordering(self):
        with pytest.raises(ValueError):
            SolverConfig(t0=1.0, T=0.5, h=0.1).mesh()
