import numpy as np
import pytest

from kirchhoff_mp.area import compute_alphas
from kirchhoff_mp.energy import eval_Ik, eval_Ik_value
from kirchhoff_mp.model import ProblemSpec, SineBumpM, SineF
from kirchhoff_mp.solver import (
    EndpointNotFound,
    FamilySolveError,
    GeometryError,
    MountainPassConfig,
    NonConvergence,
    construct_e,
    mountain_pass_solve,
    ray_max,
    solve_family,
    verify_geometry,
)

from conftest import CANONICAL_HEIGHTS, line


@pytest.fixture(scope="module")
def canonical_run():
    problem = ProblemSpec(SineBumpM([1.0, 4.0], CANONICAL_HEIGHTS), SineF(1.0))
    mesh, Q = line(64)
    alphas = compute_alphas(problem, Q, mesh)
    traces = {}
    outcomes = solve_family(problem, Q, mesh, MountainPassConfig(), alphas=alphas, traces=traces)
    return problem, mesh, Q, alphas, outcomes, traces


def test_config_validation():
    with pytest.raises(ValueError):
        MountainPassConfig(path_points=8)
    with pytest.raises(ValueError):
        MountainPassConfig(max_outer_iter=0)
    with pytest.raises(ValueError):
        MountainPassConfig(tol_grad=0.0)


def test_endpoint_is_past_every_sphere(canonical_problem, line64):
    mesh, Q = line64
    Ts = [canonical_problem.truncated(k) for k in (1, 2)]
    e = construct_e(Ts, Q, mesh, MountainPassConfig())
    assert np.all(e > 0)
    for T in Ts:
        assert Q.norm_sq(e) > T.interval[1]
        assert eval_Ik_value(T, Q, mesh, e) <= 0.0


def test_endpoint_not_found_with_small_tau_cap(canonical_problem, line64):
    mesh, Q = line64
    with pytest.raises(EndpointNotFound):
        construct_e(canonical_problem.truncated(2), Q, mesh, MountainPassConfig(tau_max=2.5))


def test_geometry_constants(canonical_run):
    problem, mesh, Q, alphas, _, _ = canonical_run
    for a in alphas:
        T = problem.truncated(a.k)
        rho, delta = verify_geometry(T, Q, mesh, a)
        assert rho == pytest.approx(np.sqrt(T.interval[1]))
        assert delta == pytest.approx(T.half_bump - a.alpha)
        assert delta > 0


def test_geometry_error_when_alpha_too_large(canonical_problem, line64):
    mesh, Q = line64
    T = canonical_problem.truncated(1)
    with pytest.raises(GeometryError, match="lower inequality"):
        verify_geometry(T, Q, mesh, T.half_bump + 0.01)


def test_ray_max_is_stationary_along_ray(canonical_problem, line64):
    mesh, Q = line64
    T = canonical_problem.truncated(1)
    v = mesh.interpolate(lambda x: np.sin(np.pi * x))
    v *= np.sqrt(0.8 / Q.norm_sq(v))  # past the dip of I_1 near 0, where m(0) = 0
    u = ray_max(T, Q, mesh, v)
    ev = eval_Ik(T, Q, mesh, u)
    assert abs(ev.gradient @ u) < 1e-12
    assert T.interval[0] < ev.norm_sq < T.interval[1]


def test_outcomes_satisfy_level_bracket(canonical_run):
    problem, mesh, Q, _, outcomes, _ = canonical_run
    assert [o.k for o in outcomes] == [1, 2]
    for o in outcomes:
        T = problem.truncated(o.k)
        a, b = T.interval
        assert o.delta_k <= o.c_k < T.half_bump
        assert a < o.norm_sq < b
        assert o.grad_dual_norm_at_uk < 1e-8 * (1 + o.c_k)
        assert o.residual < 1e-6
        assert o.u_k.min() > 0 and o.u_k.max() < 1.0


def test_frozen_levels(canonical_run):
    *_, outcomes, _ = canonical_run
    np.testing.assert_allclose([o.c_k for o in outcomes], [0.2520905, 0.1286777], atol=1e-6)
    np.testing.assert_allclose([o.norm_sq for o in outcomes], [0.93427, 3.8051], atol=1e-4)


def test_path_maximum_is_nonincreasing(canonical_run):
    *_, outcomes, traces = canonical_run
    for o in outcomes:
        c = np.array([h[1] for h in o.path_history_summary])
        assert np.all(np.diff(c) <= 1e-12 * (1 + c[0]))
        assert len(traces[o.k]) == len(c)


def test_single_bump_family():
    problem = ProblemSpec(SineBumpM([1.0], [CANONICAL_HEIGHTS[0]]), SineF(1.0))
    mesh, Q = line(32)
    (o,) = solve_family(problem, Q, mesh)
    assert o.k == 1 and 0 < o.norm_sq < 1.0


def test_only_failing_k_is_reported(line64):
    # Second half bump 0.3 lies below alpha_2 ~ 0.389; k = 1 must still be solved.
    problem = ProblemSpec(SineBumpM([1.0, 4.0], [CANONICAL_HEIGHTS[0], 0.1 * np.pi]), SineF(1.0))
    mesh, Q = line64
    with pytest.raises(FamilySolveError) as info:
        solve_family(problem, Q, mesh)
    assert set(info.value.outcomes) == {1}
    assert set(info.value.errors) == {2}
    assert isinstance(info.value.errors[2], GeometryError)


def test_iteration_cap_raises_nonconvergence(canonical_problem, line64):
    mesh, Q = line64
    cfg = MountainPassConfig(max_outer_iter=1)
    T = canonical_problem.truncated(1)
    alphas = compute_alphas(canonical_problem, Q, mesh)
    _, delta = verify_geometry(T, Q, mesh, alphas[0])
    e = construct_e(T, Q, mesh, cfg)
    with pytest.raises(NonConvergence) as info:
        mountain_pass_solve(T, Q, mesh, e, cfg, delta)
    assert info.value.outcome.outer_iterations == 1
    assert info.value.k == 1
