"""Acceptance criteria 1-9, each with its runtime budget.

Every test records one PASS/FAIL line; the lines are printed at the end of
the pytest run (see ``conftest.pytest_terminal_summary``) and also when the
module is executed directly.
"""

import contextlib
import copy
import json
import time

import numpy as np
import pytest

from kirchhoff_mp import cli
from kirchhoff_mp.area import brute_force_alpha, check_area_condition, compute_alphas
from kirchhoff_mp.config import bundled_config, load_config, parse_config
from kirchhoff_mp.energy import eval_I, eval_Ik, eval_Ik_value
from kirchhoff_mp.mesh import Mesh, StiffnessForm, integrate_composed
from kirchhoff_mp.model import ProblemSpec, SineBumpM, SineF
from kirchhoff_mp.solver import solve_family

RESULTS: dict[int, str] = {}
UPPER = 2 / np.pi


@contextlib.contextmanager
def criterion(n, title, budget):
    t0 = time.perf_counter()
    detail = ""
    try:
        yield
    except BaseException as exc:
        detail = f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        RESULTS[n] = f"FAIL [{n}] {title} ({time.perf_counter() - t0:.2f}s) {detail}"
        raise
    elapsed = time.perf_counter() - t0
    ok = elapsed < budget
    RESULTS[n] = f"{'PASS' if ok else 'FAIL'} [{n}] {title} ({elapsed:.2f}s, budget {budget:g}s)"
    print(RESULTS[n])
    assert ok, f"runtime {elapsed:.2f}s exceeds {budget}s"


def canonical():
    return json.loads(bundled_config("canonical").read_text())


def problem_from(data):
    cfg = parse_config(data)
    mesh = cfg.build_mesh()
    return cfg, mesh, StiffnessForm(mesh), cfg.build_problem()


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def line_mesh(n_elements):
    mesh = Mesh([1.0], [n_elements + 1])
    return mesh, StiffnessForm(mesh)


def test_criterion_1_hypothesis_gate(tmp_path):
    base = canonical()
    cases = {
        "decreasing zeros": ({"zeros": [4.0, 1.0]}, cli.EXIT_CONFIG),
        "f(s_star) != 0": ({"f": {"family": "polynomial", "coefficients": [1.0, -0.5]}}, cli.EXIT_HYPOTHESIS),
        "m negative on a bump": ({"m": {"family": "sine-bump", "heights": [1.0, -0.5]}}, cli.EXIT_HYPOTHESIS),
        "s_star <= 0": ({"s_star": -1.0}, cli.EXIT_CONFIG),
        "zero-measure mesh": ({"domain": {"dimension": 1, "extents": [0.0], "nodes_per_axis": [65]}}, cli.EXIT_CONFIG),
    }
    with criterion(1, "hypothesis gate", 1.0):
        code, _ = cli.cmd_validate(bundled_config("canonical"), report_path=tmp_path / "ok.json")
        assert code == cli.EXIT_OK
        for i, (name, (change, expected)) in enumerate(cases.items()):
            path = write(tmp_path, f"bad{i}.json", {**copy.deepcopy(base), **change})
            code, rep = cli.cmd_validate(path, report_path=tmp_path / f"bad{i}.report.json")
            assert code == expected, f"{name}: exit {code}, expected {expected}: {rep['status']['message']}"


def test_criterion_2_alpha_suite():
    base = canonical()
    with criterion(2, "alpha ordering and lattice oracle", 30.0):
        _, _, _, problem = problem_from(base)
        for n in (16, 32, 64):
            mesh, Q = line_mesh(n)
            a1, a2 = (a.alpha for a in compute_alphas(problem, Q, mesh))
            assert 0 + 1e-8 < a1 < a2 - 1e-8 and a2 + 1e-8 < UPPER, (n, a1, a2)
        mesh, Q = line_mesh(4)
        assert mesh.interior_dof_count == 3
        for a in compute_alphas(problem, Q, mesh):
            oracle = brute_force_alpha(problem.f, Q, mesh, a.radius_sq)
            assert abs(a.alpha - oracle) < 1e-3, (a.k, a.alpha, oracle)


def test_criterion_3_area_condition():
    with criterion(3, "area condition verdicts and margins", 10.0):
        _, mesh, Q, problem = problem_from(canonical())
        verdict = check_area_condition(problem, Q, mesh, compute_alphas(problem, Q, mesh))
        assert verdict.overall
        assert all(r.lower_margin > 0 and r.upper_margin > 0 for r in verdict.records)

        upper_bad = ProblemSpec(SineBumpM([1.0, 4.0], [3.0, problem.m.heights[1]]), SineF(1.0))
        v = check_area_condition(upper_bad, Q, mesh, compute_alphas(upper_bad, Q, mesh))
        assert not v.overall and v.records[0].upper_margin < 0 < v.records[0].lower_margin

        t1 = 400.0
        lower_bad = ProblemSpec(SineBumpM([t1], [0.3 * np.pi / t1]), SineF(1.0))
        v = check_area_condition(lower_bad, Q, mesh, compute_alphas(lower_bad, Q, mesh))
        assert not v.overall and v.records[0].lower_margin < 0 < v.records[0].upper_margin


def _fd(fun, u, h=1e-6):
    # second-order one-sided stencil; stays on one side of ||u||^2 = t_k
    f0 = fun(u)
    g = np.empty_like(u)
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h
        g[i] = (-3 * f0 + 4 * fun(u + e) - fun(u + 2 * e)) / (2 * h)
    return g


def _points(Q, rng, a, b, count=20):
    targets = list(a + (b - a) * rng.uniform(0.05, 0.95, 8))  # inside
    targets += [max(a, 1e-3), b] * 2  # at the window edges
    targets += list(rng.uniform(0.0, max(a, 0.5), 3)) + list(b * rng.uniform(1.05, 3.0, count - 15))
    for s in targets:
        v = rng.random(Q.size) + 0.05 + 0.2 * rng.standard_normal(Q.size)
        yield v * np.sqrt(s / Q.norm_sq(v))


def test_criterion_4_gradients():
    with criterion(4, "gradients vs finite differences", 5.0):
        _, _, _, problem = problem_from(canonical())
        mesh, Q = line_mesh(32)
        rng = np.random.default_rng(4)
        worst = 0.0
        for u in _points(Q, rng, 0.0, 4.0):
            ev = eval_I(problem, Q, mesh, u)
            fd = _fd(lambda v: eval_I(problem, Q, mesh, v).value, u)
            worst = max(worst, np.linalg.norm(fd - ev.gradient) / np.linalg.norm(ev.gradient))
        for k in (1, 2):
            T = problem.truncated(k)
            for u in _points(Q, rng, *T.interval):
                g = eval_Ik(T, Q, mesh, u).gradient
                fd = _fd(lambda v: eval_Ik_value(T, Q, mesh, v), u)
                worst = max(worst, np.linalg.norm(fd - g) / np.linalg.norm(g))
        assert worst < 1e-5, worst


def test_criterion_5_plateau_identity():
    with criterion(5, "I_k = bump/2 - int F_*(u) beyond t_k", 1.0):
        _, mesh, Q, problem = problem_from(canonical())
        rng = np.random.default_rng(5)
        for k in (1, 2):
            T = problem.truncated(k)
            t_k = T.interval[1]
            for _ in range(100):
                u = rng.standard_normal(Q.size)
                u *= np.sqrt(t_k * rng.uniform(1.0, 10.0) / Q.norm_sq(u))
                val = eval_Ik_value(T, Q, mesh, u)
                ref = 0.5 * T.bump_integral - integrate_composed(mesh, u, T.f.truncated_primitive)
                assert abs(val - ref) < 1e-12 * (1 + abs(val))


def test_criterion_6_end_to_end(tmp_path):
    with criterion(6, "end-to-end solve, canonical K=2", 120.0):
        code, rep = cli.cmd_solve(bundled_config("canonical"), report_path=tmp_path / "report.json")
        assert code == cli.EXIT_OK, rep["status"]
        fam = rep["family"]
        assert fam["pass"]
        c1, c2 = fam["certificates"]
        t1, t2 = c1["window"][1], c2["window"][1]
        margin = 1e-6 * t2
        chain = [0.0, c1["norm_sq"], t1, c2["norm_sq"], t2]
        assert all(b - a > margin for a, b in zip(chain, chain[1:])), chain
        for c in (c1, c2):
            assert 0.0 <= c["amplitude_range"][0] and c["amplitude_range"][1] <= 1.0
            assert c["residual_P"] < 1e-6 and c["residual_Pk"] < 1e-6
            lo, hi = c["bracket"]
            assert lo <= c["level"] < hi


def test_criterion_7_level_stability():
    with criterion(7, "level stability under refinement", 300.0):
        base = canonical()
        fine = copy.deepcopy(base)
        fine["domain"]["nodes_per_axis"] = [2 * (base["domain"]["nodes_per_axis"][0] - 1) + 1]
        fine["solver"] = {**base.get("solver", {}), "path_points": 2 * base["solver"]["path_points"]}
        runs = []
        for data in (base, fine):
            cfg, mesh, Q, problem = problem_from(data)
            runs.append(solve_family(problem, Q, mesh, cfg.mp_config(), alpha_opts=cfg.alpha_options()))
        for a, b in zip(*runs):
            T = problem.truncated(a.k)
            assert abs(a.c_k - b.c_k) < 1e-3 * T.bump_integral, (a.k, a.c_k, b.c_k)
            assert abs(a.norm_sq - b.norm_sq) < 1e-2 * T.interval[1], (a.k, a.norm_sq, b.norm_sq)


def test_criterion_8_square(tmp_path):
    with criterion(8, "2D smoke test on the unit square", 300.0):
        path = bundled_config("smoke_2d")
        cfg = load_config(path)
        assert cfg.data["domain"]["nodes_per_axis"] == [9, 9]
        code, rep = cli.cmd_solve(path, report_path=tmp_path / "sq.json")
        assert code == cli.EXIT_OK, rep["status"]
        (c,) = rep["family"]["certificates"]
        assert c["pass"]
        assert c["window"][0] < c["norm_sq"] < c["window"][1]
        assert 0.0 <= c["amplitude_range"][0] and c["amplitude_range"][1] <= cfg.data["s_star"]
        assert c["residual_P"] < 1e-5 and c["residual_Pk"] < 1e-5
        assert c["bracket"][0] <= c["level"] < c["bracket"][1]


def test_criterion_9_determinism(tmp_path):
    with criterion(9, "byte-identical reports", 60.0):
        blobs = []
        for run in ("a", "b"):
            report = tmp_path / run / "report.json"
            code, _ = cli.cmd_solve(bundled_config("canonical"), seed=0, report_path=report)
            assert code == cli.EXIT_OK
            blobs.append(report.read_bytes())
        assert blobs[0] == blobs[1]


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
