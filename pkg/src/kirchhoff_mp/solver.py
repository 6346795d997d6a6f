"""Mountain pass search for the truncated functionals I_k.

The path from 0 to e is a polyline with fixed endpoints.  Each outer
iteration takes the node p of maximal energy, moves it to the maximum of I_k
along the ray through p, and then takes one Armijo-controlled
steepest-descent step with the Riesz-lifted gradient, restricted to the
Q-orthogonal complement of that ray.  A step is accepted only if the ray
maximum of the moved node drops, so the path maximum is nonincreasing.

At a fixed point the gradient vanishes: the radial part by the ray
maximization, the rest by descent.  Only first derivatives are used.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .area import AlphaOptions, AlphaResult, compute_alphas
from .energy import eval_Ik, eval_Ik_value
from .mesh import Mesh, StiffnessForm, first_eigenfunction, weak_residual
from .model import ProblemSpec, TruncatedEnergy

log = logging.getLogger(__name__)


class MountainPassError(RuntimeError):
    """Base class; ``k`` is set when the failure belongs to one truncated problem."""

    k: int | None = None


class EndpointNotFound(MountainPassError):
    pass


class GeometryError(MountainPassError):
    pass


class PathCollapsed(MountainPassError):
    pass


class NonConvergence(MountainPassError):
    def __init__(self, message: str, outcome: "MountainPassOutcome"):
        super().__init__(message)
        self.outcome = outcome


@dataclass
class MountainPassConfig:
    path_points: int = 33
    tol_grad: float = 1e-8
    max_outer_iter: int = 20000
    descent_step_init: float = 1.0
    e_ray_direction: np.ndarray | None = None
    tau_max: float = 1e4
    tol_res: float = 1e-6
    sufficient_decrease: float = 1e-4
    backtrack: float = 0.5
    degenerate_eps: float = 1e-8
    degenerate_damping: float = 0.1
    geometry_dirs: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.path_points < 16:
            raise ValueError("path_points must be >= 16")
        if min(self.tol_grad, self.tol_res, self.descent_step_init, self.tau_max) <= 0:
            raise ValueError("tolerances, step and tau_max must be positive")
        if self.max_outer_iter < 1:
            raise ValueError("max_outer_iter must be >= 1")

    def ray_direction(self, Q: StiffnessForm) -> np.ndarray:
        if self.e_ray_direction is None:
            return first_eigenfunction(Q)
        phi = np.asarray(self.e_ray_direction, dtype=float)
        if np.any(phi < 0):
            raise ValueError("e_ray_direction must be nonnegative")
        return phi / np.sqrt(Q.norm_sq(phi))


@dataclass
class MountainPassOutcome:
    k: int
    u_k: np.ndarray
    c_k: float
    delta_k: float
    rho_k: float
    e: np.ndarray
    grad_dual_norm_at_uk: float
    outer_iterations: int
    residual: float
    norm_sq: float
    path_history_summary: list[tuple[int, float, int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "c_k": self.c_k,
            "delta_k": self.delta_k,
            "rho_k": self.rho_k,
            "norm_sq": self.norm_sq,
            "grad_dual_norm_at_uk": self.grad_dual_norm_at_uk,
            "residual": self.residual,
            "outer_iterations": self.outer_iterations,
        }


def _as_list(T):
    return list(T) if isinstance(T, (list, tuple)) else [T]


def construct_e(T, Q: StiffnessForm, mesh: Mesh, cfg: MountainPassConfig) -> np.ndarray:
    """e = tau * phi with I_k(e) <= 0 and ||e||^2 > t_k for every given k.

    ``T`` is one TruncatedEnergy or a sequence of them; the largest tau over
    the family is shared.  Past the sphere, tau -> I_k(tau phi) is
    nonincreasing, so the shared endpoint works for every k.
    """
    phi = cfg.ray_direction(Q)
    taus = []
    for Tk in _as_list(T):
        t_k = Tk.interval[1]
        tau = np.sqrt(t_k)
        while True:
            if tau * tau * Q.norm_sq(phi) > t_k and eval_Ik_value(Tk, Q, mesh, tau * phi) <= 0.0:
                break
            tau *= 2.0
            if tau > cfg.tau_max:
                err = EndpointNotFound(
                    f"MP endpoint not found for k={Tk.k}: I_k(tau phi) > 0 for all tau <= {cfg.tau_max:g}"
                )
                err.k = Tk.k
                raise err
        taus.append(tau)
    return max(taus) * phi


def verify_geometry(T: TruncatedEnergy, Q: StiffnessForm, mesh: Mesh, alpha: AlphaResult | float,
                    n_dirs: int = 16, seed: int = 0) -> tuple[float, float]:
    """rho_k = sqrt(t_k), delta_k = bump_integral/2 - alpha_k, with sphere spot checks."""
    a = alpha.alpha if isinstance(alpha, AlphaResult) else float(alpha)
    t_k = T.interval[1]
    rho, delta = float(np.sqrt(t_k)), T.half_bump - a
    if not delta > 0.0:
        err = GeometryError(f"area condition lower inequality fails for k={T.k}: delta_k = {delta:.6g}")
        err.k = T.k
        raise err
    rng = np.random.default_rng([seed, T.k, 7])
    tol = 1e-8 * (1.0 + T.bump_integral)
    dirs = [rng.standard_normal(mesh.interior_dof_count) for _ in range(n_dirs // 2)]
    dirs += [Q.solve(mesh.interior_weights * rng.random(mesh.interior_dof_count)) for _ in range(n_dirs - n_dirs // 2)]
    if isinstance(alpha, AlphaResult) and Q.norm_sq(alpha.maximizer) > 0:
        dirs.append(alpha.maximizer)
    for v in dirs:
        u = v * rho / np.sqrt(Q.norm_sq(v))
        val = eval_Ik_value(T, Q, mesh, u)
        if val < delta - tol:
            err = GeometryError(f"I_{T.k} = {val:.6g} < delta_k = {delta:.6g} on the sphere ||u|| = rho_k")
            err.k = T.k
            raise err
    return rho, delta


class _Path:
    """Polyline 0 -> p -> e sampled at ``n`` nodes, p being the current peak node.

    Nodes are redistributed uniformly in Q-arclength after every accepted
    move, with p kept as a node.
    """

    def __init__(self, T, Q, mesh, e, n):
        self.T, self.Q, self.mesh, self.e, self.n = T, Q, mesh, e, n
        self.nodes = [j / (n - 1) * e for j in range(n)]
        self.values = np.array([eval_Ik_value(T, Q, mesh, u) for u in self.nodes])

    def argmax(self) -> int:
        return int(np.argmax(self.values))  # first index on ties

    def rebuild(self, p, p_value):
        Q = self.Q
        l1 = np.sqrt(Q.norm_sq(p))
        l2 = np.sqrt(Q.norm_sq(self.e - p))
        inner = self.n - 3  # nodes besides 0, p, e
        n1 = int(round(inner * l1 / (l1 + l2)))
        n1 = min(max(n1, 1), inner - 1)
        n2 = inner - n1
        first = [j / (n1 + 1) * p for j in range(n1 + 1)]
        second = [p + j / (n2 + 1) * (self.e - p) for j in range(1, n2 + 2)]
        self.nodes = first + [p] + second
        vals = [eval_Ik_value(self.T, Q, self.mesh, u) for u in self.nodes]
        vals[n1 + 1] = p_value
        self.values = np.array(vals)
        return n1 + 1


def _ray_slope(T, Q, mesh, v, t):
    return float(eval_Ik(T, Q, mesh, t * v).gradient @ v)


def ray_max(T: TruncatedEnergy, Q: StiffnessForm, mesh: Mesh, v: np.ndarray, width: float = 0.05):
    """Local maximizer of t -> I_k(t v) nearest to t = 1, returned as t* v.

    The bracket grows geometrically from [1 - width, 1 + width] toward the
    side the slope at t = 1 points to, until the slope changes from + to -.
    """
    a = T.interval[0]
    vn = Q.norm_sq(v)
    t_min = np.sqrt(a / vn) if a > 0 else 0.0
    d1 = _ray_slope(T, Q, mesh, v, 1.0)
    if d1 == 0.0:
        return v.copy()
    lo, hi = 1.0, 1.0
    w = width
    for _ in range(60):
        if d1 > 0.0:
            hi = 1.0 + w
            if _ray_slope(T, Q, mesh, v, hi) < 0.0:
                break
            lo = hi
        else:
            lo = max(1.0 - w, t_min)
            if _ray_slope(T, Q, mesh, v, lo) > 0.0:
                break
            hi = lo
            if lo == t_min:
                raise PathCollapsed(f"k={T.k}: no ray maximum above the lower window edge")
        w *= 2.0
    else:
        raise PathCollapsed(f"k={T.k}: ray maximum not bracketed")
    t = brentq(lambda t: _ray_slope(T, Q, mesh, v, t), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return t * v


def mountain_pass_solve(T: TruncatedEnergy, Q: StiffnessForm, mesh: Mesh, e: np.ndarray,
                        cfg: MountainPassConfig, delta_k: float, trace: list | None = None) -> MountainPassOutcome:
    """Locate a mountain pass critical point of I_k on paths from 0 to e.

    ``delta_k`` comes from :func:`verify_geometry`.  When ``trace`` is a list,
    one ``(iteration, c_estimate, grad_norm, argmax)`` row is appended per
    outer iteration.
    """
    a, b = T.interval
    path = _Path(T, Q, mesh, e, cfg.path_points)
    N = cfg.path_points - 1
    history: list[tuple[int, float, int, float]] = []
    step = cfg.descent_step_init
    peak = None  # index of the node already sitting at its ray maximum
    it = 0
    for it in range(1, cfg.max_outer_iter + 1):
        i = path.argmax()
        if i == 0 or i == N:
            raise PathCollapsed(f"k={T.k}: path maximum sits at an endpoint (index {i})")
        if i != peak:
            u = ray_max(T, Q, mesh, path.nodes[i])
            i = path.rebuild(u, eval_Ik_value(T, Q, mesh, u))
            peak = i
        u = path.nodes[i]
        ev = eval_Ik(T, Q, mesh, u)
        c = ev.value
        r = Q.solve(ev.gradient)
        gnorm = float(np.sqrt(max(ev.gradient @ r, 0.0)))
        history.append((it, c, i, gnorm))
        if trace is not None:
            trace.append((it, c, gnorm, i))
        if c < 0.0:
            raise PathCollapsed(f"k={T.k}: path maximum dropped below 0 (c = {c:.6g})")
        if gnorm < cfg.tol_grad * (1.0 + abs(c)) or it == cfg.max_outer_iter:
            break

        radial = u / np.sqrt(ev.norm_sq)
        d = -(r - Q.inner(r, radial) * radial)
        decrease = Q.norm_sq(d)
        damp = cfg.degenerate_damping if min(ev.norm_sq - a, b - ev.norm_sq) < cfg.degenerate_eps * b else 1.0
        s = min(2.0 * step, 1e3 * cfg.descent_step_init) * damp
        while True:
            try:
                trial = ray_max(T, Q, mesh, u + s * d)
                tval = eval_Ik_value(T, Q, mesh, trial)
                if tval <= c - cfg.sufficient_decrease * s * decrease:
                    break
            except PathCollapsed:
                pass
            s *= cfg.backtrack
            if s < 1e-14 * cfg.descent_step_init:
                trial, tval = u, c
                break
        step = max(s / damp, 1e-8 * cfg.descent_step_init)
        peak = path.rebuild(trial, tval)

    i = peak if peak is not None else path.argmax()
    u_k = path.nodes[i]
    ev = eval_Ik(T, Q, mesh, u_k)
    gnorm = Q.dual_norm(ev.gradient)
    res = weak_residual(Q, mesh, u_k, T.m_k(ev.norm_sq), T.f.truncated)
    outcome = MountainPassOutcome(
        k=T.k, u_k=u_k, c_k=float(ev.value), delta_k=float(delta_k), rho_k=float(np.sqrt(b)), e=e,
        grad_dual_norm_at_uk=float(gnorm), outer_iterations=it, residual=float(res),
        norm_sq=float(ev.norm_sq), path_history_summary=history,
    )
    if not gnorm < cfg.tol_grad * (1.0 + abs(ev.value)):
        err = NonConvergence(f"k={T.k}: gradient norm {gnorm:.3e} after {it} outer iterations", outcome)
        err.k = T.k
        raise err
    tol = 1e-8 * (1.0 + T.bump_integral)
    if not (delta_k - tol <= outcome.c_k < T.half_bump):
        err = MountainPassError(
            f"k={T.k}: level {outcome.c_k:.10g} outside [delta_k, bump/2) = [{delta_k:.10g}, {T.half_bump:.10g})"
        )
        err.k = T.k
        raise err
    if not res < cfg.tol_res:
        err = NonConvergence(f"k={T.k}: weak residual {res:.3e} >= {cfg.tol_res:g}", outcome)
        err.k = T.k
        raise err
    log.info("k=%d: c_k=%.12g ||u||^2=%.12g after %d iterations", T.k, outcome.c_k, outcome.norm_sq, it)
    return outcome


class FamilySolveError(MountainPassError):
    """Some truncated problems failed; ``outcomes`` and ``errors`` are keyed by k."""

    def __init__(self, outcomes: dict[int, MountainPassOutcome], errors: dict[int, Exception]):
        msg = "; ".join(f"k={k}: {e}" for k, e in sorted(errors.items()))
        super().__init__(msg)
        self.outcomes = outcomes
        self.errors = errors


def solve_family(problem: ProblemSpec, Q: StiffnessForm, mesh: Mesh, cfg: MountainPassConfig | None = None,
                 alphas: list[AlphaResult] | None = None, alpha_opts: AlphaOptions | None = None,
                 traces: dict[int, list] | None = None) -> list[MountainPassOutcome]:
    """Solve every truncated problem k = 1..K with one shared endpoint e."""
    cfg = cfg or MountainPassConfig()
    if alphas is None:
        alphas = compute_alphas(problem, Q, mesh, alpha_opts)
    by_k = {a.k: a for a in alphas}
    Ts = [problem.truncated(k) for k in range(1, problem.K + 1)]
    errors: dict[int, Exception] = {}
    deltas: dict[int, float] = {}
    for T in Ts:
        try:
            deltas[T.k] = verify_geometry(T, Q, mesh, by_k[T.k], cfg.geometry_dirs, cfg.seed)[1]
        except MountainPassError as exc:
            errors[T.k] = exc
    usable = []
    for T in Ts:
        if T.k in errors:
            continue
        try:
            construct_e(T, Q, mesh, cfg)
            usable.append(T)
        except EndpointNotFound as exc:
            errors[T.k] = exc
    outcomes: dict[int, MountainPassOutcome] = {}
    if usable:
        e = construct_e(usable, Q, mesh, cfg)
        for T in usable:
            trace = None if traces is None else traces.setdefault(T.k, [])
            try:
                outcomes[T.k] = mountain_pass_solve(T, Q, mesh, e, cfg, deltas[T.k], trace)
            except MountainPassError as exc:
                exc.k = T.k
                errors[T.k] = exc
    if errors:
        raise FamilySolveError(outcomes, errors)
    ordered = [outcomes[k] for k in sorted(outcomes)]
    for i, oi in enumerate(ordered):
        for oj in ordered[i + 1:]:
            if not Q.norm_sq(oi.u_k - oj.u_k) > 0.0:
                raise MountainPassError(f"solutions for k={oi.k} and k={oj.k} coincide")
    return ordered
