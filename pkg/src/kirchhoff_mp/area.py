"""alpha_k = max of int F_*(u) over the ball ||u||^2 <= t_k, and the area condition.

The maximization is nonconcave.  We run projected gradient ascent in the
H^1_0 metric from several nonnegative starts and keep the best value; the
spread over starts is reported so multimodality stays visible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, StiffnessForm, first_eigenfunction, integrate_composed, lumped_load
from .model import ProblemSpec, TruncatedEnergy

TOL_BALL = 1e-12


class AlphaNotConverged(RuntimeError):
    """No ascent start reached projected stationarity; carries the best result so far."""

    def __init__(self, message: str, best: "AlphaResult"):
        super().__init__(message)
        self.best = best


@dataclass
class AlphaOptions:
    starts: int = 8
    tol_grad: float = 1e-9
    max_iter: int = 5000
    seed: int = 0
    sufficient_increase: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self):
        if self.starts < 3:
            raise ValueError("at least 3 ascent starts are required")
        if self.tol_grad <= 0 or self.max_iter < 1:
            raise ValueError("tol_grad must be positive and max_iter >= 1")


@dataclass
class AlphaResult:
    k: int
    alpha: float
    maximizer: np.ndarray
    multistart_spread: float
    iterations: int
    radius_sq: float
    stationarity: float
    converged: bool
    norm_fraction: float = 0.0
    start_values: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "multistart_spread": self.multistart_spread,
            "iterations": self.iterations,
            "radius_sq": self.radius_sq,
            "maximizer_norm_fraction": self.norm_fraction,
            "stationarity": self.stationarity,
            "converged": self.converged,
            "start_values": self.start_values,
        }


def project_ball(Q: StiffnessForm, u: np.ndarray, radius_sq: float) -> np.ndarray:
    """Radial projection onto {||u||^2 <= radius_sq}."""
    if radius_sq <= 0:
        raise ValueError("radius_sq must be positive")
    s = Q.norm_sq(u)
    if s <= radius_sq:
        return np.array(u, dtype=float)
    return u * np.sqrt(radius_sq / s)


def _ascend(f, Q, mesh, u0, radius_sq, opts: AlphaOptions):
    """Projected ascent with Armijo backtracking along the projection arc."""
    J = lambda v: integrate_composed(mesh, v, f.truncated_primitive)
    u = project_ball(Q, u0, radius_sq)
    val = J(u)
    step = None
    stat = np.inf
    for it in range(opts.max_iter + 1):
        g = lumped_load(mesh, u, f.truncated)
        r = Q.solve(g)
        stat = np.sqrt(Q.norm_sq(project_ball(Q, u + r, radius_sq) - u))
        if stat < opts.tol_grad:
            return u, val, it, stat, True
        if it == opts.max_iter:
            break
        rn = np.sqrt(max(Q.norm_sq(r), 0.0))
        s = 1.0 / rn if step is None else 2.0 * step
        while True:
            trial = project_ball(Q, u + s * r, radius_sq)
            tval = J(trial)
            if tval >= val + opts.sufficient_increase * float(g @ (trial - u)) and tval >= val:
                break
            s *= opts.backtrack
            if s * rn < 1e-16:
                return u, val, it, stat, False
        u, val, step = trial, tval, s
    return u, val, opts.max_iter, stat, False


def _starts(f, Q, mesh, radius_sq, opts: AlphaOptions, k: int, previous: np.ndarray | None):
    starts = [np.sqrt(radius_sq) * first_eigenfunction(Q)]
    if previous is not None:
        starts.append(project_ball(Q, previous * np.sqrt(radius_sq / max(Q.norm_sq(previous), 1e-300)), radius_sq))
    rng = np.random.default_rng([opts.seed, k])
    w = mesh.interior_weights
    while len(starts) < opts.starts:
        v = Q.solve(w * rng.random(mesh.interior_dof_count))
        starts.append(v * np.sqrt(0.99 * radius_sq / Q.norm_sq(v)))
    return starts


def compute_alpha(
    T: TruncatedEnergy,
    Q: StiffnessForm,
    mesh: Mesh,
    opts: AlphaOptions | None = None,
    previous: np.ndarray | None = None,
) -> AlphaResult:
    """alpha_k by multistart projected ascent.

    ``previous`` is the maximizer for k - 1; it is rescaled to the larger
    sphere and used as one start, which makes the computed alphas
    nondecreasing in k.
    """
    opts = opts or AlphaOptions()
    radius_sq = T.interval[1]
    runs = [_ascend(T.f, Q, mesh, u0, radius_sq, opts) for u0 in _starts(T.f, Q, mesh, radius_sq, opts, T.k, previous)]
    values = [r[1] for r in runs]
    best = int(np.argmax(values))
    u, val, its, stat, conv = runs[best]
    conv_any = any(r[4] for r in runs)
    if not conv and conv_any:
        # prefer a converged start when it ties the best value
        cand = [i for i, r in enumerate(runs) if r[4] and r[1] >= val - opts.tol_grad]
        if cand:
            best = cand[0]
            u, val, its, stat, conv = runs[best]
    result = AlphaResult(
        k=T.k,
        alpha=float(val),
        maximizer=u,
        multistart_spread=float(max(values) - min(values)),
        iterations=int(its),
        radius_sq=float(radius_sq),
        stationarity=float(stat),
        converged=conv_any,
        norm_fraction=Q.norm_sq(u) / radius_sq,
        start_values=[float(v) for v in values],
    )
    if not conv_any:
        raise AlphaNotConverged(f"alpha_{T.k}: no start reached projected stationarity", result)
    return result


def compute_alphas(problem: ProblemSpec, Q: StiffnessForm, mesh: Mesh, opts: AlphaOptions | None = None) -> list[AlphaResult]:
    out: list[AlphaResult] = []
    prev = None
    for k in range(1, problem.K + 1):
        res = compute_alpha(problem.truncated(k), Q, mesh, opts, previous=prev)
        out.append(res)
        prev = res.maximizer
    return out


def brute_force_alpha(f, Q: StiffnessForm, mesh: Mesh, radius_sq: float, points: int = 41, levels: int = 10) -> float:
    """Lattice search for alpha on meshes with at most 4 interior DOFs.

    A lattice over the bounding box of the ellipsoid is refined around the
    incumbent ``levels`` times; each refinement spans +-5 old spacings, so the
    spacing shrinks by (points - 1) / 10.
    """
    n = mesh.interior_dof_count
    if n > 4:
        raise ValueError("brute force search is limited to 4 interior DOFs")
    A = Q.matrix.toarray()
    w = mesh.interior_weights
    half = np.sqrt(radius_sq * np.diag(np.linalg.inv(A)))
    lo, hi = -half, half
    best_val, best_u = 0.0, np.zeros(n)
    for _ in range(levels):
        axes = [np.linspace(lo[i], hi[i], points) for i in range(n)]
        grid = np.array(list(itertools.product(*axes)))
        quad = np.einsum("pi,ij,pj->p", grid, A, grid)
        grid = grid[quad <= radius_sq * (1 + TOL_BALL)]
        if grid.size:
            vals = f.truncated_primitive(grid) @ w
            i = int(np.argmax(vals))
            if vals[i] > best_val:
                best_val, best_u = float(vals[i]), grid[i]
        spacing = (hi - lo) / (points - 1)
        lo, hi = best_u - 5 * spacing, best_u + 5 * spacing
    return best_val


def tuned_sine_bump_heights(zeros, alphas, upper: float) -> np.ndarray:
    """Sine-bump heights putting each half bump midway between alpha_k and ``upper``.

    With m = h_k sin(...) on (t_{k-1}, t_k) the half bump is h_k (t_k - t_{k-1}) / pi.
    """
    z = np.concatenate([[0.0], np.asarray(zeros, dtype=float)])
    width = np.diff(z)
    return np.pi * (np.asarray(alphas, dtype=float) + upper) / (2.0 * width)


@dataclass
class AreaRecord:
    k: int
    alpha: float
    half_bump: float
    upper: float
    passed: bool

    @property
    def lower_margin(self) -> float:
        return self.half_bump - self.alpha

    @property
    def upper_margin(self) -> float:
        return self.upper - self.half_bump

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "half_bump": self.half_bump,
            "upper": self.upper,
            "lower_margin": self.lower_margin,
            "upper_margin": self.upper_margin,
            "pass": self.passed,
        }


@dataclass
class AreaVerdict:
    records: list[AreaRecord]

    @property
    def overall(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self) -> dict:
        return {"overall": self.overall, "records": [r.to_dict() for r in self.records]}


def check_area_condition(problem: ProblemSpec, Q: StiffnessForm, mesh: Mesh, alphas: list[AlphaResult]) -> AreaVerdict:
    """alpha_k < half_bump_k < F(s_star) |Omega| for every k."""
    if sorted(a.k for a in alphas) != list(range(1, problem.K + 1)):
        raise ValueError("need one AlphaResult per k = 1..K")
    upper = problem.f.F_at_s_star * mesh.measure
    records = []
    for a in sorted(alphas, key=lambda a: a.k):
        half = problem.truncated(a.k).half_bump
        records.append(AreaRecord(a.k, a.alpha, half, upper, bool(a.alpha < half < upper)))
    return AreaVerdict(records)
