"""Independent certificates for computed solutions.

Everything is recomputed from (problem, mesh, Q, u_k).  The only solver datum
used is delta_k, which depends on alpha_k and not on the mountain pass run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import eval_Ik
from .mesh import Mesh, StiffnessForm, lumped_load, weak_residual
from .model import ProblemSpec

TOL_RES = 1e-6
TOL_CLIP = 1e-9
TOL_ORDER = 1e-10


@dataclass
class SolutionCertificate:
    k: int
    norm_sq: float
    window: tuple[float, float]
    amplitude_range: tuple[float, float]
    residual_Pk: float
    residual_P: float
    level: float
    bracket: tuple[float, float]
    positivity_fraction: float
    zero_nodes: int
    clip_change: float
    residual_threshold: float
    checks: dict[str, bool]
    u: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "norm_sq": self.norm_sq,
            "window": list(self.window),
            "amplitude_range": list(self.amplitude_range),
            "residual_Pk": self.residual_Pk,
            "residual_P": self.residual_P,
            "residual_threshold": self.residual_threshold,
            "level": self.level,
            "bracket": list(self.bracket),
            "positivity_fraction": self.positivity_fraction,
            "zero_nodes": self.zero_nodes,
            "clip_change": self.clip_change,
            "checks": self.checks,
            "pass": self.passed,
        }


def certify_solution(problem: ProblemSpec, Q: StiffnessForm, mesh: Mesh, outcome,
                     tol_res: float = TOL_RES, tol_clip: float = TOL_CLIP) -> SolutionCertificate:
    """Check that u_k solves both (P_k) and (P) and obeys the a priori bounds.

    ``outcome`` needs ``k``, ``u_k`` and ``delta_k``.  Nodal values are clipped
    to [0, s_star]; a clip larger than ``tol_clip`` fails the amplitude check
    and everything else is evaluated on the clipped function.
    """
    T = problem.truncated(outcome.k)
    s_star = problem.f.s_star
    raw = mesh.check(outcome.u_k)
    u = np.clip(raw, 0.0, s_star)
    clip_change = float(np.max(np.abs(u - raw))) if raw.size else 0.0
    s = Q.norm_sq(u)
    a, b = T.interval

    res_k = weak_residual(Q, mesh, u, T.m_k(s), problem.f.truncated)
    res = weak_residual(Q, mesh, u, float(problem.m(s)), problem.f)
    scale = Q.dual_norm(lumped_load(mesh, u, problem.f.truncated))
    threshold = tol_res * max(1.0, scale)
    level = eval_Ik(T, Q, mesh, u).value
    delta = float(outcome.delta_k)

    checks = {
        "window": bool(a < s < b),
        "amplitude": bool(clip_change <= tol_clip and raw.min() >= -tol_clip and raw.max() <= s_star + tol_clip),
        "residual_Pk": bool(res_k < threshold),
        "residual_P": bool(res < threshold),
        "residual_consistency": bool(abs(res_k - res) < threshold),
        "level_bracket": bool(delta <= level < T.half_bump),
    }
    return SolutionCertificate(
        k=T.k,
        norm_sq=float(s),
        window=(a, b),
        amplitude_range=(float(raw.min()), float(raw.max())),
        residual_Pk=float(res_k),
        residual_P=float(res),
        level=float(level),
        bracket=(delta, T.half_bump),
        positivity_fraction=float(np.mean(u > 0.0)),
        zero_nodes=int(np.count_nonzero(u == 0.0)),
        clip_change=clip_change,
        residual_threshold=float(threshold),
        checks=checks,
        u=u,
    )


@dataclass
class FamilyCertificate:
    certificates: list[SolutionCertificate]
    ordering: list[dict]
    distinctness: dict[str, bool]

    @property
    def ordering_holds(self) -> bool:
        return all(link["holds"] for link in self.ordering)

    @property
    def passed(self) -> bool:
        return (
            bool(self.certificates)
            and all(c.passed for c in self.certificates)
            and self.ordering_holds
            and all(self.distinctness.values())
        )

    def to_dict(self) -> dict:
        return {
            "certificates": [c.to_dict() for c in self.certificates],
            "ordering": self.ordering,
            "distinctness": self.distinctness,
            "pass": self.passed,
        }


def certify_family(certs: list[SolutionCertificate]) -> FamilyCertificate:
    """0 < ||u_1||^2 < t_1 < ||u_2||^2 < ... < ||u_K||^2 < t_K, in list order."""
    chain: list[tuple[str, float]] = [("0", 0.0)]
    for c in certs:
        chain.append((f"||u_{c.k}||^2", c.norm_sq))
        chain.append((f"t_{c.k}", c.window[1]))
    t_K = certs[-1].window[1] if certs else 1.0
    tol = TOL_ORDER * t_K
    ordering = [
        {"lhs": l, "rhs": r, "holds": bool(lv + tol < rv)}
        for (l, lv), (r, rv) in zip(chain[:-1], chain[1:])
    ]
    distinct = {}
    for i, ci in enumerate(certs):
        for cj in certs[i + 1:]:
            distinct[f"{ci.k},{cj.k}"] = bool(np.any(ci.u != cj.u))
    return FamilyCertificate(list(certs), ordering, distinct)
