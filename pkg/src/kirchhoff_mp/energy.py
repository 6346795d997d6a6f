"""Discrete energies I and I_k with their exact discrete gradients.

The gradient is stored as the coefficient vector of the linear functional
``v -> I'(u)[v]``; its Riesz lift is ``Q.solve(gradient)``.  Values and
gradients use the same lumped quadrature, so the gradient is the true
derivative of the discrete value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, StiffnessForm, integrate_composed, lumped_load
from .model import ProblemSpec, TruncatedEnergy


@dataclass
class EnergyEvaluation:
    value: float
    gradient: np.ndarray
    norm_sq: float


def eval_I(problem: ProblemSpec, Q: StiffnessForm, mesh: Mesh, u: np.ndarray) -> EnergyEvaluation:
    """I(u) = M(||u||^2)/2 - int F(u), with the untruncated m and f."""
    u = mesh.check(u)
    s = Q.norm_sq(u)
    Qu = Q.apply(u)
    value = 0.5 * float(problem.m.primitive(s)) - integrate_composed(mesh, u, problem.f.primitive)
    grad = float(problem.m(s)) * Qu - lumped_load(mesh, u, problem.f)
    return EnergyEvaluation(value, grad, s)


def eval_Ik(T: TruncatedEnergy, Q: StiffnessForm, mesh: Mesh, u: np.ndarray) -> EnergyEvaluation:
    """I_k(u) = M_k(||u||^2)/2 - int F_*(u).

    For ||u||^2 >= t_k the first term is exactly bump_integral/2.
    """
    u = mesh.check(u)
    s = Q.norm_sq(u)
    Qu = Q.apply(u)
    value = 0.5 * T.M_k(s) - integrate_composed(mesh, u, T.f.truncated_primitive)
    grad = T.m_k(s) * Qu - lumped_load(mesh, u, T.f.truncated)
    return EnergyEvaluation(value, grad, s)


def eval_Ik_value(T: TruncatedEnergy, Q: StiffnessForm, mesh: Mesh, u: np.ndarray) -> float:
    """Value only; skips the gradient assembly in line searches."""
    s = Q.norm_sq(u)
    return 0.5 * T.M_k(s) - integrate_composed(mesh, u, T.f.truncated_primitive)


def grad_norm(Q: StiffnessForm, g: np.ndarray) -> float:
    """Dual norm sqrt(g^T Q^{-1} g)."""
    return Q.dual_norm(g)
