"""P1 finite elements on intervals and axis-aligned rectangles.

The discrete space is the span of piecewise-linear hat functions attached to
interior nodes, so homogeneous Dirichlet data is built in.  Grid functions are
plain ``numpy`` vectors indexed by interior degrees of freedom.

Nonlinear integrands use the per-element trapezoidal rule on nodal values
(mass lumping), which keeps loads diagonal and sign preserving.
"""

from __future__ import annotations

from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_solve_banded, cholesky_banded


class MeshError(ValueError):
    """Raised for invalid or degenerate meshes."""


class Mesh:
    """Tensor grid of P1 simplices on ``[0, L_1] x ... x [0, L_d]``, d in {1, 2}.

    Each 2D cell is split into two triangles along its (i, j)-(i+1, j+1)
    diagonal.  ``nodes_per_axis`` counts boundary nodes, so an axis with
    ``n`` nodes has ``n - 1`` elements and ``n - 2`` interior nodes.
    """

    def __init__(self, extents: Sequence[float], nodes_per_axis: Sequence[int]):
        extents = tuple(float(L) for L in np.atleast_1d(extents))
        nodes_per_axis = tuple(int(n) for n in np.atleast_1d(nodes_per_axis))
        if len(extents) not in (1, 2) or len(extents) != len(nodes_per_axis):
            raise MeshError("extents and nodes_per_axis must both have length 1 or 2")
        if any(n < 3 for n in nodes_per_axis):
            raise MeshError("nodes_per_axis must be >= 3 on every axis (no interior DOF)")
        if not all(np.isfinite(L) for L in extents):
            raise MeshError("extents must be finite")
        self.dimension = len(extents)
        self.extents = extents
        self.nodes_per_axis = nodes_per_axis

        axes = [np.linspace(0.0, L, n) for L, n in zip(extents, nodes_per_axis)]
        if self.dimension == 1:
            self.coordinates = axes[0][:, None]
            idx = np.arange(nodes_per_axis[0])
            self.elements = np.column_stack([idx[:-1], idx[1:]])
            boundary = np.zeros(nodes_per_axis[0], dtype=bool)
            boundary[[0, -1]] = True
        else:
            nx, ny = nodes_per_axis
            X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
            self.coordinates = np.column_stack([X.ravel(), Y.ravel()])
            node = np.arange(nx * ny).reshape(ny, nx)
            a = node[:-1, :-1].ravel()
            b = node[:-1, 1:].ravel()
            c = node[1:, 1:].ravel()
            d = node[1:, :-1].ravel()
            self.elements = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
            boundary = np.zeros((ny, nx), dtype=bool)
            boundary[[0, -1], :] = True
            boundary[:, [0, -1]] = True
            boundary = boundary.ravel()

        self.boundary_mask = boundary
        self.interior_nodes = np.flatnonzero(~boundary)
        self.interior_dof_count = self.interior_nodes.size
        self._dof_of_node = np.full(self.node_count, -1)
        self._dof_of_node[self.interior_nodes] = np.arange(self.interior_dof_count)

        self.volumes = self._element_volumes()
        if np.any(self.volumes <= 0.0):
            raise MeshError("degenerate element with non-positive volume")

    @property
    def node_count(self) -> int:
        return self.coordinates.shape[0]

    @property
    def measure(self) -> float:
        """|Omega|."""
        return float(np.prod(self.extents))

    def _element_volumes(self) -> np.ndarray:
        X = self.coordinates[self.elements]  # (n_el, d+1, d)
        edges = X[:, 1:, :] - X[:, :1, :]
        if self.dimension == 1:
            return edges[:, 0, 0]
        return 0.5 * np.linalg.det(edges)

    @cached_property
    def node_weights(self) -> np.ndarray:
        """Lumped mass per node (boundary nodes included): sum of |T|/(d+1)."""
        w = np.zeros(self.node_count)
        share = self.volumes / (self.dimension + 1)
        for v in range(self.dimension + 1):
            np.add.at(w, self.elements[:, v], share)
        return w

    @cached_property
    def interior_weights(self) -> np.ndarray:
        return self.node_weights[self.interior_nodes]

    def check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.interior_dof_count,):
            raise ValueError(
                f"grid function has shape {u.shape}, expected ({self.interior_dof_count},)"
            )
        return u

    def extend(self, u: np.ndarray) -> np.ndarray:
        """Nodal values on all nodes, zero on the boundary."""
        full = np.zeros(self.node_count)
        full[self.interior_nodes] = self.check(u)
        return full

    def interpolate(self, func: Callable[..., np.ndarray]) -> np.ndarray:
        """Nodal interpolant of ``func(x[, y])`` restricted to interior DOFs."""
        pts = self.coordinates[self.interior_nodes]
        return np.asarray(func(*pts.T), dtype=float) * np.ones(self.interior_dof_count)

    def element_gradients(self) -> np.ndarray:
        """Gradients of the barycentric hats, shape (n_el, d+1, d)."""
        X = self.coordinates[self.elements]
        n_el, nv, d = X.shape
        T = np.concatenate([np.ones((n_el, nv, 1)), X], axis=2)
        return np.linalg.inv(T)[:, 1:, :].transpose(0, 2, 1)


class StiffnessForm:
    """The Dirichlet form Q(u, v) = int grad u_h . grad v_h restricted to interior DOFs.

    Linear solves go through a banded Cholesky factor computed once.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        G = mesh.element_gradients()
        local = mesh.volumes[:, None, None] * np.einsum("eid,ejd->eij", G, G)
        rows = np.repeat(mesh.elements, mesh.dimension + 1, axis=1)
        cols = np.tile(mesh.elements, (1, mesh.dimension + 1))
        full = sp.coo_matrix(
            (local.ravel(), (rows.ravel(), cols.ravel())),
            shape=(mesh.node_count, mesh.node_count),
        ).tocsr()
        idx = mesh.interior_nodes
        A = full[idx][:, idx].tocsr()
        A.eliminate_zeros()
        self.matrix = A

        coo = A.tocoo()
        upper = coo.col >= coo.row
        bw = int(np.max(coo.col[upper] - coo.row[upper]))
        n = A.shape[0]
        ab = np.zeros((bw + 1, n))
        r, c = coo.row[upper], coo.col[upper]
        ab[bw + r - c, c] = coo.data[upper]
        try:
            self._factor = cholesky_banded(ab, lower=False)
        except np.linalg.LinAlgError as exc:
            raise MeshError("stiffness form is not positive definite") from exc

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ self.mesh.check(u)

    def solve(self, g: np.ndarray) -> np.ndarray:
        """Riesz lift: the w with Q(w, .) = g."""
        return cho_solve_banded((self._factor, False), self.mesh.check(g))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(self.mesh.check(u) @ (self.matrix @ self.mesh.check(v)))

    def norm_sq(self, u: np.ndarray) -> float:
        return self.inner(u, u)

    def dual_norm(self, g: np.ndarray) -> float:
        g = self.mesh.check(g)
        return float(np.sqrt(max(g @ self.solve(g), 0.0)))


def assemble_stiffness(mesh: Mesh) -> StiffnessForm:
    return StiffnessForm(mesh)


def h01_norm_sq(Q: StiffnessForm, u: np.ndarray) -> float:
    """||u||^2 = |grad u|_2^2, exact for piecewise-linear u."""
    return Q.norm_sq(u)


def _apply(g: Callable, values: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(g(values), dtype=float), values.shape)


def integrate_composed(mesh: Mesh, u: np.ndarray, g: Callable) -> float:
    """Lumped approximation of int_Omega g(u_h) dx (boundary nodes carry u = 0)."""
    full = mesh.extend(u)
    return float(mesh.node_weights @ _apply(g, full))


def lumped_load(mesh: Mesh, u: np.ndarray, g: Callable) -> np.ndarray:
    """Coefficients of v -> int g(u_h) v dx under the same lumped rule."""
    u = mesh.check(u)
    return mesh.interior_weights * _apply(g, u)


def weak_residual(Q: StiffnessForm, mesh: Mesh, u: np.ndarray, coeff: float, g: Callable) -> float:
    """Dual norm of v -> coeff * Q(u, v) - int g(u) v dx."""
    if not np.isfinite(coeff):
        raise ValueError("coefficient must be finite")
    r = coeff * Q.apply(u) - lumped_load(mesh, u, g)
    return Q.dual_norm(r)


def first_eigenfunction(Q: StiffnessForm) -> np.ndarray:
    """Lowest discrete Dirichlet eigenvector (Q v = mu M v), positive, unit H^1_0 norm."""
    from scipy.linalg import eigh

    w = Q.mesh.interior_weights
    _, vecs = eigh(Q.matrix.toarray(), np.diag(w), subset_by_index=[0, 0])
    v = vecs[:, 0]
    v = v * np.sign(v.sum())
    v = np.clip(v, 0.0, None)
    return v / np.sqrt(Q.norm_sq(v))
