"""H2-conforming finite elements on (0, 1) with weighted-form assembly.

Hermite cubic elements carry (value, slope) unknowns per node, so trial
functions are C1 and the bending integral of two second derivatives is
well defined.  The default trial space is clamped (value and slope pinned
at both endpoints); a value-only constrained space is available for
problems posed in H0^1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class MeshError(ValueError):
    """Invalid discretization request."""


class AssemblyError(ArithmeticError):
    """Non-finite data encountered during quadrature/assembly."""


# reference shape functions on [0, 1]; dof order (v0, s0, v1, s1),
# slope shapes get an extra factor h on the physical element
_SHAPES = (
    np.array([1.0, 0.0, -3.0, 2.0]),
    np.array([0.0, 1.0, -2.0, 1.0]),
    np.array([0.0, 0.0, 3.0, -2.0]),
    np.array([0.0, 0.0, -1.0, 1.0]),
)


def _poly_deriv(c: np.ndarray, order: int) -> np.ndarray:
    for _ in range(order):
        c = np.array([i * c[i] for i in range(1, len(c))])
    return c if len(c) else np.array([0.0])


def _shape_table(order: int, xi: np.ndarray) -> np.ndarray:
    """Values of the four reference shape derivatives at points xi, shape (4, len(xi))."""
    out = np.empty((4, xi.size))
    for i, c in enumerate(_SHAPES):
        d = _poly_deriv(c, order)
        out[i] = sum(ci * xi ** p for p, ci in enumerate(d))
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre points/weights on the reference element [0, 1]."""

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss(cls, npoints: int) -> "QuadratureRule":
        if npoints < 1:
            raise MeshError("quadrature needs at least one point")
        x, w = np.polynomial.legendre.leggauss(npoints)
        return cls(points=0.5 * (x + 1.0), weights=0.5 * w)


@dataclass
class Mesh:
    """Uniform Hermite-cubic mesh of (0, 1) with clamped constraints."""

    n_elements: int
    nodes: np.ndarray
    quad: QuadratureRule
    # shape-derivative tables at quadrature points, keyed by derivative order
    basis: dict = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n_elements

    @property
    def dof_count(self) -> int:
        """Total unknowns before constraint elimination (2 per node)."""
        return 2 * (self.n_elements + 1)

    @property
    def constrained_dofs(self) -> tuple[int, int, int, int]:
        """Clamped dofs: value and slope at both endpoints."""
        n = self.dof_count
        return (0, 1, n - 2, n - 1)

    def active_dofs(self, space: str = "clamped") -> np.ndarray:
        """Free dof indices: 'clamped' pins value+slope, 'h01' pins values only."""
        n = self.dof_count
        if space == "clamped":
            drop = {0, 1, n - 2, n - 1}
        elif space == "h01":
            drop = {0, n - 2}
        else:
            raise MeshError(f"unknown constraint space {space!r}")
        return np.array([i for i in range(n) if i not in drop], dtype=int)

    def expand(self, coeffs: np.ndarray, space: str = "clamped") -> np.ndarray:
        """Insert zeros at constrained dofs, returning a full coefficient vector."""
        full = np.zeros(self.dof_count)
        full[self.active_dofs(space)] = coeffs
        return full

    def restrict(self, full: np.ndarray, space: str = "clamped") -> np.ndarray:
        return np.asarray(full)[self.active_dofs(space)]

    def quad_points_global(self) -> tuple[np.ndarray, np.ndarray]:
        """All quadrature points and weights on (0, 1), flattened element-wise."""
        h = self.h
        pts = (self.nodes[:-1, None] + self.quad.points[None, :] * h).ravel()
        wts = np.tile(self.quad.weights * h, self.n_elements)
        return pts, wts

    def eval_coeffs(self, full_coeffs: np.ndarray, x, order: int = 0) -> np.ndarray:
        """Evaluate the Hermite field (or a derivative) at arbitrary points."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        h = self.h
        elem = np.clip((x / h).astype(int), 0, self.n_elements - 1)
        xi = x / h - elem
        tab = _shape_table(order, xi)  # (4, len(x)) but xi varies per point
        scale = np.array([1.0, h, 1.0, h]) / h ** order
        c = np.asarray(full_coeffs)
        idx = 2 * elem
        out = np.zeros_like(x)
        for i in range(4):
            out += c[idx + i] * tab[i] * scale[i]
        return out


def build_mesh(n_elements: int, quad_points: int = 4) -> Mesh:
    """Uniform mesh with `n_elements` Hermite-cubic elements."""
    if n_elements < 2:
        raise MeshError("n_elements must be >= 2 (no interior dofs otherwise)")
    rule = QuadratureRule.gauss(quad_points)
    basis = {order: _shape_table(order, rule.points) for order in (0, 1, 2, 3)}
    nodes = np.linspace(0.0, 1.0, n_elements + 1)
    return Mesh(n_elements=n_elements, nodes=nodes, quad=rule, basis=basis)


@dataclass
class WeightedForm:
    """Assembled bilinear form int w(x) D^a u D^b v dx.

    `matrix` is the restriction to the clamped space; `full` keeps all dofs
    so other constraint spaces can be carved out of the same assembly.
    """

    weight: Callable
    left_order: int
    right_order: int
    matrix: np.ndarray
    full: np.ndarray


def assemble_form(mesh: Mesh, weight: Callable, left_order: int,
                  right_order: int) -> WeightedForm:
    """Assemble int_0^1 w(x) D^a u_i D^b u_j dx over the Hermite basis."""
    if left_order not in (0, 1, 2) or right_order not in (0, 1, 2):
        raise MeshError("derivative orders must be in {0, 1, 2}")
    h = mesh.h
    pts, _ = mesh.quad_points_global()
    wvals = np.asarray(weight(pts), dtype=float)
    if wvals.shape != pts.shape:
        wvals = np.broadcast_to(wvals, pts.shape).astype(float)
    if not np.all(np.isfinite(wvals)):
        bad = pts[~np.isfinite(wvals)][0]
        raise AssemblyError(f"weight is not finite at quadrature point x3 = {bad:.12g}")
    nq = mesh.quad.points.size
    wq = wvals.reshape(mesh.n_elements, nq) * (mesh.quad.weights * h)[None, :]

    Ta = mesh.basis[left_order]
    Tb = mesh.basis[right_order]
    scale = np.array([1.0, h, 1.0, h])
    # per-element 4x4 blocks for all elements at once
    blocks = np.einsum("eq,iq,jq->eij", wq, Ta, Tb)
    blocks *= scale[None, :, None] * scale[None, None, :]
    blocks /= h ** (left_order + right_order)

    ndof = mesh.dof_count
    full = np.zeros((ndof, ndof))
    for i in range(4):
        for j in range(4):
            rows = 2 * np.arange(mesh.n_elements) + i
            cols = 2 * np.arange(mesh.n_elements) + j
            np.add.at(full, (rows, cols), blocks[:, i, j])
    if left_order == right_order:
        full = 0.5 * (full + full.T)
    act = mesh.active_dofs("clamped")
    return WeightedForm(weight=weight, left_order=left_order,
                        right_order=right_order,
                        matrix=full[np.ix_(act, act)], full=full)


def integrate(mesh: Mesh, f: Callable) -> float:
    """Element-wise Gauss quadrature of f over (0, 1)."""
    pts, wts = mesh.quad_points_global()
    vals = np.asarray(f(pts), dtype=float)
    if vals.shape != pts.shape:
        vals = np.broadcast_to(vals, pts.shape).astype(float)
    if not np.all(np.isfinite(vals)):
        bad = pts[~np.isfinite(vals)][0]
        raise AssemblyError(f"integrand is not finite at quadrature point x3 = {bad:.12g}")
    return float(np.dot(wts, vals))


def project(mesh: Mesh, f: Callable, f_prime: Callable) -> np.ndarray:
    """Hermite interpolant coefficients (value, slope per node) of a clamped function."""
    ends = np.array([0.0, 1.0])
    fv, fs = np.asarray(f(ends), dtype=float), np.asarray(f_prime(ends), dtype=float)
    if np.max(np.abs(fv)) > 1e-12 or np.max(np.abs(fs)) > 1e-12:
        raise MeshError(
            "incompatible boundary data: clamped interpolation needs "
            f"f=f'=0 at both endpoints (got |f|={np.max(np.abs(fv)):.3g}, "
            f"|f'|={np.max(np.abs(fs)):.3g})")
    coeffs = np.empty(mesh.dof_count)
    coeffs[0::2] = f(mesh.nodes)
    coeffs[1::2] = f_prime(mesh.nodes)
    return coeffs
