"""Normal-mode reconstruction: (eta, v1, v2, phi, pi) from a solved growth rate.

Starting from the vertical velocity profile phi and its growth rate lambda,
the remaining unknowns follow from the linearized system:

    eta = -rho0' phi / lambda
    pi  = (-lambda^2 rho0 phi' - lambda mu (k^2 phi' - phi''')
           + sigma k^2 rho0' rho0'' phi) / (lambda k^2)
    one horizontal velocity solves a second-order Dirichlet problem,
    the other follows from the divergence constraint k1 v1 + k2 v2 + phi' = 0.

phi''' of the C1 interpolant is discontinuous, so the value entering pi is
the L2 projection of the element-wise third derivative onto continuous
piecewise-linears.  The horizontal-velocity BVP is discretized with P1
elements on the same nodes (a second-order problem needs only H1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .dispersion import CharacteristicValue, WaveVector
from .mesh import Mesh
from .profile import DensityProfile, PhysicalParams
from .spectrum import OperatorAssembler


@dataclass
class NormalMode:
    """Vertical profiles of one normal mode at wavevector (k1, k2).

    One horizontal velocity is a P1 finite-element solution of its momentum
    equation; the other is defined pointwise through the divergence
    constraint, which therefore holds to round-off everywhere.
    """

    wavevector: WaveVector
    lam: float
    j: int
    sigma: float
    mesh: Mesh = field(repr=False)
    profile: DensityProfile = field(repr=False)
    params: PhysicalParams = field(repr=False)
    phi_coeffs: np.ndarray = field(repr=False)   # full Hermite coefficients
    v_bvp_nodes: np.ndarray = field(repr=False)  # P1 nodal values of the BVP velocity
    d3_nodes: np.ndarray = field(repr=False)     # projected phi''' (P1 nodal)
    bvp_component: int = 1                       # 1 or 2: which velocity solved the BVP
    residuals: dict = field(default_factory=dict)

    @property
    def k(self) -> float:
        return self.wavevector.k

    def phi_at(self, x, order: int = 0) -> np.ndarray:
        return self.mesh.eval_coeffs(self.phi_coeffs, x, order)

    def _p1_at(self, nodes_vals: np.ndarray, x, order: int = 0) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        h = self.mesh.h
        e = np.clip((x / h).astype(int), 0, self.mesh.n_elements - 1)
        xi = x / h - e
        if order == 0:
            return nodes_vals[e] * (1.0 - xi) + nodes_vals[e + 1] * xi
        if order == 1:
            return (nodes_vals[e + 1] - nodes_vals[e]) / h
        raise ValueError("piecewise-linear fields have derivatives of order <= 1")

    def _k_split(self) -> tuple[float, float]:
        """(k of the BVP component, k of the divergence-derived component)."""
        k1, k2 = self.wavevector.k1, self.wavevector.k2
        return (k1, k2) if self.bvp_component == 1 else (k2, k1)

    def _v_div_at(self, x, order: int = 0) -> np.ndarray:
        k_bvp, k_div = self._k_split()
        return -(k_bvp * self._p1_at(self.v_bvp_nodes, x, order)
                 + self.phi_at(x, order + 1)) / k_div

    def v1_at(self, x, order: int = 0) -> np.ndarray:
        if self.bvp_component == 1:
            return self._p1_at(self.v_bvp_nodes, x, order)
        return self._v_div_at(x, order)

    def v2_at(self, x, order: int = 0) -> np.ndarray:
        if self.bvp_component == 2:
            return self._p1_at(self.v_bvp_nodes, x, order)
        return self._v_div_at(x, order)

    def d3_at(self, x) -> np.ndarray:
        return self._p1_at(self.d3_nodes, x)

    def eta_at(self, x) -> np.ndarray:
        return -self.profile(x, 1) * self.phi_at(x) / self.lam

    def pi_at(self, x) -> np.ndarray:
        lam, mu, sigma = self.lam, self.params.mu, self.sigma
        ksq = self.k ** 2
        x = np.asarray(x, dtype=float)
        return (-lam * lam * self.profile(x, 0) * self.phi_at(x, 1)
                - lam * mu * (ksq * self.phi_at(x, 1) - self.d3_at(x))
                + sigma * ksq * self.profile(x, 1) * self.profile(x, 2) * self.phi_at(x)
                ) / (lam * ksq)

    @property
    def v1_nodes(self) -> np.ndarray:
        return self.v1_at(self.mesh.nodes)

    @property
    def v2_nodes(self) -> np.ndarray:
        return self.v2_at(self.mesh.nodes)

    @property
    def eta_nodes(self) -> np.ndarray:
        return self.eta_at(self.mesh.nodes)

    @property
    def pi_nodes(self) -> np.ndarray:
        return self.pi_at(self.mesh.nodes)


def _p1_mass_tridiag(mesh: Mesh, weight_at_quad: np.ndarray):
    """Tridiagonal (lower, diag, upper) of int w Na Nb over all nodes."""
    n = mesh.n_elements
    h = mesh.h
    xi = mesh.quad.points
    wq = weight_at_quad.reshape(n, xi.size) * (mesh.quad.weights * h)[None, :]
    n0, n1 = 1.0 - xi, xi
    e00 = wq @ (n0 * n0)
    e01 = wq @ (n0 * n1)
    e11 = wq @ (n1 * n1)
    diag = np.zeros(n + 1)
    np.add.at(diag, np.arange(n), e00)
    np.add.at(diag, np.arange(1, n + 1), e11)
    return e01.copy(), diag, e01.copy()


def _p1_stiff_tridiag(mesh: Mesh, weight_at_quad: np.ndarray):
    """Tridiagonal of int w Na' Nb' over all nodes."""
    n = mesh.n_elements
    h = mesh.h
    wq = weight_at_quad.reshape(n, mesh.quad.points.size) * (mesh.quad.weights * h)[None, :]
    we = wq.sum(axis=1) / (h * h)
    diag = np.zeros(n + 1)
    np.add.at(diag, np.arange(n), we)
    np.add.at(diag, np.arange(1, n + 1), we)
    return -we.copy(), diag, -we.copy()


def _p1_load(mesh: Mesh, f_at_quad: np.ndarray) -> np.ndarray:
    n = mesh.n_elements
    h = mesh.h
    xi = mesh.quad.points
    fq = f_at_quad.reshape(n, xi.size) * (mesh.quad.weights * h)[None, :]
    b = np.zeros(n + 1)
    np.add.at(b, np.arange(n), fq @ (1.0 - xi))
    np.add.at(b, np.arange(1, n + 1), fq @ xi)
    return b


def _project_third_derivative(mesh: Mesh, phi_full: np.ndarray) -> np.ndarray:
    """L2-project the element-wise (constant) third derivative onto continuous P1."""
    pts, _ = mesh.quad_points_global()
    d3 = mesh.eval_coeffs(phi_full, pts, 3)
    lo, di, up = _p1_mass_tridiag(mesh, np.ones_like(pts))
    b = _p1_load(mesh, d3)
    return linalg.solve_tridiagonal(lo, di, up, b)


def reconstruct_mode(cv: CharacteristicValue, wavevector: WaveVector,
                     profile: DensityProfile, params: PhysicalParams,
                     mesh: Mesh) -> NormalMode:
    """Full mode profiles from a solved characteristic value.

    phi is normalized to unit L2 norm with its first nonzero interior dof
    positive, which makes the reconstruction deterministic.
    """
    if cv.lam <= 0:
        raise ValueError("characteristic value must have lambda > 0")
    k = wavevector.k
    if abs(k - cv.k) > 1e-12 * max(1.0, cv.k):
        raise ValueError(
            f"wavevector magnitude {k:.12g} does not match the solved k = {cv.k:.12g}")
    lam, mu, sigma = cv.lam, params.mu, params.sigma
    k1, k2 = wavevector.k1, wavevector.k2

    # deterministic normalization of the eigenfunction
    act = cv.phi.copy()
    i0 = int(np.argmax(np.abs(act) > 1e-13 * np.max(np.abs(act))))
    if act[i0] < 0:
        act = -act
    phi_full = mesh.expand(act, "clamped")
    pts, wts = mesh.quad_points_global()
    nrm = math.sqrt(float(wts @ mesh.eval_coeffs(phi_full, pts) ** 2))
    phi_full /= nrm

    d3_nodes = _project_third_derivative(mesh, phi_full)
    # solve the BVP for the velocity whose wavenumber component is smaller,
    # so the divergence elimination divides by the larger component
    bvp_comp = 1 if abs(k2) >= abs(k1) else 2
    k_bvp = k1 if bvp_comp == 1 else k2
    mode = NormalMode(
        wavevector=wavevector, lam=lam, j=cv.j, sigma=sigma, mesh=mesh,
        profile=profile, params=params, phi_coeffs=phi_full,
        v_bvp_nodes=np.zeros(mesh.n_elements + 1), d3_nodes=d3_nodes,
        bvp_component=bvp_comp)

    phi_q = mode.phi_at(pts)
    pi_q = mode.pi_at(pts)
    rho_q = profile(pts, 0)
    src = sigma * k_bvp * profile(pts, 1) * profile(pts, 2) * phi_q - lam * k_bvp * pi_q

    lo_s, di_s, up_s = _p1_stiff_tridiag(mesh, np.full_like(pts, lam * mu))
    lo_m, di_m, up_m = _p1_mass_tridiag(mesh, lam * lam * rho_q + lam * mu * k * k)
    lo, di, up = lo_s + lo_m, di_s + di_m, up_s + up_m
    b = -_p1_load(mesh, src)
    # Dirichlet: trim to interior nodes
    v_bvp = np.zeros(mesh.n_elements + 1)
    v_bvp[1:-1] = linalg.solve_tridiagonal(lo[1:-1], di[1:-1], up[1:-1], b[1:-1])
    mode.v_bvp_nodes = v_bvp

    mode.residuals = {
        "divergence": divergence_residual(mode),
        "momentum_other_line": _momentum_line_residual(mode, component=3 - bvp_comp),
        "bvp_weak": _bvp_weak_residual(mode, (lo, di, up), b, v_bvp),
    }
    return mode


def divergence_residual(mode: NormalMode) -> float:
    """max |k1 v1 + k2 v2 + phi'| / max |phi'| on the quadrature grid."""
    pts, _ = mode.mesh.quad_points_global()
    k1, k2 = mode.wavevector.k1, mode.wavevector.k2
    div = k1 * mode.v1_at(pts) + k2 * mode.v2_at(pts) + mode.phi_at(pts, 1)
    return float(np.max(np.abs(div)) / np.max(np.abs(mode.phi_at(pts, 1))))


def _second_derivative_from_bvp(mode: NormalMode, v_q: np.ndarray,
                                pts: np.ndarray, k_comp: float) -> np.ndarray:
    """v'' of the BVP-solved velocity, recovered from its own equation."""
    lam, mu, sigma = mode.lam, mode.params.mu, mode.sigma
    k = mode.k
    src = (sigma * k_comp * mode.profile(pts, 1) * mode.profile(pts, 2) * mode.phi_at(pts)
           - lam * k_comp * mode.pi_at(pts))
    return ((lam * lam * mode.profile(pts, 0) + lam * mu * k * k) * v_q + src) / (lam * mu)


def _momentum_line_residual(mode: NormalMode, component: int) -> float:
    """Direct-quadrature residual of the divergence-derived momentum line.

    The checked velocity was defined through the divergence constraint, so a
    nonzero residual here flags an inconsistency among the pi formula, the
    BVP source and the divergence elimination.
    """
    pts, wts = mode.mesh.quad_points_global()
    lam, mu, sigma = mode.lam, mode.params.mu, mode.sigma
    k = mode.k
    k1, k2 = mode.wavevector.k1, mode.wavevector.k2
    kc = k1 if component == 1 else k2
    kb = k2 if component == 1 else k1  # component that solved the BVP
    v_q = mode.v1_at(pts) if component == 1 else mode.v2_at(pts)
    vb_q = mode.v2_at(pts) if component == 1 else mode.v1_at(pts)
    vb_dd = _second_derivative_from_bvp(mode, vb_q, pts, kb)
    v_dd = -(kb * vb_dd + mode.d3_at(pts)) / kc

    terms = [
        -lam * lam * mode.profile(pts, 0) * v_q,
        lam * kc * mode.pi_at(pts),
        -lam * mu * (k * k * v_q - v_dd),
        -sigma * kc * mode.profile(pts, 1) * mode.profile(pts, 2) * mode.phi_at(pts),
    ]
    l2 = lambda f: math.sqrt(float(wts @ f ** 2))
    denom = sum(l2(t) for t in terms)
    return l2(sum(terms)) / denom if denom > 0 else 0.0


def _bvp_weak_residual(mode: NormalMode, tridiag, b: np.ndarray,
                       v: np.ndarray) -> float:
    lo, di, up = tridiag
    vi = v[1:-1]
    r = di[1:-1] * vi - b[1:-1]
    r[1:] += lo[1:-1] * vi[:-1]
    r[:-1] += up[1:-1] * vi[1:]
    scale = np.max(np.abs(b[1:-1])) or 1.0
    return float(np.max(np.abs(r)) / scale)


def ode_residual(cv: CharacteristicValue, profile: DensityProfile,
                 params: PhysicalParams, mesh: Mesh) -> float:
    """Normalized weak-form residual of the fourth-order eigenvalue equation."""
    asm = OperatorAssembler(mesh, profile, params)
    A = asm.inertial(cv.k)
    D = asm.bending(cv.k)
    Q = asm.Q(cv.k)
    lam, mu = cv.lam, params.mu
    r = (lam * lam) * (A @ cv.phi) + lam * mu * (D @ cv.phi) - Q @ cv.phi
    denom = (lam * lam * np.linalg.norm(A, 2) + lam * mu * np.linalg.norm(D, 2)
             + np.linalg.norm(Q, 2)) * np.linalg.norm(cv.phi)
    return float(np.linalg.norm(r) / denom)


def system_residual(mode: NormalMode) -> dict:
    """Relative residuals of the full first-order normal-mode system.

    Line routes: the density line is exact by construction; the BVP-solved
    velocity line is checked through its discrete weak form; the other
    velocity line by direct quadrature; the vertical momentum line through
    the weak fourth-order residual; the divergence pointwise.
    """
    pts, _ = mode.mesh.quad_points_global()
    eta_line = np.max(np.abs(mode.lam * mode.eta_at(pts)
                             + mode.profile(pts, 1) * mode.phi_at(pts)))
    eta_scale = np.max(np.abs(mode.profile(pts, 1) * mode.phi_at(pts)))
    cv = CharacteristicValue(lam=mode.lam, j=mode.j, k=mode.k, sigma=mode.sigma,
                             phi=mode.mesh.restrict(mode.phi_coeffs, "clamped"),
                             gamma_residual=0.0)
    return {
        "density": float(eta_line / eta_scale),
        "momentum_bvp_weak": mode.residuals["bvp_weak"],
        "momentum_other_line": mode.residuals["momentum_other_line"],
        "momentum_vertical": ode_residual(cv, mode.profile, mode.params, mode.mesh),
        "divergence": mode.residuals["divergence"],
    }


def export_mode(mode: NormalMode, samples: int, extra_metadata: dict | None = None) -> dict:
    """Structured document: metadata plus column arrays at uniform samples."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    xs = np.linspace(0.0, 1.0, samples)
    cols = {
        "x3": xs,
        "eta": mode.eta_at(xs),
        "v1": mode.v1_at(xs),
        "v2": mode.v2_at(xs),
        "phi": mode.phi_at(xs),
        "dphi": mode.phi_at(xs, 1),
        "pi": mode.pi_at(xs),
    }
    k1, k2 = mode.wavevector.k1, mode.wavevector.k2
    div = np.abs(k1 * cols["v1"] + k2 * cols["v2"] + cols["dphi"])
    dscale = np.max(np.abs(cols["dphi"])) or 1.0
    meta = {
        "k1": k1, "k2": k2, "k": mode.k,
        "lambda": mode.lam, "j": mode.j, "sigma": mode.sigma,
        "g": mode.params.g, "mu": mode.params.mu, "L": mode.params.L,
        "n_elements": mode.mesh.n_elements,
        "normalization": "unit L2 phi, first interior dof positive",
        "residuals": {k: float(v) for k, v in mode.residuals.items()},
        "sampled_divergence_residual": float(np.max(div) / dscale),
    }
    if extra_metadata:
        meta.update(extra_metadata)
    return {"metadata": meta, "columns": {k: list(map(float, v)) for k, v in cols.items()}}


def doc_divergence_residual(doc: dict) -> float:
    """Recompute the sampled divergence residual from an exported document."""
    c = doc["columns"]
    k1, k2 = doc["metadata"]["k1"], doc["metadata"]["k2"]
    v1, v2 = np.asarray(c["v1"]), np.asarray(c["v2"])
    dphi = np.asarray(c["dphi"])
    dscale = np.max(np.abs(dphi)) or 1.0
    return float(np.max(np.abs(k1 * v1 + k2 * v2 + dphi)) / dscale)
