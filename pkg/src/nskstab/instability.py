"""Mode-combination bookkeeping for the nonlinear departure argument.

Given normal modes 1..N at one wavevector with strictly ordered growth
rates and a coefficient vector, this module evaluates the admissibility
conditions, the growth envelope F_N(t) = sum |C_j| e^{lambda_j t}, the
escape time T with delta F_N(T) = eps0, the lower bound
||u^N(t)|| >= C5 F_N(t), and the structural threshold on eps0.

Horizontal directions are handled analytically: the trigonometric factors
of a single wavevector integrate to half the torus area, so every field
norm reduces to a weighted 1D integral of the vertical profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dispersion import WaveVector
from .mesh import Mesh
from .modes import NormalMode, _project_third_derivative
from .profile import DensityProfile, PhysicalParams


@dataclass
class ModeCombination:
    """Modes sharing one wavevector, with combination coefficients."""

    modes: list[NormalMode]
    coefficients: np.ndarray
    Lambda: float
    M: int
    j_m: int | None  # smallest index <= M with a nonzero coefficient (1-based)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([m.lam for m in self.modes])


@dataclass
class InstabilityPlan:
    """Escape-time plan for one admissible combination."""

    delta: float
    epsilon0: float
    T_delta: float
    C1: float
    C2: float
    F_N: Callable[[float], float] = field(repr=False)
    C5: float = 0.0
    C5_empirical: float = 0.0
    admissible: bool = False
    diagnostics: dict = field(default_factory=dict)
    epsilon_bound: dict = field(default_factory=dict)


def make_combination(modes: list[NormalMode], coefficients,
                     Lambda: float) -> ModeCombination:
    """Validate mode compatibility and locate M and j_m."""
    if not modes:
        raise ValueError("combination needs at least one mode")
    coeffs = np.asarray(coefficients, dtype=float)
    if coeffs.shape != (len(modes),):
        raise ValueError("one coefficient per mode required")
    wv0 = modes[0].wavevector
    for m in modes[1:]:
        if (m.wavevector.k1, m.wavevector.k2) != (wv0.k1, wv0.k2):
            raise ValueError("all modes in a combination must share one wavevector")
    lams = [m.lam for m in modes]
    if any(a >= b for a, b in zip(lams[1:], lams[:-1])):
        raise ValueError("growth rates must be strictly decreasing with mode index")
    M = sum(1 for lam in lams if lam > (2.0 / 3.0) * Lambda)
    j_m = None
    for j in range(1, M + 1):
        if coeffs[j - 1] != 0.0:
            j_m = j
            break
    return ModeCombination(modes=modes, coefficients=coeffs, Lambda=Lambda,
                           M=M, j_m=j_m)


def _velocity_gram(modes: list[NormalMode]) -> np.ndarray:
    """G_ij = int_Omega u_i . u_j at t = 0, reduced to 1D quadrature."""
    mesh = modes[0].mesh
    pts, wts = mesh.quad_points_global()
    half_area = 0.5 * (2.0 * math.pi * modes[0].params.L) ** 2
    fields = [(m.v1_at(pts), m.v2_at(pts), m.phi_at(pts)) for m in modes]
    n = len(modes)
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i + 1):
            val = float(wts @ (fields[i][0] * fields[j][0]
                               + fields[i][1] * fields[j][1]
                               + fields[i][2] * fields[j][2]))
            G[i, j] = G[j, i] = half_area * val
    return G


def mode_l2_norms(modes: list[NormalMode]) -> np.ndarray:
    """||u_j||_{L2(Omega)} per mode (velocity field at t = 0)."""
    wv0 = modes[0].wavevector
    for m in modes[1:]:
        if (m.wavevector.k1, m.wavevector.k2) != (wv0.k1, wv0.k2):
            raise ValueError("modes must share one wavevector")
    return np.sqrt(np.diag(_velocity_gram(modes)))


def theta_l2_norms(modes: list[NormalMode]) -> np.ndarray:
    """||theta_j||_{L2(Omega)} per mode (density perturbation at t = 0)."""
    mesh = modes[0].mesh
    pts, wts = mesh.quad_points_global()
    half_area = 0.5 * (2.0 * math.pi * modes[0].params.L) ** 2
    return np.array([math.sqrt(half_area * float(wts @ m.eta_at(pts) ** 2))
                     for m in modes])


def check_admissible(comb: ModeCombination) -> tuple[bool, dict]:
    """Both coefficient conditions; diagnostics carry the two compared sides."""
    norms = mode_l2_norms(comb.modes)
    diag = {"M": comb.M, "j_m": comb.j_m, "norms": norms.tolist()}
    if comb.j_m is None:
        diag["reason"] = "no nonzero coefficient among the first M modes"
        return False, diag
    jm = comb.j_m
    lhs = 0.5 * abs(comb.coefficients[jm - 1]) * norms[jm - 1]
    rhs = float(np.sum(np.abs(comb.coefficients[jm:]) * norms[jm:]))
    diag["lhs_half_leading"] = float(lhs)
    diag["rhs_tail_sum"] = float(rhs)
    return bool(lhs > rhs), diag


def envelope_F(comb: ModeCombination, t) -> np.ndarray | float:
    """F_N(t) = sum_{j >= j_m} |C_j| e^{lambda_j t}."""
    if comb.j_m is None:
        raise ValueError("envelope undefined: all leading coefficients vanish")
    t = np.asarray(t, dtype=float)
    sl = slice(comb.j_m - 1, None)
    amps = np.abs(comb.coefficients[sl])
    lams = comb.lambdas[sl]
    val = np.sum(amps[:, None] * np.exp(lams[:, None] * t.ravel()[None, :]), axis=0)
    return float(val[0]) if t.ndim == 0 else val.reshape(t.shape)


def _envelope_derivative(comb: ModeCombination, t: float) -> float:
    sl = slice(comb.j_m - 1, None)
    amps = np.abs(comb.coefficients[sl])
    lams = comb.lambdas[sl]
    return float(np.sum(amps * lams * np.exp(lams * t)))


def escape_time(comb: ModeCombination, delta: float, epsilon0: float) -> float:
    """Unique T with delta F_N(T) = epsilon0 (bisection plus Newton polish)."""
    if delta <= 0 or epsilon0 <= 0:
        raise ValueError("delta and epsilon0 must be positive")
    f0 = delta * envelope_F(comb, 0.0)
    if f0 > epsilon0:
        raise ValueError(
            f"already escaped: delta * F_N(0) = {f0:.6g} exceeds epsilon0 = {epsilon0:.6g}")
    lo, hi = 0.0, 1.0
    while delta * envelope_F(comb, hi) < epsilon0:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("escape time beyond 1e12; coefficients degenerate?")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if delta * envelope_F(comb, mid) < epsilon0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    T = 0.5 * (lo + hi)
    for _ in range(4):  # Newton polish on the strictly increasing envelope
        T -= (delta * envelope_F(comb, T) - epsilon0) / (delta * _envelope_derivative(comb, T))
        T = max(T, 0.0)
    return T


def lower_bound_check(comb: ModeCombination, t_grid) -> tuple[bool, float, float]:
    """Verify ||u^N(t)|| >= C5 F_N(t); returns (holds, C5, empirical best constant)."""
    if comb.j_m is None:
        raise ValueError("lower bound needs an admissible combination")
    t_grid = np.asarray(t_grid, dtype=float)
    G = _velocity_gram(comb.modes)
    norms = np.sqrt(np.diag(G))
    jm = comb.j_m
    amp_sum = float(np.sum(np.abs(comb.coefficients[jm - 1:])))
    C5 = float(0.5 * abs(comb.coefficients[jm - 1]) * norms[jm - 1] / amp_sum)

    lams = comb.lambdas
    ratios = []
    for t in t_grid:
        c = comb.coefficients * np.exp(lams * t)
        norm_uN = math.sqrt(max(0.0, float(c @ G @ c)))
        ratios.append(norm_uN / envelope_F(comb, float(t)))
    ratios = np.array(ratios)
    empirical = float(np.min(ratios))
    holds = bool(np.all(ratios >= C5 * (1.0 - 1e-12)))
    return holds, C5, empirical


def max_lambda_inequality(mode: NormalMode, Lambda: float, params: PhysicalParams,
                          profile: DensityProfile) -> tuple[bool, float]:
    """Slack of the divergence-free growth-rate inequality for one mode.

    lhs = int g rho0' w3^2 - sigma (rho0')^2 |grad w3|^2
    rhs = Lambda^2 int rho0 |w|^2 + Lambda mu int rho0 |grad w|^2
    with the per-mode reductions |grad w3|^2 -> k^2 phi^2 + (phi')^2 and
    |grad w|^2 -> k^2 (v1^2+v2^2+phi^2) + (v1'^2+v2'^2+phi'^2).  The gravity
    term carries the vertical component only, matching the energy balance
    the inequality feeds (the gravity flux is g rho0' u3 dt(u3)).
    """
    mesh = mode.mesh
    pts, wts = mesh.quad_points_global()
    k = mode.k
    v1, v2, phi = mode.v1_at(pts), mode.v2_at(pts), mode.phi_at(pts)
    dv1, dv2, dphi = mode.v1_at(pts, 1), mode.v2_at(pts, 1), mode.phi_at(pts, 1)
    w2 = v1 ** 2 + v2 ** 2 + phi ** 2
    grad_w3 = k * k * phi ** 2 + dphi ** 2
    grad_w = k * k * w2 + dv1 ** 2 + dv2 ** 2 + dphi ** 2
    rho, drho = profile(pts, 0), profile(pts, 1)
    lhs = float(wts @ (params.g * drho * phi ** 2 - params.sigma * drho ** 2 * grad_w3))
    rhs = float(wts @ (Lambda * Lambda * rho * w2 + Lambda * params.mu * rho * grad_w))
    slack = rhs - lhs
    return slack >= -1e-8 * abs(rhs), slack


def _fd_slopes(nodes_vals: np.ndarray, h: float) -> np.ndarray:
    """Second-order finite-difference slopes for Hermite reinterpolation."""
    s = np.empty_like(nodes_vals)
    s[1:-1] = (nodes_vals[2:] - nodes_vals[:-2]) / (2.0 * h)
    s[0] = (-3.0 * nodes_vals[0] + 4.0 * nodes_vals[1] - nodes_vals[2]) / (2.0 * h)
    s[-1] = (3.0 * nodes_vals[-1] - 4.0 * nodes_vals[-2] + nodes_vals[-3]) / (2.0 * h)
    return s


def _h3_integrals(mesh: Mesh, coeffs: np.ndarray) -> list[float]:
    """[int f^2, int f'^2, int f''^2, int (f''')^2] of a Hermite field (f''' projected)."""
    pts, wts = mesh.quad_points_global()
    out = [float(wts @ mesh.eval_coeffs(coeffs, pts, order) ** 2) for order in (0, 1, 2)]
    d3 = _project_third_derivative(mesh, coeffs)
    xi = mesh.quad.points
    d3q = (d3[:-1, None] * (1.0 - xi)[None, :] + d3[1:, None] * xi[None, :]).ravel()
    out.append(float(wts @ d3q ** 2))
    return out


def _hermite_reinterp(mesh: Mesh, nodes_vals: np.ndarray) -> np.ndarray:
    coeffs = np.empty(mesh.dof_count)
    coeffs[0::2] = nodes_vals
    coeffs[1::2] = _fd_slopes(nodes_vals, mesh.h)
    return coeffs


def initial_data_constants(comb: ModeCombination) -> tuple[float, float]:
    """(C1, C2): discrete H3 and L2 norms of the combined initial perturbation.

    The H3 value is a surrogate: each vertical profile is reinterpreted as a
    C1 Hermite field (finite-difference slopes where only nodal values are
    known) and differentiated element-wise, with the third derivative taken
    through the piecewise-linear projection.  Horizontal derivatives
    contribute powers of the wavevector components analytically.
    """
    mesh = comb.modes[0].mesh
    nodes = mesh.nodes
    c = comb.coefficients
    phi_c = sum(cj * m.phi_coeffs for cj, m in zip(c, comb.modes))
    v1_c = _hermite_reinterp(mesh, sum(cj * m.v1_at(nodes) for cj, m in zip(c, comb.modes)))
    v2_c = _hermite_reinterp(mesh, sum(cj * m.v2_at(nodes) for cj, m in zip(c, comb.modes)))
    eta_c = _hermite_reinterp(mesh, sum(cj * m.eta_at(nodes) for cj, m in zip(c, comb.modes)))

    half_area = 0.5 * (2.0 * math.pi * comb.modes[0].params.L) ** 2
    ints = [_h3_integrals(mesh, fc) for fc in (phi_c, v1_c, v2_c, eta_c)]
    k1, k2 = comb.modes[0].wavevector.k1, comb.modes[0].wavevector.k2

    c2_sq = half_area * sum(I[0] for I in ints)
    c1_sq = 0.0
    for a in range(4):
        for b in range(4 - a):
            for cder in range(4 - a - b):
                c1_sq += (k1 ** (2 * a)) * (k2 ** (2 * b)) * half_area \
                    * sum(I[cder] for I in ints)
    return math.sqrt(c1_sq), math.sqrt(c2_sq)


def epsilon_threshold(C2: float, C5: float, comb: ModeCombination,
                      c3: float, c4: float, delta0: float) -> dict:
    """Structural upper bound on epsilon0 with user-supplied generic constants."""
    n_modes = len(comb.modes)
    if comb.j_m is None:
        raise ValueError("threshold needs an admissible combination")
    tail = np.abs(comb.coefficients[comb.M:])
    ctilde = float(np.max(tail) / abs(comb.coefficients[comb.j_m - 1])) if tail.size else 0.0
    amp = (1.0 + (n_modes - comb.M) * ctilde) ** 3
    terms = {
        "energy_budget": float(C2 * delta0 / c3),
        "difference_absorption": float(C2 ** 2 / (2.0 * c4 * amp)),
        "lower_bound_margin": float(C5 ** 2 / (4.0 * c4 * amp)),
    }
    terms["bound"] = min(terms.values())
    terms["c_tilde"] = ctilde
    return terms


def build_plan(comb: ModeCombination, delta: float, epsilon0: float,
               c3: float = 1.0, c4: float = 1.0, delta0: float = 0.1) -> InstabilityPlan:
    """Assemble the full escape-time plan for one combination."""
    admissible, diag = check_admissible(comb)
    if comb.j_m is None:
        raise ValueError("plan needs at least one nonzero leading coefficient")
    T = escape_time(comb, delta, epsilon0)
    C1, C2 = initial_data_constants(comb)
    t_grid = np.linspace(0.0, T, 65) if T > 0 else np.array([0.0])
    holds, C5, emp = lower_bound_check(comb, t_grid)
    eps_info = epsilon_threshold(C2, C5, comb, c3=c3, c4=c4, delta0=delta0)
    eps_info["epsilon0_ok"] = bool(epsilon0 < eps_info["bound"])
    diag["lower_bound_holds"] = holds
    return InstabilityPlan(
        delta=delta, epsilon0=epsilon0, T_delta=T, C1=C1, C2=C2,
        F_N=lambda t: envelope_F(comb, t), C5=C5, C5_empirical=emp,
        admissible=admissible, diagnostics=diag, epsilon_bound=eps_info)


@dataclass
class SampledMode:
    """Mode rebuilt from an exported document; quacks like NormalMode.

    Vertical profiles are Hermite reinterpolations of the sampled columns
    (phi uses its stored derivative column; the others use finite-difference
    slopes), on a mesh whose nodes are the sample points.  Good enough for
    the bookkeeping integrals, which is all this class feeds.
    """

    wavevector: WaveVector
    lam: float
    j: int
    sigma: float
    mesh: Mesh = field(repr=False)
    params: PhysicalParams = field(repr=False)
    phi_coeffs: np.ndarray = field(repr=False)
    _v1_coeffs: np.ndarray = field(repr=False)
    _v2_coeffs: np.ndarray = field(repr=False)
    _eta_coeffs: np.ndarray = field(repr=False)

    @property
    def k(self) -> float:
        return self.wavevector.k

    def phi_at(self, x, order: int = 0) -> np.ndarray:
        return self.mesh.eval_coeffs(self.phi_coeffs, x, order)

    def v1_at(self, x, order: int = 0) -> np.ndarray:
        return self.mesh.eval_coeffs(self._v1_coeffs, x, order)

    def v2_at(self, x, order: int = 0) -> np.ndarray:
        return self.mesh.eval_coeffs(self._v2_coeffs, x, order)

    def eta_at(self, x) -> np.ndarray:
        return self.mesh.eval_coeffs(self._eta_coeffs, x, 0)


def mode_from_document(doc: dict, mesh: Mesh | None = None) -> SampledMode:
    """Rebuild a mode from an export document for bookkeeping use."""
    from .mesh import build_mesh

    meta = doc["metadata"]
    cols = {k: np.asarray(v, dtype=float) for k, v in doc["columns"].items()}
    samples = len(cols["x3"])
    if samples < 3:
        raise ValueError("mode document needs at least 3 samples for reinterpolation")
    if mesh is None:
        mesh = build_mesh(samples - 1)
    if mesh.n_elements != samples - 1:
        raise ValueError("mesh does not match the document sample count")
    h = mesh.h

    phi_c = np.empty(mesh.dof_count)
    phi_c[0::2], phi_c[1::2] = cols["phi"], cols["dphi"]
    params = PhysicalParams(g=meta["g"], mu=meta["mu"],
                            sigma=max(meta["sigma"], 0.0), L=meta["L"])
    return SampledMode(
        wavevector=WaveVector(k1=meta["k1"], k2=meta["k2"]),
        lam=meta["lambda"], j=meta["j"], sigma=meta["sigma"], mesh=mesh,
        params=params, phi_coeffs=phi_c,
        _v1_coeffs=_hermite_reinterp(mesh, cols["v1"]),
        _v2_coeffs=_hermite_reinterp(mesh, cols["v2"]),
        _eta_coeffs=_hermite_reinterp(mesh, cols["eta"]))


def export_plan(plan: InstabilityPlan, comb: ModeCombination,
                extra_metadata: dict | None = None) -> dict:
    norms = mode_l2_norms(comb.modes)
    doc = {
        "delta": plan.delta,
        "epsilon0": plan.epsilon0,
        "T_delta": plan.T_delta,
        "C1": plan.C1,
        "C2": plan.C2,
        "C5": plan.C5,
        "C5_empirical": plan.C5_empirical,
        "admissible": plan.admissible,
        "coefficients": comb.coefficients.tolist(),
        "lambdas": comb.lambdas.tolist(),
        "mode_l2_norms": norms.tolist(),
        "M": comb.M,
        "j_m": comb.j_m,
        "Lambda": comb.Lambda,
        "diagnostics": {k: v for k, v in plan.diagnostics.items() if k != "norms"},
        "epsilon_bound": plan.epsilon_bound,
    }
    if extra_metadata:
        doc.update(extra_metadata)
    return doc
