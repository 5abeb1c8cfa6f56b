"""Characteristic growth rates via the fixed point gamma_j(k, lam) = lam.

For each wavenumber magnitude k and mode index j, gamma_j is the j-th
largest generalized eigenvalue of (Q, P(lam)).  gamma_j decreases in lam,
so the fixed point is bracketed on [0, sqrt(g / L0)] and found by bisection.
The lattice set of unstable wavevectors, the maximal growth rate and the
near-maximal sublist are enumerated on top of that solve.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh
from .profile import DensityProfile, PhysicalParams, characteristic_length
from .spectrum import OperatorAssembler, OperatorPair, gamma_spectrum

DEFAULT_FIXED_POINT_TOL = 1e-10
BISECTION_MAX_ITER = 60


class BracketError(ArithmeticError):
    """gamma_j(k, 0+) > 0 but no sign change on [0, sqrt(g/L0)].

    The continuous problem guarantees a crossing inside that interval, so
    this signals a discretization bug rather than a physical regime.
    """


@dataclass(frozen=True)
class WaveVector:
    """Lattice wavevector (k1, k2) in L^{-1} Z^2, excluding the origin."""

    k1: float
    k2: float

    def __post_init__(self) -> None:
        if self.k1 == 0.0 and self.k2 == 0.0:
            raise ValueError("wavevector must be nonzero")

    @property
    def k(self) -> float:
        return math.hypot(self.k1, self.k2)


@dataclass
class CharacteristicValue:
    """A solved growth rate lambda_j at fixed (k, sigma) with its eigenfunction."""

    lam: float
    j: int
    k: float
    sigma: float
    phi: np.ndarray
    gamma_residual: float


@dataclass
class UnstableSet:
    """Unstable lattice wavevectors, their growth rates and the maximal rate."""

    members: list[WaveVector]
    lambda1: list[float]
    Lambda: float | None
    S_Lambda: list[WaveVector]
    sigma: float
    sigma_c: float
    truncated: bool = False
    characteristic_values: dict = field(default_factory=dict)


class DispersionSolver:
    """Fixed-point solver bound to one (mesh, profile, params) triple."""

    def __init__(self, mesh: Mesh, profile: DensityProfile, params: PhysicalParams,
                 fixed_point_tol: float = DEFAULT_FIXED_POINT_TOL,
                 eig_tol: float = 1e-12):
        self.mesh = mesh
        self.profile = profile
        self.params = params
        self.tol = fixed_point_tol
        self.eig_tol = eig_tol
        self.assembler = OperatorAssembler(mesh, profile, params)
        self.lambda_max = math.sqrt(params.g / characteristic_length(profile).L0)

    def gamma_at(self, k: float, lam: float, count: int):
        return gamma_spectrum(self.assembler.pair(k, lam), count=count,
                              positivity_rtol=self.eig_tol)

    def solve_lambda_j(self, k: float, j: int) -> CharacteristicValue | None:
        """Unique positive root of gamma_j(k, lam) = lam, or None if gamma_j(k, 0+) <= 0."""
        if j < 1:
            raise ValueError("mode index j is 1-based")
        A = self.assembler.inertial(k)
        if j > A.shape[0]:
            return None
        D = self.params.mu * self.assembler.bending(k)
        Q = self.assembler.Q(k)
        sigma = self.params.sigma

        def gamma(lam: float):
            pair = OperatorPair(P=lam * A + D, Q=Q, k=k, lam=lam, sigma=sigma)
            return gamma_spectrum(pair, count=j, positivity_rtol=self.eig_tol)

        at0 = gamma(0.0)
        if at0.n_positive < j or at0.gammas[j - 1] <= 0.0:
            return None

        lam_hi = self.lambda_max
        f_hi = gamma(lam_hi).gammas[j - 1] - lam_hi
        if f_hi > 0.0:
            raise BracketError(
                f"gamma_{j}(k={k:.6g}, lam={lam_hi:.6g}) = {f_hi + lam_hi:.6g} "
                "exceeds the universal bound sqrt(g/L0); discretization is inconsistent")

        lo, hi = 0.0, lam_hi
        lam = 0.5 * (lo + hi)
        for _ in range(BISECTION_MAX_ITER):
            lam = 0.5 * (lo + hi)
            fval = gamma(lam).gammas[j - 1] - lam
            # small roots need a relative stop: |gamma - lam| / lam is the
            # defect of the discrete energy balance
            if abs(fval) <= 0.1 * self.tol * min(1.0, lam):
                break
            if fval > 0.0:
                lo = lam
            else:
                hi = lam
        final = gamma(lam)
        return CharacteristicValue(
            lam=lam, j=j, k=k, sigma=sigma,
            phi=final.vectors[:, j - 1],
            gamma_residual=abs(final.gammas[j - 1] - lam))

    def solve_all_j(self, k: float, j_max: int) -> list[CharacteristicValue]:
        """All roots with index <= j_max at this k (ordered, possibly empty)."""
        out = []
        for j in range(1, j_max + 1):
            cv = self.solve_lambda_j(k, j)
            if cv is None:
                break
            out.append(cv)
        return out


def lattice_magnitudes(L: float, k_max: float) -> list[tuple[float, WaveVector]]:
    """Distinct magnitudes |(n1, n2)| / L in (0, k_max], each with one representative.

    lambda_j depends on |k| only, so magnitudes are deduplicated; the
    representative keeps n1 >= n2 >= 0.
    """
    n_max = int(math.floor(k_max * L + 1e-9))
    seen = {}
    for n1 in range(n_max + 1):
        for n2 in range(n1 + 1):
            m = n1 * n1 + n2 * n2
            if m == 0 or m > (k_max * L) ** 2 + 1e-9:
                continue
            if m not in seen:
                seen[m] = WaveVector(k1=n1 / L, k2=n2 / L)
    return [(math.sqrt(m) / L, wv) for m, wv in sorted(seen.items())]


def solve_lambda_j(profile: DensityProfile, params: PhysicalParams, k: float,
                   j: int, mesh: Mesh,
                   fixed_point_tol: float = DEFAULT_FIXED_POINT_TOL
                   ) -> CharacteristicValue | None:
    return DispersionSolver(mesh, profile, params, fixed_point_tol).solve_lambda_j(k, j)


def _stability_cutoff(solver: DispersionSolver) -> float:
    """Smallest k with sigma_c(k) <= sigma, by bisection (sigma_c decreasing in k)."""
    sigma = solver.params.sigma
    asm = solver.assembler
    lo, hi = 1e-6, 1.0
    while asm.sigma_critical(hi).value > sigma:
        hi *= 2.0
        if hi > 1e8:
            raise ArithmeticError("no stability cutoff below k = 1e8; sigma too small?")
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        if asm.sigma_critical(mid).value > sigma:
            lo = mid
        else:
            hi = mid
    return hi


def unstable_set(profile: DensityProfile, params: PhysicalParams, mesh: Mesh,
                 k_max: float | None = None,
                 fixed_point_tol: float = DEFAULT_FIXED_POINT_TOL,
                 threads: int = 1) -> UnstableSet:
    """Enumerate S = {k lattice: sigma < sigma_c(k)}, lambda_1 per member, and Lambda.

    sigma_c(k) is decreasing, so enumeration stops at the first stable
    magnitude.  A user-supplied k_max that truncates S triggers a warning.
    """
    solver = DispersionSolver(mesh, profile, params, fixed_point_tol)
    asm = solver.assembler
    sigma = params.sigma
    sigma_c = asm.sigma_critical().value

    result = UnstableSet(members=[], lambda1=[], Lambda=None, S_Lambda=[],
                         sigma=sigma, sigma_c=sigma_c)
    if sigma >= sigma_c:
        return result

    if sigma > 0:
        cutoff = _stability_cutoff(solver)
    else:
        cutoff = math.inf  # sigma = 0: every wavenumber is unstable
    if k_max is None:
        if not math.isfinite(cutoff):
            raise ValueError("k_max is required when sigma = 0 (S is unbounded)")
        k_enum = cutoff + 1.0 / params.L  # one safety lattice step past the cutoff
    else:
        k_enum = k_max
        if k_max < cutoff:
            result.truncated = True
            warnings.warn(
                f"k_max = {k_max:.6g} truncates the unstable set "
                f"(sigma_c({k_max:.6g}) > sigma up to k = {cutoff:.6g})",
                stacklevel=2)

    members: list[WaveVector] = []
    for k, wv in lattice_magnitudes(params.L, k_enum):
        if asm.sigma_critical(k).value <= sigma:
            break  # sigma_c(k) decreasing: no later magnitude can be unstable
        members.append(wv)

    def first_rate(wv: WaveVector) -> float | None:
        cv = solver.solve_lambda_j(wv.k, 1)
        return None if cv is None else cv.lam

    if threads > 1 and len(members) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rates = list(pool.map(first_rate, members))
    else:
        rates = [first_rate(wv) for wv in members]

    kept = [(wv, lam) for wv, lam in zip(members, rates) if lam is not None]
    result.members = [wv for wv, _ in kept]
    result.lambda1 = [lam for _, lam in kept]
    if kept:
        result.Lambda = max(result.lambda1)
        result.S_Lambda = [wv for wv, lam in kept if lam > (2.0 / 3.0) * result.Lambda]
    return result


def dispersion_curve(profile: DensityProfile, params: PhysicalParams, mesh: Mesh,
                     k_list, j_max: int,
                     fixed_point_tol: float = DEFAULT_FIXED_POINT_TOL,
                     threads: int = 1) -> list[dict]:
    """Rows (k, sigma_c(k), lambda_1..lambda_jmax) for CSV export; missing roots are None."""
    solver = DispersionSolver(mesh, profile, params, fixed_point_tol)

    def row(k: float) -> dict:
        sck = solver.assembler.sigma_critical(k).value
        lams = [cv.lam for cv in solver.solve_all_j(k, j_max)]
        lams += [None] * (j_max - len(lams))
        return {"k": k, "sigma_c_k": sck, "lambdas": lams}

    ks = list(k_list)
    if threads > 1 and len(ks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, ks))
    else:
        rows = [row(k) for k in ks]
    return sorted(rows, key=lambda r: r["k"])


def dispersion_csv(rows: list[dict], j_max: int, header_lines: list[str] | None = None) -> str:
    """Render dispersion rows in the schema k,sigma_c_k,lambda_1,...,lambda_J."""
    out = []
    for line in header_lines or []:
        out.append(f"# {line}")
    cols = ["k", "sigma_c_k"] + [f"lambda_{j}" for j in range(1, j_max + 1)]
    out.append(",".join(cols))
    for r in rows:
        cells = [f"{r['k']:.17g}", f"{r['sigma_c_k']:.17g}"]
        cells += ["" if lam is None else f"{lam:.17g}" for lam in r["lambdas"]]
        out.append(",".join(cells))
    return "\n".join(out) + "\n"
