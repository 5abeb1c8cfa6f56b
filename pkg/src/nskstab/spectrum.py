"""Stability operators on the mesh: P, Q, the gamma-spectrum, and critical capillary numbers.

For a wavenumber magnitude k, growth-rate parameter lam and capillary
coefficient sigma, the clamped-space operators are

    P(k, lam) = lam * [k^2 M(rho0) + K(rho0)]
                + mu * [H(1) + 2 k^2 K(1) + k^4 M(1)]
    Q(k)      = g k^2 M(rho0') - sigma k^2 K((rho0')^2) - sigma k^4 M((rho0')^2)

where M, K, H are the (0,0), (1,1), (2,2) weighted forms.  The divergence
term of Q is assembled weakly (integrated by parts), which keeps Q exactly
symmetric.  The gamma-spectrum solves Q v = gamma P v; P is SPD for every
lam >= 0 thanks to the bending block, so the generalized problem replaces
any explicit square root of P.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .mesh import Mesh, assemble_form
from .profile import DensityProfile, PhysicalParams

# relative tolerance for counting positive eigenvalues and flagging ties
POSITIVITY_RTOL = 1e-12
TIE_RTOL = 1e-10


@dataclass
class OperatorPair:
    """P and Q restricted to the clamped space at fixed (k, lambda, sigma)."""

    P: np.ndarray
    Q: np.ndarray
    k: float
    lam: float
    sigma: float


@dataclass
class SpectrumResult:
    """Descending generalized eigenvalues gamma_n with eigenvectors and positive count."""

    gammas: np.ndarray
    vectors: np.ndarray
    n_positive: int
    ties: list = field(default_factory=list)


@dataclass
class CriticalCapillary:
    """A critical capillary number and the discrete maximizer achieving it."""

    value: float
    maximizer: np.ndarray


class OperatorAssembler:
    """Caches the profile-weighted base forms; recombines them per (k, lam, sigma).

    The base forms depend on mesh and profile only, so dispersion sweeps and
    fixed-point iterations cost one matrix recombination per evaluation.
    """

    def __init__(self, mesh: Mesh, profile: DensityProfile, params: PhysicalParams):
        self.mesh = mesh
        self.profile = profile
        self.params = params
        one = lambda x: np.ones_like(x)
        rho = lambda x: profile(x, 0)
        drho = lambda x: profile(x, 1)
        drho2 = lambda x: profile(x, 1) ** 2
        self._forms = {
            "M_rho": assemble_form(mesh, rho, 0, 0),
            "K_rho": assemble_form(mesh, rho, 1, 1),
            "M_one": assemble_form(mesh, one, 0, 0),
            "K_one": assemble_form(mesh, one, 1, 1),
            "H_one": assemble_form(mesh, one, 2, 2),
            "M_drho": assemble_form(mesh, drho, 0, 0),
            "K_drho2": assemble_form(mesh, drho2, 1, 1),
            "M_drho2": assemble_form(mesh, drho2, 0, 0),
        }
        self._restricted: dict[tuple[str, str], np.ndarray] = {}

    def form(self, name: str, space: str = "clamped") -> np.ndarray:
        key = (name, space)
        if key not in self._restricted:
            full = self._forms[name].full
            act = self.mesh.active_dofs(space)
            self._restricted[key] = full[np.ix_(act, act)]
        return self._restricted[key]

    def inertial(self, k: float) -> np.ndarray:
        """lam-block of P: k^2 M(rho0) + K(rho0)."""
        return k * k * self.form("M_rho") + self.form("K_rho")

    def bending(self, k: float) -> np.ndarray:
        """mu-block of P (without mu): H(1) + 2 k^2 K(1) + k^4 M(1)."""
        return (self.form("H_one") + 2.0 * k * k * self.form("K_one")
                + k ** 4 * self.form("M_one"))

    def P(self, k: float, lam: float) -> np.ndarray:
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        return lam * self.inertial(k) + self.params.mu * self.bending(k)

    def Q(self, k: float) -> np.ndarray:
        g, sigma = self.params.g, self.params.sigma
        return (g * k * k * self.form("M_drho")
                - sigma * k * k * self.form("K_drho2")
                - sigma * k ** 4 * self.form("M_drho2"))

    def pair(self, k: float, lam: float) -> OperatorPair:
        return OperatorPair(P=self.P(k, lam), Q=self.Q(k), k=k, lam=lam,
                            sigma=self.params.sigma)

    def sigma_critical(self, k: float | None = None) -> CriticalCapillary:
        """Critical capillary number from the cached forms (global or at wavenumber k)."""
        A = self.params.g * self.form("M_drho", "h01")
        B = self.form("K_drho2", "h01")
        if k is not None:
            if k <= 0:
                raise ValueError("k must be positive")
            B = B + k * k * self.form("M_drho2", "h01")
        return _critical_from_forms(A, B)


def assemble_P(mesh: Mesh, profile: DensityProfile, params: PhysicalParams,
               k: float, lam: float) -> np.ndarray:
    return OperatorAssembler(mesh, profile, params).P(k, lam)


def assemble_Q(mesh: Mesh, profile: DensityProfile, params: PhysicalParams,
               k: float) -> np.ndarray:
    return OperatorAssembler(mesh, profile, params).Q(k)


def gamma_spectrum(pair: OperatorPair, count: int, method: str = "lapack",
                   positivity_rtol: float = POSITIVITY_RTOL) -> SpectrumResult:
    """Top `count` eigenvalues of Q v = gamma P v, descending.

    `positivity_rtol` (relative to max(1, |gamma_1|)) decides which
    eigenvalues count as positive; the default sits at the accuracy floor
    of the eigensolver.
    """
    eig = linalg.sym_generalized_eig(pair.Q, pair.P, count=count, method=method)
    gammas = eig.values
    top = abs(gammas[0]) if gammas.size else 0.0
    n_positive = int(np.sum(gammas > positivity_rtol * max(1.0, top)))
    ties = [i for i in range(len(gammas) - 1)
            if abs(gammas[i] - gammas[i + 1]) < TIE_RTOL * max(top, 1e-300)]
    return SpectrumResult(gammas=gammas, vectors=eig.vectors,
                          n_positive=n_positive, ties=ties)


def _critical_from_forms(A: np.ndarray, B: np.ndarray) -> CriticalCapillary:
    eig = linalg.sym_generalized_eig(A, B, count=1)
    value = float(eig.values[0])
    if not np.isfinite(value) or value <= 0:
        raise linalg.LinAlgError(
            f"critical capillary number came out non-positive ({value:.3g}); "
            "the profile should have rho0' > 0")
    return CriticalCapillary(value=value, maximizer=eig.vectors[:, 0])


def _critical_forms(mesh: Mesh, profile: DensityProfile, g: float,
                    k: float | None) -> tuple[np.ndarray, np.ndarray]:
    act = mesh.active_dofs("h01")
    ix = np.ix_(act, act)
    drho = lambda x: profile(x, 1)
    drho2 = lambda x: profile(x, 1) ** 2
    A = g * assemble_form(mesh, drho, 0, 0).full[ix]
    B = assemble_form(mesh, drho2, 1, 1).full[ix]
    if k is not None:
        B = B + k * k * assemble_form(mesh, drho2, 0, 0).full[ix]
    return A, B


def sigma_critical(mesh: Mesh, profile: DensityProfile, g: float) -> CriticalCapillary:
    """Largest sigma with g int rho0' v^2 = sigma int (rho0')^2 (v')^2 solvable in H0^1.

    Posed on the value-constrained Hermite space (endpoint slopes stay free),
    a conforming H0^1 subspace; the value converges from below under refinement.
    """
    return _critical_from_forms(*_critical_forms(mesh, profile, g, None))


def sigma_critical_k(mesh: Mesh, profile: DensityProfile, g: float,
                     k: float) -> CriticalCapillary:
    """Wavenumber-dependent critical capillary number; decreasing in k."""
    if k <= 0:
        raise ValueError("k must be positive")
    return _critical_from_forms(*_critical_forms(mesh, profile, g, k))
