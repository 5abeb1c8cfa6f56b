"""Time integration of the per-wavenumber linearized dynamics.

Substituting d/dt for the growth-rate parameter in the fourth-order mode
equation gives A phi_tt + mu D phi_t = R phi with the same matrices the
spectral solver assembles (A inertial, D bending, R = Q at the configured
sigma).  The first-order form (phi_t = chi, A chi_t = R phi - mu D chi) is
advanced with the implicit midpoint rule, which for this linear system
satisfies the energy balance

    E(t) = chi^T A chi - phi^T R phi,   dE = -2 mu dt chi_mid^T D chi_mid

exactly up to solver round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .mesh import Mesh
from .profile import DensityProfile, PhysicalParams
from .spectrum import OperatorAssembler


@dataclass
class EvolutionOperators:
    """Matrices of the single-mode evolution at wavenumber magnitude k."""

    A: np.ndarray
    D: np.ndarray
    R: np.ndarray
    mass: np.ndarray
    k: float
    mu: float


@dataclass
class ModeState:
    phi: np.ndarray
    chi: np.ndarray
    t: float = 0.0


@dataclass
class GrowthEstimate:
    lambda_est: float
    window: tuple[float, float]
    r_squared: float


def assemble_evolution(mesh: Mesh, profile: DensityProfile,
                       params: PhysicalParams, k: float) -> EvolutionOperators:
    if k <= 0:
        raise ValueError("k must be positive")
    asm = OperatorAssembler(mesh, profile, params)
    return EvolutionOperators(A=asm.inertial(k), D=asm.bending(k), R=asm.Q(k),
                              mass=asm.form("M_one"), k=k, mu=params.mu)


class MidpointStepper:
    """Implicit midpoint stepper with a pre-factored constant-step matrix."""

    def __init__(self, ops: EvolutionOperators, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.ops = ops
        self.dt = dt
        G = ops.A + 0.5 * dt * ops.mu * ops.D - 0.25 * dt * dt * ops.R
        try:
            L = linalg.cholesky(G)
        except linalg.NotPositiveDefinite as exc:
            raise linalg.LinAlgError(
                f"midpoint system not positive definite at dt = {dt:.3g}; "
                "reduce the step below 2/sqrt(max generalized eigenvalue of (R, A))"
            ) from exc
        self._Ginv = linalg.cholesky_solve(L, np.eye(G.shape[0]))

    def step(self, state: ModeState) -> ModeState:
        ops, dt = self.ops, self.dt
        chi_mid = self._Ginv @ (ops.A @ state.chi + 0.5 * dt * (ops.R @ state.phi))
        phi_new = state.phi + dt * chi_mid
        chi_new = 2.0 * chi_mid - state.chi
        return ModeState(phi=phi_new, chi=chi_new, t=state.t + dt)

    def energy_mismatch(self, before: ModeState, after: ModeState) -> float:
        """Relative defect of the one-step energy identity."""
        ops, dt = self.ops, self.dt
        chi_mid = 0.5 * (before.chi + after.chi)
        e0 = before.chi @ ops.A @ before.chi - before.phi @ ops.R @ before.phi
        e1 = after.chi @ ops.A @ after.chi - after.phi @ ops.R @ after.phi
        expected = -2.0 * ops.mu * dt * (chi_mid @ ops.D @ chi_mid)
        scale = (abs(before.chi @ ops.A @ before.chi)
                 + abs(before.phi @ ops.R @ before.phi) + abs(expected))
        if scale == 0.0:
            return 0.0
        return abs((e1 - e0) - expected) / (dt * scale)


def step(ops: EvolutionOperators, state: ModeState, dt: float) -> ModeState:
    """One implicit-midpoint step (factors the midpoint matrix each call)."""
    return MidpointStepper(ops, dt).step(state)


def run_trajectory(ops: EvolutionOperators, state: ModeState, dt: float,
                   t_end: float, record_every: int = 1
                   ) -> tuple[list[ModeState], float]:
    """Integrate to t_end; returns recorded states and the worst energy defect."""
    stepper = MidpointStepper(ops, dt)
    n_steps = max(1, int(round((t_end - state.t) / dt)))
    states = [state]
    worst = 0.0
    current = state
    for i in range(n_steps):
        nxt = stepper.step(current)
        worst = max(worst, stepper.energy_mismatch(current, nxt))
        current = nxt
        if (i + 1) % record_every == 0 or i == n_steps - 1:
            states.append(current)
    return states, worst


def phi_norm(ops: EvolutionOperators, state: ModeState) -> float:
    return math.sqrt(max(0.0, float(state.phi @ ops.mass @ state.phi)))


def chi_norm(ops: EvolutionOperators, state: ModeState) -> float:
    return math.sqrt(max(0.0, float(state.chi @ ops.mass @ state.chi)))


def measure_growth(ops: EvolutionOperators, states: list[ModeState]) -> GrowthEstimate:
    """Least-squares growth rate of log ||phi|| over the trailing half of a run."""
    if len(states) < 10:
        raise ValueError("need at least 10 samples past the transient")
    ts = np.array([s.t for s in states])
    norms = np.array([phi_norm(ops, s) for s in states])
    half = len(states) // 2
    t, y = ts[half:], norms[half:]
    if np.any(y <= 0.0):
        return GrowthEstimate(lambda_est=-math.inf, window=(t[0], t[-1]), r_squared=0.0)
    logy = np.log(y)
    tbar, ybar = t.mean(), logy.mean()
    stt = float(np.sum((t - tbar) ** 2))
    slope = float(np.sum((t - tbar) * (logy - ybar)) / stt)
    fitted = ybar + slope * (t - tbar)
    ss_res = float(np.sum((logy - fitted) ** 2))
    ss_tot = float(np.sum((logy - ybar) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res < 1e-24 else 0.0)
    return GrowthEstimate(lambda_est=slope, window=(float(t[0]), float(t[-1])),
                          r_squared=r2)


def sharp_rate_check(ops: EvolutionOperators, states: list[ModeState],
                     Lambda: float, bound_constant: float = 10.0
                     ) -> tuple[bool, float]:
    """Check ||phi(t)|| <= C e^{Lambda t} ||phi(0)|| along a trajectory."""
    n0 = phi_norm(ops, states[0])
    if n0 <= 0.0:
        raise ValueError("sharp-rate check needs nonzero initial data")
    ratios = [phi_norm(ops, s) / (math.exp(Lambda * s.t) * n0) for s in states]
    peak = max(ratios)
    return peak <= bound_constant, peak
