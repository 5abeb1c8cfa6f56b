"""Orchestration layer shared by the CLI and the HTTP service.

Each runner takes a validated RunConfig, performs one unit of work, writes
any artifacts (full-precision CSV, JSON documents stamped with the config
hash and tool version) and returns a JSON-able summary dict.
"""

from __future__ import annotations

import json
import math
import warnings
from pathlib import Path

import numpy as np

from . import dispersion as dsp
from . import evolution as evo
from . import instability as ins
from . import linalg
from . import modes as mds
from . import spectrum as spc
from .config import RunConfig
from .mesh import assemble_form, build_mesh, integrate
from .profile import characteristic_length, lambda_upper_bound


def fmt(x: float) -> str:
    return f"{x:.17g}"


class Workspace:
    """Lazily built per-config artifacts (profile, mesh, solver)."""

    def __init__(self, cfg: RunConfig):
        cfg.validate()
        self.cfg = cfg
        self.profile = cfg.make_profile()
        self.params = cfg.physical_params()
        self.mesh = build_mesh(cfg.n_elements, cfg.quad_points)
        self._solver = None

    @property
    def solver(self) -> dsp.DispersionSolver:
        if self._solver is None:
            self._solver = dsp.DispersionSolver(
                self.mesh, self.profile, self.params, self.cfg.fixed_point_tol,
                eig_tol=self.cfg.eig_tol)
        return self._solver

    def pick_wavevector(self, k: float) -> dsp.WaveVector:
        """Lattice representative at magnitude k if one exists, else (k, 0)."""
        for mag, wv in dsp.lattice_magnitudes(self.params.L, k + 1.0 / self.params.L):
            if abs(mag - k) <= 1e-9 * max(1.0, k):
                return wv
        return dsp.WaveVector(k1=k, k2=0.0)


def _write_csv(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def run_sigma_critical(cfg: RunConfig, max_rows: int = 12) -> dict:
    ws = Workspace(cfg)
    sc = spc.sigma_critical(ws.mesh, ws.profile, cfg.g).value
    k_cap = cfg.k_max if cfg.k_max is not None else max_rows / cfg.L
    rows = []
    for k, _ in dsp.lattice_magnitudes(cfg.L, k_cap):
        sck = spc.sigma_critical_k(ws.mesh, ws.profile, cfg.g, k).value
        rows.append({"k": k, "sigma_c_k": sck})
        if len(rows) >= max_rows or (cfg.sigma > 0 and sck <= cfg.sigma):
            break
    return {"sigma_c": sc, "table": rows, "sigma": cfg.sigma,
            "subcritical": cfg.sigma < sc, **cfg.stamp()}


def run_gamma_spectrum(cfg: RunConfig, k: float | None = None,
                       lam: float | None = None, count: int | None = None) -> dict:
    ws = Workspace(cfg)
    k = k if k is not None else 1.0 / cfg.L
    lam = lam if lam is not None else 0.0
    count = count if count is not None else max(cfg.j_max, 4)
    pair = ws.solver.assembler.pair(k, lam)
    res = spc.gamma_spectrum(pair, count=count)
    return {"k": k, "lambda": lam, "sigma": cfg.sigma,
            "gammas": res.gammas.tolist(), "n_positive": res.n_positive,
            "ties": res.ties, **cfg.stamp()}


def run_dispersion(cfg: RunConfig, out_dir: str | Path | None = None,
                   threads: int = 1, include_rows: bool = False) -> dict:
    ws = Workspace(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        us = dsp.unstable_set(ws.profile, ws.params, ws.mesh, k_max=cfg.k_max,
                              fixed_point_tol=cfg.fixed_point_tol, threads=threads)
    if us.members:
        k_list = [wv.k for wv in us.members]
    else:
        k_list = [k for k, _ in dsp.lattice_magnitudes(cfg.L, 8.0 / cfg.L)]
    rows = dsp.dispersion_curve(ws.profile, ws.params, ws.mesh, k_list,
                                cfg.j_max, cfg.fixed_point_tol, threads=threads)
    summary = {
        "sigma": cfg.sigma,
        "sigma_c": us.sigma_c,
        "stable": not us.members,
        "Lambda": us.Lambda,
        "lambda_bound": ws.solver.lambda_max,
        "S": [[wv.k1, wv.k2] for wv in us.members],
        "S_Lambda": [[wv.k1, wv.k2] for wv in us.S_Lambda],
        "lambda1": us.lambda1,
        "truncated": us.truncated,
        "warnings": [str(w.message) for w in caught],
        **cfg.stamp(),
    }
    if not us.members:
        summary["note"] = "stable at this sigma"
    if include_rows:
        summary["rows"] = rows
    if out_dir is not None:
        out = Path(out_dir)
        stamp = cfg.stamp()
        header = [f"config_hash={stamp['config_hash']}", f"version={stamp['version']}"]
        _write_csv(out / "dispersion.csv", dsp.dispersion_csv(rows, cfg.j_max, header))
        _write_json(out / "dispersion_summary.json",
                    {k: v for k, v in summary.items() if k != "rows"})
    return summary


def _target_wavevector(ws: Workspace, k_override: float | None
                       ) -> tuple[dsp.WaveVector | None, dict | None]:
    """Default target: the wavevector achieving the maximal growth rate."""
    if k_override is not None:
        return ws.pick_wavevector(k_override), None
    us = dsp.unstable_set(ws.profile, ws.params, ws.mesh,
                          k_max=ws.cfg.k_max, fixed_point_tol=ws.cfg.fixed_point_tol)
    if not us.members:
        return None, {"stable": True, "sigma_c": us.sigma_c}
    best = us.members[int(np.argmax(us.lambda1))]
    return best, {"Lambda": us.Lambda, "stable": False, "sigma_c": us.sigma_c}


def compute_mode_documents(cfg: RunConfig, k: float | None = None,
                           j: int | None = None) -> dict:
    """Solve, reconstruct and export normal modes (in memory)."""
    ws = Workspace(cfg)
    wv, info = _target_wavevector(ws, k)
    result = {"documents": [], "names": [], "lambdas": [], "warnings": [],
              **cfg.stamp()}
    if wv is None:
        result["warnings"].append(
            f"sigma = {cfg.sigma:.6g} is not below sigma_c = {info['sigma_c']:.6g}; "
            "no normal modes exist")
        return result
    Lambda = (info or {}).get("Lambda")
    j_list = [j] if j is not None else list(range(1, cfg.j_max + 1))
    for jj in j_list:
        cv = ws.solver.solve_lambda_j(wv.k, jj)
        if cv is None:
            result["warnings"].append(
                f"only {jj - 1} mode(s) available at k = {wv.k:.6g}; "
                f"requested up to j = {j_list[-1]}")
            break
        mode = mds.reconstruct_mode(cv, wv, ws.profile, ws.params, ws.mesh)
        extra = dict(cfg.stamp())
        extra["gamma_residual"] = cv.gamma_residual
        if Lambda is not None:
            extra["Lambda"] = Lambda
        doc = mds.export_mode(mode, cfg.mode_samples, extra_metadata=extra)
        result["documents"].append(doc)
        result["names"].append(f"mode_k{wv.k1:.6g}_{wv.k2:.6g}_j{jj}.json")
        result["lambdas"].append(cv.lam)
    return result


def run_modes(cfg: RunConfig, out_dir: str | Path, k: float | None = None,
              j: int | None = None) -> dict:
    out = Path(out_dir)
    res = compute_mode_documents(cfg, k=k, j=j)
    for name, doc in zip(res["names"], res["documents"]):
        _write_json(out / name, doc)
    return {"written": res["names"], "lambdas": res["lambdas"],
            "warnings": res["warnings"], **cfg.stamp()}


def run_evolve(cfg: RunConfig, out_dir: str | Path | None = None,
               k: float | None = None, init: str = "eigen", seed: int = 0,
               include_trajectory: bool = False) -> dict:
    ws = Workspace(cfg)
    wv, info = _target_wavevector(ws, k)
    if wv is None:
        wv = dsp.WaveVector(k1=1.0 / cfg.L, k2=0.0)
    ops = evo.assemble_evolution(ws.mesh, ws.profile, ws.params, wv.k)
    cv = ws.solver.solve_lambda_j(wv.k, 1)
    lam1 = cv.lam if cv is not None else None

    if init == "eigen" and cv is not None:
        phi0 = cv.phi.copy()
        chi0 = lam1 * cv.phi
    else:
        rng = np.random.default_rng(seed)
        phi0 = rng.standard_normal(ops.A.shape[0])
        chi0 = rng.standard_normal(ops.A.shape[0])
    state0 = evo.ModeState(phi=phi0, chi=chi0, t=0.0)

    dt = cfg.dt if cfg.dt is not None else 1e-2 / max(lam1 or 0.0, 1.0)
    t_end = cfg.t_end if cfg.t_end is not None else (3.0 / lam1 if lam1 else 10.0)
    record_every = max(1, int(round(t_end / dt)) // 2000)
    states, drift = evo.run_trajectory(ops, state0, dt, t_end, record_every)
    growth = evo.measure_growth(ops, states)
    trajectory = [(s.t, evo.phi_norm(ops, s), evo.chi_norm(ops, s)) for s in states]

    stamp = cfg.stamp()
    summary = {
        "k": wv.k, "k1": wv.k1, "k2": wv.k2, "dt": dt, "t_end": t_end,
        "init": init if (init != "eigen" or cv is not None) else "random (no eigenmode)",
        "lambda1": lam1,
        "lambda_est": growth.lambda_est,
        "r_squared": growth.r_squared,
        "window": list(growth.window),
        "energy_drift": drift,
        **stamp,
    }
    Lambda = (info or {}).get("Lambda")
    if Lambda is not None:
        ok, ratio = evo.sharp_rate_check(ops, states, Lambda)
        summary["Lambda"] = Lambda
        summary["sharp_rate_ok"] = ok
        summary["sharp_rate_max_ratio"] = ratio
    if include_trajectory:
        summary["trajectory"] = trajectory
    if out_dir is not None:
        out = Path(out_dir)
        lines = [f"# config_hash={stamp['config_hash']}",
                 f"# version={stamp['version']}", "t,norm_phi,norm_chi"]
        for t, nphi, nchi in trajectory:
            lines.append(",".join([fmt(t), fmt(nphi), fmt(nchi)]))
        _write_csv(out / "trajectory.csv", "\n".join(lines) + "\n")
        _write_json(out / "growth.json",
                    {k_: v for k_, v in summary.items() if k_ != "trajectory"})
    return summary


def run_instability_plan(cfg: RunConfig, out_dir: str | Path | None = None,
                         mode_documents: list[dict] | None = None) -> dict:
    """Bookkeeping from mode documents (computing them first if absent)."""
    ws = Workspace(cfg)
    docs = list(mode_documents or [])
    fresh = False
    if not docs and out_dir is not None:
        out = Path(out_dir)
        for path in sorted(out.glob("mode_*.json")):
            doc = json.loads(path.read_text())
            if doc.get("metadata", {}).get("config_hash") == cfg.config_hash:
                docs.append(doc)
    if not docs:
        fresh = True
        res = compute_mode_documents(cfg)
        docs = res["documents"]
        if out_dir is not None:
            for name, doc in zip(res["names"], docs):
                _write_json(Path(out_dir) / name, doc)
    if not docs:
        return {"error": "no modes available (stable regime?)", **cfg.stamp()}

    samples = len(docs[0]["columns"]["x3"])
    sample_mesh = build_mesh(samples - 1)
    modes = [ins.mode_from_document(d, sample_mesh) for d in docs]
    modes.sort(key=lambda m: -m.lam)
    Lambda = max((d["metadata"].get("Lambda", -math.inf) for d in docs),
                 default=-math.inf)
    if not math.isfinite(Lambda):
        Lambda = max(m.lam for m in modes)

    coeffs = list(cfg.coefficients)[:len(modes)]
    coeffs += [0.0] * (len(modes) - len(coeffs))
    comb = ins.make_combination(modes, coeffs, Lambda)
    plan = ins.build_plan(comb, cfg.delta, cfg.epsilon0,
                          c3=cfg.c3, c4=cfg.c4, delta0=cfg.delta0)
    slacks = [ins.max_lambda_inequality(m, Lambda, ws.params, ws.profile)[1]
              for m in modes]
    doc = ins.export_plan(plan, comb, extra_metadata={
        "max_lambda_slacks": slacks,
        "mode_documents_recomputed": fresh,
        **cfg.stamp()})
    if out_dir is not None:
        _write_json(Path(out_dir) / "plan.json", doc)
    return doc


def run_check(cfg: RunConfig) -> list[dict]:
    """Invariant suite over every module; one pass/fail entry per property."""
    ws = Workspace(cfg)
    checks: list[dict] = []

    def record(name: str, fn) -> None:
        try:
            detail = fn()
            checks.append({"name": name, "passed": True,
                           "detail": detail if isinstance(detail, str) else ""})
        except Exception as exc:  # noqa: BLE001 - report, do not crash the suite
            checks.append({"name": name, "passed": False, "detail": str(exc)})

    profile, params, mesh = ws.profile, ws.params, ws.mesh
    rng = np.random.default_rng(7)

    def check_profile_derivatives():
        xs = rng.uniform(0.02, 0.98, size=100)
        hstep = 1e-5
        for order in (1, 2, 3):
            lower = profile(xs - hstep, order - 1)
            upper = profile(xs + hstep, order - 1)
            fd = (upper - lower) / (2 * hstep)
            ref = profile(xs, order)
            scale = np.maximum(np.abs(ref), 1.0)
            worst = np.max(np.abs(fd - ref) / scale)
            assert worst < 1e-6, f"order {order}: fd mismatch {worst:.2e}"

    def check_characteristic_scaling():
        from .profile import DensityProfile
        p3 = DensityProfile(profile.kind, profile.params,
                            lambda x: 3 * profile(x, 0), lambda x: 3 * profile(x, 1),
                            lambda x: 3 * profile(x, 2), lambda x: 3 * profile(x, 3))
        assert characteristic_length(profile).L0 == characteristic_length(p3).L0

    def check_bound_scaling():
        from .profile import PhysicalParams as PP
        b1 = lambda_upper_bound(profile, params)
        b2 = lambda_upper_bound(profile, PP(g=2 * params.g, mu=params.mu,
                                            sigma=params.sigma, L=params.L))
        assert abs(b2 - math.sqrt(2.0) * b1) < 1e-14 * b1

    def check_form_symmetry():
        for w, a in ((lambda x: profile(x, 0), 0), (lambda x: np.ones_like(x), 2)):
            M = assemble_form(mesh, w, a, a).matrix
            assert np.max(np.abs(M - M.T)) == 0.0

    def check_bending_positive():
        H = ws.solver.assembler.form("H_one")
        for _ in range(5):
            c = rng.standard_normal(H.shape[0])
            assert c @ H @ c > 0

    def check_quadrature_convergence():
        f = lambda x: np.sin(np.pi * x)
        exact = 2.0 / np.pi
        e1 = abs(integrate(build_mesh(8, cfg.quad_points), f) - exact)
        e2 = abs(integrate(build_mesh(16, cfg.quad_points), f) - exact)
        assert e1 / max(e2, 1e-300) >= 10.0

    def check_eig_scaling():
        pair = ws.solver.assembler.pair(2.0 / params.L, 0.1)
        r1 = spc.gamma_spectrum(pair, 3).gammas
        pair2 = spc.OperatorPair(P=pair.P, Q=3.0 * pair.Q, k=pair.k,
                                 lam=pair.lam, sigma=pair.sigma)
        r2 = spc.gamma_spectrum(pair2, 3).gammas
        assert np.max(np.abs(r2 - 3.0 * r1)) <= 1e-12 * max(1.0, np.max(np.abs(r2)))

    def check_P_positive_definite():
        for lam in (0.0, 1.0):
            for k in (0.0, math.pi):
                linalg.cholesky(ws.solver.assembler.P(k, lam))

    def check_gamma_rayleigh():
        pair = ws.solver.assembler.pair(math.pi / params.L, 0.2)
        res = spc.gamma_spectrum(pair, 1)
        g1 = res.gammas[0]
        for _ in range(200):
            v = rng.standard_normal(pair.P.shape[0])
            quot = (v @ pair.Q @ v) / (v @ pair.P @ v)
            assert quot <= g1 + 1e-10 * max(1.0, abs(g1))

    def check_gamma_monotone():
        k = 2.0 / params.L
        lams = np.linspace(0.0, ws.solver.lambda_max, 5)
        g = [ws.solver.gamma_at(k, lam, 1).gammas[0] for lam in lams]
        assert all(a > b for a, b in zip(g[:-1], g[1:])), f"gamma_1 not decreasing: {g}"

    def check_sigma_ck_decreasing():
        vals = [ws.solver.assembler.sigma_critical(k).value for k in (1.0, 2.0, 4.0)]
        assert vals[0] > vals[1] > vals[2]

    def solve_first():
        wv, _ = _target_wavevector(ws, None)
        if wv is None:
            return None, None
        return wv, ws.solver.solve_lambda_j(wv.k, 1)

    def check_fixed_point():
        wv, cv = solve_first()
        if cv is None:
            return "skipped: stable regime"
        assert cv.gamma_residual <= cfg.fixed_point_tol
        assert 0.0 < cv.lam <= ws.solver.lambda_max + 1e-12
        return f"lambda_1({wv.k:.4g}) = {cv.lam:.8g}"

    def check_variational_identity():
        wv, cv = solve_first()
        if cv is None:
            return "skipped: stable regime"
        mode = mds.reconstruct_mode(cv, wv, profile, params, mesh)
        rel = _variational_identity_defect(mode)
        assert rel <= 1e-8, f"identity defect {rel:.2e}"

    def check_mode_reconstruction():
        wv, cv = solve_first()
        if cv is None:
            return "skipped: stable regime"
        mode = mds.reconstruct_mode(cv, wv, profile, params, mesh)
        sysres = mds.system_residual(mode)
        assert mode.residuals["divergence"] <= 1e-10
        assert max(sysres.values()) <= 1e-7
        ends = np.array([0.0, 1.0])
        sup = np.max(np.abs(mode.phi_at(np.linspace(0, 1, 500))))
        for arr in (mode.phi_at(ends), mode.phi_at(ends, 1),
                    mode.v1_at(ends), mode.v2_at(ends)):
            assert np.max(np.abs(arr)) <= 1e-12 * sup

    def check_evolution_energy():
        wv, cv = solve_first()
        if cv is None:
            return "skipped: stable regime"
        ops = evo.assemble_evolution(mesh, profile, params, wv.k)
        state0 = evo.ModeState(phi=cv.phi.copy(), chi=cv.lam * cv.phi, t=0.0)
        states, drift = evo.run_trajectory(ops, state0, 1e-2 / cv.lam, 1.0 / cv.lam, 10)
        assert drift <= 1e-8, f"energy drift {drift:.2e}"
        growth = evo.measure_growth(ops, states)
        rel = abs(growth.lambda_est - cv.lam) / cv.lam
        assert rel <= 1e-3, f"growth mismatch {rel:.2e}"

    def check_stable_regime():
        k = 2.0 / params.L
        sck = ws.solver.assembler.sigma_critical(k).value
        from .profile import PhysicalParams as PP
        stable = PP(g=params.g, mu=params.mu, sigma=2.0 * sck, L=params.L)
        asm = spc.OperatorAssembler(mesh, profile, stable)
        ops = evo.EvolutionOperators(A=asm.inertial(k), D=asm.bending(k),
                                     R=asm.Q(k), mass=asm.form("M_one"),
                                     k=k, mu=stable.mu)
        rng2 = np.random.default_rng(11)
        state0 = evo.ModeState(phi=rng2.standard_normal(ops.A.shape[0]),
                               chi=rng2.standard_normal(ops.A.shape[0]), t=0.0)
        states, _ = evo.run_trajectory(ops, state0, 1e-2, 10.0, 50)
        n0 = evo.phi_norm(ops, states[0])
        assert all(evo.phi_norm(ops, s) <= 2.0 * n0 for s in states)

    def check_escape_closed_form():
        wv, cv = solve_first()
        if cv is None:
            return "skipped: stable regime"
        mode = mds.reconstruct_mode(cv, wv, profile, params, mesh)
        comb = ins.make_combination([mode], [1.0], cv.lam)
        T = ins.escape_time(comb, cfg.delta, cfg.epsilon0)
        T_exact = math.log(cfg.epsilon0 / cfg.delta) / cv.lam
        assert abs(T - T_exact) <= 1e-10 * max(1.0, T_exact)
        assert ins.envelope_F(comb, 1.0) > ins.envelope_F(comb, 0.0)

    record("profile.derivatives-match-finite-differences", check_profile_derivatives)
    record("profile.characteristic-length-scale-invariant", check_characteristic_scaling)
    record("profile.lambda-bound-sqrt-g-scaling", check_bound_scaling)
    record("mesh.assembled-forms-symmetric", check_form_symmetry)
    record("mesh.bending-form-positive-definite", check_bending_positive)
    record("mesh.quadrature-convergence-order", check_quadrature_convergence)
    record("linalg.generalized-eig-scaling", check_eig_scaling)
    record("spectrum.P-positive-definite", check_P_positive_definite)
    record("spectrum.gamma1-dominates-rayleigh-quotients", check_gamma_rayleigh)
    record("spectrum.gamma-decreasing-in-lambda", check_gamma_monotone)
    record("spectrum.sigma-ck-decreasing", check_sigma_ck_decreasing)
    record("dispersion.fixed-point-residual-and-bound", check_fixed_point)
    record("spectrum.variational-identity", check_variational_identity)
    record("modes.reconstruction-residuals", check_mode_reconstruction)
    record("evolution.energy-identity-and-growth", check_evolution_energy)
    record("evolution.stable-regime-no-growth", check_stable_regime)
    record("instability.escape-time-closed-form", check_escape_closed_form)
    return checks


def _variational_identity_defect(mode: mds.NormalMode) -> float:
    """Relative defect of the growth-rate energy balance, via refined quadrature."""
    fine = build_mesh(mode.mesh.n_elements, 8)
    pts, wts = fine.quad_points_global()
    lam, mu, sigma, g = mode.lam, mode.params.mu, mode.sigma, mode.params.g
    k = mode.k
    phi = fine.eval_coeffs(mode.phi_coeffs, pts)
    dphi = fine.eval_coeffs(mode.phi_coeffs, pts, 1)
    ddphi = fine.eval_coeffs(mode.phi_coeffs, pts, 2)
    rho, drho = mode.profile(pts, 0), mode.profile(pts, 1)
    lhs = (lam * lam * float(wts @ (rho * (k * k * phi ** 2 + dphi ** 2)))
           + lam * mu * float(wts @ (ddphi ** 2 + 2 * k * k * dphi ** 2
                                     + k ** 4 * phi ** 2)))
    rhs = (g * k * k * float(wts @ (drho * phi ** 2))
           - sigma * k * k * float(wts @ (drho ** 2 * dphi ** 2))
           - sigma * k ** 4 * float(wts @ (drho ** 2 * phi ** 2)))
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs))
