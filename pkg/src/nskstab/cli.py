"""Command-line interface: thin client over the runner layer.

Exit codes: 0 success, 1 computational failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__, runners
from .config import ConfigError, parse_config
from .profile import ProfileError

SUBCOMMANDS = ("sigma-critical", "gamma-spectrum", "dispersion", "modes",
               "evolve", "instability-plan", "check", "serve")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nskstab",
        description="Rayleigh-Taylor stability toolkit for capillary fluids")
    parser.add_argument("--version", action="version", version=f"nskstab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, needs_config: bool = True):
        p = sub.add_parser(name, help=help_text)
        if needs_config:
            p.add_argument("--config", required=True, help="path to the run config file")
            p.add_argument("--out", default=None, help="output directory")
            p.add_argument("--threads", type=int, default=1,
                           help="worker cap for wavenumber sweeps")
            p.add_argument("--k", type=float, default=None,
                           help="override: wavenumber magnitude")
            p.add_argument("--j", type=int, default=None, help="override: mode index")
            p.add_argument("--lambda", dest="lam", type=float, default=None,
                           help="override: growth-rate parameter")
        return p

    add("sigma-critical", "critical capillary numbers sigma_c and sigma_c(k)")
    add("gamma-spectrum", "eigenvalue list at fixed (k, lambda, sigma)")
    add("dispersion", "dispersion sweep: CSV plus Lambda / S / S_Lambda summary")
    add("modes", "solve and export normal-mode documents")
    p_ev = add("evolve", "time-integrate the linearized single-mode dynamics")
    p_ev.add_argument("--init", choices=("eigen", "random"), default="eigen")
    p_ev.add_argument("--seed", type=int, default=0)
    add("instability-plan", "escape-time bookkeeping from mode documents")
    add("check", "run the invariant suite and report pass/fail per property")
    p_srv = add("serve", "start the HTTP service", needs_config=False)
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    return parser


def _out_dir(args, cfg) -> str:
    return args.out if args.out is not None else cfg.out_dir


def _dispatch(args) -> int:
    if args.command == "serve":
        import uvicorn

        from .service.app import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    cfg = parse_config(args.config)
    if args.command == "sigma-critical":
        res = runners.run_sigma_critical(cfg)
        print(f"sigma_c = {runners.fmt(res['sigma_c'])}"
              f"  (sigma = {runners.fmt(res['sigma'])},"
              f" {'subcritical' if res['subcritical'] else 'stable'})")
        print("k,sigma_c_k")
        for row in res["table"]:
            print(f"{runners.fmt(row['k'])},{runners.fmt(row['sigma_c_k'])}")
        return 0

    if args.command == "gamma-spectrum":
        res = runners.run_gamma_spectrum(cfg, k=args.k, lam=args.lam,
                                         count=args.j)
        print(f"k = {runners.fmt(res['k'])}, lambda = {runners.fmt(res['lambda'])}, "
              f"sigma = {runners.fmt(res['sigma'])}")
        for i, gam in enumerate(res["gammas"], start=1):
            tie = "  (tie with next)" if (i - 1) in res["ties"] else ""
            print(f"gamma_{i} = {runners.fmt(gam)}{tie}")
        print(f"n_positive = {res['n_positive']}")
        return 0

    if args.command == "dispersion":
        res = runners.run_dispersion(cfg, out_dir=_out_dir(args, cfg),
                                     threads=args.threads)
        if res["stable"]:
            print(f"stable at this sigma (sigma = {runners.fmt(res['sigma'])} "
                  f">= sigma_c = {runners.fmt(res['sigma_c'])}); S is empty")
        else:
            print(f"Lambda = {runners.fmt(res['Lambda'])}  "
                  f"(bound sqrt(g/L0) = {runners.fmt(res['lambda_bound'])})")
            print(f"S: {len(res['S'])} wavevectors; S_Lambda: {len(res['S_Lambda'])}")
        for w in res["warnings"]:
            print(f"warning: {w}", file=sys.stderr)
        return 0

    if args.command == "modes":
        res = runners.run_modes(cfg, out_dir=_out_dir(args, cfg), k=args.k, j=args.j)
        for w in res["warnings"]:
            print(f"warning: {w}", file=sys.stderr)
        for name, lam in zip(res["written"], res["lambdas"]):
            print(f"{name}  lambda = {runners.fmt(lam)}")
        return 0

    if args.command == "evolve":
        res = runners.run_evolve(cfg, out_dir=_out_dir(args, cfg), k=args.k,
                                 init=args.init, seed=args.seed)
        print(f"k = {runners.fmt(res['k'])}, dt = {runners.fmt(res['dt'])}, "
              f"t_end = {runners.fmt(res['t_end'])}")
        print(f"measured growth rate = {runners.fmt(res['lambda_est'])} "
              f"(r^2 = {res['r_squared']:.6f})")
        if res.get("lambda1") is not None:
            print(f"fixed-point lambda_1 = {runners.fmt(res['lambda1'])}")
        return 0

    if args.command == "instability-plan":
        res = runners.run_instability_plan(cfg, out_dir=_out_dir(args, cfg))
        if "error" in res:
            print(res["error"], file=sys.stderr)
            return 0
        print(json.dumps({k: res[k] for k in
                          ("delta", "epsilon0", "T_delta", "admissible", "C5")},
                         sort_keys=True))
        return 0

    if args.command == "check":
        results = runners.run_check(cfg)
        failed = 0
        for entry in results:
            status = "PASS" if entry["passed"] else "FAIL"
            detail = f"  {entry['detail']}" if entry["detail"] else ""
            print(f"{status} {entry['name']}{detail}")
            failed += 0 if entry["passed"] else 1
        print(f"{len(results) - failed}/{len(results)} properties passed")
        return 0 if failed == 0 else 1

    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, ProfileError) as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
