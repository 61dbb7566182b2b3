"""Command-line driver for the taper computations.

Exit codes: 0 success, 1 a reported check failed, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import eigen, optimize, transfer, transient
from .config import RunConfig, parse_override
from .errors import ConfigError, NumericalError
from .io import params_to_json, read_profile, write_csv, write_json, write_profile
from .model import TaperProfile, change_of_variable, random_admissible_profile

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SIGN_SLACK = 1e-10


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def resolve_profile(choice: str | None, cfg: RunConfig) -> TaperProfile:
    """``bump`` (default), ``cylinder``, ``random`` (seeded) or a path to an x,a CSV."""
    if choice is None or choice == "bump":
        return TaperProfile.bump(cfg.a0, cfg.ell)
    if choice == "cylinder":
        return TaperProfile.constant(cfg.a0, cfg.ell)
    if choice == "random":
        return random_admissible_profile(np.random.default_rng(cfg.seed), cfg.a0, cfg.ell, cfg.S, cfg.n_nodes)
    return read_profile(choice)


def _random_profiles(cfg: RunConfig) -> list[TaperProfile]:
    rng = np.random.default_rng(cfg.seed)
    return [random_admissible_profile(rng, cfg.a0, cfg.ell, cfg.S, cfg.n_nodes) for _ in range(cfg.n_profiles)]


def _sign_bound(mu1: float, mu2: float, gamma: float) -> bool:
    if gamma == 0:
        return abs(mu1) <= 1e-8 and mu2 > -SIGN_SLACK
    return -gamma - SIGN_SLACK < mu1 < SIGN_SLACK and mu2 > -SIGN_SLACK


def cmd_eigen(cfg: RunConfig, profile: str | None = None) -> int:
    params = cfg.params
    a = resolve_profile(profile, cfg)
    system = eigen.assemble(a, params, cfg.x_cells)
    pairs = eigen.solve_spectrum(system, min(cfg.modes, system.size))
    out = Path(cfg.out)
    write_csv(
        out / "spectrum.csv",
        ["n", "mu_n", "phi_n_at_0", "phi_n_at_ell"],
        [[p.n for p in pairs], [p.mu for p in pairs], [p.phi_at_0 for p in pairs], [p.phi_at_ell for p in pairs]],
    )
    gamma = params.gamma
    bound = "|mu1| <= 1e-8 (gamma = 0)" if gamma == 0 else f"-gamma < mu1 < 0 < mu2 (gamma = {_fmt(gamma)})"
    print(f"sign bound: {bound}")
    ok = True
    for label, prof in [("profile", a)] + [(f"random[{i}]", p) for i, p in enumerate(_random_profiles(cfg))]:
        mus = [p.mu for p in eigen.solve_spectrum(eigen.assemble(prof, params, cfg.x_cells), 2)]
        passed = _sign_bound(mus[0], mus[1], gamma)
        ok &= passed
        print(f"{label}: mu1={_fmt(mus[0])} mu2={_fmt(mus[1])} {'PASS' if passed else 'FAIL'}")
    if np.min(a.a) >= cfg.a0:
        cmp = eigen.compare_mu1(a, cfg.a0, params, cfg.x_cells)
        print(f"margin mu1(a) - mu1(a0) = {_fmt(cmp.margin)}")
    print(f"wrote {out / 'spectrum.csv'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_transfer(cfg: RunConfig, profile: str | None = None) -> int:
    params = cfg.params
    a = resolve_profile(profile, cfg)
    T_time = transient.transfer_time_domain(a, params, cfg.modes, cfg.x_cells)
    red = change_of_variable(a, cfg.y_cells)
    state = transfer.steady_state(red.rho, params)
    gap = abs(T_time - state.T1) / abs(state.T1)
    cylinder = transfer.constant_rho_T1(cfg.a0**3, cfg.ell1, params)
    out = Path(cfg.out)
    write_csv(out / "state.csv", ["y", "w0", "q1", "q2", "f"], [state.y, state.w0, state.q1, state.q2, state.f])
    ok = gap <= 1e-4
    print(f"T (time domain)  = {_fmt(T_time)}")
    print(f"T1 (Laplace)     = {_fmt(state.T1)}")
    print(f"relative gap     = {gap:.3e} {'PASS' if ok else 'FAIL'} (tol 1e-4)")
    print(f"cylinder cosh(omega0 ell1) = {_fmt(cylinder)}")
    print(f"wrote {out / 'state.csv'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_transient(cfg: RunConfig, profile: str | None = None) -> int:
    a = resolve_profile(profile, cfg)
    sol = transient.modal_solution(a, cfg.params, cfg.modes, cfg.x_cells)
    times = np.linspace(cfg.t_max / cfg.n_times, cfg.t_max, cfg.n_times)
    rows = transient.time_series(sol, times)
    out = Path(cfg.out)
    write_csv(out / "timeseries.csv", ["t", "v0", "vell"], rows.T)
    print(f"T (time domain) = {_fmt(transient.transfer_time_domain(a, cfg.params, sol=sol))}")
    print(f"last-term size at ell = {transient.tail_estimate(sol, a.ell):.3e}")
    print(f"wrote {out / 'timeseries.csv'}")
    return EXIT_OK


def cmd_sweep_xi(cfg: RunConfig) -> int:
    params = cfg.params
    xis = np.linspace(0.0, cfg.ell1, cfg.n_xi)
    closed, numeric, slope = [], [], []
    for xi in xis:
        bb = transfer.BangBangProfile(float(xi), cfg.M, cfg.a0, cfg.ell1)
        closed.append(transfer.bang_bang_T1(bb, params))
        numeric.append(transfer.transfer_T1(bb.to_rho(cfg.y_cells), params))
        slope.append(transfer.bang_bang_dT1(bb, params))
    closed, numeric = np.array(closed), np.array(numeric)
    out = Path(cfg.out)
    write_csv(out / "sweep.csv", ["xi1", "T1_closed", "T1_numeric", "dT1"], [xis, closed, numeric, slope])
    monotone = bool(np.all(np.diff(closed) >= 0))
    gap = float(np.max(np.abs(closed - numeric) / np.abs(closed)))
    ok = monotone and gap <= 1e-6
    print(f"T1_closed nondecreasing: {monotone}")
    print(f"max relative gap closed vs numeric = {gap:.3e} (tol 1e-6)")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_optimize(cfg: RunConfig, criterion: str = "mu1") -> int:
    params = cfg.params
    search = optimize.SearchConfig(
        n_nodes=cfg.n_nodes, n_cells=cfg.x_cells if criterion == "mu1" else cfg.y_cells,
        max_iter=cfg.max_iter, seed=cfg.seed, ell=cfg.ell,
    )
    reports = optimize.multi_start(criterion, cfg.a0, cfg.S, params, search, cfg.n_profiles, M=cfg.M)
    best = min(reports, key=lambda r: r.best_value)
    out = Path(cfg.out)
    if criterion == "mu1":
        profile_path = write_profile(out / "best_profile.csv", best.best_profile)
    else:
        rho = best.best_profile
        profile_path = write_csv(out / "best_rho.csv", ["y", "rho"], [rho.midpoints, rho.values])
    ok = all(r.passes_gap_check() for r in reports)
    report = {
        **best.to_dict(),
        "profile_csv": profile_path.name,
        "restart_values": [r.best_value for r in reports],
        "gap_check": ok,
        "params": params_to_json(params, cfg.ell, cfg.a0, cfg.S),
        "seed": cfg.seed,
    }
    write_json(out / "report.json", report)
    print(f"criterion {criterion}: best = {_fmt(best.best_value)}, cylinder = {_fmt(best.cylinder_value)}")
    print(f"gap = {best.gap:.3e}; all {len(reports)} restarts within tolerance: {ok}")
    print(f"wrote {out / 'report.json'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_check_all(cfg: RunConfig) -> int:
    root = Path(cfg.out)
    steps = [
        ("eigen", lambda c: cmd_eigen(c)),
        ("transfer", lambda c: cmd_transfer(c)),
        ("transient", lambda c: cmd_transient(c)),
        ("sweep-xi", cmd_sweep_xi),
        ("optimize-mu1", lambda c: cmd_optimize(c, "mu1")),
        ("optimize-T", lambda c: cmd_optimize(c, "T")),
    ]
    codes = []
    for name, fn in steps:
        print(f"== {name}")
        codes.append(fn(cfg.with_overrides({"out": str(root / name)})))
    check = optimize.verify_pullback(cfg.a0, cfg.params, cfg.ell, cfg.modes, cfg.x_cells)
    print(f"== pullback: T(a0) = {_fmt(check.T_time)}, T1(a0^3) = {_fmt(check.T1)}, ok = {check.ok}")
    codes.append(EXIT_OK if check.ok else EXIT_CHECK)
    for (name, _), code in zip(steps + [("pullback", None)], codes):
        print(f"{name}: {'PASS' if code == EXIT_OK else 'FAIL'}")
    return max(codes)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--modes", type=int, help="number of eigenmodes")
    common.add_argument("--cells", type=int, help="cells of both the x- and the y-grid")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--set", action="append", default=[], metavar="K=V", help="override a config key")

    parser = argparse.ArgumentParser(prog="dendrite-opt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("eigen", "transfer", "transient"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--profile", help="bump, cylinder, random, or a CSV with header x,a")
    sub.add_parser("sweep-xi", parents=[common])
    p = sub.add_parser("optimize", parents=[common])
    p.add_argument("--criterion", choices=["mu1", "T"], default="mu1")
    sub.add_parser("check-all", parents=[common])
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    overrides = dict(parse_override(s) for s in args.set)
    for flag, key in (("out", "out"), ("modes", "modes"), ("seed", "seed")):
        if getattr(args, flag) is not None:
            overrides[key] = getattr(args, flag)
    if args.cells is not None:
        overrides["x_cells"] = overrides["y_cells"] = args.cells
    return cfg.with_overrides(overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "eigen":
            return cmd_eigen(cfg, args.profile)
        if args.command == "transfer":
            return cmd_transfer(cfg, args.profile)
        if args.command == "transient":
            return cmd_transient(cfg, args.profile)
        if args.command == "sweep-xi":
            return cmd_sweep_xi(cfg)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.criterion)
        return cmd_check_all(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
