"""Command-line frontend: ``oscdfs {simulate,analytic,kernel,dfs-check,sweep} --config FILE``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import dfs
from ._csvio import fmt, write_csv
from .bath import classify, rotation_angle
from .config import MODES, SCHEMA, ConfigError, RunConfig, expand_axes, parse_config
from .fock import FockSpace, pure_state_density
from .kernel import solve_kernel
from .propagator import (
    asymptotics,
    build_general2_liouvillian,
    build_markov_liouvillian,
    default_dt,
    integrate,
    single_excitation_evolution,
    single_excitation_state,
    time_grid,
)

log = logging.getLogger("oscdfs")


def _open(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="\n", encoding="utf-8")


def resolve_initial(initial: tuple, params, space: FockSpace):
    """Initial density matrix plus (alpha, phi) when the state is of single-excitation form."""
    kind = initial[0]
    if kind == "angles":
        _, alpha, phi = initial
        return single_excitation_state(space, alpha, phi), (alpha, phi)
    if kind == "preset":
        states = dfs.sd_wd_states(params)
        alpha, phi = (states.alpha_SD, states.phi_SD) if initial[1] == "sd" else (states.alpha_WD, states.phi_WD)
        return single_excitation_state(space, alpha, phi), (alpha, phi)
    return pure_state_density(space, initial[1]), None


def _generator(cfg: RunConfig, params, space):
    if cfg.generator == "markov":
        cls = classify(params)
        if not (cls.degenerate and cls.separable):
            raise ValueError("collective-mode generator needs degenerate frequencies and separable coupling")
        return build_markov_liouvillian(
            space, params.omega_mean, rotation_angle(params), ((params.k1, params.k2), params.nbar)
        )
    if params.nbar > 0:
        raise ValueError("cross-damping generator is zero temperature; set numerics.generator = markov for nbar > 0")
    return build_general2_liouvillian(space, params)


def _t_max(cfg: RunConfig, params) -> float:
    return cfg.t_max if cfg.t_max is not None else 10.0 / params.ktot


def run_simulate(cfg: RunConfig) -> list[Path]:
    params = cfg.system
    space = FockSpace(2, cfg.cutoff)
    L = _generator(cfg, params, space)
    rho0, _ = resolve_initial(cfg.initial, params, space)
    t_max = _t_max(cfg, params)
    traj = integrate(L, rho0, t_max, cfg.dt, cfg.store_every)
    path = Path(f"{cfg.prefix}_trajectory.csv")
    with _open(path) as fh:
        traj.to_csv(fh, cfg.header())
    return [path]


def run_analytic(cfg: RunConfig) -> list[Path]:
    params = cfg.system
    if params.nbar > 0:
        raise ValueError("closed-form evolution is zero temperature only")
    space = FockSpace(2, cfg.cutoff)
    _, angles = resolve_initial(cfg.initial, params, space)
    if angles is None:
        raise ValueError("closed-form evolution needs an (alpha, phi) or preset initial state")
    alpha, phi = angles
    t_max = _t_max(cfg, params)
    # same sample times as the RK4 run of the same config
    dt = cfg.dt if cfg.dt is not None else default_dt(build_general2_liouvillian(space, params), t_max)
    _, _, t = time_grid(t_max, dt, cfg.store_every)
    sol = single_excitation_evolution(params, alpha, phi, t)
    paths = [Path(f"{cfg.prefix}_analytic.csv")]
    rows = zip(t, sol.P, sol.amp_10.real, sol.amp_10.imag, sol.amp_01.real, sol.amp_01.imag)
    with _open(paths[0]) as fh:
        write_csv(fh, ["t", "P", "Re_amp_10", "Im_amp_10", "Re_amp_01", "Im_amp_01"], rows, cfg.header())
    if classify(params).dfs_exists:
        asym = asymptotics(params, alpha, phi)
        paths.append(Path(f"{cfg.prefix}_asymptotics.csv"))
        with _open(paths[1]) as fh:
            write_csv(fh, ["P_inf", "psi_10", "psi_01", "F_inf"],
                      [[asym.P_inf, asym.psi_inf[0], asym.psi_inf[1], asym.F_inf]], cfg.header())
    else:
        log.info("no decoherence-free subspace for these parameters; asymptotics row skipped")
    return paths


def run_kernel(cfg: RunConfig) -> list[Path]:
    params = cfg.system
    t_max = _t_max(cfg, params)
    dt = cfg.dt if cfg.dt is not None else 1e-3 * t_max
    sol = solve_kernel(cfg.bath, params.omega_mean, t_max, dt, cfg.convention)
    if np.any(sol.singular):
        log.warning("eta vanishes on %d samples; coefficients there are nan", int(np.sum(sol.singular)))
    path = Path(f"{cfg.prefix}_kernel.csv")
    with _open(path) as fh:
        sol.to_csv(fh, cfg.header())
    return [path]


def dfs_report(cfg: RunConfig) -> tuple[str, dfs.PerturbationReport]:
    params = cfg.system
    cls = classify(params)
    states = dfs.sd_wd_states(params)
    if cfg.initial[0] == "amplitudes":
        raise ValueError("dfs-check needs an (alpha, phi) or preset initial state")
    _, angles = resolve_initial(cfg.initial, params, FockSpace(2, 1))
    report = dfs.perturbative_amplitudes(params, *angles)
    lines = [
        f"degenerate: {fmt(cls.degenerate)}",
        f"separable: {fmt(cls.separable)}",
        f"dfs_exists: {fmt(cls.dfs_exists)}",
        f"delta_omega: {fmt(cls.delta_omega)}",
        f"delta_k: {fmt(cls.delta_k)}",
        f"theta: {fmt(rotation_angle(params))}",
        f"alpha: {fmt(angles[0])}",
        f"phi: {fmt(angles[1])}",
    ]
    for name in ("SD", "WD"):
        psi = getattr(states, f"psi_{name}")
        lines.append(f"psi_{name}.amp_10: {fmt(psi[0].real)} {fmt(psi[0].imag)}")
        lines.append(f"psi_{name}.amp_01: {fmt(psi[1].real)} {fmt(psi[1].imag)}")
        lines.append(f"alpha_{name}: {fmt(getattr(states, f'alpha_{name}'))}")
        lines.append(f"phi_{name}: {fmt(getattr(states, f'phi_{name}'))}")
    text = "\n".join(lines) + "\n" + report.to_text()
    return text, report


def run_dfs_check(cfg: RunConfig) -> list[Path]:
    text, report = dfs_report(cfg)
    sys.stdout.write(text)
    txt = Path(f"{cfg.prefix}_dfs.txt")
    with _open(txt) as fh:
        fh.write("".join(f"# {line}\n" for line in cfg.header().splitlines()))
        fh.write(text)
    row = Path(f"{cfg.prefix}_report.csv")
    with _open(row) as fh:
        report.to_csv(fh, cfg.header())
    return [txt, row]


SWEEP_COLUMNS = [
    "omega1", "omega2", "k1", "k2", "k3", "alpha", "phi",
    "tau_SD", "tau_WD", "ratio",
    "predicted_rate_fast", "predicted_rate_slow",
    "fitted_rate_fast", "fitted_rate_slow", "fit_residual",
]


def sweep_point(job) -> list:
    """Evaluate one sweep grid point; rates are in the amplitude convention."""
    cfg, values, params, initial = job
    space = FockSpace(2, cfg.cutoff)
    rho0, angles = resolve_initial(initial, params, space)
    alpha, phi = angles if angles is not None else (math.nan, math.nan)
    rep = dfs.perturbative_amplitudes(params, 0.0 if angles is None else alpha, 0.0 if angles is None else phi)
    if cfg.t_max is not None:
        t_max = cfg.t_max
    else:
        t_max = max(20 * rep.tau_SD, min(3 * rep.tau_WD, 200 * rep.tau_SD))
    fast_win, slow_win = dfs.default_windows(params, t_max)
    L = _generator(cfg, params, space)
    dt = cfg.dt if cfg.dt is not None else default_dt(L, t_max)
    nsteps = math.ceil(t_max / dt)
    store = max(cfg.store_every, nsteps // 20000)
    if cfg.engine == "analytic":
        if angles is None:
            raise ValueError("analytic sweep engine needs an (alpha, phi) or preset initial state")
        _, _, t = time_grid(t_max, dt, store)
        series = SimpleNamespace(t=t, P=single_excitation_evolution(params, alpha, phi, t).P)
    else:
        series = integrate(L, rho0, t_max, dt, store)
    fit = dfs.fit_decay(series, fast_win, slow_win)
    return list(values) + [
        params.omega1, params.omega2, params.k1, params.k2, params.k3, alpha, phi,
        rep.tau_SD, rep.tau_WD, rep.ratio,
        rep.rate_fast, rep.rate_slow,
        0.5 * fit.rate_fast, 0.5 * fit.rate_slow, fit.residual,
    ]


def run_sweep(cfg: RunConfig) -> list[Path]:
    if not cfg.axes:
        raise ValueError("sweep needs at least one sweep.axis")
    try:
        points = expand_axes(cfg.system, cfg.initial, cfg.axes)
    except ValueError as exc:
        raise ConfigError(f"sweep grid point violates an invariant: {exc}") from None
    jobs = [(cfg, vals, params, init) for vals, params, init in points]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(sweep_point, jobs))
    else:
        rows = [sweep_point(j) for j in jobs]
    header = [a.name for a in cfg.axes] + SWEEP_COLUMNS
    path = Path(f"{cfg.prefix}_sweep.csv")
    comment = cfg.header() + "\nrates: amplitude convention (P(t) decays at twice these rates)"
    with _open(path) as fh:
        write_csv(fh, header, rows, comment)
    return [path]


RUNNERS = {
    "simulate": run_simulate,
    "analytic": run_analytic,
    "kernel": run_kernel,
    "dfs-check": run_dfs_check,
    "sweep": run_sweep,
}


def run(cfg: RunConfig) -> list[Path]:
    if cfg.mode not in RUNNERS:
        raise ConfigError(f"no run mode set (one of {', '.join(MODES)})")
    return RUNNERS[cfg.mode](cfg)


def _config_help() -> str:
    lines = ["config keys (default):"]
    for key, (_, default, text) in SCHEMA.items():
        if key.startswith(("sweep.axis2", "sweep.axis3")):
            continue
        shown = "-" if default is None else fmt(default)
        lines.append(f"  {key:<22} {text} ({shown})")
    lines.append("  sweep.axis2.*, sweep.axis3.*  further sweep axes (grid is their product)")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oscdfs",
        description="Two oscillators sharing a dissipative bath: simulation and closed forms.",
        epilog=_config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in MODES:
        p = sub.add_parser(name, epilog=_config_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="key = value configuration file")
        p.add_argument("--out", help="output path prefix (overrides output.prefix)")
        p.add_argument("--dt", type=float, help="time step")
        p.add_argument("--tmax", type=float, help="final time")
        p.add_argument("--cutoff", type=int, help="Fock cutoff per mode")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text).with_mode(args.command)
        cfg = cfg.override(cutoff=args.cutoff, t_max=args.tmax, dt=args.dt, prefix=args.out)
        paths = run(cfg)
    except ConfigError as exc:
        print(f"oscdfs: {args.config}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError, NotImplementedError) as exc:
        print(f"oscdfs {args.command}: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        log.info("wrote %s", p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
