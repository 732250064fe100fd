"""Command-line front end.

Subcommands:
    eigensolve  build and save the vibrational basis; print the level energies
    bo          Born-Oppenheimer curves and effective two-photon couplings
    run         execute an experiment described by a JSON config
    field       sample a pulse's E(t) to CSV
    validate    fast numerical invariant suite

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
Units at the boundary: wavelengths in nm, intensities in W/cm^2; everything
internal is atomic units.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .eigensolver import (CouplingConvergenceError, RelaxationError,
                          effective_couplings, relax_vibrational_basis,
                          solve_bo_curves)
from .io import (ConfigError, grid_from_config, load_config, read_basis_checkpoint,
                 write_basis_checkpoint, write_curves_checkpoint,
                 write_experiment_dir, write_points_csv)
from .model import Grid2D, ModelParams
from .propagator import PropagationConfig, PropagationError
from .pulses import PulseSpec, field_at, intensity_to_field, wavelength_to_omega
from .twolevel import CalibrationError, TwoLevelIntegrationError


def _grid_for(name: str) -> Grid2D:
    if name == "paper":
        return Grid2D.paper()
    if name == "smoke":
        return Grid2D.smoke()
    raise ConfigError(f"unknown grid preset {name!r}")


def _set_threads(n):
    if n:
        import numba
        numba.set_num_threads(max(1, n))


def add_common(sub):
    sub.add_argument("--grid", default="smoke", choices=("smoke", "paper"))
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--threads", type=int, default=None)


def cmd_eigensolve(args) -> int:
    grid = _grid_for(args.grid)
    params = ModelParams()
    t0 = time.time()
    basis = relax_vibrational_basis(grid, params, n_states=args.n_states)
    doc = {
        "grid": args.grid,
        "energies_au": [round(float(e), 10) for e in basis.energies],
        "residuals_au": [float(r) for r in basis.residuals],
        "wall_seconds": round(time.time() - t0, 1),
    }
    print(json.dumps(doc, indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_basis_checkpoint(out / f"basis_{args.grid}.ckpt", basis)
        (out / f"energies_{args.grid}.json").write_text(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_bo(args) -> int:
    grid = _grid_for(args.grid)
    params = ModelParams()
    curves = solve_bo_curves(grid, params)
    nu_list = list(range(args.n_states))
    coup = effective_couplings(curves, params, nu_list)
    doc = {
        "grid": args.grid,
        "nu_list": nu_list,
        "mu2_matrix_au": [[float(v) for v in row] for row in coup.mu2],
        "level_energies_au": [float(e) for e in coup.energies],
        "stark_difference_0_2": float(coup.stark_difference(0, 2)),
        "stark_difference_0_1": float(coup.stark_difference(0, 1)),
        "coupling_0_2": float(coup.value(0, 2)),
        "k_refinement_shift": coup.refinement_shift,
    }
    print(json.dumps(doc, indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"couplings_{args.grid}.json").write_text(json.dumps(doc, indent=2) + "\n")
        rows = [{"R_au": float(r), "E_g_au": float(eg), "E_u_au": float(eu),
                 "dipole_gu_au": float(d)}
                for r, eg, eu, d in zip(curves.R_samples, curves.E_g,
                                        curves.E_u, curves.dipole_gu)]
        write_points_csv(out / f"bo_curves_{args.grid}.csv", rows)
        write_curves_checkpoint(out / f"bo_curves_{args.grid}.ckpt", curves)
    return 0


def cmd_field(args) -> int:
    omega = wavelength_to_omega(args.wavelength_nm) if args.wavelength_nm \
        else args.omega
    if not omega:
        raise ConfigError("need --wavelength-nm or --omega")
    pulse = PulseSpec(E0=intensity_to_field(args.intensity),
                      omega0=omega, n_cycles=args.cycles, chirp_a=args.chirp_a)
    times = np.arange(0.0, pulse.duration + args.dt / 2, args.dt)
    rows = [{"time_au": float(t), "field_au": float(field_at(pulse, t))}
            for t in times]
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "field.csv"
    write_points_csv(path, rows)
    print(f"wrote {path} ({len(rows)} samples)")
    return 0


def cmd_validate(args) -> int:
    from .validation import run_validation
    checks = run_validation(_grid_for(args.grid), budget=args.budget)
    width = max(len(c["name"]) for c in checks)
    failed = 0
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{c['name']:<{width}}  {c['measured']:.3e} vs {c['threshold']:.1e}  {status}")
        failed += not c["passed"]
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "validation.json").write_text(
            json.dumps(checks, indent=2) + "\n")
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0


def cmd_run(args) -> int:
    from .experiments import (SimulationContext, run_chirp_sweep, run_cooling,
                              run_detuning_scan, run_focal_average,
                              run_selectivity, run_train)
    from .pulses import BeamProfile, PhaseLock, TrainSpec

    cfg = load_config(args.config)
    grid = grid_from_config(cfg) if "grid" in cfg else _grid_for(args.grid)
    mp = cfg.get("model", {})
    params = ModelParams(**mp) if mp else ModelParams()
    pcfg = cfg.get("propagation", {})
    prop = PropagationConfig(**pcfg) if pcfg else PropagationConfig()
    exp = cfg["experiment"]
    engine = args.engine or exp.get("engine", "twolevel")
    pars = dict(exp["parameters"])

    basis = None
    if cfg.get("basis_checkpoint"):
        basis = read_basis_checkpoint(cfg["basis_checkpoint"], grid)
    ctx = SimulationContext.build(grid=grid, params=params, prop=prop,
                                  n_states=cfg.get("n_states", 7), basis=basis)

    kind = exp["kind"]
    if kind == "selectivity":
        rep = run_selectivity(ctx, pars["intensity_w_cm2"], pars["wavelengths_nm"],
                              pars.get("n_cycles", 10), engine)
    elif kind == "detuning_scan":
        rep = run_detuning_scan(ctx, pars["target_nu"], pars["intensities_w_cm2"],
                                pars["omega_offsets_au"], pars.get("n_cycles", 10),
                                engine)
    elif kind == "chirp_sweep":
        rep = run_chirp_sweep(ctx, pars["nu_i"], pars["nu_f"], pars["a_values"],
                              pars["n_cycles"], pars["intensity_w_cm2"], engine)
    elif kind == "train":
        pulse = PulseSpec(E0=intensity_to_field(pars["intensity_w_cm2"]),
                          omega0=ctx.two_photon_omega(pars["nu_i"], pars["nu_f"]),
                          n_cycles=pars["cycles_per_pulse"],
                          chirp_a=pars.get("chirp_a", 0.0))
        train = TrainSpec(pulse=pulse, n_pulses=pars["n_pulses"],
                          gap_cycles=pars.get("gap_cycles", 1.0),
                          phase_lock=PhaseLock(pars.get("phase_lock", "locked")))
        rep = run_train(ctx, pars["nu_i"], pars["nu_f"], train, engine)
    elif kind == "focal_average":
        beam = BeamProfile(w0=pars.get("w0", 1.0), I_peak=pars["I_peak_w_cm2"],
                           n_rings=pars.get("n_rings", 24))
        rep = run_focal_average(ctx, beam, tuple(pars["transition"]),
                                pars["n_cycles"], engine,
                                chirp_a=pars.get("chirp_a"))
    elif kind == "cooling":
        sup = {int(k): complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
               for k, v in pars["superposition"].items()}
        p1 = pars["pulse1"]
        p2 = pars["pulse2"]
        pulse1 = PulseSpec(E0=intensity_to_field(p1["intensity_w_cm2"]),
                           omega0=p1.get("omega_au") or wavelength_to_omega(p1["wavelength_nm"]),
                           n_cycles=p1["n_cycles"], chirp_a=p1.get("chirp_a", 0.0))
        pulse2 = PulseSpec(E0=intensity_to_field(p2["intensity_w_cm2"]),
                           omega0=p2.get("omega_au") or wavelength_to_omega(p2["wavelength_nm"]),
                           n_cycles=p2["n_cycles"], chirp_a=p2.get("chirp_a", 0.0))
        rep = run_cooling(ctx, sup, pulse1, pulse2, pars["delay_au"], engine)
    else:
        raise ConfigError(f"unknown experiment kind {kind!r}")

    out_dir = args.out or cfg.get("output_dir") or f"runs/{kind}_{rep.provenance['config_hash']}"
    out = write_experiment_dir(out_dir, rep)
    print(f"experiment {kind} [{engine}] -> {out}")
    if rep.fits:
        print(json.dumps(rep.fits, indent=2, default=str))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="vibrocontrol",
                                 description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eigensolve", help="relax and save the vibrational basis")
    add_common(e)
    e.add_argument("--n-states", type=int, default=7)
    e.set_defaults(func=cmd_eigensolve)

    b = sub.add_parser("bo", help="BO curves and effective couplings")
    add_common(b)
    b.add_argument("--n-states", type=int, default=5)
    b.set_defaults(func=cmd_bo)

    r = sub.add_parser("run", help="run an experiment from a JSON config")
    add_common(r)
    r.add_argument("--config", required=True)
    r.add_argument("--engine", choices=("tdse", "twolevel"), default=None)
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("field", help="dump pulse field samples to CSV")
    add_common(f)
    f.add_argument("--wavelength-nm", type=float, default=None)
    f.add_argument("--omega", type=float, default=None, help="carrier (au)")
    f.add_argument("--intensity", type=float, default=1e13, help="W/cm^2")
    f.add_argument("--cycles", type=int, default=10)
    f.add_argument("--chirp-a", type=float, default=0.0)
    f.add_argument("--dt", type=float, default=1.0, help="sample spacing (au)")
    f.set_defaults(func=cmd_field)

    v = sub.add_parser("validate", help="fast numerical invariant suite")
    add_common(v)
    v.add_argument("--budget", choices=("quick", "full"), default="full")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    _set_threads(getattr(args, "threads", None))
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (PropagationError, RelaxationError, CouplingConvergenceError,
            CalibrationError, TwoLevelIntegrationError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
