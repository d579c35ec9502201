"""Command-line front end.

Subcommands mirror the analysis pipeline: ground (Bloch populations),
optimize (GA stage protocols), sequence (full interferometer runs and AC/DC
scans), fisher (Cramer-Rao point analysis), fit (power-law fits), and sweep
(robustness curves). Every invocation writes a manifest.json with the
resolved inputs, seeds and versions needed to reproduce its outputs.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 GA budget exhausted
without reaching the fitness target.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, assets, bloch, robustness, sensitivity, sequencer
from .ga import (
    GAConfig,
    GAPhase,
    GA_FAST_SETTINGS,
    evolve,
    propagation_task,
    recombination_task,
    reflection_task,
    split_task,
)
from .propagator import PropagationSettings
from .protocols import load_protocol, save_protocol
from .sequencer import load_manifest, michelson_plan, reciprocal_plan, run_sequence
from .units import LatticeConfig, SignalSpec, make_default_config, normalized_variation

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 3


def _load_config_file(path):
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return doc


def _lattice_from(args, filecfg) -> LatticeConfig:
    base = make_default_config()
    section = filecfg.get("lattice", {})
    depth = args.depth if args.depth is not None else section.get("depth_Er", base.depth_Er)
    wavelength = section.get("wavelength_m", base.wavelength_m)
    mass = section.get("atom_mass_kg", base.atom_mass_kg)
    return LatticeConfig(depth_Er=depth, wavelength_m=wavelength, atom_mass_kg=mass)


def _settings_from(args, filecfg, fast=False) -> PropagationSettings:
    base = GA_FAST_SETTINGS if fast else PropagationSettings()
    section = dict(filecfg.get("propagation", {}))
    if getattr(args, "dt", None) is not None:
        section["dt_s"] = args.dt
    if getattr(args, "backend", None) is not None:
        section["backend"] = args.backend
    return dataclasses.replace(base, **section)


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    return secrets.randbits(31)


def _start_run(args, out_dir, seed, extra=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "shaken-lattice",
        "version": __version__,
        "numpy": np.__version__,
        "argv": sys.argv[1:],
        "seed": seed,
        "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, default=str),
                                       encoding="utf-8")
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _stage_protocols(args):
    if args.stages_dir is not None:
        root = Path(args.stages_dir)
        found = {}
        for stage in ("split", "propagate", "reflect", "recombine"):
            p = root / f"{stage}.json"
            if p.exists():
                found[stage] = load_protocol(p)
        return found
    if args.topology == "reciprocal":
        return assets.reciprocal_protocols()
    return assets.michelson_protocols()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ground(args) -> int:
    filecfg = _load_config_file(args.config)
    lattice = _lattice_from(args, filecfg)
    state = bloch.ground_state(lattice, args.basis)
    pops = bloch.populations_of(state, args.truncation)
    for n, p in zip(pops.indices, pops.values):
        print(f"n={n:+d}  P={p:.6f}")
    print(f"# E0 = {bloch.ground_energy(lattice):.12f} E_R at V0 = {lattice.depth_Er} E_R")
    if args.out:
        out = _start_run(args, args.out, seed=0, extra={"lattice": dataclasses.asdict(lattice)})
        _write_csv(out / "ground_populations.csv", ["n", "population"],
                   list(zip(pops.indices.tolist(), pops.values.tolist())))
    return EXIT_OK


def _phases_from(args):
    if not args.anneal:
        return None
    phases = []
    for part in args.anneal.split(";"):
        gens, limit, rate = part.split(":")
        phases.append(GAPhase(int(gens), float(limit), float(rate),
                              weights=(0.2, 0.2, 0.1, 0.5)))
    return phases


def cmd_optimize(args) -> int:
    filecfg = _load_config_file(args.config)
    lattice = _lattice_from(args, filecfg)
    settings = _settings_from(args, filecfg, fast=True)
    seed = _resolve_seed(args)
    out = _start_run(args, args.out, seed, extra={
        "stage": args.stage, "restarts": args.restarts,
        "lattice": dataclasses.asdict(lattice),
        "settings": dataclasses.asdict(settings),
    })
    section = dict(filecfg.get("ga", {}))
    if args.generations is not None:
        section["max_generations"] = args.generations
    if args.target is not None:
        section["fitness_target"] = args.target
    if args.threads is not None:
        section["workers"] = args.threads

    bias = args.bias_a or 0.0
    best = None
    for restart in range(args.restarts):
        config = GAConfig(seed=seed + restart, **section)
        if args.stage == "split":
            task = split_task()
        elif args.stage == "propagate":
            task = propagation_task()
        elif args.stage == "reflect":
            task = reflection_task()
        elif args.stage == "recombine":
            stages = _stage_protocols(args)
            for need in ("split", "propagate", "reflect"):
                if need not in stages:
                    print(f"error: recombination needs a {need} protocol "
                          f"(--stages-dir or bundled assets)", file=sys.stderr)
                    return EXIT_ERROR
            builder = michelson_plan if args.topology == "michelson" else reciprocal_plan
            stages.setdefault("recombine", stages["split"])  # placeholder; prefix stops before it
            plan = builder(stages, args.legs)
            signal = SignalSpec.dc(bias) if bias else SignalSpec.none()
            pre = sequencer.run_prefix(plan, lattice, len(plan.stages) - 1, signal, settings)
            ground_pops = bloch.populations_of(bloch.ground_state(lattice, settings.basis_size))
            task = recombination_task(ground_pops, initial=pre)
        else:
            print(f"error: unknown stage {args.stage!r}", file=sys.stderr)
            return EXIT_ERROR

        run_dir = out / f"restart_{restart}"
        signal = SignalSpec.dc(bias) if bias else SignalSpec.none()
        protocol, result = evolve(task, lattice, config, settings, signal=signal,
                                  run_dir=run_dir, phases=_phases_from(args))
        print(f"restart {restart}: fitness {result.best_fitness:.3e} "
              f"after {result.generations} generations ({result.stop_reason})")
        if best is None or result.best_fitness < best[1].best_fitness:
            best = (protocol, result)
    protocol, result = best
    save_protocol(protocol, out / f"{args.stage}.json")
    print(f"best fitness {result.best_fitness:.3e} -> {out / (args.stage + '.json')}")
    if result.converged or args.lenient:
        return EXIT_OK
    return EXIT_NOT_CONVERGED


def cmd_sequence(args) -> int:
    filecfg = _load_config_file(args.config)
    lattice = _lattice_from(args, filecfg)
    settings = _settings_from(args, filecfg)
    if args.manifest:
        plan = load_manifest(args.manifest)
    else:
        protocols = _stage_protocols(args)
        builder = michelson_plan if args.topology == "michelson" else reciprocal_plan
        plan = builder(protocols, args.legs)
    out = _start_run(args, args.out, seed=0, extra={
        "topology": plan.topology, "duration_s": plan.duration_s,
        "interrogation_s": plan.interrogation_s,
    })
    reference = run_sequence(plan, lattice, SignalSpec.none(), settings)
    ground_pops = bloch.populations_of(bloch.ground_state(lattice, settings.basis_size))
    base_var = normalized_variation(reference, ground_pops)
    print(f"zero-signal final vs ground-state populations: variation {base_var:.4f}%")
    _write_csv(out / "final_populations.csv", ["n", "population"],
               list(zip(reference.indices.tolist(), reference.values.tolist())))

    if args.ac_scan is not None:
        fmin, fmax, count = args.ac_scan
        freqs = np.linspace(fmin, fmax, int(count))
        rows = sequencer.scan_ac_response(plan, lattice, args.ac_amp, freqs, settings)
        _write_csv(out / "ac_response.csv", ["frequency_hz", "variation_percent"], rows.tolist())
        peak = rows[np.argmax(rows[:, 1])]
        print(f"AC scan peak: {peak[1]:.3f}% at {peak[0]:.1f} Hz -> ac_response.csv")
    elif args.dc is not None:
        rows = sequencer.scan_dc_response(plan, lattice, args.dc, settings, reference=reference)
        _write_csv(out / "dc_response.csv", ["a_mps2", "variation_percent"], rows.tolist())
        print(f"DC response written for {len(args.dc)} acceleration(s) -> dc_response.csv")
    return EXIT_OK


def cmd_fisher(args) -> int:
    filecfg = _load_config_file(args.config)
    lattice = _lattice_from(args, filecfg)
    settings = _settings_from(args, filecfg)
    if args.manifest:
        plan = load_manifest(args.manifest)
    else:
        protocols = _stage_protocols(args)
        builder = michelson_plan if args.topology == "michelson" else reciprocal_plan
        plan = builder(protocols, args.legs)
    out = _start_run(args, args.out, seed=0, extra={"a0": args.a0, "delta_a": args.delta_a,
                                                    "atoms": args.atoms})
    import warnings as _warnings
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        result = sensitivity.fisher_at(plan, lattice, a0=args.a0, delta_a=args.delta_a,
                                       n_atoms=args.atoms, settings=settings)
    summary = {
        "total_per_atom": result.total_per_atom,
        "delta_a": result.delta_a,
        "delta_a_per_atom": result.delta_a_per_atom,
        "n_atoms": result.n_atoms,
        "a0": result.a0,
        "step": result.step,
        "richardson_total": result.richardson_total,
        "converged": result.converged,
        "floor": result.floor,
        "excluded_bins": result.excluded.tolist(),
        "warnings": [str(w.message) for w in caught],
    }
    (out / "fisher.json").write_text(json.dumps(summary, indent=1), encoding="utf-8")
    print(f"F_per_atom = {result.total_per_atom:.6g} s^4/m^2, "
          f"delta_a = {result.delta_a:.6g} m/s^2 at N = {result.n_atoms:g}"
          + ("" if result.converged else "  [derivative NOT converged]"))
    return EXIT_OK


def cmd_fit(args) -> int:
    rows = []
    with open(args.points, newline="", encoding="utf-8") as fh:
        for record in csv.DictReader(fh):
            rows.append((float(record[args.time_column]), float(record["delta_a"])))
    fit = sensitivity.fit_power_law([r[0] for r in rows], [r[1] for r in rows])
    print(f"delta_a = C T^-n with C = {fit.coefficient:.6g}, "
          f"n = {fit.exponent:.4f} +- {fit.exponent_stderr:.4f}")
    if args.out:
        out = _start_run(args, args.out, seed=0)
        (out / "fit.json").write_text(json.dumps({
            "C": fit.coefficient, "n": fit.exponent, "n_stderr": fit.exponent_stderr,
            "t_range": fit.t_range, "points": rows,
        }, indent=1), encoding="utf-8")
    return EXIT_OK


def cmd_sweep(args) -> int:
    filecfg = _load_config_file(args.config)
    lattice = _lattice_from(args, filecfg)
    settings = _settings_from(args, filecfg)
    protocol = load_protocol(args.protocol) if args.protocol else assets.load_stage_protocol("split")
    out = _start_run(args, args.out, seed=0, extra={"sweep": args.kind})
    if args.kind == "depth":
        grid = np.linspace(-args.span, args.span, args.points)
        rows = robustness.sweep_depth(protocol, lattice, grid, settings)
        _write_csv(out / "depth_sweep.csv", ["fraction", "variation_percent"], rows.tolist())
    elif args.kind == "wavelength":
        grid = np.linspace(-args.span, args.span, args.points)
        rows = robustness.sweep_wavelength(protocol, lattice, grid, settings)
        _write_csv(out / "wavelength_sweep.csv", ["fraction", "variation_percent"], rows.tolist())
    elif args.kind == "noise":
        grid = np.linspace(0.0, args.span, args.points)
        rows = robustness.sweep_phase_noise(protocol, lattice, grid,
                                            seeds=range(args.noise_seeds), settings=settings)
        _write_csv(out / "noise_sweep.csv",
                   ["amplitude_fraction", "variation_percent", "stddev"], rows.tolist())
    elif args.kind == "parasitic":
        rows = robustness.sweep_parasitic(protocol, lattice, epsilons=args.epsilons,
                                          deltas=np.linspace(0, 2 * np.pi, args.points),
                                          settings=settings)
        _write_csv(out / "parasitic_sweep.csv",
                   ["epsilon", "delta_rad", "variation_percent"], rows.tolist())
    else:  # ac / dc over a full sequence
        protocols = _stage_protocols(args)
        builder = michelson_plan if args.topology == "michelson" else reciprocal_plan
        plan = builder(protocols, args.legs)
        if args.kind == "ac":
            freqs = np.linspace(args.fmin, args.fmax, args.points)
            rows = sequencer.scan_ac_response(plan, lattice, args.ac_amp, freqs, settings)
            _write_csv(out / "ac_response.csv", ["frequency_hz", "variation_percent"],
                       rows.tolist())
        else:
            accels = np.linspace(-args.span, args.span, args.points)
            rows = sequencer.scan_dc_response(plan, lattice, accels, settings)
            _write_csv(out / "dc_response.csv", ["a_mps2", "variation_percent"], rows.tolist())
    print(f"{args.kind} sweep: {len(rows)} rows -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p, out_default):
    p.add_argument("--config", help="JSON config file (lattice/ga/propagation sections)")
    p.add_argument("--depth", type=float, help="lattice depth in E_R (overrides config)")
    p.add_argument("--dt", type=float, help="integration step in seconds")
    p.add_argument("--backend", choices=["ladder", "split-step"])
    p.add_argument("--out", default=out_default, help="run directory for outputs")


def _add_plan_source(p):
    p.add_argument("--manifest", help="sequence manifest file (topology + stage protocol files)")
    p.add_argument("--stages-dir", help="directory with <stage>.json protocol files")
    p.add_argument("--topology", choices=["michelson", "reciprocal"], default="michelson")
    p.add_argument("--legs", type=int, default=None,
                   help="propagation repeats per leg (default 2 michelson, 1 reciprocal)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shaken-lattice",
        description="Shaken-lattice interferometry: simulate, optimize, analyze.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground", help="ground Bloch state populations")
    _add_common(p, None)
    p.add_argument("--basis", type=int, default=21)
    p.add_argument("--truncation", type=int, default=5)
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("optimize", help="learn a stage protocol with the GA")
    _add_common(p, "runs/optimize")
    p.add_argument("--stage", required=True,
                   choices=["split", "propagate", "reflect", "recombine"])
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--target", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--bias-a", type=float, default=None,
                   help="optimize with this DC acceleration applied (m/s^2)")
    p.add_argument("--anneal", help="extra phases 'gens:M:C;gens:M:C;...' after the defaults")
    p.add_argument("--lenient", action="store_true",
                   help="exit 0 even when the fitness target was not reached")
    _add_plan_source(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sequence", help="run a full interferometer")
    _add_common(p, "runs/sequence")
    _add_plan_source(p)
    p.add_argument("--ac-amp", type=float, default=0.115)
    p.add_argument("--ac-scan", nargs=3, type=float, metavar=("FMIN", "FMAX", "N"))
    p.add_argument("--dc", nargs="+", type=float)
    p.set_defaults(func=cmd_sequence)

    p = sub.add_parser("fisher", help="Fisher information and Cramer-Rao bound")
    _add_common(p, "runs/fisher")
    _add_plan_source(p)
    p.add_argument("--a0", type=float, default=0.0)
    p.add_argument("--delta-a", type=float, default=0.01)
    p.add_argument("--atoms", type=float, default=1.0)
    p.set_defaults(func=cmd_fisher)

    p = sub.add_parser("fit", help="power-law fit of delta_a vs interrogation time")
    p.add_argument("--points", required=True, help="CSV with time and delta_a columns")
    p.add_argument("--time-column", default="T_I_s")
    p.add_argument("--out")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="robustness and response sweeps")
    _add_common(p, "runs/sweep")
    p.add_argument("kind", choices=["depth", "wavelength", "noise", "parasitic", "ac", "dc"])
    p.add_argument("--protocol", help="protocol file (default: bundled split)")
    p.add_argument("--span", type=float, default=0.05)
    p.add_argument("--points", type=int, default=11)
    p.add_argument("--noise-seeds", type=int, default=5)
    p.add_argument("--epsilons", nargs="+", type=float, default=[0.001, 0.01, 0.04])
    p.add_argument("--fmin", type=float, default=250.0)
    p.add_argument("--fmax", type=float, default=20_000.0)
    p.add_argument("--ac-amp", type=float, default=0.115)
    _add_plan_source(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "legs", None) is None and hasattr(args, "topology"):
        args.legs = 2 if args.topology == "michelson" else 1
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
