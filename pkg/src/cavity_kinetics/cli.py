"""Command-line interface.

    cavity-kinetics <coefficients|equilibrium|simulate|modes> --config PATH [--seed N] [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 runtime guard.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__
from .assemble import Assembly, assemble, initial_state
from .config import config_hash, load_config
from .constants import get_constants
from .errors import CavityKineticsError, ConfigError, DomainError, EnergyConservationError, SizeGuardError
from .interaction import (
    broadband_reconstruction,
    coefficient_C,
    einstein_A,
    einstein_A_over_B,
    einstein_B_abs,
    einstein_B_em,
    log_forgotten_to_stimulated_ratio,
    micro_rate,
)
from .kinetics import (
    EVENT_NAMES,
    atom_laser_ensemble,
    run_ode,
    run_ssa,
    run_ssa_batches,
    run_ssa_ensemble,
    scenario_atom_laser,
    thermal_balance_residual,
)
from .modes import (
    CavitySpec,
    continuum_mode_count,
    count_lattice_modes,
    enumerate_modes,
    mode_count_ratio,
    nu_of_kinetic_energy,
)
from .statistics import (
    ThermalEnvironment,
    bose_occupation,
    equilibrium_population_ratio,
    log_bose_occupation,
    log_occupation_from_reduced,
    occupancy_temperature,
)

OUT_ENV = "CAVITY_KINETICS_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
# lattice columns (n_x * n_y) above which band counting is refused
MAX_LATTICE_COLUMNS = 4 * 10**8

B_UNIT = "m^3 J^-1 s^-2"


def q(value, unit):
    """A JSON quantity with its unit."""
    if isinstance(value, np.ndarray):
        value = value.tolist()
    elif isinstance(value, (np.floating, np.integer)):
        value = value.item()
    return {"value": value, "unit": unit}


def _finite(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def provenance(asm: Assembly, command, seed=None):
    return {
        "command": command,
        "config_sha256": config_hash(asm.config),
        "seed": seed,
        "versions": {
            "cavity_kinetics": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
            "python": platform.python_version(),
        },
        "constants": {
            "c": q(asm.constants.c, "m/s"),
            "hbar": q(asm.constants.hbar, "J s"),
            "k_B": q(asm.constants.k_B, "J/K"),
        },
    }


def _rel(a, b):
    return abs(a / b - 1.0)


# -- commands --------------------------------------------------------------


def cmd_coefficients(asm: Assembly, out: Path, seed=None):
    ch = asm.channel
    t = asm.triple
    A, b_em, b_abs, C = einstein_A(ch), einstein_B_em(ch), einstein_B_abs(ch), coefficient_C(ch)
    closed = einstein_A_over_B(ch)
    deg_ratio = t.excited.degeneracy / t.ground.degeneracy
    rate = micro_rate(ch, ch.line.center).alpha
    try:
        bb = broadband_reconstruction(ch)
    except EnergyConservationError as exc:
        broadband = {"applicable": False, "reason": str(exc)}
    else:
        broadband = {
            "applicable": True,
            "B_em": q(bb.B_em, B_UNIT),
            "B_abs": q(bb.B_abs, B_UNIT),
            "C": q(bb.C, B_UNIT),
            "rel_err_B_em": q(bb.rel_err_B_em, "1"),
            "rel_err_B_abs": q(bb.rel_err_B_abs, "1"),
            "rel_err_C": q(bb.rel_err_C, "1"),
            "n_lines": q(bb.n_lines, "1"),
            "comb_volume": q(bb.comb_volume, "m^3"),
        }
    summary = {
        "coefficients": {
            "A": q(A, "1/s"),
            "B_em": q(b_em, B_UNIT),
            "B_abs": q(b_abs, B_UNIT),
            "C": q(C, B_UNIT),
        },
        "ratios": {
            "A_over_B_em": q(A / b_em, "J s m^-3"),
            "A_over_B_em_closed_form": q(closed, "J s m^-3"),
            "A_over_B_em_rel_err": q(_rel(A / b_em, closed), "1"),
            "B_abs_over_B_em": q(b_abs / b_em, "1"),
            "degeneracy_ratio": q(deg_ratio, "1"),
            "B_abs_over_B_em_rel_err": q(_rel(b_abs / b_em, deg_ratio), "1"),
            "C_over_B_em": q(C / b_em, "1"),
        },
        "micro_rate_at_line_centre": q(rate, "1/s"),
        "line": {
            "centre": q(ch.line.center, "rad/s"),
            "fwhm": q(ch.line.fwhm, "rad/s"),
            "grid_spacing": q(ch.line.grid_spacing, "rad/s"),
            "half_window": q(ch.line.half_window, "rad/s"),
        },
        "broadband": broadband,
        "provenance": provenance(asm, "coefficients", seed),
    }
    return {"coefficients.json": summary}


def cmd_equilibrium(asm: Assembly, out: Path, seed=None):
    ch = asm.channel
    t = asm.triple
    const = get_constants()
    eq = asm.config.equilibrium
    rates = micro_rate(ch, ch.line.center)
    ground_energy = t.ground.rest_energy + ch.ground_kinetic_energy
    boson_energy = const.hbar * ch.line.center
    rows = []
    for T in eq.temperatures:
        env = ThermalEnvironment(T)
        res = thermal_balance_residual(rates, ground_energy, boson_energy, env)
        log_na = log_occupation_from_reduced(ground_energy / env.kT)
        log_nphi = log_bose_occupation(ch.line.center, env)
        pop = equilibrium_population_ratio(t, env, ch.ground_kinetic_energy)
        rows.append({
            "temperature": q(T, "K"),
            "relative_residual": q(res, "1"),
            "log10_W_f_over_W_em": q(log_forgotten_to_stimulated_ratio(ch, env) / math.log(10), "1"),
            "log10_ground_over_boson_occupation": q((log_na - log_nphi) / math.log(10), "1"),
            "log10_population_ratio": q(pop.log_exact / math.log(10), "1"),
            "log10_population_ratio_maxwell_boltzmann": q(pop.log_maxwell_boltzmann / math.log(10), "1"),
        })
    energy = eq.occupancy_energy if eq.occupancy_energy is not None else t.ground.rest_energy
    summary = {
        "sweep": rows,
        "max_abs_relative_residual": q(max(abs(r["relative_residual"]["value"]) for r in rows), "1"),
        "ground_kinetic_energy": q(ch.ground_kinetic_energy, "J"),
        "occupancy_temperature": {
            "energy": q(energy, "J"),
            "occupation": q(eq.occupancy_target, "quanta"),
            "temperature": q(occupancy_temperature(energy / const.hbar, eq.occupancy_target) if energy > 0 else None, "K"),
        },
        "provenance": provenance(asm, "equilibrium", seed),
    }
    return {"equilibrium.json": summary}


def cmd_modes(asm: Assembly, out: Path, seed=None):
    mc = asm.config.modes
    const = get_constants()
    band_rows = []
    for i, b in enumerate(mc.bands):
        sp = _species(asm, b.species, ("modes", "bands", i, "species"))
        cav = CavitySpec(b.edge_lengths, asm.cavity.temperature) if b.edge_lengths else asm.cavity
        nu_lo = float(nu_of_kinetic_energy(sp, b.kinetic_lo))
        nu_hi = float(nu_of_kinetic_energy(sp, b.kinetic_hi))
        cols = [int(2 * nu_hi * L / const.c) for L in cav.edge_lengths[:2]]
        if cols[0] * cols[1] > MAX_LATTICE_COLUMNS:
            raise SizeGuardError(f"band {i}: {cols[0] * cols[1]} lattice columns exceed the guard")
        lattice = count_lattice_modes(sp, cav, nu_lo, nu_hi)
        cont = continuum_mode_count(sp, cav, nu_hi) - continuum_mode_count(sp, cav, nu_lo)
        band_rows.append([sp.name, b.kinetic_lo, b.kinetic_hi, nu_lo, nu_hi, lattice, cont,
                          lattice / cont - 1 if cont > 0 else float("nan")])
    enum_rows = []
    for i, e in enumerate(mc.enumerate):
        sp = _species(asm, e.species, ("modes", "enumerate", i, "species"))
        cav = CavitySpec(e.edge_lengths, asm.cavity.temperature) if e.edge_lengths else asm.cavity
        nu_max = float(nu_of_kinetic_energy(sp, e.kinetic_max))
        for m in enumerate_modes(sp, cav, nu_max, e.max_modes):
            enum_rows.append([sp.name, m.degeneracy_slot, *m.lattice_index, m.nu, m.kinetic_energy])
    ch = asm.channel
    ratio = mode_count_ratio(asm.triple, ch.line.center, ch.ground_kinetic_energy)
    meta = _meta(asm, "modes", seed)
    files = {
        "modes_bands.csv": _csv(meta, ["species", "kinetic_lo_J", "kinetic_hi_J", "nu_lo_Hz", "nu_hi_Hz",
                                       "lattice_count", "continuum_count", "relative_difference"], band_rows),
        "modes_enumerated.csv": _csv(meta, ["species", "slot", "n_x", "n_y", "n_z", "nu_Hz", "kinetic_energy_J"],
                                     enum_rows),
    }
    files["modes.json"] = {
        "channel_mode_count_ratio": {
            "ground_over_boson": q(ratio, "1"),
            "log10": q(math.log10(ratio), "1"),
            "boson_energy": q(const.hbar * ch.line.center, "J"),
            "ground_kinetic_energy": q(ch.ground_kinetic_energy, "J"),
        },
        "n_band_rows": q(len(band_rows), "1"),
        "n_enumerated_modes": q(len(enum_rows), "1"),
        "provenance": provenance(asm, "modes", seed),
    }
    return files


def _species(asm, name, path):
    if name not in asm.species:
        raise ConfigError(f"unknown species {name!r}", path)
    return asm.species[name]


def cmd_simulate(asm: Assembly, out: Path, seed=None):
    cfg = asm.config
    if asm.network is None:
        raise ConfigError("simulate needs a network section", ("network",))
    sc = cfg.simulation
    if sc is None:
        raise ConfigError("simulate needs a simulation section", ("simulation",))
    seed = sc.seed if seed is None else seed
    net = asm.network
    chash = config_hash(cfg)
    files = {}
    summary = {"modes": _mode_table(asm)}
    if sc.method in ("ode", "both"):
        state0 = initial_state(asm, integer=False)
        every = 1 if sc.sample_dt is None else max(1, int(round(sc.sample_dt / sc.dt)))
        traj = run_ode(net, state0, sc.dt, sc.t_end, every, config_hash=chash)
        files["ode.csv"] = _trajectory_csv(asm, "ode", seed, traj.times, traj.samples)
        summary["ode"] = {
            "final_occupations": q(traj.samples[-1], "quanta"),
            "steps": q(traj.n_events, "1"),
            "clamp_events": q(len(traj.clamp_events), "1"),
        }
    if sc.method in ("ssa", "both"):
        files.update(_simulate_ssa(asm, seed, chash, summary))
    summary["provenance"] = provenance(asm, "simulate", seed)
    files["simulate.json"] = summary
    return files


def _simulate_ssa(asm, seed, chash, summary):
    sc = asm.config.simulation
    net = asm.network
    files = {}
    state0 = initial_state(asm, integer=True, seed=seed)
    block = {}
    if sc.scenario is not None:
        s = sc.scenario
        if s.seed_mode not in net.names:
            raise ConfigError(f"unknown mode {s.seed_mode!r}", ("simulation", "scenario", "seed_mode"))
        if sc.trajectories == 1:
            traj, rep = scenario_atom_laser(net, s.seed_mode, s.seed_population, sc.t_end, seed,
                                            s.excited_population, sample_dt=sc.sample_dt, config_hash=chash)
            files["ssa.csv"] = _trajectory_csv(asm, "ssa", seed, traj.times, traj.samples)
        else:
            rep = atom_laser_ensemble(net, s.seed_mode, s.seed_population, sc.t_end, seed, sc.trajectories,
                                      s.excited_population)
        block["scenario"] = _report_json(net, rep)
    elif sc.batches is not None:
        b = run_ssa_batches(net, state0, seed, sc.t_end / sc.batches, sc.batches, sc.burn_in)
        block.update(_long_run(asm, b.mean, b.sem))
        block.update(_counts(net, b.event_counts, b.expected_causes, b.n_events))
    elif sc.trajectories == 1:
        traj = run_ssa(net, state0, seed, sc.t_end, sample_dt=sc.sample_dt, config_hash=chash)
        files["ssa.csv"] = _trajectory_csv(asm, "ssa", seed, traj.times, traj.samples)
        block["extinct"] = traj.extinct
        block["final_time"] = q(traj.final_time, "s")
        if net.reservoir is not None and net.reservoir.kappa > 0:
            block.update(_long_run(asm, traj.time_average, None))
        block.update(_counts(net, traj.event_counts, traj.expected_causes, traj.n_events))
    else:
        ens = run_ssa_ensemble(net, state0, seed, sc.trajectories, sc.t_end, sample_dt=sc.sample_dt)
        files["ssa_mean.csv"] = _trajectory_csv(asm, "ssa ensemble mean", seed, ens.times, ens.mean)
        files["ssa_sem.csv"] = _trajectory_csv(asm, "ssa ensemble standard error", seed, ens.times, ens.sem)
        block["trajectories"] = q(ens.n_trajectories, "1")
        block["extinct_trajectories"] = q(ens.n_extinct, "1")
        block.update(_counts(net, ens.event_counts, ens.expected_causes, None))
    summary["ssa"] = block
    return files


def _mode_table(asm):
    net = asm.network
    rows = []
    for name, m in zip(net.names, net.modes):
        rows.append({
            "name": name,
            "species": m.species.name,
            "slot": m.degeneracy_slot,
            "omega": q(m.omega, "rad/s"),
            "kinetic_energy": q(m.kinetic_energy, "J"),
        })
    chans = [{"excited": net.names[c.excited], "ground": net.names[c.ground], "boson": net.names[c.boson],
              "rates": {k: q(v, "1/s") for k, v in c.rates.as_dict().items()}} for c in net.channels]
    res = net.reservoir
    return {"modes": rows, "channels": chans,
            "reservoir_kappa": q(res.kappa if res else 0.0, "1/s")}


def _long_run(asm, mean, sem):
    env = asm.environment
    rows = []
    for i, (name, m) in enumerate(zip(asm.network.names, asm.network.modes)):
        be = bose_occupation(m.omega, env)
        row = {"name": name, "bose_einstein": q(be, "quanta"), "time_average": q(mean[i], "quanta")}
        if sem is not None:
            row["standard_error"] = q(sem[i], "quanta")
        row["relative_difference"] = q(_finite(float(mean[i] / be - 1)) if be > 0 else None, "1")
        rows.append(row)
    return {"long_run_vs_bose_einstein": rows}


def _counts(net, counts, expected, n_events):
    out = {
        "event_counts": {EVENT_NAMES[k]: q(counts[:, k].sum(), "events") for k in range(4)},
        "decay_causes_observed": {n: q(v, "events") for n, v in zip(EVENT_NAMES[1:4], counts[:, 1:4].sum(axis=0))},
        "decay_causes_expected": {n: q(v, "events") for n, v in zip(EVENT_NAMES[1:4], expected)},
    }
    if n_events is not None:
        out["n_events"] = q(n_events, "events")
    return out


def _report_json(net, rep):
    return {
        "seed_mode": net.names[rep.seed_mode],
        "seed_population": q(rep.seed_population, "quanta"),
        "peer_ground_modes": [net.names[i] for i in rep.peer_ground_modes],
        "decays": q(list(rep.decays), "events"),
        "seed_fraction": q(_finite(rep.seed_fraction), "1"),
        "seed_fraction_standard_error": q(_finite(rep.seed_fraction_sem), "1"),
        "uniform_baseline": q(rep.uniform_baseline, "1"),
        "predicted_fraction_t0": q(_finite(rep.predicted_fraction), "1"),
        "initial_forgotten_propensity": q(rep.initial_forgotten_propensity, "1/s"),
        "stimulation_ratio": q(_finite(rep.stimulation_ratio), "1"),
        "runaway_condition": rep.runaway_condition,
    }


# -- serialisation ---------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _meta(asm, what, seed):
    return [f"cavity-kinetics {__version__} {what}",
            f"config_sha256={config_hash(asm.config)}",
            f"seed={seed}"]


def _csv(meta, header, rows):
    lines = [f"# {m}" for m in meta]
    lines.append(",".join(header))
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _trajectory_csv(asm, what, seed, times, samples):
    net = asm.network
    meta = _meta(asm, what, seed)
    for name, m in zip(net.names, net.modes):
        meta.append(f"mode {name}: species={m.species.name} slot={m.degeneracy_slot} "
                    f"omega_rad_s={m.omega!r} kinetic_energy_J={m.kinetic_energy!r}")
    rows = [[t, *row] for t, row in zip(times, samples)]
    return _csv(meta, ["time_s", *net.names], rows)


def _write(out: Path, prefix: str, files: dict):
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, content in files.items():
        path = out / f"{prefix}{name}"
        if not isinstance(content, str):
            content = json.dumps(content, indent=2, sort_keys=True, allow_nan=False) + "\n"
        path.write_text(content)
        written.append(path)
    return written


COMMANDS = {
    "coefficients": cmd_coefficients,
    "equilibrium": cmd_equilibrium,
    "simulate": cmd_simulate,
    "modes": cmd_modes,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="cavity-kinetics",
        description="Einstein coefficients, thermal balance, mode counts and rate-law simulation "
                    "for the reaction a phi <-> a + phi in a cavity.",
        epilog="commands: coefficients (A, B, C and their ratios), equilibrium (temperature sweep), "
               "modes (band counts and lattice enumeration), simulate (ODE and/or SSA). "
               "Exit codes: 0 success, 2 configuration error, 3 runtime guard.",
    )
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=None, help="override simulation.seed")
    p.add_argument("--out", type=Path, default=None,
                   help=f"output directory (default: config outputs.directory, then ${OUT_ENV}, then .)")
    return p


def run(command, config_path, seed=None, out=None):
    """Run one command and return the written paths; raises package errors."""
    cfg = load_config(config_path)
    if seed is not None and seed < 0:
        raise ConfigError("seed must be >= 0", ("seed",))
    asm = assemble(cfg)
    out = Path(out or cfg.outputs.directory or os.environ.get(OUT_ENV) or ".")
    with asm.activate():
        try:
            files = COMMANDS[command](asm, out, seed)
        except ConfigError:
            raise
        except DomainError as exc:
            raise RuntimeGuard(str(exc)) from exc
    return _write(out, cfg.outputs.prefix, files)


class RuntimeGuard(CavityKineticsError):
    """A domain check failed while a command was running."""


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        written = run(args.command, args.config, args.seed, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CavityKineticsError as exc:
        print(f"runtime guard: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - every failure maps to a documented code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
