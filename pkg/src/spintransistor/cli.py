"""Command-line interface: ``spintransistor <command> [options]``.

Every command reads optional ``--preset`` and ``--config`` files (flat
``key = value`` text using the long option names with dashes replaced by
underscores); explicit options override the config, which overrides the
preset. Results are printed and written as CSV under ``--out``.

Exit codes: 0 ok, 2 usage, 3 numerical failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .atommap import (
    TRAP_KEYS,
    TrapSpec,
    coupling_ratio_sweep,
    parse_number,
    read_key_values,
    solve_schrodinger_1d,
    geometric_factors,
)
from .dynamics import (
    blockade_fidelity,
    gate_superposition_evolution,
    resonant_triplet,
    transfer_fidelity,
)
from .errors import NumericalError, ParameterError
from .experiments import (
    NoiseSpec,
    TransistorDesign,
    blockade_asymmetry,
    blockade_vs_kappa,
    kappa_grid,
    noise_sweep,
    run_dynamics_trace,
    write_csv,
)
from .spinchain import (
    XxzChain,
    diagonalize,
    build_hamiltonian,
    enumerate_sector_basis,
    nonresonant_gate_state,
    resonance_fields,
    resonance_fields_n3,
    resonance_fields_n5,
)

EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4

ENERGY_UNITS = "energies in units of J (chain input) or epsilon/g (trap input); times in 1/energy"


class UsageError(Exception):
    pass


# --- value parsing -------------------------------------------------------------


def parse_float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [parse_number(v) for v in str(text).replace(",", " ").split()]


_TIME = re.compile(r"^\s*([0-9.]*)\s*\*?\s*pi\s*(?:_over_|/)\s*j1\s*$", re.IGNORECASE)


def parse_time(text, j1: float) -> float:
    """A number, or ``[k]pi_over_j1`` (also ``k*pi/j1``)."""
    text = str(text)
    match = _TIME.match(text)
    if match:
        k = float(match.group(1)) if match.group(1) else 1.0
        return k * math.pi / j1
    try:
        return parse_number(text)
    except ValueError:
        raise UsageError(f"cannot parse time {text!r}; use a number or e.g. 2pi_over_j1") from None


def _field(text, n: int, j1: float, j2: float, delta: float) -> float:
    text = str(text).strip().lower()
    if text == "auto":
        if n == 3:
            return resonance_fields_n3(j1, delta)
        if n == 4:
            return resonance_fields(j2, delta)[0]
        return 0.0
    if text in ("h_plus", "h_minus"):
        if n != 4:
            raise UsageError(f"{text} is defined for N = 4")
        return resonance_fields(j2, delta)[0 if text == "h_plus" else 1]
    return parse_number(text)


# --- option groups -------------------------------------------------------------

CHAIN_OPTIONS = {
    "n": (int, 4), "j1": (parse_number, 1.0), "j2": (parse_number, None),
    "delta": (parse_number, -1.0), "h": (str, "0"), "h_prime": (str, None),
}
TRAP_OPTIONS = {key: (parse_number if typ is float else int, None) for key, typ in TRAP_KEYS.items()}
DESIGN_OPTIONS = {
    "g": (parse_number, 50.0), "kappa": (parse_number, 1.0), "field": (str, "h_plus"),
    "quad_points": (int, 200), "norm_points": (int, 80),
}

COMMANDS = {
    "spectrum": {**CHAIN_OPTIONS, "sector": (int, 1)},
    "transfer": {**CHAIN_OPTIONS, "t": (str, "pi_over_j1")},
    "trace": {**CHAIN_OPTIONS, "gate": (str, "open"), "t_max": (str, "2pi_over_j1"),
              "samples": (int, 1000)},
    "blockade": {**CHAIN_OPTIONS, **TRAP_OPTIONS, **DESIGN_OPTIONS, "t": (str, "pi_over_j1"),
                 "gate_state": (str, "auto"), "kappa_grid": (int, None), "superposition": (str, "no")},
    "noise": {**TRAP_OPTIONS, **DESIGN_OPTIONS, "param": (str, "h"), "sigma": (parse_float_list, [0.0]),
              "n": (int, 100), "workers": (int, 1), "mode": (str, "resolve")},
    "map": {**TRAP_OPTIONS, "n_particles": (int, 4), "method": (str, "quadrature"),
            "quad_points": (int, 200), "norm_points": (int, 80), "samples": (int, 1_000_000),
            "check_doubling": (str, "yes")},
    "sweep": {**TRAP_OPTIONS, "param": (str, "U"), "values": (parse_float_list, None),
              "quad_points": (int, 200), "norm_points": (int, 80)},
}
COMMON_OPTIONS = {"seed": (int, 0), "out": (str, "results")}
ALL_KEYS = set(COMMON_OPTIONS).union(*COMMANDS.values())

HELP = {
    "spectrum": "eigenvalues and eigenvectors of a chain sector",
    "transfer": "input-to-output transfer fidelity",
    "trace": "port and gate populations versus time (open or closed gate)",
    "blockade": "blockade fidelity, gate superposition, or the kappa curve",
    "noise": "transfer fidelity under Gaussian parameter noise",
    "map": "geometric factors and J2/J1 for a trap",
    "sweep": "J2/J1 along a V0 or U sweep",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spintransistor", description="Quantum spin transistor simulator."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, options in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--preset", help="shipped preset: fig1c, fig2 or fig3")
        p.add_argument("--config", help="key = value config file")
        if set(TRAP_OPTIONS) <= set(options):
            p.add_argument("--trap", help="config file (or preset name) with trap keys")
        for key, (typ, default) in {**options, **COMMON_OPTIONS}.items():
            flag = "--" + key.replace("_", "-")
            kwargs = {"dest": key, "default": None}
            if typ is parse_float_list:
                kwargs.update(nargs="+", type=parse_number)
            else:
                kwargs["type"] = typ
            p.add_argument(flag, help=f"default: {default}", **kwargs)
    return parser


def _preset_path(name: str) -> Path:
    path = resources.files("spintransistor") / "presets" / f"{name}.cfg"
    if not path.is_file():
        raise UsageError(f"unknown preset {name!r}")
    return Path(str(path))


def _load(path: Path, command: str) -> dict:
    try:
        values = read_key_values(path)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except ParameterError as exc:
        raise UsageError(str(exc)) from None
    unknown = set(values) - ALL_KEYS
    if unknown:
        raise UsageError(f"unknown config keys in {path}: {', '.join(sorted(unknown))}")
    options = {**COMMANDS[command], **COMMON_OPTIONS}
    out = {}
    for key, raw in values.items():
        if key in options:
            try:
                out[key] = options[key][0](raw)
            except ValueError:
                raise UsageError(f"bad value for {key} in {path}: {raw!r}") from None
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, preset, trap file, config file and explicit options."""
    command = args.command
    options = {**COMMANDS[command], **COMMON_OPTIONS}
    config = {key: default for key, (_, default) in options.items()}
    if args.preset:
        config.update(_load(_preset_path(args.preset), command))
    trap = getattr(args, "trap", None)
    if trap:
        path = Path(trap)
        if not path.exists() and not path.suffix:
            path = _preset_path(trap)
        elif not path.exists():
            candidate = resources.files("spintransistor") / "presets" / path.name
            path = Path(str(candidate)) if candidate.is_file() else path
        config.update({k: v for k, v in _load(path, command).items() if k in TRAP_OPTIONS})
    if args.config:
        config.update(_load(Path(args.config), command))
    for key in options:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    return config


# --- builders ------------------------------------------------------------------


def chain_from_config(cfg: dict) -> XxzChain:
    n, j1, delta = cfg["n"], cfg["j1"], cfg["delta"]
    j2 = j1 if cfg["j2"] is None else cfg["j2"]
    h = _field(cfg["h"], n, j1, j2, delta)
    h_prime = None
    if cfg["h_prime"] is not None:
        text = str(cfg["h_prime"]).strip().lower()
        if n == 5 and text in ("auto", "g0"):
            h_prime = resonance_fields_n5(j2, delta, h, via="G0")[0]
        elif n == 5 and text in ("gpm", "g+-"):
            h_prime = resonance_fields_n5(j2, delta, h, via="G+-", j1=j1)[0]
        else:
            h_prime = parse_number(text)
    elif n == 5 and str(cfg["h"]).lower() == "auto":
        h_prime = resonance_fields_n5(j2, delta, h, via="G0")[0]
    return XxzChain.symmetric_chain(n, j1, None if n == 3 else j2, delta, h, h_prime)


def trap_from_config(cfg: dict) -> TrapSpec:
    return TrapSpec(**{k: cfg[k] for k in TRAP_KEYS if cfg.get(k) is not None})


def design_from_config(cfg: dict) -> TransistorDesign:
    return TransistorDesign(
        trap_from_config(cfg), g=cfg["g"], kappa=cfg["kappa"], field=cfg["field"],
        quad_points=cfg["quad_points"], norm_points=cfg["norm_points"],
    )


def _echo(command: str, cfg: dict, extra: dict | None = None) -> dict:
    echo = {"command": command, "version": __version__}
    echo.update({k: v for k, v in cfg.items() if k != "out"})
    echo.update(extra or {})
    return echo


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands ------------------------------------------------------------------


def cmd_spectrum(cfg: dict) -> int:
    chain = chain_from_config(cfg)
    basis = enumerate_sector_basis(chain.n_sites, cfg["sector"])
    spectral = diagonalize(build_hamiltonian(chain, basis), basis)
    w = spectral.eigenvalues
    print(f"N = {chain.n_sites}, fields = {chain.fields}, couplings = {chain.couplings}")
    print("eigenvalues: " + " ".join(f"{e:.10g}" for e in w))
    if len(w) >= 2:
        print("gaps:        " + " ".join(f"{g:.10g}" for g in np.diff(w)))
    if len(w) >= 3:
        trip = resonant_triplet(w)
        where = "lowest" if trip[0] == 0 else ("highest" if trip[2] == len(w) - 1 else "middle")
        print(f"most equidistant triplet: levels {trip} ({where} three)")
    rows = [[i, e, *spectral.eigenvectors[:, i]] for i, e in enumerate(w)]
    cols = ["index", "energy"] + [basis.label(k) for k in range(len(basis))]
    write_csv(_out_dir(cfg) / "spectrum.csv", cols, rows, _echo("spectrum", cfg), ENERGY_UNITS)
    return 0


def cmd_transfer(cfg: dict) -> int:
    chain = chain_from_config(cfg)
    t = parse_time(cfg["t"], chain.couplings[0])
    fid = transfer_fidelity(chain, t)
    print(f"transfer fidelity F(t={t:.10g}) = {fid:.12f}")
    write_csv(_out_dir(cfg) / "transfer.csv", ["t", "fidelity"], [[t, fid]],
              _echo("transfer", cfg), ENERGY_UNITS)
    return 0


def cmd_trace(cfg: dict) -> int:
    chain = chain_from_config(cfg)
    t_max = parse_time(cfg["t_max"], chain.couplings[0])
    trace = run_dynamics_trace(chain, cfg["gate"], t_max, cfg["samples"])
    print(f"{cfg['gate']} gate: final p_in = {trace.p_in[-1]:.6f}, p_out = {trace.p_out[-1]:.6f}, "
          f"min p_in = {trace.p_in.min():.6f}")
    write_csv(_out_dir(cfg) / f"trace_{cfg['gate']}.csv", ["t", "p_in", "p_out", "p_gate"],
              zip(*trace), _echo("trace", cfg), ENERGY_UNITS)
    return 0


def cmd_blockade(cfg: dict) -> int:
    out = _out_dir(cfg)
    if cfg["kappa_grid"]:
        design = design_from_config(cfg)
        factors = design.factors()
        points = blockade_vs_kappa(kappa_grid(cfg["kappa_grid"]), factors, design.g, design.field)
        for p in points:
            print(f"kappa = {p.kappa:10.5g}  Delta = {p.delta:+.3f}  F = {p.fidelity:.6f}")
        best = min(points, key=lambda p: p.fidelity)
        print(f"minimum at kappa = {best.kappa:.6g} (Delta = {best.delta:+.3f})")
        for d, diff in blockade_asymmetry(points):
            print(f"asymmetry F({d:+.2f}) - F({-d:+.2f}) = {diff:+.5f}")
        write_csv(out / "blockade_kappa.csv", ["kappa", "delta", "fidelity"], points,
                  _echo("blockade", cfg, {"alphas": factors.alphas}), "fidelity dimensionless")
        return 0
    chain = chain_from_config(cfg)
    t = parse_time(cfg["t"], chain.couplings[0])
    state = None if cfg["gate_state"] == "auto" else cfg["gate_state"]
    if str(cfg["superposition"]).lower() in ("yes", "true", "1"):
        sup = gate_superposition_evolution(chain, t, state)
        print(f"branch probabilities at t = {t:.10g}: transferred {sup.p_transferred:.6f}, "
              f"blocked {sup.p_blocked:.6f}")
        write_csv(out / "superposition.csv", ["t", "p_transferred", "p_blocked"],
                  [[t, sup.p_transferred, sup.p_blocked]], _echo("blockade", cfg), ENERGY_UNITS)
        return 0
    gate = nonresonant_gate_state(chain) if state is None else state
    fid = blockade_fidelity(chain, gate, t)
    label = gate if isinstance(gate, str) else gate.label
    print(f"blockade fidelity (control in {label}) at t = {t:.10g}: {fid:.12f}")
    write_csv(out / "blockade.csv", ["t", "fidelity"], [[t, fid]],
              _echo("blockade", cfg, {"control": label}), ENERGY_UNITS)
    return 0


def cmd_noise(cfg: dict) -> int:
    design = design_from_config(cfg)
    spec = NoiseSpec(cfg["param"], 0.0, cfg["n"], cfg["seed"])
    records = noise_sweep(spec, cfg["sigma"], design, cfg["workers"], cfg["mode"])
    for r in records:
        print(f"dA = {r.relative_sigma:<8g} mean F = {r.mean:.8f} +- {r.stderr:.2e} "
              f"(ok {r.n_ok}, failed {r.n_failed}, rejected {r.n_rejected})")
    rows = [(*r.row(), r.n_failed, r.n_rejected) for r in records]
    extra = {"t_out": records[0].config["t_out"], **records[0].provenance}
    write_csv(_out_dir(cfg) / f"noise_{cfg['param']}.csv",
              ["relative_sigma", "mean", "stderr", "n_ok", "n_failed", "n_rejected"],
              rows, _echo("noise", cfg, extra), "fidelity dimensionless; t_out in g/epsilon")
    return 0


def cmd_map(cfg: dict) -> int:
    trap = trap_from_config(cfg)
    n = cfg["n_particles"]
    kwargs = {"seed": cfg["seed"], "samples": cfg["samples"]} if cfg["method"] == "monte_carlo" \
        else {"quad_points": cfg["quad_points"], "norm_points": cfg["norm_points"]}
    spectrum = solve_schrodinger_1d(trap, max(n, 4))
    factors = geometric_factors(spectrum, n, cfg["method"], **kwargs)
    print("energies (epsilon): " + " ".join(f"{e:.8g}" for e in spectrum.energies))
    for j, (a, e) in enumerate(zip(factors.alphas, factors.errors), 1):
        print(f"alpha_{j} = {a:.8g} +- {e:.2g}")
    print(f"ordered norm x N! = {factors.ordered_norm:.8f}")
    rows = [[j, a, e] for j, (a, e) in enumerate(zip(factors.alphas, factors.errors), 1)]
    extra = {"ordered_norm": factors.ordered_norm, "backend": kernels.BACKEND}
    if n >= 3:
        ratio, err = factors.ratio(2, 1)
        print(f"J2/J1 = {ratio:.6f} +- {err:.2g}")
        extra["ratio"] = ratio
        if str(cfg["check_doubling"]).lower() in ("yes", "true", "1") and cfg["method"] == "quadrature":
            fine = solve_schrodinger_1d(trap.with_(n_grid=2 * trap.n_grid), max(n, 4))
            fine_ratio = geometric_factors(fine, n, quad_points=2 * cfg["quad_points"],
                                           norm_points=cfg["norm_points"]).ratio(2, 1)[0]
            change = abs(fine_ratio - ratio) / ratio
            print(f"grid doubling: J2/J1 = {fine_ratio:.6f} (change {100 * change:.3f}%)")
            extra["ratio_doubled"] = fine_ratio
    out = _out_dir(cfg)
    write_csv(out / "factors.csv", ["bond", "alpha", "error"], rows,
              _echo("map", cfg, extra), "alpha in epsilon*L (J = alpha/g in epsilon)")
    spectrum.write_csv(out / "orbitals.csv", [f"{k} = {v}" for k, v in _echo("map", cfg).items()])
    return 0


def cmd_sweep(cfg: dict) -> int:
    if not cfg["values"]:
        raise UsageError("sweep needs --values")
    trap = trap_from_config(cfg)
    points = coupling_ratio_sweep(trap, cfg["param"], cfg["values"],
                                  quad_points=cfg["quad_points"], norm_points=cfg["norm_points"])
    for p in points:
        note = f"  ({p.message})" if p.message else ""
        print(f"{cfg['param']} = {p.value:<8g} J2/J1 = {p.ratio:.5f} +- {p.error:.2g}{note}")
    write_csv(_out_dir(cfg) / f"sweep_{cfg['param']}.csv", [cfg["param"], "ratio", "error"],
              [p[:3] for p in points], _echo("sweep", cfg), "V0, U in epsilon")
    return 0


HANDLERS = {
    "spectrum": cmd_spectrum, "transfer": cmd_transfer, "trace": cmd_trace,
    "blockade": cmd_blockade, "noise": cmd_noise, "map": cmd_map, "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ParameterError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
