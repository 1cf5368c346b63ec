"""``fqm`` command line: JSON config in, deterministic CSV tables out.

Exit codes: 0 success, 1 invariant failure, 2 config error, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import current, spectra
from ._backend import backend_name
from .config import ConfigError, load_config_file, to_plain, verify_defaults
from .core import (
    PhysicalParams,
    PotentialField,
    WaveFunction,
    gaussian,
    lattice_plane_wave,
    make_grid,
    normalize,
    random_state,
    sample_potential,
)
from .dynamics import (
    IMAGINARY_TIME,
    REAL_TIME,
    CompositionDomainError,
    EvolutionPlan,
    KernelQuadratureError,
    KernelRequest,
    composition_details,
    gaussian_kernel,
    imaginary_time_ground_state,
    kernel_equation_residual,
    kernel_values,
    split_step,
)
from .riesz import (
    HermiticityError,
    RieszOperator,
    average_energy,
    integration_by_parts_defect,
    parity_projections,
    plane_wave_eigen_defect,
)

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3

# Budgets for ``fqm verify`` and the evolve diagnostics.
NORM_BUDGET = 1e-10
CONTINUITY_BUDGET = 1e-10
HERMITICITY_BUDGET = 1e-10
EIGEN_BUDGET = 1e-12
PARITY_BUDGET = 1e-10
CURRENT_BUDGET = 1e-10
FLUX_BUDGET = 1e-10
GAUSSIAN_KERNEL_BUDGET = 1e-6


class InvariantFailure(RuntimeError):
    pass


class NonConvergence(RuntimeError):
    pass


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_manifest(out_dir, command, cfg):
    manifest = {
        "command": command,
        "seed": cfg.seed,
        "units": cfg.units,
        "config": to_plain(cfg.raw),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require_grid(cfg):
    if cfg.grid is None:
        raise ConfigError("missing required block 'grid' for this subcommand", cfg.raw.line(), cfg.source)
    return cfg.grid


def _state_line(cfg, key):
    node = cfg.raw.get("initial_state")
    return node.line(key) if node is not None else cfg.raw.line()


def _initial_state(cfg, grid):
    st = cfg.initial_state
    if st["kind"] == "random":
        return random_state(grid, np.random.default_rng(cfg.seed))
    if st["kind"] == "plane_wave":
        if len(st["k"]) != grid.dim:
            raise ConfigError(f"'initial_state.k' needs {grid.dim} entries", _state_line(cfg, "k"), cfg.source)
        return normalize(lattice_plane_wave(grid, st["k"], cfg.params.hbar))
    center = st["center"] if st["center"] is not None else [0.0] * grid.dim
    momentum = st["momentum"] if st["momentum"] is not None else [0.0] * grid.dim
    for name, vec in (("center", center), ("momentum", momentum)):
        if len(vec) != grid.dim:
            raise ConfigError(f"'initial_state.{name}' needs {grid.dim} entries", _state_line(cfg, name), cfg.source)
    return gaussian(grid, center, st["width"], momentum, cfg.params.hbar)


def _field_rows(grid, psi, j=None):
    coords = [c.ravel() for c in grid.coordinates()]
    amps = psi.amplitudes.ravel()
    rho = np.abs(amps) ** 2
    comps = [] if j is None else [c.ravel() for c in j.components]
    for i in range(grid.size):
        yield [c[i] for c in coords] + [amps[i].real, amps[i].imag, rho[i]] + [c[i] for c in comps]


def _axes(dim):
    return ["x", "y", "z"][:dim]


def cmd_evolve(cfg, out_dir):
    grid = _require_grid(cfg)
    block = cfg.block("evolve")
    params = cfg.params
    potential = sample_potential(cfg.potential, grid)
    plan = EvolutionPlan(params, grid, potential, block["dt"], REAL_TIME)
    op = RieszOperator(params, grid)
    psi = _initial_state(cfg, grid)
    steps, every, dt = block["steps"], block["snapshot_every"], block["dt"]
    axes = _axes(grid.dim)
    header = axes + ["re_psi", "im_psi", "rho"] + [f"j_{a}" for a in axes]
    snap_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)

    diagnostics = []
    failures = []
    step = 0
    while True:
        j = current.current_density(psi, params)
        write_csv(os.path.join(snap_dir, f"snapshot_{step:08d}.csv"), header, _field_rows(grid, psi, j))
        norm2 = psi.norm_squared()
        energy = average_energy(op, potential, psi)
        # Residuals come from one probe step; at the last snapshot it runs past the end.
        nxt = split_step(plan, psi, 1)
        glob, local = current.continuity_residual(psi, nxt, dt, params)
        diagnostics.append([step, step * dt, norm2, energy, glob, local])
        if abs(norm2 - 1.0) > NORM_BUDGET:
            failures.append(f"norm drift {abs(norm2 - 1.0):.3e} at step {step}")
        if glob > CONTINUITY_BUDGET:
            failures.append(f"global continuity residual {glob:.3e} at step {step}")
        if step >= steps:
            break
        advance = min(every, steps - step)
        psi = split_step(plan, nxt, advance - 1)
        step += advance
    write_csv(
        os.path.join(out_dir, "diagnostics.csv"),
        ["step", "t", "norm", "energy", "global_continuity_residual", "pointwise_continuity_residual"],
        diagnostics,
    )
    if failures:
        raise InvariantFailure("; ".join(failures))


def cmd_groundstate(cfg, out_dir):
    grid = _require_grid(cfg)
    block = cfg.block("groundstate")
    potential = sample_potential(cfg.potential, grid)
    plan = EvolutionPlan(cfg.params, grid, potential, block["dt"], IMAGINARY_TIME)
    result = imaginary_time_ground_state(plan, _initial_state(cfg, grid), block["tol"], block["max_iters"])
    write_csv(
        os.path.join(out_dir, "summary.csv"),
        ["energy", "residual", "iterations", "converged", "final_dt"],
        [[result.energy, result.residual, result.iterations, result.converged, result.final_dt]],
    )
    axes = _axes(grid.dim)
    write_csv(os.path.join(out_dir, "state.csv"), axes + ["re_psi", "im_psi", "rho"], _field_rows(grid, result.state))
    if not result.converged:
        raise NonConvergence(
            f"ground state not converged after {result.iterations} iterations (residual {result.residual:.3e})"
        )


def cmd_spectrum(cfg, out_dir):
    block = cfg.block("spectrum")
    failures = []
    if block["bohr"] is not None:
        b = block["bohr"]
        bp = spectra.BohrParams(cfg.params, b["coupling"])
        ns = range(b["n_min"], b["n_max"] + 1)
        write_csv(
            os.path.join(out_dir, "bohr_levels.csv"),
            ["n", "energy", "radius"],
            [[n, spectra.bohr_energy(bp, n), spectra.bohr_radius(bp, n)] for n in ns],
        )
        rows = [[k, n, spectra.transition_frequency(bp, k, n)] for n in ns for k in ns if k > n]
        write_csv(os.path.join(out_dir, "bohr_transitions.csv"), ["k", "n", "omega"], rows)
    if block["oscillator"] is not None:
        o = block["oscillator"]
        try:
            op = spectra.OscillatorParams(cfg.params, o["q2"], o["beta"])
        except ValueError as exc:
            raise ConfigError(str(exc), cfg.raw["spectrum"].line("oscillator"), cfg.source) from None
        header = ["n", "energy"]
        if o["quadrature"]:
            header += ["energy_quadrature", "relative_deviation"]
        rows = []
        for n in range(o["n_min"], o["n_max"] + 1):
            e = spectra.oscillator_level(op, n)
            row = [n, e]
            if o["quadrature"]:
                eq = spectra.oscillator_level_quadrature(op, n, o["quad_tol"])
                dev = abs(eq - e) / abs(e)
                row += [eq, dev]
                if not dev <= o["agreement_tol"]:
                    failures.append(f"level n={n}: closed form and quadrature differ by {dev:.3e}")
            rows.append(row)
        write_csv(os.path.join(out_dir, "oscillator_levels.csv"), header, rows)
    if failures:
        raise InvariantFailure("; ".join(failures))


def cmd_kernel(cfg, out_dir):
    block = cfg.block("kernel")
    params = cfg.params
    dim = block["dim"]
    failures, nonconverged = [], []
    header = ["separation", "duration", "re", "im", "magnitude", "phase", "status", "error_estimate"]
    gaussian_ref = params.alpha == 2.0
    if gaussian_ref:
        header += ["analytic_re", "analytic_im", "relative_deviation"]
    rows = []
    for t in block["durations"]:
        for s in block["separations"]:
            try:
                vals, errs = kernel_values(params, s, t, dim, block["damping"], tol=block["tol"], return_errors=True)
                k, status, err = complex(vals[0]), "ok", float(errs[0])
            except KernelQuadratureError as exc:
                k, status, err = complex("nan+nanj"), "failed", exc.error_estimate
                nonconverged.append(f"kernel at separation {s}, duration {t}: {exc}")
            row = [s, t, k.real, k.imag, abs(k), math.atan2(k.imag, k.real), status, err]
            if gaussian_ref:
                ref = complex(gaussian_kernel(params, s, t, dim, block["damping"]))
                dev = abs(k - ref) / abs(ref)
                row += [ref.real, ref.imag, dev]
                if status == "ok" and not dev <= GAUSSIAN_KERNEL_BUDGET:
                    failures.append(f"alpha=2 kernel deviates by {dev:.3e} at separation {s}, duration {t}")
            rows.append(row)
    write_csv(os.path.join(out_dir, "kernel_table.csv"), header, rows)

    comp = block["composition"]
    if comp is not None:
        if dim != 1:
            raise ConfigError(
                "kernel composition is only available for kernel.dim = 1", cfg.raw["kernel"].line("dim"), cfg.source
            )
        rows = []
        for s in comp["separations"]:
            try:
                k1 = complex(kernel_values(params, s, comp["duration"], 1, comp["damping"], tol=block["tol"])[0])
            except KernelQuadratureError as exc:
                nonconverged.append(f"single-slice kernel at separation {s}: {exc}")
                continue
            for n in comp["slices"]:
                req = KernelRequest(params, 0.0, s, 0.0, comp["duration"], n, comp["damping"])
                try:
                    kn, edge = composition_details(req, comp["grid"], block["tol"])
                    status = "ok"
                except (CompositionDomainError, KernelQuadratureError) as exc:
                    kn, edge, status = complex("nan+nanj"), float("nan"), "failed"
                    nonconverged.append(f"composition N={n} at separation {s}: {exc}")
                dev = abs(kn - k1) / abs(k1)
                rows.append([s, n, kn.real, kn.imag, k1.real, k1.imag, dev, edge, status])
                if status == "ok" and not dev <= comp["agreement_tol"]:
                    failures.append(f"composition N={n} at separation {s} deviates by {dev:.3e}")
        write_csv(
            os.path.join(out_dir, "kernel_composition.csv"),
            ["separation", "slices", "re", "im", "single_re", "single_im", "relative_deviation", "edge_ratio", "status"],
            rows,
        )

    res = block["residual"]
    if res is not None:
        rows = []
        for dtp in res["dt_probes"]:
            for s in res["separations"]:
                req = KernelRequest(params, 0.0, s, 0.0, res["duration"], 1, block["damping"])
                if dim == 3:
                    req = KernelRequest(params, [0.0, 0.0, 0.0], [s, 0.0, 0.0], 0.0, res["duration"], 1, block["damping"])
                try:
                    rows.append([s, dtp, kernel_equation_residual(req, dtp), "ok"])
                except KernelQuadratureError as exc:
                    rows.append([s, dtp, float("nan"), "failed"])
                    nonconverged.append(f"kernel residual at separation {s}: {exc}")
        write_csv(os.path.join(out_dir, "kernel_residual.csv"), ["separation", "dt_probe", "residual", "status"], rows)

    if failures:
        raise InvariantFailure("; ".join(failures))
    if nonconverged:
        raise NonConvergence("; ".join(nonconverged))


def verify_rows(params, opts, seed):
    """Measured defect and budget for each invariant, in a fixed order."""
    grid = make_grid(1, opts["points"], opts["extent"])
    rng = np.random.default_rng(seed)
    op = RieszOperator(params, grid)
    rows = []

    worst = 0.0
    for _ in range(opts["random_states"]):
        phi, chi = random_state(grid, rng), random_state(grid, rng)
        defect, scale = integration_by_parts_defect(op, phi, chi)
        worst = max(worst, defect / scale)
    rows.append(["hermiticity", params.alpha, worst, HERMITICITY_BUDGET])

    ks = grid.momentum(params.hbar).wavenumbers()
    for alpha in opts["alphas"]:
        op_a = RieszOperator(PhysicalParams(alpha, params.d_alpha, params.hbar), grid)
        worst = max(max(plane_wave_eigen_defect(op_a, k)[:2]) for k in ks)
        rows.append(["eigenfunction", alpha, worst, EIGEN_BUDGET])

    x = grid.axis()
    potential = _even_well(grid)
    plan = EvolutionPlan(params, grid, potential, opts["dt"], REAL_TIME)
    even = normalize(WaveFunction(grid, np.exp(-x**2 / 2) * (1 + 0.3j * np.cos(x))))
    psi, worst = even, 0.0
    for _ in range(opts["parity_steps"]):
        psi = split_step(plan, psi, 1)
        worst = max(worst, parity_projections(psi)[1].norm())
    rows.append(["parity", params.alpha, worst, PARITY_BUDGET])

    worst = 0.0
    for _ in range(opts["random_states"]):
        s = random_state(grid, rng)
        a = current.current_density(s, params).components
        b = current.current_via_velocity(s, params).components
        worst = max(worst, float(np.max(np.abs(a - b))))
    rows.append(["current_equivalence", params.alpha, worst, CURRENT_BUDGET])

    for alpha in opts["alphas"]:
        p_alpha = PhysicalParams(alpha, params.d_alpha, params.hbar)
        worst = 0.0
        for k in ks:
            if k == 0 or k == -(grid.points // 2):
                continue
            j = current.current_density(current.plane_wave(k, p_alpha, grid), p_alpha)
            worst = max(worst, float(np.max(np.abs(j.magnitude() - 1.0))))
        rows.append(["unit_flux", alpha, worst, FLUX_BUDGET])
    return [row + [row[2] <= row[3]] for row in rows]


def _even_well(grid):
    """Even anharmonic well used by the parity check."""
    x = grid.axis()
    return PotentialField(grid, 0.5 * x**2 + 0.1 * np.abs(x) ** 1.5)


def cmd_verify(cfg, out_dir):
    opts = cfg.verify if cfg.verify is not None else verify_defaults()
    rows = verify_rows(cfg.params, opts, cfg.seed)
    write_csv(os.path.join(out_dir, "verify.csv"), ["invariant", "alpha", "defect", "budget", "pass"], rows)
    failed = [f"{r[0]} (alpha={r[1]}): {r[2]:.3e} > {r[3]:.0e}" for r in rows if not r[4]]
    if failed:
        raise InvariantFailure("; ".join(failed))


HELP = {
    "evolve": "real-time evolution with snapshots and conservation diagnostics",
    "groundstate": "imaginary-time ground state",
    "spectrum": "Bohr-atom and oscillator level tables",
    "kernel": "free kernel tables, slice composition and kernel-equation residuals",
    "verify": "run the invariant suite and report defects against budgets",
}

COMMANDS = {
    "evolve": cmd_evolve,
    "groundstate": cmd_groundstate,
    "spectrum": cmd_spectrum,
    "kernel": cmd_kernel,
    "verify": cmd_verify,
}


def _seed(text):
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text!r}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="fqm", description="Fractional Schrodinger equation numerical laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir or ./fqm-out)")
        p.add_argument("--seed", type=_seed, default=None, help="unsigned 64-bit seed overriding the config")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is the config-error code.
        return int(exc.code or 0)
    try:
        cfg = load_config_file(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        out_dir = args.out or cfg.output_dir or "fqm-out"
        os.makedirs(out_dir, exist_ok=True)
        write_manifest(out_dir, args.command, cfg)
        COMMANDS[args.command](cfg, out_dir)
    except ConfigError as exc:
        print(f"fqm: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"fqm: not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except KernelQuadratureError as exc:
        print(f"fqm: not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (InvariantFailure, HermiticityError, FloatingPointError, ArithmeticError) as exc:
        print(f"fqm: invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"fqm {args.command}: wrote {out_dir} (backend {backend_name()})", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
