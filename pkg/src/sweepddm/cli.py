"""Command line driver: solve scenarios, list them, probe the operator.

Exit codes: 0 on success/convergence, 1 on usage or configuration
errors, 2 when a solve does not reach its tolerance (or a probe check
fails).

Configuration files are YAML with a versioned schema::

    schema_version: 1
    scenario: corner5x5        # optional catalog base
    partition: {rows: 2, cols: 2, cell_size: 1.0, mask: [[1, 1], [1, 0]]}
    wavenumber: {kind: constant, k: 6.2832}       # or kind: layered
    habc: {n_aux: 4, angle: 1.0472}
    element_order: 1
    density: 15
    sources: [{x: 0.4, y: 0.3, amplitude: 1.0}]
    obstacle: {rect: [0.8, 0.8, 1.4, 1.4], incident: {k: 6.2832, angle: 0.0}}
    precond: sgs-2d
    krylov: {tolerance: 1.0e-6, max_iterations: 200, restart: 20}

Every key except schema_version is optional once a scenario base is
named; without a base, partition and wavenumber are required.  Mask
rows are listed bottom row first, matching the lattice row order.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import krylov, scenarios, vtk_io
from .ddm import dense_operator

SCHEMA_VERSION = 1

_CONFIG_KEYS = {
    "schema_version", "scenario", "partition", "wavenumber", "habc",
    "element_order", "density", "sources", "obstacle", "precond", "krylov",
}


class ConfigError(ValueError):
    """Invalid configuration file contents."""


class _Parser(argparse.ArgumentParser):
    """argparse variant using exit code 1 for usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def load_config(path):
    """Parse a YAML config file into a Scenario."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of keys to values")

    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(
            f"unknown config keys: {', '.join(sorted(unknown))}"
        )
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )

    if "scenario" in raw:
        try:
            base = scenarios.get_scenario(raw["scenario"])
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]))
    else:
        if "partition" not in raw or "wavenumber" not in raw:
            raise ConfigError(
                "a config without a scenario base needs partition and "
                "wavenumber sections"
            )
        base = scenarios.Scenario(
            name=Path(path).stem, description="user configuration",
            n_rows=1, n_cols=1, cell_size=1.0,
            k_spec={"kind": "constant", "k": 1.0},
        )

    overrides = {}
    if "partition" in raw:
        part = dict(raw["partition"])
        unknown = set(part) - {"rows", "cols", "cell_size", "mask"}
        if unknown:
            raise ConfigError(
                f"unknown partition keys: {', '.join(sorted(unknown))}"
            )
        for key, field_name in (
            ("rows", "n_rows"), ("cols", "n_cols"), ("cell_size", "cell_size"),
        ):
            if key in part:
                overrides[field_name] = part[key]
        if "mask" in part:
            mask = part["mask"]
            overrides["mask"] = tuple(tuple(bool(v) for v in row)
                                      for row in mask)
    if "wavenumber" in raw:
        spec = dict(raw["wavenumber"])
        try:
            scenarios.build_wavenumber(spec)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad wavenumber section: {exc}")
        overrides["k_spec"] = spec
    if "habc" in raw:
        habc_spec = dict(raw["habc"])
        unknown = set(habc_spec) - {"n_aux", "angle"}
        if unknown:
            raise ConfigError(f"unknown habc keys: {', '.join(sorted(unknown))}")
        if "n_aux" in habc_spec:
            overrides["n_aux"] = int(habc_spec["n_aux"])
        if "angle" in habc_spec:
            overrides["angle"] = float(habc_spec["angle"])
    if "element_order" in raw:
        order = int(raw["element_order"])
        if order not in (1, 2):
            raise ConfigError(f"element_order must be 1 or 2, got {order}")
        overrides["element_order"] = order
    if "density" in raw:
        overrides["density"] = float(raw["density"])
    if "sources" in raw:
        srcs = []
        for entry in raw["sources"]:
            try:
                srcs.append((float(entry["x"]), float(entry["y"]),
                             complex(entry.get("amplitude", 1.0))))
            except (TypeError, KeyError) as exc:
                raise ConfigError(f"bad source entry {entry!r}: {exc}")
        overrides["sources"] = tuple(srcs)
    if "obstacle" in raw:
        obs = raw["obstacle"]
        if obs is not None:
            if "rect" not in obs or "incident" not in obs:
                raise ConfigError("obstacle needs rect and incident sections")
            if len(obs["rect"]) != 4:
                raise ConfigError("obstacle rect must be [x0, y0, x1, y1]")
        overrides["obstacle"] = obs
    if "precond" in raw:
        name = raw["precond"]
        if name not in scenarios.PRECONDITIONERS:
            raise ConfigError(
                f"unknown preconditioner {name!r}; valid: "
                f"{', '.join(scenarios.PRECONDITIONERS)}"
            )
        overrides["precond"] = name
    if "krylov" in raw:
        kv = dict(raw["krylov"])
        unknown = set(kv) - {"tolerance", "max_iterations", "restart"}
        if unknown:
            raise ConfigError(f"unknown krylov keys: {', '.join(sorted(unknown))}")
        if "tolerance" in kv:
            overrides["tolerance"] = float(kv["tolerance"])
        if "max_iterations" in kv:
            overrides["max_iterations"] = int(kv["max_iterations"])
        if "restart" in kv:
            overrides["restart"] = (None if kv["restart"] is None
                                    else int(kv["restart"]))

    try:
        scenario = scenarios.customize(base, **overrides)
        scenario.target_h()  # validates density and wavenumber eagerly
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc))
    return scenario


def _cmd_list_scenarios(_args):
    catalog = scenarios.scenario_catalog()
    width = max(len(name) for name in catalog)
    for name in sorted(catalog):
        s = catalog[name]
        lattice = f"{s.n_rows}x{s.n_cols}"
        print(f"{name:<{width}}  {lattice:>5}  {s.description}")
    return 0


def _export_vtk(report, directory):
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for cell_id, system in sorted(report.dd.systems.items()):
        mesh = system.mesh
        values = report.fields[cell_id][: mesh.n_nodes]
        path = out_dir / f"subdomain_{cell_id:03d}.vtk"
        vtk_io.write_field_vtk(path, mesh, {"u": values})
        written.append(path)
    return written


def _cmd_solve(args):
    try:
        scenario = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    t0 = time.perf_counter()
    report = scenarios.run_scenario(
        scenario,
        precond=args.precond,
        tolerance=args.tol,
        restart=args.restart,
    )
    elapsed = time.perf_counter() - t0

    dd = report.dd
    print(f"scenario {scenario.name}: {scenario.n_rows}x{scenario.n_cols} "
          f"lattice, {len(dd.systems)} active subdomains, "
          f"interface dimension {dd.dim}")
    print(f"preconditioner {report.precond}, tolerance "
          f"{report.run.tolerance:g}, restart {report.run.restart or 'none'}")
    final = report.run.history[-1][1] if report.run.history else 0.0
    print(f"outcome {report.run.outcome}: {report.iterations} iterations, "
          f"final relative residual {final:.3e}")
    print(f"interface max relative jump {report.max_jump:.3e}")
    print(f"wall time {elapsed:.2f} s")

    if args.export_history:
        Path(args.export_history).write_text(
            krylov.format_history_csv(report.run)
        )
        print(f"history written to {args.export_history}")
    if args.export_vtk:
        written = _export_vtk(report, args.export_vtk)
        print(f"{len(written)} VTK files written to {args.export_vtk}")

    return 0 if report.converged else 2


def _cmd_probe_operator(args):
    try:
        scenario = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    dd = scenarios.build_decomposition(scenario)
    print(f"scenario {scenario.name}: interface dimension {dd.dim}")
    if not args.size_check:
        return 0
    if dd.dim > args.max_dim:
        print(f"error: interface dimension {dd.dim} exceeds --max-dim "
              f"{args.max_dim}; size check skipped", file=sys.stderr)
        return 1

    f_dense = dense_operator(dd.apply_F_array, dd.dim)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dd.dim) + 1j * rng.standard_normal(dd.dim)
    matvec = dd.apply_F_array(v)
    dense_mv = f_dense @ v
    scale = max(np.linalg.norm(dense_mv), 1e-300)
    err = np.linalg.norm(matvec - dense_mv) / scale
    print(f"dense-probe consistency: |F v - probe(F) v| / |F v| = {err:.3e}")
    ok = err <= 1e-10
    print("size check PASSED" if ok else "size check FAILED")
    return 0 if ok else 2


def main(argv=None):
    parser = _Parser(
        prog="sweepddm",
        description="2D Helmholtz solver with sweeping-preconditioned "
                    "domain decomposition",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run a configured scenario")
    p_solve.add_argument("--config", required=True, help="YAML config file")
    p_solve.add_argument("--precond", choices=sorted(scenarios.PRECONDITIONERS),
                         help="override the scenario preconditioner")
    p_solve.add_argument("--tol", type=float, help="relative residual target")
    p_solve.add_argument("--restart", type=int,
                         help="GMRES restart cycle length")
    p_solve.add_argument("--export-vtk", metavar="DIR",
                         help="write per-subdomain VTK files")
    p_solve.add_argument("--export-history", metavar="FILE",
                         help="write the residual history CSV")
    p_solve.set_defaults(func=_cmd_solve)

    p_list = sub.add_parser("list-scenarios", help="list catalog scenarios")
    p_list.set_defaults(func=_cmd_list_scenarios)

    p_probe = sub.add_parser(
        "probe-operator",
        help="report the interface dimension and optionally check the "
             "matrix-free operator against a dense probe",
    )
    p_probe.add_argument("--config", required=True, help="YAML config file")
    p_probe.add_argument("--size-check", action="store_true",
                         help="probe the dense operator and verify one matvec")
    p_probe.add_argument("--max-dim", type=int, default=600,
                         help="largest interface dimension to probe densely")
    p_probe.set_defaults(func=_cmd_probe_operator)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
