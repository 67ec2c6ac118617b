"""Command-line front end.

Parameters are layered: shipped preset < ``--config`` file < command-line flags.
Every table is written with '#' header lines echoing the version, all physical
and dimensionless parameters, the grids and the mode, followed by CSV rows with
17 significant digits (or the same content as JSON).
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import closed_forms as cf
from . import core
from . import fluctuations as fl
from .errors import BistabilityError, NumericalError, WeakExcitationWarning

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_INT_KEYS = {"natoms", "tau_steps", "detuning_steps", "y_steps", "fock_cutoff"}
_FLOAT_KEYS = {"g", "kappa", "gamma", "drive_y", "x", "xi", "c", "tau_max", "detuning_max",
               "y_min", "y_max", "omega0", "phi0"}
_STR_KEYS = {"pair", "mode", "ic", "format", "preset"}
_BOOL_KEYS = {"components", "numeric_only"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _BOOL_KEYS

DEFAULTS = {
    "x": 1e-3,
    "tau_max": 6.0,
    "tau_steps": 601,
    "detuning_max": 15.0,
    "detuning_steps": 1501,
    "mode": "reduced",
    "format": "csv",
    "components": False,
    "numeric_only": False,
}


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _coerce(key: str, raw):
    if key not in _ALL_KEYS:
        raise ConfigError(f"unknown configuration key {key!r}")
    if raw is None:
        return None
    try:
        if key in _INT_KEYS:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if key in _FLOAT_KEYS:
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError
            return val
        if key in _BOOL_KEYS:
            if isinstance(raw, bool):
                return raw
            return {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}[str(raw).lower()]
    except (ValueError, KeyError):
        raise ConfigError(f"bad value {raw!r} for {key}") from None
    return str(raw)


def load_presets() -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.read_string(resources.files("obfluct").joinpath("presets.ini").read_text())
    return parser


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` file; '#' starts a comment line."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    parser = configparser.ConfigParser()
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from None
    return {k.replace("-", "_"): _coerce(k.replace("-", "_"), v) for k, v in parser["run"].items()}


@dataclass
class RunConfig:
    command: str
    values: dict
    out: str | None = None
    figure: int | None = None
    physical: core.PhysicalParams | None = field(default=None, repr=False)

    def get(self, key: str, default=None):
        v = self.values.get(key)
        return default if v is None else v


def resolve_config(args: argparse.Namespace) -> RunConfig:
    flags = {k: _coerce(k, getattr(args, k)) for k in _ALL_KEYS if getattr(args, k, None) is not None}
    from_file = read_config_file(args.config) if args.config else {}
    preset_name = flags.get("preset") or from_file.get("preset")
    if preset_name is None and args.command == "oracle":
        preset_name = "oracle"
    if preset_name is None and args.command == "figure":
        preset_name = {1: "fig1", 2: "fig2", 3: "fig3", 4: "fig4"}[args.n]
    preset = {}
    if preset_name is not None:
        presets = load_presets()
        if preset_name not in presets:
            raise ConfigError(f"unknown preset {preset_name!r}; have {', '.join(presets.sections())}")
        preset = {k: _coerce(k, v) for k, v in presets[preset_name].items()}
    values = dict(DEFAULTS)
    for layer in (preset, from_file, flags):
        values.update(layer)
    values["preset"] = preset_name
    if values["mode"] not in ("reduced", "full"):
        raise ConfigError(f"mode must be reduced or full, got {values['mode']!r}")
    if values["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {values['format']!r}")
    if values.get("ic") is None:
        values["ic"] = "analytic" if values["mode"] == "reduced" else "lyapunov"
    if values["ic"] not in ("analytic", "lyapunov"):
        raise ConfigError(f"ic must be analytic or lyapunov, got {values['ic']!r}")
    cfg = RunConfig(args.command, values, getattr(args, "out", None), getattr(args, "n", None))
    _resolve_parameters(cfg)
    return cfg


def _resolve_parameters(cfg: RunConfig) -> None:
    v = cfg.values
    rates = [v.get(k) for k in ("g", "kappa", "gamma", "natoms")]
    have_rates = all(r is not None for r in rates)
    have_dimless = v.get("xi") is not None or v.get("c") is not None
    if have_rates:
        extra = {k: v[k] for k in ("omega0", "phi0") if v.get(k) is not None}
        p = core.PhysicalParams(*rates, drive_y=v.get("drive_y", 0.0), **extra)
        dp = core.derive_dimensionless(p)
        if have_dimless:
            for key, derived in (("xi", dp.xi), ("c", dp.C)):
                given = v.get(key)
                if given is not None and abs(given - derived) > 1e-12 * abs(derived):
                    raise ConfigError(
                        f"{key} = {given} conflicts with the value {derived:.17g} implied by the rates; "
                        "give either rates or (xi, C)")
        cfg.physical = p
        v["xi"], v["c"], v["n_s"] = dp.xi, dp.C, dp.n_s
    elif v.get("xi") is None and v.get("c") is None:
        raise ConfigError("no parameters: give --preset, rates (--g --kappa --gamma --natoms) or --xi and --C")
    for key in ("xi", "c"):
        val = v.get(key)
        if val is not None and not val > 0:
            raise ConfigError(f"{key} must be positive, got {val}")


# ---- output -----------------------------------------------------------------

@dataclass
class Table:
    columns: list[str]
    rows: list[list]
    extra_header: dict = field(default_factory=dict)


def header_items(cfg: RunConfig, table: Table) -> list[tuple[str, object]]:
    v = cfg.values
    p = cfg.physical
    items: list[tuple[str, object]] = [("obfluct_version", __version__), ("command", cfg.command)]
    if cfg.figure is not None:
        items.append(("figure", cfg.figure))
    items.append(("preset", v.get("preset") or "none"))
    for key, attr in (("g", "g"), ("kappa", "kappa"), ("gamma", "gamma"), ("natoms", "n_atoms"),
                      ("drive_Y", "drive_y"), ("omega0", "omega0"), ("phi0", "phi0")):
        if p is not None:
            items.append((key, getattr(p, attr)))
        elif key == "natoms" and v.get("natoms") is not None:
            items.append((key, v["natoms"]))
        else:
            items.append((key, "n/a"))
    items.append(("C", v.get("c", "n/a")))
    items.append(("xi", v.get("xi", "n/a")))
    items.append(("n_s", v.get("n_s", "n/a")))
    items.append(("X", v.get("x")))
    items.append(("mode", v["mode"]))
    items.extend(table.extra_header.items())
    return items


def render(cfg: RunConfig, table: Table) -> str:
    items = header_items(cfg, table)
    if cfg.values["format"] == "json":
        def conv(x):
            if isinstance(x, (np.floating, float)):
                return float(x) if math.isfinite(x) else None
            if isinstance(x, (np.integer,)):
                return int(x)
            if isinstance(x, np.bool_):
                return bool(x)
            return x
        doc = {
            "header": {k: conv(val) for k, val in items},
            "columns": table.columns,
            "rows": [[conv(x) for x in row] for row in table.rows],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"
    buf = io.StringIO()
    for k, val in items:
        buf.write(f"# {k} = {_fmt(val)}\n")
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def emit(cfg: RunConfig, table: Table, path: str | None) -> None:
    text = render(cfg, table)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _grid(stop: float, steps: int, symmetric: bool = False) -> np.ndarray:
    if steps < 2 or not stop > 0:
        raise ConfigError("grids need at least 2 steps and a positive extent")
    return np.linspace(-stop if symmetric else 0.0, stop, steps)


# ---- subcommands ------------------------------------------------------------

def run_steady(cfg: RunConfig) -> Table:
    v = cfg.values
    C = v["c"]
    if v.get("y_max") is not None:
        ys = np.linspace(v.get("y_min", 0.0), v["y_max"], v.get("y_steps", 91))
    else:
        ys = np.array([v.get("drive_y", 0.0)])
    columns = ["Y", "X", "branch", "weak_excitation", "j_minus", "j_z"]
    if cfg.physical is not None:
        columns += ["r_gamma", "r_kappa"]
    rows = []
    for y in ys:
        for op in core.intracavity_roots(float(y), C):
            row = [float(y), op.X, op.branch.value, op.in_weak_excitation, op.j_minus, op.j_z]
            if cfg.physical is not None:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", WeakExcitationWarning)
                    rates = core.emission_rates(op.X, cfg.physical)
                row += [rates.r_gamma, rates.r_kappa]
            rows.append(row)
    extra = {"Y_grid": f"{_fmt(ys[0])}:{_fmt(ys[-1])}:{ys.size}"}
    tp = core.turning_points(C)
    if tp is not None:
        extra["X_minus"], extra["X_plus"] = tp
    return Table(columns, rows, extra)


def _system(cfg: RunConfig) -> fl.FluctuationSystem:
    v = cfg.values
    return fl.build_jacobian(v["x"], v["xi"], v["c"], reduced=v["mode"] == "reduced")


def _seed(cfg: RunConfig, sys_: fl.FluctuationSystem) -> np.ndarray:
    v = cfg.values
    if v["ic"] == "analytic":
        return cf.leading_order_covariance(cf.WeakExcitationContext(v["x"], v["xi"], v["c"]))
    return fl.steady_covariance(sys_).entries


def run_covariance(cfg: RunConfig) -> Table:
    v = cfg.values
    sys_ = _system(cfg)
    blocks = [("lyapunov", fl.steady_covariance(sys_).entries)]
    try:
        ctx = cf.WeakExcitationContext(v["x"], v["xi"], v["c"])
        blocks.append(("leading_order", cf.leading_order_covariance(ctx)))
    except ValueError:
        pass
    rows = [[src, fl.BASIS[i], *mat[i]] for src, mat in blocks for i in range(5)]
    return Table(["source", "row", *fl.BASIS], rows)


def run_correlate(cfg: RunConfig) -> Table:
    v = cfg.values
    pair = fl.parse_pair(v.get("pair", "nu*z"))
    taus = _grid(v["tau_max"], v["tau_steps"])
    sys_ = _system(cfg)
    engine = fl.correlation_trace(sys_, _seed(cfg, sys_), pair, taus)
    columns = ["tau", "engine"]
    cols = [taus, engine.values]
    name = f"{fl.BASIS[pair[0]]},{fl.BASIS[pair[1]]}"
    if name in cf.CLOSED_FORM_PAIRS:
        ctx = cf.WeakExcitationContext(v["x"], v["xi"], v["c"])
        closed = cf.closed_form_trace(pair, taus, ctx)
        scale = max(float(np.abs(closed.values).max()), np.finfo(float).tiny)
        diff = np.abs(engine.values - closed.values)
        columns += ["closed_form", "abs_diff", "rel_diff"]
        cols += [closed.values, diff, diff / scale]
        if v["components"]:
            comps = cf.closed_form_components(pair, taus, ctx)
            for k, comp in enumerate(comps, start=1):
                columns.append(f"component_{k}")
                cols.append(comp.values)
    elif not v["numeric_only"]:
        raise ConfigError(f"pair {fl.pair_label(pair)} has no closed form; pass --numeric-only")
    extra = {"pair": fl.pair_label(pair), "ic": v["ic"],
             "tau_grid": f"0:{_fmt(v['tau_max'])}:{v['tau_steps']}"}
    return Table(columns, [list(r) for r in zip(*cols)], extra)


def run_spectrum(cfg: RunConfig) -> Table:
    v = cfg.values
    pair = fl.parse_pair(v.get("pair", "zz*"))
    name = f"{fl.BASIS[pair[0]]},{fl.BASIS[pair[1]]}"
    if name not in ("z*,z", "nu*,nu*"):
        raise ConfigError("spectrum supports the transmission pair zz* and the squeezing pair nu*nu*")
    dets = _grid(v["detuning_max"], v["detuning_steps"], symmetric=True)
    sys_ = _system(cfg)
    spec = fl.spectrum_trace(sys_, _seed(cfg, sys_), pair, dets)
    columns, cols = ["detuning", "engine"], [dets, spec.values]
    try:
        ctx = cf.WeakExcitationContext(v["x"], v["xi"], v["c"])
    except ValueError:
        ctx = None
    if ctx is not None:
        columns.append("closed_form")
        cols.append(np.array([cf.closed_form_laplace(pair, -1j * d, ctx).real for d in dets]))
    extra = {"pair": fl.pair_label(pair), "ic": v["ic"],
             "detuning_grid": f"{_fmt(-v['detuning_max'])}:{_fmt(v['detuning_max'])}:{v['detuning_steps']}"}
    return Table(columns, [list(r) for r in zip(*cols)], extra)


def _figure1(cfg: RunConfig) -> dict[str, Table]:
    v = cfg.values
    C, N = v["c"], v.get("natoms", 100)
    xs = np.round(np.linspace(0.01, v["x"], 10), 12)
    xis = np.round(np.arange(1, 601) * 0.005, 12)
    rows = [[X, xi, core.steady_averages(X, xi, C, N).ratio_r] for X in xs for xi in xis]
    argmax = [[X, xis[int(np.argmax([core.steady_averages(X, xi, C, N).ratio_r for xi in xis]))],
               core.ratio_deviation_argmax(C)] for X in xs]
    return {
        "ratio": Table(["X", "xi", "r"], rows, {"xi_grid": "0.005:3:600"}),
        "argmax": Table(["X", "xi_argmax", "xi_predicted"], argmax),
    }


def _zero_crossings(taus: np.ndarray, vals: np.ndarray) -> list[float]:
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    return [taus[i] - vals[i] * (taus[i + 1] - taus[i]) / (vals[i + 1] - vals[i]) for i in idx]


def _figure2(cfg: RunConfig) -> dict[str, Table]:
    v = cfg.values
    taus = _grid(v["tau_max"], v["tau_steps"])
    ctx = cf.WeakExcitationContext(v["x"], v["xi"], v["c"])
    c1 = cf.cf_nu_star_z_1(taus, ctx).normalized(4).values
    c2 = cf.cf_nu_star_z_2(taus, ctx).normalized(4).values
    total = c1 + c2
    zeros = _zero_crossings(taus, total)
    return {
        "components": Table(["tau", "component_1", "component_2", "sum"],
                            [list(r) for r in zip(taus, c1, c2, total)], {"normalization": "X^4"}),
        "zero_crossings": Table(["k", "tau", "half_period"],
                                [[k, t, math.pi / ctx.gbar] for k, t in enumerate(zeros)],
                                {"Gbar": ctx.gbar}),
    }


def _figure3(cfg: RunConfig) -> dict[str, Table]:
    v = cfg.values
    taus = _grid(v["tau_max"], v["tau_steps"])
    inset = load_presets()["mielke"]
    out = {}
    for series, xi, C in (("main", v["xi"], v["c"]), ("inset", float(inset["xi"]), float(inset["C"]))):
        ctx = cf.WeakExcitationContext(v["x"], xi, C)
        nz2 = cf.cf_nu_star_z_2(taus, ctx).normalized(4).values
        zz2 = cf.cf_z_star_z_components(taus, ctx)[1].normalized(4).values
        out[series] = Table(["tau", "sum", "z_star_z_2", "nu_star_z_2"],
                            [list(r) for r in zip(taus, nz2 + zz2, zz2, nz2)],
                            {"series_xi": xi, "series_C": C, "normalization": "X^4"})
    return out


def _figure4(cfg: RunConfig) -> dict[str, Table]:
    v = cfg.values
    taus = _grid(v["tau_max"], v["tau_steps"])
    ctx = cf.WeakExcitationContext(v["x"], v["xi"], v["c"])
    c1 = cf.cf_nu_star_z_1(taus, ctx).normalized(4).values
    anomalous = -cf.cf_nu_star_z_star(taus, ctx).normalized(2).values
    return {"overlay": Table(["tau", "nu_star_z_1_over_X4", "nu_star_z_star_over_minus_X2"],
                             [list(r) for r in zip(taus, c1, anomalous)])}


FIGURES = {1: _figure1, 2: _figure2, 3: _figure3, 4: _figure4}


def run_figure(cfg: RunConfig) -> dict[str, Table]:
    return FIGURES[cfg.figure](cfg)


def run_oracle(cfg: RunConfig) -> dict:
    from . import oracle as me

    v = cfg.values
    if cfg.physical is None:
        raise ConfigError("the oracle needs rates: --g --kappa --gamma --natoms")
    p = cfg.physical
    cutoff = v.get("fock_cutoff", 12)
    hc = me.HilbertConfig(p.n_atoms, cutoff)
    C = core.derive_dimensionless(p).C
    report: dict = {"n_atoms": p.n_atoms, "fock_cutoff": cutoff, "C": C, "xi": v["xi"]}

    drives = np.array([0.005, 0.01, 0.02]) * (1 + 2 * C)
    slope, _ = me.linear_response(hc, p, drives)
    report["linear_response"] = {"slope": slope, "expected": me.expected_slope(p),
                                 "relative_error": abs(slope / me.expected_slope(p) - 1)}

    y = v.get("drive_y") or 0.02 * (1 + 2 * C)
    q = core.PhysicalParams(p.g, p.kappa, p.gamma, p.n_atoms, y, p.omega0, p.phi0)
    rho = me.steady_state(me.build_liouvillian(hc, q))
    m = me.map_to_scaled(rho, q)
    report["means"] = {"Y": y, "X": m.X, "polarization": abs(m.polarization),
                       "polarization_mean_field": m.X / (1 + m.X**2), "inversion": m.inversion,
                       "excitation": 1 + m.inversion, "X_squared": m.X**2}
    report["invariants"] = rho.diagnostics()

    L0 = me.build_liouvillian(me.HilbertConfig(1, 12), core.PhysicalParams(p.g, p.kappa, p.gamma, 1, 0.5),
                              coupling=0.0)
    rho0 = me.steady_state(L0)
    e0 = me.drive_amplitude(L0.params)
    report["decoupled_cavity"] = {"amplitude": abs(rho0.expect(L0.ops["a"])),
                                  "expected": abs(e0) / p.kappa}

    L3 = me.build_liouvillian(me.HilbertConfig(3, 6), core.PhysicalParams(p.g, p.kappa, p.gamma, 3, 0.05 * 7))
    rho3 = me.steady_state(L3, check_cutoff=False)
    taus = np.linspace(0.0, 40.0 / p.gamma, 2001)
    trace = me.two_time_correlation(L3, rho3, "adag", "a", taus)
    report["rabi_fit"] = {"frequency": me.dominant_frequency(taus, trace), "expected": p.g * math.sqrt(3)}
    return report


def run_selftest(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    results = []
    dp = core.derive_dimensionless(core.PhysicalParams(1.06, 0.88, 10.0, 310))
    results.append(("parameters", 39.5 <= dp.C <= 40.5 and 0.17 <= dp.xi <= 0.18, f"C={dp.C:.4f} xi={dp.xi:.4f}"))

    X, xi, C = 1e-3, 0.176, 39.6
    cov = fl.steady_covariance(fl.build_jacobian(X, xi, C, reduced=True)).entries
    ref = cf.init_conditions(cf.WeakExcitationContext(X, xi, C))
    err = float(np.max(np.abs(cov[fl.basis_index("nu*")] - ref) / np.abs(ref)))
    results.append(("initial_conditions", err <= 1e-3, f"max rel err {err:.3g}"))

    taus = np.linspace(0, 6, 301)
    worst = 0.0
    for xi, C in ((dp.xi, dp.C), (cf.FIG3_MAIN["xi"], cf.FIG3_MAIN["C"])):
        ctx = cf.WeakExcitationContext(1e-4, xi, C)
        sys_ = fl.build_jacobian(1e-4, xi, C, reduced=True)
        seed = cf.leading_order_covariance(ctx)
        for name in cf.CLOSED_FORM_PAIRS:
            pair = fl.parse_pair(tuple(name.split(",")))
            a = cf.closed_form_trace(pair, taus, ctx).values
            e = fl.correlation_trace(sys_, seed, pair, taus).values
            worst = max(worst, float(np.abs(a - e).max() / np.abs(a).max()))
    results.append(("closed_forms", worst <= 1e-8, f"max rel sup err {worst:.3g}"))

    eig = np.sort_complex(np.linalg.eigvals(fl.build_jacobian(1e-3, 1.0, 20.0, reduced=True).propagator))
    g = math.sqrt(40.0)
    want = np.sort_complex(np.array([-1 + 1j * g, -1 + 1j * g, -1 - 1j * g, -1 - 1j * g, -2]))
    gap = float(np.abs(eig - want).max())
    results.append(("eigenvalues", gap <= 1e-6, f"max gap {gap:.3g}"))
    return results


# ---- argument parsing -------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="flat key = value parameter file (flags override it)")
    p.add_argument("--preset", help="named parameter set from presets.ini")
    p.add_argument("--g", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--natoms", type=int)
    p.add_argument("--drive-Y", dest="drive_y", type=float)
    p.add_argument("--omega0", type=float)
    p.add_argument("--phi0", type=float)
    p.add_argument("--X", dest="x", type=float, help="scaled intracavity amplitude")
    p.add_argument("--xi", type=float)
    p.add_argument("--C", dest="c", type=float)
    p.add_argument("--pair", help="ordered pair, e.g. nu*z, nu*z*, z*nu*, zz*, nu*nu*, nu*mu")
    p.add_argument("--tau-max", dest="tau_max", type=float)
    p.add_argument("--tau-steps", dest="tau_steps", type=int)
    p.add_argument("--detuning-max", dest="detuning_max", type=float)
    p.add_argument("--detuning-steps", dest="detuning_steps", type=int)
    p.add_argument("--Y-min", dest="y_min", type=float)
    p.add_argument("--Y-max", dest="y_max", type=float)
    p.add_argument("--Y-steps", dest="y_steps", type=int)
    p.add_argument("--fock-cutoff", dest="fock_cutoff", type=int)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--reduced", dest="mode", action="store_const", const="reduced")
    mode.add_argument("--full", dest="mode", action="store_const", const="full")
    p.add_argument("--ic", choices=["analytic", "lyapunov"],
                   help="covariance seed (default: analytic when reduced, lyapunov when full)")
    p.add_argument("--components", action="store_const", const=True)
    p.add_argument("--numeric-only", dest="numeric_only", action="store_const", const=True)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", help="output file (directory for 'figure'); default stdout / current directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="obfluct", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"obfluct {__version__}")
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("steady", parents=[common], help="roots of the state equation and mean fields")
    sub.add_parser("covariance", parents=[common], help="steady-state covariance matrix")
    sub.add_parser("correlate", parents=[common], help="two-time correlation: engine vs closed form")
    sub.add_parser("spectrum", parents=[common], help="transmission or squeezing spectrum")
    fig = sub.add_parser("figure", parents=[common], help="data bundle behind figure 1-4")
    fig.add_argument("n", type=int, choices=[1, 2, 3, 4])
    sub.add_parser("oracle", parents=[common], help="master-equation regime checks (JSON)")
    sub.add_parser("selftest", parents=[common], help="quick internal consistency checks")
    return parser


def _dispatch(cfg: RunConfig) -> int:
    if cfg.command == "figure":
        outdir = Path(cfg.out or ".")
        outdir.mkdir(parents=True, exist_ok=True)
        ext = "json" if cfg.values["format"] == "json" else "csv"
        for series, table in run_figure(cfg).items():
            emit(cfg, table, str(outdir / f"fig{cfg.figure}_{series}.{ext}"))
        return EXIT_OK
    if cfg.command == "oracle":
        report = run_oracle(cfg)
        header = dict(header_items(cfg, Table([], [])))
        text = json.dumps({"header": header, "report": report}, indent=1, sort_keys=True, default=float) + "\n"
        if cfg.out:
            Path(cfg.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if cfg.command == "selftest":
        results = run_selftest(cfg)
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC
    runner = {"steady": run_steady, "covariance": run_covariance,
              "correlate": run_correlate, "spectrum": run_spectrum}[cfg.command]
    emit(cfg, runner(cfg), cfg.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest" and not (args.preset or args.config):
        args.preset = "raizen"
    try:
        cfg = resolve_config(args)
        return _dispatch(cfg)
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, BistabilityError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
