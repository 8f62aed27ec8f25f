"""Command line interface.

Commands
    run            integrate one configuration, write series.csv + snapshots
    converge       dt ladder against the manufactured solution
    adapt-compare  moving-average vs legacy controller (and optional fixed dt)
    info           print the resolved configuration as JSON
    verify-series  validate a series.csv file

Configuration is TOML merged over built-in defaults; unknown sections or
keys are rejected by name.  `--set section.key=value` applies after the
file.  Exit codes: 0 success, 2 configuration, 3 numerical failure,
4 input/output.  Failures inside a run also leave error.txt in the output
directory.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import __version__
from .adaptive import AdaptiveParams
from .errors import ConfigError, SnapshotFormatError, VmpfcError
from .model import ModelParams, SchemeParams
from .records import (
    SERIES_COLUMNS,
    read_series_csv,
    write_field_snapshot,
    write_series_csv,
)
from .schemes import SCHEME_KINDS, manufactured_forcing
from .sim import (
    Crystallites,
    CrystallitePatch,
    FromFile,
    Manufactured,
    RandomPerturbation,
    adapt_compare,
    build_initial,
    convergence_study,
    run_adaptive,
    run_fixed,
)
from .spectral import Grid, set_fft_workers

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

DEFAULTS = {
    "run": {
        "scheme": "ssav",
        "horizon": 1.0,
        "record_every": 1,
        "snapshot_times": [],
        "mode": "fixed",
        "controller": "evma",
    },
    "grid": {"n": [64, 64], "lengths": [128.0, 128.0]},
    "model": {"alpha": 1.0, "beta": 1.0, "mobility": 1.0, "epsilon": 0.025, "h_vac": 0.0},
    "scheme": {"stab_s": 0.0, "sav_b": 1e4, "gpav_c0": 1e3, "esav_c": 1e8, "dt": 0.01},
    "adaptive": {
        "dt_min": 1e-4,
        "dt_max": 2.0,
        "dt_cr": 0.014,
        "s_cr": 100.0,
        "alpha1": 1e4,
        "w_size": 7,
        "ratio_max": 1.5,
        "monitored": "auto",
    },
    # [legacy] overlays [adaptive] for the adapt-compare legacy controller
    "legacy": {},
    "initial": {
        "kind": "random",
        "mean": 0.0,
        "amplitude": 0.01,
        "seed": 0,
        "wavenumber": 0.66,
        "patches": [],
        "path": "",
    },
    "forcing": {"kind": "none"},
    "converge": {"dts": [0.025, 0.0125, 0.00625], "bootstrap_only": False},
    "compare": {"dt_fixed": 0.0},
}

_KNOWN_KEYS = {sect: set(table) for sect, table in DEFAULTS.items()}
_KNOWN_KEYS["legacy"] = set(DEFAULTS["adaptive"])
_PATCH_KEYS = {"center", "half_width", "angle"}


# --- configuration ----------------------------------------------------------


def _merge_section(cfg: dict, sect: str, table) -> None:
    if sect not in cfg:
        raise ConfigError(f"unknown config section [{sect}]")
    if not isinstance(table, dict):
        raise ConfigError(f"[{sect}] must be a table of keys")
    for key, value in table.items():
        if key not in _KNOWN_KEYS[sect]:
            raise ConfigError(f"unknown config key {sect}.{key}")
        cfg[sect][key] = value


def apply_set(cfg: dict, assignment: str) -> None:
    """Apply one `section.key=value` override; value is parsed as TOML."""
    if "=" not in assignment:
        raise ConfigError(f"--set needs section.key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    key = key.strip()
    if key.count(".") != 1:
        raise ConfigError(f"--set key must be section.key, got {key!r}")
    sect, name = key.split(".")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    _merge_section(cfg, sect, {name: value})


def load_config(path: str | None, sets: list[str]) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
        for sect, table in data.items():
            _merge_section(cfg, sect, table)
    for assignment in sets:
        apply_set(cfg, assignment)
    return cfg


def _num(cfg: dict, sect: str, key: str) -> float:
    v = cfg[sect][key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{sect}.{key}: expected a number, got {v!r}")
    return float(v)


def _int(cfg: dict, sect: str, key: str) -> int:
    v = cfg[sect][key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{sect}.{key}: expected an integer, got {v!r}")
    return v


def _str(cfg: dict, sect: str, key: str, choices=None) -> str:
    v = cfg[sect][key]
    if not isinstance(v, str):
        raise ConfigError(f"{sect}.{key}: expected a string, got {v!r}")
    if choices is not None and v not in choices:
        raise ConfigError(f"{sect}.{key}: expected one of {sorted(choices)}, got {v!r}")
    return v


def _num_list(cfg: dict, sect: str, key: str) -> list[float]:
    v = cfg[sect][key]
    if not isinstance(v, list) or any(
        isinstance(x, bool) or not isinstance(x, (int, float)) for x in v
    ):
        raise ConfigError(f"{sect}.{key}: expected a list of numbers, got {v!r}")
    return [float(x) for x in v]


def build_grid(cfg: dict) -> Grid:
    n = cfg["grid"]["n"]
    lengths = _num_list(cfg, "grid", "lengths")
    if not isinstance(n, list) or any(isinstance(x, bool) or not isinstance(x, int) for x in n):
        raise ConfigError(f"grid.n: expected a list of integers, got {n!r}")
    if len(n) != len(lengths):
        raise ConfigError(f"grid.n and grid.lengths disagree: {len(n)} vs {len(lengths)} axes")
    return Grid(tuple(n), tuple(lengths))


def build_model(cfg: dict) -> ModelParams:
    return ModelParams(
        alpha=_num(cfg, "model", "alpha"),
        beta=_num(cfg, "model", "beta"),
        mobility=_num(cfg, "model", "mobility"),
        epsilon=_num(cfg, "model", "epsilon"),
        h_vac=_num(cfg, "model", "h_vac"),
    )


def build_scheme_params(cfg: dict) -> SchemeParams:
    return SchemeParams(
        stab_s=_num(cfg, "scheme", "stab_s"),
        sav_b=_num(cfg, "scheme", "sav_b"),
        gpav_c0=_num(cfg, "scheme", "gpav_c0"),
        esav_c=_num(cfg, "scheme", "esav_c"),
        dt=_num(cfg, "scheme", "dt"),
    )


def build_adaptive_params(cfg: dict, section: str = "adaptive") -> AdaptiveParams:
    merged = dict(cfg["adaptive"])
    if section == "legacy":
        merged.update(cfg["legacy"])
    view = {section: merged}
    return AdaptiveParams(
        dt_min=_num(view, section, "dt_min"),
        dt_max=_num(view, section, "dt_max"),
        dt_cr=_num(view, section, "dt_cr"),
        s_cr=_num(view, section, "s_cr"),
        alpha1=_num(view, section, "alpha1"),
        w_size=_int(view, section, "w_size"),
        ratio_max=_num(view, section, "ratio_max"),
        monitored=_str(view, section, "monitored", choices=("auto", "pseudo")),
    )


def build_initial_condition(cfg: dict):
    kind = _str(cfg, "initial", "kind",
                choices=("random", "crystallites", "manufactured", "file"))
    if kind == "random":
        return RandomPerturbation(
            mean=_num(cfg, "initial", "mean"),
            amplitude=_num(cfg, "initial", "amplitude"),
            seed=_int(cfg, "initial", "seed"),
        )
    if kind == "crystallites":
        patches = []
        raw = cfg["initial"]["patches"]
        if not isinstance(raw, list):
            raise ConfigError(f"initial.patches: expected a list of tables, got {raw!r}")
        for i, entry in enumerate(raw):
            if not isinstance(entry, dict) or set(entry) - _PATCH_KEYS:
                raise ConfigError(
                    f"initial.patches[{i}]: expected keys {sorted(_PATCH_KEYS)}, got {entry!r}"
                )
            try:
                center = tuple(float(c) for c in entry["center"])
                patches.append(CrystallitePatch(
                    center=center,
                    half_width=float(entry["half_width"]),
                    angle=float(entry.get("angle", 0.0)),
                ))
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError(f"initial.patches[{i}]: {e}") from None
        return Crystallites(
            mean=_num(cfg, "initial", "mean"),
            amplitude=_num(cfg, "initial", "amplitude"),
            wavenumber=_num(cfg, "initial", "wavenumber"),
            patches=tuple(patches),
        )
    if kind == "manufactured":
        return Manufactured()
    path = _str(cfg, "initial", "path")
    if not path:
        raise ConfigError("initial.path: required when initial.kind = 'file'")
    return FromFile(path)


def build_forcing(cfg: dict, p: ModelParams):
    kind = _str(cfg, "forcing", "kind", choices=("none", "manufactured"))
    return manufactured_forcing(p) if kind == "manufactured" else None


# --- output helpers ---------------------------------------------------------


def _write_snapshot_set(out: str, snapshots: dict, grid: Grid, scheme: str) -> list[str]:
    written = []
    for t_req in sorted(snapshots):
        t_act, phi = snapshots[t_req]
        base = os.path.join(out, f"phi_t{t_req:g}")
        write_field_snapshot(base, grid, phi, t=t_act, scheme=scheme)
        written.append(base)
    return written


def _fmt17(x: float) -> str:
    return f"{x:.17g}"


# --- commands ---------------------------------------------------------------


def prepare_run(cfg: dict) -> dict:
    """Validate and build everything a run needs; no stepping happens here."""
    prep = {
        "scheme": _str(cfg, "run", "scheme", choices=SCHEME_KINDS),
        "mode": _str(cfg, "run", "mode", choices=("fixed", "adaptive")),
        "horizon": _num(cfg, "run", "horizon"),
        "snapshot_times": _num_list(cfg, "run", "snapshot_times"),
        "record_every": _int(cfg, "run", "record_every"),
        "grid": build_grid(cfg),
        "p": build_model(cfg),
        "sp": build_scheme_params(cfg),
    }
    prep["forcing"] = build_forcing(cfg, prep["p"])
    prep["phi0"], prep["psi0"] = build_initial(build_initial_condition(cfg), prep["grid"])
    if prep["mode"] == "adaptive":
        if prep["snapshot_times"]:
            raise ConfigError("run.snapshot_times: only fixed-step runs take snapshots")
        prep["ap"] = build_adaptive_params(cfg)
        prep["controller"] = _str(cfg, "run", "controller", choices=("evma", "legacy"))
    return prep


def cmd_run(prep: dict, out: str) -> int:
    scheme, grid = prep["scheme"], prep["grid"]
    if prep["mode"] == "adaptive":
        res = run_adaptive(scheme, grid, prep["phi0"], prep["psi0"], prep["p"],
                           prep["sp"], prep["ap"], prep["horizon"],
                           forcing=prep["forcing"], controller=prep["controller"])
        snapshots = {}
    else:
        res = run_fixed(scheme, grid, prep["phi0"], prep["psi0"], prep["p"],
                        prep["sp"], prep["horizon"], forcing=prep["forcing"],
                        record_every=prep["record_every"],
                        snapshot_times=tuple(prep["snapshot_times"]))
        snapshots = res.snapshots

    write_series_csv(os.path.join(out, "series.csv"), res.records)
    _write_snapshot_set(out, snapshots, grid, scheme)
    write_field_snapshot(os.path.join(out, "phi_final"), grid, res.state.phi,
                         t=res.state.t, scheme=scheme)
    print(f"wrote {out}/series.csv: {len(res.records)} records, "
          f"{res.step_count} steps, final t = {res.state.t:g}")
    return EXIT_OK


def prepare_converge(cfg: dict) -> dict:
    bootstrap_only = cfg["converge"]["bootstrap_only"]
    if not isinstance(bootstrap_only, bool):
        raise ConfigError(
            f"converge.bootstrap_only: expected a boolean, got {bootstrap_only!r}"
        )
    return {
        "scheme": _str(cfg, "run", "scheme", choices=SCHEME_KINDS),
        "horizon": _num(cfg, "run", "horizon"),
        "dts": _num_list(cfg, "converge", "dts"),
        "bootstrap_only": bootstrap_only,
        "grid": build_grid(cfg),
        "p": build_model(cfg),
        "sp": build_scheme_params(cfg),
    }


def cmd_converge(prep: dict, out: str) -> int:
    res = convergence_study(prep["scheme"], prep["grid"], prep["p"], prep["sp"],
                            tuple(prep["dts"]), prep["horizon"],
                            bootstrap_only=prep["bootstrap_only"])
    path = os.path.join(out, "convergence.csv")
    with open(path, "w") as fh:
        fh.write("dt,error,rate\n")
        for row in res.rows:
            fh.write(f"{_fmt17(row.dt)},{_fmt17(row.error)},{_fmt17(row.rate)}\n")
    print(f"wrote {path}")
    print(f"fitted_rate = {res.fitted_rate:.6g}")
    return EXIT_OK


def prepare_adapt_compare(cfg: dict) -> dict:
    prep = {
        "scheme": _str(cfg, "run", "scheme", choices=SCHEME_KINDS),
        "horizon": _num(cfg, "run", "horizon"),
        "grid": build_grid(cfg),
        "p": build_model(cfg),
        "sp": build_scheme_params(cfg),
        "ap_evma": build_adaptive_params(cfg, "adaptive"),
        "ap_legacy": build_adaptive_params(cfg, "legacy"),
        "dt_fixed": _num(cfg, "compare", "dt_fixed"),
    }
    prep["forcing"] = build_forcing(cfg, prep["p"])
    prep["phi0"], prep["psi0"] = build_initial(build_initial_condition(cfg), prep["grid"])
    return prep


def cmd_adapt_compare(prep: dict, out: str) -> int:
    dt_fixed = prep["dt_fixed"]
    res = adapt_compare(prep["scheme"], prep["grid"], prep["phi0"], prep["psi0"],
                        prep["p"], prep["sp"], prep["ap_evma"], prep["ap_legacy"],
                        prep["horizon"],
                        dt_fixed=dt_fixed if dt_fixed > 0 else None,
                        forcing=prep["forcing"])
    summary = {}
    for label, r in (("evma", res.evma), ("legacy", res.legacy), ("fixed", res.fixed)):
        if r is None:
            continue
        write_series_csv(os.path.join(out, f"series_{label}.csv"), r.records)
        summary[label] = {
            "steps": r.step_count,
            "wall_time": r.wall_time,
            "final_t": r.state.t,
            "final_e_pseudo": r.records[-1].e_pseudo,
        }
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    counts = ", ".join(f"{k}: {v['steps']} steps" for k, v in summary.items())
    print(f"wrote {out}/summary.json ({counts})")
    return EXIT_OK


def cmd_info(cfg: dict) -> int:
    # building validates; info reports what a run would use
    grid = build_grid(cfg)
    build_model(cfg)
    build_scheme_params(cfg)
    build_adaptive_params(cfg)
    build_initial_condition(cfg)
    doc = {"version": __version__, "resolved": cfg,
           "grid_spacing": list(grid.spacing)}
    print(json.dumps(doc, indent=1))
    return EXIT_OK


def cmd_verify_series(path: str, monotone: str | None, slack: float, mass_tol: float) -> int:
    records = read_series_csv(path)
    if not records:
        print(f"{path}: no records")
        return EXIT_NUMERICAL
    for i, (a, b) in enumerate(zip(records, records[1:]), start=1):
        if not b.t > a.t:
            print(f"{path}: t not strictly increasing at row {i + 1} ({b.t} <= {a.t})")
            return EXIT_NUMERICAL
    for i, r in enumerate(records):
        for col in SERIES_COLUMNS:
            v = getattr(r, col)
            if col == "e_discrete":
                continue  # nan when the scheme has no discrete CN energy
            if not math.isfinite(v):
                print(f"{path}: non-finite {col} at row {i + 1}")
                return EXIT_NUMERICAL
    mass0 = records[0].mass
    worst = max(abs(r.mass - mass0) for r in records)
    if worst > mass_tol * max(1.0, abs(mass0)):
        print(f"{path}: mass drifts by {worst:g} (tol {mass_tol:g} relative)")
        return EXIT_NUMERICAL
    if monotone is not None:
        vals = [getattr(r, monotone) for r in records]
        if any(math.isnan(v) for v in vals):
            print(f"{path}: column {monotone} contains nan")
            return EXIT_NUMERICAL
        for i, (a, b) in enumerate(zip(vals, vals[1:]), start=1):
            if b > a + slack * max(1.0, abs(a)):
                print(f"{path}: {monotone} rises at row {i + 1} "
                      f"(t = {records[i].t:g}: {a!r} -> {b!r})")
                return EXIT_NUMERICAL
    print(f"ok: {len(records)} records, t in [{records[0].t:g}, {records[-1].t:g}]")
    return EXIT_OK


# --- entry point ------------------------------------------------------------


def _add_config_args(sp_parser, with_out: bool):
    sp_parser.add_argument("--config", help="TOML configuration file")
    sp_parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                           help="override one config key (section.key=value)")
    sp_parser.add_argument("--threads", type=int, help="FFT worker threads")
    if with_out:
        sp_parser.add_argument("--out", required=True, help="output directory")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmpfc",
        description="Pseudospectral solver for a phase field crystal model "
                    "with inertia and a vacancy potential.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "converge", "adapt-compare"):
        _add_config_args(sub.add_parser(name), with_out=True)
    _add_config_args(sub.add_parser("info"), with_out=False)
    vp = sub.add_parser("verify-series")
    vp.add_argument("path", help="series.csv to validate")
    vp.add_argument("--monotone", choices=[c for c in SERIES_COLUMNS if c not in ("t", "dt")],
                    help="additionally require this column to be nonincreasing")
    vp.add_argument("--slack", type=float, default=1e-9,
                    help="relative slack for the monotone check")
    vp.add_argument("--mass-tol", type=float, default=1e-10,
                    help="relative tolerance for mass drift")
    return parser


def _resolve_threads(args) -> None:
    threads = args.threads
    if threads is None:
        env = os.environ.get("VMPFC_THREADS")
        if env is not None:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"VMPFC_THREADS: expected an integer, got {env!r}") from None
    if threads is not None:
        if threads < 1:
            raise ConfigError(f"threads must be >= 1, got {threads}")
        set_fft_workers(threads)


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)

    if args.command == "verify-series":
        try:
            return cmd_verify_series(args.path, args.monotone, args.slack, args.mass_tol)
        except (SnapshotFormatError, OSError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO

    preparers = {"run": prepare_run, "converge": prepare_converge,
                 "adapt-compare": prepare_adapt_compare}
    runners = {"run": cmd_run, "converge": cmd_converge,
               "adapt-compare": cmd_adapt_compare}

    # configuration stage: builds and validates everything before stepping
    try:
        _resolve_threads(args)
        cfg = load_config(args.config, args.set)
        if args.command == "info":
            return cmd_info(cfg)
        prep = preparers[args.command](cfg)
        out = args.out
        os.makedirs(out, exist_ok=True)
    except (SnapshotFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except VmpfcError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    # run stage: failures while stepping are numerical, writing is I/O
    try:
        return runners[args.command](prep, out)
    except (SnapshotFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except VmpfcError as e:
        message = f"{type(e).__name__}: {e}"
        print(f"numerical error: {message}", file=sys.stderr)
        try:
            with open(os.path.join(out, "error.txt"), "w") as fh:
                fh.write(message + "\n")
        except OSError:
            pass
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
