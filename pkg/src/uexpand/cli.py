"""Command-line front end: ``uexpand {verify,bounds,lyapunov,equidist,orbit,sweep}``.

Options may also come from a flat ``key = value`` file given with ``--config``;
command-line flags win over the file.  ``UE_THREADS`` sets the default thread count.
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import json
import logging
import os
import sys

import numpy as np

from . import lab, verifier
from .errors import ConfigError, UEError
from .lab import sample_rng
from .systems import CharacterVarietySystem, StandardMapSystem, identity_system

log = logging.getLogger("uexpand")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _floats(text):
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    return [float(p) for p in parts]


def _flag(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# name -> (type, default, help)
SYSTEM_OPTS = {
    "system": (str, "cv", "std | cv | identity"),
    "s": (float, 1.99, "shell parameter"),
    "L": (float, 1000.0, "standard-map amplitude"),
    "epsilon": (float, 0.035, "offset spacing"),
    "omega_r": (int, 12, "offsets k*epsilon for |k| <= omega_r"),
    "delta": (float, 0.5, "range exponent used in the epsilon warning"),
}
COMMON_OPTS = {
    "threads": (int, None, "worker threads (default $UE_THREADS or 1)"),
    "seed": (int, 0, "random seed"),
    "output": (str, "-", "JSON output path ('-' for stdout)"),
    "log_level": (str, "WARNING", "logging level"),
}
GRID_OPTS = {
    "C": (float, 0.25, "threshold"),
    "N": (int, 1, "word length"),
    "r": (float, 0.01, "chart grid pitch"),
    "rho": (float, 0.01, "direction grid pitch"),
    "cm": (float, None, "chart derivative bound (omit with ctheta to estimate)"),
    "ctheta": (float, None, "angular derivative bound"),
    "probe_r": (float, 0.05, "probe grid pitch for estimated bounds"),
    "probe_rho": (float, 0.05, "probe direction pitch for estimated bounds"),
    "safety_factor": (float, 2.0, "multiplier on sampled derivative maxima"),
    "error_budget": (float, 1e-6, "margin subtracted for evaluation error"),
    "chunk_points": (int, 1024, "base points per work unit"),
    "checkpoint": (str, None, "resume file for finished chunks"),
    "csv": (str, None, "dump every grid pair to this CSV"),
    "no_timing": (_flag, False, "write elapsed_seconds as null"),
}
START_OPTS = {
    "start": (str, "random", "comma-separated coordinates or 'random'"),
}
COMMANDS = {
    "verify": dict(**GRID_OPTS),
    "bounds": {k: GRID_OPTS[k] for k in ("probe_r", "probe_rho", "safety_factor")},
    "lyapunov": dict(**START_OPTS, theta=(float, 0.0, "initial direction"),
                     steps=(int, 100_000, "steps per sample"), samples=(int, 10, "number of samples"),
                     trajectory=(str, None, "CSV path for sample 0")),
    "equidist": dict(**START_OPTS, steps=(int, 1_000_000, "trajectory length"),
                     observables=(str, None, "comma-separated observable names")),
    "orbit": dict(**START_OPTS, max_points=(int, 10_000, "give up past this many points"),
                  match_tol=(float, 1e-8, "identification tolerance")),
    "sweep": dict(**GRID_OPTS, param=(str, "s", "system parameter to vary"),
                  values=(str, None, "comma-separated values"),
                  range=(str, None, "start:stop:step (stop inclusive)")),
}


def _options(command):
    out = dict(SYSTEM_OPTS)
    out.update(COMMON_OPTS)
    out.update(COMMANDS[command])
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="uexpand", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=argparse.SUPPRESS, help="flat key=value file")
        for name, (typ, default, help_) in _options(cmd).items():
            flag = "--" + name.replace("_", "-")
            if typ is _flag:
                p.add_argument(flag, action="store_const", const=True, default=argparse.SUPPRESS, help=help_)
            else:
                p.add_argument(flag, type=typ, default=argparse.SUPPRESS, help=help_)
    return parser


def read_config_file(path):
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    with open(path) as fh:
        cp.read_string("[run]\n" + fh.read())
    return {k.strip().replace("-", "_"): v.strip() for k, v in cp["run"].items()}


def resolve(command, ns):
    """Merge defaults, config file and flags into one validated dict."""
    opts = _options(command)
    values = {name: spec[1] for name, spec in opts.items()}
    given = vars(ns)
    if "config" in given:
        try:
            raw = read_config_file(given["config"])
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        unknown = sorted(set(raw) - set(opts) - {"command"})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if raw.get("command", command) != command:
            raise ConfigError(f"config is for command {raw['command']!r}, not {command!r}")
        for k, v in raw.items():
            if k == "command":
                continue
            try:
                values[k] = opts[k][0](v)
            except ValueError as exc:
                raise ConfigError(f"bad value for {k}: {v!r}") from exc
    for k, v in given.items():
        if k in opts:
            values[k] = v
    if values["threads"] is None:
        try:
            values["threads"] = int(os.environ.get("UE_THREADS", "1"))
        except ValueError as exc:
            raise ConfigError("UE_THREADS must be an integer") from exc
    if values["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    return values


def make_system(cfg, **override):
    c = {**cfg, **override}
    name = c["system"]
    if name == "cv":
        return CharacterVarietySystem(c["s"])
    if name == "std":
        return StandardMapSystem(c["L"], c["epsilon"], c["omega_r"], c["delta"])
    if name == "identity":
        return identity_system()
    raise ConfigError(f"unknown system {name!r}")


def make_start(system, cfg):
    if cfg["start"] == "random":
        rng = sample_rng(cfg["seed"], 10**6)
        if system.kind == "shell":
            return system.random_points(1, rng)[0]
        return rng.uniform(0.0, 2 * np.pi, size=2)
    try:
        p = np.array(_floats(cfg["start"]))
    except ValueError as exc:
        raise ConfigError(f"bad start {cfg['start']!r}") from exc
    if len(p) != system.dim:
        raise ConfigError(f"start needs {system.dim} coordinates")
    if system.kind == "shell":
        from .systems.charvar import TracePoint
        TracePoint(*p, s=system.s)  # validates surface membership
    return p


@contextlib.contextmanager
def _sink(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit(cfg, doc):
    text = doc if isinstance(doc, str) else json.dumps(doc, indent=2, sort_keys=True) + "\n"
    with _sink(cfg["output"]) as fh:
        fh.write(text)


def _bounds(system, cfg):
    if cfg["cm"] is not None and cfg["ctheta"] is not None:
        return verifier.DerivativeBounds(cfg["cm"], cfg["ctheta"], provenance="configured")
    if (cfg["cm"] is None) != (cfg["ctheta"] is None):
        raise ConfigError("give both cm and ctheta, or neither to estimate them")
    return verifier.estimate_derivative_bounds(
        system, verifier.GridSpec(cfg["probe_r"], cfg["probe_rho"]), cfg["safety_factor"])


def _verify_one(system, cfg):
    config = verifier.UEConfig(cfg["C"], cfg["N"], cfg["safety_factor"], cfg["error_budget"])
    spec = verifier.GridSpec(cfg["r"], cfg["rho"])
    bounds = _bounds(system, cfg)
    report = verifier.verify(system, config, spec, bounds, threads=cfg["threads"],
                             chunk_points=cfg["chunk_points"], checkpoint=cfg["checkpoint"])
    if cfg["no_timing"]:
        report.elapsed_seconds = None
    d = report.to_dict()
    d["raw_c_m"], d["raw_c_theta"] = bounds.raw_c_m, bounds.raw_c_theta
    return report, d


def cmd_verify(cfg):
    system = make_system(cfg)
    report, doc = _verify_one(system, cfg)
    if cfg["csv"]:
        with _sink(cfg["csv"]) as fh:
            verifier.sweep_report_csv(system, verifier.UEConfig(cfg["C"], cfg["N"]),
                                      verifier.GridSpec(cfg["r"], cfg["rho"]), fh, cfg["chunk_points"])
    _emit(cfg, doc)
    return EXIT_OK if report.verdict == verifier.CERTIFIED else EXIT_FAIL


def cmd_bounds(cfg):
    system = make_system(cfg)
    b = verifier.estimate_derivative_bounds(
        system, verifier.GridSpec(cfg["probe_r"], cfg["probe_rho"]), cfg["safety_factor"])
    _emit(cfg, {"system": system.describe(), "probe_r": cfg["probe_r"], "probe_rho": cfg["probe_rho"],
                "safety_factor": cfg["safety_factor"], "c_m": b.c_m, "c_theta": b.c_theta,
                "raw_c_m": b.raw_c_m, "raw_c_theta": b.raw_c_theta})
    return EXIT_OK


def cmd_lyapunov(cfg):
    system = make_system(cfg)
    start = make_start(system, cfg)
    with contextlib.ExitStack() as stack:
        traj = stack.enter_context(_sink(cfg["trajectory"])) if cfg["trajectory"] else None
        est = lab.estimate_top_lyapunov(system, start, cfg["theta"], cfg["steps"], cfg["samples"],
                                        cfg["seed"], threads=cfg["threads"], trajectory_sink=traj)
    doc = json.loads(est.to_json())
    doc["start"] = [float(v) for v in start]
    doc["system"] = system.describe()
    _emit(cfg, doc)
    return EXIT_OK


def cmd_equidist(cfg):
    system = make_system(cfg)
    start = make_start(system, cfg)
    names = None if cfg["observables"] is None else [n.strip() for n in cfg["observables"].split(",") if n.strip()]
    try:
        obs = lab.named_observables(system, names)
    except UEError as exc:
        raise ConfigError(str(exc)) from exc
    rep = lab.birkhoff_equidistribution(system, start, obs, cfg["steps"], cfg["seed"])
    doc = json.loads(rep.to_json())
    doc["start"] = [float(v) for v in start]
    doc["system"] = system.describe()
    _emit(cfg, doc)
    return EXIT_OK


def cmd_orbit(cfg):
    system = make_system(cfg)
    start = make_start(system, cfg)
    if not cfg["match_tol"] > 0:
        raise ConfigError("match_tol must be positive")
    size = lab.detect_finite_orbit(system, start, cfg["max_points"], cfg["match_tol"])
    _emit(cfg, {"system": system.describe(), "start": [float(v) for v in start], "finite": size is not None,
                "orbit_size": size, "max_points": cfg["max_points"], "match_tol": cfg["match_tol"]})
    return EXIT_OK


SWEEP_PARAMS = {"s": float, "L": float, "epsilon": float, "omega_r": int}


def sweep_values(cfg):
    if cfg["values"] is not None and cfg["range"] is not None:
        raise ConfigError("give values or range, not both")
    if cfg["values"] is not None:
        vals = _floats(cfg["values"])
    elif cfg["range"] is not None:
        try:
            a, b, h = (float(v) for v in cfg["range"].split(":"))
        except ValueError as exc:
            raise ConfigError(f"range must be start:stop:step, got {cfg['range']!r}") from exc
        if h <= 0:
            raise ConfigError("range step must be positive")
        n = int(np.floor((b - a) / h + 1e-9)) + 1 if b >= a else 0
        vals = [a + i * h for i in range(n)]
    else:
        raise ConfigError("sweep needs values or range")
    if not vals:
        raise ConfigError("sweep range is empty")
    return vals


def cmd_sweep(cfg):
    if cfg["param"] not in SWEEP_PARAMS:
        raise ConfigError(f"cannot sweep {cfg['param']!r}; choose from {sorted(SWEEP_PARAMS)}")
    vals = sweep_values(cfg)
    cells, all_ok = [], True
    for v in vals:
        v = SWEEP_PARAMS[cfg["param"]](v)
        cell_cfg = {**cfg, cfg["param"]: v}
        report, doc = _verify_one(make_system(cell_cfg), cell_cfg)
        all_ok &= report.verdict == verifier.CERTIFIED
        cells.append({"param": cfg["param"], "value": v, "report": doc})
    _emit(cfg, {"cells": cells})
    return EXIT_OK if all_ok else EXIT_FAIL


HANDLERS = {
    "verify": cmd_verify,
    "bounds": cmd_bounds,
    "lyapunov": cmd_lyapunov,
    "equidist": cmd_equidist,
    "orbit": cmd_orbit,
    "sweep": cmd_sweep,
}


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)  # argparse exits 2 on malformed flags
    command = ns.command
    del ns.command
    try:
        cfg = resolve(command, ns)
        logging.basicConfig(level=getattr(logging, str(cfg["log_level"]).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return HANDLERS[command](cfg)
    except (UEError, OSError, ValueError) as exc:
        # bad parameters, start points and aborted evaluations all land here
        print(f"uexpand: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
