"""Command line front end.

Every command writes ``manifest.json`` (config echo, versions, wall time,
reported constants) and CSV data files into the output directory.  Exit
codes: 0 success, 1 configuration error, 2 numerical failure or a failed
acceptance check.

    nhtrap toy --rho power:1 --tol 1e-10
    nhtrap kerr-trapped --m 1 --a 0
    nhtrap verify --only torus
    nhtrap run config.toml
"""

import argparse
import csv
import io
import json
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

OUTPUT_ENV = "NHTRAP_OUTPUT_DIR"
DEFAULT_OUTPUT = "nhtrap-output"


# --------------------------------------------------------------------------
# parameter schemas: name -> (type, default, check, help)


def _positive(v):
    return v > 0


def _tolerance(v):
    return 1e-15 <= v <= 1e-2


def _spin(v):
    return v >= 0


def _choice(*options):
    def check(v):
        return v in options
    check.options = options
    return check


_MANIFOLD = {
    "eps": (float, None, _positive, "chart half width"),
    "tol": (float, None, _tolerance, "graph transform tolerance"),
    "t_start": (float, 100.0, _positive, "start of the t window"),
    "t_end": (float, 200.0, _positive, "end of the t window"),
    "n_base": (int, None, lambda v: 4 <= v <= 257, "base nodes per axis"),
    "budget": (int, 60, lambda v: 1 <= v <= 1000, "maximal number of graph transform steps"),
}

SCHEMAS = {
    "toy": {
        "rho": (str, "power:1", None, "weight, e.g. power:1, bracket:2, exp:0.5"),
        **_MANIFOLD,
        "eps": (float, 0.5, _positive, "chart half width"),
        "tol": (float, 1e-10, _tolerance, "graph transform tolerance"),
        "n_base": (int, 9, lambda v: 4 <= v <= 257, "base nodes"),
    },
    "torus": {
        "alpha": (float, 1.0, _positive, "decay exponent"),
        "amplitude": (float, 0.1, lambda v: 0 <= v <= 1, "perturbation amplitude"),
        "profile": (str, "constant", _choice("constant", "sin_x", "sin_x_cos_t"), "profile"),
        **_MANIFOLD,
        "eps": (float, 0.4, lambda v: 0 < v < 1.5, "chart half width"),
        "tol": (float, 1e-10, _tolerance, "graph transform tolerance"),
        "n": (int, 5, lambda v: 1 <= v <= 50, "flow time of the map"),
        "n_base": (int, 17, lambda v: 4 <= v <= 257, "base nodes"),
    },
    "kerr-trapped": {
        "m": (float, 1.0, _positive, "mass"),
        "a": (float, 0.0, _spin, "spin, 0 <= a < m"),
        "sigma": (float, 1.0, lambda v: v != 0, "frequency"),
        "xi_phi": (float, None, None, "angular momentum (non-equatorial mode)"),
        "theta": (float, float(np.pi / 2), lambda v: 0 < v < np.pi, "polar angle"),
        "equatorial": (bool, False, None, "solve the equatorial circular orbit"),
        "prograde": (bool, True, None, "prograde (or retrograde) equatorial orbit"),
        "tol": (float, 1e-12, _tolerance, "Newton tolerance"),
    },
    "kerr-rates": {
        "m": (float, 1.0, _positive, "mass"),
        "a": (float, 0.0, _spin, "spin, 0 <= a < m"),
        "xi": (str, "rho_squared", _choice("rho_squared", "unit"), "conformal factor"),
        "equatorial": (bool, None, None, "equatorial orbit (default: when a > 0)"),
        "prograde": (bool, True, None, "prograde (or retrograde) equatorial orbit"),
    },
    "kerr-manifold": {
        "m": (float, 1.0, _positive, "mass"),
        "a": (float, 0.5, _spin, "spin, 0 <= a < m"),
        "alpha": (float, 1.0, _positive, "decay exponent"),
        "amplitude": (float, 0.1, lambda v: 0 <= v <= 1, "perturbation amplitude"),
        "profile": (str, "sin_r", _choice("sin_r", "constant", "sin_r_cos_t"), "profile"),
        **_MANIFOLD,
        "eps": (float, 0.15, lambda v: 0 < v < 1, "chart half width"),
        "tol": (float, 1e-8, _tolerance, "graph transform tolerance"),
        "n": (int, 10, lambda v: 1 <= v <= 50, "flow time of the map"),
        "n_base": (int, 9, lambda v: 4 <= v <= 257, "base nodes"),
        "prograde": (bool, False, None, "prograde (or retrograde) photon orbit"),
    },
    "verify": {
        "only": (str, None, None, "comma separated ids or tags, e.g. torus or 1,3"),
    },
}

TOP_KEYS = {"command", "parameters", "output_dir", "seed"}


def validate(config):
    """Check a config dict and fill defaults; raises :class:`ConfigError`."""
    if not config:
        raise ConfigError("empty configuration")
    if not isinstance(config, dict):
        raise ConfigError("configuration must be a table")
    unknown = set(config) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    command = config.get("command")
    if command not in SCHEMAS:
        raise ConfigError(f"command must be one of {sorted(SCHEMAS)}, got {command!r}")
    seed = config.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    params = config.get("parameters") or {}
    if not isinstance(params, dict):
        raise ConfigError("parameters must be a table")
    schema = SCHEMAS[command]
    unknown = set(params) - set(schema)
    if unknown:
        raise ConfigError(f"unknown parameters for {command}: {sorted(unknown)}")
    out = {}
    for name, (kind, default, check, _) in schema.items():
        value = params.get(name, default)
        if value is not None:
            value = _coerce(name, kind, value)
            if check is not None and not check(value):
                allowed = getattr(check, "options", None)
                hint = f"; one of {list(allowed)}" if allowed else ""
                raise ConfigError(f"parameter {name}={value!r} out of range{hint}")
        out[name] = value
    if "t_end" in out and not out["t_end"] > out["t_start"]:
        raise ConfigError("t_end must exceed t_start")
    if "a" in out and not out["a"] < out["m"]:
        raise ConfigError("spin must satisfy 0 <= a < m")
    output_dir = config.get("output_dir", DEFAULT_OUTPUT)
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir must be a path")
    return {"command": command, "parameters": out, "output_dir": output_dir, "seed": seed}


def _coerce(name, kind, value):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"parameter {name} must be true or false")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"parameter {name} must be an integer")
        return int(value)
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"parameter {name} must be a number")
        if not np.isfinite(value):
            raise ConfigError(f"parameter {name} must be finite")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"parameter {name} must be a string")
    return value


def load_config(path):
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        if path.suffix == ".json":
            return json.loads(text)
        return tomllib.loads(text.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


# --------------------------------------------------------------------------
# commands; each returns (results, {file name: text}, exit code)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(float(obj))
    return obj


def _table(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                         for v in row])
    return buf.getvalue()


def _manifold_files(result, fit):
    files = {"section.csv": result.section.to_csv(),
             "section.json": result.section.to_json() + "\n"}
    if fit is not None:
        files["decay.csv"] = _table(["C", "alpha_fit"], [[fit.C, fit.alpha_fit]])
    return files


def _decay_fit(section):
    from .transform import fit_decay_rate
    from .errors import AllZero
    try:
        return fit_decay_rate(section)
    except AllZero:
        return None


def cmd_toy(p, seed):
    from .toy import toy_fixed_point, toy_map, toy_stationary_data
    from .transform import unstable_manifold
    from .weights import Weight

    try:
        weight = Weight.parse(p["rho"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = unstable_manifold(toy_map(weight), toy_stationary_data(), weight, p["eps"], p["tol"],
                               p["budget"], (p["t_start"], p["t_end"]), n_base=p["n_base"],
                               seed=seed)
    sec = result.section
    exact = toy_fixed_point(sec.valid_t, weight)
    results = result.summary()
    results["fixed_point_error"] = float(np.abs(sec.valid_values[..., 0] - exact[:, None]).max())
    fit = _decay_fit(sec)
    if fit is not None:
        results["decay_fit"] = {"C": fit.C, "alpha_fit": fit.alpha_fit}
    return results, _manifold_files(result, fit), 0


def cmd_torus(p, seed):
    from .torus import torus_unstable_manifold, torus_verify

    result = torus_unstable_manifold(p["alpha"], p["amplitude"], p["profile"], p["eps"], p["tol"],
                                     (p["t_start"], p["t_end"]), p["budget"], p["n"], p["n_base"],
                                     seed=seed)
    results = result.summary()
    results["hypotheses"] = torus_verify()
    fit = _decay_fit(result.section)
    if fit is not None:
        results["decay_fit"] = {"C": fit.C, "alpha_fit": fit.alpha_fit}
    return results, _manifold_files(result, fit), 0


def cmd_kerr_trapped(p, seed):
    from .kerr.flow import trapped_set_solve
    from .kerr.metric import KerrParams

    params = KerrParams(p["m"], p["a"])
    trapped = trapped_set_solve(params, p["sigma"], p["xi_phi"], p["equatorial"], p["prograde"],
                                p["theta"], tol=p["tol"])
    pt = trapped.point
    header = ["m", "a", "t", "r", "theta", "phi", "sigma", "xi_r", "xi_theta", "xi_phi",
              "residual_G", "residual_Hr", "residual_H2r", "iterations"]
    row = [params.m, params.a, *[float(v) for v in pt.as_array()], *trapped.residuals,
           trapped.iterations]
    return trapped.as_dict(), {"trapped.csv": _table(header, [row])}, 0


def cmd_kerr_rates(p, seed):
    from .kerr import flow as kerr_flow
    from .kerr.metric import KerrParams

    params = KerrParams(p["m"], p["a"])
    trapped = kerr_flow.default_trapped_point(params, p["equatorial"], p["prograde"])
    rates = kerr_flow.expansion_rates(params, trapped, p["xi"])
    results = {"trapped": trapped.as_dict(), "rates": rates.as_dict()}
    header = ["m", "a", "r", "w_u", "w_s", "nu_min", "ht_over_sigma", "Xi", "bracket",
              "bracket_flag"]
    row = [params.m, params.a, trapped.r, rates.w_u, rates.w_s, rates.nu_min,
           rates.ht_over_sigma, rates.conformal, rates.bracket, int(rates.bracket_flag)]
    return results, {"rates.csv": _table(header, [row])}, 0


def cmd_kerr_manifold(p, seed):
    from .kerr.manifold import kerr_stable_manifold
    from .kerr.metric import KerrParams
    from .kerr.perturbation import MetricPerturbation

    params = KerrParams(p["m"], p["a"])
    pert = MetricPerturbation.make(p["alpha"], p["amplitude"], p["profile"])
    result = kerr_stable_manifold(params, pert, p["eps"], p["tol"], p["budget"],
                                  (p["t_start"], p["t_end"]), p["n"], p["n_base"], p["prograde"],
                                  seed=seed)
    results = result.summary()
    fit = _decay_fit(result.section) if p["amplitude"] else None
    if fit is not None:
        results["decay_fit"] = {"C": fit.C, "alpha_fit": fit.alpha_fit}
    return results, _manifold_files(result, fit), 0


def cmd_verify(p, seed):
    from . import acceptance

    try:
        checks = acceptance.select(p["only"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"{'status':<7}{'id':<15}description")
    suite = acceptance.Suite(seed)
    results = []
    for check in checks:
        res = acceptance.run_check(check, suite)
        results.append(res)
        print(res.line(), flush=True)
    failed = [r.id for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""))
    rows = [[r.id, "pass" if r.passed else "fail", r.value, r.threshold, r.error or ""]
            for r in results]
    files = {"verify.csv": _table(["id", "status", "value", "threshold", "error"], rows)}
    summary = {"checks": [r.as_dict() for r in results], "failed": failed}
    return summary, files, 2 if failed else 0


COMMANDS = {"toy": cmd_toy, "torus": cmd_torus, "kerr-trapped": cmd_kerr_trapped,
            "kerr-rates": cmd_kerr_rates, "kerr-manifold": cmd_kerr_manifold,
            "verify": cmd_verify}


# --------------------------------------------------------------------------
# driver


def _versions():
    import scipy

    from . import __version__
    return {"nhtrap": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def output_directory(config):
    return Path(os.environ.get(OUTPUT_ENV) or config["output_dir"])


def run(config):
    """Run a validated config; writes the artifacts and returns the exit code."""
    out_dir = output_directory(config)
    start = time.perf_counter()
    manifest = {"config": config, "versions": _versions(),
                "started": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    files = {}
    try:
        results, files, code = COMMANDS[config["command"]](config["parameters"], config["seed"])
        manifest["results"] = results
        manifest["error"] = None
    except NumericalError as exc:
        code = 2
        manifest["results"] = None
        manifest["error"] = {"name": exc.code, "message": str(exc)}
        print(f"numerical failure: {exc.code}: {exc}", file=sys.stderr)
    manifest["exit_code"] = code
    manifest["wall_time"] = time.perf_counter() - start
    manifest["files"] = sorted(files)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text)
    (out_dir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n")
    return code


class _Parser(argparse.ArgumentParser):
    # bad flags are configuration errors: exit 1 rather than argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(
        prog="nhtrap", description="Invariant manifolds of trapped sets under decaying "
                                   "perturbations: data artifacts and checks.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    runner = sub.add_parser("run", help="run a TOML or JSON config file")
    runner.add_argument("config", help="config file (.toml or .json)")
    for name, schema in SCHEMAS.items():
        cmd = sub.add_parser(name, help=f"run the {name} pipeline")
        cmd.add_argument("--output-dir", default=None, help="output directory")
        cmd.add_argument("--seed", type=int, default=0, help="seed for random sampling")
        for key, (kind, default, _, text) in schema.items():
            flag = "--" + key.replace("_", "-")
            if kind is bool:
                cmd.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction,
                                 default=None, help=f"{text} (default {default})")
            else:
                cmd.add_argument(flag, dest=key, type=kind, default=None,
                                 help=f"{text} (default {default})")
    return parser


def config_from_args(args):
    if args.command == "run":
        return load_config(args.config)
    params = {k: v for k, v in vars(args).items()
              if k in SCHEMAS[args.command] and v is not None}
    config = {"command": args.command, "parameters": params, "seed": args.seed}
    if args.output_dir:
        config["output_dir"] = args.output_dir
    return config


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("nhtrap: error: no command given", file=sys.stderr)
        return 1
    try:
        config = validate(config_from_args(args))
        return run(config)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"nhtrap: configuration error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # invalid inputs caught inside the library, e.g. a window that starts too early
        print(f"nhtrap: configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
