"""``holderlab`` command line front end.

Settings come from three layers: built-in defaults, an optional ``--config``
file of ``key = value`` lines (``#`` starts a comment), and command-line
flags, later layers winning. Every file key must be known to the command.

Artifacts are written into the ``--output`` directory under fixed names. They
contain no timestamps; run metadata goes to the sidecar ``holderlab_run.log``.

Exit codes: 0 success, 1 inequality failure or inconclusive experiment,
2 configuration error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ._numerics import resolve_threads
from .errors import ConfigError, HolderlabError, InvalidArgumentError
from .io import rows_to_csv, to_json

SIDE_LOG = "holderlab_run.log"


# --- value parsers ---------------------------------------------------------------


def _int(s: str) -> int:
    return int(s)


def _float(s: str) -> float:
    return float(s)


def _floats(s: str) -> tuple[float, ...]:
    out = tuple(float(x) for x in s.replace(" ", "").split(",") if x)
    if not out:
        raise ValueError("empty list")
    return out


def _ints(s: str) -> tuple[int, ...]:
    out = tuple(int(x) for x in s.replace(" ", "").split(",") if x)
    if not out:
        raise ValueError("empty list")
    return out


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], object]
    default: str
    help: str = ""


GLOBAL_KEYS = {
    "seed": Key(_int, "0", "master seed"),
    "threads": Key(_int, "0", "worker threads; 0 = HOLDERLAB_THREADS or CPU count"),
    "output": Key(str, ".", "output directory"),
    "format": Key(_choice("csv", "json"), "csv", "artifact format"),
}

COMMAND_KEYS: dict[str, dict[str, Key]] = {
    "inequalities": {
        "trials": Key(_int, "1000", "random inputs"),
        "oversample": Key(_int, "2", "refinement of each random path"),
        "min_points": Key(_int, "3"),
        "max_points": Key(_int, "33"),
    },
    "brownian": {
        "alphas": Key(_floats, "0,0.25", "Hölder exponents in [0, 1/2]"),
        "ps": Key(_floats, "2", "moment orders"),
        "Ns": Key(_ints, "4,16,64", "interpolation resolutions"),
        "samples": Key(_int, "10000"),
        "oversample": Key(_int, "8", "Brownian sampling points per interval"),
        "T": Key(_float, "1.0"),
    },
    "euler": {
        "problem": Key(_choice("brownian", "gbm"), "brownian"),
        "Ns": Key(_ints, "8,16,32,64,128"),
        "p": Key(_float, "2"),
        "alpha": Key(_float, "0"),
        "samples": Key(_int, "4000"),
        "N_ref": Key(_int, "0", "reference resolution; 0 = 8 max(Ns)"),
        "mu": Key(_float, "0.5", "GBM drift"),
        "sigma": Key(_float, "0.2", "GBM volatility"),
        "x0": Key(_float, "1.0", "GBM initial value"),
        "T": Key(_float, "1.0"),
    },
    "galerkin": {
        "Ns": Key(_ints, "4,8,16,32"),
        "N_ref": Key(_int, "256"),
        "p": Key(_float, "2"),
        "delta": Key(_float, "0"),
        "samples": Key(_int, "4000"),
        "time_steps": Key(_int, "0", "0 = 4 for linear, 1024 otherwise"),
        "lambda_family": Key(_choice("laplacian", "linear"), "laplacian"),
        "s": Key(_float, "0.6", "noise decay b_n = n^-s"),
        "theta_target": Key(_float, "0.45"),
        "iota": Key(_float, "2"),
        "kappa": Key(_float, "0", "nonlinearity strength; 0 = linear"),
        "alpha_F": Key(_float, "0.25"),
        "chi": Key(_float, "0.45"),
    },
    "mlmc": {
        "levels": Key(_ints, "2,3,4,5,6,7", "values of L"),
        "repetitions": Key(_int, "50"),
        "p": Key(_float, "2"),
        "gamma": Key(_float, "0", "Hölder exponent of the error norm"),
        "alpha": Key(_float, "0.1", "declared Hölder exponent of the paths"),
        "rho": Key(_float, "0.4", "declared strong rate"),
        "functional": Key(_choice("identity", "saturating"), "identity"),
        "problem": Key(_choice("brownian", "gbm"), "brownian"),
        "N0": Key(_int, "1"),
        "M_ref": Key(_int, "65536"),
    },
    "special": {
        "fn": Key(_choice("gamma", "script-e", "f-alpha", "gauss-moment"), "gamma"),
        "x": Key(_float, "1.0", "argument"),
        "r": Key(_float, "1.0", "script-e order"),
    },
}

COMMAND_FORMAT_DEFAULT = {"inequalities": "json"}


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    threads: int = 0
    output_path: str = "."
    format: str = "csv"
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]


# --- parsing ----------------------------------------------------------------------


def read_config_file(path: str | Path, known: dict[str, Key]) -> dict[str, tuple[str, str]]:
    """``{key: (raw value, location)}`` from a ``key = value`` file."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{path}:{lineno}: {raw.strip()}"
        if "=" not in line:
            raise ConfigError(f"malformed line (expected key = value) at {where}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown key {key!r} at {where}")
        out[key] = (value, where)
    return out


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for name, key in GLOBAL_KEYS.items():
        common.add_argument(f"--{name}", default=argparse.SUPPRESS, help=key.help)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key = value settings file")
    parser = argparse.ArgumentParser(prog="holderlab", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, keys in COMMAND_KEYS.items():
        p = sub.add_parser(cmd, parents=[common])
        for name, key in keys.items():
            flag = "--" + name.replace("_", "-")
            dests = {flag}
            if "_" in name:
                dests.add("--" + name)
            p.add_argument(*sorted(dests), dest=name, default=argparse.SUPPRESS, help=f"{key.help} (default {key.default})".strip())
    return parser


def parse_config(argv: list[str] | None = None) -> RunConfig:
    args = vars(_build_parser().parse_args(argv))
    command = args.pop("command")
    known = {**GLOBAL_KEYS, **COMMAND_KEYS[command]}
    raw = {k: (v.default, f"default of {k}") for k, v in known.items()}
    if command in COMMAND_FORMAT_DEFAULT:
        raw["format"] = (COMMAND_FORMAT_DEFAULT[command], "default of format")
    config_file = args.pop("config", None)
    if config_file is not None:
        raw.update(read_config_file(config_file, known))
    for k, v in args.items():
        raw[k] = (v, f"flag --{k}")
    values = {}
    for k, (text, where) in raw.items():
        try:
            values[k] = known[k].parse(text)
        except ValueError as exc:
            raise ConfigError(f"invalid value {text!r} for key {k!r} ({where}): {exc}") from exc
    cfg = RunConfig(
        command=command,
        seed=values.pop("seed"),
        threads=values.pop("threads"),
        output_path=values.pop("output"),
        format=values.pop("format"),
        params=values,
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    p = cfg.params

    def need(cond: bool, msg: str):
        if not cond:
            raise ConfigError(msg)

    need(cfg.threads >= 0, "threads must be nonnegative")
    need(0 <= cfg.seed < 2**64, "seed must be a 64-bit unsigned integer")
    if cfg.command == "inequalities":
        need(p["trials"] >= 1, "trials must be at least 1")
        need(p["oversample"] >= 1, "oversample must be at least 1")
    elif cfg.command == "brownian":
        need(all(0 <= a <= 0.5 for a in p["alphas"]), "alphas must lie in [0, 1/2]")
        need(all(q >= 1 for q in p["ps"]), "ps must be at least 1")
        need(p["samples"] >= 2, "samples must be at least 2")
        need(p["oversample"] >= 1 and min(p["Ns"]) >= 1, "oversample and Ns must be positive")
    elif cfg.command == "euler":
        need(p["samples"] >= 2, "samples must be at least 2")
        need(0 <= p["alpha"] <= 1 and p["p"] >= 1, "need alpha in [0, 1] and p >= 1")
    elif cfg.command == "galerkin":
        need(p["samples"] >= 2, "samples must be at least 2")
        need(p["N_ref"] >= 4 * max(p["Ns"]), "N_ref must be at least 4 * max(Ns)")
    elif cfg.command == "mlmc":
        need(p["gamma"] < p["alpha"], f"gamma ({p['gamma']}) must be smaller than alpha ({p['alpha']})")
        need(p["repetitions"] >= 2, "repetitions must be at least 2")
        need(min(p["levels"]) >= 0, "levels must be nonnegative")
    elif cfg.command == "special":
        pass


# --- commands ---------------------------------------------------------------------


@dataclass
class Outcome:
    artifacts: dict[str, tuple[tuple[str, ...] | None, object]]
    summary: str
    status: int = 0


def _run_inequalities(cfg: RunConfig, threads: int) -> Outcome:
    from .inequalities import SuiteConfig, run_inequality_suite, total_failures

    p = cfg.params
    suite = SuiteConfig(min_points=p["min_points"], max_points=p["max_points"], oversample=p["oversample"])
    report = run_inequality_suite(p["trials"], cfg.seed, suite, threads)
    fails = total_failures(report)
    rows = [dict(inequality=k, **v) for k, v in report.items()]
    cols = ("inequality", "trials", "failures", "worst_slack", "example_seed_of_worst")
    obj = report if cfg.format == "json" else rows
    checks = sum(v["trials"] for v in report.values())
    return Outcome(
        {"inequalities": (cols, obj)},
        f"inequalities: {checks - fails}/{checks} checks passed, {fails} failures",
        1 if fails else 0,
    )


def _run_brownian(cfg: RunConfig, threads: int) -> Outcome:
    from .schemes import BROWNIAN_COLUMNS, brownian_exact_experiment

    p = cfg.params
    rows = brownian_exact_experiment(p["alphas"], p["ps"], p["Ns"], p["samples"], p["oversample"], p["T"], cfg.seed, threads)
    worst = max(
        abs(r["mc_estimate"] - r["exact"]) / (3 * r["mc_stderr"] + 0.02 * r["exact"])
        for r in rows
        if r["exact"] is not None and r["exact"] > 0
    )
    return Outcome({"brownian_exact": (BROWNIAN_COLUMNS, rows)}, f"brownian: {len(rows)} rows, worst |MC - exact| / margin = {worst:.3f}")


def _run_euler(cfg: RunConfig, threads: int) -> Outcome:
    from .schemes import EULER_COLUMNS, brownian_motion, euler_rate_experiment, geometric_brownian_motion

    p = cfg.params
    if p["problem"] == "gbm":
        problem = geometric_brownian_motion(p["mu"], p["sigma"], p["x0"], p["T"])
    else:
        problem = brownian_motion(p["T"])
    rows, fit = euler_rate_experiment(problem, p["Ns"], p["p"], p["alpha"], p["samples"], cfg.seed, p["N_ref"] or None, threads)
    return Outcome({"euler_rate": (EULER_COLUMNS, rows)}, f"euler: fitted slope {fit.slope:.4f} (R^2 {fit.r_squared:.4f})")


def _run_galerkin(cfg: RunConfig, threads: int) -> Outcome:
    from .galerkin import GALERKIN_COLUMNS, SpectralSeeProblem, galerkin_rate_experiment

    p = cfg.params
    try:
        problem = SpectralSeeProblem(
            lambda_family=p["lambda_family"],
            s=p["s"],
            kappa=p["kappa"],
            alpha_F=p["alpha_F"],
            chi=p["chi"],
            theta_target=p["theta_target"],
            iota=p["iota"],
        )
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    rows, fit = galerkin_rate_experiment(
        problem, p["Ns"], p["N_ref"], p["p"], p["delta"], p["samples"], p["time_steps"] or None, cfg.seed, threads
    )
    return Outcome({"galerkin_rate": (GALERKIN_COLUMNS, rows)}, f"galerkin: fitted slope {fit.slope:.4f} (R^2 {fit.r_squared:.4f})")


def _run_mlmc(cfg: RunConfig, threads: int) -> Outcome:
    from .mlmc import FUNCTIONALS, MLMC_COLUMNS, MLMC_LEVEL_COLUMNS, mlmc_convergence_experiment
    from .schemes import brownian_motion, geometric_brownian_motion

    p = cfg.params
    problem = geometric_brownian_motion() if p["problem"] == "gbm" else brownian_motion()
    g = FUNCTIONALS[p["functional"]](p["gamma"])
    res = mlmc_convergence_experiment(
        problem, g, p["levels"], p["p"], p["gamma"], p["repetitions"], cfg.seed, p["alpha"], p["N0"], p["M_ref"], threads
    )
    L = max(p["levels"])
    mlmc_err = next(r["error"] for r in res.rows if r["L"] == L)
    plain_err = res.plain_mc[L][0]
    summary = (
        f"mlmc: fitted log2 slope {res.fit.slope:.4f} (declared rho {p['rho']}); "
        f"L={L}: MLMC {mlmc_err:.4g} vs plain MC {plain_err:.4g} at equal cost"
        + ("; INCONCLUSIVE: reference error too large" if res.inconclusive else "")
    )
    return Outcome(
        {"mlmc_conv": (MLMC_COLUMNS, res.rows), "mlmc_levels": (MLMC_LEVEL_COLUMNS, res.level_rows)},
        summary,
        1 if res.inconclusive else 0,
    )


def _run_special(cfg: RunConfig, threads: int) -> Outcome:
    from . import special

    p = cfg.params
    fn, x, r = p["fn"], p["x"], p["r"]
    try:
        if fn == "gamma":
            value = special.gamma(x)
        elif fn == "script-e":
            value = special.script_e(r, x)
        elif fn == "f-alpha":
            value = special.brownian_ratio_f(x)
        else:
            value = special.gaussian_abs_moment(x)
    except (ValueError, ArithmeticError) as exc:
        raise ConfigError(f"{fn}({x!r}): {exc}") from exc
    row = dict(fn=fn, r=r if fn == "script-e" else None, x=x, value=value)
    return Outcome({"special": (("fn", "r", "x", "value"), [row])}, f"{fn}: {value!r}")


RUNNERS = {
    "inequalities": _run_inequalities,
    "brownian": _run_brownian,
    "euler": _run_euler,
    "galerkin": _run_galerkin,
    "mlmc": _run_mlmc,
    "special": _run_special,
}


def _write(out_dir: Path, name: str, fmt: str, columns, obj) -> Path:
    if fmt == "json":
        path = out_dir / f"{name}.json"
        path.write_text(to_json(obj))
    else:
        path = out_dir / f"{name}.csv"
        path.write_text(rows_to_csv(columns, obj))
    return path


def run(cfg: RunConfig) -> int:
    threads = resolve_threads(cfg.threads)
    outcome = RUNNERS[cfg.command](cfg, threads)
    out_dir = Path(cfg.output_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [_write(out_dir, name, cfg.format, cols, obj) for name, (cols, obj) in outcome.artifacts.items()]
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    with open(out_dir / SIDE_LOG, "a") as log:
        log.write(
            f"{stamp} command={cfg.command} seed={cfg.seed} threads={threads} "
            f"params={cfg.params!r} files={[p.name for p in written]} status={outcome.status}\n"
        )
    print(outcome.summary)
    return outcome.status


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except ConfigError as exc:
        print(f"holderlab: configuration error: {exc}", file=sys.stderr)
        return 2
    except HolderlabError as exc:
        print(f"holderlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
