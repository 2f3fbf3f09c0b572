"""``oscim`` command line: gen, run, experiment, validate.

Configuration precedence is preset < ``--config`` file < ``--set`` < flags.
Progress goes to stderr; result files go to ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

from .energy import amplitude_heterogeneity
from .errors import IntegrationDiverged, OscimError
from .experiment import PRESETS, ExperimentConfig, run_experiment
from .graph import IsingInstance, cut_value, generate_er_graph, generate_regular_graph, ising_energy
from .integrate import (
    IntegratorConfig,
    NoiseConfig,
    Schedule,
    integrate_trial,
    random_initial_state,
    readout,
    write_trace_csv,
)
from .model import MODELS, DopoParams, OscillatorParams, split_couplings
from .validate import run_suite

log = logging.getLogger("oscim")

EXIT_FAILURE = 1
EXIT_USAGE = 2

# run-command defaults; every one can come from --config / --set as well
RUN_DEFAULTS = dict(model=None, instance=None, kind="er", n=None, p=0.5, degree=3, seed=0,
                    dt=1e-3, tstop=10.0, noise=0.0, gamma=0.5, xi=1.0, k=1.0, ks=None,
                    mu=0.6, alpha=1.0, kappa=0.05, phi_p=0.0, p0=2.0, record_every=100)
# second-harmonic injection when --ks is not given: OIM needs it to binarize
DEFAULT_KS = {"oim": 1.0, "poim-phase": 0.0}


class UsageError(Exception):
    pass


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_sets(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.replace("-", "_")] = _parse_value(value)
    return out


def load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise UsageError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(defaults: dict, args, flag_names) -> dict:
    """Layer defaults, config file, ``--set`` pairs and explicit flags."""
    cfg = dict(defaults)
    cfg.update(load_config_file(args.config))
    cfg.update(parse_sets(args.set))
    for name in flag_names:
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = value
    return cfg


def _common(p, seed_help="seed"):
    p.add_argument("--seed", type=int, help=seed_help)
    p.add_argument("--config", metavar="FILE", help="JSON file of parameter values")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one parameter (repeatable)")
    p.add_argument("--out", metavar="DIR", help="output directory")


def _dynamics_flags(p):
    p.add_argument("--dt", type=float)
    p.add_argument("--tstop", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--gamma", type=float, help="normal/conjugate coupling split")
    p.add_argument("--xi", type=float, help="coupling gain of sl/ampphase")
    p.add_argument("--ks", type=float, help="second-harmonic injection strength")
    p.add_argument("--k", type=float, help="coupling gain of the phase models")


def build_parser() -> argparse.ArgumentParser:
    quiet = argparse.ArgumentParser(add_help=False)
    quiet.add_argument("-q", "--quiet", action="store_true", help="no progress on stderr")
    parser = argparse.ArgumentParser(prog="oscim", description=__doc__.splitlines()[0],
                                     parents=[quiet])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[quiet], help="generate a MaxCut instance file")
    g.add_argument("--kind", choices=("er", "regular"), default="er")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=float, default=0.5)
    g.add_argument("--degree", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", metavar="PATH", help="instance file (default: stdout)")

    r = sub.add_parser("run", parents=[quiet], help="integrate one trial")
    r.add_argument("--model", choices=MODELS)
    r.add_argument("--instance", metavar="FILE", help="instance JSON (else one is generated)")
    r.add_argument("--kind", choices=("er", "regular"))
    r.add_argument("--n", type=int)
    r.add_argument("--p", type=float)
    r.add_argument("--degree", type=int)
    r.add_argument("--p0", type=float, help="normalized DOPO pump")
    r.add_argument("--mu", type=float)
    r.add_argument("--alpha", type=float)
    r.add_argument("--kappa", type=float)
    _dynamics_flags(r)
    _common(r, "trial seed (initial state and noise)")

    e = sub.add_parser("experiment", parents=[quiet], help="run a named experiment preset")
    e.add_argument("preset", choices=PRESETS)
    e.add_argument("--sizes", type=int, nargs="+")
    e.add_argument("--n", type=int, help="single problem size (same as --sizes N)")
    e.add_argument("--instances", type=int, dest="instances_per_size")
    e.add_argument("--trials", type=int, dest="trials_per_instance")
    e.add_argument("--models", nargs="+", choices=MODELS)
    e.add_argument("--p", type=float)
    e.add_argument("--degree", type=int)
    _dynamics_flags(e)
    e.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    _common(e, "master seed")

    v = sub.add_parser("validate", parents=[quiet], help="run the fast identity suite")
    v.add_argument("--seed", type=int, default=0)
    return parser


# --- gen -------------------------------------------------------------------

def cmd_gen(args) -> int:
    try:
        if args.kind == "er":
            inst = generate_er_graph(args.n, args.p, args.seed)
        else:
            inst = generate_regular_graph(args.n, args.degree, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        inst.save(args.out)
        log.info("wrote %s (%d nodes, %d edges, hash %s)", args.out, inst.n, inst.num_edges,
                 inst.content_hash())
    else:
        sys.stdout.write(inst.to_json() + "\n")
    return 0


# --- run -------------------------------------------------------------------

RUN_FLAGS = ("model", "instance", "kind", "n", "p", "degree", "seed", "dt", "tstop", "noise",
             "gamma", "xi", "k", "ks", "mu", "alpha", "kappa", "p0")


def _run_instance(cfg):
    if cfg["instance"]:
        path = Path(cfg["instance"])
        if not path.exists():
            raise UsageError(f"instance file not found: {path}")
        return IsingInstance.load(path)
    if cfg["n"] is None:
        raise UsageError("run needs --instance FILE or --n to generate one")
    if cfg["kind"] == "regular":
        return generate_regular_graph(cfg["n"], cfg["degree"], cfg["seed"])
    return generate_er_graph(cfg["n"], cfg["p"], cfg["seed"])


def run_setup(cfg):
    """(instance or None, params, coupling, schedules, n) for one ``run``."""
    model = cfg["model"]
    if model == "dopo":
        if cfg["instance"]:
            raise UsageError("the dopo model is uncoupled; it takes --n, not --instance")
        n = 1 if cfg["n"] is None else cfg["n"]
        if n < 1:
            raise UsageError("--n must be >= 1")
        return None, DopoParams(p0=cfg["p0"]), None, None, n
    inst = _run_instance(cfg)
    n = inst.n
    ks = DEFAULT_KS.get(model, 0.0) if cfg["ks"] is None else cfg["ks"]
    if model in ("sl", "ampphase"):
        # a model parameter file works as --config: mu may be a per-node list
        params = OscillatorParams.from_dict(cfg, n)
        return inst, params, split_couplings(inst, cfg["gamma"], cfg["xi"]), None, n
    params = OscillatorParams.uniform(n, cfg["mu"], cfg["alpha"], ks)
    schedules = {"K": Schedule.constant(cfg["k"]), "Ks": Schedule.constant(ks)}
    if model == "oim":
        coupling = split_couplings(inst, 1.0, cfg["k"])
    else:
        coupling = split_couplings(inst, cfg["gamma"], cfg["k"])
    if model == "stationary":
        schedules = None
    return inst, params, coupling, schedules, n


def cmd_run(args) -> int:
    cfg = resolve(RUN_DEFAULTS, args, RUN_FLAGS)
    unknown = sorted(set(cfg) - set(RUN_DEFAULTS) - {"out"})
    if unknown:
        raise UsageError(f"unknown run parameters: {', '.join(unknown)}")
    if cfg["model"] not in MODELS:
        raise UsageError(f"run needs --model, one of {', '.join(MODELS)}")
    inst, params, coupling, schedules, n = run_setup(cfg)
    cfg["instance_hash"] = None if inst is None else inst.content_hash()
    seed = int(cfg["seed"])
    x0 = random_initial_state(cfg["model"], n, seed)
    icfg = IntegratorConfig(cfg["dt"], cfg["tstop"], record_every=int(cfg["record_every"]))
    log.info("run %s: n=%d seed=%d t_stop=%g", cfg["model"], n, seed, cfg["tstop"])
    start = time.perf_counter()
    trace = integrate_trial(cfg["model"], params, coupling, schedules,
                            NoiseConfig(cfg["noise"], seed), icfg, initial_state=x0)
    wall = time.perf_counter() - start

    spins = readout(trace)
    result = {"config": cfg, "model": cfg["model"], "seed": seed,
              "spins": [int(s) for s in spins], "final_t": trace.final_t,
              "final_energy": float(trace.energies[-1]), "wall_time": wall,
              "clamp_events": trace.clamp_events}
    if inst is not None:
        result["ising_energy"] = float(ising_energy(inst.weights, spins))
        result["cut"] = cut_value(inst, spins)
    if trace.tail_amplitude is not None:
        result["final_amplitudes"] = [float(a) for a in trace.tail_amplitude]
        if cfg["model"] != "dopo":
            result["ah"] = float(amplitude_heterogeneity(trace.tail_amplitude))
    out = Path(cfg.get("out") or args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv", config=cfg)
    (out / "result.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s and %s", out / "trace.csv", out / "result.json")
    return 0


# --- experiment ------------------------------------------------------------

EXPERIMENT_FLAG_MAP = {"seed": "master_seed", "tstop": "t_stop", "out": "out_dir"}
EXPERIMENT_FLAGS = ("sizes", "n", "instances_per_size", "trials_per_instance", "models", "p",
                    "degree", "seed", "dt", "tstop", "noise", "gamma", "xi", "ks", "k", "jobs",
                    "out")


def experiment_config(args) -> ExperimentConfig:
    raw = resolve({}, args, EXPERIMENT_FLAGS)
    if raw.get("n") is not None:
        if raw.get("sizes") is not None and args.sizes is not None:
            raise UsageError("give either --n or --sizes, not both")
        raw["sizes"] = [raw["n"]]
    raw.pop("n", None)
    values = {EXPERIMENT_FLAG_MAP.get(k, k): v for k, v in raw.items()}
    known = {f.name for f in fields(ExperimentConfig)} - {"preset"}
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown experiment parameters: {', '.join(unknown)}")
    try:
        return ExperimentConfig.from_preset(args.preset, **values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_experiment(args) -> int:
    cfg = experiment_config(args)
    if not cfg.out_dir:
        raise UsageError("experiment needs --out DIR")
    log.info("experiment %s -> %s (jobs=%d)", cfg.preset, cfg.out_dir, cfg.jobs)
    log.info("config: %s", json.dumps(cfg.echo(), sort_keys=True))
    out = run_experiment(cfg)
    summary = {k: v for k, v in out["summary"].items() if not isinstance(v, (dict, list))}
    log.info("summary: %s", json.dumps(summary, sort_keys=True, default=float))
    return 0


# --- validate --------------------------------------------------------------

def cmd_validate(args) -> int:
    start = time.perf_counter()
    results = run_suite(seed=args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail} ({r.seconds:.2f} s)")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} properties passed "
          f"in {time.perf_counter() - start:.1f} s")
    return EXIT_FAILURE if failed else 0


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "experiment": cmd_experiment,
            "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"oscim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationDiverged as exc:
        print(f"oscim {args.command}: integration diverged: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (OscimError, ValueError) as exc:
        print(f"oscim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
