"""Desk-scale reproductions: OIM vs PoIM, amplitude heterogeneity, frames, oracle check.

Seed fan-out from a master seed ``m`` (``derive_seed``):

    instance ``idx`` of size ``n``     derive_seed(m, 0, n, idx)
    trial ``k`` on that instance       derive_seed(m, 1, n, idx, k)

Trial seeds do not depend on the model, so OIM and PoIM runs on one instance
start from the same phases and are directly comparable.  Any trial can be
re-run alone from its seed and reproduces bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .energy import amplitude_heterogeneity
from .graph import (
    IsingInstance,
    brute_force_ground_state,
    cut_value,
    generate_er_graph,
    generate_regular_graph,
    ising_energy,
)
from .integrate import (
    IntegratorConfig,
    NoiseConfig,
    Schedule,
    integrate_trial,
    random_initial_state,
    readout,
)
from .model import CouplingSet, OscillatorParams, split_couplings

log = logging.getLogger(__name__)

PRESETS = ("fig1", "fig2", "fig2-kn", "frame_demo", "oracle_small")
AMPLITUDE_MODELS = ("sl", "ampphase", "dopo")
RAMP_BASE = 0.5
K_OIM = 1.0

# Per-size OIM/PoIM settings: (A_s,max = K_PoIM,max, t_stop, A_n)
FIG1_TABLE = {
    50: (2.0, 10.0, 0.05),
    100: (3.0, 10.0, 0.08),
    150: (4.0, 15.0, 0.15),
}

FRAME_DEMO_NODES = 15
FRAME_DEMO_EDGES = 58

_PRESET_DEFAULTS = {
    "fig1": dict(sizes=(50, 100, 150), instances_per_size=25, trials_per_instance=10,
                 p=0.5, models=("oim", "poim-phase")),
    "fig2": dict(sizes=(50,), instances_per_size=1, trials_per_instance=100, degree=5,
                 t_stop=10.0, noise=0.05, mu=0.6, kappa=0.05, alpha=1.0, dispersion=0.2,
                 xi=0.3, gamma=0.5, models=("ampphase",)),
    "frame_demo": dict(sizes=(FRAME_DEMO_NODES,), instances_per_size=1, trials_per_instance=1,
                       t_stop=20.0, noise=0.0, k=1.0, gamma=0.5, record_every=10,
                       models=("poim-phase", "stationary")),
    "oracle_small": dict(sizes=(12,), instances_per_size=20, trials_per_instance=10, p=0.5,
                         t_stop=10.0, noise=0.05, mu=0.6, kappa=0.05, alpha=1.0, xi=0.3,
                         models=("sl", "ampphase", "poim-phase", "oim", "stationary")),
}
# same study at the stronger noise level
_PRESET_DEFAULTS["fig2-kn"] = dict(_PRESET_DEFAULTS["fig2"], noise=0.08)


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str
    sizes: tuple = (50,)
    instances_per_size: int = 1
    trials_per_instance: int = 1
    master_seed: int = 0
    dt: float = 1e-3
    t_stop: float | None = None
    noise: float | None = None
    p: float = 0.5
    degree: int = 5
    mu: float = 0.6
    kappa: float = 0.05
    alpha: float = 1.0
    dispersion: float = 0.0
    xi: float = 1.0
    gamma: float = 0.5
    k: float | None = None
    ks: float | None = None
    models: tuple = ()
    record_every: int = 100
    jobs: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; expected one of {PRESETS}")
        if self.instances_per_size < 1 or self.trials_per_instance < 1:
            raise ValueError("instance and trial counts must be >= 1")
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "models", tuple(self.models))

    @classmethod
    def from_preset(cls, preset: str, **overrides) -> "ExperimentConfig":
        """Preset defaults, then ``overrides`` (``None`` values are ignored)."""
        if preset not in _PRESET_DEFAULTS:
            raise ValueError(f"unknown preset {preset!r}; expected one of {PRESETS}")
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values = dict(_PRESET_DEFAULTS[preset])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(preset=preset, **values)

    def echo(self) -> dict:
        """Resolved scientific configuration (no output path or worker count)."""
        d = asdict(self)
        d.pop("out_dir")
        d.pop("jobs")
        d["sizes"] = list(self.sizes)
        d["models"] = list(self.models)
        return d


@dataclass
class TrialResult:
    instance_id: str
    model: str
    seed: int
    trial: int
    spins: np.ndarray
    ising_energy: float
    cut: int
    ah: float | None = None
    best_energy_trace: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    wall_time: float = 0.0
    size: int = 0


def derive_seed(master: int, *counters: int) -> int:
    return int(np.random.SeedSequence(int(master), spawn_key=tuple(int(c) for c in counters))
               .generate_state(1)[0])


def fig1_row(n: int):
    """Per-size settings for ``n``; other sizes use the nearest listed size."""
    key = min(FIG1_TABLE, key=lambda m: (abs(m - n), m))
    return FIG1_TABLE[key]


def model_setup(model: str, instance: IsingInstance, cfg: ExperimentConfig, t_stop: float,
                ramp_peak: float = 2.0):
    """(params, coupling, schedules) for one model on one instance.

    oim         J = W, constant K, ramped second-harmonic injection Ks
    poim-phase  J = G = W, no Ks, ramped K
    stationary  lab-frame form of the equal-split PoIM, constant K
    sl/ampphase equal split with gain ``cfg.xi``
    """
    n = instance.n
    w = instance.weights
    params = OscillatorParams.uniform(n, cfg.mu, cfg.alpha, cfg.kappa)
    if model == "oim":
        coupling = split_couplings(instance, 1.0, K_OIM if cfg.k is None else cfg.k)
        ks = Schedule.ramp(RAMP_BASE, ramp_peak, t_stop) if cfg.ks is None else Schedule.constant(cfg.ks)
        return params, coupling, {"Ks": ks}
    if model == "poim-phase":
        coupling = CouplingSet(J=w, G=w, xi=1.0, gamma=0.5)
        k = Schedule.ramp(RAMP_BASE, ramp_peak, t_stop) if cfg.k is None else Schedule.constant(cfg.k)
        return params, coupling, {"K": k, "Ks": Schedule.constant(cfg.ks or 0.0)}
    if model == "stationary":
        coupling = split_couplings(instance, 0.5, 1.0 if cfg.k is None else cfg.k)
        return params, coupling, None
    if model in ("sl", "ampphase"):
        return params, split_couplings(instance, cfg.gamma, cfg.xi), None
    raise ValueError(f"model {model!r} is not used by the experiment presets")


def _run_batch(task):
    """One (instance, model) pair, all trials integrated as a batch."""
    instance = IsingInstance.from_dict(task["instance"])
    cfg = ExperimentConfig(**task["config"])
    model, seeds, t_stop, noise = task["model"], task["seeds"], task["t_stop"], task["noise"]
    params, coupling, schedules = model_setup(model, instance, cfg, t_stop, task["ramp_peak"])
    if task.get("mu_dispersion"):
        mu = np.stack([cfg.mu * (1.0 + cfg.dispersion
                                 * np.random.default_rng([s, 2]).standard_normal(instance.n))
                       for s in seeds])
        params = OscillatorParams(mu=mu, alpha=params.alpha, kappa=params.kappa)
    start = time.perf_counter()
    trace = integrate_trial(model, params, coupling, schedules, NoiseConfig(noise),
                            IntegratorConfig(cfg.dt, t_stop, record_every=cfg.record_every),
                            seeds=seeds)
    wall = (time.perf_counter() - start) / len(seeds)
    spins = readout(trace)
    energies = ising_energy(instance.weights, spins)
    ah = amplitude_heterogeneity(trace.tail_amplitude) if model in AMPLITUDE_MODELS else None
    out = []
    for k, seed in enumerate(seeds):
        out.append(TrialResult(
            instance_id=task["instance_id"], model=model, seed=seed, trial=k,
            spins=spins[k], ising_energy=float(energies[k]), cut=cut_value(instance, spins[k]),
            ah=None if ah is None else float(ah[k]),
            best_energy_trace=np.column_stack([trace.times, trace.energies[:, k]]),
            wall_time=wall, size=instance.n,
        ))
    return out


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _task(cfg, instance, instance_id, model, seeds, t_stop, noise, ramp_peak=2.0, **extra):
    cfg_dict = asdict(cfg)
    return dict(config=cfg_dict, instance=instance.to_dict(), instance_id=instance_id,
                model=model, seeds=list(seeds), t_stop=t_stop, noise=noise,
                ramp_peak=ramp_peak, **extra)


def _instances(cfg, n, generate):
    for idx in range(cfg.instances_per_size):
        yield idx, generate(n, derive_seed(cfg.master_seed, 0, n, idx))


def _trial_seeds(cfg, n, idx):
    return [derive_seed(cfg.master_seed, 1, n, idx, k) for k in range(cfg.trials_per_instance)]


def run_fig1(cfg: ExperimentConfig) -> dict:
    """Best cut per (instance, model) for OIM and PoIM on G(n, p) graphs."""
    tasks, instances = [], {}
    for n in cfg.sizes:
        peak, t_tab, an_tab = fig1_row(n)
        t_stop = cfg.t_stop if cfg.t_stop is not None else t_tab
        noise = cfg.noise if cfg.noise is not None else an_tab
        for idx, inst in _instances(cfg, n, lambda n, s: generate_er_graph(n, cfg.p, s)):
            iid = f"er{n}-{idx}"
            instances[iid] = inst
            for model in cfg.models:
                tasks.append(_task(cfg, inst, iid, model, _trial_seeds(cfg, n, idx),
                                   t_stop, noise, peak))
    log.info("fig1: %d batches", len(tasks))
    results = [r for batch in _map(_run_batch, tasks, cfg.jobs) for r in batch]

    rows = []
    for iid, inst in instances.items():
        row = {"instance": iid, "n": inst.n, "edges": inst.num_edges}
        for model in cfg.models:
            row[model] = max(r.cut for r in results if r.instance_id == iid and r.model == model)
        rows.append(row)
    summary = {"pairs": rows}
    if {"oim", "poim-phase"} <= set(cfg.models):
        rel = [abs(r["oim"] - r["poim-phase"]) / max(r["oim"], r["poim-phase"], 1) for r in rows]
        summary["relative_gap"] = rel
        summary["parity_fraction_within_5pct"] = float(np.mean(np.asarray(rel) <= 0.05))
    return _finish(cfg, results, summary)


def run_fig2(cfg: ExperimentConfig) -> dict:
    """Amplitude heterogeneity vs achieved Ising energy on one regular graph."""
    n = cfg.sizes[0]
    inst = generate_regular_graph(n, cfg.degree, derive_seed(cfg.master_seed, 0, n, 0))
    seeds = _trial_seeds(cfg, n, 0)
    t_stop = cfg.t_stop if cfg.t_stop is not None else 10.0
    noise = cfg.noise if cfg.noise is not None else 0.05
    task = _task(cfg, inst, f"reg{n}-{cfg.degree}", cfg.models[0], seeds, t_stop, noise,
                 mu_dispersion=cfg.dispersion > 0)
    results = _run_batch(task)

    ah = np.array([r.ah for r in results])
    energy = np.array([r.ising_energy for r in results])
    order = np.argsort(ah, kind="stable")
    running = np.minimum.accumulate(energy[order])
    running_by_trial = np.empty_like(running)
    running_by_trial[order] = running
    rho, pval = spearmanr(ah, energy) if np.ptp(ah) > 0 and np.ptp(energy) > 0 else (0.0, 1.0)
    bins = np.array_split(order, min(5, len(order)))
    summary = {
        "instance": inst.to_dict() | {"hash": inst.content_hash()},
        "spearman_rho": float(rho),
        "spearman_p": float(pval),
        "ah_quintiles": [
            {"ah_min": float(ah[b].min()), "ah_max": float(ah[b].max()),
             "lowest_energy": float(energy[b].min()), "mean_energy": float(energy[b].mean())}
            for b in bins
        ],
    }
    extra = {"running_lowest_energy": running_by_trial}
    return _finish(cfg, results, summary, extra)


def frame_demo_instance(n: int = FRAME_DEMO_NODES, edges: int = FRAME_DEMO_EDGES,
                        master_seed: int = 0, max_tries: int = 1_000_000) -> IsingInstance:
    """First ``G(n, p = edges / pairs)`` draw with exactly ``edges`` edges and as few
    even-degree nodes as parity allows (seeds ``master_seed + 1, + 2, ...``).

    Without second-harmonic injection a node whose neighbours split evenly has
    zero local field and its phase is neutrally stable, so it need not settle to
    a binary value.  Only even-degree nodes can split evenly.
    """
    p = edges / (n * (n - 1) / 2)
    min_even = n % 2
    for k in range(1, max_tries + 1):
        inst = generate_er_graph(n, p, k + master_seed)
        if inst.num_edges != edges:
            continue
        degree = np.count_nonzero(inst.weights, axis=1)
        if np.count_nonzero(degree % 2 == 0) == min_even:
            return inst
    raise RuntimeError(f"no suitable {n}-node draw with {edges} edges in {max_tries} tries")


def run_frame_demo(cfg: ExperimentConfig) -> dict:
    """Matched rotating-frame PoIM (Ks = 0) and lab-frame integrations.

    Trial 0 is the demonstration run written to ``traces.csv``; further trials
    only add initial conditions to the settling statistics.
    """
    n = cfg.sizes[0]
    inst = frame_demo_instance(n, master_seed=cfg.master_seed)
    K = 1.0 if cfg.k is None else cfg.k
    seeds = _trial_seeds(cfg, n, 0)
    theta0 = random_initial_state("poim-phase", n, seeds)
    t_stop = cfg.t_stop if cfg.t_stop is not None else 20.0
    icfg = IntegratorConfig(cfg.dt, t_stop, "rk4_deterministic", cfg.record_every)
    coupling = split_couplings(inst, 0.5, K)
    start = time.perf_counter()
    rot = integrate_trial("poim-phase", None, coupling, {"Ks": Schedule.constant(0.0)},
                          config=icfg, initial_state=theta0, seeds=seeds)
    lab = integrate_trial("stationary", None, coupling, config=icfg, initial_state=theta0,
                          seeds=seeds)
    wall = (time.perf_counter() - start) / (2 * len(seeds))
    t = rot.times
    residual = rot.states - t[:, None, None] - lab.states
    residual = np.abs(np.mod(residual + np.pi, 2 * np.pi) - np.pi)
    obs_rot = np.cos(t[:, None, None] + rot.states)
    obs_lab = np.cos(t[:, None, None] + lab.states)
    settle = np.abs(np.abs(obs_lab[-1]) - 1.0)

    results = []
    for k, seed in enumerate(seeds):
        for model, tr in (("poim-phase", rot), ("stationary", lab)):
            spins = readout(tr)[k]
            results.append(TrialResult(
                instance_id=f"frame{n}", model=model, seed=seed, trial=k, spins=spins,
                ising_energy=float(ising_energy(inst.weights, spins)),
                cut=cut_value(inst, spins),
                best_energy_trace=np.column_stack([tr.times, tr.energies[:, k]]),
                wall_time=wall, size=n,
            ))
    summary = {
        "instance": inst.to_dict() | {"hash": inst.content_hash()},
        "max_frame_residual": float(residual[:, 0].max()),
        "max_settle_deviation": float(settle[0].max()),
        "settled_nodes": int(np.count_nonzero(settle[0] <= 1e-2)),
        "rotating_obs_amplitude_tail": float(np.abs(obs_rot[len(t) // 2:, 0]).max()),
        "settled_fraction_over_trials": float(np.mean(settle.max(axis=1) <= 1e-2)),
        "max_frame_residual_over_trials": float(residual.max()),
    }
    traces = {"t": t, "rotating": obs_rot[:, 0], "stationary": obs_lab[:, 0],
              "residual": residual[:, 0].max(axis=1)}
    out = _finish(cfg, results, summary)
    out["traces"] = traces
    if cfg.out_dir:
        _write_traces(Path(cfg.out_dir) / "traces.csv", traces, cfg)
    return out


def run_oracle_small(cfg: ExperimentConfig, instances: list[IsingInstance] | None = None) -> dict:
    """Best-of-k success rate against the exhaustive optimum for every model."""
    n = cfg.sizes[0]
    if n > 16:
        raise ValueError(f"oracle study is limited to n <= 16, got {n}")
    if instances is None:
        instances = [inst for _, inst in
                     _instances(cfg, n, lambda n, s: generate_er_graph(n, cfg.p, s))]
    t_stop = cfg.t_stop if cfg.t_stop is not None else 10.0
    noise = cfg.noise if cfg.noise is not None else 0.05
    tasks, optimum = [], {}
    for idx, inst in enumerate(instances):
        iid = f"small{inst.n}-{idx}"
        spins, _ = brute_force_ground_state(inst)
        optimum[iid] = cut_value(inst, spins)
        for model in cfg.models:
            tasks.append(_task(cfg, inst, iid, model, _trial_seeds(cfg, inst.n, idx), t_stop, noise))
    results = [r for batch in _map(_run_batch, tasks, cfg.jobs) for r in batch]
    table = {}
    for model in cfg.models:
        hits, ratios = [], []
        for iid, opt in optimum.items():
            best = max(r.cut for r in results if r.instance_id == iid and r.model == model)
            hits.append(best == opt)
            ratios.append(best / opt if opt else 1.0)
        table[model] = {"success_rate": float(np.mean(hits)),
                        "mean_approximation_ratio": float(np.mean(ratios))}
    return _finish(cfg, results, {"optimum": optimum, "models": table})


RUNNERS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig2-kn": run_fig2,
    "frame_demo": run_frame_demo,
    "oracle_small": run_oracle_small,
}


def run_experiment(cfg: ExperimentConfig) -> dict:
    return RUNNERS[cfg.preset](cfg)


RESULT_COLUMNS = ("size", "instance", "model", "trial", "seed", "cut", "ising_energy", "ah", "spins")


def results_csv(results, cfg: ExperimentConfig, extra: dict | None = None) -> str:
    """Deterministic CSV text: a ``#`` config line, then one row per trial."""
    extra = extra or {}
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(cfg.echo(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS + tuple(extra))
    for k, r in enumerate(results):
        row = [r.size, r.instance_id, r.model, r.trial, r.seed, r.cut, repr(r.ising_energy),
               "" if r.ah is None else repr(r.ah),
               "".join("+" if x > 0 else "-" for x in r.spins)]
        row.extend(repr(float(v[k])) for v in extra.values())
        w.writerow(row)
    return buf.getvalue()


def _finish(cfg, results, summary, extra=None) -> dict:
    summary = dict(summary)
    summary["config"] = cfg.echo()
    summary["master_seed"] = cfg.master_seed
    summary["trials"] = len(results)
    summary["total_wall_time"] = float(sum(r.wall_time for r in results))
    out = {"results": results, "summary": summary, "csv": results_csv(results, cfg, extra)}
    if cfg.out_dir:
        d = Path(cfg.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "results.csv").write_text(out["csv"])
        (d / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out


def _write_traces(path, traces, cfg):
    n = traces["rotating"].shape[1]
    with open(path, "w", newline="") as fh:
        fh.write("# config: " + json.dumps(cfg.echo(), sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"rot_obs_{i}" for i in range(n)] + [f"st_obs_{i}" for i in range(n)]
                   + ["frame_residual"])
        for k, t in enumerate(traces["t"]):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in traces["rotating"][k]]
                       + [repr(float(v)) for v in traces["stationary"][k]]
                       + [repr(float(traces["residual"][k]))])


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
