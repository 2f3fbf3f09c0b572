"""Time stepping: deterministic RK4, Euler-Maruyama, schedules and seeded noise.

Seed layout for a trial seeded with ``seed``:

    default_rng([seed, 0])  initial state
    default_rng([seed, 1])  Wiener increments
    default_rng([seed, 2])  parameter dispersion (used by experiments)

Every trial owns its generators, so a batch of trials is the same as running
them one at a time with the same seeds.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .energy import energy_complex, energy_phase, energy_stationary, spin_readout
from .errors import DimensionError, IntegrationDiverged
from .model import (
    MODELS,
    R_FLOOR,
    CouplingSet,
    DopoParams,
    _ampphase,
    dopo_complex_rhs,
    dopo_rhs,
    oim_rhs,
    poim_phase_rhs,
    sl_rhs,
    stationary_rhs,
)

DEFAULT_DT = 1e-3
TAIL_FRACTION = 0.1
CHANNELS = ("phase_only", "amp_and_phase", "complex_additive")
DEFAULT_CHANNELS = {
    "sl": "complex_additive",
    "ampphase": "amp_and_phase",
    "poim-phase": "phase_only",
    "oim": "phase_only",
    "stationary": "phase_only",
    "dopo": "complex_additive",
}


@dataclass(frozen=True)
class Schedule:
    """Constant gain, or ``base + peak * min(t, t_stop) / t_stop``."""

    kind: str = "constant"
    base: float = 0.0
    peak: float = 0.0
    t_stop: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "linear_ramp"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "linear_ramp" and self.t_stop <= 0:
            raise ValueError("ramp needs t_stop > 0")

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls("constant", float(value))

    @classmethod
    def ramp(cls, base: float, peak: float, t_stop: float) -> "Schedule":
        return cls("linear_ramp", float(base), float(peak), float(t_stop))

    def __call__(self, t: float) -> float:
        return evaluate_schedule(self, t)


def evaluate_schedule(s: Schedule, t: float) -> float:
    if s.kind == "constant":
        return s.base
    return s.base + s.peak * min(max(t, 0.0), s.t_stop) / s.t_stop


@dataclass(frozen=True)
class NoiseConfig:
    amplitude: float = 0.0
    seed: int = 0
    channels: str | None = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be non-negative")
        if self.channels is not None and self.channels not in CHANNELS:
            raise ValueError(f"unknown noise channels {self.channels!r}")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = DEFAULT_DT
    t_stop: float = 10.0
    method: str = "euler_maruyama"
    record_every: int = 100

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_stop < 0:
            raise ValueError("t_stop must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.method not in ("rk4_deterministic", "euler_maruyama"):
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_stop / self.dt))


class GaussianStream:
    """Standard normals from one generator per trial, stacked on a leading axis.

    With a single integer seed no batch axis is added.
    """

    def __init__(self, seeds, stream: int = 1):
        self.batched = not np.isscalar(seeds)
        seeds = list(seeds) if self.batched else [seeds]
        self.generators = [np.random.default_rng([int(s), stream]) for s in seeds]

    def normal(self, shape) -> np.ndarray:
        if not self.batched:
            return self.generators[0].standard_normal(shape)
        return np.stack([g.standard_normal(shape) for g in self.generators])


def _check_finite(x, step, last, t=None):
    if not np.all(np.isfinite(x)):
        raise IntegrationDiverged(step, last, t=t)


def step_em(x, drift: Callable, t: float, dt: float, amplitude: float = 0.0,
            noise: GaussianStream | None = None, mask=None, step_index: int = 0):
    """One Euler-Maruyama step ``x + f(x, t) dt + A sqrt(dt) eta``.

    Complex states receive independent increments on real and imaginary parts.
    ``mask`` (broadcastable to ``x``) selects the noisy channels.
    """
    x_new = x + drift(x, t) * dt
    if amplitude > 0:
        shape = x.shape[1:] if noise.batched else x.shape
        eta = noise.normal(shape)
        if np.iscomplexobj(x):
            eta = eta + 1j * noise.normal(shape)
        if mask is not None:
            eta = eta * mask
        x_new = x_new + amplitude * np.sqrt(dt) * eta
    _check_finite(x_new, step_index, x, t)
    return x_new


def step_rk4(x, drift: Callable, t: float, dt: float, step_index: int = 0):
    """Classical fourth-order Runge-Kutta step for a (possibly time-dependent) drift."""
    k1 = drift(x, t)
    k2 = drift(x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = drift(x + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = drift(x + dt * k3, t + dt)
    x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_finite(x_new, step_index, x, t)
    return x_new


@dataclass
class System:
    """Packed drift/energy/readout callables for one model tag."""

    model: str
    n: int
    drift: Callable
    energy: Callable
    phases: Callable
    amplitudes: Callable | None = None
    noise_mask: np.ndarray | None = None
    canonicalize: Callable | None = None
    clamp_events: list = field(default_factory=lambda: [0])

    def observable(self, x, t):
        """Oscillator output ``cos(t + theta)``; in the lab frame this is ``cos(t + phi)``."""
        if self.model == "stationary":
            return np.cos(t + x)
        return np.cos(t + self.phases(x, t))


def _gain(schedules, key, default):
    s = (schedules or {}).get(key)
    if s is None:
        return lambda t: default
    return s


def _uniform_kappa(params):
    k = np.unique(np.asarray(params.kappa))
    if k.size != 1:
        raise ValueError("phase models need a uniform pump strength (Ks)")
    return float(k[0])


def build_system(model: str, params, coupling: CouplingSet | None, schedules=None,
                 channels: str | None = None, r_floor: float = R_FLOOR) -> System:
    """Wire a model tag to its drift, energy and readout.

    Gains: ``K`` follows ``schedules['K']`` (default ``coupling.xi``) and ``Ks``
    follows ``schedules['Ks']`` (default the uniform ``params.kappa``).  For
    ``sl``/``ampphase`` the ``K`` schedule drives ``xi``.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    channels = channels or DEFAULT_CHANNELS[model]

    if model == "dopo":
        if not isinstance(params, DopoParams):
            raise TypeError("dopo model needs DopoParams")
        p0, ep = params.p0, np.exp(1j * params.phi_p)
        n = coupling.n if coupling is not None else None

        def drift(x, t):
            if params.phi_p == 0.0:
                dc, ds = dopo_rhs(x[..., 0, :], x[..., 1, :], p0)
            else:
                dz = dopo_complex_rhs(x[..., 0, :] + 1j * x[..., 1, :], p0, params.phi_p)
                dc, ds = dz.real, dz.imag
            return np.stack([dc, ds], axis=-2)

        def energy(x, t):
            z = x[..., 0, :] + 1j * x[..., 1, :]
            m = np.abs(z) ** 2
            pump = -0.5 * p0 * (ep * np.conj(z) ** 2 + np.conj(ep) * z**2)
            return np.sum(m + 0.5 * m**2 + pump.real, axis=-1)

        return System(model, n or 0, drift, energy,
                      phases=lambda x, t: np.arctan2(x[..., 1, :], x[..., 0, :]),
                      amplitudes=lambda x: np.hypot(x[..., 0, :], x[..., 1, :]),
                      noise_mask=_mask(channels, packed=True))

    if coupling is None:
        raise ValueError(f"model {model!r} needs a CouplingSet")
    n = coupling.n
    K = _gain(schedules, "K", coupling.xi)
    J, G = coupling.J, coupling.G

    if model == "sl":
        if channels != "complex_additive":
            raise ValueError("sl model only supports complex_additive noise")

        def drift(x, t):
            return sl_rhs(x, params, coupling, xi=K(t))

        def energy(x, t):
            return energy_complex(x, params, coupling, xi=K(t)).total

        return System(model, n, drift, energy, phases=lambda x, t: np.angle(x),
                      amplitudes=np.abs)

    if model == "ampphase":
        sys = System(model, n, None, None, phases=lambda x, t: x[..., 1, :],
                     amplitudes=lambda x: x[..., 0, :], noise_mask=_mask(channels, packed=True))

        def drift(x, t):
            r_dot, th_dot, clamped = _ampphase(x[..., 0, :], x[..., 1, :], params, coupling,
                                               K(t), r_floor)
            sys.clamp_events[0] += clamped
            return np.stack([r_dot, th_dot], axis=-2)

        def energy(x, t):
            a = x[..., 0, :] * np.exp(1j * x[..., 1, :])
            return energy_complex(a, params, coupling, xi=K(t)).total

        def canonicalize(x):
            # r e^{i th} with r < 0 is |r| e^{i(th + pi)}
            neg = x[..., 0, :] < 0
            if np.any(neg):
                x = x.copy()
                x[..., 0, :] = np.abs(x[..., 0, :])
                x[..., 1, :] = np.where(neg, x[..., 1, :] + np.pi, x[..., 1, :])
            return x

        sys.drift, sys.energy, sys.canonicalize = drift, energy, canonicalize
        return sys

    if channels != "phase_only":
        raise ValueError(f"{model} model only supports phase_only noise")
    phases = lambda x, t: x  # noqa: E731

    if model == "stationary":
        W = coupling.effective
        return System(model, n, lambda x, t: stationary_rhs(x, t, K(t), W),
                      lambda x, t: energy_stationary(x, t, K(t), W),
                      phases=lambda x, t: x + t)

    ks0 = _uniform_kappa(params) if params is not None else 0.0
    Ks = _gain(schedules, "Ks", ks0)
    if model == "oim":
        return System(model, n, lambda x, t: oim_rhs(x, Ks(t), K(t), J),
                      lambda x, t: energy_phase(x, Ks(t), K(t), J, np.zeros_like(J)),
                      phases=phases)
    return System(model, n, lambda x, t: poim_phase_rhs(x, Ks(t), K(t), J, G),
                  lambda x, t: energy_phase(x, Ks(t), K(t), J, G), phases=phases)


def _mask(channels, packed):
    if channels == "phase_only" and packed:
        return np.array([[0.0], [1.0]])
    return None


@dataclass
class Trace:
    """Sampled trajectory of one trial (or a batch of trials on axis 0)."""

    model: str
    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    final_state: np.ndarray
    final_t: float
    tail_amplitude: np.ndarray | None = None
    clamp_events: int = 0
    metadata: dict = field(default_factory=dict)


def random_initial_state(model: str, n: int, seeds, amp0: float = 0.1):
    """Uniform phases on [0, 2pi); amplitudes ``amp0 (1 + 0.01 N(0, 1))``.

    ``seeds`` is one trial seed or a sequence of them (adds a batch axis).
    """
    batched = not np.isscalar(seeds)
    rows = []
    for s in (seeds if batched else [seeds]):
        rng = np.random.default_rng([int(s), 0])
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        if model in ("sl", "ampphase", "dopo"):
            r = amp0 * (1.0 + 0.01 * rng.standard_normal(n))
            if model == "sl":
                rows.append(r * np.exp(1j * theta))
            elif model == "ampphase":
                rows.append(np.stack([r, theta]))
            else:
                rows.append(np.stack([r * np.cos(theta), r * np.sin(theta)]))
        else:
            rows.append(theta)
    return np.stack(rows) if batched else rows[0]


def integrate_trial(model: str, params, coupling: CouplingSet | None, schedules=None,
                    noise: NoiseConfig | None = None, config: IntegratorConfig | None = None,
                    initial_state=None, seeds: Sequence[int] | None = None,
                    t0: float = 0.0, r_floor: float = R_FLOOR) -> Trace:
    """Integrate one trial, or a batch when ``seeds`` is given.

    ``initial_state`` is the packed array (see ``NetworkState.as_array``); if
    omitted it is drawn with ``random_initial_state``.  Energies are recorded
    every ``config.record_every`` steps and at the end.
    """
    noise = noise or NoiseConfig()
    config = config or IntegratorConfig()
    system = build_system(model, params, coupling, schedules, noise.channels, r_floor)
    batch_seeds = None if seeds is None else [int(s) for s in seeds]
    stream_seeds = batch_seeds if batch_seeds is not None else noise.seed

    if initial_state is None:
        if system.n == 0:
            raise ValueError("initial_state is required when the size is unknown")
        x = random_initial_state(model, system.n, stream_seeds)
    else:
        x = np.array(initial_state, dtype=complex if model == "sl" else float)
    _check_shape(model, system, x, batch_seeds)

    deterministic = config.method == "rk4_deterministic"
    stream = None if deterministic or noise.amplitude == 0 else GaussianStream(stream_seeds)
    dt, n_steps = config.dt, config.n_steps
    tail_start = n_steps - max(1, int(round(TAIL_FRACTION * n_steps))) if n_steps else 0
    tail_sum, tail_count = 0.0, 0

    times, states, energies = [], [], []

    def record(k, x):
        t = t0 + k * dt
        times.append(t)
        states.append(x.copy())
        energies.append(system.energy(x, t))

    record(0, x)
    for k in range(n_steps):
        t = t0 + k * dt
        try:
            if deterministic:
                x = step_rk4(x, system.drift, t, dt, step_index=k)
            else:
                x = step_em(x, system.drift, t, dt, noise.amplitude, stream,
                            mask=system.noise_mask, step_index=k)
        except IntegrationDiverged as exc:
            exc.context.update(model=model, seed=stream_seeds)
            exc.args = (f"{exc.args[0]} [model={model}, seed={stream_seeds}]",)
            raise
        if system.canonicalize is not None:
            x = system.canonicalize(x)
        if system.amplitudes is not None and k + 1 > tail_start:
            tail_sum = tail_sum + system.amplitudes(x)
            tail_count += 1
        if (k + 1) % config.record_every == 0 or k + 1 == n_steps:
            record(k + 1, x)

    tail = None
    if system.amplitudes is not None:
        tail = tail_sum / tail_count if tail_count else system.amplitudes(x)
    meta = {
        "model": model,
        "dt": dt,
        "t_stop": config.t_stop,
        "method": config.method,
        "noise": asdict(noise),
        "seeds": stream_seeds,
        "schedules": {k: asdict(v) for k, v in (schedules or {}).items()},
    }
    return Trace(model=model, times=np.asarray(times), states=np.asarray(states),
                 energies=np.asarray(energies), final_state=x, final_t=t0 + n_steps * dt,
                 tail_amplitude=tail, clamp_events=system.clamp_events[0], metadata=meta)


def _check_shape(model, system, x, batch_seeds):
    packed = model in ("ampphase", "dopo")
    core = 2 if packed else 1
    if batch_seeds is not None and (x.ndim != core + 1 or x.shape[0] != len(batch_seeds)):
        raise DimensionError(f"batched initial state must have shape (batch, ...), got {x.shape}")
    if batch_seeds is None and x.ndim != core:
        raise DimensionError(f"initial state for {model} must have {core} axes, got {x.shape}")
    if packed and x.shape[-2] != 2:
        raise DimensionError(f"{model} state packs two channels on axis -2, got {x.shape}")
    if system.n and x.shape[-1] != system.n:
        raise DimensionError(f"initial state has {x.shape[-1]} oscillators, expected {system.n}")


def readout(trace: Trace) -> np.ndarray:
    """Spins ``sign(cos theta)`` from the final state of a trace."""
    return spin_readout(_final_phases(trace))


def _final_phases(trace: Trace) -> np.ndarray:
    x, t = trace.final_state, trace.final_t
    if trace.model == "sl":
        return np.angle(x)
    if trace.model == "ampphase":
        return x[..., 1, :]
    if trace.model == "dopo":
        return np.arctan2(x[..., 1, :], x[..., 0, :])
    if trace.model == "stationary":
        return x + t
    return x


def trace_columns(trace: Trace):
    """Per-oscillator CSV columns: amplitudes (if any), phase and observable."""
    x = trace.states
    t = trace.times[:, None]
    cols = {}
    if trace.model == "sl":
        cols["r"], cols["theta"] = np.abs(x), np.angle(x)
    elif trace.model == "ampphase":
        cols["r"], cols["theta"] = x[:, 0, :], x[:, 1, :]
    elif trace.model == "dopo":
        cols["r"], cols["theta"] = np.hypot(x[:, 0, :], x[:, 1, :]), np.arctan2(x[:, 1, :], x[:, 0, :])
    elif trace.model == "stationary":
        cols["phi"] = x
    else:
        cols["theta"] = x
    phase = cols.get("phi", cols.get("theta"))
    cols["obs"] = np.cos(t + phase)
    return cols


def write_trace_csv(trace: Trace, path, config: dict | None = None) -> None:
    """CSV with header ``t, E, <per-oscillator columns>`` (single trial only).

    ``config`` is written first as a ``# config: {json}`` line.
    """
    if trace.states.ndim != (3 if trace.model in ("ampphase", "dopo") else 2):
        raise ValueError("write_trace_csv expects a single-trial trace")
    cols = trace_columns(trace)
    n = next(iter(cols.values())).shape[1]
    header = ["t", "E"] + [f"{name}_{i}" for name in cols for i in range(n)]
    with open(path, "w", newline="") as fh:
        if config is not None:
            fh.write("# config: " + json.dumps(config, sort_keys=True, default=_json_default) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, t in enumerate(trace.times):
            row = [repr(float(t)), repr(float(trace.energies[k]))]
            for v in cols.values():
                row.extend(repr(float(y)) for y in v[k])
            w.writerow(row)


def write_trace_metadata(trace: Trace, path, instance_hash: str | None = None, **extra) -> None:
    meta = dict(trace.metadata)
    meta["instance_hash"] = instance_hash
    meta["clamp_events"] = trace.clamp_events
    meta.update(extra)
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
