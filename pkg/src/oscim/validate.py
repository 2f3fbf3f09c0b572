"""Fast identity suite behind ``oscim validate``.

Every check draws its own random states from a seeded generator and returns a
``PropertyResult``; nothing here integrates long trajectories.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .energy import (
    ah_energy_to_ising,
    energy_ah,
    energy_complex,
    energy_phase,
    energy_stationary,
    phase_energy_to_ising,
    real_grad_fd,
    wirtinger_grad_fd,
)
from .errors import SymmetryError
from .model import (
    CouplingSet,
    DopoParams,
    OscillatorParams,
    dopo_complex_rhs,
    dopo_rhs,
    dopo_to_sl_params,
    oim_rhs,
    poim_phase_rhs,
    sl_rhs,
    stationary_rhs,
)

GRAD_RTOL = 1e-6
IDENTITY_RTOL = 1e-12
DOPO_RTOL = 1e-8
SIZES = (2, 4, 10)


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def random_symmetric(rng, n, scale=1.0):
    m = rng.normal(0.0, scale, (n, n))
    m = 0.5 * (m + m.T)
    np.fill_diagonal(m, 0.0)
    return m


def random_sl_system(rng, n):
    params = OscillatorParams(mu=rng.uniform(-1, 1, n), alpha=rng.uniform(0.5, 2, n),
                              kappa=rng.uniform(0, 1, n), phi_p=rng.uniform(0, 2 * np.pi))
    coupling = CouplingSet(J=random_symmetric(rng, n), G=random_symmetric(rng, n),
                           xi=rng.uniform(0.1, 2))
    return params, coupling


def rel_err(got, want) -> float:
    got, want = np.asarray(got), np.asarray(want)
    return float(np.max(np.abs(got - want)) / max(np.max(np.abs(want)), np.finfo(float).tiny))


def _worst(errors):
    return max(errors) if errors else 0.0


def check_sl_gradient(rng, states=100, sizes=SIZES):
    errs = []
    for n in sizes:
        for _ in range(states):
            params, coupling = random_sl_system(rng, n)
            a = rng.normal(size=n) + 1j * rng.normal(size=n)
            fd = wirtinger_grad_fd(lambda x: energy_complex(x, params, coupling).total, a)
            errs.append(rel_err(sl_rhs(a, params, coupling), -fd))
    worst = _worst(errs)
    return worst <= GRAD_RTOL, f"max rel err {worst:.2e} over {len(errs)} states"


def check_phase_gradient(rng, states=100, sizes=SIZES):
    errs = []
    for n in sizes:
        for _ in range(states):
            J, G = random_symmetric(rng, n), random_symmetric(rng, n)
            Ks, K = rng.uniform(0, 2), rng.uniform(0.1, 2)
            th = rng.uniform(0, 2 * np.pi, n)
            fd = real_grad_fd(lambda x: energy_phase(x, Ks, K, J, G), th)
            errs.append(rel_err(poim_phase_rhs(th, Ks, K, J, G), -fd))
            fd = real_grad_fd(lambda x: energy_phase(x, Ks, K, J), th)
            errs.append(rel_err(poim_phase_rhs(th, Ks, K, J, J), -fd))
            fd = real_grad_fd(lambda x: energy_phase(x, Ks, K, J, 0 * J), th)
            errs.append(rel_err(oim_rhs(th, Ks, K, J), -fd))
    worst = _worst(errs)
    return worst <= GRAD_RTOL, f"max rel err {worst:.2e} over {len(errs)} states"


def check_stationary_gradient(rng, states=100, sizes=SIZES):
    errs = []
    for n in sizes:
        for _ in range(states):
            J, K, t = random_symmetric(rng, n), rng.uniform(0.1, 2), rng.uniform(0, 20)
            phi = rng.uniform(0, 2 * np.pi, n)
            fd = real_grad_fd(lambda x: energy_stationary(x, t, K, J), phi)
            errs.append(rel_err(stationary_rhs(phi, t, K, J) + 1.0, -fd))
    worst = _worst(errs)
    return worst <= GRAD_RTOL, f"max rel err {worst:.2e} over {len(errs)} states"


def check_trig_identity(rng, states=100, sizes=SIZES):
    """J = G collapses the phase drift to -Ks sin 2th - 2K sin th (J cos th)."""
    errs = []
    for n in sizes:
        for _ in range(states):
            J, Ks, K = random_symmetric(rng, n), rng.uniform(0, 2), rng.uniform(0.1, 2)
            th = rng.uniform(0, 2 * np.pi, n)
            want = -Ks * np.sin(2 * th) - 2 * K * np.sin(th) * (J @ np.cos(th))
            errs.append(rel_err(poim_phase_rhs(th, Ks, K, J, J), want))
    worst = _worst(errs)
    return worst <= IDENTITY_RTOL * 100, f"max rel err {worst:.2e}"


def check_phase_ising_mapping(rng, configs=100, n=10):
    errs = []
    for _ in range(configs):
        J, Ks, K = random_symmetric(rng, n), rng.uniform(0, 2), rng.uniform(0.1, 2)
        s = rng.choice([-1, 1], n)
        ising, c1 = phase_energy_to_ising(s, Ks, K, J)
        errs.append(rel_err(energy_phase(np.where(s > 0, 0.0, np.pi), Ks, K, J), ising + c1))
    worst = _worst(errs)
    return worst <= IDENTITY_RTOL, f"max rel err {worst:.2e} (C1 = -N Ks / 2)"


def check_ah_ising_mapping(rng, configs=100, n=10):
    errs = []
    for _ in range(configs):
        J, Ks, K = random_symmetric(rng, n), rng.uniform(0, 2), rng.uniform(0.1, 2)
        r = rng.uniform(0.2, 2.0, n)
        s = rng.choice([-1, 1], n)
        ising, c2 = ah_energy_to_ising(s, r, Ks, K, J)
        errs.append(rel_err(energy_ah(r, np.where(s > 0, 0.0, np.pi), Ks, K, J), ising - c2))
    worst = _worst(errs)
    return worst <= IDENTITY_RTOL, f"max rel err {worst:.2e} (Jt = r_i r_j J_ij)"


def check_dopo_equivalence(rng, states=100, n=4):
    """Quadrature and complex DOPO drifts agree; the rescaled drift is the SL drift."""
    errs = []
    for _ in range(states):
        dp = DopoParams(p0=rng.uniform(0.5, 3), gamma_s=rng.uniform(0.2, 5),
                        alpha_nl=rng.uniform(0.5, 2))
        c, s = rng.normal(size=n), rng.normal(size=n)
        dc, ds = dopo_rhs(c, s, dp.p0)
        z = c + 1j * s
        errs.append(rel_err(dc + 1j * ds, dopo_complex_rhs(z, dp.p0)))
        m = dopo_to_sl_params(dp)
        params = OscillatorParams.uniform(n, *(float(np.ravel(v)[0]) for v in
                                              (m.params.mu, m.params.alpha, m.params.kappa)))
        zero = CouplingSet(J=np.zeros((n, n)), G=np.zeros((n, n)))
        a = m.amplitude_scale * z
        want = m.amplitude_scale * m.time_scale * dopo_complex_rhs(z, dp.p0)
        errs.append(rel_err(sl_rhs(a, params, zero), want))
    worst = _worst(errs)
    return worst <= DOPO_RTOL, f"max rel err {worst:.2e}"


def check_frame_map(rng, states=100, sizes=SIZES):
    """Lab-frame drift is the equal-split rotating drift minus the carrier."""
    errs = []
    for n in sizes:
        for _ in range(states):
            W, K, t = random_symmetric(rng, n), rng.uniform(0.1, 2), rng.uniform(0, 20)
            phi = rng.uniform(0, 2 * np.pi, n)
            want = poim_phase_rhs(t + phi, 0.0, K, W / 2, W / 2) - 1.0
            errs.append(rel_err(stationary_rhs(phi, t, K, W), want))
    worst = _worst(errs)
    return worst <= IDENTITY_RTOL * 100, f"max rel err {worst:.2e}"


def check_binary_fixed_points(rng, configs=100, n=10):
    """Binary phases are fixed points of the rotating-frame phase models."""
    worst = 0.0
    for _ in range(configs):
        J, Ks, K = random_symmetric(rng, n), rng.uniform(0, 2), rng.uniform(0.1, 2)
        th = np.where(rng.choice([-1, 1], n) > 0, 0.0, np.pi)
        worst = max(worst, float(np.max(np.abs(poim_phase_rhs(th, Ks, K, J, J)))),
                    float(np.max(np.abs(oim_rhs(th, Ks, K, J)))))
    return worst <= 1e-12, f"max |drift| {worst:.2e}"


def check_symmetry_guard(rng, n=4):
    J = random_symmetric(rng, n)
    J[0, 1] += 0.5
    try:
        CouplingSet(J=J, G=np.zeros((n, n)))
    except SymmetryError as exc:
        return True, f"rejected: {exc}"
    return False, "asymmetric J was accepted"


CHECKS = {
    "sl gradient identity": check_sl_gradient,
    "phase gradient identity": check_phase_gradient,
    "stationary gradient identity": check_stationary_gradient,
    "conjugate trig identity": check_trig_identity,
    "phase energy Ising mapping": check_phase_ising_mapping,
    "heterogeneous Ising mapping": check_ah_ising_mapping,
    "dopo equivalence": check_dopo_equivalence,
    "frame map": check_frame_map,
    "binary fixed points": check_binary_fixed_points,
    "symmetry guard": check_symmetry_guard,
}


def run_suite(seed: int = 0, checks=None) -> list[PropertyResult]:
    out = []
    for name, fn in (checks or CHECKS).items():
        rng = np.random.default_rng([seed, len(out)])
        start = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crash is a failed property, not a crashed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(PropertyResult(name, bool(ok), detail, time.perf_counter() - start))
    return out
