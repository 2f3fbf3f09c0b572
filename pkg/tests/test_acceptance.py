"""Acceptance criteria with their tolerances pinned.

Each test carries ``@pytest.mark.criterion(number, name)``; conftest prints one
PASS/FAIL line per criterion in the terminal summary.
"""

import csv
import io
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from oscim.cli import main
from oscim.energy import (
    energy_ah,
    energy_complex,
    energy_phase,
    real_grad_fd,
    wirtinger_grad_fd,
)
from oscim.experiment import ExperimentConfig, run_fig1, run_frame_demo, run_oracle_small
from oscim.graph import generate_er_graph
from oscim.integrate import IntegratorConfig, NoiseConfig, integrate_trial
from oscim.model import (
    CouplingSet,
    DopoParams,
    OscillatorParams,
    dopo_complex_rhs,
    dopo_to_sl_params,
    oim_rhs,
    poim_phase_rhs,
    sl_rhs,
    split_couplings,
)

RK4 = "rk4_deterministic"

GRAD_RTOL = 1e-6
GRAD_STATES = 100
GRAD_SIZES = (2, 4, 10)
GRAD_SECONDS = 10.0

MAPPING_RTOL = 1e-12
MAPPING_CONFIGS = 100
MAPPING_SECONDS = 1.0

DESCENT_ATOL = 1e-8
DESCENT_N = 20
DESCENT_DT = 1e-3
DESCENT_T = 20.0
DESCENT_SECONDS = 30.0

DOPO_RTOL = 1e-8
DOPO_AMPLITUDE_ATOL = 1e-3
DOPO_PUMPS = (1.5, 2.0, 3.0)
DOPO_SECONDS = 5.0

FRAME_ATOL = 1e-3
SETTLE_ATOL = 1e-2
FRAME_SECONDS = 10.0

ORACLE_SUCCESS = 0.90
PARITY_GAP = 0.05
PARITY_FRACTION = 0.80
ORACLE_SECONDS = 300.0

SPEARMAN_P = 0.05
FIG2_ROWS = 100
FIG2_SECONDS = 300.0


def rel_err(got, want):
    got, want = np.asarray(got), np.asarray(want)
    return float(np.max(np.abs(got - want)) / max(np.max(np.abs(want)), 1e-300))


def symmetric(rng, n):
    m = rng.normal(size=(n, n))
    m = m + m.T
    np.fill_diagonal(m, 0.0)
    return m


def csv_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


# --- 1 ---------------------------------------------------------------------

@pytest.mark.criterion(1, "gradient identities")
def test_gradient_identities(record_property):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    sl_err, phase_err, count = 0.0, 0.0, 0
    for n in GRAD_SIZES:
        for _ in range(GRAD_STATES):
            params = OscillatorParams(mu=rng.uniform(-1, 1, n), alpha=rng.uniform(0.5, 2, n),
                                      kappa=rng.uniform(0, 1, n), phi_p=rng.uniform(0, 2 * np.pi))
            coupling = CouplingSet(J=symmetric(rng, n), G=symmetric(rng, n),
                                   xi=rng.uniform(0.1, 2))
            a = rng.normal(size=n) + 1j * rng.normal(size=n)
            fd = wirtinger_grad_fd(lambda x: energy_complex(x, params, coupling).total, a)
            sl_err = max(sl_err, rel_err(sl_rhs(a, params, coupling), -fd))

            J, G, Ks, K = coupling.J, coupling.G, rng.uniform(0, 2), rng.uniform(0.1, 2)
            th = rng.uniform(0, 2 * np.pi, n)
            fd = real_grad_fd(lambda x: energy_phase(x, Ks, K, J, G), th)
            phase_err = max(phase_err, rel_err(poim_phase_rhs(th, Ks, K, J, G), -fd))
            fd = real_grad_fd(lambda x: energy_phase(x, Ks, K, J, np.zeros_like(J)), th)
            phase_err = max(phase_err, rel_err(oim_rhs(th, Ks, K, J), -fd))
            count += 1
    seconds = time.perf_counter() - start
    record_property("detail", f"{count} states, sl rel err {sl_err:.1e}, phase rel err "
                              f"{phase_err:.1e} (tol {GRAD_RTOL:g}), {seconds:.1f} s")
    assert sl_err <= GRAD_RTOL and phase_err <= GRAD_RTOL
    assert seconds < GRAD_SECONDS


# --- 2 ---------------------------------------------------------------------

def pair_sum(w, s):
    n = len(s)
    return sum(w[i][j] * s[i] * s[j] for i in range(n) for j in range(n) if i != j)


@pytest.mark.criterion(2, "exact Ising mappings")
def test_exact_ising_mappings(record_property):
    rng = np.random.default_rng(2)
    n = 10
    start = time.perf_counter()
    phase_err, ah_err = 0.0, 0.0
    for _ in range(MAPPING_CONFIGS):
        J, Ks, K = symmetric(rng, n), rng.uniform(0, 2), rng.uniform(0.1, 2)
        s = rng.choice([-1, 1], n)
        theta = np.where(s > 0, 0.0, np.pi)
        # binary phases: constant -N Ks / 2 plus K times the pair sum
        want = -n * Ks / 2 - K * pair_sum(J, s)
        phase_err = max(phase_err, rel_err(energy_phase(theta, Ks, K, J), want))
        r = rng.uniform(0.2, 2.0, n)
        jt = r[:, None] * r[None, :] * J
        want = -(K / 2) * pair_sum(jt, s) - (Ks / 2) * np.sum(r**2)
        ah_err = max(ah_err, rel_err(energy_ah(r, theta, Ks, K, J), want))
    seconds = time.perf_counter() - start
    record_property("detail", f"phase rel err {phase_err:.1e}, weighted rel err {ah_err:.1e} "
                              f"(tol {MAPPING_RTOL:g}), {seconds:.2f} s")
    assert phase_err <= MAPPING_RTOL and ah_err <= MAPPING_RTOL
    assert seconds < MAPPING_SECONDS


# --- 3 ---------------------------------------------------------------------

def descent_setup(model, inst):
    n = inst.n
    if model == "sl":
        return OscillatorParams.uniform(n, 0.6, 1.0, 0.05), split_couplings(inst, 0.5, 0.5)
    params = OscillatorParams.uniform(n, 0.6, 1.0, 0.5)
    return params, split_couplings(inst, 1.0 if model == "oim" else 0.5, 1.0)


@pytest.mark.criterion(3, "energy descent")
def test_energy_descent(record_property):
    start = time.perf_counter()
    worst, notes = -np.inf, []
    for k, model in enumerate(("sl", "poim-phase", "oim", "stationary")):
        inst = generate_er_graph(DESCENT_N, 0.5, 100 + k)
        params, coupling = descent_setup(model, inst)
        tr = integrate_trial(model, params, coupling, noise=NoiseConfig(0.0, k),
                             config=IntegratorConfig(DESCENT_DT, DESCENT_T, RK4, record_every=1))
        e = tr.energies
        rise = np.diff(e) - DESCENT_ATOL * np.maximum(1.0, np.abs(e[:-1]))
        worst = max(worst, float(rise.max()))
        notes.append(f"{model} {e[0]:.2f}->{e[-1]:.2f}")
        assert len(e) == round(DESCENT_T / DESCENT_DT) + 1
    seconds = time.perf_counter() - start
    record_property("detail", f"{', '.join(notes)}; worst step excess {worst:.1e}, {seconds:.1f} s")
    assert worst <= 0.0
    assert seconds < DESCENT_SECONDS


# --- 4 ---------------------------------------------------------------------

def rk4_complex(z, p0, h, steps):
    f = lambda z: dopo_complex_rhs(z, p0)  # noqa: E731
    for _ in range(steps):
        k1 = f(z)
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z = z + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return z


@pytest.mark.criterion(4, "DOPO reduction")
def test_dopo_reduction(record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    h, steps = 1e-2, 2000
    form_err, amp_err = 0.0, 0.0
    for p0 in DOPO_PUMPS:
        z0 = rng.normal(0, 0.1, 4) + 1j * rng.normal(0, 0.1, 4)
        quad = integrate_trial("dopo", DopoParams(p0=p0), None,
                               config=IntegratorConfig(h, h * steps, RK4),
                               initial_state=np.stack([z0.real, z0.imag]))
        zq = quad.final_state[0] + 1j * quad.final_state[1]
        form_err = max(form_err, rel_err(zq, rk4_complex(z0, p0, h, steps)))

        m = dopo_to_sl_params(DopoParams(p0=p0, gamma_s=2.0, alpha_nl=0.5))
        mu, alpha, kappa = (float(np.ravel(v)[0]) for v in
                            (m.params.mu, m.params.alpha, m.params.kappa))
        fixed_point = np.sqrt((mu + kappa) / alpha)
        # dimensionless steady amplitude mapped back into the oscillator frame
        r_star = m.amplitude_scale * np.abs(zq)
        amp_err = max(amp_err, float(np.max(np.abs(r_star - fixed_point))))
        # and the mapped oscillator integrated directly over the same span
        sl = integrate_trial("sl", m.params, CouplingSet(J=np.zeros((1, 1)), G=np.zeros((1, 1))),
                             config=IntegratorConfig(h / m.time_scale, h * steps / m.time_scale,
                                                     RK4),
                             initial_state=m.amplitude_scale * z0[:1])
        amp_err = max(amp_err, abs(abs(sl.final_state[0]) - fixed_point))
    seconds = time.perf_counter() - start
    record_property("detail", f"form rel err {form_err:.1e} (tol {DOPO_RTOL:g}), steady "
                              f"amplitude err {amp_err:.1e} (tol {DOPO_AMPLITUDE_ATOL:g}), "
                              f"{seconds:.1f} s")
    assert form_err <= DOPO_RTOL
    assert amp_err <= DOPO_AMPLITUDE_ATOL
    assert seconds < DOPO_SECONDS


# --- 5 ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def frame_demo(tmp_path_factory):
    cfg = ExperimentConfig.from_preset("frame_demo", out_dir=str(tmp_path_factory.mktemp("frame")))
    start = time.perf_counter()
    out = run_frame_demo(cfg)
    return out["summary"], time.perf_counter() - start


@pytest.mark.criterion("5a", "frame equivalence")
def test_frame_equivalence(frame_demo, record_property):
    s, seconds = frame_demo
    record_property("detail", f"max |theta - t - phi| {s['max_frame_residual_over_trials']:.1e} "
                              f"(tol {FRAME_ATOL:g}), {seconds:.1f} s")
    assert s["max_frame_residual_over_trials"] <= FRAME_ATOL
    assert seconds < FRAME_SECONDS


@pytest.mark.criterion("5b", "stationary observable settles to +-1")
def test_stationary_observable_settles(frame_demo, record_property):
    # Known failure, analysed in notes/decisions.md: with no second-harmonic term a
    # node whose local field vanishes in the settled pattern is neutrally stable.
    s, seconds = frame_demo
    record_property("detail", f"max deviation {s['max_settle_deviation']:.2e} (tol "
                              f"{SETTLE_ATOL:g}), {s['settled_nodes']}/15 nodes settled")
    assert s["max_settle_deviation"] <= SETTLE_ATOL
    assert seconds < FRAME_SECONDS


# --- 6 ---------------------------------------------------------------------

@pytest.mark.criterion("6a", "oracle optimality at n=12")
def test_oracle_optimality(record_property):
    # oim sits on the threshold at this seed (85-95% across master seeds 0-3);
    # see notes/decisions.md.
    cfg = ExperimentConfig.from_preset("oracle_small", models=("oim", "poim-phase"))
    assert cfg.sizes == (12,) and cfg.instances_per_size == 20 and cfg.trials_per_instance == 10
    start = time.perf_counter()
    table = run_oracle_small(cfg)["summary"]["models"]
    seconds = time.perf_counter() - start
    rates = {m: table[m]["success_rate"] for m in cfg.models}
    record_property("detail", ", ".join(f"{m} {r:.0%}" for m, r in rates.items())
                    + f" (need {ORACLE_SUCCESS:.0%}), {seconds:.0f} s")
    assert all(r >= ORACLE_SUCCESS for r in rates.values())
    assert seconds < ORACLE_SECONDS


@pytest.mark.criterion("6b", "OIM/PoIM near-parity at n=50")
def test_near_parity(record_property):
    cfg = ExperimentConfig.from_preset("fig1", sizes=(50,))
    start = time.perf_counter()
    out = run_fig1(cfg)
    seconds = time.perf_counter() - start
    assert len(out["results"]) == 25 * 10 * 2
    gaps = np.array(out["summary"]["relative_gap"])
    fraction = float(np.mean(gaps <= PARITY_GAP))
    record_property("detail", f"{fraction:.0%} of instances within {PARITY_GAP:.0%} (need "
                              f"{PARITY_FRACTION:.0%}), {len(out['results'])} trials, "
                              f"{seconds:.0f} s")
    assert fraction >= PARITY_FRACTION
    assert seconds < ORACLE_SECONDS


# --- 7 and 8 ---------------------------------------------------------------

@pytest.fixture(scope="module")
def fig2_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("fig2")
    times = []
    for name in ("a", "b"):
        start = time.perf_counter()
        assert main(["-q", "experiment", "fig2", "--out", str(root / name)]) == 0
        times.append(time.perf_counter() - start)
    return root / "a", root / "b", times


@pytest.mark.criterion(7, "amplitude-heterogeneity trend")
def test_heterogeneity_trend(fig2_runs, record_property):
    path, _, times = fig2_runs
    rows = csv_rows(path / "results.csv")
    ah = [float(r["ah"]) for r in rows]
    energy = [float(r["ising_energy"]) for r in rows]
    rho, p = spearmanr(ah, energy)
    record_property("detail", f"{len(rows)} trials, Spearman rho {rho:.3f}, p {p:.1e} "
                              f"(need rho > 0, p < {SPEARMAN_P}), {times[0]:.0f} s")
    assert len(rows) == FIG2_ROWS
    assert rho > 0 and p < SPEARMAN_P
    assert times[0] < FIG2_SECONDS


@pytest.mark.criterion(8, "determinism")
def test_rerun_is_byte_identical(fig2_runs, tmp_path, record_property):
    a, b, _ = fig2_runs
    same = [(a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()]
    # a second preset, run serially and in parallel
    for jobs, name in ((1, "s"), (2, "p"), (2, "q")):
        assert main(["-q", "experiment", "oracle_small", "--n", "8", "--instances", "3",
                     "--trials", "2", "--tstop", "3", "--jobs", str(jobs),
                     "--out", str(tmp_path / name)]) == 0
    ref = (tmp_path / "s" / "results.csv").read_bytes()
    same += [(tmp_path / name / "results.csv").read_bytes() == ref for name in ("p", "q")]
    record_property("detail", f"{sum(same)}/{len(same)} reruns byte-identical (fig2, "
                              "oracle_small serial and parallel)")
    assert all(same)
