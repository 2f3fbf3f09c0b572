import csv
import io
import json

import numpy as np
import pytest

from oscim.experiment import (
    FIG1_TABLE,
    ExperimentConfig,
    derive_seed,
    fig1_row,
    frame_demo_instance,
    model_setup,
    run_experiment,
    run_fig1,
    run_fig2,
    run_frame_demo,
    run_oracle_small,
)
from oscim.graph import IsingInstance, cut_value, generate_er_graph, ising_energy


def rows_of(csv_text):
    lines = csv_text.splitlines()
    assert lines[0].startswith("# config: ")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def k3():
    return IsingInstance.from_edges(3, [(0, 1, -1), (0, 2, -1), (1, 2, -1)])


# --- configuration and seeds -----------------------------------------------

def test_derive_seed():
    assert derive_seed(0, 1, 50, 3) == derive_seed(0, 1, 50, 3)
    seeds = {derive_seed(m, a, b) for m in range(3) for a in range(3) for b in range(3)}
    assert len(seeds) == 27


def test_fig1_table_lookup():
    assert fig1_row(50) == FIG1_TABLE[50] == (2.0, 10.0, 0.05)
    assert fig1_row(100) == (3.0, 10.0, 0.08)
    assert fig1_row(150) == (4.0, 15.0, 0.15)
    assert fig1_row(12) == FIG1_TABLE[50]
    assert fig1_row(140) == FIG1_TABLE[150]


def test_preset_overrides():
    cfg = ExperimentConfig.from_preset("fig2", trials_per_instance=5, noise=None)
    assert cfg.trials_per_instance == 5 and cfg.noise == 0.05
    assert ExperimentConfig.from_preset("fig2-kn").noise == 0.08
    fig1 = ExperimentConfig.from_preset("fig1")
    assert fig1.sizes == (50, 100, 150) and fig1.instances_per_size == 25
    assert fig1.trials_per_instance == 10 and fig1.models == ("oim", "poim-phase")
    with pytest.raises(ValueError):
        ExperimentConfig.from_preset("fig9")
    with pytest.raises(ValueError):
        ExperimentConfig.from_preset("fig1", colour="red")
    with pytest.raises(ValueError):
        ExperimentConfig.from_preset("fig1", trials_per_instance=0)
    echo = ExperimentConfig.from_preset("fig1", out_dir="/tmp/x", jobs=4).echo()
    assert "out_dir" not in echo and "jobs" not in echo and echo["preset"] == "fig1"


def test_model_setup_conventions():
    inst = generate_er_graph(6, 0.5, 1)
    cfg = ExperimentConfig.from_preset("fig1")
    _, c, sched = model_setup("oim", inst, cfg, 10.0, 3.0)
    assert np.array_equal(c.J, inst.weights) and not c.G.any() and c.xi == 1.0
    assert sched["Ks"](10.0) == 3.5 and sched["Ks"](0.0) == 0.5
    _, c, sched = model_setup("poim-phase", inst, cfg, 10.0, 3.0)
    assert np.array_equal(c.J, inst.weights) and np.array_equal(c.G, inst.weights)
    assert sched["K"](5.0) == 2.0 and sched["Ks"](5.0) == 0.0
    _, c, _ = model_setup("stationary", inst, cfg, 10.0)
    assert np.array_equal(c.effective, inst.weights)
    with pytest.raises(ValueError):
        model_setup("dopo", inst, cfg, 10.0)


# --- fig1 ------------------------------------------------------------------

def test_fig1_small_table(tmp_path):
    cfg = ExperimentConfig.from_preset("fig1", sizes=(12,), instances_per_size=3,
                                       trials_per_instance=3, out_dir=str(tmp_path))
    out = run_fig1(cfg)
    rows = rows_of(out["csv"])
    assert len(rows) == 3 * 3 * 2
    for r, row in zip(out["results"], rows):
        inst = generate_er_graph(12, 0.5, derive_seed(0, 0, 12, int(r.instance_id.split("-")[1])))
        assert r.cut == cut_value(inst, r.spins) == int(row["cut"])
        assert r.ising_energy == ising_energy(inst.weights, r.spins)
        assert r.ah is None and row["ah"] == ""
    s = out["summary"]
    assert len(s["pairs"]) == 3 and 0 <= s["parity_fraction_within_5pct"] <= 1
    for pair in s["pairs"]:
        assert pair["oim"] == max(r.cut for r in out["results"]
                                  if r.instance_id == pair["instance"] and r.model == "oim")
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["sizes"] == [12] and summary["master_seed"] == 0
    assert (tmp_path / "results.csv").read_text() == out["csv"]


def test_trial_seeds_are_shared_across_models():
    cfg = ExperimentConfig.from_preset("fig1", sizes=(10,), instances_per_size=1,
                                       trials_per_instance=2, t_stop=0.5)
    out = run_fig1(cfg)
    by_model = {m: [r.seed for r in out["results"] if r.model == m] for m in cfg.models}
    assert by_model["oim"] == by_model["poim-phase"]


def test_best_of_k_is_monotone_and_prefix_stable():
    base = dict(sizes=(10,), instances_per_size=1, t_stop=3.0, models=("oim",))
    short = run_fig1(ExperimentConfig.from_preset("fig1", trials_per_instance=3, **base))
    long = run_fig1(ExperimentConfig.from_preset("fig1", trials_per_instance=6, **base))
    assert [r.cut for r in short["results"]] == [r.cut for r in long["results"][:3]]
    best = np.maximum.accumulate([r.cut for r in long["results"]])
    assert np.all(np.diff(best) >= 0)


# --- fig2 ------------------------------------------------------------------

def test_fig2_small_run():
    cfg = ExperimentConfig.from_preset("fig2", sizes=(20,), degree=3, trials_per_instance=12,
                                       t_stop=4.0)
    out = run_fig2(cfg)
    rows = rows_of(out["csv"])
    assert len(rows) == 12
    ah = np.array([float(r["ah"]) for r in rows])
    e = np.array([float(r["ising_energy"]) for r in rows])
    running = np.array([float(r["running_lowest_energy"]) for r in rows])
    order = np.argsort(ah, kind="stable")
    assert np.array_equal(running[order], np.minimum.accumulate(e[order]))
    assert np.all(ah > 0)
    s = out["summary"]
    assert -1 <= s["spearman_rho"] <= 1 and len(s["ah_quintiles"]) == 5
    assert s["instance"]["kind"] == "regular(3)"


def test_fig2_without_dispersion_has_tiny_heterogeneity():
    # Expected to fail: frustrated local fields and unfinished pump locking leave
    # ah near 0.1 even with uniform gains (see notes/decisions.md).
    cfg = ExperimentConfig.from_preset("fig2", sizes=(20,), degree=3, trials_per_instance=5,
                                       dispersion=0.0)
    ah = [r.ah for r in run_fig2(cfg)["results"]]
    assert max(ah) < 0.01


# --- frame demo ------------------------------------------------------------

def test_frame_demo_instance():
    inst = frame_demo_instance()
    assert inst.n == 15 and inst.num_edges == 58
    degree = np.count_nonzero(inst.weights, axis=1)
    assert np.count_nonzero(degree % 2 == 0) == 1
    assert frame_demo_instance().to_json() == inst.to_json()


def test_frame_demo_short_run(tmp_path):
    cfg = ExperimentConfig.from_preset("frame_demo", t_stop=2.0, trials_per_instance=2,
                                       out_dir=str(tmp_path))
    out = run_frame_demo(cfg)
    s = out["summary"]
    assert s["max_frame_residual"] < 1e-6 and s["max_frame_residual_over_trials"] < 1e-6
    assert s["rotating_obs_amplitude_tail"] == pytest.approx(1.0, abs=1e-3)
    lines = (tmp_path / "traces.csv").read_text().splitlines()
    assert lines[0].startswith("# config: ")
    header = lines[1].split(",")
    assert header[0] == "t" and header[-1] == "frame_residual"
    assert sum(h.startswith("st_obs_") for h in header) == 15
    assert len(rows_of(out["csv"])) == 2 * 2


# --- oracle study ----------------------------------------------------------

def test_oracle_small_trivial_instances():
    cfg = ExperimentConfig.from_preset("oracle_small", sizes=(5,), trials_per_instance=10,
                                       t_stop=10.0)
    empty = IsingInstance(5, np.zeros((5, 5)))
    out = run_oracle_small(cfg, instances=[empty, k3()])
    assert out["summary"]["optimum"] == {"small5-0": 0, "small3-1": 2}
    for model, row in out["summary"]["models"].items():
        assert row["success_rate"] == 1.0, model
        assert row["mean_approximation_ratio"] == 1.0


def test_oracle_small_limits():
    with pytest.raises(ValueError):
        run_oracle_small(ExperimentConfig.from_preset("oracle_small", sizes=(17,)))


def test_oracle_small_table_and_determinism(tmp_path):
    cfg = ExperimentConfig.from_preset("oracle_small", sizes=(8,), instances_per_size=2,
                                       trials_per_instance=2, t_stop=2.0)
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert a["csv"] == b["csv"]
    parallel = run_experiment(ExperimentConfig.from_preset(
        "oracle_small", sizes=(8,), instances_per_size=2, trials_per_instance=2, t_stop=2.0,
        jobs=2))
    assert parallel["csv"] == a["csv"]
    assert set(a["summary"]["models"]) == {"sl", "ampphase", "poim-phase", "oim", "stationary"}
    for r in a["results"]:
        assert (r.ah is not None) == (r.model in ("sl", "ampphase"))
