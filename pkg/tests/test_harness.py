import math

import numpy as np
import pytest

from uavcache import channel, dpt2, harness, lyapunov, qoe
from uavcache.cli import main as cli_main
from uavcache.config import load_config_file, make_config
from uavcache.harness import (average_metrics, metrics, rng_streams, run,
                              run_benchmark, run_experiment, run_f2e2cp,
                              user_mobility_step)
from uavcache.lyapunov import FleetState, VirtualQueues


def small_cfg(**kw):
    base = dict(n_users=6, n_uavs=2, slots=4, reps=1, seed=5)
    base.update(kw)
    return make_config(**base)


def test_mobility_zero_speed():
    cfg = small_cfg(user_speed=0.0)
    rng = np.random.default_rng(0)
    users = harness.init_users(cfg, rng)
    out = user_mobility_step(users, cfg, rng)
    assert np.array_equal(out.pos, users.pos)


def test_mobility_displacement_cap_and_containment():
    cfg = small_cfg(user_speed=1.5)
    rng = np.random.default_rng(1)
    users = harness.init_users(cfg, rng)
    cap = cfg.user_speed * cfg.qoe().delta_t
    for _ in range(2000):
        nxt = user_mobility_step(users, cfg, rng)
        step = np.linalg.norm(nxt.pos - users.pos, axis=1)
        assert np.all(step <= cap + 1e-9)
        assert np.all(nxt.pos >= 0.0)
        assert np.all(nxt.pos[:, 0] <= cfg.area_w)
        assert np.all(nxt.pos[:, 1] <= cfg.area_h)
        users = nxt


def test_streams_are_stable():
    a = rng_streams(9, 0)
    b = rng_streams(9, 0)
    assert a[0].uniform() == b[0].uniform()
    c = rng_streams(9, 1)
    assert a[1].uniform() != c[1].uniform()


def test_run_deterministic():
    cfg = small_cfg(slots=3)
    t1 = run_f2e2cp(cfg, seed=5)
    t2 = run_f2e2cp(cfg, seed=5)
    for field in ("X", "P", "u", "user_pos", "sq", "sz", "sh", "assigned"):
        assert np.array_equal(getattr(t1, field), getattr(t2, field)), field


def test_single_slot_matches_hand_stepped_pipeline():
    cfg = make_config(n_users=2, n_uavs=1, slots=1, reps=1, seed=13)
    trace = run_f2e2cp(cfg, seed=13)

    # replay the slot with direct module calls and the same streams
    radio, qoe_p, lyap = cfg.radio(), cfg.qoe(), cfg.lyapunov()
    streams = rng_streams(13, 0)
    qs = VirtualQueues.initial(2, 1, streams[harness.STREAM_QUEUES])
    X_prev = harness.deploy_uavs(cfg, streams[harness.STREAM_DEPLOY])
    users = harness.init_users(cfg, streams[harness.STREAM_USERS])
    P_prev = streams[harness.STREAM_POWERS].uniform(cfg.p_min_mw, cfg.p_max_mw, 1)

    gamma = lyapunov.aut_solve(qs.Z, lyap.V, qoe_p.u_dl_max)
    fleet = FleetState(X_prev, P_prev, users.pos)
    B = lyapunov.cpt_place(qs.Q, fleet, radio, qoe_p, cfg.e_max_m)
    c_th = lyapunov.required_rates(B, fleet, qoe_p, cfg.e_max_m)
    dec = dpt2.algorithm1(qs, B, gamma, X_prev, P_prev, users.pos, c_th, cfg)
    u = channel.achievable_rates(dec.X, users.pos, dec.S, dec.P, radio)

    assert np.array_equal(trace.X[0], dec.X)
    assert np.array_equal(trace.P[0], dec.P)
    assert np.array_equal(trace.u[0], u)
    assert np.array_equal(trace.user_pos[0], users.pos)
    sq, sz, sh = lyapunov.stability_metrics(qs, 1)
    assert trace.sq[0] == sq and trace.sz[0] == sz and trace.sh[0] == sh


def test_supc_uses_max_power():
    cfg = small_cfg(algo="supc", slots=3)
    tr = run(cfg, seed=5)
    assert np.all(tr.P == cfg.p_max_mw)


def test_static_benchmarks_do_not_move():
    for algo in ("suwpc", "supc"):
        tr = run_benchmark(small_cfg(slots=3), seed=5, algo=algo)
        assert np.allclose(tr.X[0], tr.X[1])
        assert np.allclose(tr.X[1], tr.X[2])


def test_circular_benchmarks_stay_on_circles():
    cfg = small_cfg(algo="ctjo", slots=5, n_uavs=3)
    centers, radius = harness.circle_layout(cfg)
    tr = run(cfg, seed=5)
    for t in range(5):
        resid = np.abs(np.linalg.norm(tr.X[t] - centers, axis=1) - radius)
        assert np.all(resid <= 1e-9)
    # consecutive positions obey the movement bound at 10 m/s
    for t in range(1, 5):
        hop = np.linalg.norm(tr.X[t] - tr.X[t - 1], axis=1)
        assert np.all(hop <= 10.0 * cfg.qoe().delta_t + 1e-9)


def test_ctwuc_never_caches():
    cfg = small_cfg(algo="ctwuc", slots=2)
    # with no placement every requirement is the backhaul one
    B = np.zeros((cfg.n_uavs, cfg.n_users), dtype=np.int8)
    fleet = FleetState(np.zeros((2, 2)), np.zeros(2),
                       np.zeros((cfg.n_users, 2)))
    c = lyapunov.required_rates(B, fleet, cfg.qoe(), cfg.e_max_m)
    assert np.all(c == pytest.approx(qoe.required_rate(False, cfg.qoe())))
    run(cfg, seed=5)     # the run itself completes


def test_per_slot_feasibility_from_trace():
    cfg = small_cfg(slots=6, n_users=8, n_uavs=3, seed=2)
    tr = run_f2e2cp(cfg, seed=2)
    radius = channel.los_coverage_radius(cfg.radio())
    for t in range(cfg.slots):
        P = tr.P[t]
        assert np.all(P >= cfg.p_min_mw - 1e-9)
        assert np.all(P + cfg.p_circuit_mw <= cfg.p_hat_mw + 1e-9)
        X = tr.X[t]
        for j in range(3):
            for k in range(j + 1, 3):
                assert np.linalg.norm(X[j] - X[k]) >= cfg.d_min_m - 1e-6
        if t > 0:
            hop = np.linalg.norm(tr.X[t] - tr.X[t - 1], axis=1)
            assert np.all(hop <= cfg.e_max_m + 1e-6)
        served = tr.u[t] > 0
        # every served user's rate came from a UAV inside the coverage disc
        for i in np.flatnonzero(served):
            dmin = np.linalg.norm(X - tr.user_pos[t, i], axis=1).min()
            assert dmin <= radius + 1e-6


def test_metrics_jain_extremes():
    cfg = small_cfg(slots=2, n_users=4, n_uavs=2)
    tr = harness._empty_trace(cfg, "f2e2cp", 0)
    tr.u[:] = 1.5
    m = metrics(tr, cfg)
    assert m["jain"] == pytest.approx(1.0)
    tr.u[:] = 0.0
    tr.u[:, 0] = 2.0
    m = metrics(tr, cfg)
    assert m["jain"] == pytest.approx(1.0 / 4.0)


def test_metrics_match_reevaluation():
    cfg = small_cfg(slots=5, n_users=5, n_uavs=2, seed=3)
    tr = run_f2e2cp(cfg, seed=3)
    m = metrics(tr, cfg)
    ubar = tr.u.mean(axis=0)
    profit = sum(math.log2(1 + v) for v in ubar)
    power = float((tr.P + cfg.p_circuit_mw).mean(axis=0).sum())
    assert m["profit"] == pytest.approx(profit, rel=1e-12)
    assert m["total_power_mw"] == pytest.approx(power, rel=1e-12)
    assert m["energy_eff"] == pytest.approx(profit - cfg.rho * power, rel=1e-12)
    jain = ubar.sum() ** 2 / (5 * (ubar ** 2).sum())
    assert m["jain"] == pytest.approx(jain, rel=1e-12)


def test_average_metrics_identity():
    rows = [{"algo": "x", "profit": 2.0, "jain": 0.5},
            {"algo": "x", "profit": 2.0, "jain": 0.5}]
    avg = average_metrics(rows)
    assert avg["profit"] == 2.0 and avg["jain"] == 0.5
    assert average_metrics(rows[:1]) == rows[0]


def test_run_experiment_writes_outputs(tmp_path):
    cfg = small_cfg(slots=2, reps=2)
    out = tmp_path / "res"
    summary = run_experiment(cfg, out_dir=str(out), plots=True)
    trace_csv = (out / "trace.csv").read_text().splitlines()
    assert trace_csv[0] == "t,rep,algo,kind,id,x,y,p_mw,u_bpshz,sq,sz,sh"
    # T slots x (J + N) rows x reps
    assert len(trace_csv) == 1 + 2 * (2 + 6) * 2
    summary_csv = (out / "summary.csv").read_text().splitlines()
    assert summary_csv[0] == ("algo,reps,profit,total_power_mw,energy_eff,"
                              "jain,epaoi_theory_s,epaoi_empirical_s")
    assert summary_csv[1].startswith("f2e2cp,2,")
    assert summary["reps"] == 2
    for fig in ("stability.png", "trajectories.png", "power_rate.png"):
        assert (out / fig).exists()


def test_config_file_roundtrip(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("n_users = 7\nrho = 0.25   # comment\nalgo = supc\n")
    overrides = load_config_file(str(path))
    assert overrides == {"n_users": 7, "rho": 0.25, "algo": "supc"}
    path.write_text("bogus_key = 3\n")
    with pytest.raises(ValueError):
        load_config_file(str(path))


def test_cli_runs_and_overrides(tmp_path, capsys):
    cfgfile = tmp_path / "exp.cfg"
    cfgfile.write_text("slots = 2\nreps = 1\nn_users = 4\nn_uavs = 2\n")
    out = tmp_path / "out"
    rc = cli_main(["--config", str(cfgfile), "--algo", "supc", "--seed", "3",
                   "--out", str(out), "--no-plots"])
    assert rc == 0
    assert (out / "trace.csv").exists()
    assert "algo=supc" in capsys.readouterr().out
    assert not (out / "stability.png").exists()


def test_cli_rejects_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert cli_main(["--config", str(bad), "--no-plots"]) == 2


def test_validate_rejects_unknown_algo():
    with pytest.raises(ValueError):
        make_config(algo="nope")
