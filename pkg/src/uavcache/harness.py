"""Batch simulator: the outer per-slot loop, five benchmark strategies,
user mobility, run metrics, and CSV persistence."""

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import channel, dpt2, lyapunov, paoi
from .config import ExperimentConfig
from .lyapunov import FleetState, VirtualQueues
from .solver import InfeasibleStartError, solve_convex

TRACE_COLUMNS = ("t", "rep", "algo", "kind", "id", "x", "y",
                 "p_mw", "u_bpshz", "sq", "sz", "sh")
SUMMARY_COLUMNS = ("algo", "reps", "profit", "total_power_mw", "energy_eff",
                   "jain", "epaoi_theory_s", "epaoi_empirical_s")

# fixed stream indices so added instrumentation never shifts existing draws
STREAM_QUEUES, STREAM_DEPLOY, STREAM_USERS, STREAM_MOBILITY, \
    STREAM_POWERS, STREAM_DELIVERY = range(6)


def rng_streams(seed: int, rep: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        [int(seed), int(rep), purpose]))) for purpose in range(6)]


@dataclass
class Users:
    pos: np.ndarray       # (N, 2)
    target: np.ndarray    # (N, 2) current waypoint


@dataclass
class RunTrace:
    algo: str
    rep: int
    X: np.ndarray            # (T, J, 2)
    P: np.ndarray            # (T, J) transmit power (mW)
    u: np.ndarray            # (T, N) per-user rate (bps/Hz)
    user_pos: np.ndarray     # (T, N, 2)
    sq: np.ndarray           # (T,)
    sz: np.ndarray
    sh: np.ndarray
    assigned: np.ndarray     # (T,) number of delivered files
    converged: np.ndarray    # (T,) solver-clean flags
    sca_iters: np.ndarray    # (T,)
    objective_traces: list = field(default_factory=list)


def deploy_uavs(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniform random deployment re-sampled until pairwise separation holds."""
    for _ in range(100000):
        X = rng.uniform((0.0, 0.0), (cfg.area_w, cfg.area_h), (cfg.n_uavs, 2))
        d = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
        d[np.diag_indices_from(d)] = np.inf
        if d.min() >= cfg.d_min_m:
            return X
    raise RuntimeError("could not deploy UAVs with the required separation")


def init_users(cfg: ExperimentConfig, rng: np.random.Generator) -> Users:
    lo, hi = (0.0, 0.0), (cfg.area_w, cfg.area_h)
    return Users(pos=rng.uniform(lo, hi, (cfg.n_users, 2)),
                 target=rng.uniform(lo, hi, (cfg.n_users, 2)))


def user_mobility_step(users: Users, cfg: ExperimentConfig,
                       rng: np.random.Generator) -> Users:
    """Waypoint walk: head for the target at the configured speed, draw a new
    waypoint on arrival; positions never leave the area."""
    step = cfg.user_speed * cfg.qoe().delta_t
    pos = users.pos.copy()
    target = users.target.copy()
    for i in range(pos.shape[0]):
        delta = target[i] - pos[i]
        dist = float(np.linalg.norm(delta))
        if dist <= step:
            pos[i] = target[i]
            target[i] = rng.uniform((0.0, 0.0), (cfg.area_w, cfg.area_h))
        elif dist > 0:
            pos[i] += delta * (step / dist)
    np.clip(pos[:, 0], 0.0, cfg.area_w, out=pos[:, 0])
    np.clip(pos[:, 1], 0.0, cfg.area_h, out=pos[:, 1])
    return Users(pos=pos, target=target)


def circle_layout(cfg: ExperimentConfig) -> tuple[np.ndarray, float]:
    """Equally spaced circle centers on the mid-height line; one shared
    radius keeps the rotation rigid so UAV separation never changes."""
    J = cfg.n_uavs
    centers = np.column_stack((
        (np.arange(J) + 0.5) * cfg.area_w / J,
        np.full(J, cfg.area_h / 2.0)))
    radius = min(cfg.area_w / (2.0 * J), cfg.area_h / 2.0)
    if J > 1 and cfg.area_w / J < cfg.d_min_m:
        raise ValueError("circle spacing violates the UAV safety distance")
    return centers, radius


def circle_positions(centers: np.ndarray, radius: float, t: int,
                     cfg: ExperimentConfig, speed: float = 10.0) -> np.ndarray:
    angle = speed * cfg.qoe().delta_t * t / radius
    offset = radius * np.array([math.cos(angle), math.sin(angle)])
    return centers + offset


def random_delivery(X: np.ndarray, users: np.ndarray, radio,
                    rng: np.random.Generator) -> np.ndarray:
    """Each UAV picks a uniformly random still-unserved user inside its LoS
    coverage region; UAVs draw in index order."""
    radius = channel.los_coverage_radius(radio)
    n, J = users.shape[0], X.shape[0]
    S = np.zeros((n, J), dtype=np.int8)
    taken: set[int] = set()
    for j in range(J):
        dist = np.linalg.norm(users - X[j], axis=1)
        cands = [i for i in np.flatnonzero(dist <= radius) if i not in taken]
        if not cands:
            continue
        pick = cands[int(rng.integers(len(cands)))]
        S[pick, j] = 1
        taken.add(pick)
    return S


def optimize_power(qs: VirtualQueues, S: np.ndarray, X: np.ndarray,
                   c_th: np.ndarray, users: np.ndarray, P_start: np.ndarray,
                   cfg: ExperimentConfig) -> np.ndarray:
    """Power-only successive approximation at fixed delivery and positions."""
    radio, lyap = cfg.radio(), cfg.lyapunov()
    P_r = P_start.astype(float).copy()
    obj = dpt2.dpt2_objective(qs, S, P_r, X, users, radio, lyap)
    for _ in range(cfg.r_max):
        local = dpt2.ScaLocalPoint(X_r=X, P_r=P_r)
        try:
            floor_ok = dpt2._floor_reachable(S, X, P_r, c_th, users, radio)
            rep = solve_convex(dpt2.build_power_program(
                local, S, X, qs, c_th, users, cfg, qoe_floor=floor_ok))
        except InfeasibleStartError:
            break
        if rep.max_constraint_violation > dpt2.ACCEPT_VIOL:
            break
        P_new = np.clip(rep.point[:P_r.shape[0]], cfg.p_min_mw, cfg.p_max_mw)
        obj_new = dpt2.dpt2_objective(qs, S, P_new, X, users, radio, lyap)
        if obj_new > obj:
            break
        improved = abs(obj - obj_new) > dpt2.SCA_REL_TOL * max(1.0, abs(obj))
        P_r, obj = P_new, obj_new
        if not improved:
            break
    return P_r


def _empty_trace(cfg: ExperimentConfig, algo: str, rep: int) -> RunTrace:
    T, J, N = cfg.slots, cfg.n_uavs, cfg.n_users
    return RunTrace(algo=algo, rep=rep,
                    X=np.zeros((T, J, 2)), P=np.zeros((T, J)),
                    u=np.zeros((T, N)), user_pos=np.zeros((T, N, 2)),
                    sq=np.zeros(T), sz=np.zeros(T), sh=np.zeros(T),
                    assigned=np.zeros(T, dtype=int),
                    converged=np.ones(T, dtype=bool),
                    sca_iters=np.zeros(T, dtype=int))


def _record(trace: RunTrace, t: int, qs: VirtualQueues, X, P, u, users_pos,
            S) -> None:
    idx = t - 1
    trace.X[idx] = X
    trace.P[idx] = P
    trace.u[idx] = u
    trace.user_pos[idx] = users_pos
    trace.sq[idx], trace.sz[idx], trace.sh[idx] = \
        lyapunov.stability_metrics(qs, t)
    trace.assigned[idx] = int(S.sum())


def run_f2e2cp(cfg: ExperimentConfig, seed: int, rep: int = 0) -> RunTrace:
    """Full per-slot pipeline: auxiliary rates, placement, joint delivery,
    trajectory and power optimization, queue update."""
    radio, qoe_p, lyap = cfg.radio(), cfg.qoe(), cfg.lyapunov()
    streams = rng_streams(seed, rep)
    qs = VirtualQueues.initial(cfg.n_users, cfg.n_uavs, streams[STREAM_QUEUES])
    X_prev = deploy_uavs(cfg, streams[STREAM_DEPLOY])
    users = init_users(cfg, streams[STREAM_USERS])
    P_prev = streams[STREAM_POWERS].uniform(cfg.p_min_mw, cfg.p_max_mw, cfg.n_uavs)
    p_tilde = np.full(cfg.n_uavs, cfg.p_tilde_mw)

    trace = _empty_trace(cfg, "f2e2cp", rep)
    for t in range(1, cfg.slots + 1):
        gamma = lyapunov.aut_solve(qs.Z, lyap.V, qoe_p.u_dl_max)
        fleet = FleetState(uav_pos=X_prev, powers=P_prev, user_pos=users.pos)
        B = lyapunov.cpt_place(qs.Q, fleet, radio, qoe_p, cfg.e_max_m)
        c_th = lyapunov.required_rates(B, fleet, qoe_p, cfg.e_max_m)
        dec = dpt2.algorithm1(qs, B, gamma, X_prev, P_prev, users.pos, c_th, cfg)
        u = channel.achievable_rates(dec.X, users.pos, dec.S, dec.P, radio)
        _record(trace, t, qs, dec.X, dec.P, u, users.pos, dec.S)
        trace.converged[t - 1] = dec.converged
        trace.sca_iters[t - 1] = dec.sca_iters
        trace.objective_traces.append(dec.objective_trace)
        qs = lyapunov.update_queues(qs, c_th, u, dec.P + cfg.p_circuit_mw,
                                    gamma, lyap, p_tilde)
        users = user_mobility_step(users, cfg, streams[STREAM_MOBILITY])
        X_prev, P_prev = dec.X, dec.P
    return trace


def run_benchmark(cfg: ExperimentConfig, seed: int, algo: str,
                  rep: int = 0) -> RunTrace:
    """The five reference strategies; see run_f2e2cp for the full pipeline."""
    if algo not in ("suwpc", "supc", "ctjo", "ctuc", "ctwuc"):
        raise ValueError(f"unknown benchmark {algo!r}")
    radio, qoe_p, lyap = cfg.radio(), cfg.qoe(), cfg.lyapunov()
    streams = rng_streams(seed, rep)
    qs = VirtualQueues.initial(cfg.n_users, cfg.n_uavs, streams[STREAM_QUEUES])
    users = init_users(cfg, streams[STREAM_USERS])
    p_tilde = np.full(cfg.n_uavs, cfg.p_tilde_mw)

    circular = algo in ("ctjo", "ctuc", "ctwuc")
    if circular:
        centers, radius = circle_layout(cfg)
        X_prev = circle_positions(centers, radius, 0, cfg)
    else:
        X_prev = deploy_uavs(cfg, streams[STREAM_DEPLOY])

    max_power = algo in ("supc", "ctuc")
    if max_power:
        P_prev = np.full(cfg.n_uavs, cfg.p_max_mw)
    else:
        P_prev = streams[STREAM_POWERS].uniform(cfg.p_min_mw, cfg.p_max_mw,
                                                cfg.n_uavs)

    trace = _empty_trace(cfg, algo, rep)
    for t in range(1, cfg.slots + 1):
        X_t = circle_positions(centers, radius, t, cfg) if circular else X_prev
        gamma = lyapunov.aut_solve(qs.Z, lyap.V, qoe_p.u_dl_max)
        fleet = FleetState(uav_pos=X_t, powers=P_prev, user_pos=users.pos)
        if algo == "ctwuc":
            B = np.zeros((cfg.n_uavs, cfg.n_users), dtype=np.int8)
        else:
            B = lyapunov.cpt_place(qs.Q, fleet, radio, qoe_p, cfg.e_max_m)
        c_th = lyapunov.required_rates(B, fleet, qoe_p, cfg.e_max_m)

        if algo in ("ctjo", "ctuc"):
            costs = dpt2.delivery_costs(qs, X_t, P_prev, users.pos, radio)
            S = dpt2.solve_assignment(np.where(np.isfinite(costs), costs, 0.0))
        else:
            S = random_delivery(X_t, users.pos, radio, streams[STREAM_DELIVERY])

        if max_power:
            P = np.full(cfg.n_uavs, cfg.p_max_mw)
        else:
            P = optimize_power(qs, S, X_t, c_th, users.pos, P_prev, cfg)

        u = channel.achievable_rates(X_t, users.pos, S, P, radio)
        _record(trace, t, qs, X_t, P, u, users.pos, S)
        qs = lyapunov.update_queues(qs, c_th, u, P + cfg.p_circuit_mw,
                                    gamma, lyap, p_tilde)
        users = user_mobility_step(users, cfg, streams[STREAM_MOBILITY])
        X_prev, P_prev = X_t, P
    return trace


def run(cfg: ExperimentConfig, seed: int, rep: int = 0) -> RunTrace:
    if cfg.algo == "f2e2cp":
        return run_f2e2cp(cfg, seed, rep)
    return run_benchmark(cfg, seed, cfg.algo, rep)


def metrics(trace: RunTrace, cfg: ExperimentConfig) -> dict:
    """Run summary: fairness-profit, power, energy efficiency, Jain index,
    and the analytic versus assignment-frequency PAoI."""
    T = trace.u.shape[0]
    ubar = trace.u.mean(axis=0)
    profit = float(np.log2(1.0 + ubar).sum())
    total_power = float((trace.P + cfg.p_circuit_mw).mean(axis=0).sum())
    energy_eff = profit - cfg.rho * total_power
    denom = cfg.n_users * float((ubar ** 2).sum())
    jain = float(ubar.sum()) ** 2 / denom if denom > 0 else 0.0

    params = cfg.paoi()
    q_last = cfg.paoi_q_max
    vta = paoi.accumulated_intensity(params, q_last)
    theory = paoi.expected_paoi(params, q_last, 2, 0, vta)
    base = theory - paoi.expected_edge_arrival(params)
    total_s = int(trace.assigned.sum())
    if total_s > 0:
        emp_edge = (params.N * (params.l + params.L) * T * params.delta_t
                    / (2.0 * params.L * total_s))
        empirical = base + emp_edge
    else:
        empirical = math.inf
    return {"algo": trace.algo, "profit": profit,
            "total_power_mw": total_power, "energy_eff": energy_eff,
            "jain": jain, "epaoi_theory_s": theory,
            "epaoi_empirical_s": empirical,
            "assigned_total": total_s,
            "sq_final": float(trace.sq[-1]), "sz_final": float(trace.sz[-1]),
            "sh_final": float(trace.sh[-1])}


def average_metrics(rows: list[dict]) -> dict:
    """Element-wise mean of per-rep summaries (non-numeric fields from the
    first row)."""
    out = dict(rows[0])
    for key, val in rows[0].items():
        if isinstance(val, (int, float)) and not isinstance(val, bool):
            out[key] = float(np.mean([r[key] for r in rows]))
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace_csv(path: str, traces: list[RunTrace]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for tr in traces:
            T, J = tr.P.shape
            N = tr.u.shape[1]
            for t in range(1, T + 1):
                idx = t - 1
                sq, sz, sh = tr.sq[idx], tr.sz[idx], tr.sh[idx]
                for j in range(J):
                    writer.writerow([t, tr.rep, tr.algo, "uav", j,
                                     _fmt(float(tr.X[idx, j, 0])),
                                     _fmt(float(tr.X[idx, j, 1])),
                                     _fmt(float(tr.P[idx, j])), "",
                                     _fmt(float(sq)), _fmt(float(sz)),
                                     _fmt(float(sh))])
                for i in range(N):
                    writer.writerow([t, tr.rep, tr.algo, "user", i,
                                     _fmt(float(tr.user_pos[idx, i, 0])),
                                     _fmt(float(tr.user_pos[idx, i, 1])), "",
                                     _fmt(float(tr.u[idx, i])),
                                     _fmt(float(sq)), _fmt(float(sz)),
                                     _fmt(float(sh))])


def write_summary_csv(path: str, summary: dict, reps: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerow([summary["algo"], reps,
                         _fmt(summary["profit"]),
                         _fmt(summary["total_power_mw"]),
                         _fmt(summary["energy_eff"]),
                         _fmt(summary["jain"]),
                         _fmt(summary["epaoi_theory_s"]),
                         _fmt(summary["epaoi_empirical_s"])])


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None,
                   plots: bool = False) -> dict:
    """Run all repetitions of the configured algorithm, average the
    summaries, and optionally persist CSVs and figures."""
    cfg.validate()
    traces = [run(cfg, cfg.seed, rep) for rep in range(cfg.reps)]
    summary = average_metrics([metrics(tr, cfg) for tr in traces])
    summary["reps"] = cfg.reps
    if out_dir is not None:
        try:
            os.makedirs(out_dir, exist_ok=True)
            write_trace_csv(os.path.join(out_dir, "trace.csv"), traces)
            write_summary_csv(os.path.join(out_dir, "summary.csv"),
                              summary, cfg.reps)
        except OSError as exc:
            raise OSError(f"cannot write results under {out_dir!r}: {exc}") from exc
        if plots:
            from . import report
            report.render_run_figures(traces, cfg, out_dir)
    return summary
