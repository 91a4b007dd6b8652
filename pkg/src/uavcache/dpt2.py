"""Per-slot delivery, trajectory, and power optimization.

Each slot alternates three steps until the slot objective stalls: an exact
max-weight delivery assignment, a convexified trajectory step, and a
convexified power step. The convex surrogates are first-order bounds built
at the previous iterate, so every accepted step keeps the slot objective
non-increasing; steps that fail to improve are discarded.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel
from .config import ExperimentConfig
from .lyapunov import VirtualQueues
from .solver import (ConvexProgram, InfeasibleStartError, solve_assignment,
                     solve_convex)

SCA_REL_TOL = 1e-4
ACCEPT_VIOL = 1e-6
LN2 = math.log(2.0)


@dataclass
class SlotDecision:
    B: np.ndarray          # (J, N) placement
    S: np.ndarray          # (N, J) delivery
    P: np.ndarray          # (J,) transmit power, mW
    X: np.ndarray          # (J, 2) positions
    gamma: np.ndarray      # (N,) auxiliary rates
    converged: bool = True
    sca_iters: int = 0
    objective: float = 0.0
    objective_trace: list = field(default_factory=list)


@dataclass(frozen=True)
class ScaLocalPoint:
    X_r: np.ndarray
    P_r: np.ndarray


def queue_weights(qs: VirtualQueues) -> np.ndarray:
    return np.maximum(qs.Q, 0.0) + np.maximum(qs.Z, 0.0)


def delivery_costs(qs: VirtualQueues, X: np.ndarray, P: np.ndarray,
                   users: np.ndarray, radio) -> np.ndarray:
    """Queue-weighted rate of every user/UAV pair; pairs outside the LoS
    coverage radius are excluded (-inf)."""
    H = channel.gain_matrix(X, users, radio)
    I = channel.interference_matrix(H, P)
    rates = np.log2(1.0 + P[None, :] * H / (radio.noise_mw + I))
    costs = queue_weights(qs)[:, None] * rates
    dist2 = ((users[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    costs[dist2 > channel.los_coverage_radius(radio) ** 2] = -np.inf
    return costs


def serving_map(S: np.ndarray) -> np.ndarray:
    """Per-user serving UAV index, -1 when unassigned."""
    out = np.full(S.shape[0], -1, dtype=int)
    rows, cols = np.nonzero(S)
    out[rows] = cols
    return out


def dpt2_objective(qs: VirtualQueues, S: np.ndarray, P: np.ndarray,
                   X: np.ndarray, users: np.ndarray, radio, lyap) -> float:
    """The slot objective being minimized: weighted power minus
    queue-weighted user rates."""
    u = channel.achievable_rates(X, users, S, P, radio)
    hp = np.maximum(qs.H, 0.0)
    return float(((lyap.V * lyap.rho + hp) * P).sum()
                 - (queue_weights(qs) * u).sum())


def build_trajectory_program(local: ScaLocalPoint, S: np.ndarray,
                             qs: VirtualQueues, users: np.ndarray,
                             X_prev: np.ndarray,
                             cfg: ExperimentConfig) -> ConvexProgram:
    """Convex surrogate for the trajectory step at the given local point.

    Variables: UAV positions (2J), rate slacks eta for the served users, and
    one interference-distance slack per served user and interfering UAV.
    Unserved users' rate slacks are pinned at zero (their rate bound is the
    empty sum), so they are presolved out of the variable vector.
    """
    radio = cfg.radio()
    qoe = cfg.qoe()
    J = local.X_r.shape[0]
    theta = radio.gain_coeff
    noise = radio.noise_mw
    g2 = radio.g ** 2
    P = local.P_r
    w = queue_weights(qs)
    serve = serving_map(S)
    served = np.flatnonzero(serve >= 0)
    ns = served.size

    # slack layout: for each served user i, one slack per UAV k != serve[i]
    slack_of: dict[tuple[int, int], int] = {}
    for i in served:
        for k in range(J):
            if k != serve[i]:
                slack_of[(i, k)] = len(slack_of)
    n_slack = len(slack_of)
    dim = 2 * J + ns + n_slack
    off_eta = 2 * J
    off_b = 2 * J + ns

    # expansion-point constants
    v_r = ((local.X_r[None, :, :] - users[:, None, :]) ** 2).sum(axis=2)  # (N, J)
    A = noise + (P[None, :] * theta / (g2 + v_r)).sum(axis=1)             # (N,)
    D = np.log2(A)
    E = P[None, :] * theta / ((g2 + v_r) ** 2 * (A * LN2)[:, None])       # (N, J)

    def unpack(x):
        return x[:off_eta].reshape(J, 2), x[off_eta:off_b], x[off_b:]

    def objective(x):
        grad = np.zeros(dim)
        grad[off_eta:off_b] = -w[served]
        return float(-(w[served] * x[off_eta:off_b]).sum()), grad

    def rate_con(x):
        """eta_i - (linearized rate lower bound)_i <= 0, one row per served user."""
        X, eta, bs = unpack(x)
        val = eta.copy()
        jac = np.zeros((ns, dim))
        jac[np.arange(ns), off_eta + np.arange(ns)] = 1.0
        for row, i in enumerate(served):
            j = serve[i]
            diff = X - users[i]                      # (J, 2)
            v = (diff ** 2).sum(axis=1)
            lb = D[i] - float((E[i] * (v - v_r[i])).sum())
            for k in range(J):
                jac[row, 2 * k: 2 * k + 2] += E[i, k] * 2.0 * diff[k]
            interf = noise
            for k in range(J):
                if k != j:
                    interf += P[k] * theta / (g2 + bs[slack_of[(i, k)]])
            lb -= math.log2(interf)
            for k in range(J):
                if k != j:
                    s = slack_of[(i, k)]
                    jac[row, off_b + s] = \
                        -P[k] * theta / ((g2 + bs[s]) ** 2 * interf * LN2)
            val[row] -= lb
        return val, jac

    def bslack_con(x):
        """b_ik <= first-order lower bound of the squared distance."""
        X, _, bs = unpack(x)
        val = np.zeros(n_slack)
        jac = np.zeros((n_slack, dim))
        for (i, k), s in slack_of.items():
            anchor = local.X_r[k] - users[i]
            val[s] = bs[s] + v_r[i, k] - 2.0 * float(anchor @ (X[k] - users[i]))
            jac[s, off_b + s] = 1.0
            jac[s, 2 * k: 2 * k + 2] = -2.0 * anchor
        return val, jac

    pairs = [(j, k) for j in range(J) for k in range(j + 1, J)]

    def safety_con(x):
        """d_min^2 <= linearized pairwise squared distance."""
        X, _, _ = unpack(x)
        val = np.zeros(len(pairs))
        jac = np.zeros((len(pairs), dim))
        for idx, (j, k) in enumerate(pairs):
            anchor = local.X_r[j] - local.X_r[k]
            lin = -float(anchor @ anchor) + 2.0 * float(anchor @ (X[j] - X[k]))
            val[idx] = cfg.d_min_m ** 2 - lin
            jac[idx, 2 * j: 2 * j + 2] = -2.0 * anchor
            jac[idx, 2 * k: 2 * k + 2] = 2.0 * anchor
        return val, jac

    def move_con(x):
        X, _, _ = unpack(x)
        diff = X - X_prev
        val = (diff ** 2).sum(axis=1) - cfg.e_max_m ** 2
        jac = np.zeros((J, dim))
        for j in range(J):
            jac[j, 2 * j: 2 * j + 2] = 2.0 * diff[j]
        return val, jac

    radius2 = channel.los_coverage_radius(radio) ** 2

    def coverage_con(x):
        """Serving UAVs stay inside the LoS coverage disc of their user."""
        X, _, _ = unpack(x)
        val = np.zeros(served.size)
        jac = np.zeros((served.size, dim))
        for idx, i in enumerate(served):
            j = serve[i]
            diff = X[j] - users[i]
            val[idx] = float(diff @ diff) - radius2
            jac[idx, 2 * j: 2 * j + 2] = 2.0 * diff
        return val, jac

    cons = [rate_con, move_con]
    if pairs:
        cons.append(safety_con)
    if n_slack:
        cons.append(bslack_con)
    if served.size:
        cons.append(coverage_con)

    lower = np.empty(dim)
    upper = np.empty(dim)
    lower[0:2 * J:2] = 0.0
    lower[1:2 * J:2] = 0.0
    upper[0:2 * J:2] = cfg.area_w
    upper[1:2 * J:2] = cfg.area_h
    lower[off_eta:off_b] = -np.inf
    upper[off_eta:off_b] = qoe.u_dl_max
    diag2 = cfg.area_w ** 2 + cfg.area_h ** 2
    lower[off_b:] = -g2 / 2.0
    upper[off_b:] = 4.0 * diag2

    start = np.empty(dim)
    start[:off_eta] = local.X_r.ravel()
    rates0 = channel.achievable_rates(local.X_r, users, S, P, radio)
    start[off_eta:off_b] = np.minimum(rates0[served], qoe.u_dl_max)
    for (i, k), s in slack_of.items():
        start[off_b + s] = v_r[i, k]

    return ConvexProgram(dim=dim, objective=objective, ineq_constraints=cons,
                         lower=lower, upper=upper, start=start)


def build_power_program(local: ScaLocalPoint, S: np.ndarray, X: np.ndarray,
                        qs: VirtualQueues, c_th: np.ndarray,
                        users: np.ndarray, cfg: ExperimentConfig,
                        qoe_floor: bool = True) -> ConvexProgram:
    """Convex surrogate for the power step: exact log of the total received
    power, tangent upper bound on the interference term at the local powers."""
    radio = cfg.radio()
    lyap = cfg.lyapunov()
    qoe = cfg.qoe()
    J = X.shape[0]
    noise = radio.noise_mw
    w = queue_weights(qs)
    hp = np.maximum(qs.H, 0.0)
    serve = serving_map(S)
    served = np.flatnonzero(serve >= 0)
    ns = served.size
    H = channel.gain_matrix(X, users, radio)   # (N, J)

    # unserved users' rate slacks are identically zero; presolve them out
    dim = J + ns
    off_eta = J

    # tangent constants at the local powers
    F = np.zeros(ns)
    G = np.zeros((ns, J))
    for row, i in enumerate(served):
        j = serve[i]
        mask = np.arange(J) != j
        base = noise + float((local.P_r[mask] * H[i, mask]).sum())
        F[row] = math.log2(base)
        G[row, mask] = H[i, mask] / (base * LN2)

    def objective(x):
        p = x[:off_eta]
        grad = np.zeros(dim)
        grad[:off_eta] = lyap.V * lyap.rho + hp
        grad[off_eta:] = -w[served]
        return float(((lyap.V * lyap.rho + hp) * p).sum()
                     - (w[served] * x[off_eta:]).sum()), grad

    def rate_con(x):
        """eta_i - (linearized rate lower bound)_i <= 0, per served user."""
        p = x[:off_eta]
        val = x[off_eta:].copy()
        jac = np.zeros((ns, dim))
        jac[np.arange(ns), off_eta + np.arange(ns)] = 1.0
        for row, i in enumerate(served):
            total = noise + float((p * H[i]).sum())
            lb = math.log2(total) - F[row] - float((G[row] * (p - local.P_r)).sum())
            jac[row, :off_eta] = -(H[i] / (total * LN2) - G[row])
            val[row] -= lb
        return val, jac

    def floor_con(x):
        """Served users' rate slack must reach the QoE threshold."""
        val = c_th[served] - x[off_eta:]
        jac = np.zeros((ns, dim))
        jac[np.arange(ns), off_eta + np.arange(ns)] = -1.0
        return val, jac

    cons = [rate_con]
    if qoe_floor and ns:
        cons.append(floor_con)

    lower = np.empty(dim)
    upper = np.empty(dim)
    lower[:off_eta] = cfg.p_min_mw
    upper[:off_eta] = cfg.p_max_mw
    lower[off_eta:] = -np.inf
    upper[off_eta:] = qoe.u_dl_max

    start = np.empty(dim)
    start[:off_eta] = local.P_r
    rates0 = channel.achievable_rates(X, users, S, local.P_r, radio)
    start[off_eta:] = np.minimum(rates0[served], qoe.u_dl_max)

    return ConvexProgram(dim=dim, objective=objective, ineq_constraints=cons,
                         lower=lower, upper=upper, start=start)


def _assignment_step(qs, X, P, users, radio):
    costs = delivery_costs(qs, X, P, users, radio)
    return solve_assignment(np.where(np.isfinite(costs), costs, 0.0))


def _floor_reachable(S, X, P, c_th, users, radio) -> bool:
    serve = serving_map(S)
    served = np.flatnonzero(serve >= 0)
    if served.size == 0:
        return False
    rates = channel.achievable_rates(X, users, S, P, radio)
    return bool(np.all(rates[served] >= c_th[served]))


def _redirect_idle(S: np.ndarray, X_prev: np.ndarray, users: np.ndarray,
                   w: np.ndarray, cfg: ExperimentConfig) -> np.ndarray:
    """SCA initialization for UAVs the warm-start assignment leaves idle.

    The warm start is a flat point for an idle UAV (no served user, hence no
    objective gradient), so it would hover forever. Each idle UAV instead
    starts the iteration one movement step toward the heaviest-queue user
    not already spoken for, keeping the movement and separation constraints.
    """
    serve = serving_map(S)
    idle = [j for j in range(X_prev.shape[0]) if j not in set(serve[serve >= 0])]
    if not idle:
        return X_prev
    X = X_prev.copy()
    taken = set(int(i) for i in np.flatnonzero(serve >= 0))
    order = np.argsort(-w, kind="stable")
    for j in idle:
        target = next((int(i) for i in order if w[i] > 0 and int(i) not in taken), None)
        if target is None:
            continue
        delta = users[target] - X[j]
        dist = float(np.linalg.norm(delta))
        if dist == 0.0:
            taken.add(target)
            continue
        step = min(cfg.e_max_m, dist)
        others = np.delete(np.arange(X.shape[0]), j)
        for _ in range(8):
            cand = np.clip(X[j] + delta * (step / dist),
                           (0.0, 0.0), (cfg.area_w, cfg.area_h))
            if others.size == 0 or \
                    np.linalg.norm(X[others] - cand, axis=1).min() >= cfg.d_min_m:
                X[j] = cand
                taken.add(target)
                break
            step /= 2.0
    return X


def algorithm1(qs: VirtualQueues, B: np.ndarray, gamma: np.ndarray,
               X_prev: np.ndarray, P_prev: np.ndarray, users: np.ndarray,
               c_th: np.ndarray, cfg: ExperimentConfig,
               sca_tol: float = SCA_REL_TOL) -> SlotDecision:
    """Iterative per-slot optimization warm-started at the previous slot."""
    radio = cfg.radio()
    lyap = cfg.lyapunov()
    X_r = X_prev.astype(float).copy()
    P_r = P_prev.astype(float).copy()

    S = _assignment_step(qs, X_r, P_r, users, radio)
    X_r = _redirect_idle(S, X_r, users, queue_weights(qs), cfg)
    S = _assignment_step(qs, X_r, P_r, users, radio)
    obj = dpt2_objective(qs, S, P_r, X_r, users, radio, lyap)
    trace = [obj]
    clean = True
    iters = 0

    for _ in range(cfg.r_max):
        iters += 1
        obj_before = obj

        S_new = _assignment_step(qs, X_r, P_r, users, radio)
        obj_new = dpt2_objective(qs, S_new, P_r, X_r, users, radio, lyap)
        if obj_new <= obj:
            S, obj = S_new, obj_new

        local = ScaLocalPoint(X_r=X_r, P_r=P_r)
        try:
            rep = solve_convex(build_trajectory_program(local, S, qs, users,
                                                        X_prev, cfg))
            if rep.max_constraint_violation <= ACCEPT_VIOL:
                X_new = rep.point[:2 * X_r.shape[0]].reshape(X_r.shape)
                obj_new = dpt2_objective(qs, S, P_r, X_new, users, radio, lyap)
                if obj_new <= obj:
                    X_r, obj = X_new, obj_new
            else:
                clean = False
        except InfeasibleStartError:
            clean = False

        local = ScaLocalPoint(X_r=X_r, P_r=P_r)
        rep = None
        try:
            # the per-slot QoE floor is kept only when the current point
            # already meets it: a floor-forcing step can only worsen the
            # slot objective and would be rejected below anyway
            floor_ok = _floor_reachable(S, X_r, P_r, c_th, users, radio)
            rep = solve_convex(build_power_program(local, S, X_r, qs, c_th,
                                                   users, cfg,
                                                   qoe_floor=floor_ok))
        except InfeasibleStartError:
            rep = None
            clean = False
        if rep is not None and rep.max_constraint_violation <= ACCEPT_VIOL:
            P_new = np.clip(rep.point[:P_r.shape[0]], cfg.p_min_mw, cfg.p_max_mw)
            obj_new = dpt2_objective(qs, S, P_new, X_r, users, radio, lyap)
            if obj_new <= obj:
                P_r, obj = P_new, obj_new

        trace.append(obj)
        if abs(obj_before - obj) <= sca_tol * max(1.0, abs(obj_before)):
            break

    return SlotDecision(B=B, S=S, P=P_r, X=X_r, gamma=gamma, converged=clean,
                        sca_iters=iters, objective=obj, objective_trace=trace)


def decision_violations(dec: SlotDecision, X_prev: np.ndarray,
                        users: np.ndarray, cfg: ExperimentConfig) -> dict:
    """Worst-case violation of each feasibility requirement (0 = satisfied)."""
    radio = cfg.radio()
    out = {
        "placement_rows": float(np.max(dec.B.sum(axis=1) - 1, initial=0.0)),
        "delivery_rows": float(np.max(dec.S.sum(axis=1) - 1, initial=0.0)),
        "delivery_cols": float(np.max(dec.S.sum(axis=0) - 1, initial=0.0)),
        "power_low": float(np.max(cfg.p_min_mw - dec.P, initial=0.0)),
        "power_high": float(np.max(dec.P + cfg.p_circuit_mw - cfg.p_hat_mw,
                                   initial=0.0)),
        "movement": float(np.max(
            np.linalg.norm(dec.X - X_prev, axis=1) - cfg.e_max_m, initial=0.0)),
    }
    J = dec.X.shape[0]
    sep = 0.0
    for j in range(J):
        for k in range(j + 1, J):
            sep = max(sep, cfg.d_min_m - float(np.linalg.norm(dec.X[j] - dec.X[k])))
    out["separation"] = sep
    radius = channel.los_coverage_radius(radio)
    cov = 0.0
    for i, j in zip(*np.nonzero(dec.S)):
        cov = max(cov, float(np.linalg.norm(dec.X[j] - users[i])) - radius)
    out["coverage"] = cov
    return out
