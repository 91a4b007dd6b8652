"""Virtual-queue state and the two closed-form decision tiers: the auxiliary
rate variables and the greedy per-UAV content placement."""

import math
from dataclasses import dataclass

import numpy as np

from . import channel, qoe
from .config import LyapunovParams, QoeParams, RadioParams


@dataclass(frozen=True)
class VirtualQueues:
    """Signed queue values; the non-negative projection is applied at read
    sites, not in the recursion."""
    Q: np.ndarray    # per-user, rate-requirement queue
    Z: np.ndarray    # per-user, auxiliary-rate queue
    H: np.ndarray    # per-UAV, average-power queue

    @classmethod
    def initial(cls, n_users: int, n_uavs: int, rng: np.random.Generator) -> "VirtualQueues":
        return cls(Q=rng.uniform(0.0, 1.0, n_users),
                   Z=rng.uniform(0.0, 1.0, n_users),
                   H=rng.uniform(0.0, 1.0, n_uavs))


@dataclass(frozen=True)
class FleetState:
    """Per-slot geometry and powers; user i requests file i."""
    uav_pos: np.ndarray    # (J, 2) meters
    powers: np.ndarray     # (J,) mW
    user_pos: np.ndarray   # (N, 2) meters


def update_queues(qs: VirtualQueues, c_th: np.ndarray, u: np.ndarray,
                  p_tot: np.ndarray, gamma: np.ndarray,
                  params: LyapunovParams, p_tilde: np.ndarray) -> VirtualQueues:
    """One-slot queue recursion; raw signed values are stored."""
    n, j = qs.Q.shape[0], qs.H.shape[0]
    if not (c_th.shape == u.shape == gamma.shape == (n,) and
            p_tot.shape == p_tilde.shape == (j,)):
        raise ValueError("queue update input sizes do not match queue state")
    return VirtualQueues(Q=qs.Q + params.phi * c_th - u,
                         Z=qs.Z + gamma - u,
                         H=qs.H + p_tot - p_tilde)


def aut_solve(Z: np.ndarray, V: float, u_dl_max: float) -> np.ndarray:
    """Closed-form auxiliary rates: per-user minimizer of
    -V*log2(1+gamma) + [Z]^+ * gamma over [0, u_dl_max]."""
    if u_dl_max <= 0:
        raise ValueError("u_dl_max must be positive")
    zp = np.maximum(Z, 0.0)
    gamma = np.full_like(zp, u_dl_max)
    pos = zp > 0
    interior = np.maximum(V / (zp[pos] * math.log(2.0)) - 1.0, 0.0)
    gamma[pos] = np.minimum(interior, u_dl_max)
    return gamma


def cpt_place(Q: np.ndarray, fleet: FleetState, radio: RadioParams,
              q: QoeParams, e_max: float) -> np.ndarray:
    """Greedy per-UAV placement: cache the file whose queue-weighted power
    saving is largest among users within e_max; nearest user as fallback.
    Returns a (J, N) binary matrix with at most one 1 per row."""
    n_uavs = fleet.uav_pos.shape[0]
    n_users = fleet.user_pos.shape[0]
    B = np.zeros((n_uavs, n_users), dtype=np.int8)

    alpha = required_rate_bps(True, q)
    beta = required_rate_bps(False, q)
    H = channel.gain_matrix(fleet.uav_pos, fleet.user_pos, radio)
    I = channel.interference_matrix(H, fleet.powers)
    dist = np.sqrt(((fleet.user_pos[:, None, :] - fleet.uav_pos[None, :, :]) ** 2).sum(axis=2))

    qp = np.maximum(Q, 0.0)
    for j in range(n_uavs):
        nearby = np.flatnonzero(dist[:, j] < e_max)
        if nearby.size == 0:
            B[j, int(np.argmin(dist[:, j]))] = 1
            continue
        saving = (2.0 ** (beta / radio.W) - 2.0 ** (alpha / radio.W)) \
            * (radio.noise_mw + I[nearby, j]) / H[nearby, j]
        scores = qp[nearby] * saving
        B[j, nearby[int(np.argmax(scores))]] = 1   # argmax keeps lowest index on ties
    return B


def required_rate_bps(cached: bool, q: QoeParams) -> float:
    """QoE rate threshold in bits/s (bandwidth folded in once)."""
    return qoe.required_rate(cached, q) * q.W


def required_rates(B: np.ndarray, fleet: FleetState, q: QoeParams,
                   e_max: float) -> np.ndarray:
    """Per-user rate thresholds (bps/Hz) under placement B: the cached branch
    applies when a UAV within e_max holds the user's file."""
    dist = np.sqrt(((fleet.user_pos[:, None, :] - fleet.uav_pos[None, :, :]) ** 2).sum(axis=2))
    cached = ((B.T == 1) & (dist < e_max)).any(axis=1)
    c_cached = qoe.required_rate(True, q)
    c_backhaul = qoe.required_rate(False, q)
    return np.where(cached, c_cached, c_backhaul)


def drift_penalty_upper_bound(qs: VirtualQueues, c_th: np.ndarray,
                              gamma: np.ndarray, p: np.ndarray, u: np.ndarray,
                              params: LyapunovParams, q: QoeParams,
                              p_hat: np.ndarray, p_tilde: np.ndarray,
                              p_circuit: np.ndarray) -> float:
    """Diagnostic: the drift-plus-penalty upper bound for one slot's decision."""
    qp, zp, hp = np.maximum(qs.Q, 0.0), np.maximum(qs.Z, 0.0), np.maximum(qs.H, 0.0)
    const = (qs.Q.size * q.u_dl_max ** 2 + float((p_hat ** 2).sum()) / 2.0)
    fairness = float(np.log2(1.0 + gamma).sum())
    return (const
            - float((hp * (p_tilde - p_circuit)).sum())
            + params.V * params.rho * float(p_circuit.sum())
            + float((qp * params.phi * c_th).sum())
            - params.V * fairness
            + float((zp * gamma).sum())
            + float(((params.V * params.rho + hp) * p).sum())
            - float(((qp + zp) * u).sum()))


def stability_metrics(qs: VirtualQueues, t: int) -> tuple[float, float, float]:
    """Worst-case queue backlog per elapsed slot: (S_Q, S_Z, S_H)."""
    if t < 1:
        raise ValueError("slot index must be >= 1")
    return (float(np.maximum(qs.Q, 0.0).max()) / t,
            float(np.maximum(qs.Z, 0.0).max()) / t,
            float(np.maximum(qs.H, 0.0).max()) / t)
