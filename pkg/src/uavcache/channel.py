"""Air-to-ground channel: LoS probability, path loss, link gains, and
interference-aware achievable rates."""

import math
from dataclasses import dataclass

import numpy as np

from .config import RadioParams


@dataclass(frozen=True)
class LinkGain:
    gain: float          # linear power ratio
    distance: float      # 3D meters


def los_probability(r: float, radio: RadioParams) -> float:
    """LoS probability at horizontal distance r (meters)."""
    if r < 0:
        raise ValueError("horizontal distance must be non-negative")
    phi = math.degrees(math.atan2(radio.g, r))   # r=0 -> 90 degrees
    return 1.0 / (1.0 + radio.a * math.exp(-radio.b * (phi - radio.a)))


def path_loss_db(r: float, radio: RadioParams) -> float:
    """Probability-weighted path loss (dB); validation reference only."""
    if r < 0:
        raise ValueError("horizontal distance must be non-negative")
    pr = los_probability(r, radio)
    d3 = math.hypot(radio.g, r)
    return (20.0 * math.log10(4.0 * math.pi / radio.wavelength)
            + 20.0 * math.log10(d3)
            + pr * radio.eta_los + (1.0 - pr) * radio.eta_nlos)


def los_gain(d3: float, radio: RadioParams) -> LinkGain:
    """LoS channel gain at 3D distance d3 >= altitude."""
    if d3 < radio.g:
        raise ValueError(f"3D distance {d3} below flight altitude {radio.g}")
    return LinkGain(gain=radio.gain_coeff / d3 ** 2, distance=d3)


def los_coverage_radius(radio: RadioParams) -> float:
    """Largest horizontal distance keeping elevation >= theta_th."""
    return radio.g / math.tan(math.radians(radio.theta_th))


def gain_matrix(X: np.ndarray, users: np.ndarray, radio: RadioParams) -> np.ndarray:
    """(N, J) LoS gains between every user and every UAV."""
    d2 = ((users[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)  # horizontal^2
    return radio.gain_coeff / (radio.g ** 2 + d2)


def interference_matrix(H: np.ndarray, P: np.ndarray) -> np.ndarray:
    """(N, J) interference at each user when served by each UAV: sum of the
    other UAVs' received powers."""
    received = H * P[None, :]
    return received.sum(axis=1, keepdims=True) - received


def achievable_rates(X: np.ndarray, users: np.ndarray, S: np.ndarray,
                     P: np.ndarray, radio: RadioParams) -> np.ndarray:
    """Per-user downlink spectral efficiency (bps/Hz) under delivery matrix S."""
    n_users, n_uavs = users.shape[0], X.shape[0]
    if S.shape != (n_users, n_uavs) or P.shape != (n_uavs,):
        raise ValueError(f"dimension mismatch: S{S.shape} P{P.shape} "
                         f"X{X.shape} users{users.shape}")
    if np.any(S.sum(axis=1) > 1) or np.any(S.sum(axis=0) > 1):
        raise ValueError("delivery matrix violates one-user-per-UAV constraints")
    H = gain_matrix(X, users, radio)
    I = interference_matrix(H, P)
    sinr = P[None, :] * H / (radio.noise_mw + I)
    return (S * np.log2(1.0 + sinr)).sum(axis=1)
