"""Latency-based QoE model: MOS score, per-user required rates, and the
power-for-rate inversion used by cache placement."""

import math

from .channel import LinkGain
from .config import QoeParams, RadioParams


def max_spectral_efficiency(radio: RadioParams, p_max: float) -> float:
    """Best-case downlink efficiency (bps/Hz): max power, overhead UAV, no
    interference."""
    if p_max <= 0:
        raise ValueError("p_max must be positive")
    snr = p_max * radio.gain_coeff / (radio.g ** 2 * radio.noise_mw)
    return math.log2(1.0 + snr)


def mos(latency: float, q: QoeParams) -> float:
    """Mean opinion score of an edge delivery latency."""
    if latency < 0:
        raise ValueError("latency must be non-negative")
    fastest = q.L / (q.W * q.u_dl_max)
    return (q.D_hat - latency) / (q.D_hat - fastest)


def edge_latency(rate: float, cached: bool, q: QoeParams) -> float:
    """Seconds to deliver one file at the given rate (bps/Hz)."""
    if rate <= 0:
        raise ValueError("rate must be positive; user unassigned this slot")
    base = q.L / (q.W * rate)
    return base if cached else q.D_ul + base


def required_rate(cached: bool, q: QoeParams) -> float:
    """Rate threshold (bps/Hz) for the 'very good' QoE state."""
    fastest = q.L / (q.W * q.u_dl_max)
    denom = q.D_hat - q.D_th * (q.D_hat - fastest)
    if not cached:
        denom -= q.D_ul
    if denom <= 0:
        raise ValueError("QoE target unreachable with these parameters")
    return q.L / (q.W * denom)


def power_for_rate(rate_bps: float, gain: LinkGain, interference_mw: float,
                   radio: RadioParams) -> float:
    """Transmit power (mW) achieving rate_bps at fixed interference; exact
    Shannon inverse."""
    if gain.gain <= 0:
        raise ValueError("gain must be positive")
    return ((2.0 ** (rate_bps / radio.W) - 1.0)
            * (radio.noise_mw + interference_mw) / gain.gain)
