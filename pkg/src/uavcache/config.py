"""Experiment configuration: physical constants, QoE targets, queue weights,
PAoI inputs, and the flat key=value config-file loader."""

import math
from dataclasses import dataclass, fields

import numpy as np

ALGORITHMS = ("f2e2cp", "suwpc", "supc", "ctjo", "ctuc", "ctwuc")


@dataclass(frozen=True)
class RadioParams:
    """Air-to-ground propagation constants."""
    a: float                 # environment constant (dimensionless)
    b: float                 # environment constant (dimensionless)
    eta_los: float           # LoS excess loss (dB)
    eta_nlos: float          # NLoS excess loss (dB)
    f_c: float               # carrier frequency (Hz)
    c: float                 # speed of light (m/s)
    theta_th: float          # elevation threshold (degrees)
    sigma2: float            # noise PSD (mW/Hz)
    W: float                 # bandwidth (Hz)
    g: float                 # UAV altitude (m)

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.f_c > 0 and self.W > 0
                and self.g > 0 and 0 < self.theta_th < 90):
            raise ValueError("invalid radio parameters")

    @property
    def wavelength(self) -> float:
        return self.c / self.f_c

    @property
    def g_los(self) -> float:
        """Linear LoS excess-loss factor."""
        return 10.0 ** (-self.eta_los / 10.0)

    @property
    def gain_coeff(self) -> float:
        """Numerator of the LoS gain: g_los * wavelength^2 / (16 pi^2)."""
        return self.g_los * self.wavelength ** 2 / (16.0 * math.pi ** 2)

    @property
    def noise_mw(self) -> float:
        """Total noise power sigma2*W (mW)."""
        return self.sigma2 * self.W


@dataclass(frozen=True)
class QoeParams:
    """MOS/latency model constants. u_dl_max and delta_t are derived, not set."""
    D_hat: float             # max tolerable latency (s)
    D_ul: float              # BS->UAV backhaul latency (s)
    D_th: float              # MOS threshold in (0, 1)
    L: float                 # content size (bits)
    W: float                 # bandwidth (Hz), mirrored from RadioParams
    u_dl_max: float          # max spectral efficiency (bps/Hz)
    delta_t: float           # slot duration (s)

    def __post_init__(self):
        if not 0 < self.D_th < 1:
            raise ValueError("D_th must lie in (0, 1)")
        if self.D_ul < 0 or self.delta_t <= 0:
            raise ValueError("D_ul must be >= 0 and delta_t > 0")
        if self.D_hat <= self.L / (self.W * self.u_dl_max):
            raise ValueError("D_hat below the fastest possible delivery latency")
        if self.delta_t - self.D_ul <= 0:
            raise ValueError("QoE target unreachable for backhauled content")


@dataclass(frozen=True)
class LyapunovParams:
    """Drift-plus-penalty weights."""
    V: float                 # penalty weight
    rho: float               # power trade-off weight
    phi: float               # J/N scaling

    def __post_init__(self):
        if self.V < 0 or self.rho < 0 or self.phi <= 0:
            raise ValueError("invalid Lyapunov parameters")


@dataclass(frozen=True)
class PaoiParams:
    """Preprocessing-queue and PAoI inputs."""
    l: float                     # packet size (bits)
    L: float                     # content size (bits)
    n_c: float                   # packets preprocessed per interval
    vartheta_w: np.ndarray       # per-interval new-arrival intensities
    pr: np.ndarray               # per-user request probabilities, sum 1
    N: int
    J: int
    delta_t: float               # communication slot duration (s)

    def __post_init__(self):
        if self.n_c <= 0:
            raise ValueError("n_c must be positive")
        if np.any(self.vartheta_w < 0):
            raise ValueError("arrival intensities must be non-negative")
        if np.any(self.pr < 0) or abs(float(self.pr.sum()) - 1.0) > 1e-9:
            raise ValueError("request probabilities must be non-negative and sum to 1")


# Paper-default experiment constants (dense-urban propagation; a, b and the
# NLoS excess loss follow the standard dense-urban fit for this channel model).
@dataclass
class ExperimentConfig:
    area_w: float = 500.0
    area_h: float = 500.0
    n_users: int = 50
    n_uavs: int = 4
    slots: int = 500
    reps: int = 15
    seed: int = 1
    algo: str = "f2e2cp"
    r_max: int = 200
    user_speed: float = 1.0          # m/s, pedestrian default

    # radio
    env_a: float = 12.08
    env_b: float = 0.11
    eta_los_db: float = 2.3
    eta_nlos_db: float = 23.0
    f_c_hz: float = 4.9e9
    c_mps: float = 3.0e8
    theta_th_deg: float = 70.0
    sigma2_dbm_hz: float = -174.0
    bandwidth_hz: float = 1.0e8
    altitude_m: float = 200.0

    # QoE
    d_hat_s: float = 24.0
    d_ul_s: float = 5.0
    d_th: float = 0.6
    content_bits: float = 1.5e8

    # power and movement
    p_tilde_mw: float = 450.0
    p_hat_mw: float = 500.0
    p_circuit_mw: float = 20.0
    p_min_mw: float = 1.0
    e_max_m: float = 250.0
    d_min_m: float = 50.0

    # Lyapunov weights
    v_weight: float = 0.01
    rho: float = 0.1

    # PAoI
    packet_bits: float = 40000.0     # 5000 bytes
    preproc_bits_per_s: float = 1.0e6
    paoi_load: float = 1.0           # vartheta_w / n_c
    paoi_q_max: int = 100

    @property
    def p_max_mw(self) -> float:
        return self.p_hat_mw - self.p_circuit_mw

    @property
    def sigma2_mw_hz(self) -> float:
        return 10.0 ** (self.sigma2_dbm_hz / 10.0)

    def radio(self) -> RadioParams:
        return RadioParams(a=self.env_a, b=self.env_b,
                           eta_los=self.eta_los_db, eta_nlos=self.eta_nlos_db,
                           f_c=self.f_c_hz, c=self.c_mps,
                           theta_th=self.theta_th_deg, sigma2=self.sigma2_mw_hz,
                           W=self.bandwidth_hz, g=self.altitude_m)

    def qoe(self) -> QoeParams:
        from .qoe import max_spectral_efficiency
        u_max = max_spectral_efficiency(self.radio(), self.p_max_mw)
        # Slot duration is tied to the cached-delivery latency budget.
        delta_t = self.d_hat_s - self.d_th * (
            self.d_hat_s - self.content_bits / (self.bandwidth_hz * u_max))
        return QoeParams(D_hat=self.d_hat_s, D_ul=self.d_ul_s, D_th=self.d_th,
                         L=self.content_bits, W=self.bandwidth_hz,
                         u_dl_max=u_max, delta_t=delta_t)

    def lyapunov(self) -> LyapunovParams:
        return LyapunovParams(V=self.v_weight, rho=self.rho,
                              phi=self.n_uavs / self.n_users)

    def paoi(self) -> PaoiParams:
        n_c = self.preproc_bits_per_s / self.packet_bits
        vw = np.full(self.paoi_q_max, self.paoi_load * n_c)
        pr = np.full(self.n_users, 1.0 / self.n_users)
        return PaoiParams(l=self.packet_bits, L=self.content_bits, n_c=n_c,
                          vartheta_w=vw, pr=pr, N=self.n_users, J=self.n_uavs,
                          delta_t=self.qoe().delta_t)

    def validate(self) -> None:
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}; choose from {ALGORITHMS}")
        if self.n_users < 1 or self.n_uavs < 1 or self.slots < 1 or self.reps < 1:
            raise ValueError("counts must be positive")
        if self.p_min_mw <= 0 or self.p_min_mw > self.p_max_mw:
            raise ValueError("need 0 < p_min <= p_hat - p_circuit")
        if self.p_tilde_mw <= self.p_circuit_mw:
            raise ValueError("average power budget below circuit power")
        if self.e_max_m <= 0 or self.d_min_m <= 0:
            raise ValueError("movement bounds must be positive")
        if self.area_w <= 0 or self.area_h <= 0:
            raise ValueError("area must be positive")
        if self.user_speed < 0:
            raise ValueError("user speed must be non-negative")
        # constructing the views runs their own invariant checks
        self.radio()
        self.qoe()
        self.lyapunov()
        self.paoi()


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def load_config_file(path: str) -> dict:
    """Parse a flat ``key = value`` config file. Unknown keys are rejected."""
    overrides: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            ftype = _FIELD_TYPES[key]
            if ftype in ("int", int):
                overrides[key] = int(value)
            elif ftype in ("float", float):
                overrides[key] = float(value)
            else:
                overrides[key] = value
    return overrides


def make_config(**overrides) -> ExperimentConfig:
    cfg = ExperimentConfig(**overrides)
    cfg.validate()
    return cfg
