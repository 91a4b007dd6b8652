"""Peak-age-of-information analytics for the preprocessing queue: intensity
recursion, exact queue distribution, Monte-Carlo oracle, and the closed-form
expected PAoI."""

import math

import numpy as np
from scipy.stats import poisson

from .config import PaoiParams


class MassDeficitError(RuntimeError):
    """Raised when an explicit truncation loses more than the tolerated mass."""


def queue_step(n_a: int, n_w: int, n_c: float) -> int:
    """One interval of the preprocessing queue: accumulate arrivals, drain
    the preprocessing budget, clamp at zero."""
    if n_a < 0 or n_w < 0:
        raise ValueError("packet counts must be non-negative")
    return max(int(n_a + n_w - n_c), 0)


def accumulated_intensity(params: PaoiParams, q_max: int) -> np.ndarray:
    """Poisson-approximation intensity of the accumulated packets for
    intervals 1..q_max (index 0 is interval 1)."""
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    vw = params.vartheta_w
    out = np.zeros(q_max)
    for q in range(1, q_max):
        w_prev = float(vw[min(q - 1, vw.size - 1)])
        total = w_prev + out[q - 1]
        out[q] = max(total - params.n_c * (1.0 - math.exp(-total)), 0.0)
    return out


def _integer_nc(params: PaoiParams) -> int:
    n_c = params.n_c
    if abs(n_c - round(n_c)) > 1e-9:
        raise ValueError("queue distribution requires an integer per-interval "
                         f"preprocessing count, got n_c={n_c}")
    return int(round(n_c))


def exact_pmf(params: PaoiParams, q: int, truncation: int | None = None,
              deficit_tol: float = 1e-9) -> np.ndarray:
    """Distribution of the accumulated packet count at interval q.

    The support is truncated at `truncation`; when omitted, the cutoff is
    sized from the cumulative arrival mass and grown until the lost mass is
    below `deficit_tol`. An explicit truncation that loses more raises
    MassDeficitError.
    """
    if q < 1:
        raise ValueError("interval index must be >= 1")
    n_c = _integer_nc(params)
    vw = params.vartheta_w
    auto = truncation is None
    if auto:
        mean_arrivals = float(sum(vw[min(s, vw.size - 1)] for s in range(q - 1)))
        truncation = int(math.ceil(mean_arrivals + 10.0 * math.sqrt(mean_arrivals)
                                   + n_c + 10))
    while True:
        f = np.zeros(truncation + 1)
        f[0] = 1.0
        for step in range(q - 1):
            lam = float(vw[min(step, vw.size - 1)])
            arrivals = poisson.pmf(np.arange(truncation + 1 + n_c), lam)
            g = np.convolve(f, arrivals)       # P(backlog + arrivals = s)
            nxt = np.zeros(truncation + 1)
            nxt[0] = g[:n_c + 1].sum()
            tail = g[n_c + 1: n_c + 1 + truncation]
            nxt[1: 1 + tail.size] = tail
            f = nxt
        deficit = 1.0 - float(f.sum())
        if deficit <= deficit_tol:
            return f
        if not auto:
            raise MassDeficitError(
                f"truncation {truncation} loses {deficit:.3e} probability mass")
        truncation *= 2


def simulate_queue(params: PaoiParams, q: int, runs: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo accumulated counts at interval q over independent runs."""
    n_c = _integer_nc(params)
    vw = params.vartheta_w
    state = np.zeros(runs, dtype=np.int64)
    for step in range(q - 1):
        lam = float(vw[min(step, vw.size - 1)])
        arrivals = rng.poisson(lam, size=runs)
        state = np.maximum(state + arrivals - n_c, 0)
    return state


def expected_edge_arrival(params: PaoiParams) -> float:
    """Expected seconds for one packet of a file to reach its user."""
    if params.J <= 0 or params.L <= 0:
        raise ValueError("need positive UAV count and content size")
    return (params.l + params.L) * params.N * params.delta_t / (2.0 * params.J * params.L)


def expected_paoi(params: PaoiParams, q: int, m: int, i: int,
                  vartheta_a: np.ndarray) -> float:
    """Closed-form expected peak age of packet m for user i at interval q."""
    if q < 1 or m < 1:
        raise ValueError("interval and packet indices start at 1")
    edge = expected_edge_arrival(params)
    if q == 1 and m == 1:
        return 1.0 / params.n_c + edge
    lam = float(params.vartheta_w[min(q - 1, params.vartheta_w.size - 1)]) \
        * float(params.pr[i])
    if lam <= 0:
        raise ValueError(f"user {i} has no packet arrivals at interval {q}")
    backlog = float(vartheta_a[min(q - 1, vartheta_a.size - 1)])
    return 1.0 / lam + 1.0 / params.n_c + backlog / params.n_c + edge
