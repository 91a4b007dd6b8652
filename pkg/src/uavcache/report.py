"""Figure rendering for simulation runs: queue stability curves, UAV tracks,
and power/rate time series, written as PNG files next to the CSV output."""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .config import ExperimentConfig


def plot_stability(traces, out_path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    tr = traces[0]
    t = range(1, tr.sq.size + 1)
    ax.plot(t, tr.sq, label="S_Q")
    ax.plot(t, tr.sz, label="S_Z")
    ax.plot(t, tr.sh, label="S_H")
    ax.set_xlabel("time slot")
    ax.set_ylabel("queue stability value")
    ax.set_title(f"{tr.algo}: virtual queue stability (rep {tr.rep})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def plot_trajectories(traces, cfg: ExperimentConfig, out_path: str) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    tr = traces[0]
    J = tr.X.shape[1]
    for j in range(J):
        ax.plot(tr.X[:, j, 0], tr.X[:, j, 1], lw=0.8, label=f"UAV {j}")
        ax.plot(tr.X[-1, j, 0], tr.X[-1, j, 1], marker="^", ms=8, color="k")
    ax.scatter(tr.user_pos[-1, :, 0], tr.user_pos[-1, :, 1],
               s=10, c="gray", alpha=0.6, label="users (final)")
    ax.set_xlim(0, cfg.area_w)
    ax.set_ylim(0, cfg.area_h)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(f"{tr.algo}: UAV tracks (rep {tr.rep})")
    ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def plot_power_rate(traces, cfg: ExperimentConfig, out_path: str) -> None:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    tr = traces[0]
    t = range(1, tr.P.shape[0] + 1)
    ax1.plot(t, (tr.P + cfg.p_circuit_mw).sum(axis=1))
    ax1.set_ylabel("fleet power (mW)")
    ax2.plot(t, tr.u.mean(axis=1))
    ax2.set_ylabel("mean user rate (bps/Hz)")
    ax2.set_xlabel("time slot")
    fig.suptitle(f"{tr.algo}: power and rate (rep {tr.rep})")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def render_run_figures(traces, cfg: ExperimentConfig, out_dir: str) -> None:
    plot_stability(traces, os.path.join(out_dir, "stability.png"))
    plot_trajectories(traces, cfg, os.path.join(out_dir, "trajectories.png"))
    plot_power_rate(traces, cfg, os.path.join(out_dir, "power_rate.png"))
