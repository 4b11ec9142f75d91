"""Matplotlib rendering of the correlation-decay figure."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def publication_style(width=6.0, height=None):
    golden_ratio = (np.sqrt(5) - 1.0) / 2.0
    if height is None:
        height = width * golden_ratio
    fig, ax = plt.subplots(figsize=(width, height), facecolor="w")
    ax.tick_params(direction="in", top=True, right=True)
    return fig, ax


def plot_decay(path, points, t, fitted, single_tau, title=None):
    """Measured g with error bars, fitted curve, clock-only curve and g = 2."""
    fig, ax = publication_style()
    td = np.array([p.delay for p in points]) * 1e6
    ax.errorbar(td, [p.g_value for p in points], yerr=[p.std_error for p in points],
                fmt="o", color="k", ms=4, capsize=2, label="simulated")
    ax.plot(t * 1e6, fitted, "-", color="tab:red", label="two-time-constant fit")
    ax.plot(t * 1e6, single_tau, ":", color="tab:blue", label="clock component only")
    ax.axhline(2.0, color="0.4", lw=0.8, label="classical bound")
    ax.set_xlabel(r"storage time $t$ ($\mu$s)")
    ax.set_ylabel(r"$g_{S,AS}$")
    ax.set_ylim(bottom=0)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
