"""Matplotlib figures rendered next to the CSV results."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_nmse(rows, path):
    """NMSE against frequency, one line per estimator label."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = list(dict.fromkeys(r[1] for r in rows))
    for label in labels:
        pts = [(f, v) for f, lab, v in rows if lab == label]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    ax.set_xlabel("Frequency (Hz)")
    ax.set_ylabel("NMSE (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_heatmaps(uv, fields, path, title=None):
    """Real part of each field on a slice, sharing one colour scale.

    ``fields`` maps a panel title to complex values at ``uv``.
    """
    names = list(fields)
    vmax = max(float(np.max(np.abs(np.real(v)))) for v in fields.values() if np.all(np.isfinite(v))) or 1.0
    fig, axes = plt.subplots(1, len(names), figsize=(3 * len(names), 3), squeeze=False)
    for ax, name in zip(axes[0], names):
        vals = np.real(fields[name])
        sc = ax.scatter(uv[:, 0], uv[:, 1], c=vals, cmap="RdBu_r", vmin=-vmax, vmax=vmax, s=12, marker="s")
        ax.set_title(name, fontsize=9)
        ax.set_aspect("equal")
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(sc, ax=axes[0].tolist(), shrink=0.8)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
