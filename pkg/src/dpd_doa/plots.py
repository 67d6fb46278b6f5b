"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

import math


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_spectrum_figure(spectrum, path, true_doa: float | None = None,
                         estimate: float | None = None) -> None:
    """Normalized spatial spectrum over the angle grid."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.2))
    peak = spectrum.power.max()
    power = spectrum.power / peak if peak > 0 else spectrum.power
    ax.plot(spectrum.grid.angles, power, lw=1.2)
    if true_doa is not None:
        ax.axvline(true_doa, color="m", ls=":", lw=1, label="true")
    if estimate is not None:
        ax.axvline(estimate, color="k", ls="--", lw=1, label="estimate")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("normalized power")
    ax.set_title(spectrum.method)
    ax.set_xlim(spectrum.grid.angles[0], spectrum.grid.angles[-1])
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_accuracy_figure(rows, path) -> None:
    """Accuracy vs SNR, one panel per condition, one line per method."""
    plt = _pyplot()
    conditions = sorted({r.condition_id for r in rows})
    fig, axes = plt.subplots(1, len(conditions),
                             figsize=(4 * len(conditions), 3.2),
                             sharey=True, squeeze=False)
    for ax, cid in zip(axes[0], conditions):
        sub = [r for r in rows if r.condition_id == cid]
        for method in sorted({r.method for r in sub}):
            pts = sorted((r.snr_db, r.accuracy) for r in sub if r.method == method)
            x = [p[0] if not math.isinf(p[0]) else 30.0 for p in pts]
            ax.plot(x, [p[1] for p in pts], marker="o", ms=4, label=method)
        ax.set_title(f"condition {cid}")
        ax.set_xlabel("SNR (dB)")
        ax.set_ylim(0, 1.05)
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("accuracy")
    axes[0][-1].legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
