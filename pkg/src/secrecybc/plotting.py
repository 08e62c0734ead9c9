"""Render long-format (series, x, y) tables to PNG with matplotlib."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_series(rows, path, xlabel="x", ylabel="y", title=""):
    """One line per series; ``rows`` is an iterable of ``(series, x, y)``."""
    series = {}
    for name, x, y in rows:
        series.setdefault(name, ([], []))
        series[name][0].append(x)
        series[name][1].append(y)
    fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
    for name, (xs, ys) in series.items():
        ax.plot(xs, ys, marker="o", label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if series:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    # no Software stamp so reruns give identical bytes
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
