"""SVG line plots of emitted CSV tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .csvio import read_columns  # noqa: E402


def plot_csv(path) -> Path:
    """Plot every column against the first one; log y-axis when all values are positive and span decades."""
    path = Path(path)
    cols, _ = read_columns(path)
    names = list(cols)
    x = cols[names[0]]
    fig, ax = plt.subplots(figsize=(6, 4))
    ys = [cols[n] for n in names[1:]]
    for name, y in zip(names[1:], ys):
        finite = np.isfinite(y)
        ax.plot(x[finite], y[finite], label=name)
    values = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.array([])
    if values.size and np.all(values > 0) and values.max() / values.min() > 100:
        ax.set_yscale("log")
    ax.set_xlabel(names[0])
    ax.legend(fontsize="small")
    fig.tight_layout()
    out = path.with_suffix(".svg")
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out
