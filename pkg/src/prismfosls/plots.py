"""Convergence figures for refinement runs.

Renders log-log plots of the estimator against the number of degrees of
freedom, with the fitted rate annotated, and writes them as SVG files next
to the delimited output of the command line driver.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .estimate import fit_rate


def convergence_figure(runs, path, title=None):
    """Plot one or more refinement histories and save as SVG.

    `runs` maps a label to a list of step records (dicts with at least
    'dofs' and 'estimator').  The fitted rate of each run over its last
    half is appended to the legend label.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for label, records in runs.items():
        dofs = np.array([r["dofs"] for r in records], dtype=float)
        eta = np.array([r["estimator"] for r in records], dtype=float)
        text = label
        if len(dofs) >= 3:
            lo = max(0, len(dofs) - max(3, len(dofs) // 2))
            rate = fit_rate(dofs[lo:], eta[lo:])
            text = f"{label} (rate {rate:.2f})"
        ax.loglog(dofs, eta, marker="o", label=text)
    ax.set_xlabel("degrees of freedom")
    ax.set_ylabel("error estimator")
    if title:
        ax.set_title(title)
    ax.grid(True, which="major", alpha=0.5)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
