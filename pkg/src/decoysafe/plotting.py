"""Figure rendering for intensity-uncertainty sweeps.

Uses the Agg backend unconditionally: the CLI writes image files and must
work on headless machines.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .key_rate import SweepRow


def render_sweep_figure(tables: dict[str, list[SweepRow]],
                        path: str | Path,
                        title: str | None = None) -> Path:
    """Render key rate and single-photon bounds against intensity uncertainty.

    tables maps convention name to its sweep rows; the bound panel uses the
    first table since the bounds do not depend on the error-rate convention.
    Returns the path written.
    """
    path = Path(path)
    fig, (ax_rate, ax_frac) = plt.subplots(1, 2, figsize=(9.0, 3.6))

    for name, rows in tables.items():
        deltas = [r.delta_m for r in rows]
        ax_rate.plot(deltas, [max(r.r_hz, 0.0) for r in rows],
                     marker="o", label=name)
    ax_rate.set_xlabel("intensity uncertainty $\\delta_M$")
    ax_rate.set_ylabel("key rate [Hz]")
    ax_rate.legend(fontsize="small")
    ax_rate.grid(True, alpha=0.3)

    first = next(iter(tables.values()))
    deltas = [r.delta_m for r in first]
    ax_frac.plot(deltas, [r.delta1_signal for r in first], marker="s",
                 label="signal $\\Delta_1'$")
    ax_frac.plot(deltas, [r.delta1_decoy for r in first], marker="^",
                 label="decoy $\\Delta_1$")
    ax_frac.set_xlabel("intensity uncertainty $\\delta_M$")
    ax_frac.set_ylabel("single-photon fraction lower bound")
    ax_frac.legend(fontsize="small")
    ax_frac.grid(True, alpha=0.3)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
