"""Matplotlib figures written next to the CSV outputs (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .hierarchy import Trajectory  # noqa: E402

# no version or timestamp chunks, so reruns give identical files
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return Path(path)


def intensity_map(traj: Trajectory, path: Path, title: str | None = None) -> Path:
    """Space-time map of |E_s|^2 + |E_d|^2.

    Left: normalised to the global maximum. Right: each snapshot normalised to its
    own maximum, which keeps faint late-time pulses visible.
    """
    maps = traj.intensity_maps
    top = maps.max() if maps.size and maps.max() > 0 else 1.0
    col = maps.max(axis=1, keepdims=True)
    per_time = np.divide(maps, col, out=np.zeros_like(maps), where=col > 0)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2), sharey=True)
    extent = (traj.times[0], traj.times[-1], traj.z[0], traj.z[-1])
    for ax, data, label in ((axes[0], maps / top, "global max"), (axes[1], per_time, "per-snapshot max")):
        im = ax.imshow(data.T, origin="lower", aspect="auto", extent=extent,
                       cmap="jet", vmin=0, vmax=1, interpolation="nearest")
        ax.set_xlabel(r"time $[1/\Gamma]$")
        ax.set_title(label, fontsize="small")
    axes[0].set_ylabel(r"position $[l_{abs}]$")
    fig.colorbar(im, ax=axes, label="relative intensity")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def strength_curves(series: Mapping[str, tuple], path: Path, title: str | None = None) -> Path:
    """Remaining light strength I(t); ``series`` maps a label to (times, values)."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for label, (t, values) in series.items():
        ax.plot(t, values, label=label)
    ax.set_xlabel(r"time $[1/\Gamma]$")
    ax.set_ylabel("I [arb.]")
    if len(series) > 1:
        ax.legend(fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def group_velocity(ells: Sequence[int], values: Sequence[float], errors: Sequence[float],
                   analytic: Sequence[float], path: Path, plateau: float | None = None) -> Path:
    """Numerical v_g against truncation order with the adiabatic curve for reference."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.errorbar(ells, values, yerr=errors, fmt="o", ms=4, label="simulation")
    ax.plot(ells, analytic, "-", label=r"adiabatic $c_0(\ell)$")
    if plateau is not None:
        ax.axhline(plateau, ls="--", color="gray", label=f"plateau {plateau:.3f}")
    ax.set_xlabel(r"truncation order $\ell$")
    ax.set_ylabel(r"$v_g$ $[c\Omega_c^2/g^2N]$")
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def dispersion_curves(omega: np.ndarray, k_plus: np.ndarray, path: Path, title: str | None = None) -> Path:
    """Re k and Im k of the forward branch against frequency."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.plot(omega, k_plus.real, label="Re k")
    ax.plot(omega, k_plus.imag, label="Im k")
    ax.set_xlabel(r"$\omega$ $[\Gamma]$")
    ax.set_ylabel(r"$k$ $[1/l_{abs}]$")
    ax.legend(fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
