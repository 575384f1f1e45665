"""Render the four standard figures from vibro-w data CSVs.

Pure consumer of the CSV contract: no physics is recomputed here.  Columns
expected per figure id:

* 2: delta, epsilon, A (long-form grid triples)
* 3/4: beta, e_tau, c_min_sq, c_ab, c_ac, c_bc, fidelity_plus, fidelity_minus
* 5: beta, fidelity_plus, fidelity_minus
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

E_TAU_MAX = 4.0 / 3.0
C_MIN_SQ_MAX = 4.0 / 9.0

REQUIRED_COLUMNS = {
    2: ("delta", "epsilon", "A"),
    3: ("beta", "e_tau", "c_min_sq", "c_ab", "c_bc", "fidelity_plus", "fidelity_minus"),
    4: ("beta", "e_tau", "c_min_sq", "c_ab", "c_bc", "fidelity_plus", "fidelity_minus"),
    5: ("beta", "fidelity_plus", "fidelity_minus"),
}


class RenderError(RuntimeError):
    """Unusable input data (missing file, empty CSV, missing columns)."""


@dataclass(frozen=True)
class FigureSpec:
    figure_id: int
    csv_paths: tuple[str, ...]
    out_path: str
    beta_min: float | None = None
    beta_max: float | None = None

    def __post_init__(self):
        if self.figure_id not in REQUIRED_COLUMNS:
            raise RenderError(f"figure id must be one of {sorted(REQUIRED_COLUMNS)}, got {self.figure_id}")
        if not self.csv_paths:
            raise RenderError("at least one data CSV is required")


def load_columns(path: str | Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise RenderError(f"CSV {path} is empty") from None
            rows = [row for row in reader if row]
    except OSError as exc:
        raise RenderError(f"cannot read CSV {path}: {exc}") from exc
    if not rows:
        raise RenderError(f"CSV {path} has a header but no data rows")
    missing = [c for c in required if c not in header]
    if missing:
        raise RenderError(f"CSV {path} is missing columns {missing}; header is {header}")
    table = np.asarray(rows, dtype=float)
    return {name: table[:, header.index(name)] for name in header}


def _apply_beta_window(ax, spec: FigureSpec):
    lo, hi = ax.get_xlim()
    if spec.beta_min is not None:
        lo = spec.beta_min
    if spec.beta_max is not None:
        hi = spec.beta_max
    ax.set_xlim(lo, hi)


def _render_heatmap(spec: FigureSpec) -> plt.Figure:
    data = load_columns(spec.csv_paths[0], REQUIRED_COLUMNS[2])
    delta = np.unique(data["delta"])
    eps = np.unique(data["epsilon"])
    if delta.size * eps.size != data["A"].size:
        raise RenderError("fig2 CSV does not form a complete delta x epsilon grid")
    a = data["A"].reshape(delta.size, eps.size)
    fig, ax = plt.subplots(figsize=(5.2, 4.2), constrained_layout=True)
    mesh = ax.pcolormesh(delta, eps, a.T, cmap="viridis", shading="auto")
    fig.colorbar(mesh, ax=ax, label="A")
    ax.set_xlabel(r"detuning $\delta$ ($\omega$)")
    ax.set_ylabel(r"energy $\epsilon$ ($\omega$)")
    return fig


def _reference_line(ax, value: float):
    ax.axhline(value, color="red", linewidth=1.0, zorder=1)


def _render_beta_panels(spec: FigureSpec) -> plt.Figure:
    data = load_columns(spec.csv_paths[0], REQUIRED_COLUMNS[spec.figure_id])
    beta = data["beta"]
    fig, axes = plt.subplots(2, 2, figsize=(8.0, 5.6), constrained_layout=True)
    (ax_a, ax_b), (ax_c, ax_d) = axes

    ax_a.plot(beta, data["e_tau"], color="black", linewidth=0.8)
    _reference_line(ax_a, E_TAU_MAX)
    ax_a.set_ylabel(r"$E_\tau$")

    ax_b.plot(beta, data["c_min_sq"], color="black", linewidth=0.8)
    _reference_line(ax_b, C_MIN_SQ_MAX)
    ax_b.set_ylabel(r"$C_{\min}^2$")

    ax_c.plot(beta, data["fidelity_plus"], color="red", linewidth=0.8, label=r"$e^{+i2\pi/3}$")
    ax_c.plot(beta, data["fidelity_minus"], color="black", linewidth=0.8, label=r"$e^{-i2\pi/3}$")
    ax_c.set_ylabel("fidelity")
    ax_c.legend(fontsize=8, loc="upper right")

    ax_d.plot(beta, data["c_ab"], color="red", linewidth=0.8, label=r"$C_{AB}$")
    ax_d.plot(beta, data["c_bc"], color="black", linewidth=0.8, label=r"$C_{BC}$")
    ax_d.set_ylabel("concurrence")
    ax_d.legend(fontsize=8, loc="upper right")

    for ax in axes.ravel():
        ax.set_xlabel(r"$\beta$")
        _apply_beta_window(ax, spec)
    return fig


def _render_fidelity(spec: FigureSpec) -> plt.Figure:
    data = load_columns(spec.csv_paths[0], REQUIRED_COLUMNS[5])
    fig, ax = plt.subplots(figsize=(6.0, 3.6), constrained_layout=True)
    ax.plot(data["beta"], data["fidelity_plus"], color="red", linewidth=0.8, label=r"$e^{+i2\pi/3}$")
    ax.plot(data["beta"], data["fidelity_minus"], color="black", linewidth=0.8, label=r"$e^{-i2\pi/3}$")
    ax.set_xlabel(r"$\beta$")
    ax.set_ylabel("fidelity")
    ax.legend(fontsize=8, loc="upper right")
    _apply_beta_window(ax, spec)
    return fig


def render(spec: FigureSpec) -> plt.Figure:
    """Build the figure for a spec; the caller owns saving/closing it."""
    if spec.figure_id == 2:
        return _render_heatmap(spec)
    if spec.figure_id in (3, 4):
        return _render_beta_panels(spec)
    return _render_fidelity(spec)


def render_to_file(spec: FigureSpec) -> Path:
    fig = render(spec)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=160, metadata={"Software": None})
    plt.close(fig)
    return out
