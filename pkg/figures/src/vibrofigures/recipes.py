"""Figure recipes over the simulation CSV/JSON output contract.

Each recipe binds a figure id to the experiment kind it consumes, the
columns it requires, and a renderer. Recipes are pure readers: they never
import the simulation package or touch its internals, only the documented
files (report.json, points.csv, traj_*.csv).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


class RecipeError(RuntimeError):
    """Missing inputs or columns; rendering must not emit a file."""


def read_csv(path):
    path = Path(path)
    if not path.exists():
        raise RecipeError(f"missing input {path}")
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if len(rows) < 2:
        raise RecipeError(f"{path} has no data rows")
    cols = rows[0]
    out = {}
    for j, c in enumerate(cols):
        vals = [r[j] for r in rows[1:]]
        try:
            out[c] = np.array([float(v) for v in vals])
        except ValueError:
            out[c] = np.array(vals)
    return out


def require(data, columns, where):
    missing = [c for c in columns if c not in data]
    if missing:
        raise RecipeError(f"{where}: required columns missing: {missing}")


def read_report(exp_dir):
    path = Path(exp_dir) / "report.json"
    if not path.exists():
        raise RecipeError(f"missing {path}")
    return json.loads(path.read_text())


@dataclass(frozen=True)
class FigureRecipe:
    figure_id: str
    kind: str                  # experiment kind consumed
    renderer: callable = field(compare=False)
    description: str = ""

    def render(self, exp_dir, out_path):
        """Renders the figure into out_path; raises RecipeError instead of
        writing anything when inputs are unusable."""
        fig = self.renderer(Path(exp_dir))
        try:
            fig.savefig(out_path, dpi=160, bbox_inches="tight")
        finally:
            plt.close(fig)
        return Path(out_path)


def _pop_columns(data):
    return sorted((c for c in data if c.startswith("P") and c[1:].isdigit()),
                  key=lambda c: int(c[1:]))


def render_selectivity(exp_dir):
    """Grouped bars of final populations per wavelength; log scale makes the
    three-orders-of-magnitude selectivity visible."""
    data = read_csv(exp_dir / "points.csv")
    require(data, ["wavelength_nm", "transfer", "target_nu"], "selectivity points")
    pops = _pop_columns(data)
    if not pops:
        raise RecipeError("selectivity points: no population columns P0..Pn")
    lam = data["wavelength_nm"]
    fig, ax = plt.subplots(figsize=(7, 4.2))
    nbar = len(lam)
    width = 0.8 / nbar
    floor = 1e-16
    for i in range(nbar):
        vals = np.array([max(float(data[c][i]), floor) for c in pops[1:]])
        x = np.arange(1, len(pops)) + (i - (nbar - 1) / 2) * width
        ax.bar(x, vals, width=width, label=f"{lam[i]:.1f} nm")
    ax.set_yscale("log")
    ax.set_ylim(1e-14, 1.5)
    ax.set_xticks(np.arange(1, len(pops)))
    ax.set_xticklabels([f"v={k}" for k in range(1, len(pops))])
    ax.set_xlabel("final vibrational state")
    ax.set_ylabel("population")
    ax.set_title("Selective two-photon excitation")
    ax.legend()
    return fig


def render_detuning(exp_dir):
    """Transfer vs carrier frequency per intensity plus the linear peak
    detuning against intensity."""
    data = read_csv(exp_dir / "points.csv")
    require(data, ["intensity_w_cm2", "omega_au", "transfer"], "detuning points")
    rep = read_report(exp_dir)
    target = rep.get("inputs", {}).get("target_nu", "?")
    fits = rep.get("fits", {})
    fig, axes = plt.subplots(1, 2, figsize=(9.5, 4.0))
    for I in np.unique(data["intensity_w_cm2"]):
        m = data["intensity_w_cm2"] == I
        order = np.argsort(data["omega_au"][m])
        axes[0].plot(data["omega_au"][m][order], data["transfer"][m][order],
                     marker="o", ms=3, label=f"{I:.1e}")
    axes[0].set_xlabel("carrier frequency (au)")
    axes[0].set_ylabel(f"final population v={target}")
    axes[0].legend(title="W/cm$^2$", fontsize=8)
    cal = fits.get("calibration", {})
    det = np.array(cal.get("detunings_au", []))
    ii = np.array(cal.get("intensities_w_cm2", []))
    if det.size:
        axes[1].plot(ii, det, "o")
        s = cal.get("slope_au_per_wcm2")
        if s is not None:
            xs = np.linspace(0, ii.max(), 50)
            axes[1].plot(xs, s * xs, "-",
                         label=f"linear fit, R$^2$={cal.get('r_squared', 0):.4f}")
            axes[1].legend(fontsize=8)
    axes[1].set_xlabel("peak intensity (W/cm$^2$)")
    axes[1].set_ylabel("peak detuning (au)")
    fig.suptitle("Intensity-dependent two-photon detuning")
    fig.tight_layout()
    return fig


def render_transfer_series(exp_dir):
    """Single chirped pulse (dashed) against the locked pulse train (solid)."""
    single = read_csv(exp_dir / "traj_single.csv")
    train = read_csv(exp_dir / "traj_train.csv")
    rep = read_report(exp_dir)
    nu_f = rep.get("inputs", {}).get("nu_f", 1)
    col = f"P{nu_f}"
    require(single, ["time_au", col], "traj_single.csv")
    require(train, ["time_au", col], "traj_train.csv")
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(train["time_au"], train[col], "-", label="pulse train")
    ax.plot(single["time_au"], single[col], "--", label="single chirped pulse")
    ax.set_xlabel("time (au)")
    ax.set_ylabel(f"population v={nu_f}")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.set_title("Coherent accumulation of two-photon transfer")
    return fig


def render_focal(exp_dir):
    """Transfer across the Gaussian focal profile."""
    data = read_csv(exp_dir / "points.csv")
    require(data, ["radius_w0", "intensity_w_cm2", "transfer"], "focal points")
    rep = read_report(exp_dir)
    avg = rep.get("fits", {}).get("area_weighted_transfer")
    fig, axes = plt.subplots(1, 2, figsize=(9.5, 4.0))
    axes[0].plot(data["radius_w0"], data["intensity_w_cm2"], "k-")
    axes[0].set_xlabel("radius (w0)")
    axes[0].set_ylabel("local intensity (W/cm$^2$)")
    axes[1].plot(data["intensity_w_cm2"], data["transfer"], "o-")
    if avg is not None:
        axes[1].axhline(avg, color="gray", ls=":",
                        label=f"focal average {avg:.3f}")
        axes[1].legend(fontsize=8)
    axes[1].set_xlabel("local intensity (W/cm$^2$)")
    axes[1].set_ylabel("transfer")
    fig.suptitle("Focal averaging with chirp fixed at the on-axis optimum")
    fig.tight_layout()
    return fig


def render_cooling(exp_dir):
    """Populations of the lowest vibrational states through the two-pulse
    draining sequence."""
    traj = read_csv(exp_dir / "traj_cooling.csv")
    require(traj, ["time_au", "P0", "P1", "P2"], "traj_cooling.csv")
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for c, style in (("P0", "-"), ("P1", "--"), ("P2", "-.")):
        ax.plot(traj["time_au"], traj[c], style, label=f"v={c[1:]}")
    ax.set_xlabel("time (au)")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.set_title("Two-pulse transfer of a vibrational superposition")
    return fig


def render_chirp_sweep(exp_dir):
    """Final transfer against the chirp constant."""
    data = read_csv(exp_dir / "points.csv")
    require(data, ["chirp_a", "transfer"], "chirp sweep points")
    rep = read_report(exp_dir)
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(data["chirp_a"], data["transfer"], "o-")
    a_star = rep.get("fits", {}).get("a_star")
    if a_star is not None:
        ax.axvline(a_star, color="gray", ls=":", label=f"a* = {a_star:.3f}")
        ax.legend(fontsize=8)
    ax.set_xlabel("chirp constant a (au)")
    ax.set_ylabel("final transfer")
    ax.set_title("Stark-tracking chirp sweep")
    return fig


RECIPES = {
    "fig2": FigureRecipe("fig2", "selectivity", render_selectivity,
                         "final populations per wavelength (log bars)"),
    "fig3": FigureRecipe("fig3", "detuning_scan", render_detuning,
                         "transfer vs frequency and detuning vs intensity"),
    "fig4": FigureRecipe("fig4", "detuning_scan", render_detuning,
                         "same as fig3 for the second target state"),
    "fig5": FigureRecipe("fig5", "train", render_transfer_series,
                         "single chirped pulse vs locked train"),
    "fig6": FigureRecipe("fig6", "focal_average", render_focal,
                         "transfer across the Gaussian focus"),
    "fig7": FigureRecipe("fig7", "cooling", render_cooling,
                         "two-pulse cooling of a superposition"),
    "chirp": FigureRecipe("chirp", "chirp_sweep", render_chirp_sweep,
                          "transfer vs chirp constant"),
}
